//! Build the heterogeneous graph of a single session, then the union graph
//! of a batch with its connected components and sampled contrastive pairs.
//!
//! Run with: cargo run -p hicg --example build_session_graph

use hicg::graph::{build_session_graph, build_union_graph, connected_components, sample_cl_pairs};
use hicg::ingest::{Behavior, Session};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn session(id: &str, behaviors: &[(usize, usize)]) -> Session {
    Session {
        session_id: id.to_string(),
        behaviors: behaviors
            .iter()
            .enumerate()
            .map(|(t, &(item, btype))| Behavior {
                item,
                btype,
                timestamp: t as i64,
            })
            .collect(),
    }
}

fn main() -> Result<(), hicg::Error> {
    // view=0, cart=1. The same item revisited under a different behavior
    // lands on the same node but its edges carry different relations.
    let s = session("demo", &[(10, 0), (11, 0), (10, 1), (12, 0), (11, 0), (12, 0)]);
    let g = build_session_graph(&s, 2);
    println!(
        "session of {} behaviors -> {} nodes, {} typed edges (total multiplicity {})",
        s.len(),
        g.n_nodes(),
        g.edge_mult.len(),
        g.total_multiplicity()
    );
    println!("edge dump (src item, dst item, src type, dst type, weight):");
    print!("{}", g.dump_edges());

    // A batch of three sessions; the first two share item 11 and merge.
    let batch = vec![
        s,
        session("other", &[(11, 0), (20, 0), (21, 1)]),
        session("disjoint", &[(30, 0), (31, 0)]),
    ];
    let union = build_union_graph(&batch, 2);
    let partition = connected_components(&union);
    println!("\nunion graph of {} items, components:", union.nodes.len());
    for c in &partition.components {
        println!("  {c:?}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cl = sample_cl_pairs(&partition, 0.5, &mut rng)?;
    println!("\nsampled {} contrastive entries (beta = 0.5):", cl.entries.len());
    for e in &cl.entries {
        println!(
            "  anchor {} + positive {} vs negatives {:?} (component {})",
            e.anchor, e.positive, e.negatives, e.component
        );
    }
    Ok(())
}
