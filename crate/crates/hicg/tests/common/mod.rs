//! Shared test helpers: a straight-line scalar re-implementation of the
//! forward computation, written with plain loops and kept deliberately
//! independent of the library's tape/graph code paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hicg::autodiff::Matrix;
use hicg::ingest::Behavior;
use hicg::model::ModelConfig;

pub type Vecs = Vec<Vec<f64>>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn row(m: &Matrix, r: usize) -> Vec<f64> {
    (0..m.ncols()).map(|c| m[[r, c]]).collect()
}

/// v (1 x n) times m (n x k), scalar loops.
fn vec_mat(v: &[f64], m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.ncols()];
    for (i, &vi) in v.iter().enumerate() {
        for c in 0..m.ncols() {
            out[c] += vi * m[[i, c]];
        }
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// The oracle's own graph statistics: adjacency per (relation, direction),
/// recomputed from the raw behavior list.
pub struct OracleGraph {
    pub nodes: Vec<usize>,
    pub b2n: Vec<usize>,
    /// adj_out[r][src][dst], normalized by the source row total.
    pub adj_out: Vec<Vecs>,
    /// adj_in[r][dst][src], normalized by the target row total.
    pub adj_in: Vec<Vecs>,
}

pub fn oracle_graph(prefix: &[Behavior], n_types: usize) -> OracleGraph {
    let mut nodes: Vec<usize> = Vec::new();
    let mut b2n = Vec::new();
    for b in prefix {
        let idx = match nodes.iter().position(|&i| i == b.item) {
            Some(i) => i,
            None => {
                nodes.push(b.item);
                nodes.len() - 1
            }
        };
        b2n.push(idx);
    }
    let n = nodes.len();
    let n_rel = n_types * n_types;
    let mut mult = vec![vec![vec![0f64; n]; n]; n_rel];
    for t in 0..prefix.len().saturating_sub(1) {
        let r = prefix[t].btype * n_types + prefix[t + 1].btype;
        mult[r][b2n[t]][b2n[t + 1]] += 1.0;
    }
    let mut adj_out = vec![vec![vec![0f64; n]; n]; n_rel];
    let mut adj_in = vec![vec![vec![0f64; n]; n]; n_rel];
    for r in 0..n_rel {
        for src in 0..n {
            let total: f64 = mult[r][src].iter().sum();
            if total > 0.0 {
                for dst in 0..n {
                    adj_out[r][src][dst] = mult[r][src][dst] / total;
                }
            }
        }
        for dst in 0..n {
            let total: f64 = (0..n).map(|src| mult[r][src][dst]).sum();
            if total > 0.0 {
                for src in 0..n {
                    adj_in[r][dst][src] = mult[r][src][dst] / total;
                }
            }
        }
    }
    OracleGraph {
        nodes,
        b2n,
        adj_out,
        adj_in,
    }
}

/// One gated propagation pass, scalar loops throughout.
pub fn oracle_propagate(
    graph: &OracleGraph,
    tensors: &BTreeMap<String, Matrix>,
    cfg: &ModelConfig,
    steps: usize,
) -> Vecs {
    let n = graph.nodes.len();
    let d = cfg.d;
    let n_rel = cfg.n_relations();
    let embedding = &tensors["embedding"];
    let mut h: Vecs = graph.nodes.iter().map(|&i| row(embedding, i)).collect();

    for _ in 0..steps {
        // Concatenated relation messages, (n x 2*R*d).
        let mut msg = vec![Vec::with_capacity(2 * n_rel * d); n];
        for r in 0..n_rel {
            for (dir, adj) in [("out", &graph.adj_out[r]), ("in", &graph.adj_in[r])] {
                let w = &tensors[&format!("msg.{dir}.r{r}.w")];
                let b = &tensors[&format!("msg.{dir}.r{r}.b")];
                for v in 0..n {
                    // mixed = A[v] . H, then project through W and add bias.
                    let mut mixed = vec![0.0; d];
                    for u in 0..n {
                        let a = adj[v][u];
                        if a != 0.0 {
                            for c in 0..d {
                                mixed[c] += a * h[u][c];
                            }
                        }
                    }
                    let projected = vec_mat(&mixed, w);
                    for c in 0..d {
                        msg[v].push(projected[c] + b[[0, c]]);
                    }
                }
            }
        }

        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            let gate_pre = |gate: &str, state: &[f64]| -> Vec<f64> {
                let w = &tensors[&format!("gate.{gate}.w")];
                let u = &tensors[&format!("gate.{gate}.u")];
                let b = &tensors[&format!("gate.{gate}.b")];
                let mut pre = add(&vec_mat(&msg[v], w), &vec_mat(state, u));
                for c in 0..d {
                    pre[c] += b[[0, c]];
                }
                pre
            };
            let z: Vec<f64> = gate_pre("update", &h[v]).iter().map(|&x| sigmoid(x)).collect();
            let rg: Vec<f64> = gate_pre("reset", &h[v]).iter().map(|&x| sigmoid(x)).collect();
            let rh: Vec<f64> = rg.iter().zip(&h[v]).map(|(r, s)| r * s).collect();
            let c: Vec<f64> = gate_pre("cand", &rh).iter().map(|&x| x.tanh()).collect();
            let hv: Vec<f64> = (0..d).map(|i| (1.0 - z[i]) * h[v][i] + z[i] * c[i]).collect();
            next.push(hv);
        }
        h = next;
    }
    h
}

/// Additive attention with a sigmoid nonlinearity: returns (alpha, mix).
pub fn oracle_attend(
    anchor: &[f64],
    rows: &[Vec<f64>],
    w1: &Matrix,
    w2: &Matrix,
    v: &Matrix,
    b: &Matrix,
) -> (Vec<f64>, Vec<f64>) {
    let d = anchor.len();
    let anchor_part = vec_mat(anchor, w1);
    let mut scores = Vec::with_capacity(rows.len());
    for r in rows {
        let row_part = vec_mat(r, w2);
        let mut u = 0.0;
        for c in 0..d {
            u += v[[c, 0]] * sigmoid(anchor_part[c] + row_part[c] + b[[0, c]]);
        }
        scores.push(u);
    }
    let alpha = softmax(&scores);
    let mut mix = vec![0.0; d];
    for (a, r) in alpha.iter().zip(rows) {
        for c in 0..d {
            mix[c] += a * r[c];
        }
    }
    (alpha, mix)
}

/// Full straight-line forward: returns the probability vector over items.
pub fn oracle_forward(
    prefix: &[Behavior],
    tensors: &BTreeMap<String, Matrix>,
    cfg: &ModelConfig,
) -> Vec<f64> {
    let graph = oracle_graph(prefix, cfg.n_types);
    let h = oracle_propagate(&graph, tensors, cfg, cfg.steps);
    let anchor = h[*graph.b2n.last().unwrap()].clone();

    let mut interests: Vec<Vec<f64>> = Vec::new();
    for btype in 0..cfg.n_types {
        let rows: Vec<Vec<f64>> = prefix
            .iter()
            .enumerate()
            .filter(|(_, b)| b.btype == btype)
            .map(|(t, _)| h[graph.b2n[t]].clone())
            .collect();
        if rows.is_empty() {
            continue;
        }
        let (_, q) = oracle_attend(
            &anchor,
            &rows,
            &tensors[&format!("attn.intra.t{btype}.w1")],
            &tensors[&format!("attn.intra.t{btype}.w2")],
            &tensors[&format!("attn.intra.t{btype}.v")],
            &tensors[&format!("attn.intra.t{btype}.b")],
        );
        interests.push(q);
    }

    let (_, current) = oracle_attend(
        &anchor,
        &interests,
        &tensors["attn.inter.w3"],
        &tensors["attn.inter.w4"],
        &tensors["attn.inter.v"],
        &tensors["attn.inter.b"],
    );

    let all_rows: Vec<Vec<f64>> = graph.b2n.iter().map(|&n| h[n].clone()).collect();
    let (_, long) = oracle_attend(
        &anchor,
        &all_rows,
        &tensors["attn.long.w5"],
        &tensors["attn.long.w6"],
        &tensors["attn.long.v"],
        &tensors["attn.long.b"],
    );

    let mut cat = current.clone();
    cat.extend_from_slice(&long);
    let z = vec_mat(&cat, &tensors["out.w"]);

    let embedding = &tensors["embedding"];
    let logits: Vec<f64> = (0..cfg.n_items)
        .map(|i| {
            let mut dot = 0.0;
            for c in 0..cfg.d {
                dot += z[c] * embedding[[i, c]];
            }
            dot
        })
        .collect();
    softmax(&logits)
}

pub fn beh(item: usize, btype: usize, ts: i64) -> Behavior {
    Behavior {
        item,
        btype,
        timestamp: ts,
    }
}

/// Ten handmade sessions: three frequent items, one rare item whose removal
/// shrinks a session below the length threshold, mixed behaviors, and two
/// sessions a day later that land in the test split.
pub const FIXTURE_CSV: &str = "\
session_id,timestamp,item_id,behavior
u1,1000,apple,view
u1,61000,banana,view
u1,121000,apple,cart
u2,2000,banana,view
u2,62000,cherry,view
u3,3000,apple,view
u3,63000,banana,cart
u3,123000,apple,view
u4,4000,cherry,view
u4,64000,apple,view
u5,5000,banana,view
u5,65000,cherry,cart
u5,125000,banana,view
u6,6000,apple,view
u6,66000,rare1,view
u7,7000,banana,view
u7,67000,cherry,view
u7,127000,apple,view
u8,8000,cherry,view
u8,68000,banana,cart
u8,128000,cherry,view
u9,86401000,apple,view
u9,86461000,banana,view
u10,86402000,cherry,view
u10,86462000,apple,cart
u10,86522000,banana,view
";
