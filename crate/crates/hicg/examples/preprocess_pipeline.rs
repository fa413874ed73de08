//! Walk the preprocessing stages one by one on a small inline log:
//! parse -> index -> sessionize -> filter -> split -> fraction ->
//! sequence split.
//!
//! Run with: cargo run -p hicg --example preprocess_pipeline

use hicg::ingest::adapters::{parse_event_log, Adapter};
use hicg::ingest::{
    build_dataset, filter_dataset, index_events, sequence_split, sessionize,
    take_recent_fraction, temporal_split, Fraction, SessionizeMode, Vocab,
};

const LOG: &str = "\
session_id,timestamp,item_id,behavior
a,1000,laptop,view
a,61000,mouse,view
a,121000,laptop,cart
b,2000,mouse,view
b,3602000,keyboard,view
b,3662000,mouse,cart
c,4000,laptop,view
c,64000,keyboard,view
c,124000,laptop,view
e,5000,mouse,view
e,65000,laptop,view
d,86400000,mouse,view
d,86460000,laptop,view
";

fn main() -> Result<(), hicg::Error> {
    let parsed = parse_event_log(LOG.as_bytes(), Adapter::Canonical, true)?;
    println!("parsed {} events ({} malformed)", parsed.events.len(), parsed.malformed);

    let behavior_vocab = Vocab::from_tokens(["view".into(), "cart".into()])?;
    let mut items = Vocab::new();
    let indexed = index_events(&parsed.events, &mut items, &behavior_vocab)?;

    // A 30-minute inactivity gap splits session b in two.
    let sessions = sessionize(&indexed, SessionizeMode::ByGap { gap_ms: 30 * 60_000 })?;
    println!("sessionized into {} sessions:", sessions.len());
    for s in &sessions {
        let rendered: Vec<String> = s
            .behaviors
            .iter()
            .map(|b| {
                format!(
                    "{}:{}",
                    items.token(b.item).unwrap(),
                    behavior_vocab.token(b.btype).unwrap()
                )
            })
            .collect();
        println!("  {} -> {}", s.session_id, rendered.join(", "));
    }

    // keyboard appears twice (< 3): dropped, which shortens sessions.
    let filtered = filter_dataset(&sessions, 2, 3)?;
    println!("after filtering (min_len 2, min_freq 3): {} sessions", filtered.len());

    let (train, test) = temporal_split(&filtered, 12 * 3_600_000);
    println!("temporal split: {} train, {} test", train.len(), test.len());

    let train = take_recent_fraction(&train, Fraction::new(1, 1)?);
    let (dataset, stats) = build_dataset(&train, &test, behavior_vocab, "view", &items)?;
    println!(
        "final vocabulary: {} items; test lost {} behaviors / {} sessions to unknown items",
        dataset.n_items(),
        stats.dropped_behaviors,
        stats.dropped_sessions
    );

    let mut n_samples = 0;
    for s in &dataset.train_sessions {
        for sample in sequence_split(s, dataset.target_type, true) {
            println!(
                "  sample: prefix of {} -> label {}",
                sample.prefix.len(),
                dataset.item_vocab.token(sample.label_item).unwrap()
            );
            n_samples += 1;
        }
    }
    println!("{n_samples} training samples with view labels");
    Ok(())
}
