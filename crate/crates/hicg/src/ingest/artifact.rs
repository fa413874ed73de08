//! Processed-dataset artifact: a directory holding the vocabularies, the
//! train/test session files and a `manifest` of key=value pairs.
//!
//! Layout:
//!   items.vocab      one item token per line, line number = index
//!   behaviors.vocab  one behavior label per line
//!   train.sessions   `session_id<TAB>item:btype:ts,item:btype:ts,...`
//!   test.sessions    same format
//!   manifest         key=value pairs, including a sha256 over the four
//!                    data files

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Behavior, Dataset, Session, Vocab};

const FILES: [&str; 4] = ["items.vocab", "behaviors.vocab", "train.sessions", "test.sessions"];

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn vocab_text(vocab: &Vocab) -> String {
    let mut s = String::new();
    for t in vocab.tokens() {
        s.push_str(t);
        s.push('\n');
    }
    s
}

fn sessions_text(sessions: &[Session]) -> String {
    let mut s = String::new();
    for sess in sessions {
        s.push_str(&sess.session_id);
        s.push('\t');
        for (i, b) in sess.behaviors.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format!("{}:{}:{}", b.item, b.btype, b.timestamp));
        }
        s.push('\n');
    }
    s
}

fn parse_sessions(text: &str, n_items: usize, n_types: usize) -> Result<Vec<Session>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: "missing tab separator in session line".into(),
        })?;
        let mut behaviors = Vec::new();
        for part in rest.split(',') {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("bad behavior triple `{part}`"),
                });
            }
            let item: usize = fields[0].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad item index `{}`", fields[0]),
            })?;
            let btype: usize = fields[1].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad behavior type `{}`", fields[1]),
            })?;
            let timestamp: i64 = fields[2].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad timestamp `{}`", fields[2]),
            })?;
            if item >= n_items || btype >= n_types {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("behavior indices out of range: {part}"),
                });
            }
            behaviors.push(Behavior {
                item,
                btype,
                timestamp,
            });
        }
        out.push(Session {
            session_id: id.to_string(),
            behaviors,
        });
    }
    Ok(out)
}

/// sha256 over the concatenated data files, hex-encoded. This is the value
/// checkpoints pin so that a model is only ever evaluated against the
/// vocabularies it was trained with.
pub fn data_checksum(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in FILES {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(read_file(dir, name)?.as_bytes());
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Checksum over just the vocabulary files.
pub fn vocab_checksum(items: &Vocab, behaviors: &Vocab) -> String {
    let mut hasher = Sha256::new();
    hasher.update(vocab_text(items).as_bytes());
    hasher.update([0u8]);
    hasher.update(vocab_text(behaviors).as_bytes());
    hex::encode(hasher.finalize())
}

/// Write the dataset plus manifest metadata into `dir` (created if needed).
/// `extra` rows land in the manifest verbatim; counts and the checksum are
/// filled in here. Returns the complete manifest.
pub fn write_artifact(
    dir: &Path,
    dataset: &Dataset,
    extra: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_file(dir, "items.vocab", &vocab_text(&dataset.item_vocab))?;
    write_file(dir, "behaviors.vocab", &vocab_text(&dataset.behavior_vocab))?;
    write_file(dir, "train.sessions", &sessions_text(&dataset.train_sessions))?;
    write_file(dir, "test.sessions", &sessions_text(&dataset.test_sessions))?;

    let count_types = |sessions: &[Session]| -> (usize, usize) {
        let mut views = 0usize;
        let mut conversions = 0usize;
        for s in sessions {
            for b in &s.behaviors {
                if b.btype == dataset.target_type {
                    views += 1;
                } else {
                    conversions += 1;
                }
            }
        }
        (views, conversions)
    };
    let (views, conversions) = count_types(&dataset.train_sessions);
    let n_train = dataset.train_sessions.len();

    let mut manifest = extra.clone();
    manifest.insert("format_version".into(), "1".into());
    manifest.insert("train_sessions".into(), n_train.to_string());
    manifest.insert("test_sessions".into(), dataset.test_sessions.len().to_string());
    manifest.insert("items".into(), dataset.n_items().to_string());
    manifest.insert("behavior_types".into(), dataset.n_behavior_types().to_string());
    manifest.insert(
        "target_behavior".into(),
        dataset
            .behavior_vocab
            .token(dataset.target_type)
            .unwrap_or_default()
            .to_string(),
    );
    manifest.insert("views".into(), views.to_string());
    manifest.insert("conversions".into(), conversions.to_string());
    let avg = |n: usize| {
        if n_train == 0 {
            "0".to_string()
        } else {
            format!("{:.4}", n as f64 / n_train as f64)
        }
    };
    manifest.insert("avg_length_of_views".into(), avg(views));
    manifest.insert("avg_length_of_conversions".into(), avg(conversions));
    manifest.insert("checksum".into(), data_checksum(dir)?);

    let mut text = String::new();
    for (k, v) in &manifest {
        text.push_str(&format!("{k}={v}\n"));
    }
    write_file(dir, "manifest", &text)?;
    Ok(manifest)
}

/// Read the manifest into a map.
pub fn read_manifest(dir: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_file(dir, "manifest")?;
    let mut out = BTreeMap::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::data(format!("bad manifest line `{line}`")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// Load a processed dataset back from disk, verifying the checksum.
pub fn load_artifact(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let expected = manifest
        .get("checksum")
        .ok_or_else(|| Error::data("manifest missing checksum".to_string()))?;
    let actual = data_checksum(dir)?;
    if &actual != expected {
        return Err(Error::data(format!(
            "artifact checksum mismatch: manifest says {expected}, files hash to {actual}"
        )));
    }

    let item_vocab = Vocab::from_tokens(read_file(dir, "items.vocab")?.lines().map(String::from))?;
    let behavior_vocab =
        Vocab::from_tokens(read_file(dir, "behaviors.vocab")?.lines().map(String::from))?;
    let target_token = manifest
        .get("target_behavior")
        .ok_or_else(|| Error::data("manifest missing target_behavior".to_string()))?;
    let target_type = behavior_vocab
        .get(target_token)
        .ok_or_else(|| Error::data(format!("target behavior `{target_token}` not in vocabulary")))?;

    let train_sessions = parse_sessions(
        &read_file(dir, "train.sessions")?,
        item_vocab.len(),
        behavior_vocab.len(),
    )?;
    let test_sessions = parse_sessions(
        &read_file(dir, "test.sessions")?,
        item_vocab.len(),
        behavior_vocab.len(),
    )?;

    Ok(Dataset {
        item_vocab,
        behavior_vocab,
        target_type,
        train_sessions,
        test_sessions,
    })
}
