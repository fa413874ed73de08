//! Raw event log adapters.
//!
//! The canonical format is CSV with header `session_id,timestamp,item_id,
//! behavior` where `timestamp` is integer epoch milliseconds UTC. The
//! yoochoose adapters read the contest click/buy files (no header,
//! `session_id,ISO8601-timestamp,item_id,...`) and tag every record with a
//! fixed behavior label.

use std::io::Read;

use chrono::DateTime;

use crate::error::{Error, Result};
use crate::ingest::RawEvent;

/// Which raw file layout to expect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adapter {
    /// `session_id,timestamp,item_id,behavior` with a header row.
    Canonical,
    /// Yoochoose clicks file; every record becomes a `view`.
    YoochooseClicks,
    /// Yoochoose buys file; every record becomes a `buy`.
    YoochooseBuys,
}

impl Adapter {
    pub fn from_name(name: &str) -> Result<Adapter> {
        match name {
            "canonical" => Ok(Adapter::Canonical),
            "yoochoose-clicks" => Ok(Adapter::YoochooseClicks),
            "yoochoose-buys" => Ok(Adapter::YoochooseBuys),
            other => Err(Error::config(format!("unknown adapter `{other}`"))),
        }
    }
}

/// Outcome of a parse: events plus the malformed-record count.
#[derive(Debug)]
pub struct ParseOutcome {
    pub events: Vec<RawEvent>,
    pub malformed: usize,
    pub lines: usize,
}

/// Parse a raw event stream with the given adapter.
///
/// Malformed records are counted; with `strict` set the first one aborts the
/// parse with its line number, otherwise they are skipped.
pub fn parse_event_log<R: Read>(reader: R, adapter: Adapter, strict: bool) -> Result<ParseOutcome> {
    let has_header = matches!(adapter, Adapter::Canonical);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(reader);

    if has_header {
        let headers = rdr
            .headers()
            .map_err(|e| Error::data(format!("cannot read CSV header: {e}")))?;
        let expected = ["session_id", "timestamp", "item_id", "behavior"];
        let got: Vec<&str> = headers.iter().collect();
        if !got.is_empty() && got != expected {
            return Err(Error::data(format!(
                "unexpected canonical CSV header {got:?}, want {expected:?}"
            )));
        }
    }

    let mut events = Vec::new();
    let mut malformed = 0usize;
    let mut lines = 0usize;
    for record in rdr.records() {
        lines += 1;
        let line = lines + usize::from(has_header);
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                if strict {
                    return Err(Error::Parse {
                        line,
                        message: format!("unreadable record: {e}"),
                    });
                }
                malformed += 1;
                continue;
            }
        };
        match parse_record(&record, adapter) {
            Ok(ev) => events.push(ev),
            Err(message) => {
                if strict {
                    return Err(Error::Parse { line, message });
                }
                malformed += 1;
            }
        }
    }
    Ok(ParseOutcome {
        events,
        malformed,
        lines,
    })
}

fn parse_record(record: &csv::StringRecord, adapter: Adapter) -> std::result::Result<RawEvent, String> {
    match adapter {
        Adapter::Canonical => {
            if record.len() != 4 {
                return Err(format!("expected 4 fields, got {}", record.len()));
            }
            let timestamp: i64 = record[1]
                .trim()
                .parse()
                .map_err(|_| format!("bad timestamp `{}`", &record[1]))?;
            if timestamp < 0 {
                return Err(format!("negative timestamp {timestamp}"));
            }
            let behavior = record[3].trim();
            if behavior.is_empty() {
                return Err("empty behavior label".to_string());
            }
            Ok(RawEvent {
                source_session_key: record[0].to_string(),
                timestamp,
                item_token: record[2].to_string(),
                behavior_label: behavior.to_string(),
            })
        }
        Adapter::YoochooseClicks | Adapter::YoochooseBuys => {
            if record.len() < 3 {
                return Err(format!("expected >= 3 fields, got {}", record.len()));
            }
            let timestamp = parse_iso8601_ms(record[1].trim())?;
            let label = if adapter == Adapter::YoochooseClicks {
                "view"
            } else {
                "buy"
            };
            Ok(RawEvent {
                source_session_key: record[0].to_string(),
                timestamp,
                item_token: record[2].to_string(),
                behavior_label: label.to_string(),
            })
        }
    }
}

fn parse_iso8601_ms(text: &str) -> std::result::Result<i64, String> {
    DateTime::parse_from_rfc3339(text)
        .map(|dt| dt.timestamp_millis())
        .map_err(|_| format!("bad ISO8601 timestamp `{text}`"))
}
