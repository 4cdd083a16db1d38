use serde::{Deserialize, Serialize};

/// Format tag written in every transcript header.
pub const TRANSCRIPT_FORMAT: &str = "smoney-transcript/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub scenario: String,
    pub scenario_digest: String,
    pub seed: u64,
}

/// One executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub seq: usize,
    pub step: usize,
    pub action: String,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_id: Option<u64>,
    pub point: String,
    pub event: Vec<f64>,
    /// SHA-256 of the canonical message sent, if one was sent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
}

/// A bank notice and which of the token's presentation points it reaches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    pub seq: usize,
    pub step: usize,
    pub notice: String,
    pub token_id: u64,
    pub sent_at: String,
    pub event: Vec<f64>,
    pub digest: String,
    pub delivered: Vec<String>,
    pub undelivered: Vec<String>,
}

/// End-of-run summary for one token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenOutcome {
    pub token: String,
    pub token_id: u64,
    pub owner: String,
    pub accepted_at: Vec<String>,
    pub rejected_at: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Action(ActionRecord),
    Broadcast(BroadcastRecord),
    Outcome(TokenOutcome),
}

/// Append-only run record, serialized as one JSON object per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    records: Vec<Record>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Action(a) => Some(a),
            _ => None,
        })
    }

    pub fn broadcasts(&self) -> impl Iterator<Item = &BroadcastRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Broadcast(b) => Some(b),
            _ => None,
        })
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &TokenOutcome> {
        self.records.iter().filter_map(|r| match r {
            Record::Outcome(o) => Some(o),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, (usize, String)> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Transcript { records })
    }
}

/// First line where a transcript departs from its replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// 1-based line number.
    pub line: usize,
    pub expected: Option<String>,
    pub found: Option<String>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |s: &Option<String>| s.clone().unwrap_or_else(|| "<end of transcript>".into());
        write!(
            f,
            "line {}: expected {} but found {}",
            self.line,
            show(&self.expected),
            show(&self.found)
        )
    }
}

/// Byte-level comparison, line by line.
pub fn first_divergence(expected: &str, found: &str) -> Option<Divergence> {
    let mut a = expected.split_inclusive('\n');
    let mut b = found.split_inclusive('\n');
    let mut line = 1;
    loop {
        match (a.next(), b.next()) {
            (None, None) => return None,
            (x, y) if x == y => line += 1,
            (x, y) => {
                return Some(Divergence {
                    line,
                    expected: x.map(|s| s.trim_end_matches('\n').to_string()),
                    found: y.map(|s| s.trim_end_matches('\n').to_string()),
                })
            }
        }
    }
}
