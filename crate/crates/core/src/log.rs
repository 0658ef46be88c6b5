//! The append-only shared log and its JSON-lines form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::config::ConfigProposal;
use crate::latency::LatencyVector;
use crate::misbehavior::Complaint;
use crate::model::{Error, ReplicaId, Result, ViewNumber};
use crate::suspicion::Suspicion;

#[derive(Debug, Clone, PartialEq)]
pub enum LogPayload {
    LatencyVector(LatencyVector<u64>),
    Suspicion(Suspicion),
    Complaint(Complaint),
    ConfigProposal(ConfigProposal),
}

impl LogPayload {
    pub fn author(&self) -> ReplicaId {
        match self {
            LogPayload::LatencyVector(v) => v.author,
            LogPayload::Suspicion(s) => s.accuser,
            LogPayload::Complaint(c) => c.accuser,
            LogPayload::ConfigProposal(p) => p.author,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LogPayload::LatencyVector(_) => "latency_vector",
            LogPayload::Suspicion(_) => "suspicion",
            LogPayload::Complaint(_) => "complaint",
            LogPayload::ConfigProposal(_) => "config_proposal",
        }
    }
}

/// A latency in a JSON body: a number, or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell(u64);

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == u64::MAX {
            s.serialize_str("inf")
        } else {
            s.serialize_u64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(v) => Ok(Cell(v)),
            Raw::S(s) if s.eq_ignore_ascii_case("inf") => Ok(Cell(u64::MAX)),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad latency {s:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VectorBody {
    entries: Vec<Cell>,
}

/// One log entry. Serialized as `{seq, view, kind, author, body}`; `author`
/// is whoever appended it, which replay checks against the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub sequence: u64,
    pub view: ViewNumber,
    pub author: ReplicaId,
    pub payload: LogPayload,
}

#[derive(Serialize, Deserialize)]
struct Line {
    seq: u64,
    view: ViewNumber,
    kind: String,
    author: ReplicaId,
    body: Value,
}

impl LogEntry {
    fn to_line(&self) -> Line {
        let body = match &self.payload {
            LogPayload::LatencyVector(v) => serde_json::to_value(VectorBody {
                entries: v.entries.iter().map(|&e| Cell(e)).collect(),
            }),
            LogPayload::Suspicion(s) => serde_json::to_value(s),
            LogPayload::Complaint(c) => serde_json::to_value(c),
            LogPayload::ConfigProposal(p) => serde_json::to_value(p),
        }
        .expect("payloads serialize");
        Line {
            seq: self.sequence,
            view: self.view,
            kind: self.payload.kind().to_string(),
            author: self.author,
            body,
        }
    }

    fn from_line(l: Line) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::Malformed(format!("entry {}: {e}", l.seq));
        let payload = match l.kind.as_str() {
            "latency_vector" => {
                let b: VectorBody = serde_json::from_value(l.body).map_err(bad)?;
                LogPayload::LatencyVector(LatencyVector::new(
                    l.author,
                    b.entries.into_iter().map(|c| c.0).collect(),
                ))
            }
            "suspicion" => LogPayload::Suspicion(serde_json::from_value(l.body).map_err(bad)?),
            "complaint" => LogPayload::Complaint(serde_json::from_value(l.body).map_err(bad)?),
            "config_proposal" => LogPayload::ConfigProposal(serde_json::from_value(l.body).map_err(bad)?),
            other => return Err(Error::Malformed(format!("entry {}: unknown kind {other:?}", l.seq))),
        };
        Ok(LogEntry {
            sequence: l.seq,
            view: l.view,
            author: l.author,
            payload,
        })
    }
}

/// Append-only, gapless sequence of entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SharedLog {
    entries: Vec<LogEntry>,
}

impl SharedLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends with the payload's own author.
    pub fn append(&mut self, payload: LogPayload, view: ViewNumber) -> &LogEntry {
        let author = payload.author();
        self.append_as(author, payload, view)
    }

    /// Appends on behalf of `author`, who need not match the payload.
    pub fn append_as(&mut self, author: ReplicaId, payload: LogPayload, view: ViewNumber) -> &LogEntry {
        let sequence = self.entries.len() as u64;
        self.entries.push(LogEntry {
            sequence,
            view,
            author,
            payload,
        });
        self.entries.last().expect("just pushed")
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            let line = serde_json::to_string(&e.to_line()).expect("lines serialize");
            writeln!(w, "{line}").map_err(|e| Error::Malformed(e.to_string()))?;
        }
        Ok(())
    }

    /// Loads a JSON-lines dump. Sequence numbers must run 0, 1, 2, ...
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut log = SharedLog::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&line)
                .map_err(|e| Error::Malformed(format!("line {}: {e}", i + 1)))?;
            let e = LogEntry::from_line(l)?;
            if e.sequence != log.entries.len() as u64 {
                return Err(Error::Malformed(format!(
                    "line {}: sequence {} where {} was expected",
                    i + 1,
                    e.sequence,
                    log.entries.len()
                )));
            }
            log.entries.push(e);
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suspicion::MessageType;

    fn sus() -> LogPayload {
        LogPayload::Suspicion(Suspicion::slow(ReplicaId(1), ReplicaId(2), 4, MessageType::Vote))
    }

    #[test]
    fn sequences_are_gapless() {
        let mut log = SharedLog::new();
        assert_eq!(log.append(sus(), 0).sequence, 0);
        log.append(sus(), 0);
        log.append(sus(), 1);
        assert_eq!(log.append(sus(), 1).sequence, 3);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut log = SharedLog::new();
        log.append(
            LogPayload::LatencyVector(LatencyVector::new(ReplicaId(0), vec![0, 50, u64::MAX])),
            0,
        );
        log.append(sus(), 1);
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"inf\""));
        assert!(text.contains("\"kind\":\"suspicion\""));
        assert_eq!(SharedLog::read_jsonl(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn gaps_and_unknown_kinds_are_rejected() {
        let gap = r#"{"seq":1,"view":0,"kind":"suspicion","author":0,"body":{}}"#;
        assert!(SharedLog::read_jsonl(gap.as_bytes()).is_err());
        let kind = r#"{"seq":0,"view":0,"kind":"gossip","author":0,"body":{}}"#;
        assert!(SharedLog::read_jsonl(kind.as_bytes()).is_err());
    }
}
