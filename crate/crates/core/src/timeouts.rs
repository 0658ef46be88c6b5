//! Expected-delivery tables and their decomposition witnesses.
//!
//! Every expected delivery time `d` is either a single link latency from
//! the round start, a predecessor's `d` plus one link, or the slowest of a
//! quorum of predecessors plus one link. The round duration is the slowest
//! of a quorum of deliveries to the leader. `verify_witness` re-derives
//! every entry from those rules.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::latency::LatencyMatrix;
use crate::model::ReplicaId;
use crate::scalar::LatencyScalar;
use crate::suspicion::MessageType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MsgKey {
    pub message_type: MessageType,
    pub sender: ReplicaId,
    pub recipient: ReplicaId,
}

impl MsgKey {
    pub fn new(message_type: MessageType, sender: ReplicaId, recipient: ReplicaId) -> Self {
        MsgKey {
            message_type,
            sender,
            recipient,
        }
    }
}

/// How an entry decomposes into earlier entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Witness {
    /// Sent at round start: `d = lat(sender, recipient)`.
    Start,
    /// Sent on receipt of `pred`: `d = d(pred) + lat(sender, recipient)`.
    After(MsgKey),
    /// Sent once a quorum `preds` arrived: `d = max d(preds) + lat(sender, recipient)`.
    Quorum(Vec<MsgKey>),
    /// Sent once every one of `preds` arrived; same formula, no quorum size.
    All(Vec<MsgKey>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeoutTable<T: LatencyScalar = u64> {
    pub leader: ReplicaId,
    pub entries: BTreeMap<MsgKey, T>,
    pub witness: BTreeMap<MsgKey, Witness>,
    /// Deliveries to the leader whose slowest member bounds the round.
    pub round_witness: Vec<MsgKey>,
    /// Distinct senders the round witness must contain.
    pub round_quorum: usize,
    pub round_duration: T,
    /// Message types observers do not check.
    pub unmonitored: BTreeSet<MessageType>,
}

impl<T: LatencyScalar> TimeoutTable<T> {
    pub fn new(leader: ReplicaId) -> Self {
        TimeoutTable {
            leader,
            entries: BTreeMap::new(),
            witness: BTreeMap::new(),
            round_witness: Vec::new(),
            round_quorum: 0,
            round_duration: T::zero(),
            unmonitored: BTreeSet::new(),
        }
    }

    pub fn insert(&mut self, key: MsgKey, d: T, w: Witness) {
        self.entries.insert(key, d);
        self.witness.insert(key, w);
    }

    pub fn get(&self, message_type: MessageType, sender: ReplicaId, recipient: ReplicaId) -> Option<T> {
        self.entries
            .get(&MsgKey::new(message_type, sender, recipient))
            .copied()
    }

    /// Deliveries expected at `observer` from other replicas, checked by the sensor.
    pub fn expected_at(&self, observer: ReplicaId) -> impl Iterator<Item = (&MsgKey, &T)> {
        self.entries.iter().filter(move |(k, _)| {
            k.recipient == observer
                && k.sender != observer
                && !self.unmonitored.contains(&k.message_type)
        })
    }

    /// Checks every entry and the round duration against `lat`. Quorum
    /// witnesses need at least `quorum` distinct senders, the round witness
    /// `round_quorum`. Returns the first violation.
    pub fn verify_witness(&self, lat: &LatencyMatrix<T>, quorum: usize) -> Result<(), String> {
        for (key, &d) in &self.entries {
            let link = lat.get(key.sender, key.recipient);
            let w = self
                .witness
                .get(key)
                .ok_or_else(|| format!("{key:?} has no witness"))?;
            let expect = match w {
                Witness::Start => {
                    if key.sender != self.leader {
                        return Err(format!("{key:?} starts at a non-leader"));
                    }
                    link
                }
                Witness::After(p) => {
                    if p.recipient != key.sender {
                        return Err(format!("{key:?} follows {p:?} not received by its sender"));
                    }
                    self.lookup(p)?.plus(link)
                }
                Witness::Quorum(ps) => {
                    let senders: BTreeSet<_> = ps.iter().map(|p| p.sender).collect();
                    if senders.len() < quorum || ps.iter().any(|p| p.recipient != key.sender) {
                        return Err(format!("{key:?} quorum witness malformed"));
                    }
                    self.max_of(ps)?.plus(link)
                }
                Witness::All(ps) => {
                    if ps.is_empty() || ps.iter().any(|p| p.recipient != key.sender) {
                        return Err(format!("{key:?} aggregate witness malformed"));
                    }
                    self.max_of(ps)?.plus(link)
                }
            };
            if !same(expect, d) {
                return Err(format!("{key:?}: table has {d}, witness gives {expect}"));
            }
        }
        let senders: BTreeSet<_> = self.round_witness.iter().map(|p| p.sender).collect();
        if self.round_witness.iter().any(|p| p.recipient != self.leader) {
            return Err("round witness has a delivery not addressed to the leader".into());
        }
        if senders.len() < self.round_quorum && !self.round_duration.is_infinite() {
            return Err("round witness smaller than the quorum".into());
        }
        if !self.round_witness.is_empty() {
            let d = self.max_of(&self.round_witness)?;
            if !same(d, self.round_duration) {
                return Err(format!(
                    "round duration {} differs from witness {d}",
                    self.round_duration
                ));
            }
        }
        Ok(())
    }

    fn lookup(&self, k: &MsgKey) -> Result<T, String> {
        self.entries
            .get(k)
            .copied()
            .ok_or_else(|| format!("witness refers to missing {k:?}"))
    }

    fn max_of(&self, ks: &[MsgKey]) -> Result<T, String> {
        let mut m = T::zero();
        for k in ks {
            m = m.max_of(self.lookup(k)?);
        }
        Ok(m)
    }
}

fn same<T: LatencyScalar>(a: T, b: T) -> bool {
    (a.is_infinite() && b.is_infinite()) || a == b
}

/// Serializable row form of a table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeoutRow {
    pub message_type: MessageType,
    pub sender: ReplicaId,
    pub recipient: ReplicaId,
    pub d: Option<f64>,
}

impl<T: LatencyScalar> TimeoutTable<T> {
    pub fn rows(&self) -> Vec<TimeoutRow> {
        self.entries
            .iter()
            .map(|(k, &d)| TimeoutRow {
                message_type: k.message_type,
                sender: k.sender,
                recipient: k.recipient,
                d: (!d.is_infinite()).then(|| d.to_f64()),
            })
            .collect()
    }
}
