//! Provable misbehavior: complaints with evidence, and the faulty set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::canonical::Canonical;
use crate::model::{ReplicaId, RoundNumber};
use crate::suspicion::Suspicion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplaintKind {
    Equivocation,
    InvalidAggregate,
    InvalidVote,
    InvalidProposal,
    InvalidComplaint,
}

/// Votes and suspicions an intermediate forwards to the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateVote {
    pub sender: ReplicaId,
    pub round: RoundNumber,
    /// Signed votes, the sender's own included.
    pub votes: BTreeSet<ReplicaId>,
    /// Suspicions standing in for children whose votes did not arrive.
    pub suspicions: Vec<Suspicion>,
}

impl AggregateVote {
    pub fn items(&self) -> usize {
        self.votes.len() + self.suspicions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    /// The offending aggregate together with the child count it must cover.
    Aggregate { aggregate: AggregateVote, children: usize },
    /// Evidence whose check is outside this model; `valid` is its outcome.
    Opaque { valid: bool, blob: Vec<u8> },
}

impl Evidence {
    pub fn is_valid(&self) -> bool {
        match self {
            Evidence::Aggregate {
                aggregate,
                children,
            } => aggregate.items() < children + 1,
            Evidence::Opaque { valid, .. } => *valid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complaint {
    pub accuser: ReplicaId,
    pub accused: ReplicaId,
    pub kind: ComplaintKind,
    pub evidence: Evidence,
}

/// Complaint against an aggregate that covers fewer than `children + 1`
/// replicas with votes or suspicions.
pub fn check_aggregate(aggregate: &AggregateVote, children: usize, receiver: ReplicaId) -> Option<Complaint> {
    let evidence = Evidence::Aggregate {
        aggregate: aggregate.clone(),
        children,
    };
    evidence.is_valid().then_some(Complaint {
        accuser: receiver,
        accused: aggregate.sender,
        kind: ComplaintKind::InvalidAggregate,
        evidence,
    })
}

/// Faulty set with at most one accepted complaint per (accuser, accused, kind).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MisbehaviorMonitor {
    faulty: BTreeSet<ReplicaId>,
    seen: BTreeSet<(ReplicaId, ReplicaId, ComplaintKind)>,
}

impl MisbehaviorMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn faulty(&self) -> &BTreeSet<ReplicaId> {
        &self.faulty
    }

    /// Valid evidence convicts the accused, invalid evidence the accuser.
    /// Returns the newly convicted replica, if any.
    pub fn verify_complaint(&mut self, c: &Complaint) -> Option<ReplicaId> {
        if !self.seen.insert((c.accuser, c.accused, c.kind)) {
            return None;
        }
        let culprit = if c.evidence.is_valid() {
            c.accused
        } else {
            c.accuser
        };
        self.faulty.insert(culprit).then_some(culprit)
    }
}

/// Pure form: whether the complaint is valid and the resulting faulty set.
pub fn verify_complaint(c: &Complaint, faulty: &BTreeSet<ReplicaId>) -> (bool, BTreeSet<ReplicaId>) {
    let valid = c.evidence.is_valid();
    let mut out = faulty.clone();
    out.insert(if valid { c.accused } else { c.accuser });
    (valid, out)
}

impl Canonical for ComplaintKind {
    fn encode(&self, out: &mut Vec<u8>) {
        out.push(*self as u8);
    }
}

impl<A: Canonical, B: Canonical, C: Canonical> Canonical for (A, B, C) {
    fn encode(&self, out: &mut Vec<u8>) {
        self.0.encode(out);
        self.1.encode(out);
        self.2.encode(out);
    }
}

impl Canonical for MisbehaviorMonitor {
    fn encode(&self, out: &mut Vec<u8>) {
        self.faulty.encode(out);
        self.seen.encode(out);
    }
}
