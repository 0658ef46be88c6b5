//! Timeout-based suspicion sensing and per-round filtering.

mod graph;
pub mod mis;

pub use graph::{edge as graph_edge, Edge, GraphDelta, OrderItem, SuspicionState};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::canonical::Canonical;
use crate::model::{ReplicaId, RoundNumber};
use crate::scalar::{LatencyScalar, Slack};
use crate::timeouts::TimeoutTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SuspicionKind {
    Slow,
    False,
}

/// Protocol message types. `ProposalTimestamp` stands for the gap between
/// consecutive proposal timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageType {
    ProposalTimestamp,
    Propose,
    Write,
    Accept,
    FwdPropose,
    Vote,
    AggVote,
}

impl MessageType {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Suspicion {
    pub kind: SuspicionKind,
    pub accuser: ReplicaId,
    pub accused: ReplicaId,
    pub round: RoundNumber,
    pub message_type: MessageType,
}

impl Suspicion {
    pub fn slow(accuser: ReplicaId, accused: ReplicaId, round: RoundNumber, mt: MessageType) -> Self {
        Suspicion {
            kind: SuspicionKind::Slow,
            accuser,
            accused,
            round,
            message_type: mt,
        }
    }
}

/// Partial causal order on message types within one round.
pub trait CausalOrder {
    fn precedes(&self, earlier: MessageType, later: MessageType) -> bool;
}

fn rank(chain: &[MessageType], m: MessageType) -> Option<usize> {
    if m == MessageType::ProposalTimestamp {
        return Some(0);
    }
    chain.iter().position(|&c| c == m).map(|p| p + 1)
}

/// Propose, then Write, then Accept.
#[derive(Debug, Clone, Copy, Default)]
pub struct StarOrder;

impl CausalOrder for StarOrder {
    fn precedes(&self, a: MessageType, b: MessageType) -> bool {
        use MessageType::*;
        match (rank(&[Propose, Write, Accept], a), rank(&[Propose, Write, Accept], b)) {
            (Some(x), Some(y)) => x < y,
            _ => false,
        }
    }
}

/// Propose, FwdPropose, Vote, AggVote.
#[derive(Debug, Clone, Copy, Default)]
pub struct TreeOrder;

impl CausalOrder for TreeOrder {
    fn precedes(&self, a: MessageType, b: MessageType) -> bool {
        use MessageType::*;
        let chain = [Propose, FwdPropose, Vote, AggVote];
        match (rank(&chain, a), rank(&chain, b)) {
            (Some(x), Some(y)) => x < y,
            _ => false,
        }
    }
}

/// What one observer saw in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T: LatencyScalar = u64> {
    pub observer: ReplicaId,
    pub round: RoundNumber,
    pub leader: ReplicaId,
    /// Gap between this round's proposal timestamp and the previous one,
    /// when the observer holds both.
    pub timestamp_gap: Option<T>,
    /// Expected round duration of the previous round.
    pub previous_duration: Option<T>,
    /// Arrival times relative to the proposal timestamp; `None` for never.
    pub arrivals: Vec<(crate::timeouts::MsgKey, Option<T>)>,
}

/// Raw suspicions from one observer for one round.
///
/// Proposal timestamps further apart than `delta * D_R` accuse the leader;
/// an expected message later than `delta * d`, or missing, accuses its sender.
pub fn check_round<T: LatencyScalar>(
    obs: &Observation<T>,
    timeouts: &TimeoutTable<T>,
    slack: Slack,
) -> Vec<Suspicion> {
    let mut out = Vec::new();
    if let (Some(gap), Some(dr)) = (obs.timestamp_gap, obs.previous_duration) {
        if obs.observer != obs.leader && T::exceeds(gap, dr, slack) {
            out.push(Suspicion::slow(
                obs.observer,
                obs.leader,
                obs.round,
                MessageType::ProposalTimestamp,
            ));
        }
    }
    let arrived: std::collections::BTreeMap<_, _> = obs.arrivals.iter().cloned().collect();
    let mut accused = BTreeSet::new();
    for (key, &d) in timeouts.expected_at(obs.observer) {
        let late = match arrived.get(key).copied().flatten() {
            None => true,
            Some(t) => T::exceeds(t, d, slack),
        };
        if late && accused.insert((key.sender, key.message_type)) {
            out.push(Suspicion::slow(
                obs.observer,
                key.sender,
                obs.round,
                key.message_type,
            ));
        }
    }
    out.sort();
    out
}

/// The reply a timely replica gives to a logged slow suspicion against it.
pub fn reciprocate(incoming: &Suspicion, self_id: ReplicaId, timely: bool) -> Option<Suspicion> {
    if incoming.kind != SuspicionKind::Slow || incoming.accused != self_id || !timely {
        return None;
    }
    if incoming.accuser == self_id {
        return None;
    }
    Some(Suspicion {
        kind: SuspicionKind::False,
        accuser: self_id,
        accused: incoming.accuser,
        round: incoming.round,
        message_type: incoming.message_type,
    })
}

fn minimal<'a, O: CausalOrder>(
    sus: impl Iterator<Item = &'a Suspicion> + Clone,
    s: &Suspicion,
    order: &O,
) -> bool {
    !sus.clone()
        .any(|r| order.precedes(r.message_type, s.message_type))
}

/// Filters the raw suspicions of one observer for one round: only those
/// on causally earliest message types survive, and a proposal-timestamp
/// suspicion is dropped when the leader itself suspected someone in the
/// previous round. False suspicions pass unchanged.
pub fn filter_suspicions<O: CausalOrder>(
    raw: &[Suspicion],
    leader_suspected_previous_round: bool,
    order: &O,
) -> Vec<Suspicion> {
    let slow = raw.iter().filter(|s| s.kind == SuspicionKind::Slow);
    let mut out: Vec<Suspicion> = raw
        .iter()
        .filter(|s| match s.kind {
            SuspicionKind::False => true,
            SuspicionKind::Slow => {
                minimal(slow.clone(), s, order)
                    && !(leader_suspected_previous_round
                        && s.message_type == MessageType::ProposalTimestamp)
            }
        })
        .copied()
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Monitor-level filtering of every raw slow suspicion logged for one round.
///
/// Applies [`filter_suspicions`] per observer, then drops a suspicion when
/// its accused raised a suspicion on a causally earlier message in the same
/// round: the accused's lateness is explained by its own late input.
/// `previous_accusers` holds replicas that raised any raw slow suspicion in
/// the previous round.
pub fn filter_round<O: CausalOrder>(
    raw: &[Suspicion],
    previous_accusers: &BTreeSet<ReplicaId>,
    order: &O,
) -> Vec<Suspicion> {
    let observers: BTreeSet<ReplicaId> = raw.iter().map(|s| s.accuser).collect();
    let mut kept = Vec::new();
    for obs in observers {
        let mine: Vec<Suspicion> = raw.iter().filter(|s| s.accuser == obs).copied().collect();
        for s in &mine {
            if s.kind != SuspicionKind::Slow {
                continue;
            }
            let leader_prev = s.message_type == MessageType::ProposalTimestamp
                && previous_accusers.contains(&s.accused);
            if !filter_suspicions(std::slice::from_ref(s), leader_prev, order).is_empty()
                && minimal(mine.iter().filter(|r| r.kind == SuspicionKind::Slow), s, order)
            {
                kept.push(*s);
            }
        }
    }
    kept.retain(|s| {
        !raw.iter().any(|r| {
            r.kind == SuspicionKind::Slow
                && r.accuser == s.accused
                && order.precedes(r.message_type, s.message_type)
        })
    });
    kept.sort();
    kept.dedup();
    kept
}

impl Canonical for Suspicion {
    fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.kind as u8);
        self.accuser.encode(out);
        self.accused.encode(out);
        self.round.encode(out);
        out.push(self.message_type.code());
    }
}
