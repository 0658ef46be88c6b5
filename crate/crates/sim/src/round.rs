//! One consensus round as a discrete-event simulation.
//!
//! Events are ordered by `(time, sender, receiver, tag)`. Timers sort after
//! every message delivered at the same instant.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use optilog_core::suspicion::{check_round, MessageType, Observation, Suspicion};
use optilog_core::timeouts::MsgKey;
use optilog_core::tree::TreeConfig;
use optilog_core::{Configuration, ReplicaId, RoundNumber, StarConfig, TimeoutTable};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::Adversaries;
use crate::world::{scale, World};

const TIMER: u32 = u32::MAX;

/// What observers remember of the previous round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Previous {
    pub leader: ReplicaId,
    pub timestamp: u64,
    /// Expected round duration of that round.
    pub duration: u64,
}

pub struct RoundSetup<'a> {
    pub world: &'a World,
    pub config: &'a Configuration,
    pub timeouts: &'a TimeoutTable<u64>,
    pub adversaries: &'a Adversaries,
    /// Votes or accepts the collector needs to commit.
    pub quorum: usize,
    pub round: RoundNumber,
    /// Simulated time the round may start.
    pub now: u64,
    pub previous: Option<Previous>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub round: RoundNumber,
    pub leader: ReplicaId,
    pub proposal_timestamp: u64,
    /// First delivery of each message, absolute time.
    pub arrivals: BTreeMap<MsgKey, u64>,
    pub committed: bool,
    pub commit_time: Option<u64>,
    /// `proposal_timestamp + delta * D_R`; `None` when `D_R` is INF.
    pub deadline: Option<u64>,
    /// Votes (tree) or accepts (star) the collector held at the deadline.
    pub votes_at_deadline: usize,
    /// Raw slow suspicions of every correct replica.
    pub suspicions_raised: Vec<Suspicion>,
    /// When the next round may start.
    pub end: u64,
}

struct Sim<'a> {
    s: &'a RoundSetup<'a>,
    rng: ChaCha8Rng,
    heap: BinaryHeap<Reverse<(u64, u32, u32, u8)>>,
    arrivals: BTreeMap<MsgKey, u64>,
    /// Vote counts carried by aggregates, by sender.
    carried: BTreeMap<ReplicaId, usize>,
    last: u64,
}

impl<'a> Sim<'a> {
    fn new(s: &'a RoundSetup<'a>) -> Self {
        Sim {
            s,
            rng: s.world.round_rng(s.round),
            heap: BinaryHeap::new(),
            arrivals: BTreeMap::new(),
            carried: BTreeMap::new(),
            last: s.now,
        }
    }

    fn send(&mut self, t: u64, mt: MessageType, from: ReplicaId, to: ReplicaId) {
        let r = self.s.round;
        if self.s.adversaries.silent(from, r) {
            return;
        }
        let d = if from == to {
            0
        } else {
            let j = self.s.world.jitter_ppm(r, &mut self.rng);
            scale(self.s.world.delay(from, to, j), self.s.adversaries.slowdown_ppm(from, r))
        };
        if d == u64::MAX {
            return;
        }
        self.heap.push(Reverse((t + d, from.0, to.0, mt.code())));
    }

    fn timer(&mut self, t: u64, at: ReplicaId) {
        self.heap.push(Reverse((t, TIMER, at.0, 0)));
    }

    fn pop(&mut self) -> Option<(u64, Option<MsgKey>, ReplicaId)> {
        let Reverse((t, from, to, tag)) = self.heap.pop()?;
        self.last = self.last.max(t);
        if from == TIMER {
            return Some((t, None, ReplicaId(to)));
        }
        let key = MsgKey::new(message_type(tag), ReplicaId(from), ReplicaId(to));
        self.arrivals.entry(key).or_insert(t);
        Some((t, Some(key), ReplicaId(to)))
    }
}

fn message_type(code: u8) -> MessageType {
    use MessageType::*;
    [ProposalTimestamp, Propose, Write, Accept, FwdPropose, Vote, AggVote]
        .into_iter()
        .find(|m| m.code() == code)
        .expect("known code")
}

/// Runs one round of `config` and the sensors of every correct replica.
pub fn run_round(s: &RoundSetup<'_>) -> RoundTrace {
    let leader = s.config.leader();
    let ts = s.now + s.adversaries.proposal_delay(leader, s.round);
    let deadline = (s.timeouts.round_duration != u64::MAX)
        .then(|| ts + scale(s.timeouts.round_duration, s.world.delta.ppm()));
    let mut sim = Sim::new(s);
    let (commit_time, votes) = match s.config {
        Configuration::Star(c) => star(&mut sim, c, ts, deadline),
        Configuration::Tree(t) => tree(&mut sim, t, ts, deadline),
    };
    let arrivals = std::mem::take(&mut sim.arrivals);
    let suspicions_raised = sense(s, leader, ts, &arrivals);
    let end = commit_time.unwrap_or_else(|| deadline.unwrap_or(sim.last).max(ts));
    RoundTrace {
        round: s.round,
        leader,
        proposal_timestamp: ts,
        arrivals,
        committed: commit_time.is_some(),
        commit_time,
        deadline,
        votes_at_deadline: votes,
        suspicions_raised,
        end,
    }
}

fn within(t: u64, deadline: Option<u64>) -> bool {
    deadline.is_none_or(|d| t <= d)
}

fn star(sim: &mut Sim<'_>, c: &StarConfig, ts: u64, deadline: Option<u64>) -> (Option<u64>, usize) {
    use MessageType::*;
    let q = sim.s.quorum;
    let idx = |r: ReplicaId| c.members.iter().position(|&m| m == r);
    let n = c.members.len();
    let mut wrote = vec![false; n];
    let mut writes = vec![0usize; n];
    let mut accepts = 0;
    let mut on_time = 0;
    let mut commit = None;
    for &m in &c.members {
        sim.send(ts, Propose, c.leader, m);
    }
    while let Some((t, key, at)) = sim.pop() {
        let (Some(key), Some(i)) = (key, idx(at)) else {
            continue;
        };
        match key.message_type {
            Propose if !wrote[i] => {
                wrote[i] = true;
                for &m in &c.members {
                    sim.send(t, Write, at, m);
                }
            }
            Write => {
                writes[i] += 1;
                if writes[i] == q {
                    for &m in &c.members {
                        sim.send(t, Accept, at, m);
                    }
                }
            }
            Accept if at == c.leader => {
                accepts += 1;
                if within(t, deadline) {
                    on_time += 1;
                }
                if accepts == q {
                    commit = Some(t);
                }
            }
            _ => {}
        }
    }
    (commit, on_time)
}

fn tree(sim: &mut Sim<'_>, tc: &TreeConfig, ts: u64, deadline: Option<u64>) -> (Option<u64>, usize) {
    use MessageType::*;
    let q = sim.s.quorum;
    let r = tc.root;
    let mut parent = BTreeMap::new();
    let mut pending = BTreeMap::new();
    let mut sent = BTreeMap::new();
    for i in &tc.intermediates {
        for &c in &i.children {
            parent.insert(c, i.id);
        }
        pending.insert(i.id, 0usize);
        sent.insert(i.id, false);
        sim.send(ts, Propose, r, i.id);
    }
    let children = |id: ReplicaId| {
        tc.intermediates
            .iter()
            .find(|i| i.id == id)
            .map(|i| i.children.as_slice())
            .unwrap_or(&[])
    };
    let slack = sim.s.world.delta.ppm();
    let root_alive = !sim.s.adversaries.silent(r, sim.s.round);
    let mut votes = usize::from(root_alive);
    let mut on_time = votes;
    let mut commit = (root_alive && votes >= q).then_some(ts);
    while let Some((t, key, at)) = sim.pop() {
        let Some(key) = key else {
            // An intermediate gives up on missing votes.
            if !sent[&at] {
                sent.insert(at, true);
                sim.carried.insert(at, pending[&at] + 1);
                sim.send(t, AggVote, at, r);
            }
            continue;
        };
        match key.message_type {
            Propose => {
                let kids = children(at);
                if kids.is_empty() {
                    sent.insert(at, true);
                    sim.carried.insert(at, 1);
                    sim.send(t, AggVote, at, r);
                } else {
                    for &c in kids {
                        sim.send(t, FwdPropose, at, c);
                    }
                    let wait = kids
                        .iter()
                        .filter_map(|&c| sim.s.timeouts.get(Vote, c, at))
                        .filter(|&d| d != u64::MAX)
                        .max()
                        .unwrap_or(0);
                    sim.timer(ts + scale(wait, slack), at);
                }
            }
            FwdPropose => {
                if let Some(&p) = parent.get(&at) {
                    sim.send(t, Vote, at, p);
                }
            }
            Vote => {
                if sent.get(&at) == Some(&false) {
                    let got = pending[&at] + 1;
                    pending.insert(at, got);
                    if got == children(at).len() {
                        sent.insert(at, true);
                        sim.carried.insert(at, got + 1);
                        sim.send(t, AggVote, at, r);
                    }
                }
            }
            AggVote if at == r => {
                let k = sim.carried.get(&key.sender).copied().unwrap_or(1);
                votes += k;
                if within(t, deadline) {
                    on_time += k;
                }
                if commit.is_none() && votes >= q {
                    commit = Some(t);
                }
            }
            _ => {}
        }
    }
    (commit, on_time)
}

/// Runs `check_round` at every correct replica on what it received.
fn sense(s: &RoundSetup<'_>, leader: ReplicaId, ts: u64, arrivals: &BTreeMap<MsgKey, u64>) -> Vec<Suspicion> {
    let slack = s.world.delta;
    let mut out = Vec::new();
    let n = s.world.n() as u32;
    for o in (0..n).map(ReplicaId) {
        if s.adversaries.is_faulty(o) {
            continue;
        }
        let got_proposal = arrivals.contains_key(&MsgKey::new(MessageType::Propose, leader, o));
        let gap = match s.previous {
            Some(p) if p.leader == leader && got_proposal && o != leader => {
                Some((ts - p.timestamp, p.duration))
            }
            _ => None,
        };
        let obs = Observation {
            observer: o,
            round: s.round,
            leader,
            timestamp_gap: gap.map(|g| g.0),
            previous_duration: gap.map(|g| g.1),
            arrivals: s
                .timeouts
                .expected_at(o)
                .map(|(k, _)| (*k, arrivals.get(k).map(|&t| t.saturating_sub(ts))))
                .collect(),
        };
        out.extend(check_round(&obs, s.timeouts, slack));
    }
    out.sort();
    out
}
