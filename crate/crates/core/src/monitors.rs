//! All monitors of one replica, driven entry by entry from the shared log.
//!
//! Slow suspicions are buffered per view and filtered as a batch once the
//! log moves past that view; false suspicions, latency vectors, complaints
//! and proposals take effect immediately.

use std::collections::BTreeSet;

use crate::canonical::Canonical;
use crate::config::{Basis, ConfigMonitor, ConfigProposal, Decision, ScoreContext, Topology};
use crate::latency::LatencyMatrix;
use crate::log::{LogEntry, LogPayload, SharedLog};
use crate::misbehavior::{Complaint, MisbehaviorMonitor};
use crate::model::{ReplicaId, SystemParams, ViewNumber};
use crate::suspicion::{filter_round, MessageType, StarOrder, Suspicion, SuspicionKind, TreeOrder};
use crate::tree_candidates::TreeSuspicionState;

/// A configuration decision and the log position that triggered it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEvent {
    pub sequence: u64,
    pub view: ViewNumber,
    pub author: ReplicaId,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSet {
    params: SystemParams,
    topology: Topology,
    latency: LatencyMatrix<u64>,
    suspicions: TreeSuspicionState,
    misbehavior: MisbehaviorMonitor,
    config: ConfigMonitor,
    view: ViewNumber,
    batch: Vec<Suspicion>,
    batch_view: ViewNumber,
    /// Accusers of the last flushed batch, with its view.
    last_accusers: (ViewNumber, BTreeSet<ReplicaId>),
    retained: Vec<Suspicion>,
    retained_view: ViewNumber,
    applied: u64,
    skipped: u64,
    events: Vec<ConfigEvent>,
}

impl MonitorSet {
    pub fn new(params: &SystemParams, topology: Topology) -> Self {
        MonitorSet {
            params: params.clone(),
            topology,
            latency: LatencyMatrix::new(params.n),
            suspicions: TreeSuspicionState::new(params),
            misbehavior: MisbehaviorMonitor::new(),
            config: ConfigMonitor::new(topology),
            view: 0,
            batch: Vec::new(),
            batch_view: 0,
            last_accusers: (0, BTreeSet::new()),
            retained: Vec::new(),
            retained_view: 0,
            applied: 0,
            skipped: 0,
            events: Vec::new(),
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn latency(&self) -> &LatencyMatrix<u64> {
        &self.latency
    }

    pub fn suspicions(&self) -> &TreeSuspicionState {
        &self.suspicions
    }

    pub fn faulty(&self) -> &BTreeSet<ReplicaId> {
        self.misbehavior.faulty()
    }

    pub fn config(&self) -> &ConfigMonitor {
        &self.config
    }

    pub fn view(&self) -> ViewNumber {
        self.view
    }

    pub fn applied(&self) -> u64 {
        self.applied
    }

    /// Entries ignored as malformed.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// Suspicions kept by the most recent batch filter, and their view.
    pub fn retained(&self) -> (&[Suspicion], ViewNumber) {
        (&self.retained, self.retained_view)
    }

    /// Slow suspicions still waiting for their view to close.
    pub fn buffered(&self) -> &[Suspicion] {
        &self.batch
    }

    pub fn take_events(&mut self) -> Vec<ConfigEvent> {
        std::mem::take(&mut self.events)
    }

    /// Candidates for special roles and the fault estimate `u` (not yet
    /// capped).
    pub fn candidates(&self) -> (BTreeSet<ReplicaId>, usize) {
        let (c, u) = match self.topology {
            Topology::Tree => self.suspicions.tree_candidates(),
            Topology::Star => self.suspicions.base().base_candidates_with_u(),
        };
        (c.into_iter().collect(), u)
    }

    pub fn absent(&self) -> BTreeSet<ReplicaId> {
        self.suspicions.base().absent()
    }

    pub fn basis(&self) -> Basis {
        Basis {
            matrix_generation: self.latency.generation(),
            candidate_version: self.suspicions.base().version(),
        }
    }

    /// Scoring context under the current state; `absent` must be
    /// [`MonitorSet::absent`].
    pub fn score_context<'a>(&'a self, absent: &'a BTreeSet<ReplicaId>, u: usize) -> ScoreContext<'a, u64> {
        ScoreContext::new(&self.latency, self.params.n, self.params.f, u, absent)
    }

    /// Moves to `view`, closing any earlier suspicion batch first.
    pub fn advance_to(&mut self, view: ViewNumber) {
        if view <= self.view {
            return;
        }
        self.flush();
        self.suspicions.advance_to(view);
        self.view = view;
        self.check_roles();
    }

    fn flush(&mut self) {
        if self.batch.is_empty() {
            return;
        }
        let raw = std::mem::take(&mut self.batch);
        let v = self.batch_view;
        let prev = if self.last_accusers.0 + 1 == v {
            self.last_accusers.1.clone()
        } else {
            BTreeSet::new()
        };
        let kept = match self.topology {
            Topology::Tree => filter_round(&raw, &prev, &TreeOrder),
            Topology::Star => filter_round(&raw, &prev, &StarOrder),
        };
        self.last_accusers = (v, raw.iter().map(|s| s.accuser).collect());
        for s in &kept {
            self.suspicions.apply(s, v);
        }
        self.retained = kept;
        self.retained_view = v;
    }

    fn check_roles(&mut self) {
        if let Some(c) = self.config.current() {
            let (cand, _) = self.candidates();
            if !c.roles_within(&cand) {
                self.config.invalidate();
            }
        }
    }

    fn fits(&self, mt: MessageType) -> bool {
        use MessageType::*;
        match self.topology {
            Topology::Tree => matches!(mt, ProposalTimestamp | Propose | FwdPropose | Vote | AggVote),
            Topology::Star => matches!(mt, ProposalTimestamp | Propose | Write | Accept),
        }
    }

    fn known(&self, r: ReplicaId) -> bool {
        r.index() < self.params.n
    }

    /// Dispatches one entry. Malformed entries are skipped and counted.
    pub fn apply(&mut self, e: &LogEntry) {
        self.advance_to(e.view);
        let ok = e.payload.author() == e.author && self.known(e.author) && self.dispatch(e);
        if ok {
            self.applied += 1;
        } else {
            self.skipped += 1;
        }
    }

    fn dispatch(&mut self, e: &LogEntry) -> bool {
        match &e.payload {
            LogPayload::LatencyVector(v) => self.latency.apply(v).is_ok(),
            LogPayload::Suspicion(s) => self.on_suspicion(s),
            LogPayload::Complaint(c) => self.on_complaint(c),
            LogPayload::ConfigProposal(p) => {
                self.on_proposal(e, p);
                true
            }
        }
    }

    fn on_suspicion(&mut self, s: &Suspicion) -> bool {
        if !self.known(s.accused) || s.accuser == s.accused || !self.fits(s.message_type) {
            return false;
        }
        match s.kind {
            SuspicionKind::Slow => {
                self.batch.push(*s);
                self.batch_view = self.view;
            }
            SuspicionKind::False => {
                self.suspicions.apply(s, self.view);
                self.check_roles();
            }
        }
        true
    }

    fn on_complaint(&mut self, c: &Complaint) -> bool {
        if !self.known(c.accused) {
            return false;
        }
        if let Some(culprit) = self.misbehavior.verify_complaint(c) {
            self.suspicions.exclude_faulty(culprit);
            self.check_roles();
        }
        true
    }

    fn on_proposal(&mut self, e: &LogEntry, p: &ConfigProposal) {
        let absent = self.absent();
        let (cand, u) = self.candidates();
        let basis = self.basis();
        let ctx = ScoreContext::new(&self.latency, self.params.n, self.params.f, u, &absent);
        let decision = self.config.step(p, &ctx, &cand, basis);
        self.events.push(ConfigEvent {
            sequence: e.sequence,
            view: e.view,
            author: e.author,
            decision,
        });
    }

    /// Fresh monitors fed with every entry of `log`.
    pub fn replay(log: &SharedLog, params: &SystemParams, topology: Topology) -> Self {
        let mut m = MonitorSet::new(params, topology);
        for e in log.entries() {
            m.apply(e);
        }
        m
    }
}

impl Canonical for MonitorSet {
    fn encode(&self, out: &mut Vec<u8>) {
        self.params.n.encode(out);
        self.params.f.encode(out);
        self.params.delta.to_bits().encode(out);
        self.params.window_w.encode(out);
        out.push(self.topology as u8);
        self.latency.encode(out);
        self.suspicions.encode(out);
        self.misbehavior.encode(out);
        self.config.encode(out);
        self.view.encode(out);
        self.batch.encode(out);
        self.batch_view.encode(out);
        self.last_accusers.encode(out);
        self.retained.encode(out);
        self.retained_view.encode(out);
        self.applied.encode(out);
        self.skipped.encode(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::LatencyVector;

    fn params() -> SystemParams {
        SystemParams::new(4, 1, 1.2, 50).unwrap()
    }

    #[test]
    fn empty_log_leaves_initial_state() {
        let p = params();
        let m = MonitorSet::replay(&SharedLog::new(), &p, Topology::Star);
        assert_eq!(m.canonical_bytes(), MonitorSet::new(&p, Topology::Star).canonical_bytes());
    }

    #[test]
    fn latency_vector_touches_only_the_matrix() {
        let p = params();
        let mut log = SharedLog::new();
        log.append(
            LogPayload::LatencyVector(LatencyVector::new(ReplicaId(0), vec![0, 5, 6, 7])),
            0,
        );
        let m = MonitorSet::replay(&log, &p, Topology::Star);
        let fresh = MonitorSet::new(&p, Topology::Star);
        assert_eq!(m.latency().generation(), 1);
        assert_eq!(m.suspicions(), fresh.suspicions());
        assert_eq!(m.config(), fresh.config());
    }

    #[test]
    fn malformed_entries_are_counted() {
        let p = params();
        let mut log = SharedLog::new();
        log.append(
            LogPayload::LatencyVector(LatencyVector::new(ReplicaId(0), vec![0, 5])),
            0,
        );
        log.append_as(
            ReplicaId(3),
            LogPayload::Suspicion(Suspicion::slow(ReplicaId(1), ReplicaId(2), 0, MessageType::Write)),
            0,
        );
        log.append(
            LogPayload::Suspicion(Suspicion::slow(ReplicaId(1), ReplicaId(2), 0, MessageType::Vote)),
            0,
        );
        let m = MonitorSet::replay(&log, &p, Topology::Star);
        assert_eq!(m.skipped(), 3);
        assert_eq!(m.applied(), 0);
    }

    #[test]
    fn batches_close_when_the_view_moves() {
        let p = params();
        let mut log = SharedLog::new();
        log.append(
            LogPayload::Suspicion(Suspicion::slow(ReplicaId(1), ReplicaId(2), 0, MessageType::Write)),
            0,
        );
        let mut m = MonitorSet::replay(&log, &p, Topology::Star);
        assert_eq!(m.buffered().len(), 1);
        assert!(!m.suspicions().base().has_edge(ReplicaId(1), ReplicaId(2)));
        m.advance_to(1);
        assert!(m.suspicions().base().has_edge(ReplicaId(1), ReplicaId(2)));
        assert_eq!(m.retained().1, 0);
    }
}
