use std::collections::{BTreeMap, BTreeSet};

use crate::canonical::Canonical;
use crate::model::{ReplicaId, SystemParams, ViewNumber};

use super::mis::max_independent_set;
use super::{Suspicion, SuspicionKind};

/// Undirected edge with the smaller id first.
pub type Edge = (ReplicaId, ReplicaId);

pub fn edge(a: ReplicaId, b: ReplicaId) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Entries in age order; purging removes the oldest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderItem {
    Edge(Edge),
    Crash(ReplicaId),
}

/// What a state change did to the graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphDelta {
    pub added: Vec<Edge>,
    /// An edge or vertex was removed, or a vertex returned.
    pub removed: bool,
}

impl GraphDelta {
    fn merge(&mut self, o: GraphDelta) {
        self.added.extend(o.added);
        self.removed |= o.removed;
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && !self.removed
    }
}

/// Two-way suspicion graph over the replicas not in `faulty` or `crashed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspicionState {
    n: usize,
    f: usize,
    window: u64,
    vertices: BTreeSet<ReplicaId>,
    faulty: BTreeSet<ReplicaId>,
    crashed: BTreeSet<ReplicaId>,
    edges: BTreeMap<Edge, u64>,
    /// (accuser, accused) -> view at which the accused is declared crashed.
    pending: BTreeMap<(ReplicaId, ReplicaId), ViewNumber>,
    order: BTreeMap<u64, OrderItem>,
    next_seq: u64,
    last_suspicion_view: ViewNumber,
    current_view: ViewNumber,
    version: u64,
}

impl SuspicionState {
    pub fn new(params: &SystemParams) -> Self {
        SuspicionState {
            n: params.n,
            f: params.f,
            window: params.window_w,
            vertices: params.replicas().collect(),
            faulty: BTreeSet::new(),
            crashed: BTreeSet::new(),
            edges: BTreeMap::new(),
            pending: BTreeMap::new(),
            order: BTreeMap::new(),
            next_seq: 0,
            last_suspicion_view: 0,
            current_view: 0,
            version: 0,
        }
    }

    pub fn vertices(&self) -> &BTreeSet<ReplicaId> {
        &self.vertices
    }

    pub fn faulty(&self) -> &BTreeSet<ReplicaId> {
        &self.faulty
    }

    pub fn crashed(&self) -> &BTreeSet<ReplicaId> {
        &self.crashed
    }

    /// Faulty or crashed.
    pub fn absent(&self) -> BTreeSet<ReplicaId> {
        self.faulty.union(&self.crashed).copied().collect()
    }

    pub fn edge_set(&self) -> BTreeSet<Edge> {
        self.edges.keys().copied().collect()
    }

    pub fn has_edge(&self, a: ReplicaId, b: ReplicaId) -> bool {
        self.edges.contains_key(&edge(a, b))
    }

    /// Edges in insertion order.
    pub fn edges_in_order(&self) -> Vec<Edge> {
        self.order
            .values()
            .filter_map(|it| match it {
                OrderItem::Edge(e) => Some(*e),
                OrderItem::Crash(_) => None,
            })
            .collect()
    }

    pub fn pending(&self) -> &BTreeMap<(ReplicaId, ReplicaId), ViewNumber> {
        &self.pending
    }

    pub fn current_view(&self) -> ViewNumber {
        self.current_view
    }

    pub fn last_suspicion_view(&self) -> ViewNumber {
        self.last_suspicion_view
    }

    /// Bumped on every change to vertices or edges.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn quorum(&self) -> usize {
        self.n - self.f
    }

    /// Applies one retained suspicion logged at `view`.
    ///
    /// A slow suspicion between two members of V adds their edge and starts
    /// a deadline of `f + 1` views for the accused to reciprocate. A false
    /// suspicion clears the matching deadline and adds the edge if missing.
    pub fn apply(&mut self, s: &Suspicion, view: ViewNumber) -> GraphDelta {
        let mut delta = GraphDelta::default();
        if s.accuser == s.accused
            || !self.vertices.contains(&s.accuser)
            || !self.vertices.contains(&s.accused)
        {
            return delta;
        }
        self.last_suspicion_view = self.last_suspicion_view.max(view);
        match s.kind {
            SuspicionKind::Slow => {
                self.pending
                    .entry((s.accuser, s.accused))
                    .or_insert(view + self.f as u64 + 1);
            }
            SuspicionKind::False => {
                self.pending.remove(&(s.accused, s.accuser));
            }
        }
        let e = edge(s.accuser, s.accused);
        if !self.edges.contains_key(&e) {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.edges.insert(e, seq);
            self.order.insert(seq, OrderItem::Edge(e));
            self.version += 1;
            delta.added.push(e);
        }
        delta.merge(self.ensure_quorum_independent());
        delta
    }

    /// Moves to `view`: expired deadlines crash their accused, then one old
    /// entry is purged per stable view.
    pub fn advance_to(&mut self, view: ViewNumber) -> GraphDelta {
        let mut delta = GraphDelta::default();
        while self.current_view < view {
            self.current_view += 1;
            delta.merge(self.tick());
        }
        delta
    }

    fn tick(&mut self) -> GraphDelta {
        let mut delta = GraphDelta::default();
        let v = self.current_view;
        let expired: Vec<ReplicaId> = self
            .pending
            .iter()
            .filter(|(_, &d)| d <= v)
            .map(|(&(_, accused), _)| accused)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for b in expired {
            if self.vertices.contains(&b) {
                self.remove_vertex(b);
                self.crashed.insert(b);
                let seq = self.next_seq;
                self.next_seq += 1;
                self.order.insert(seq, OrderItem::Crash(b));
                delta.removed = true;
            }
        }
        delta.merge(self.purge_old());
        delta
    }

    /// Drops the oldest entry when no suspicion arrived for `window` views,
    /// then keeps dropping while no independent set of size `n - f` exists.
    pub fn purge_old(&mut self) -> GraphDelta {
        let mut delta = GraphDelta::default();
        if self.current_view.saturating_sub(self.last_suspicion_view) >= self.window
            && self.drop_oldest()
        {
            delta.removed = true;
        }
        delta.merge(self.ensure_quorum_independent());
        delta
    }

    fn ensure_quorum_independent(&mut self) -> GraphDelta {
        let mut delta = GraphDelta::default();
        while self.base_candidates().len() < self.quorum() && self.drop_oldest() {
            delta.removed = true;
        }
        delta
    }

    fn drop_oldest(&mut self) -> bool {
        let Some((&seq, &item)) = self.order.iter().next() else {
            return false;
        };
        self.order.remove(&seq);
        match item {
            OrderItem::Edge(e) => {
                self.edges.remove(&e);
                self.pending.remove(&(e.0, e.1));
                self.pending.remove(&(e.1, e.0));
            }
            OrderItem::Crash(b) => {
                self.crashed.remove(&b);
                if !self.faulty.contains(&b) {
                    self.vertices.insert(b);
                }
            }
        }
        self.version += 1;
        true
    }

    fn remove_vertex(&mut self, b: ReplicaId) {
        self.vertices.remove(&b);
        let gone: Vec<Edge> = self
            .edges
            .keys()
            .filter(|e| e.0 == b || e.1 == b)
            .copied()
            .collect();
        for e in gone {
            let seq = self.edges.remove(&e).expect("present");
            self.order.remove(&seq);
        }
        self.pending.retain(|&(x, y), _| x != b && y != b);
        self.version += 1;
    }

    /// Removes a provably faulty replica for good.
    pub fn exclude_faulty(&mut self, id: ReplicaId) -> GraphDelta {
        let mut delta = GraphDelta::default();
        if !self.faulty.insert(id) {
            return delta;
        }
        if self.vertices.contains(&id) {
            self.remove_vertex(id);
        }
        if self.crashed.remove(&id) {
            let seq = self
                .order
                .iter()
                .find(|(_, it)| **it == OrderItem::Crash(id))
                .map(|(s, _)| *s);
            if let Some(s) = seq {
                self.order.remove(&s);
            }
        }
        self.version += 1;
        delta.removed = true;
        delta.merge(self.ensure_quorum_independent());
        delta
    }

    /// Maximum independent set of the suspicion graph over V.
    pub fn base_candidates(&self) -> Vec<ReplicaId> {
        max_independent_set(&self.vertices, &self.edge_set())
    }

    /// Candidates and the number of members of V left out.
    pub fn base_candidates_with_u(&self) -> (Vec<ReplicaId>, usize) {
        let c = self.base_candidates();
        let u = self.vertices.len() - c.len();
        (c, u)
    }
}

impl Canonical for SuspicionState {
    fn encode(&self, out: &mut Vec<u8>) {
        self.n.encode(out);
        self.f.encode(out);
        self.window.encode(out);
        self.vertices.encode(out);
        self.faulty.encode(out);
        self.crashed.encode(out);
        self.edges.len().encode(out);
        for (e, seq) in &self.edges {
            e.encode(out);
            seq.encode(out);
        }
        self.pending.encode(out);
        self.order.len().encode(out);
        for (seq, it) in &self.order {
            seq.encode(out);
            match it {
                OrderItem::Edge(e) => {
                    out.push(0);
                    e.encode(out);
                }
                OrderItem::Crash(b) => {
                    out.push(1);
                    b.encode(out);
                }
            }
        }
        self.next_seq.encode(out);
        self.last_suspicion_view.encode(out);
        self.current_view.encode(out);
        self.version.encode(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suspicion::MessageType;
    use proptest::prelude::*;

    fn r(i: u32) -> ReplicaId {
        ReplicaId(i)
    }

    fn slow(a: u32, b: u32) -> Suspicion {
        Suspicion::slow(r(a), r(b), 0, MessageType::Write)
    }

    fn fals(a: u32, b: u32) -> Suspicion {
        Suspicion {
            kind: SuspicionKind::False,
            ..slow(a, b)
        }
    }

    fn params(n: usize, w: u64) -> SystemParams {
        SystemParams::new(n, (n - 1) / 3, 1.2, w).unwrap()
    }

    #[test]
    fn unreciprocated_accused_crashes_after_f_plus_one_views() {
        let mut s = SuspicionState::new(&params(4, 50));
        s.advance_to(3);
        s.apply(&slow(0, 1), 3);
        assert_eq!(s.pending()[&(r(0), r(1))], 5);
        s.advance_to(4);
        assert!(s.vertices().contains(&r(1)));
        s.advance_to(5);
        assert!(s.crashed().contains(&r(1)));
        assert!(!s.vertices().contains(&r(1)));
        assert!(s.edge_set().is_empty());
    }

    #[test]
    fn reciprocation_keeps_edge_and_clears_deadline() {
        let mut s = SuspicionState::new(&params(4, 50));
        s.advance_to(3);
        s.apply(&slow(0, 1), 3);
        s.advance_to(4);
        s.apply(&fals(1, 0), 4);
        s.advance_to(10);
        assert!(s.crashed().is_empty());
        assert!(s.has_edge(r(0), r(1)));
        assert!(s.pending().is_empty());
    }

    #[test]
    fn stable_window_purges_one_edge_per_view() {
        let mut s = SuspicionState::new(&params(7, 3));
        s.apply(&slow(0, 1), 0);
        s.apply(&fals(1, 0), 0);
        s.apply(&slow(2, 3), 0);
        s.apply(&fals(3, 2), 0);
        s.advance_to(2);
        assert_eq!(s.edge_set().len(), 2);
        s.advance_to(3);
        assert_eq!(s.edges_in_order(), vec![(r(2), r(3))]);
        s.advance_to(4);
        assert!(s.edge_set().is_empty());
    }

    #[test]
    fn dense_graph_is_purged_to_quorum_independence() {
        let mut s = SuspicionState::new(&params(4, 50));
        for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            s.apply(&slow(a, b), 0);
        }
        assert!(s.base_candidates().len() >= 3);
    }

    #[test]
    fn faulty_vertex_never_returns() {
        let mut s = SuspicionState::new(&params(4, 1));
        s.apply(&slow(0, 1), 0);
        s.exclude_faulty(r(1));
        s.advance_to(10);
        assert!(!s.vertices().contains(&r(1)));
        assert_eq!(s.base_candidates_with_u(), (vec![r(0), r(2), r(3)], 0));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Slow(u32, u32),
        False(u32, u32),
        Advance(u64),
    }

    fn op(n: u32) -> impl Strategy<Value = Op> {
        prop_oneof![
            4 => (0..n, 0..n).prop_map(|(a, b)| Op::Slow(a, b)),
            2 => (0..n, 0..n).prop_map(|(a, b)| Op::False(a, b)),
            1 => (1u64..4).prop_map(Op::Advance),
        ]
    }

    proptest! {
        #[test]
        fn candidates_always_cover_a_quorum(ops in proptest::collection::vec(op(7), 0..60)) {
            let p = params(7, 5);
            let mut s = SuspicionState::new(&p);
            let mut view = 0;
            for o in ops {
                match o {
                    Op::Slow(a, b) => { s.apply(&slow(a, b), view); }
                    Op::False(a, b) => { s.apply(&fals(a, b), view); }
                    Op::Advance(d) => { view += d; s.advance_to(view); }
                }
                let c = s.base_candidates();
                prop_assert!(c.len() >= p.q());
                prop_assert!(super::super::mis::is_independent(&c, &s.edge_set()));
                for e in s.edge_set() {
                    prop_assert!(s.vertices().contains(&e.0) && s.vertices().contains(&e.1));
                }
            }
        }
    }
}
