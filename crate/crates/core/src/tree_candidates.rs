//! Candidate selection for tree configurations.
//!
//! A maximal set of vertex-disjoint suspicion edges (`mg`) is kept up to
//! date as edges arrive. Both endpoints of every matched edge, and every
//! unmatched vertex forming a triangle with a matched edge, are excluded
//! from the internal-node candidates.

use std::collections::BTreeSet;

use crate::canonical::Canonical;
use crate::model::{ReplicaId, SystemParams, ViewNumber};
use crate::suspicion::{graph_edge, Edge, GraphDelta, Suspicion, SuspicionState};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSuspicionState {
    base: SuspicionState,
    mg: Vec<Edge>,
    t_set: BTreeSet<ReplicaId>,
}

impl TreeSuspicionState {
    pub fn new(params: &SystemParams) -> Self {
        TreeSuspicionState {
            base: SuspicionState::new(params),
            mg: Vec::new(),
            t_set: BTreeSet::new(),
        }
    }

    pub fn base(&self) -> &SuspicionState {
        &self.base
    }

    pub fn matching(&self) -> &[Edge] {
        &self.mg
    }

    pub fn triangles(&self) -> &BTreeSet<ReplicaId> {
        &self.t_set
    }

    pub fn apply(&mut self, s: &Suspicion, view: ViewNumber) -> GraphDelta {
        let d = self.base.apply(s, view);
        self.absorb(&d);
        d
    }

    pub fn advance_to(&mut self, view: ViewNumber) -> GraphDelta {
        let d = self.base.advance_to(view);
        self.absorb(&d);
        d
    }

    pub fn exclude_faulty(&mut self, id: ReplicaId) -> GraphDelta {
        let d = self.base.exclude_faulty(id);
        self.absorb(&d);
        d
    }

    fn absorb(&mut self, d: &GraphDelta) {
        if d.removed {
            self.rebuild();
        } else {
            for &e in &d.added {
                self.maintain_matching(e);
            }
            self.t_set = self.triangle_set();
        }
    }

    /// Replays every edge in insertion order through matching maintenance.
    pub fn rebuild(&mut self) {
        let d = derive(self.base.vertices(), &self.base.edges_in_order());
        self.mg = d.matching;
        self.t_set = d.triangles;
    }

    /// Updates `mg` after `new_edge` joined the graph.
    pub fn maintain_matching(&mut self, new_edge: Edge) {
        let g = Graph {
            vertices: self.base.vertices(),
            has: |a, b| self.base.has_edge(a, b),
        };
        g.maintain(&mut self.mg, new_edge);
    }

    /// Unmatched vertices adjacent to both endpoints of some matched edge.
    pub fn triangle_set(&self) -> BTreeSet<ReplicaId> {
        let g = Graph {
            vertices: self.base.vertices(),
            has: |a, b| self.base.has_edge(a, b),
        };
        g.triangles(&self.mg)
    }

    /// Candidates for internal roles and `u = |mg| + |T|`.
    pub fn tree_candidates(&self) -> (Vec<ReplicaId>, usize) {
        let matched = matched(&self.mg);
        let cand = self
            .base
            .vertices()
            .iter()
            .copied()
            .filter(|v| !matched.contains(v) && !self.t_set.contains(v))
            .collect();
        (cand, self.mg.len() + self.t_set.len())
    }
}

/// Matching, triangle set and candidates of a graph, edges taken in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub matching: Vec<Edge>,
    pub triangles: BTreeSet<ReplicaId>,
    pub candidates: BTreeSet<ReplicaId>,
    pub u: usize,
}

/// Runs matching maintenance over `edges` in order on the graph they form
/// over `vertices`, without any of the monitor's purging.
pub fn derive(vertices: &BTreeSet<ReplicaId>, edges: &[Edge]) -> Derivation {
    let set: BTreeSet<Edge> = edges
        .iter()
        .map(|&(a, b)| graph_edge(a, b))
        .filter(|e| vertices.contains(&e.0) && vertices.contains(&e.1) && e.0 != e.1)
        .collect();
    let mut mg = Vec::new();
    let mut present = BTreeSet::new();
    for &(a, b) in edges {
        let e = graph_edge(a, b);
        if !set.contains(&e) || !present.insert(e) {
            continue;
        }
        let g = Graph {
            vertices,
            has: |x, y| present.contains(&graph_edge(x, y)),
        };
        g.maintain(&mut mg, e);
    }
    let g = Graph {
        vertices,
        has: |x, y| set.contains(&graph_edge(x, y)),
    };
    let triangles = g.triangles(&mg);
    let m = matched(&mg);
    let candidates = vertices
        .iter()
        .copied()
        .filter(|v| !m.contains(v) && !triangles.contains(v))
        .collect();
    Derivation {
        u: mg.len() + triangles.len(),
        matching: mg,
        triangles,
        candidates,
    }
}

fn matched(mg: &[Edge]) -> BTreeSet<ReplicaId> {
    mg.iter().flat_map(|&(a, b)| [a, b]).collect()
}

struct Graph<'a, F: Fn(ReplicaId, ReplicaId) -> bool> {
    vertices: &'a BTreeSet<ReplicaId>,
    has: F,
}

impl<F: Fn(ReplicaId, ReplicaId) -> bool> Graph<'_, F> {
    /// A disjoint edge is added directly. Otherwise matched edges are
    /// scanned in matching order for a swap: the edge `(x, y)` is replaced
    /// by `(x, p)` and `(y, q)` where `p != q` are unmatched neighbours
    /// (lowest ids first). Swaps repeat until none applies.
    fn maintain(&self, mg: &mut Vec<Edge>, new_edge: Edge) {
        let (a, b) = new_edge;
        if a == b || !(self.has)(a, b) {
            return;
        }
        let m = matched(mg);
        if !m.contains(&a) && !m.contains(&b) {
            mg.push(new_edge);
            return;
        }
        while self.try_swap(mg) {}
    }

    fn try_swap(&self, mg: &mut Vec<Edge>) -> bool {
        let m = matched(mg);
        let free_nbrs = |v: ReplicaId| -> Vec<ReplicaId> {
            self.vertices
                .iter()
                .copied()
                .filter(|&w| w != v && !m.contains(&w) && (self.has)(v, w))
                .collect()
        };
        for idx in 0..mg.len() {
            let (x, y) = mg[idx];
            let px = free_nbrs(x);
            let py = free_nbrs(y);
            let pick = px
                .iter()
                .flat_map(|&p| py.iter().map(move |&q| (p, q)))
                .find(|(p, q)| p != q);
            if let Some((p, q)) = pick {
                mg[idx] = graph_edge(x, p);
                mg.push(graph_edge(y, q));
                return true;
            }
        }
        false
    }

    fn triangles(&self, mg: &[Edge]) -> BTreeSet<ReplicaId> {
        let m = matched(mg);
        self.vertices
            .iter()
            .copied()
            .filter(|&v| !m.contains(&v) && mg.iter().any(|&(a, b)| (self.has)(v, a) && (self.has)(v, b)))
            .collect()
    }
}

impl Canonical for TreeSuspicionState {
    fn encode(&self, out: &mut Vec<u8>) {
        self.base.encode(out);
        self.mg.encode(out);
        self.t_set.encode(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suspicion::{MessageType, SuspicionKind};
    use proptest::prelude::*;

    fn r(i: u32) -> ReplicaId {
        ReplicaId(i)
    }

    fn two_way(st: &mut TreeSuspicionState, a: u32, b: u32, view: u64) {
        st.apply(&Suspicion::slow(r(a), r(b), view, MessageType::Vote), view);
        st.apply(
            &Suspicion {
                kind: SuspicionKind::False,
                accuser: r(b),
                accused: r(a),
                round: view,
                message_type: MessageType::Vote,
            },
            view,
        );
    }

    fn params(n: usize) -> SystemParams {
        SystemParams::new(n, (n - 1) / 3, 1.2, 50).unwrap()
    }

    #[test]
    fn swap_replaces_one_edge_with_two() {
        let mut st = TreeSuspicionState::new(&params(13));
        two_way(&mut st, 0, 1, 0);
        two_way(&mut st, 0, 2, 0);
        assert_eq!(st.matching(), &[(r(0), r(1))]);
        two_way(&mut st, 1, 3, 0);
        assert_eq!(st.matching(), &[(r(0), r(2)), (r(1), r(3))]);
        let (cand, u) = st.tree_candidates();
        assert_eq!(u, 2);
        assert!(!cand.contains(&r(2)) && cand.contains(&r(4)));
    }

    #[test]
    fn triangle_vertex_is_excluded() {
        let mut st = TreeSuspicionState::new(&params(13));
        two_way(&mut st, 0, 1, 0);
        two_way(&mut st, 0, 2, 0);
        two_way(&mut st, 1, 2, 0);
        assert_eq!(st.matching(), &[(r(0), r(1))]);
        assert_eq!(st.triangles(), &[r(2)].into_iter().collect());
        assert_eq!(st.tree_candidates().1, 2);
    }

    #[test]
    fn crash_removal_rebuilds_matching() {
        let mut st = TreeSuspicionState::new(&params(13));
        two_way(&mut st, 0, 1, 0);
        two_way(&mut st, 1, 2, 0);
        st.apply(&Suspicion::slow(r(3), r(0), 1, MessageType::Vote), 1);
        st.advance_to(1 + 4 + 1);
        assert!(st.base().crashed().contains(&r(0)));
        assert_eq!(st.matching(), &[(r(1), r(2))]);
    }

    proptest! {
        #[test]
        fn matching_is_maximal_and_disjoint(raw in proptest::collection::vec((0u32..13, 0u32..13), 0..40)) {
            let mut st = TreeSuspicionState::new(&params(13));
            for (a, b) in raw {
                if a != b { two_way(&mut st, a, b, 0); }
            }
            let mut seen = BTreeSet::new();
            for &(a, b) in st.matching() {
                prop_assert!(st.base().has_edge(a, b));
                prop_assert!(seen.insert(a) && seen.insert(b));
            }
            for (a, b) in st.base().edge_set() {
                prop_assert!(seen.contains(&a) || seen.contains(&b));
            }
            let (cand, u) = st.tree_candidates();
            prop_assert_eq!(cand.len() + u + st.matching().len(), st.base().vertices().len());
        }

        #[test]
        fn faulty_edges_leave_room_for_a_tree(
            faulty in proptest::collection::btree_set(0u32..13, 0..=4),
            raw in proptest::collection::vec((0u32..13, 0u32..13), 0..60),
        ) {
            let mut st = TreeSuspicionState::new(&params(13));
            let fv: Vec<u32> = faulty.iter().copied().collect();
            for (i, (a, b)) in raw.into_iter().enumerate() {
                if fv.is_empty() { break; }
                let src = fv[(a as usize + i) % fv.len()];
                if src != b { two_way(&mut st, src, b, 0); }
            }
            let (cand, _) = st.tree_candidates();
            prop_assert!(cand.len() >= 4 + 1);
        }
    }
}
