use std::collections::BTreeSet;

use optilog_core::suspicion::mis::max_independent_set;
use optilog_core::suspicion::{graph_edge, MessageType, Suspicion, SuspicionKind};
use optilog_core::tree_candidates::{derive, TreeSuspicionState};
use optilog_core::{ReplicaId, SystemParams};

const S1: u32 = 0;
const S2: u32 = 1;
const S3: u32 = 2;
const S4: u32 = 3;
const A: u32 = 4;
const C1: u32 = 5;
const C2: u32 = 6;
const B: u32 = 7;
const C3: u32 = 8;
const R: u32 = 9;

const TWO_WAY: [(u32, u32); 5] = [(S1, S4), (S1, A), (S4, A), (S2, S3), (S3, C2)];

fn ids(v: &[u32]) -> BTreeSet<ReplicaId> {
    v.iter().map(|&i| ReplicaId(i)).collect()
}

#[test]
fn drawn_graph_derivation() {
    let vertices: BTreeSet<ReplicaId> = (0..10).filter(|&i| i != B).map(ReplicaId).collect();
    let edges: Vec<_> = TWO_WAY.iter().map(|&(a, b)| graph_edge(ReplicaId(a), ReplicaId(b))).collect();
    let d = derive(&vertices, &edges);
    let mg: BTreeSet<_> = d.matching.iter().copied().collect();
    let want: BTreeSet<_> = [(S1, S4), (S2, S3)]
        .iter()
        .map(|&(a, b)| graph_edge(ReplicaId(a), ReplicaId(b)))
        .collect();
    assert_eq!(mg, want);
    assert_eq!(d.triangles, ids(&[A]));
    assert_eq!(d.candidates, ids(&[C1, C2, C3, R]));
    assert_eq!(d.u, 3);
}

#[test]
fn drawn_graph_is_beyond_the_fault_budget() {
    let vertices: BTreeSet<ReplicaId> = (0..10).filter(|&i| i != B).map(ReplicaId).collect();
    let edges: BTreeSet<_> = TWO_WAY.iter().map(|&(a, b)| graph_edge(ReplicaId(a), ReplicaId(b))).collect();
    assert_eq!(max_independent_set(&vertices, &edges).len(), 6);
}

fn feed() -> TreeSuspicionState {
    let p = SystemParams::new(10, 3, 1.2, 50).unwrap();
    let mut st = TreeSuspicionState::new(&p);
    for (a, b) in TWO_WAY {
        st.apply(&Suspicion::slow(ReplicaId(a), ReplicaId(b), 0, MessageType::Vote), 0);
        st.apply(
            &Suspicion {
                kind: SuspicionKind::False,
                accuser: ReplicaId(b),
                accused: ReplicaId(a),
                round: 0,
                message_type: MessageType::Vote,
            },
            0,
        );
    }
    st.apply(&Suspicion::slow(ReplicaId(C3), ReplicaId(B), 0, MessageType::Vote), 0);
    st.advance_to(4);
    st
}

#[test]
fn monitor_crashes_the_unreciprocated_and_keeps_quorum_independent() {
    let st = feed();
    assert_eq!(st.base().crashed(), &ids(&[B]));
    assert!(st.base().base_candidates().len() >= 7);
    // The oldest edge gave way; the matching is rebuilt from what is left.
    assert!(!st.base().has_edge(ReplicaId(S1), ReplicaId(S4)));
    let (cand, u) = st.tree_candidates();
    assert_eq!(cand.into_iter().collect::<BTreeSet<_>>(), ids(&[S4, C1, C2, C3, R]));
    assert_eq!(u, 2);
}
