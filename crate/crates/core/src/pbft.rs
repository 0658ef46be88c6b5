//! Star (leader-based, all-to-all) configurations.
//!
//! The leader proposes to every member; each member sends a Write to all on
//! receiving the proposal, and an Accept to all once a quorum of Writes
//! arrived (its own counts at the time it is created). The round ends when
//! the leader holds a quorum of Accepts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::latency::LatencyMatrix;
use crate::model::ReplicaId;
use crate::scalar::LatencyScalar;
use crate::suspicion::MessageType;
use crate::timeouts::{MsgKey, TimeoutTable, Witness};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarConfig {
    pub leader: ReplicaId,
    pub members: Vec<ReplicaId>,
}

impl StarConfig {
    pub fn new(leader: ReplicaId, n: usize) -> Self {
        StarConfig {
            leader,
            members: (0..n as u32).map(ReplicaId).collect(),
        }
    }
}

/// `need`-th smallest of `(value, sender)` pairs, ties by sender; also
/// returns the senders used.
fn kth<T: LatencyScalar>(mut v: Vec<(T, ReplicaId)>, need: usize) -> (T, Vec<ReplicaId>) {
    if need == 0 {
        return (T::zero(), Vec::new());
    }
    if v.len() < need {
        return (T::infinity(), Vec::new());
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let t = v[need - 1].0;
    (t, v[..need].iter().map(|x| x.1).collect())
}

struct Plan<T> {
    live: Vec<ReplicaId>,
    propose: Vec<T>,
    write_quorum: Vec<T>,
    write_senders: Vec<Vec<ReplicaId>>,
}

fn plan<T: LatencyScalar>(
    cfg: &StarConfig,
    lat: &LatencyMatrix<T>,
    need: usize,
    absent: &BTreeSet<ReplicaId>,
) -> Plan<T> {
    let l = cfg.leader;
    let live: Vec<ReplicaId> = cfg
        .members
        .iter()
        .copied()
        .filter(|m| !absent.contains(m))
        .collect();
    let propose: Vec<T> = live
        .iter()
        .map(|&a| if a == l { T::zero() } else { lat.get(l, a) })
        .collect();
    let mut write_quorum = Vec::with_capacity(live.len());
    let mut write_senders = Vec::with_capacity(live.len());
    for &b in &live {
        let arrivals = live
            .iter()
            .zip(&propose)
            .map(|(&a, &dp)| (dp.plus(lat.get(a, b)), a))
            .collect();
        let (t, s) = kth(arrivals, need);
        write_quorum.push(t);
        write_senders.push(s);
    }
    Plan {
        live,
        propose,
        write_quorum,
        write_senders,
    }
}

fn accept_at_leader<T: LatencyScalar>(
    p: &Plan<T>,
    lat: &LatencyMatrix<T>,
    leader: ReplicaId,
    need: usize,
) -> (T, Vec<ReplicaId>) {
    let arrivals = p
        .live
        .iter()
        .zip(&p.write_quorum)
        .map(|(&a, &ws)| (ws.plus(lat.get(a, leader)), a))
        .collect();
    kth(arrivals, need)
}

/// Full expected-delivery table with `q` as the quorum at every collector.
pub fn pbft_timeouts<T: LatencyScalar>(
    cfg: &StarConfig,
    lat: &LatencyMatrix<T>,
    q: usize,
    absent: &BTreeSet<ReplicaId>,
) -> TimeoutTable<T> {
    use MessageType::*;
    let l = cfg.leader;
    let mut t = TimeoutTable::new(l);
    t.round_quorum = q;
    if absent.contains(&l) {
        t.round_duration = T::infinity();
        return t;
    }
    let p = plan(cfg, lat, q, absent);
    for (ai, &a) in p.live.iter().enumerate() {
        let prop = MsgKey::new(Propose, l, a);
        t.insert(prop, p.propose[ai], Witness::Start);
    }
    for (ai, &a) in p.live.iter().enumerate() {
        let prop = MsgKey::new(Propose, l, a);
        for &b in &p.live {
            t.insert(
                MsgKey::new(Write, a, b),
                p.propose[ai].plus(lat.get(a, b)),
                Witness::After(prop),
            );
        }
    }
    for (ai, &a) in p.live.iter().enumerate() {
        let preds: Vec<MsgKey> = p.write_senders[ai]
            .iter()
            .map(|&s| MsgKey::new(Write, s, a))
            .collect();
        for &b in &p.live {
            let d = p.write_quorum[ai].plus(lat.get(a, b));
            let w = if preds.is_empty() {
                Witness::After(MsgKey::new(Propose, l, a))
            } else {
                Witness::Quorum(preds.clone())
            };
            t.insert(MsgKey::new(Accept, a, b), d, w);
        }
    }
    let (dr, senders) = accept_at_leader(&p, lat, l, q);
    t.round_duration = dr;
    t.round_witness = senders
        .iter()
        .map(|&s| MsgKey::new(Accept, s, l))
        .collect();
    t
}

/// Round duration when `u` members may stay silent: every collector waits
/// for its `(q + u)`-th arrival, so any `u` missing senders still leave a
/// quorum. With `u = 0` this is the round duration of [`pbft_timeouts`].
pub fn pbft_score<T: LatencyScalar>(
    cfg: &StarConfig,
    lat: &LatencyMatrix<T>,
    q: usize,
    u: usize,
    absent: &BTreeSet<ReplicaId>,
) -> T {
    if absent.contains(&cfg.leader) {
        return T::infinity();
    }
    let need = q + u;
    let p = plan(cfg, lat, need, absent);
    accept_at_leader(&p, lat, cfg.leader, need).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    const INF: u64 = u64::MAX;

    fn r(i: u32) -> ReplicaId {
        ReplicaId(i)
    }

    /// Message-by-message replay with exact link delays. `silent` members
    /// send nothing. Returns the time the leader holds `q` accepts.
    fn event_oracle(lat: &LatencyMatrix<u64>, leader: u32, q: usize, silent: &BTreeSet<u32>) -> u64 {
        let n = lat.n() as u32;
        // (time, kind, from, to): kind 0 propose, 1 write, 2 accept
        let mut heap = BinaryHeap::new();
        let send = |heap: &mut BinaryHeap<Reverse<(u64, u8, u32, u32)>>, t: u64, k: u8, a: u32| {
            if silent.contains(&a) || t == INF {
                return;
            }
            for b in 0..n {
                let l = lat.at(a as usize, b as usize);
                if l != INF {
                    heap.push(Reverse((t + l, k, a, b)));
                }
            }
        };
        if silent.contains(&leader) {
            return INF;
        }
        send(&mut heap, 0, 0, leader);
        let mut writes = vec![BTreeSet::new(); n as usize];
        let mut accepts = BTreeSet::new();
        let mut wrote = vec![false; n as usize];
        let mut accepted = vec![false; n as usize];
        while let Some(Reverse((t, k, a, b))) = heap.pop() {
            match k {
                0 if !wrote[b as usize] => {
                    wrote[b as usize] = true;
                    send(&mut heap, t, 1, b);
                }
                1 => {
                    writes[b as usize].insert(a);
                    if writes[b as usize].len() >= q && !accepted[b as usize] {
                        accepted[b as usize] = true;
                        send(&mut heap, t, 2, b);
                    }
                }
                2 if b == leader => {
                    accepts.insert(a);
                    if accepts.len() >= q {
                        return t;
                    }
                }
                _ => {}
            }
        }
        INF
    }

    #[test]
    fn uniform_four_replicas() {
        let lat = LatencyMatrix::uniform(4, 10u64);
        let cfg = StarConfig::new(r(0), 4);
        let t = pbft_timeouts(&cfg, &lat, 3, &BTreeSet::new());
        use MessageType::*;
        assert_eq!(t.get(Propose, r(0), r(1)), Some(10));
        assert_eq!(t.get(Write, r(1), r(2)), Some(20));
        assert_eq!(t.get(Write, r(0), r(2)), Some(10));
        assert_eq!(t.get(Accept, r(1), r(2)), Some(30));
        assert_eq!(t.round_duration, 30);
        assert_eq!(t.round_duration, event_oracle(&lat, 0, 3, &BTreeSet::new()));
        t.verify_witness(&lat, 3).unwrap();
        assert_eq!(pbft_score(&cfg, &lat, 3, 0, &BTreeSet::new()), 30);
        assert_eq!(pbft_score(&cfg, &lat, 3, 1, &BTreeSet::new()), 30);
    }

    #[test]
    fn zero_and_infinite_links() {
        let cfg = StarConfig::new(r(0), 4);
        let zero = LatencyMatrix::uniform(4, 0u64);
        assert_eq!(pbft_score(&cfg, &zero, 3, 0, &BTreeSet::new()), 0);

        let mut rows = LatencyMatrix::uniform(4, 10u64).rows();
        for i in 0..4 {
            if i != 3 {
                rows[3][i] = INF;
                rows[i][3] = INF;
            }
        }
        let lat = LatencyMatrix::from_rows(&rows).unwrap();
        assert_eq!(pbft_score(&cfg, &lat, 3, 0, &BTreeSet::new()), 30);
        let bad_leader = StarConfig::new(r(3), 4);
        assert_eq!(pbft_score(&bad_leader, &lat, 3, 0, &BTreeSet::new()), INF);
    }

    fn matrix(n: usize) -> impl Strategy<Value = LatencyMatrix<u64>> {
        proptest::collection::vec(1u64..200, n * n).prop_map(move |v| {
            let rows: Vec<Vec<u64>> = (0..n)
                .map(|a| (0..n).map(|b| if a == b { 0 } else { v[a.min(b) * n + a.max(b)] }).collect())
                .collect();
            LatencyMatrix::from_rows(&rows).unwrap()
        })
    }

    proptest! {
        #[test]
        fn timeouts_match_event_oracle(lat in matrix(7), leader in 0u32..7) {
            let cfg = StarConfig::new(r(leader), 7);
            let t = pbft_timeouts(&cfg, &lat, 5, &BTreeSet::new());
            prop_assert_eq!(t.round_duration, event_oracle(&lat, leader, 5, &BTreeSet::new()));
            prop_assert!(t.verify_witness(&lat, 5).is_ok());
        }

        #[test]
        fn score_bounds_every_silent_set(lat in matrix(7), leader in 0u32..7, u in 0usize..3) {
            let cfg = StarConfig::new(r(leader), 7);
            let s = pbft_score(&cfg, &lat, 5, u, &BTreeSet::new());
            let others: Vec<u32> = (0..7).filter(|&x| x != leader).collect();
            let mut worst = 0;
            for mask in 0u32..(1 << others.len()) {
                if mask.count_ones() as usize != u { continue; }
                let silent: BTreeSet<u32> = others.iter().enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect();
                worst = worst.max(event_oracle(&lat, leader, 5, &silent));
            }
            prop_assert!(s >= worst);
        }

        #[test]
        fn score_monotone_in_u(lat in matrix(7), leader in 0u32..7) {
            let cfg = StarConfig::new(r(leader), 7);
            let mut prev = 0;
            for u in 0..=2 {
                let s = pbft_score(&cfg, &lat, 5, u, &BTreeSet::new());
                prop_assert!(s >= prev);
                prev = s;
            }
        }

        #[test]
        fn scaling_keeps_best_leader(lat in matrix(7), c in 2u64..5) {
            let scaled = lat.map(|v| v * c);
            let best = |m: &LatencyMatrix<u64>| (0..7u32)
                .min_by_key(|&l| (pbft_score(&StarConfig::new(r(l), 7), m, 5, 0, &BTreeSet::new()), l))
                .unwrap();
            prop_assert_eq!(best(&lat), best(&scaled));
        }
    }
}
