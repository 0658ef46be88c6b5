//! Timing of the base candidate computation on random suspicion graphs.

use std::collections::BTreeSet;
use std::time::Instant;

use optilog_core::suspicion::mis::max_independent_set;
use optilog_core::suspicion::graph_edge;
use optilog_core::ReplicaId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Chance that a faulty replica and another replica suspect each other.
pub const EDGE_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub graphs: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub max_ms: f64,
    /// Smallest candidate set seen.
    pub min_candidates: usize,
}

/// A graph on `n` replicas where `f` random replicas each suspect every
/// other replica with [`EDGE_PROBABILITY`]; correct pairs share no edge.
/// Returns the faulty replicas and the edges.
pub fn random_suspicion_graph<R: Rng>(n: usize, rng: &mut R) -> (Vec<ReplicaId>, BTreeSet<(ReplicaId, ReplicaId)>) {
    let f = n.saturating_sub(1) / 3;
    let mut ids: Vec<ReplicaId> = (0..n as u32).map(ReplicaId).collect();
    ids.shuffle(rng);
    let faulty = ids[..f].to_vec();
    let mut edges = BTreeSet::new();
    for &x in &faulty {
        for y in (0..n as u32).map(ReplicaId) {
            if x != y && rng.gen_bool(EDGE_PROBABILITY) {
                edges.insert(graph_edge(x, y));
            }
        }
    }
    (faulty, edges)
}

/// Times `graphs` candidate computations per size. Rows come back sorted
/// by `n`.
pub fn candidate_bench(sizes: &[usize], graphs: usize, seed: u64) -> Vec<BenchRow> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
            let vertices: BTreeSet<ReplicaId> = (0..n as u32).map(ReplicaId).collect();
            let mut times = Vec::with_capacity(graphs);
            let mut min_candidates = n;
            for _ in 0..graphs {
                let (_, edges) = random_suspicion_graph(n, &mut rng);
                let start = Instant::now();
                let mis = max_independent_set(&vertices, &edges);
                times.push(start.elapsed().as_secs_f64() * 1e3);
                min_candidates = min_candidates.min(mis.len());
            }
            let (mean_ms, std_ms) = crate::stats::mean_std(&times);
            BenchRow {
                n,
                graphs,
                mean_ms,
                std_ms,
                max_ms: times.iter().copied().fold(0.0, f64::max),
                min_candidates,
            }
        })
        .collect()
}
