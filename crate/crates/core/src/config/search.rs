use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Configuration, Layout, Topology};
use crate::model::{Error, ReplicaId, Result};
use crate::scalar::LatencyScalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `T <- T * cooling_rate` each iteration.
    #[default]
    Geometric,
    /// `T = T0 * convergence_ratio^progress`, spreading the cooling over
    /// the whole iteration or wall-time budget.
    BudgetSpread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealingParams {
    /// Starting temperature; the initial configuration's score when absent.
    pub initial_temperature: Option<f64>,
    pub cooling_rate: f64,
    /// Search ends once `T < convergence_ratio * T0`.
    pub convergence_ratio: f64,
    pub schedule: Schedule,
    pub max_iterations: Option<u64>,
    pub wall_budget_ms: Option<u64>,
}

impl Default for AnnealingParams {
    fn default() -> Self {
        AnnealingParams {
            initial_temperature: None,
            cooling_rate: 0.995,
            convergence_ratio: 1e-3,
            schedule: Schedule::Geometric,
            max_iterations: Some(20_000),
            wall_budget_ms: None,
        }
    }
}

impl AnnealingParams {
    pub fn iterations(n: u64) -> Self {
        AnnealingParams {
            max_iterations: Some(n),
            ..Default::default()
        }
    }

    pub fn spread_over_iterations(n: u64) -> Self {
        AnnealingParams {
            max_iterations: Some(n),
            schedule: Schedule::BudgetSpread,
            ..Default::default()
        }
    }

    pub fn spread_over_time(budget: Duration) -> Self {
        AnnealingParams {
            max_iterations: None,
            wall_budget_ms: Some(budget.as_millis() as u64),
            schedule: Schedule::BudgetSpread,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<T> {
    pub config: Configuration,
    pub score: T,
    pub iterations: u64,
}

/// Random layout with special slots filled from `candidates`.
pub fn random_layout<R: Rng>(
    topology: Topology,
    n: usize,
    candidates: &BTreeSet<ReplicaId>,
    rng: &mut R,
) -> Result<Layout> {
    let mut l = Layout::new(topology, n, Vec::new());
    let slots = l.special_slots();
    let mut cand: Vec<ReplicaId> = candidates.iter().copied().filter(|c| c.index() < n).collect();
    if cand.len() < slots {
        return Err(Error::InsufficientCandidates {
            needed: slots,
            available: cand.len(),
        });
    }
    cand.shuffle(rng);
    let special: Vec<ReplicaId> = cand[..slots].to_vec();
    let chosen: BTreeSet<ReplicaId> = special.iter().copied().collect();
    let mut rest: Vec<ReplicaId> = (0..n as u32)
        .map(ReplicaId)
        .filter(|r| !chosen.contains(r))
        .collect();
    rest.shuffle(rng);
    l.order = special;
    l.order.extend(rest);
    Ok(l)
}

fn swap_ok(l: &Layout, i: usize, j: usize, candidates: &BTreeSet<ReplicaId>) -> bool {
    let s = l.special_slots();
    if i == j {
        return false;
    }
    if i < s && j < s {
        return true;
    }
    if i < s || j < s {
        return candidates.contains(&l.order[i]) && candidates.contains(&l.order[j]);
    }
    // Two non-special slots only matter in a tree, and only across subtrees.
    l.topology == Topology::Tree && (i - s) / l.b.max(1) != (j - s) / l.b.max(1)
}

/// Exchanges two replicas. Special slots stay with candidates; draws that
/// break that, or change nothing, are redrawn. Returns the layout unchanged
/// when no useful swap exists.
pub fn mutate<R: Rng>(l: &Layout, candidates: &BTreeSet<ReplicaId>, rng: &mut R) -> Layout {
    let n = l.order.len();
    let s = l.special_slots().min(n);
    for _ in 0..64 {
        let i = if l.topology == Topology::Tree && rng.gen_bool(0.5) {
            rng.gen_range(0..n)
        } else {
            rng.gen_range(0..s)
        };
        let j = rng.gen_range(0..n);
        if swap_ok(l, i, j, candidates) {
            let mut out = l.clone();
            out.order.swap(i, j);
            return out;
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| swap_ok(l, i, j, candidates))
        .collect();
    match pairs.as_slice() {
        [] => l.clone(),
        ps => {
            let (i, j) = ps[rng.gen_range(0..ps.len())];
            let mut out = l.clone();
            out.order.swap(i, j);
            out
        }
    }
}

fn energy<T: LatencyScalar>(v: T) -> f64 {
    if v.is_infinite() {
        f64::INFINITY
    } else {
        v.to_f64()
    }
}

/// Simulated annealing over layouts of `n` replicas. Deterministic for a
/// given seed unless a wall-time budget ends the search.
pub fn sa_search<T: LatencyScalar>(
    topology: Topology,
    n: usize,
    candidates: &BTreeSet<ReplicaId>,
    score: impl Fn(&Configuration) -> T,
    params: &AnnealingParams,
    seed: u64,
) -> Result<SearchOutcome<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = random_layout(topology, n, candidates, &mut rng)?;
    let mut cur_cfg = cur.to_config();
    let mut cur_s = score(&cur_cfg);
    let mut best = (cur_cfg.clone(), cur_s);

    let t0 = params.initial_temperature.unwrap_or_else(|| {
        let e = energy(cur_s);
        if e.is_finite() && e > 0.0 {
            e
        } else {
            1.0
        }
    });
    let stop_t = t0 * params.convergence_ratio;
    let start = Instant::now();
    let wall = params.wall_budget_ms.map(Duration::from_millis);
    let mut temp = t0;
    let mut it = 0u64;
    loop {
        if params.max_iterations.is_some_and(|m| it >= m) {
            break;
        }
        if let Some(w) = wall {
            if start.elapsed() >= w {
                break;
            }
        }
        temp = match params.schedule {
            Schedule::Geometric => {
                if it > 0 {
                    temp * params.cooling_rate
                } else {
                    temp
                }
            }
            Schedule::BudgetSpread => {
                let progress = match (params.max_iterations, wall) {
                    (Some(m), _) => it as f64 / m as f64,
                    (None, Some(w)) => start.elapsed().as_secs_f64() / w.as_secs_f64(),
                    (None, None) => 1.0,
                };
                t0 * params.convergence_ratio.powf(progress.min(1.0))
            }
        };
        if params.schedule == Schedule::Geometric && temp < stop_t {
            break;
        }
        it += 1;
        let next = mutate(&cur, candidates, &mut rng);
        if next == cur {
            break;
        }
        let next_cfg = next.to_config();
        let next_s = score(&next_cfg);
        let (a, b) = (energy(cur_s), energy(next_s));
        let accept = if b <= a {
            true
        } else if b.is_infinite() {
            false
        } else if a.is_infinite() {
            true
        } else {
            let p = (-(b - a) / temp).exp();
            rng.gen::<f64>() < p
        };
        if accept {
            cur = next;
            cur_cfg = next_cfg;
            cur_s = next_s;
            if cur_s < best.1 {
                best = (cur_cfg.clone(), cur_s);
            }
        }
    }
    Ok(SearchOutcome {
        config: best.0,
        score: best.1,
        iterations: it,
    })
}
