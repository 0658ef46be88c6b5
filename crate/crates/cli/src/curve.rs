//! Tree score after each reconfiguration forced by targeted suspicions.

use std::collections::BTreeSet;

use optilog_core::config::{kauri_trees, sa_search, score, AnnealingParams};
use optilog_core::suspicion::{reciprocate, MessageType, Suspicion};
use optilog_core::tree::branch_factor;
use optilog_core::tree_candidates::TreeSuspicionState;
use optilog_core::{Configuration, LatencyMatrix, ReplicaId, ScoreContext, SystemParams, Topology};
use optilog_sim::{baseline_score, kauri_sa_trees, synth_latency_matrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSettings {
    pub n: usize,
    /// Adversarial replicas.
    pub faults: usize,
    /// Reconfigurations to follow after the initial tree.
    pub reconfigs: usize,
    pub annealing: AnnealingParams,
}

impl CurveSettings {
    pub fn new(n: usize, faults: usize, reconfigs: usize) -> Self {
        CurveSettings {
            n,
            faults,
            reconfigs,
            annealing: AnnealingParams::spread_over_iterations(5_000),
        }
    }

    /// System parameters with the largest `f`; `n` must fill a tree exactly.
    pub fn params(&self) -> optilog_core::Result<SystemParams> {
        if branch_factor(self.n).is_err() {
            let sizes: Vec<String> = (2..12).map(|b| (b * b + b + 1).to_string()).collect();
            return Err(optilog_core::Error::InvalidParams(format!(
                "n = {} does not fill a tree; admissible sizes: {}, ...",
                self.n,
                sizes.join(", ")
            )));
        }
        SystemParams::new(self.n, (self.n - 1) / 3, 1.2, optilog_core::DEFAULT_WINDOW)
    }
}

/// Scores of successive trees, initial tree first. Each baseline curve
/// ends once its bins run out; the adaptive curve ends once the
/// adversaries can no longer force a change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curves {
    pub seed: u64,
    pub opti: Vec<u64>,
    pub kauri: Vec<u64>,
    pub kauri_sa: Vec<u64>,
}

/// Runs one replication of the curve experiment on a synthetic WAN.
pub fn reconfig_curve(s: &CurveSettings, seed: u64) -> optilog_core::Result<Curves> {
    let params = s.params()?;
    if s.faults > params.f {
        return Err(optilog_core::Error::InvalidParams(format!(
            "{} faults exceed f = {}",
            s.faults, params.f
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat = synth_latency_matrix(s.n, rng.gen());
    let mut ids: Vec<ReplicaId> = params.replicas().collect();
    ids.shuffle(&mut rng);
    let faulty: BTreeSet<ReplicaId> = ids[..s.faults].iter().copied().collect();

    let opti = opti_curve(s, &params, &lat, &faulty, rng.gen())?;
    let trees = kauri_trees(&params, &mut rng)?;
    let kauri = trees
        .into_iter()
        .take(s.reconfigs + 1)
        .map(|t| baseline_score(&lat, &params, &Configuration::Tree(t)))
        .collect();
    let kauri_sa = kauri_sa_trees(&params, &lat, &s.annealing, &mut rng)?
        .into_iter()
        .take(s.reconfigs + 1)
        .map(|(_, score)| score)
        .collect();
    Ok(Curves {
        seed,
        opti,
        kauri,
        kauri_sa,
    })
}

fn search(
    s: &CurveSettings,
    params: &SystemParams,
    lat: &LatencyMatrix<u64>,
    state: &TreeSuspicionState,
    seed: u64,
) -> optilog_core::Result<(Configuration, u64)> {
    let absent = state.base().absent();
    let (cand, u) = state.tree_candidates();
    let cand: BTreeSet<ReplicaId> = cand.into_iter().collect();
    let ctx = ScoreContext::new(lat, params.n, params.f, u, &absent);
    let out = sa_search(Topology::Tree, params.n, &cand, |c| score(c, &ctx), &s.annealing, seed)?;
    Ok((out.config, out.score))
}

/// Applies the accusation `x -> c` and the correct target's reply.
fn accuse(state: &mut TreeSuspicionState, x: ReplicaId, c: ReplicaId, view: u64) {
    let s = Suspicion::slow(x, c, view, MessageType::Vote);
    state.apply(&s, view);
    if let Some(reply) = reciprocate(&s, c, true) {
        state.apply(&reply, view);
    }
}

/// The first accusation, adversary by adversary and target by target,
/// that pushes a role of `config` out of the candidates.
fn forcing_move(
    state: &TreeSuspicionState,
    config: &Configuration,
    faulty: &BTreeSet<ReplicaId>,
    view: u64,
) -> Option<TreeSuspicionState> {
    let targets: Vec<ReplicaId> = config.special().into_iter().filter(|c| !faulty.contains(c)).collect();
    for &x in faulty {
        for &c in &targets {
            if state.base().has_edge(x, c) {
                continue;
            }
            let mut next = state.clone();
            accuse(&mut next, x, c, view);
            let cand: BTreeSet<ReplicaId> = next.tree_candidates().0.into_iter().collect();
            if !config.roles_within(&cand) {
                return Some(next);
            }
        }
    }
    None
}

fn opti_curve(
    s: &CurveSettings,
    params: &SystemParams,
    lat: &LatencyMatrix<u64>,
    faulty: &BTreeSet<ReplicaId>,
    seed: u64,
) -> optilog_core::Result<Vec<u64>> {
    let mut state = TreeSuspicionState::new(params);
    let (mut config, first) = search(s, params, lat, &state, seed)?;
    let mut out = vec![first];
    for step in 1..=s.reconfigs as u64 {
        let Some(next) = forcing_move(&state, &config, faulty, step) else {
            break;
        };
        state = next;
        let (c, score) = search(s, params, lat, &state, seed.wrapping_add(step))?;
        config = c;
        out.push(score);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reconfigurations_give_only_the_initial_scores() {
        let c = reconfig_curve(&CurveSettings::new(13, 2, 0), 1).unwrap();
        assert_eq!((c.opti.len(), c.kauri.len(), c.kauri_sa.len()), (1, 1, 1));
    }

    #[test]
    fn baseline_curves_stop_at_the_bin_count() {
        let c = reconfig_curve(&CurveSettings::new(13, 4, 10), 3).unwrap();
        assert_eq!(c.kauri.len(), 3);
        assert_eq!(c.kauri_sa.len(), 3);
        assert!(c.kauri_sa.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn each_adversary_forces_at_least_one_change() {
        for seed in 0..5 {
            let c = reconfig_curve(&CurveSettings::new(13, 3, 10), seed).unwrap();
            assert!(c.opti.len() > 3, "seed {seed}: {:?}", c.opti);
            assert!(c.opti.len() <= 1 + 2 * 3);
        }
    }

    #[test]
    fn sizes_must_fill_a_tree() {
        let e = CurveSettings::new(12, 1, 1).params().unwrap_err().to_string();
        assert!(e.contains("7, 13, 21, 31"), "{e}");
    }

    #[test]
    fn too_many_faults_are_rejected() {
        assert!(reconfig_curve(&CurveSettings::new(13, 5, 1), 0).is_err());
    }
}
