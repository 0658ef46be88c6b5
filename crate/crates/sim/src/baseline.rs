//! Bin-based baselines: fixed random trees, or the best tree per bin.

use std::collections::BTreeSet;

use optilog_core::config::{kauri_bins, sa_search, score, AnnealingParams};
use optilog_core::tree::branch_factor_for;
use optilog_core::{Configuration, LatencyMatrix, ReplicaId, ScoreContext, SystemParams, Topology, TreeConfig};
use rand::Rng;

/// Baseline score: quorum plus every fault the budget allows.
pub fn baseline_score(lat: &LatencyMatrix<u64>, params: &SystemParams, c: &Configuration) -> u64 {
    let none = BTreeSet::new();
    let mut ctx = ScoreContext::new(lat, params.n, params.f, 0, &none);
    ctx.provision_all_faults = true;
    score(c, &ctx)
}

/// One annealed tree per bin, whose internal roles are exactly the bin,
/// ordered from best to worst score.
pub fn kauri_sa_trees<R: Rng>(
    params: &SystemParams,
    lat: &LatencyMatrix<u64>,
    annealing: &AnnealingParams,
    rng: &mut R,
) -> optilog_core::Result<Vec<(TreeConfig, u64)>> {
    let b = branch_factor_for(params.n);
    let bins = kauri_bins(params.n, b + 1, rng)?;
    let mut out = Vec::with_capacity(bins.len());
    for bin in &bins {
        let cand: BTreeSet<ReplicaId> = bin.iter().copied().collect();
        let seed = rng.gen();
        let best = sa_search(
            Topology::Tree,
            params.n,
            &cand,
            |c| baseline_score(lat, params, c),
            annealing,
            seed,
        )?;
        match best.config {
            Configuration::Tree(t) => out.push((t, best.score)),
            Configuration::Star(_) => unreachable!("tree search"),
        }
    }
    out.sort_by_key(|(t, s)| (*s, t.root));
    Ok(out)
}
