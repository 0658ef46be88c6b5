use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Error, ReplicaId, Result, SystemParams};
use crate::tree::{branch_factor_for, TreeConfig};

/// Shuffles the replicas into `floor(n / m)` disjoint bins of `m`. The
/// `n mod m` leftovers belong to no bin.
pub fn kauri_bins<R: Rng>(n: usize, m: usize, rng: &mut R) -> Result<Vec<Vec<ReplicaId>>> {
    if m == 0 || m > n {
        return Err(Error::InvalidParams(format!("bin size {m} invalid for n = {n}")));
    }
    let mut all: Vec<ReplicaId> = (0..n as u32).map(ReplicaId).collect();
    all.shuffle(rng);
    Ok(all.chunks_exact(m).map(|c| c.to_vec()).collect())
}

/// One tree per bin: the bin's first member is root, the rest are the
/// intermediates, every other replica is a leaf. Running out of trees means
/// falling back to a star.
pub fn kauri_trees<R: Rng>(params: &SystemParams, rng: &mut R) -> Result<Vec<TreeConfig>> {
    let b = branch_factor_for(params.n);
    let bins = kauri_bins(params.n, b + 1, rng)?;
    let mut trees = Vec::with_capacity(bins.len());
    for bin in &bins {
        let mut leaves: Vec<ReplicaId> = params.replicas().filter(|r| !bin.contains(r)).collect();
        leaves.shuffle(rng);
        let mut order = bin.clone();
        order.extend(leaves);
        trees.push(TreeConfig::from_order(&order, b)?);
    }
    Ok(trees)
}
