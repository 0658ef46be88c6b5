use std::collections::BTreeSet;

use optilog_core::config::{mutate, random_layout, sa_search, score, AnnealingParams};
use optilog_core::{LatencyMatrix, ReplicaId, ScoreContext, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 13;
const B: usize = 3;

fn matrix(seed: u64) -> LatencyMatrix<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![0u64; N]; N];
    for a in 0..N {
        for b in a + 1..N {
            let v = rng.gen_range(1_000..250_000);
            rows[a][b] = v;
            rows[b][a] = v;
        }
    }
    LatencyMatrix::from_rows(&rows).unwrap()
}

/// Every root, intermediate triple and split of the nine leaves into groups
/// of three; score is the cheapest intermediate subset reaching `k - 1`.
fn exhaustive(lat: &LatencyMatrix<u64>, k: usize) -> u64 {
    let d = |a: usize, b: usize| lat.at(a, b);
    let mut best = u64::MAX;
    for root in 0..N {
        let rest: Vec<usize> = (0..N).filter(|&x| x != root).collect();
        for i in 0..rest.len() {
            for j in i + 1..rest.len() {
                for l in j + 1..rest.len() {
                    let mids = [rest[i], rest[j], rest[l]];
                    let leaves: Vec<usize> = rest.iter().copied().filter(|x| !mids.contains(x)).collect();
                    for_each_split(&leaves, &mut |groups| {
                        for perm in PERMS {
                            let cost: Vec<(u64, usize)> = (0..B)
                                .map(|g| {
                                    let m = mids[perm[g]];
                                    let agg = groups[g].iter().map(|&c| d(m, c)).max().unwrap_or(0);
                                    (agg + d(m, root), groups[g].len() + 1)
                                })
                                .collect();
                            let mut s = u64::MAX;
                            for mask in 1u32..(1 << B) {
                                let sel = (0..B).filter(|&g| mask >> g & 1 == 1);
                                let size: usize = sel.clone().map(|g| cost[g].1).sum();
                                if size + 1 >= k {
                                    s = s.min(sel.map(|g| cost[g].0).max().unwrap());
                                }
                            }
                            best = best.min(s);
                        }
                    });
                }
            }
        }
    }
    best
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Unordered splits into three groups of three; intermediate permutations
/// supply the labelling.
fn for_each_split(leaves: &[usize], f: &mut impl FnMut([&[usize]; 3])) {
    let first = leaves[0];
    let rest = &leaves[1..];
    for a in 0..rest.len() {
        for b in a + 1..rest.len() {
            let g1 = [first, rest[a], rest[b]];
            let rem: Vec<usize> = rest.iter().copied().filter(|x| !g1.contains(x)).collect();
            let head = rem[0];
            for c in 1..rem.len() {
                for e in c + 1..rem.len() {
                    let g2 = [head, rem[c], rem[e]];
                    let g3: Vec<usize> = rem.iter().copied().filter(|x| !g2.contains(x)).collect();
                    f([&g1, &g2, &g3]);
                }
            }
        }
    }
}

#[test]
fn annealing_lands_near_the_exhaustive_optimum() {
    let lat = matrix(21);
    let none = BTreeSet::new();
    let ctx = ScoreContext::new(&lat, N, 4, 0, &none);
    let opt = exhaustive(&lat, ctx.k());
    let all: BTreeSet<ReplicaId> = (0..N as u32).map(ReplicaId).collect();
    let params = AnnealingParams::spread_over_iterations(600_000);
    let mut near = 0;
    for seed in 0..20 {
        let out = sa_search(Topology::Tree, N, &all, |c| score(c, &ctx), &params, seed).unwrap();
        assert!(out.score >= opt, "search beat the exhaustive optimum");
        if out.score as f64 <= opt as f64 * 1.05 {
            near += 1;
        }
    }
    assert!(near >= 19, "{near}/20 within 5% of {opt}");
}

#[test]
fn ten_thousand_mutations_keep_roles_on_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for topo in [Topology::Tree, Topology::Star] {
        let cand: BTreeSet<ReplicaId> = [1, 4, 6, 9, 12].into_iter().map(ReplicaId).collect();
        let mut l = random_layout(topo, N, &cand, &mut rng).unwrap();
        let slots = l.special_slots();
        for _ in 0..10_000 {
            let m = mutate(&l, &cand, &mut rng);
            let moved: Vec<usize> = (0..N).filter(|&i| l.order[i] != m.order[i]).collect();
            assert_eq!(moved.len(), 2);
            assert_eq!(l.order[moved[0]], m.order[moved[1]]);
            assert!(m.order[..slots].iter().all(|r| cand.contains(r)));
            assert!(m.to_config().roles_within(&cand));
            l = m;
        }
    }
}
