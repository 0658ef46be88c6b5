use std::collections::BTreeSet;

use optilog_core::tree::{tree_score, tree_timeouts, Intermediate, TreeConfig};
use optilog_core::{LatencyMatrix, ReplicaId, INF};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum over every subset of intermediates covering `k - 1` votes of the
/// slowest `agg + link to root` in the subset.
fn brute(tree: &TreeConfig, lat: &LatencyMatrix<u64>, k: usize) -> u64 {
    if k <= 1 {
        return 0;
    }
    let b = tree.intermediates.len();
    let mut best = INF;
    for mask in 1u32..(1 << b) {
        let mut cover = 0;
        let mut worst = 0u64;
        for (j, i) in tree.intermediates.iter().enumerate() {
            if mask >> j & 1 == 0 {
                continue;
            }
            cover += i.children.len() + 1;
            let agg = i.children.iter().map(|&c| lat.get(i.id, c)).max().unwrap_or(0);
            let up = lat.get(i.id, tree.root);
            let cost = if agg == INF || up == INF { INF } else { agg + up };
            worst = worst.max(cost);
        }
        if cover + 1 >= k {
            best = best.min(worst);
        }
    }
    best
}

fn random_tree(rng: &mut ChaCha8Rng, b: usize) -> (TreeConfig, usize) {
    let counts: Vec<usize> = (0..b).map(|_| rng.gen_range(0..=b)).collect();
    let n = 1 + b + counts.iter().sum::<usize>();
    let mut next = b as u32 + 1;
    let intermediates = counts
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let children = (next..next + c as u32).map(ReplicaId).collect();
            next += c as u32;
            Intermediate {
                id: ReplicaId(j as u32 + 1),
                children,
            }
        })
        .collect();
    (
        TreeConfig {
            root: ReplicaId(0),
            intermediates,
            branch_factor: b,
        },
        n,
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> LatencyMatrix<u64> {
    let mut rows = vec![vec![0u64; n]; n];
    for a in 0..n {
        for c in a + 1..n {
            let v = if rng.gen_ratio(1, 25) {
                INF
            } else {
                rng.gen_range(0..300)
            };
            rows[a][c] = v;
            rows[c][a] = v;
        }
    }
    LatencyMatrix::from_rows(&rows).unwrap()
}

#[test]
fn greedy_prefix_equals_subset_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for b in 1..=4 {
        for _ in 0..200 {
            let (tree, n) = random_tree(&mut rng, b);
            let lat = random_matrix(&mut rng, n);
            for k in 1..=n + 1 {
                assert_eq!(tree_score(&tree, &lat, k), brute(&tree, &lat, k), "b={b} k={k} {tree:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 2000);
}

#[test]
fn round_duration_is_twice_the_score_on_symmetric_links() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for b in 1..=4 {
        for _ in 0..50 {
            let (tree, n) = random_tree(&mut rng, b);
            let lat = random_matrix(&mut rng, n);
            for k in 1..=n {
                let t = tree_timeouts(&tree, &lat, k, &BTreeSet::new());
                let s = tree_score(&tree, &lat, k);
                let doubled = if s == INF { INF } else { 2 * s };
                assert_eq!(t.round_duration, doubled);
                if let Err(e) = t.verify_witness(&lat, 1) {
                    panic!("{e} k={k} {tree:?}");
                }
            }
        }
    }
}
