//! Synthetic geo-distributed latency matrices.

use std::f64::consts::PI;

use optilog_core::LatencyMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Local delay added to every off-diagonal link.
pub const BASE_US: u64 = 1_000;
/// Extra one-way delay between antipodal cities.
pub const ANTIPODAL_US: u64 = 250_000;

/// Places `city_count` cities uniformly on a sphere; each link costs
/// [`BASE_US`] plus a share of [`ANTIPODAL_US`] proportional to the
/// great-circle distance.
pub fn synth_latency_matrix(city_count: usize, seed: u64) -> LatencyMatrix<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cities: Vec<[f64; 3]> = (0..city_count)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let r = (1.0 - z * z).sqrt();
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect();
    let mut rows = vec![vec![0u64; city_count]; city_count];
    for a in 0..city_count {
        for b in a + 1..city_count {
            let dot: f64 = (0..3).map(|i| cities[a][i] * cities[b][i]).sum();
            let angle = dot.clamp(-1.0, 1.0).acos();
            let v = BASE_US + (angle / PI * ANTIPODAL_US as f64).round() as u64;
            rows[a][b] = v;
            rows[b][a] = v;
        }
    }
    LatencyMatrix::from_rows(&rows).expect("square")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_city() {
        let m = synth_latency_matrix(1, 3);
        assert_eq!(m.rows(), vec![vec![0]]);
    }

    #[test]
    fn symmetric_zero_diagonal_and_bounded() {
        for seed in 0..100 {
            let m = synth_latency_matrix(12, seed);
            for a in 0..12 {
                assert_eq!(m.at(a, a), 0);
                for b in 0..12 {
                    assert_eq!(m.at(a, b), m.at(b, a));
                    if a != b {
                        assert!((BASE_US..=BASE_US + ANTIPODAL_US).contains(&m.at(a, b)));
                    }
                }
            }
        }
    }
}
