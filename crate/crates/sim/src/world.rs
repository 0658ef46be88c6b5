//! The actual network: true link latencies plus bounded jitter.

use optilog_core::{LatencyMatrix, ReplicaId, RoundNumber, Slack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub actual: LatencyMatrix<u64>,
    /// Upper jitter factor after GST.
    pub delta: Slack,
    /// First round in which the jitter bound holds.
    pub gst_round: RoundNumber,
    /// Upper jitter factor before GST.
    pub pre_gst: Slack,
    pub seed: u64,
}

impl World {
    pub fn new(actual: LatencyMatrix<u64>, delta: Slack, seed: u64) -> Self {
        World {
            actual,
            delta,
            gst_round: 0,
            pre_gst: delta,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.actual.n()
    }

    /// Jitter source for one round, independent of every other round.
    pub fn round_rng(&self, round: RoundNumber) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ round.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Jitter factor in ppm, drawn in steps of 1000 from `[1, bound]`.
    pub fn jitter_ppm<R: Rng>(&self, round: RoundNumber, rng: &mut R) -> u64 {
        let bound = if round < self.gst_round {
            self.pre_gst
        } else {
            self.delta
        };
        let steps = bound.ppm().saturating_sub(Slack::ONE.ppm()) / 1_000;
        Slack::ONE.ppm() + 1_000 * rng.gen_range(0..=steps)
    }

    /// Delivery delay of one message under a jitter factor, before any
    /// adversarial slowdown.
    pub fn delay(&self, from: ReplicaId, to: ReplicaId, jitter_ppm: u64) -> u64 {
        scale(self.actual.get(from, to), jitter_ppm)
    }
}

/// `value * ppm / 1e6`, rounded down; INF stays INF.
pub fn scale(value: u64, ppm: u64) -> u64 {
    if value == u64::MAX {
        return u64::MAX;
    }
    (value as u128 * ppm as u128 / 1_000_000).min(u64::MAX as u128 - 1) as u64
}
