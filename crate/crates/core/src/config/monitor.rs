use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{score, validate, Configuration, ScoreContext, Topology};
use crate::canonical::Canonical;
use crate::model::ReplicaId;

/// A proposal must beat the current score by this factor while the current
/// configuration is still valid.
pub const IMPROVEMENT_RATIO: f64 = 0.9;

/// Latency-matrix generation and candidate-set version a score refers to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Basis {
    pub matrix_generation: u64,
    pub candidate_version: u64,
}

impl Canonical for Basis {
    fn encode(&self, out: &mut Vec<u8>) {
        self.matrix_generation.encode(out);
        self.candidate_version.encode(out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigProposal {
    pub author: ReplicaId,
    pub config: Configuration,
    /// Microseconds; `u64::MAX` for INF.
    pub claimed_score: u64,
    pub basis: Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    WrongTopology,
    InvalidConfiguration,
    StaleBasis,
    ScoreMismatch,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// Accepted; fewer than `f + 1` authors so far.
    Pending,
    Keep,
    Reconfigure(Configuration),
    Rejected(RejectReason),
}

/// Current configuration and the proposals gathered for replacing it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigMonitor {
    topology: Topology,
    ratio: f64,
    current: Option<Configuration>,
    needs_replacement: bool,
    pending: BTreeMap<ReplicaId, Configuration>,
    epoch: u64,
    rejected: u64,
}

impl ConfigMonitor {
    pub fn new(topology: Topology) -> Self {
        ConfigMonitor {
            topology,
            ratio: IMPROVEMENT_RATIO,
            current: None,
            needs_replacement: true,
            pending: BTreeMap::new(),
            epoch: 0,
            rejected: 0,
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn current(&self) -> Option<&Configuration> {
        self.current.as_ref()
    }

    /// False once the current configuration must be replaced.
    pub fn current_valid(&self) -> bool {
        self.current.is_some() && !self.needs_replacement
    }

    pub fn invalidate(&mut self) {
        self.needs_replacement = true;
    }

    /// Installs a configuration directly, bypassing proposals.
    pub fn install(&mut self, c: Configuration) {
        self.current = Some(c);
        self.needs_replacement = false;
        self.pending.clear();
        self.epoch += 1;
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn pending_authors(&self) -> impl Iterator<Item = &ReplicaId> {
        self.pending.keys()
    }

    /// Processes one committed proposal against the shared basis.
    ///
    /// The claimed score must equal the score recomputed under `ctx`. Once
    /// `f + 1` distinct authors proposed, the best one (ties to the lowest
    /// author) replaces an invalid configuration, or a valid one if it is
    /// better by the improvement ratio.
    pub fn step(
        &mut self,
        p: &ConfigProposal,
        ctx: &ScoreContext<'_, u64>,
        candidates: &BTreeSet<ReplicaId>,
        basis: Basis,
    ) -> Decision {
        let reject = |me: &mut Self, r| {
            me.rejected += 1;
            Decision::Rejected(r)
        };
        if p.config.topology() != self.topology {
            return reject(self, RejectReason::WrongTopology);
        }
        if validate(&p.config, ctx.n, candidates).is_err() {
            return reject(self, RejectReason::InvalidConfiguration);
        }
        if p.basis != basis {
            return reject(self, RejectReason::StaleBasis);
        }
        if score(&p.config, ctx) != p.claimed_score {
            return reject(self, RejectReason::ScoreMismatch);
        }
        if self.pending.contains_key(&p.author) {
            return reject(self, RejectReason::Duplicate);
        }
        self.pending.insert(p.author, p.config.clone());
        if self.pending.len() < ctx.f + 1 {
            return Decision::Pending;
        }
        self.decide(ctx, candidates)
    }

    fn decide(&mut self, ctx: &ScoreContext<'_, u64>, candidates: &BTreeSet<ReplicaId>) -> Decision {
        let best = self
            .pending
            .iter()
            .filter(|(_, c)| c.roles_within(candidates))
            .map(|(a, c)| (score(c, ctx), *a, c))
            .min_by_key(|(s, a, _)| (*s, *a));
        let Some((best_score, _, best)) = best else {
            return Decision::Pending;
        };
        let best = best.clone();
        let replace = match (&self.current, self.needs_replacement) {
            (None, _) | (_, true) => true,
            (Some(cur), false) => {
                let cur = score(cur, ctx);
                improves(best_score, cur, self.ratio)
            }
        };
        self.pending.clear();
        if replace {
            self.install(best.clone());
            Decision::Reconfigure(best)
        } else {
            Decision::Keep
        }
    }
}

fn improves(best: u64, current: u64, ratio: f64) -> bool {
    if best == u64::MAX {
        return false;
    }
    if current == u64::MAX {
        return true;
    }
    (best as f64) < ratio * current as f64
}

impl Canonical for ConfigMonitor {
    fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.topology as u8);
        self.ratio.to_bits().encode(out);
        self.current.encode(out);
        self.needs_replacement.encode(out);
        self.pending.encode(out);
        self.epoch.encode(out);
        self.rejected.encode(out);
    }
}
