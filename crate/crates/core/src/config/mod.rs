//! Configurations, their scoring, and the annealing search over them.

mod kauri;
mod monitor;
mod search;

pub use kauri::{kauri_bins, kauri_trees};
pub use monitor::{Basis, ConfigMonitor, ConfigProposal, Decision, RejectReason, IMPROVEMENT_RATIO};
pub use search::{mutate, random_layout, sa_search, AnnealingParams, Schedule, SearchOutcome};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::canonical::Canonical;
use crate::latency::LatencyMatrix;
use crate::model::{Error, ReplicaId, Result};
use crate::pbft::{pbft_score, StarConfig};
use crate::scalar::LatencyScalar;
use crate::tree::{branch_factor_for, tree_score_with, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Tree,
    Star,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "lowercase")]
pub enum Configuration {
    Tree(TreeConfig),
    Star(StarConfig),
}

impl Configuration {
    pub fn topology(&self) -> Topology {
        match self {
            Configuration::Tree(_) => Topology::Tree,
            Configuration::Star(_) => Topology::Star,
        }
    }

    /// Replicas holding special roles: root and intermediates, or the leader.
    pub fn special(&self) -> Vec<ReplicaId> {
        match self {
            Configuration::Tree(t) => t.internal(),
            Configuration::Star(s) => vec![s.leader],
        }
    }

    pub fn leader(&self) -> ReplicaId {
        match self {
            Configuration::Tree(t) => t.root,
            Configuration::Star(s) => s.leader,
        }
    }

    pub fn roles_within(&self, candidates: &BTreeSet<ReplicaId>) -> bool {
        self.special().iter().all(|r| candidates.contains(r))
    }

    /// Short stable label, e.g. `tree:0/1,2,3` or `star:4`.
    pub fn label(&self) -> String {
        match self {
            Configuration::Tree(t) => format!(
                "tree:{}/{}",
                t.root,
                t.intermediates
                    .iter()
                    .map(|i| i.id.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            Configuration::Star(s) => format!("star:{}", s.leader),
        }
    }
}

impl Canonical for Configuration {
    fn encode(&self, out: &mut Vec<u8>) {
        let l = Layout::from_config(self);
        out.push(match l.topology {
            Topology::Tree => 0,
            Topology::Star => 1,
        });
        l.b.encode(out);
        l.order.encode(out);
    }
}

/// A configuration as a permutation of all replicas. The first
/// `special_slots()` positions hold special roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub topology: Topology,
    pub b: usize,
    pub order: Vec<ReplicaId>,
}

impl Layout {
    pub fn new(topology: Topology, n: usize, order: Vec<ReplicaId>) -> Self {
        let b = match topology {
            Topology::Tree => branch_factor_for(n),
            Topology::Star => 0,
        };
        Layout { topology, b, order }
    }

    pub fn special_slots(&self) -> usize {
        match self.topology {
            Topology::Tree => self.b + 1,
            Topology::Star => 1,
        }
    }

    pub fn to_config(&self) -> Configuration {
        match self.topology {
            Topology::Tree => Configuration::Tree(
                TreeConfig::from_order(&self.order, self.b).expect("layout sized for its tree"),
            ),
            Topology::Star => {
                let mut members = self.order.clone();
                members.sort();
                Configuration::Star(StarConfig {
                    leader: self.order[0],
                    members,
                })
            }
        }
    }

    pub fn from_config(c: &Configuration) -> Self {
        match c {
            Configuration::Tree(t) => {
                let mut order = t.internal();
                for i in &t.intermediates {
                    order.extend(i.children.iter().copied());
                }
                Layout {
                    topology: Topology::Tree,
                    b: t.branch_factor,
                    order,
                }
            }
            Configuration::Star(s) => {
                let mut order = vec![s.leader];
                order.extend(s.members.iter().copied().filter(|&m| m != s.leader));
                Layout {
                    topology: Topology::Star,
                    b: 0,
                    order,
                }
            }
        }
    }
}

/// Everything a score depends on besides the configuration.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext<'a, T: LatencyScalar> {
    pub lat: &'a LatencyMatrix<T>,
    pub n: usize,
    pub f: usize,
    pub u: usize,
    pub absent: &'a BTreeSet<ReplicaId>,
    /// Score as the fixed-threshold baseline: always provision for `f`.
    pub provision_all_faults: bool,
}

impl<'a, T: LatencyScalar> ScoreContext<'a, T> {
    pub fn new(lat: &'a LatencyMatrix<T>, n: usize, f: usize, u: usize, absent: &'a BTreeSet<ReplicaId>) -> Self {
        ScoreContext {
            lat,
            n,
            f,
            u,
            absent,
            provision_all_faults: false,
        }
    }

    pub fn q(&self) -> usize {
        self.n - self.f
    }

    /// Extra replies beyond `q` to provision for; `u` capped so that at
    /// most `f` replicas are missing overall.
    pub fn extra(&self) -> usize {
        let budget = self.f.saturating_sub(self.absent.len());
        if self.provision_all_faults {
            budget
        } else {
            self.u.min(budget)
        }
    }

    pub fn k(&self) -> usize {
        self.q() + self.extra()
    }
}

pub fn score<T: LatencyScalar>(c: &Configuration, ctx: &ScoreContext<'_, T>) -> T {
    match c {
        Configuration::Tree(t) => tree_score_with(t, ctx.lat, ctx.k(), ctx.absent),
        Configuration::Star(s) => pbft_score(s, ctx.lat, ctx.q(), ctx.extra(), ctx.absent),
    }
}

/// Checks that `c` places every replica exactly once with the right shape
/// and that special roles are held by candidates.
pub fn validate(c: &Configuration, n: usize, candidates: &BTreeSet<ReplicaId>) -> Result<()> {
    let l = Layout::from_config(c);
    let expected = Layout::new(l.topology, n, Vec::new());
    if l.b != expected.b {
        return Err(Error::Malformed(format!(
            "branch factor {} does not match {} for n = {n}",
            l.b, expected.b
        )));
    }
    let seen: BTreeSet<ReplicaId> = l.order.iter().copied().collect();
    if l.order.len() != n || seen.len() != n || seen.iter().any(|r| r.index() >= n) {
        return Err(Error::Malformed("configuration is not a permutation of the replicas".into()));
    }
    if let Configuration::Tree(t) = c {
        if let Ok(rebuilt) = TreeConfig::from_order(&l.order, l.b) {
            if &rebuilt != t {
                return Err(Error::Malformed("tree is not in canonical fill order".into()));
            }
        }
    }
    if !c.roles_within(candidates) {
        return Err(Error::InsufficientCandidates {
            needed: l.special_slots(),
            available: c.special().iter().filter(|r| candidates.contains(r)).count(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: u32) -> Vec<ReplicaId> {
        (0..n).map(ReplicaId).collect()
    }

    #[test]
    fn layout_round_trip() {
        let l = Layout::new(Topology::Tree, 13, ids(13));
        let c = l.to_config();
        assert_eq!(Layout::from_config(&c), l);
        assert_eq!(c.label(), "tree:0/1,2,3");
        let s = Layout::new(Topology::Star, 4, vec![ReplicaId(2), ReplicaId(0), ReplicaId(1), ReplicaId(3)]);
        assert_eq!(s.to_config().leader(), ReplicaId(2));
    }

    #[test]
    fn validation_rejects_non_candidate_roles() {
        let c = Layout::new(Topology::Tree, 13, ids(13)).to_config();
        let all: BTreeSet<ReplicaId> = ids(13).into_iter().collect();
        assert!(validate(&c, 13, &all).is_ok());
        let mut some = all.clone();
        some.remove(&ReplicaId(2));
        assert!(validate(&c, 13, &some).is_err());
        assert!(validate(&c, 14, &all).is_err());
    }

    #[test]
    fn extra_is_capped_by_faults() {
        let lat = LatencyMatrix::uniform(7, 1u64);
        let none = BTreeSet::new();
        let ctx = ScoreContext::new(&lat, 7, 2, 5, &none);
        assert_eq!(ctx.k(), 7);
        let gone: BTreeSet<ReplicaId> = [ReplicaId(6)].into_iter().collect();
        let ctx = ScoreContext::new(&lat, 7, 2, 5, &gone);
        assert_eq!(ctx.k(), 6);
    }
}
