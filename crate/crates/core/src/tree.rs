//! Tree configurations: shape, scoring and expected delivery times.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::latency::LatencyMatrix;
use crate::model::{Error, ReplicaId, Result};
use crate::scalar::LatencyScalar;
use crate::suspicion::MessageType;
use crate::timeouts::{MsgKey, TimeoutTable, Witness};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intermediate {
    pub id: ReplicaId,
    pub children: Vec<ReplicaId>,
}

/// Root, `b` intermediates and their leaves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub root: ReplicaId,
    pub intermediates: Vec<Intermediate>,
    pub branch_factor: usize,
}

impl TreeConfig {
    /// Root first, then `b` intermediates, then leaves dealt to the
    /// intermediates in order, `b` each; the last may get fewer.
    pub fn from_order(order: &[ReplicaId], b: usize) -> Result<Self> {
        if b == 0 || order.len() < b + 1 {
            return Err(Error::InvalidParams(format!(
                "cannot build a tree with b = {b} from {} replicas",
                order.len()
            )));
        }
        let leaves = &order[b + 1..];
        if leaves.len() > b * b {
            return Err(Error::InvalidParams(format!(
                "{} leaves exceed b^2 = {}",
                leaves.len(),
                b * b
            )));
        }
        let mut chunks = leaves.chunks(b);
        let intermediates = order[1..=b]
            .iter()
            .map(|&id| Intermediate {
                id,
                children: chunks.next().map(|c| c.to_vec()).unwrap_or_default(),
            })
            .collect();
        Ok(TreeConfig {
            root: order[0],
            intermediates,
            branch_factor: b,
        })
    }

    /// Root and intermediates.
    pub fn internal(&self) -> Vec<ReplicaId> {
        std::iter::once(self.root)
            .chain(self.intermediates.iter().map(|i| i.id))
            .collect()
    }

    pub fn members(&self) -> BTreeSet<ReplicaId> {
        let mut s: BTreeSet<ReplicaId> = self.internal().into_iter().collect();
        for i in &self.intermediates {
            s.extend(i.children.iter().copied());
        }
        s
    }

    pub fn size(&self) -> usize {
        1 + self
            .intermediates
            .iter()
            .map(|i| 1 + i.children.len())
            .sum::<usize>()
    }

    pub fn parent_of(&self, leaf: ReplicaId) -> Option<ReplicaId> {
        self.intermediates
            .iter()
            .find(|i| i.children.contains(&leaf))
            .map(|i| i.id)
    }
}

/// `b` such that `n = b^2 + b + 1`.
pub fn branch_factor(n: usize) -> Result<usize> {
    let b = (isqrt(4 * n.max(1) - 3).saturating_sub(1)) / 2;
    if n >= 3 && b * b + b + 1 == n {
        Ok(b)
    } else {
        Err(Error::NonPerfectTreeSize { n })
    }
}

/// Smallest `b` with `b^2 + b + 1 >= n`.
pub fn branch_factor_for(n: usize) -> usize {
    let mut b = 1;
    while b * b + b + 1 < n {
        b += 1;
    }
    b
}

fn isqrt(x: usize) -> usize {
    let mut r = (x as f64).sqrt() as usize;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

fn live<'a>(
    i: &'a Intermediate,
    absent: &'a BTreeSet<ReplicaId>,
) -> impl Iterator<Item = ReplicaId> + 'a {
    i.children.iter().copied().filter(move |c| !absent.contains(c))
}

/// Slowest link from `i` to one of its present children; zero without children.
pub fn aggregation_latency<T: LatencyScalar>(
    i: &Intermediate,
    lat: &LatencyMatrix<T>,
    absent: &BTreeSet<ReplicaId>,
) -> T {
    live(i, absent).fold(T::zero(), |m, c| m.max_of(lat.get(i.id, c)))
}

/// Cheapest way to hear from `k - 1` replicas besides the root: over sets of
/// intermediates whose subtrees (intermediate included) cover `k - 1`, the
/// smallest possible maximum of `agg(i) + lat(i, root)`.
pub fn tree_score<T: LatencyScalar>(tree: &TreeConfig, lat: &LatencyMatrix<T>, k: usize) -> T {
    tree_score_with(tree, lat, k, &BTreeSet::new())
}

/// [`tree_score`] where replicas in `absent` neither vote nor are waited for.
pub fn tree_score_with<T: LatencyScalar>(
    tree: &TreeConfig,
    lat: &LatencyMatrix<T>,
    k: usize,
    absent: &BTreeSet<ReplicaId>,
) -> T {
    let costs: Vec<(T, usize)> = tree
        .intermediates
        .iter()
        .filter(|i| !absent.contains(&i.id))
        .map(|i| {
            (
                aggregation_latency(i, lat, absent).plus(lat.get(i.id, tree.root)),
                live(i, absent).count() + 1,
            )
        })
        .collect();
    cover(costs, k.saturating_sub(1)).0
}

/// Sorts by cost and takes the shortest prefix covering `need`; returns the
/// prefix maximum and the indices used.
fn cover<T: LatencyScalar>(costs: Vec<(T, usize)>, need: usize) -> (T, Vec<usize>) {
    if need == 0 {
        return (T::zero(), Vec::new());
    }
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].0.total_cmp(&costs[b].0).then(a.cmp(&b)));
    let mut covered = 0;
    let mut used = Vec::new();
    for i in idx {
        let (c, s) = costs[i];
        if c.is_infinite() {
            break;
        }
        covered += s;
        used.push(i);
        if covered >= need {
            return (c, used);
        }
    }
    (T::infinity(), Vec::new())
}

/// Expected delivery times for one tree round.
///
/// Intermediates check Propose and Vote, the root checks AggVote; leaves do
/// not check FwdPropose. The round duration is the smallest possible
/// maximum AggVote time over intermediate sets covering `k - 1`.
pub fn tree_timeouts<T: LatencyScalar>(
    tree: &TreeConfig,
    lat: &LatencyMatrix<T>,
    k: usize,
    absent: &BTreeSet<ReplicaId>,
) -> TimeoutTable<T> {
    use MessageType::*;
    let r = tree.root;
    let mut t = TimeoutTable::new(r);
    t.unmonitored.insert(FwdPropose);
    let mut agg_costs = Vec::new();
    let mut agg_keys = Vec::new();
    for i in tree.intermediates.iter().filter(|i| !absent.contains(&i.id)) {
        let prop = MsgKey::new(Propose, r, i.id);
        let dp = lat.get(r, i.id);
        t.insert(prop, dp, Witness::Start);
        let mut votes = Vec::new();
        for c in live(i, absent) {
            let fwd = MsgKey::new(FwdPropose, i.id, c);
            let df = dp.plus(lat.get(i.id, c));
            t.insert(fwd, df, Witness::After(prop));
            let vote = MsgKey::new(Vote, c, i.id);
            t.insert(vote, df.plus(lat.get(c, i.id)), Witness::After(fwd));
            votes.push(vote);
        }
        let agg = MsgKey::new(AggVote, i.id, r);
        let link = lat.get(i.id, r);
        let (d, w) = if votes.is_empty() {
            (dp.plus(link), Witness::After(prop))
        } else {
            let slowest = votes
                .iter()
                .map(|v| t.entries[v])
                .fold(T::zero(), |m, x| m.max_of(x));
            (slowest.plus(link), Witness::All(votes.clone()))
        };
        t.insert(agg, d, w);
        agg_costs.push((d, votes.len() + 1));
        agg_keys.push(agg);
    }
    let (dr, used) = cover(agg_costs, k.saturating_sub(1));
    t.round_duration = dr;
    t.round_witness = used.iter().map(|&i| agg_keys[i]).collect();
    t.round_quorum = t.round_witness.len();
    t
}
