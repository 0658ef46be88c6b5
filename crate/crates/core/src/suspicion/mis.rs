//! Maximum independent sets on small suspicion graphs.
//!
//! Isolated vertices belong to every maximum independent set and are taken
//! first. The remaining core is solved exactly by an include-first search
//! in id order when it has at most [`EXACT_LIMIT`] vertices; that search
//! returns the lexicographically smallest maximum set. Larger cores use a
//! Bron–Kerbosch clique search on the complement with a fixed node budget.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::ReplicaId;

pub const EXACT_LIMIT: usize = 20;
/// Node budget for the large-core search.
pub const HEURISTIC_BUDGET: u64 = 200_000;

#[derive(Clone, PartialEq, Eq, Debug)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }
    fn full(n: usize) -> Self {
        let mut b = Self::empty(n);
        for i in 0..n {
            b.set(i);
        }
        b
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn lowest(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn and_not(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & !b).collect())
    }
    fn or(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a | b).collect())
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + t)
            })
        })
    }
}

/// Vertices in ascending id order with bitset adjacency.
struct Local {
    ids: Vec<ReplicaId>,
    adj: Vec<Bits>,
}

impl Local {
    fn new(vertices: &BTreeSet<ReplicaId>, edges: &BTreeSet<(ReplicaId, ReplicaId)>) -> Self {
        let ids: Vec<ReplicaId> = vertices.iter().copied().collect();
        let pos: BTreeMap<ReplicaId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut adj = vec![Bits::empty(ids.len()); ids.len()];
        for (a, b) in edges {
            if let (Some(&i), Some(&j)) = (pos.get(a), pos.get(b)) {
                if i != j {
                    adj[i].set(j);
                    adj[j].set(i);
                }
            }
        }
        Local { ids, adj }
    }
}

/// Lexicographically smallest maximum independent set for cores up to
/// [`EXACT_LIMIT`] vertices; a budgeted search beyond that. Edges with an
/// endpoint outside `vertices` are ignored. Result is sorted.
pub fn max_independent_set(
    vertices: &BTreeSet<ReplicaId>,
    edges: &BTreeSet<(ReplicaId, ReplicaId)>,
) -> Vec<ReplicaId> {
    let g = Local::new(vertices, edges);
    let n = g.ids.len();
    let mut core = Bits::empty(n);
    let mut chosen = Vec::new();
    for i in 0..n {
        if g.adj[i].is_empty() {
            chosen.push(i);
        } else {
            core.set(i);
        }
    }
    let picked = if core.count() <= EXACT_LIMIT {
        exact(&g, core)
    } else {
        bron_kerbosch(&g, core, HEURISTIC_BUDGET)
    };
    chosen.extend(picked);
    let mut out: Vec<ReplicaId> = chosen.into_iter().map(|i| g.ids[i]).collect();
    out.sort();
    out
}

fn exact(g: &Local, cand: Bits) -> Vec<usize> {
    fn go(g: &Local, cand: Bits, cur: &mut Vec<usize>, best: &mut Vec<usize>) {
        let Some(v) = cand.lowest() else {
            if cur.len() > best.len() {
                *best = cur.clone();
            }
            return;
        };
        if cur.len() + cand.count() <= best.len() {
            return;
        }
        let mut rest = cand.clone();
        rest.clear(v);
        cur.push(v);
        go(g, rest.and_not(&g.adj[v]), cur, best);
        cur.pop();
        go(g, rest, cur, best);
    }
    let mut best = Vec::new();
    go(g, cand, &mut Vec::new(), &mut best);
    best
}

/// Greedy start (lowest degree first, lowest id on ties), then
/// Bron–Kerbosch on the complement restricted to `core`. The pivot is the
/// lowest-id vertex with the most complement neighbours in P.
fn bron_kerbosch(g: &Local, core: Bits, budget: u64) -> Vec<usize> {
    let n = g.ids.len();
    let comp: Vec<Bits> = (0..n)
        .map(|i| {
            let mut c = core.and_not(&g.adj[i]);
            c.clear(i);
            c
        })
        .collect();

    let mut best = greedy(g, core.clone());

    struct Ctx<'a> {
        comp: &'a [Bits],
        nodes: u64,
        budget: u64,
        best: Vec<usize>,
    }

    fn better(a: &[usize], b: &[usize]) -> bool {
        a.len() > b.len() || (a.len() == b.len() && a < b)
    }

    fn go(ctx: &mut Ctx<'_>, r: &mut Vec<usize>, p: Bits, x: Bits) {
        ctx.nodes += 1;
        if p.is_empty() {
            if x.is_empty() {
                let mut s = r.clone();
                s.sort();
                if better(&s, &ctx.best) {
                    ctx.best = s;
                }
            }
            return;
        }
        if r.len() + p.count() <= ctx.best.len() || ctx.nodes > ctx.budget {
            return;
        }
        let px = p.or(&x);
        let pivot = px
            .iter()
            .max_by(|&a, &b| {
                let da = ctx.comp[a].and(&p).count();
                let db = ctx.comp[b].and(&p).count();
                da.cmp(&db).then(b.cmp(&a))
            })
            .expect("p is non-empty");
        let branch: Vec<usize> = p.and_not(&ctx.comp[pivot]).iter().collect();
        let mut p = p;
        let mut x = x;
        for v in branch {
            r.push(v);
            go(ctx, r, p.and(&ctx.comp[v]), x.and(&ctx.comp[v]));
            r.pop();
            p.clear(v);
            x.set(v);
            if ctx.nodes > ctx.budget {
                return;
            }
        }
    }

    let mut ctx = Ctx {
        comp: &comp,
        nodes: 0,
        budget,
        best: {
            best.sort();
            std::mem::take(&mut best)
        },
    };
    go(&mut ctx, &mut Vec::new(), core, Bits::empty(n));
    ctx.best
}

fn greedy(g: &Local, core: Bits) -> Vec<usize> {
    let mut left = core;
    let mut out = Vec::new();
    while !left.is_empty() {
        let v = left
            .iter()
            .min_by_key(|&v| (g.adj[v].and(&left).count(), v))
            .expect("non-empty");
        out.push(v);
        left.clear(v);
        left = left.and_not(&g.adj[v]);
    }
    out
}

/// Runs the budgeted search regardless of size. Exposed for tests.
#[doc(hidden)]
pub fn heuristic_independent_set(
    vertices: &BTreeSet<ReplicaId>,
    edges: &BTreeSet<(ReplicaId, ReplicaId)>,
    budget: u64,
) -> Vec<ReplicaId> {
    let g = Local::new(vertices, edges);
    let all = Bits::full(g.ids.len());
    let mut out: Vec<ReplicaId> = bron_kerbosch(&g, all, budget)
        .into_iter()
        .map(|i| g.ids[i])
        .collect();
    out.sort();
    out
}

pub fn is_independent(set: &[ReplicaId], edges: &BTreeSet<(ReplicaId, ReplicaId)>) -> bool {
    let s: BTreeSet<_> = set.iter().collect();
    !edges
        .iter()
        .any(|(a, b)| a != b && s.contains(a) && s.contains(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u32]) -> BTreeSet<ReplicaId> {
        v.iter().map(|&i| ReplicaId(i)).collect()
    }

    fn es(v: &[(u32, u32)]) -> BTreeSet<(ReplicaId, ReplicaId)> {
        v.iter().map(|&(a, b)| (ReplicaId(a), ReplicaId(b))).collect()
    }

    /// All subsets, largest first, lexicographically smallest among them.
    fn brute(n: u32, edges: &BTreeSet<(ReplicaId, ReplicaId)>) -> Vec<ReplicaId> {
        let mut best: Vec<ReplicaId> = Vec::new();
        for mask in 0u32..(1 << n) {
            let set: Vec<ReplicaId> = (0..n).filter(|i| mask >> i & 1 == 1).map(ReplicaId).collect();
            if !is_independent(&set, edges) {
                continue;
            }
            if set.len() > best.len() || (set.len() == best.len() && set < best) {
                best = set;
            }
        }
        best
    }

    #[test]
    fn path_prefers_low_ids() {
        let got = max_independent_set(&ids(&[0, 1, 2, 3]), &es(&[(0, 1), (1, 2), (2, 3)]));
        assert_eq!(got, vec![ReplicaId(0), ReplicaId(2)]);
    }

    #[test]
    fn edges_outside_vertex_set_ignored() {
        let got = max_independent_set(&ids(&[0, 2]), &es(&[(0, 1), (1, 2)]));
        assert_eq!(got, vec![ReplicaId(0), ReplicaId(2)]);
    }

    #[test]
    fn large_sparse_graph_keeps_isolated_vertices() {
        let v: BTreeSet<ReplicaId> = (0..100).map(ReplicaId).collect();
        let e: BTreeSet<_> = (0..30).map(|i| (ReplicaId(i), ReplicaId(i + 50))).collect();
        let got = max_independent_set(&v, &e);
        assert_eq!(got.len(), 70);
        assert!(is_independent(&got, &e));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn exact_matches_brute_force(n in 1u32..13, raw in proptest::collection::vec((0u32..13, 0u32..13), 0..40)) {
            let e: BTreeSet<_> = raw.into_iter()
                .filter(|(a, b)| a < b && *b < n)
                .map(|(a, b)| (ReplicaId(a), ReplicaId(b)))
                .collect();
            let v: BTreeSet<ReplicaId> = (0..n).map(ReplicaId).collect();
            prop_assert_eq!(max_independent_set(&v, &e), brute(n, &e));
        }

        #[test]
        fn heuristic_size_matches_brute_force(n in 1u32..13, raw in proptest::collection::vec((0u32..13, 0u32..13), 0..40)) {
            let e: BTreeSet<_> = raw.into_iter()
                .filter(|(a, b)| a < b && *b < n)
                .map(|(a, b)| (ReplicaId(a), ReplicaId(b)))
                .collect();
            let v: BTreeSet<ReplicaId> = (0..n).map(ReplicaId).collect();
            let h = heuristic_independent_set(&v, &e, u64::MAX);
            prop_assert!(is_independent(&h, &e));
            prop_assert_eq!(h.len(), brute(n, &e).len());
        }
    }
}
