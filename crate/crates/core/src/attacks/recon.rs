//! Subgraph reconstruction by retrieval: per sub-size, remember every
//! post-rewrite sequence together with the multiset of pre-rewrite
//! sequences it was observed to come from. A query consults the largest
//! matching store for candidates, then lets the smaller stores vote for
//! candidates they prefix-support (cumulative voting across sub-sizes).

use std::collections::{BTreeMap, HashMap};

use crate::netlist::GateKind;

/// One observed (pre, post) sequence pair at a given sub-size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconPair {
    pub sub_size: usize,
    pub pre: Vec<GateKind>,
    pub post: Vec<GateKind>,
}

type Store = HashMap<Vec<GateKind>, BTreeMap<Vec<GateKind>, usize>>;

#[derive(Debug, Clone, Default)]
pub struct ReconModel {
    stores: BTreeMap<usize, Store>,
}

impl ReconModel {
    pub fn train(pairs: &[ReconPair]) -> ReconModel {
        let mut stores: BTreeMap<usize, Store> = BTreeMap::new();
        for p in pairs {
            *stores
                .entry(p.sub_size)
                .or_default()
                .entry(p.post.clone())
                .or_default()
                .entry(p.pre.clone())
                .or_insert(0) += 1;
        }
        ReconModel { stores }
    }

    pub fn is_empty(&self) -> bool {
        self.stores.is_empty()
    }

    /// Sub-sizes with at least one observation, ascending.
    pub fn sizes(&self) -> Vec<usize> {
        self.stores.keys().copied().collect()
    }

    /// Predicts the pre-rewrite sequence for one key-gate, given its
    /// post-rewrite sequences per sub-size. Unresolved queries return the
    /// largest provided post-sequence unchanged (identity fallback).
    pub fn query(&self, posts: &BTreeMap<usize, Vec<GateKind>>) -> Vec<GateKind> {
        let identity = || {
            posts.iter().next_back().map(|(_, seq)| seq.clone()).unwrap_or_default()
        };
        // Largest store with an exact hit owns the candidate set.
        let Some((&base_size, candidates)) = self
            .stores
            .iter()
            .rev()
            .filter_map(|(size, store)| {
                let post = posts.get(size)?;
                store.get(post).map(|c| (size, c))
            })
            .next()
        else {
            return identity();
        };

        let mut scored: Vec<(Vec<GateKind>, usize)> =
            candidates.iter().map(|(pre, &n)| (pre.clone(), n)).collect();
        // Smaller stores see a prefix of the same wave expansion, so their
        // observed pre-sequences endorse every candidate they prefix.
        for (&size, store) in self.stores.range(..base_size).rev() {
            let Some(post) = posts.get(&size) else { continue };
            let Some(small) = store.get(post) else { continue };
            for (small_pre, &n) in small {
                for (pre, score) in scored.iter_mut() {
                    if pre.starts_with(small_pre) {
                        *score += n;
                    }
                }
            }
        }
        // Max votes; ties break to the lexicographically smallest sequence
        // so queries are reproducible.
        scored
            .into_iter()
            .max_by(|(pa, na), (pb, nb)| na.cmp(nb).then_with(|| pb.cmp(pa)))
            .map(|(pre, _)| pre)
            .unwrap_or_else(identity)
    }
}
