//! Exact enumeration of the highest-scoring joint assignments.
//!
//! The product space of per-joint candidates is split into disjoint subsets,
//! each tracking its best and second-best assignment. Emitting the globally
//! best second-best and splitting its subset in two yields the assignments
//! in non-increasing score order without visiting the product.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::JointCandidateSet;

/// Per joint, the candidate indices still allowed, in descending value order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSubset {
    allowed: Vec<Arc<Vec<usize>>>,
}

impl CandidateSubset {
    /// The unconstrained product of all candidates.
    pub fn full(candidates: &JointCandidateSet) -> Self {
        Self {
            allowed: candidates
                .joints
                .iter()
                .map(|m| Arc::new((0..m.len()).collect()))
                .collect(),
        }
    }

    /// Lists must be non-empty, strictly increasing (which preserves value order),
    /// and in range for `candidates`.
    pub fn new(allowed: Vec<Vec<usize>>, candidates: &JointCandidateSet) -> Result<Self> {
        if allowed.len() != candidates.joint_count() {
            return Err(Error::DimensionMismatch {
                expected: candidates.joint_count(),
                actual: allowed.len(),
            });
        }
        for (joint, list) in allowed.iter().enumerate() {
            let n = candidates.joints[joint].len();
            if list.is_empty()
                || list.windows(2).any(|w| w[0] >= w[1])
                || list.iter().any(|&i| i >= n)
            {
                return Err(Error::InvalidArgument(format!(
                    "invalid allowed list for joint {joint}: {list:?}"
                )));
            }
        }
        Ok(Self {
            allowed: allowed.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn allowed(&self, joint: usize) -> &[usize] {
        &self.allowed[joint]
    }

    pub fn joint_count(&self) -> usize {
        self.allowed.len()
    }

    pub fn cardinality(&self) -> u128 {
        self.allowed
            .iter()
            .fold(1u128, |acc, l| acc.saturating_mul(l.len() as u128))
    }

    pub fn contains(&self, indices: &[usize]) -> bool {
        indices.len() == self.allowed.len()
            && indices
                .iter()
                .zip(&self.allowed)
                .all(|(i, l)| l.contains(i))
    }
}

/// One joint assignment and its summed candidate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseCandidate {
    pub indices: Vec<usize>,
    pub score: f64,
}

/// Sum of candidate values in joint order.
pub fn score_of(candidates: &JointCandidateSet, indices: &[usize]) -> f64 {
    indices
        .iter()
        .enumerate()
        .map(|(joint, &k)| candidates.value(joint, k))
        .sum()
}

pub fn best_of_subset(subset: &CandidateSubset, candidates: &JointCandidateSet) -> PoseCandidate {
    let indices: Vec<usize> = subset.allowed.iter().map(|l| l[0]).collect();
    let score = score_of(candidates, &indices);
    PoseCandidate { indices, score }
}

/// Where the second-best element of a subset differs from its best.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch {
    pub joint: usize,
    pub old_index: usize,
    pub new_index: usize,
}

fn cheapest_switch(subset: &CandidateSubset, candidates: &JointCandidateSet) -> Option<Switch> {
    let mut best: Option<(f64, Switch)> = None;
    for (joint, list) in subset.allowed.iter().enumerate() {
        if list.len() < 2 {
            continue;
        }
        let drop = candidates.value(joint, list[0]) - candidates.value(joint, list[1]);
        // Strict comparison keeps the lowest joint on ties.
        if best.is_none_or(|(d, _)| drop < d) {
            best = Some((
                drop,
                Switch {
                    joint,
                    old_index: list[0],
                    new_index: list[1],
                },
            ));
        }
    }
    best.map(|(_, s)| s)
}

/// The subset's best assignment with the cheapest single-joint downgrade applied;
/// `None` when the subset holds a single assignment.
pub fn second_best_of_subset(
    subset: &CandidateSubset,
    candidates: &JointCandidateSet,
) -> Option<(PoseCandidate, Switch)> {
    let switch = cheapest_switch(subset, candidates)?;
    let mut indices: Vec<usize> = subset.allowed.iter().map(|l| l[0]).collect();
    indices[switch.joint] = switch.new_index;
    let score = score_of(candidates, &indices);
    Some((PoseCandidate { indices, score }, switch))
}

/// Splits `subset` into the assignments using `new_index` at `joint` (first) and
/// the rest (second). The first child's best is the parent's second-best; the
/// second child keeps the parent's best.
pub fn divide_subset(
    subset: &CandidateSubset,
    joint: usize,
    old_index: usize,
    new_index: usize,
) -> Result<(CandidateSubset, CandidateSubset)> {
    let list = subset
        .allowed
        .get(joint)
        .ok_or_else(|| Error::InvalidArgument(format!("joint {joint} out of range")))?;
    if !list.contains(&new_index) || new_index == old_index || list.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot divide joint {joint} on index {new_index} (allowed {list:?})"
        )));
    }
    let mut fixed = subset.clone();
    fixed.allowed[joint] = Arc::new(vec![new_index]);
    let mut rest = subset.clone();
    rest.allowed[joint] = Arc::new(list.iter().copied().filter(|&i| i != new_index).collect());
    Ok((fixed, rest))
}

struct LiveSubset {
    subset: CandidateSubset,
    best: Vec<usize>,
}

#[derive(Debug)]
struct HeapEntry {
    score: f64,
    joint: usize,
    new_index: usize,
    id: usize,
    indices: Vec<usize>,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: higher score wins, then lower joint, lower candidate, older subset.
        self.score
            .total_cmp(&other.score)
            .then(other.joint.cmp(&self.joint))
            .then(other.new_index.cmp(&self.new_index))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

/// Lazily yields assignments in non-increasing score order.
pub struct NBestIter<'a> {
    candidates: &'a JointCandidateSet,
    subsets: Vec<LiveSubset>,
    heap: BinaryHeap<HeapEntry>,
    emitted: usize,
}

impl<'a> NBestIter<'a> {
    pub fn new(candidates: &'a JointCandidateSet) -> Self {
        Self {
            candidates,
            subsets: Vec::new(),
            heap: BinaryHeap::new(),
            emitted: 0,
        }
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Assignments in live subsets that have not been emitted yet.
    pub fn remaining(&self) -> u128 {
        self.subsets
            .iter()
            .map(|s| s.subset.cardinality() - 1)
            .sum()
    }

    /// Live subsets; each contains exactly one emitted assignment, its best.
    pub fn live_subsets(&self) -> impl Iterator<Item = (&CandidateSubset, &[usize])> {
        self.subsets.iter().map(|s| (&s.subset, s.best.as_slice()))
    }

    fn track(&mut self, id: usize) {
        let live = &self.subsets[id];
        if let Some((second, switch)) = second_best_of_subset(&live.subset, self.candidates) {
            self.heap.push(HeapEntry {
                score: second.score,
                joint: switch.joint,
                new_index: switch.new_index,
                id,
                indices: second.indices,
            });
        }
    }
}

impl Iterator for NBestIter<'_> {
    type Item = PoseCandidate;

    fn next(&mut self) -> Option<PoseCandidate> {
        if self.emitted == 0 {
            let subset = CandidateSubset::full(self.candidates);
            let best = best_of_subset(&subset, self.candidates);
            self.subsets.push(LiveSubset {
                subset,
                best: best.indices.clone(),
            });
            self.track(0);
            self.emitted = 1;
            return Some(best);
        }
        let entry = self.heap.pop()?;
        let parent = &self.subsets[entry.id];
        let old_index = parent.best[entry.joint];
        let (fixed, rest) = divide_subset(&parent.subset, entry.joint, old_index, entry.new_index)
            .expect("heap entry refers to a divisible subset");
        self.subsets[entry.id].subset = rest;
        let child = self.subsets.len();
        self.subsets.push(LiveSubset {
            subset: fixed,
            best: entry.indices.clone(),
        });
        self.track(entry.id);
        self.track(child);
        self.emitted += 1;
        Some(PoseCandidate {
            score: entry.score,
            indices: entry.indices,
        })
    }
}

/// The `n` highest-scoring assignments (fewer if the product is smaller), best first.
pub fn n_best_poses(candidates: &JointCandidateSet, n: usize) -> Result<Vec<PoseCandidate>> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    Ok(NBestIter::new(candidates).take(n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(values: &[&[f64]]) -> JointCandidateSet {
        JointCandidateSet::from_values(&values.iter().map(|v| v.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    fn enumerate(subset: &CandidateSubset) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for j in 0..subset.joint_count() {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    subset.allowed(j).iter().map(move |&k| {
                        let mut p = prefix.clone();
                        p.push(k);
                        p
                    })
                })
                .collect();
        }
        out
    }

    // Score descending, then index tuple ascending.
    fn brute_sorted(
        candidates: &JointCandidateSet,
        subset: &CandidateSubset,
    ) -> Vec<PoseCandidate> {
        let mut all: Vec<PoseCandidate> = enumerate(subset)
            .into_iter()
            .map(|indices| PoseCandidate {
                score: score_of(candidates, &indices),
                indices,
            })
            .collect();
        all.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.indices.cmp(&b.indices)));
        all
    }

    #[test]
    fn unconstrained_best_takes_top_candidates() {
        let c = set(&[&[0.9, 0.5], &[0.8, 0.7], &[0.3, 0.2, 0.1]]);
        let best = best_of_subset(&CandidateSubset::full(&c), &c);
        assert_eq!(best.indices, vec![0, 0, 0]);
        assert!((best.score - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constrained_best_respects_fixed_joint() {
        let c = set(&[&[0.9, 0.5], &[0.8, 0.7, 0.6, 0.5], &[0.3, 0.2]]);
        let s = CandidateSubset::new(vec![vec![0, 1], vec![3], vec![0, 1]], &c).unwrap();
        assert_eq!(best_of_subset(&s, &c).indices, vec![0, 3, 0]);
    }

    #[test]
    fn second_best_two_joint_example() {
        let c = set(&[&[0.9, 0.5], &[0.8, 0.7]]);
        let (second, switch) = second_best_of_subset(&CandidateSubset::full(&c), &c).unwrap();
        assert_eq!(switch.joint, 1);
        assert_eq!(second.indices, vec![0, 1]);
        assert!((second.score - 1.6).abs() < 1e-12);
        let brute = brute_sorted(&c, &CandidateSubset::full(&c));
        assert_eq!(brute[1].indices, second.indices);
    }

    #[test]
    fn singleton_subset_has_no_second_best() {
        let c = set(&[&[0.9], &[0.8]]);
        assert!(second_best_of_subset(&CandidateSubset::full(&c), &c).is_none());
    }

    #[test]
    fn division_partitions_parent() {
        let c = set(&[&[0.9, 0.5], &[0.8, 0.7]]);
        let parent = CandidateSubset::full(&c);
        let (a, b) = divide_subset(&parent, 1, 0, 1).unwrap();
        assert_eq!(a.cardinality(), 2);
        assert_eq!(b.cardinality(), 2);
        for e in enumerate(&parent) {
            assert!(a.contains(&e) ^ b.contains(&e));
        }
        let (second, _) = second_best_of_subset(&parent, &c).unwrap();
        assert_eq!(best_of_subset(&a, &c), second);
        assert_eq!(best_of_subset(&b, &c), best_of_subset(&parent, &c));
    }

    #[test]
    fn divide_rejects_disallowed_index() {
        let c = set(&[&[0.9, 0.5], &[0.8, 0.7]]);
        let s = CandidateSubset::new(vec![vec![0, 1], vec![0]], &c).unwrap();
        assert!(divide_subset(&s, 1, 0, 1).is_err());
        assert!(divide_subset(&s, 0, 0, 0).is_err());
    }

    #[test]
    fn three_best_of_two_joint_example() {
        let c = set(&[&[0.9, 0.5], &[0.8, 0.7]]);
        let scores: Vec<f64> = n_best_poses(&c, 3)
            .unwrap()
            .iter()
            .map(|p| p.score)
            .collect();
        assert_eq!(scores.len(), 3);
        for (s, e) in scores.iter().zip([1.7, 1.6, 1.3]) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn exhausts_small_product() {
        let c = set(&[&[0.9, 0.5], &[0.8]]);
        assert_eq!(n_best_poses(&c, 10).unwrap().len(), 2);
        assert!(n_best_poses(&c, 0).is_err());
    }

    #[test]
    fn ties_follow_lowest_joint_rule() {
        // Both joints drop by 0.25; the lower joint is switched first.
        let c = set(&[&[1.0, 0.75], &[0.5, 0.25]]);
        let out = n_best_poses(&c, 4).unwrap();
        let idx: Vec<Vec<usize>> = out.iter().map(|p| p.indices.clone()).collect();
        assert_eq!(idx, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
    }

    fn random_set(values: Vec<Vec<f64>>) -> JointCandidateSet {
        let sorted = values
            .into_iter()
            .map(|mut v| {
                v.sort_by(|a, b| b.total_cmp(a));
                v
            })
            .collect::<Vec<_>>();
        JointCandidateSet::from_values(&sorted).unwrap()
    }

    fn values_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.0f64..10.0, 1..=5), 1..=4)
    }

    proptest! {
        #[test]
        fn matches_brute_force(values in values_strategy(), n in 1usize..=10) {
            let c = random_set(values);
            let got = n_best_poses(&c, n).unwrap();
            let expected = brute_sorted(&c, &CandidateSubset::full(&c));
            prop_assert_eq!(got.len(), n.min(expected.len()));
            for (g, e) in got.iter().zip(&expected) {
                prop_assert!((g.score - e.score).abs() <= 1e-12);
                prop_assert_eq!(&g.indices, &e.indices);
            }
        }

        #[test]
        fn partition_is_conserved(values in values_strategy(), n in 1usize..=20) {
            let c = random_set(values);
            let total = c.product_size();
            let mut it = NBestIter::new(&c);
            let mut seen = std::collections::BTreeSet::new();
            let mut last = f64::INFINITY;
            for _ in 0..n {
                let Some(p) = it.next() else { break };
                prop_assert!(p.score <= last);
                last = p.score;
                prop_assert!(seen.insert(p.indices.clone()));
                prop_assert_eq!(it.remaining() + it.emitted() as u128, total);
                for (subset, best) in it.live_subsets() {
                    prop_assert!(subset.contains(best));
                    prop_assert!(seen.contains(best));
                }
            }
        }

        #[test]
        fn second_best_matches_brute_force(values in values_strategy(), seed in 0u64..1000) {
            let c = random_set(values);
            // Derive a random constrained subset.
            let mut state = seed;
            let allowed: Vec<Vec<usize>> = c.joints.iter().map(|m| {
                let mut l: Vec<usize> = (0..m.len()).filter(|_| { state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); state >> 63 == 1 }).collect();
                if l.is_empty() { l.push(m.len() - 1); }
                l
            }).collect();
            let subset = CandidateSubset::new(allowed, &c).unwrap();
            let brute = brute_sorted(&c, &subset);
            prop_assert_eq!(best_of_subset(&subset, &c).indices, brute[0].indices.clone());
            match second_best_of_subset(&subset, &c) {
                None => prop_assert_eq!(brute.len(), 1),
                Some((second, _)) => {
                    prop_assert!((second.score - brute[1].score).abs() <= 1e-12);
                    prop_assert_eq!(second.indices, brute[1].indices.clone());
                }
            }
        }
    }
}
