//! Randomized k-d trees over cluster centroids.
//!
//! Each query patch needs a handful of plausible clusters to start its
//! search from. A single k-d tree answers that far too coarsely near the
//! leaf boundaries, so we build several trees that differ in their split
//! choices: every internal node picks its split dimension uniformly from
//! the five highest-variance dimensions of the centroids it covers. The
//! union of one leaf per tree gives a well-spread seed set at negligible
//! lookup cost.

use crate::error::{Error, Result};
use crate::kmeans::ClusterModel;
use crate::seed::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Seed-derivation stream label for per-tree generators.
const TREE_STREAM: u64 = 0x6b64_7472_6565;

/// How many of the highest-variance dimensions are eligible at each split.
const SPLIT_CANDIDATES: usize = 5;

/// One node of a k-d tree, stored in preorder (children after parents).
#[derive(Debug, Clone, PartialEq)]
pub enum KdNode {
    Split {
        dim: u32,
        threshold: f32,
        left: u32,
        right: u32,
    },
    Leaf {
        indices: Vec<u32>,
    },
}

/// A single randomized k-d tree; root at node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    nodes: Vec<KdNode>,
}

impl KdTree {
    /// Wraps a node array read back from storage; structural validation
    /// happens in [`KdForest::from_parts`].
    pub fn from_nodes(nodes: Vec<KdNode>) -> Self {
        KdTree { nodes }
    }

    pub fn nodes(&self) -> &[KdNode] {
        &self.nodes
    }
}

/// A forest of randomized k-d trees over one set of centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct KdForest {
    dim: usize,
    leaf_capacity: usize,
    trees: Vec<KdTree>,
}

impl KdForest {
    /// Reassembles a forest from stored trees, checking structural sanity:
    /// node arrays non-empty, split dimensions in range, child links
    /// pointing forward (so walks terminate), and leaf sets non-empty.
    pub fn from_parts(dim: usize, leaf_capacity: usize, trees: Vec<KdTree>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if leaf_capacity == 0 {
            return Err(Error::invalid("leaf_capacity", "must be positive"));
        }
        if trees.is_empty() {
            return Err(Error::EmptyInput("forest has no trees".into()));
        }
        for (t, tree) in trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(Error::EmptyInput(format!("tree {t} has no nodes")));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    KdNode::Split {
                        dim: split_dim,
                        threshold,
                        left,
                        right,
                    } => {
                        let n = tree.nodes.len();
                        if *split_dim as usize >= dim {
                            return Err(Error::invalid(
                                "split dim",
                                format!("tree {t} node {i}: dimension {split_dim} out of range"),
                            ));
                        }
                        if !threshold.is_finite() {
                            return Err(Error::invalid(
                                "threshold",
                                format!("tree {t} node {i}: non-finite threshold"),
                            ));
                        }
                        for child in [*left, *right] {
                            if child as usize <= i || child as usize >= n {
                                return Err(Error::invalid(
                                    "child link",
                                    format!("tree {t} node {i}: child {child} not forward"),
                                ));
                            }
                        }
                    }
                    KdNode::Leaf { indices } => {
                        if indices.is_empty() {
                            return Err(Error::EmptyInput(format!(
                                "tree {t} node {i} is an empty leaf"
                            )));
                        }
                    }
                }
            }
        }
        Ok(KdForest {
            dim,
            leaf_capacity,
            trees,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[KdTree] {
        &self.trees
    }

    /// Walks one tree with the query and returns the leaf's cluster
    /// indices. Descends left when the coordinate is <= the threshold.
    pub fn lookup(&self, tree: usize, query: &[f64]) -> Result<&[u32]> {
        let t = self
            .trees
            .get(tree)
            .ok_or_else(|| Error::invalid("tree", format!("index {tree} out of range")))?;
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "kd lookup query",
                left: query.len(),
                right: self.dim,
            });
        }
        let mut at = 0usize;
        loop {
            match &t.nodes[at] {
                KdNode::Leaf { indices } => return Ok(indices),
                KdNode::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => {
                    at = if query[*dim as usize] <= f64::from(*threshold) {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// Builds `tree_count` randomized trees over the model's centroids, each
/// splitting until no leaf exceeds `leaf_capacity` (a set of identical
/// centroids cannot be split and stays as an oversized leaf). Trees are
/// independent and seeded individually, so the build is deterministic for
/// any worker count.
pub fn build_kd_forest(
    model: &ClusterModel,
    tree_count: usize,
    leaf_capacity: usize,
    seed: u64,
) -> Result<KdForest> {
    if tree_count == 0 {
        return Err(Error::invalid("tree_count", "must be positive"));
    }
    if leaf_capacity == 0 {
        return Err(Error::invalid("leaf_capacity", "must be positive"));
    }
    let trees: Vec<KdTree> = (0..tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TREE_STREAM, t as u64));
            let all: Vec<u32> = (0..model.n_clusters() as u32).collect();
            let mut nodes = Vec::new();
            build_subtree(model, leaf_capacity, all, &mut rng, &mut nodes);
            KdTree { nodes }
        })
        .collect();
    KdForest::from_parts(model.dim(), leaf_capacity, trees)
}

fn build_subtree(
    model: &ClusterModel,
    leaf_capacity: usize,
    indices: Vec<u32>,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<KdNode>,
) -> u32 {
    let node_id = nodes.len() as u32;
    if indices.len() <= leaf_capacity {
        nodes.push(KdNode::Leaf { indices });
        return node_id;
    }

    let d = model.dim();
    // Per-dimension variance of the covered centroids, two-pass for
    // stability.
    let mut means = vec![0.0f64; d];
    for &i in &indices {
        for (m, &v) in means.iter_mut().zip(model.centroid(i as usize)) {
            *m += f64::from(v);
        }
    }
    let inv = 1.0 / indices.len() as f64;
    means.iter_mut().for_each(|m| *m *= inv);
    let mut vars = vec![0.0f64; d];
    for &i in &indices {
        for ((s, &v), &m) in vars.iter_mut().zip(model.centroid(i as usize)).zip(&means) {
            let diff = f64::from(v) - m;
            *s += diff * diff;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vars[b].total_cmp(&vars[a]).then(a.cmp(&b)));
    let candidates: Vec<usize> = order
        .into_iter()
        .filter(|&dim| vars[dim] > 0.0)
        .take(SPLIT_CANDIDATES)
        .collect();
    if candidates.is_empty() {
        // All covered centroids are identical: nothing to split on.
        nodes.push(KdNode::Leaf { indices });
        return node_id;
    }
    let split_dim = candidates[rng.gen_range(0..candidates.len())];

    let mut vals: Vec<f32> = indices
        .iter()
        .map(|&i| model.centroid(i as usize)[split_dim])
        .collect();
    vals.sort_unstable_by(f32::total_cmp);
    let mut threshold = vals[(vals.len() - 1) / 2];
    let max = *vals.last().expect("non-empty by leaf check");
    if threshold == max {
        // A majority of duplicates pushed the median to the maximum, which
        // would send everything left; back off to the next value down.
        let first_max = vals.partition_point(|&v| v < max);
        threshold = vals[first_max - 1];
    }

    let (left_set, right_set): (Vec<u32>, Vec<u32>) = indices
        .iter()
        .partition(|&&i| model.centroid(i as usize)[split_dim] <= threshold);
    debug_assert!(!left_set.is_empty() && !right_set.is_empty());

    nodes.push(KdNode::Split {
        dim: split_dim as u32,
        threshold,
        left: 0,
        right: 0,
    });
    let left_id = build_subtree(model, leaf_capacity, left_set, rng, nodes);
    let right_id = build_subtree(model, leaf_capacity, right_set, rng, nodes);
    match &mut nodes[node_id as usize] {
        KdNode::Split { left, right, .. } => {
            *left = left_id;
            *right = right_id;
        }
        KdNode::Leaf { .. } => unreachable!("placeholder was a split"),
    }
    node_id
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_from_rows(side: usize, rows: &[Vec<f32>]) -> ClusterModel {
        let centroids: Vec<f32> = rows.iter().flatten().copied().collect();
        ClusterModel::new(side, centroids, vec![1; rows.len()]).unwrap()
    }

    fn random_model(side: usize, n: usize, seed: u64) -> ClusterModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..side * side).map(|_| rng.gen_range(0.0..2.0f32)).collect())
            .collect();
        model_from_rows(side, &rows)
    }

    fn leaf_sets(tree: &KdTree) -> Vec<&[u32]> {
        tree.nodes()
            .iter()
            .filter_map(|n| match n {
                KdNode::Leaf { indices } => Some(indices.as_slice()),
                KdNode::Split { .. } => None,
            })
            .collect()
    }

    #[test]
    fn leaves_partition_the_clusters_in_every_tree() {
        let model = random_model(3, 300, 5);
        let forest = build_kd_forest(&model, 6, 8, 42).unwrap();
        for tree in forest.trees() {
            let mut seen = vec![false; 300];
            for leaf in leaf_sets(tree) {
                assert!(leaf.len() <= 8);
                for &i in leaf {
                    assert!(!seen[i as usize], "cluster {i} in two leaves");
                    seen[i as usize] = true;
                }
            }
            assert!(seen.iter().all(|&s| s), "some cluster in no leaf");
        }
    }

    #[test]
    fn lookup_lands_in_a_leaf_containing_plausible_neighbors() {
        let model = random_model(2, 200, 9);
        let forest = build_kd_forest(&model, 4, 8, 7).unwrap();
        // Querying with an exact centroid must reach a leaf holding it:
        // the walk retraces the partition that placed it.
        for probe in [0usize, 57, 199] {
            let query: Vec<f64> = model.centroid(probe).iter().map(|&v| f64::from(v)).collect();
            for t in 0..forest.tree_count() {
                let leaf = forest.lookup(t, &query).unwrap();
                assert!(
                    leaf.contains(&(probe as u32)),
                    "tree {t} leaf misses centroid {probe}"
                );
            }
        }
    }

    #[test]
    fn median_split_balances_a_small_line() {
        // One varying dimension with values 0,1,2,3: the lower median is 1,
        // so the root sends {0,1} left and {2,3} right.
        let rows: Vec<Vec<f32>> = (0..4).map(|i| vec![i as f32]).collect();
        let model = model_from_rows(1, &rows);
        let forest = build_kd_forest(&model, 1, 2, 0).unwrap();
        let tree = &forest.trees()[0];
        match &tree.nodes()[0] {
            KdNode::Split { dim, threshold, left, right } => {
                assert_eq!(*dim, 0);
                assert_eq!(*threshold, 1.0);
                let l = &tree.nodes()[*left as usize];
                let r = &tree.nodes()[*right as usize];
                assert_eq!(l, &KdNode::Leaf { indices: vec![0, 1] });
                assert_eq!(r, &KdNode::Leaf { indices: vec![2, 3] });
            }
            other => panic!("root should split, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_heavy_split_backs_off_the_threshold() {
        // Values 2,5,5,5: the lower median equals the max, so the split
        // point drops to 2 and only the singleton goes left.
        let rows = vec![vec![5.0f32], vec![5.0], vec![5.0], vec![2.0]];
        let model = model_from_rows(1, &rows);
        let forest = build_kd_forest(&model, 1, 2, 0).unwrap();
        let tree = &forest.trees()[0];
        match &tree.nodes()[0] {
            KdNode::Split { threshold, left, right, .. } => {
                assert_eq!(*threshold, 2.0);
                assert_eq!(
                    &tree.nodes()[*left as usize],
                    &KdNode::Leaf { indices: vec![3] }
                );
                // The identical remainder cannot split further and stays an
                // oversized leaf.
                assert_eq!(
                    &tree.nodes()[*right as usize],
                    &KdNode::Leaf { indices: vec![0, 1, 2] }
                );
            }
            other => panic!("root should split, got {other:?}"),
        }
    }

    #[test]
    fn identical_centroids_collapse_to_one_leaf() {
        let rows = vec![vec![1.0f32, 2.0, 3.0, 4.0]; 10];
        let model = model_from_rows(2, &rows);
        let forest = build_kd_forest(&model, 3, 4, 1).unwrap();
        for tree in forest.trees() {
            assert_eq!(tree.nodes().len(), 1);
            assert_eq!(leaf_sets(tree)[0].len(), 10);
        }
    }

    #[test]
    fn split_dimensions_come_from_the_top_variance_set() {
        // Dimensions 0..3 vary strongly, the rest are constant; every
        // split in every tree must use one of the varying dimensions.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f32>> = (0..100)
            .map(|_| {
                let mut v = vec![0.5f32; 9];
                for slot in v.iter_mut().take(3) {
                    *slot = rng.gen_range(0.0..4.0);
                }
                v
            })
            .collect();
        let model = model_from_rows(3, &rows);
        let forest = build_kd_forest(&model, 8, 4, 11).unwrap();
        for tree in forest.trees() {
            for node in tree.nodes() {
                if let KdNode::Split { dim, .. } = node {
                    assert!(*dim < 3, "split on constant dimension {dim}");
                }
            }
        }
    }

    #[test]
    fn trees_differ_and_builds_are_deterministic() {
        let model = random_model(3, 400, 8);
        let a = build_kd_forest(&model, 8, 8, 123).unwrap();
        let b = build_kd_forest(&model, 8, 8, 123).unwrap();
        assert_eq!(a, b);
        let c = build_kd_forest(&model, 8, 8, 124).unwrap();
        assert_ne!(a, c);
        // Randomized split choices should make at least two trees differ.
        let distinct = a
            .trees()
            .iter()
            .any(|t| t.nodes() != a.trees()[0].nodes());
        assert!(distinct, "all trees identical");
    }

    #[test]
    fn rejects_bad_parameters_and_bad_structures() {
        let model = random_model(2, 10, 0);
        assert!(build_kd_forest(&model, 0, 4, 0).is_err());
        assert!(build_kd_forest(&model, 2, 0, 0).is_err());
        // A backward child link must be caught.
        let bad = KdTree {
            nodes: vec![KdNode::Split {
                dim: 0,
                threshold: 0.5,
                left: 0,
                right: 0,
            }],
        };
        assert!(KdForest::from_parts(4, 2, vec![bad]).is_err());
        assert!(KdForest::from_parts(4, 2, vec![]).is_err());
    }

    #[test]
    fn lookup_validates_its_arguments() {
        let model = random_model(2, 20, 1);
        let forest = build_kd_forest(&model, 2, 4, 2).unwrap();
        assert!(forest.lookup(5, &[0.0; 4]).is_err());
        assert!(forest.lookup(0, &[0.0; 3]).is_err());
    }
}
