//! Clustering the corpus into a compact prior.
//!
//! A corpus of millions of patches is too large to weigh per query, so it
//! is summarized by k-means: each cluster contributes its centroid as a
//! candidate explanation and its population as the prior weight. Lloyd's
//! algorithm runs in f64 with k-means++ seeding; the stored model narrows
//! centroids to f32, which is plenty for likelihood work and halves the
//! index size.

use crate::corpus::PatchCorpus;
use crate::error::{Error, Result};
use crate::vecmath::{compensated_sum, dist2, dot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Patches per parallel work unit in the assignment pass. Fixed so chunk
/// boundaries (and thus float results) never depend on the worker count.
const ASSIGN_CHUNK: usize = 256;

/// Centroids per inner block; keeps the streamed block cache-resident.
const CENTROID_BLOCK: usize = 256;

/// Elements per parallel work unit in the seeding distance relaxation.
const RELAX_CHUNK: usize = 4096;

/// Fraction of changed assignments (as a ratio denominator) below which
/// Lloyd's iteration is considered converged: fewer than 1 in 1000.
const STALL_DENOMINATOR: usize = 1000;

/// A clustered summary of a normalized patch corpus: per-cluster centroid
/// patches and member counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    side: usize,
    centroids: Vec<f32>,
    counts: Vec<u64>,
}

impl ClusterModel {
    /// Validates shape and content: at least one cluster, every count
    /// positive, centroid data finite and nonnegative.
    pub fn new(side: usize, centroids: Vec<f32>, counts: Vec<u64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("patch side", "must be positive"));
        }
        if counts.is_empty() {
            return Err(Error::EmptyInput("cluster model has no clusters".into()));
        }
        if centroids.len() != counts.len() * side * side {
            return Err(Error::DimensionMismatch {
                context: "centroid data length",
                left: centroids.len(),
                right: counts.len() * side * side,
            });
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::EmptyInput("cluster with zero members".into()));
        }
        if let Some(v) = centroids.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!(
                "centroid value {v} is negative or not finite"
            )));
        }
        Ok(ClusterModel {
            side,
            centroids,
            counts,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn n_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn centroids_flat(&self) -> &[f32] {
        &self.centroids
    }

    pub fn centroid(&self, cluster: usize) -> &[f32] {
        let d = self.dim();
        &self.centroids[cluster * d..(cluster + 1) * d]
    }
}

/// Clustering output with the diagnostics tests and tools care about.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub model: ClusterModel,
    /// Cluster of each corpus patch, consistent with the returned centroids:
    /// each patch sits in a cluster at minimal distance (ties to the lower
    /// index).
    pub assignments: Vec<u32>,
    /// Within-cluster sum of squares after every assignment pass.
    pub wcss_history: Vec<f64>,
}

/// K-means with the model as the only output.
pub fn kmeans_cluster(
    corpus: &PatchCorpus,
    n_clusters: usize,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterModel> {
    Ok(kmeans_cluster_detailed(corpus, n_clusters, max_iters, seed)?.model)
}

/// K-means keeping assignments and the WCSS trace.
///
/// Runs k-means++ seeding, then Lloyd's iteration until `max_iters` update
/// steps have run or fewer than 0.1% of assignments change, and finishes
/// with an assignment pass against the final centroids so the returned
/// assignments, counts, and centroids agree. Emptied clusters are reseeded
/// at the patch farthest from its centroid (taken from a cluster that can
/// spare one). Fully deterministic in (corpus, parameters, seed).
pub fn kmeans_cluster_detailed(
    corpus: &PatchCorpus,
    n_clusters: usize,
    max_iters: usize,
    seed: u64,
) -> Result<KmeansResult> {
    let n = corpus.len();
    let d = corpus.dim();
    if n == 0 {
        return Err(Error::EmptyInput("cannot cluster an empty corpus".into()));
    }
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::invalid(
            "n_clusters",
            format!("must be in 1..={n} (corpus size), got {n_clusters}"),
        ));
    }

    let data: Vec<f64> = corpus
        .patches()
        .iter()
        .flat_map(|p| p.values().iter().copied())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(&data, n, d, n_clusters, &mut rng);

    let mut assignments: Vec<u32> = Vec::new();
    let mut wcss_history = Vec::new();
    let mut updates_done = 0usize;
    let (final_counts, final_dists) = loop {
        let (new_assignments, mut dists) = assign_pass(&data, &centroids, n, d);
        let changed = if assignments.is_empty() {
            n
        } else {
            assignments
                .iter()
                .zip(&new_assignments)
                .filter(|(a, b)| a != b)
                .count()
        };
        let first_pass = assignments.is_empty();
        assignments = new_assignments;
        wcss_history.push(compensated_sum(dists.iter().copied()));

        let mut counts = vec![0u64; n_clusters];
        for &a in &assignments {
            counts[a as usize] += 1;
        }

        let stalled = !first_pass && changed * STALL_DENOMINATOR < n;
        if stalled || updates_done == max_iters {
            // The centroids used for this pass are the ones we return, so
            // assignments and counts already match them.
            break (counts, dists);
        }

        update_pass(&data, &assignments, n_clusters, d, &mut centroids, &mut counts);
        repair_empty_clusters(
            &data,
            d,
            &mut centroids,
            &mut counts,
            &mut assignments,
            &mut dists,
        );
        updates_done += 1;
    };

    let mut counts = final_counts;
    let mut dists = final_dists;
    // A cluster can come out of the last pass empty only when duplicate
    // centroids tied for its members; reseed so every count is positive.
    repair_empty_clusters(
        &data,
        d,
        &mut centroids,
        &mut counts,
        &mut assignments,
        &mut dists,
    );

    let model = ClusterModel::new(
        corpus.side(),
        centroids.iter().map(|&v| v as f32).collect(),
        counts,
    )?;
    Ok(KmeansResult {
        model,
        assignments,
        wcss_history,
    })
}

/// K-means++: each new center is drawn with probability proportional to the
/// squared distance to the nearest already-chosen center.
fn seed_plus_plus(
    data: &[f64],
    n: usize,
    d: usize,
    n_clusters: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let mut centroids = Vec::with_capacity(n_clusters * d);
    let mut chosen = vec![false; n];

    let first = rng.gen_range(0..n);
    chosen[first] = true;
    centroids.extend_from_slice(row(first));

    let mut dists: Vec<f64> = vec![0.0; n];
    let mut total = relax_distances(data, d, row(first), &mut dists, true);

    for _ in 1..n_clusters {
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in dists.iter().enumerate() {
                acc += w;
                if target < acc {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the walk a hair short of the total; fall
            // back to the last point carrying any mass.
            pick.unwrap_or_else(|| {
                dists
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("positive total implies a positive entry")
            })
        } else {
            // Fewer distinct patches than clusters: every remaining patch
            // coincides with a center. Take the lowest-index free slot.
            chosen
                .iter()
                .position(|&c| !c)
                .expect("n_clusters <= n leaves an unchosen patch")
        };
        chosen[next] = true;
        centroids.extend_from_slice(row(next));
        total = relax_distances(data, d, row(next), &mut dists, false);
    }
    centroids
}

/// Lowers each point's nearest-center distance given a new center and
/// returns the updated total mass. Chunked in fixed sizes so the sum is
/// identical for every worker count.
fn relax_distances(data: &[f64], d: usize, center: &[f64], dists: &mut [f64], init: bool) -> f64 {
    let chunk_sums: Vec<f64> = dists
        .par_chunks_mut(RELAX_CHUNK)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let base = chunk_idx * RELAX_CHUNK;
            let mut sum = 0.0;
            for (off, slot) in chunk.iter_mut().enumerate() {
                let i = base + off;
                let nd = dist2(&data[i * d..(i + 1) * d], center);
                if init || nd < *slot {
                    *slot = nd;
                }
                sum += *slot;
            }
            sum
        })
        .collect();
    compensated_sum(chunk_sums)
}

/// Assigns every patch to its nearest centroid (ties to the lower index)
/// and returns the squared distance actually achieved.
fn assign_pass(data: &[f64], centroids: &[f64], n: usize, d: usize) -> (Vec<u32>, Vec<f64>) {
    let n_clusters = centroids.len() / d;
    // Argmin over ||p - c||^2 = argmin over ||c||^2 - 2 p.c; precomputing
    // the centroid norms turns the scan into plain dot products.
    let cnorms: Vec<f64> = (0..n_clusters)
        .map(|j| {
            let c = &centroids[j * d..(j + 1) * d];
            dot(c, c)
        })
        .collect();

    let per_chunk: Vec<(Vec<u32>, Vec<f64>)> = data
        .par_chunks(ASSIGN_CHUNK * d)
        .map(|chunk| {
            let rows = chunk.len() / d;
            let mut best = vec![u32::MAX; rows];
            let mut best_score = vec![f64::INFINITY; rows];
            // Centroid-blocked sweep: each block stays hot in cache while
            // every patch of the chunk scans it.
            for block_start in (0..n_clusters).step_by(CENTROID_BLOCK) {
                let block_end = (block_start + CENTROID_BLOCK).min(n_clusters);
                for (r, p) in chunk.chunks_exact(d).enumerate() {
                    let mut b = best[r];
                    let mut bs = best_score[r];
                    for j in block_start..block_end {
                        let c = &centroids[j * d..(j + 1) * d];
                        let score = cnorms[j] - 2.0 * dot(p, c);
                        if score < bs {
                            bs = score;
                            b = j as u32;
                        }
                    }
                    best[r] = b;
                    best_score[r] = bs;
                }
            }
            let dists = chunk
                .chunks_exact(d)
                .zip(&best)
                .map(|(p, &j)| dist2(p, &centroids[j as usize * d..(j as usize + 1) * d]))
                .collect();
            (best, dists)
        })
        .collect();

    let mut assignments = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    for (a, w) in per_chunk {
        assignments.extend(a);
        dists.extend(w);
    }
    (assignments, dists)
}

/// Moves each centroid to the mean of its members.
fn update_pass(
    data: &[f64],
    assignments: &[u32],
    n_clusters: usize,
    d: usize,
    centroids: &mut [f64],
    counts: &mut [u64],
) {
    let mut sums = vec![0.0f64; n_clusters * d];
    counts.iter_mut().for_each(|c| *c = 0);
    for (i, &a) in assignments.iter().enumerate() {
        let j = a as usize;
        counts[j] += 1;
        let p = &data[i * d..(i + 1) * d];
        let s = &mut sums[j * d..(j + 1) * d];
        for (slot, &v) in s.iter_mut().zip(p) {
            *slot += v;
        }
    }
    for j in 0..n_clusters {
        if counts[j] == 0 {
            continue; // handled by the repair step
        }
        let inv = 1.0 / counts[j] as f64;
        for (slot, &s) in centroids[j * d..(j + 1) * d]
            .iter_mut()
            .zip(&sums[j * d..(j + 1) * d])
        {
            *slot = s * inv;
        }
    }
}

/// Reseeds every empty cluster at the patch currently farthest from its
/// centroid, drawn from a cluster with at least two members, and moves that
/// patch over. Distances are zeroed for moved patches so successive repairs
/// pick distinct patches.
fn repair_empty_clusters(
    data: &[f64],
    d: usize,
    centroids: &mut [f64],
    counts: &mut [u64],
    assignments: &mut [u32],
    dists: &mut [f64],
) {
    loop {
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut farthest = None;
        let mut far_dist = -1.0;
        for (i, &w) in dists.iter().enumerate() {
            if w > far_dist && counts[assignments[i] as usize] >= 2 {
                far_dist = w;
                farthest = Some(i);
            }
        }
        let Some(i) = farthest else {
            // Every remaining cluster is a singleton; nothing can donate.
            return;
        };
        let donor = assignments[i] as usize;
        centroids[empty * d..(empty + 1) * d].copy_from_slice(&data[i * d..(i + 1) * d]);
        assignments[i] = empty as u32;
        counts[donor] -= 1;
        counts[empty] = 1;
        dists[i] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IntensityImage;
    use crate::corpus::ingest_corpus;
    use crate::patch::Patch;

    fn corpus_from_values(side: usize, rows: &[Vec<f64>]) -> PatchCorpus {
        // Build a corpus through the public path: one image per patch.
        let images: Vec<IntensityImage> = rows
            .iter()
            .map(|v| IntensityImage::new(side, side, v.clone()).unwrap())
            .collect();
        ingest_corpus(&images, side, None, 0).unwrap()
    }

    fn random_corpus(side: usize, n: usize, seed: u64) -> PatchCorpus {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..side * side).map(|_| rng.gen_range(0.05..2.0)).collect())
            .collect();
        corpus_from_values(side, &rows)
    }

    #[test]
    fn single_cluster_centroid_is_the_corpus_mean() {
        let corpus = corpus_from_values(
            2,
            &[
                vec![1.0, 2.0, 3.0, 4.0],
                vec![3.0, 4.0, 5.0, 6.0],
                vec![5.0, 6.0, 7.0, 8.0],
            ],
        );
        let result = kmeans_cluster_detailed(&corpus, 1, 10, 0).unwrap();
        assert_eq!(result.model.centroid(0), &[3.0f32, 4.0, 5.0, 6.0]);
        assert_eq!(result.model.counts(), &[3]);
        assert_eq!(result.assignments, &[0, 0, 0]);
    }

    #[test]
    fn as_many_clusters_as_patches_reproduces_the_patches() {
        // Values chosen exactly representable in f32 so the narrowed
        // centroids equal the patches bit for bit.
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..4).map(|j| (i * 4 + j) as f64 * 0.25 + 0.5).collect())
            .collect();
        let corpus = corpus_from_values(2, &rows);
        let result = kmeans_cluster_detailed(&corpus, 5, 20, 3).unwrap();
        assert_eq!(result.model.counts(), &[1, 1, 1, 1, 1]);
        // Each patch must appear exactly once among the centroids.
        for p in corpus.patches() {
            let expect: Vec<f32> = p.values().iter().map(|&v| v as f32).collect();
            let hits = (0..5)
                .filter(|&j| result.model.centroid(j) == expect.as_slice())
                .count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn wcss_never_increases() {
        let corpus = random_corpus(3, 400, 11);
        let result = kmeans_cluster_detailed(&corpus, 12, 30, 5).unwrap();
        assert!(result.wcss_history.len() >= 2);
        for pair in result.wcss_history.windows(2) {
            assert!(
                pair[1] <= pair[0] * (1.0 + 1e-12),
                "wcss went up: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn counts_sum_to_corpus_size_and_are_positive() {
        let corpus = random_corpus(3, 257, 2);
        let result = kmeans_cluster_detailed(&corpus, 17, 25, 9).unwrap();
        assert_eq!(result.model.counts().iter().sum::<u64>(), 257);
        assert!(result.model.counts().iter().all(|&c| c >= 1));
        assert_eq!(result.assignments.len(), 257);
    }

    #[test]
    fn assignments_are_nearest_with_ties_to_lower_index() {
        let corpus = random_corpus(2, 300, 4);
        let result = kmeans_cluster_detailed(&corpus, 10, 25, 1).unwrap();
        let model = &result.model;
        for (i, p) in corpus.patches().iter().enumerate() {
            let assigned = result.assignments[i] as usize;
            let d_assigned = centroid_dist2(p, model, assigned);
            for j in 0..model.n_clusters() {
                let dj = centroid_dist2(p, model, j);
                // The assignment ran in f64; comparing against the f32
                // model leaves room at the last few bits.
                let slack = 1e-6 * (1.0 + dj);
                assert!(
                    d_assigned <= dj + slack,
                    "patch {i}: assigned {assigned} at {d_assigned}, cluster {j} at {dj}"
                );
            }
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let corpus = random_corpus(3, 500, 21);
        let a = kmeans_cluster_detailed(&corpus, 20, 15, 77).unwrap();
        let b = kmeans_cluster_detailed(&corpus, 20, 15, 77).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.assignments, b.assignments);
        let bits = |h: &[f64]| h.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.wcss_history), bits(&b.wcss_history));
        let c = kmeans_cluster_detailed(&corpus, 20, 15, 78).unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn duplicate_patches_with_max_clusters_still_fill_every_cluster() {
        let rows = vec![vec![1.0, 1.0, 1.0, 1.0]; 4];
        let corpus = corpus_from_values(2, &rows);
        let result = kmeans_cluster_detailed(&corpus, 4, 10, 0).unwrap();
        assert_eq!(result.model.counts(), &[1, 1, 1, 1]);
    }

    #[test]
    fn rejects_bad_cluster_counts() {
        let corpus = random_corpus(2, 10, 0);
        assert!(kmeans_cluster(&corpus, 0, 5, 0).is_err());
        assert!(kmeans_cluster(&corpus, 11, 5, 0).is_err());
    }

    #[test]
    fn model_validation_catches_corruption() {
        assert!(ClusterModel::new(2, vec![0.5; 8], vec![3, 0]).is_err());
        assert!(ClusterModel::new(2, vec![0.5; 7], vec![3, 1]).is_err());
        assert!(ClusterModel::new(2, vec![-0.5; 8], vec![3, 1]).is_err());
        assert!(ClusterModel::new(2, vec![], vec![]).is_err());
    }

    fn centroid_dist2(p: &Patch, model: &ClusterModel, j: usize) -> f64 {
        p.values()
            .iter()
            .zip(model.centroid(j))
            .map(|(&a, &b)| {
                let diff = a - f64::from(b);
                diff * diff
            })
            .sum()
    }
}
