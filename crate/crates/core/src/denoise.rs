//! Per-patch MMSE denoising.
//!
//! For a noisy count patch `y` the estimate is a weighted average of the
//! candidate intensities `mean(y) * centroid_j`, each weighted by its
//! cluster population times the Poisson likelihood of `y` under it. Summing
//! over every cluster is exact but linear in the model size, so the default
//! path explores instead: the k-d forest seeds a few plausible clusters,
//! a priority queue repeatedly expands the K-NN graph neighborhood of the
//! most likely cluster found so far, and the loop stops once the total
//! weight has stabilized. Weights spanning hundreds of orders of magnitude
//! are handled by accumulating relative to a running log-scale.

use crate::error::{Error, Result};
use crate::index::DenoiseIndex;
use crate::kmeans::ClusterModel;
use crate::patch::{CountPatch, Patch};
use crate::poisson::{ln_factorial, patch_log_likelihood};
use std::collections::{BinaryHeap, VecDeque};

/// Search knobs for [`denoise_patch`].
#[derive(Debug, Clone)]
pub struct DenoiseParams {
    /// Number of queue pops over which the total weight must stabilize.
    pub convergence_window: usize,
    /// Relative weight-change threshold; 0 disables early termination.
    pub epsilon: f64,
    /// Process every cluster, bypassing search and early termination.
    pub exhaustive: bool,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        DenoiseParams {
            convergence_window: 10,
            epsilon: 1e-12,
            exhaustive: false,
        }
    }
}

impl DenoiseParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.convergence_window == 0 {
            return Err(Error::invalid("convergence_window", "must be positive"));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::invalid(
                "epsilon",
                format!("must be nonnegative, got {}", self.epsilon),
            ));
        }
        Ok(())
    }
}

/// A denoised patch plus how the search went.
#[derive(Debug, Clone)]
pub struct PatchEstimate {
    pub patch: Patch,
    /// Clusters whose likelihood was evaluated.
    pub clusters_processed: usize,
    /// Queue pops (graph-expansion rounds) performed.
    pub pops: usize,
    /// True when every processed cluster had zero weight and the estimate
    /// fell back to the raw counts.
    pub fallback: bool,
}

/// Priority-queue entry: highest log-likelihood first, ties to the lower
/// cluster index.
#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    log_likelihood: f64,
    cluster: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.log_likelihood
            .total_cmp(&other.log_likelihood)
            .then_with(|| other.cluster.cmp(&self.cluster))
    }
}

/// Reusable per-query workspace. Queries against indexes of different
/// shapes resize it on the fly; reuse across many patches avoids the
/// per-query allocation and, more importantly, the O(N) clear — visited
/// marks are epoch-stamped instead of reset.
#[derive(Debug, Default)]
pub struct QueryScratch {
    epoch: u64,
    stamps: Vec<u64>,
    heap: BinaryHeap<HeapEntry>,
    history: VecDeque<f64>,
    numer: Vec<f64>,
    nonzero: Vec<(u32, f64)>,
}

impl QueryScratch {
    pub fn new() -> Self {
        Self::default()
    }

    fn begin(&mut self, n_clusters: usize, dim: usize) {
        if self.stamps.len() != n_clusters {
            self.stamps = vec![0; n_clusters];
            self.epoch = 0;
        }
        self.epoch += 1;
        self.heap.clear();
        self.history.clear();
        self.numer.clear();
        self.numer.resize(dim, 0.0);
        self.nonzero.clear();
    }
}

/// Log-scaled accumulator state for the weighted sums. The weighted
/// intensity sums live in the scratch `numer` buffer; both it and `denom`
/// are stored divided by exp(scale) so they stay in a sane float range no
/// matter how negative the log-weights get.
struct Accumulator {
    /// Log of the current scale factor.
    scale: f64,
    /// Total weight, relative to the scale.
    denom: f64,
    /// Queue pops performed so far.
    pops: usize,
    /// Clusters whose likelihood has been evaluated.
    processed: usize,
}

/// Read-only per-query quantities shared by every cluster evaluation.
struct QueryContext<'a> {
    d: usize,
    mu: f64,
    ln_mu: f64,
    y_sum: f64,
    const_term: f64,
    epoch: u64,
    ln_centroids: &'a [f64],
    centroid_sums: &'a [f64],
    ln_counts: &'a [f64],
    centroids: &'a [f32],
    nonzero: &'a [(u32, f64)],
}

impl QueryContext<'_> {
    /// Evaluates one cluster: log-likelihood of y under mu * centroid_j,
    /// assembled from precomputed tables as
    ///   ln_mu * sum(y) + sum_i y_i ln(c_ji) - mu * sum_i c_ji - const.
    /// Pushes the cluster on the queue and folds its weight into the sums.
    /// Clusters already stamped this epoch are skipped.
    fn process(
        &self,
        j: u32,
        stamps: &mut [u64],
        heap: &mut BinaryHeap<HeapEntry>,
        numer: &mut [f64],
        acc: &mut Accumulator,
    ) {
        let stamp = &mut stamps[j as usize];
        if *stamp == self.epoch {
            return;
        }
        *stamp = self.epoch;
        acc.processed += 1;
        let jd = j as usize * self.d;
        let row = &self.ln_centroids[jd..jd + self.d];
        let mut data_term = 0.0;
        for &(i, y) in self.nonzero {
            data_term += y * row[i as usize];
        }
        let log_likelihood = self.ln_mu * self.y_sum + data_term
            - self.mu * self.centroid_sums[j as usize]
            - self.const_term;
        heap.push(HeapEntry {
            log_likelihood,
            cluster: j,
        });
        let lw = log_likelihood + self.ln_counts[j as usize];
        if lw == f64::NEG_INFINITY {
            return;
        }
        let atoms = &self.centroids[jd..jd + self.d];
        if lw <= acc.scale {
            let t = (lw - acc.scale).exp();
            acc.denom += t;
            let tm = t * self.mu;
            for (slot, &c) in numer.iter_mut().zip(atoms) {
                *slot += tm * f64::from(c);
            }
        } else {
            // New dominant weight: rescale everything accumulated so far.
            let r = (acc.scale - lw).exp();
            acc.denom = acc.denom * r + 1.0;
            for (slot, &c) in numer.iter_mut().zip(atoms) {
                *slot = *slot * r + self.mu * f64::from(c);
            }
            acc.scale = lw;
        }
    }
}

/// Denoises one patch, allocating a fresh workspace.
pub fn denoise_patch(
    observed: &CountPatch,
    index: &DenoiseIndex,
    params: &DenoiseParams,
) -> Result<PatchEstimate> {
    let mut scratch = QueryScratch::new();
    denoise_patch_with_scratch(observed, index, params, &mut scratch)
}

/// Denoises one patch using a caller-provided workspace.
pub fn denoise_patch_with_scratch(
    observed: &CountPatch,
    index: &DenoiseIndex,
    params: &DenoiseParams,
    scratch: &mut QueryScratch,
) -> Result<PatchEstimate> {
    params.validate()?;
    let d = index.dim();
    if observed.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "patch vs index dimension",
            left: observed.dim(),
            right: d,
        });
    }
    let side = index.side();
    let n_clusters = index.n_clusters();

    // An all-zero patch carries no scale information; its MMSE estimate
    // under the scaled prior is identically zero.
    if observed.sum() == 0 {
        return Ok(PatchEstimate {
            patch: Patch::new(side, vec![0.0; d])?,
            clusters_processed: 0,
            pops: 0,
            fallback: false,
        });
    }

    scratch.begin(n_clusters, d);
    let mu = observed.mean();
    let y_sum = observed.sum() as f64;
    // Constant part of every log-likelihood: sum of ln(y_i!). Zero counts
    // contribute ln(0!) = 0 and are skipped; they also vanish from the
    // data-dependent sum, which is why the nonzero list is all we carry.
    let mut const_term = 0.0;
    for (i, &y) in observed.values().iter().enumerate() {
        if y > 0 {
            scratch.nonzero.push((i as u32, f64::from(y)));
            const_term += ln_factorial(u64::from(y));
        }
    }
    let query: Vec<f64> = observed.values().iter().map(|&y| f64::from(y) / mu).collect();

    let QueryScratch {
        epoch,
        stamps,
        heap,
        history,
        numer,
        nonzero,
    } = scratch;
    let ctx = QueryContext {
        d,
        mu,
        ln_mu: mu.ln(),
        y_sum,
        const_term,
        epoch: *epoch,
        ln_centroids: index.ln_centroids(),
        centroid_sums: index.centroid_sums(),
        ln_counts: index.ln_counts(),
        centroids: index.model().centroids_flat(),
        nonzero: nonzero.as_slice(),
    };
    let mut acc = Accumulator {
        scale: f64::NEG_INFINITY,
        denom: 0.0,
        pops: 0,
        processed: 0,
    };

    // Seed phase: one leaf per tree, querying with the shape y / mean(y).
    for t in 0..index.forest().tree_count() {
        for &j in index.forest().lookup(t, &query)? {
            ctx.process(j, stamps, heap, numer, &mut acc);
        }
    }

    let window = params.convergence_window;
    let log_weight = |acc: &Accumulator| acc.scale + acc.denom.ln();
    history.push_back(log_weight(&acc));

    // Expansion: pop the most likely cluster, process its graph neighbors,
    // and stop once the window-relative weight change drops under epsilon.
    loop {
        if !params.exhaustive && history.len() == window + 1 {
            let oldest = *history.front().expect("non-empty history");
            let newest = *history.back().expect("non-empty history");
            // w is non-decreasing, so the relative change over the window
            // is 1 - w_old / w_new.
            let relative_change = 1.0 - (oldest - newest).exp();
            if relative_change < params.epsilon {
                break;
            }
        }
        let Some(top) = heap.pop() else {
            break;
        };
        acc.pops += 1;
        for &j in index.graph().neighbors_of(top.cluster as usize) {
            ctx.process(j, stamps, heap, numer, &mut acc);
        }
        history.push_back(log_weight(&acc));
        if history.len() > window + 1 {
            history.pop_front();
        }
    }

    if params.exhaustive {
        for j in 0..n_clusters as u32 {
            ctx.process(j, stamps, heap, numer, &mut acc);
        }
    }

    if acc.denom == 0.0 {
        // Every reachable cluster was impossible under y (all weights
        // zero); return the observation itself rather than inventing data.
        return Ok(PatchEstimate {
            patch: observed.to_patch(),
            clusters_processed: acc.processed,
            pops: acc.pops,
            fallback: true,
        });
    }
    let values: Vec<f64> = numer.iter().map(|&s| s / acc.denom).collect();
    Ok(PatchEstimate {
        patch: Patch::new(side, values)?,
        clusters_processed: acc.processed,
        pops: acc.pops,
        fallback: false,
    })
}

/// Reference estimator over a cluster model: the literal two-pass sum over
/// every cluster with a single max-shift. Linear in the model size; used
/// as the correctness oracle for the search path.
pub fn brute_force_mmse_clusters(
    observed: &CountPatch,
    model: &ClusterModel,
    mean_scale: f64,
) -> Result<Patch> {
    if observed.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "patch vs model dimension",
            left: observed.dim(),
            right: model.dim(),
        });
    }
    if !mean_scale.is_finite() || mean_scale <= 0.0 {
        return Err(Error::Domain(format!(
            "mean scale must be positive and finite, got {mean_scale}"
        )));
    }
    let n = model.n_clusters();
    let mut log_weights = Vec::with_capacity(n);
    for j in 0..n {
        let intensity = Patch::new(
            model.side(),
            model
                .centroid(j)
                .iter()
                .map(|&c| mean_scale * f64::from(c))
                .collect(),
        )?;
        let ll = patch_log_likelihood(observed, &intensity)?;
        log_weights.push(ll + (model.counts()[j] as f64).ln());
    }
    weighted_average(model, mean_scale, &log_weights)
}

/// Reference estimator over a raw corpus: every patch is its own candidate
/// with unit weight.
pub fn brute_force_mmse_corpus(
    observed: &CountPatch,
    patches: &[Patch],
    mean_scale: f64,
) -> Result<Patch> {
    if patches.is_empty() {
        return Err(Error::EmptyInput("corpus estimator needs patches".into()));
    }
    if !mean_scale.is_finite() || mean_scale <= 0.0 {
        return Err(Error::Domain(format!(
            "mean scale must be positive and finite, got {mean_scale}"
        )));
    }
    let side = patches[0].side();
    let d = patches[0].dim();
    if observed.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "patch vs corpus dimension",
            left: observed.dim(),
            right: d,
        });
    }
    let mut log_weights = Vec::with_capacity(patches.len());
    for p in patches {
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "corpus patch dimensions",
                left: p.dim(),
                right: d,
            });
        }
        let intensity = Patch::new(
            side,
            p.values().iter().map(|&u| mean_scale * u).collect(),
        )?;
        log_weights.push(patch_log_likelihood(observed, &intensity)?);
    }
    let shift = log_weights.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if shift == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights(
            "every corpus patch has zero likelihood".into(),
        ));
    }
    let mut total = 0.0;
    let mut numer = vec![0.0f64; d];
    for (p, &lw) in patches.iter().zip(&log_weights) {
        let t = (lw - shift).exp();
        if t > 0.0 {
            total += t;
            let tm = t * mean_scale;
            for (slot, &u) in numer.iter_mut().zip(p.values()) {
                *slot += tm * u;
            }
        }
    }
    Patch::new(side, numer.into_iter().map(|s| s / total).collect())
}

fn weighted_average(model: &ClusterModel, mean_scale: f64, log_weights: &[f64]) -> Result<Patch> {
    let d = model.dim();
    let shift = log_weights.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if shift == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights(
            "every cluster has zero likelihood".into(),
        ));
    }
    let mut total = 0.0;
    let mut numer = vec![0.0f64; d];
    for (j, &lw) in log_weights.iter().enumerate() {
        let t = (lw - shift).exp();
        if t > 0.0 {
            total += t;
            let tm = t * mean_scale;
            for (slot, &c) in numer.iter_mut().zip(model.centroid(j)) {
                *slot += tm * f64::from(c);
            }
        }
    }
    Patch::new(model.side(), numer.into_iter().map(|s| s / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdforest::build_kd_forest;
    use crate::knngraph::build_knn_graph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Index straight from explicit centroid rows and counts.
    fn index_from_rows(side: usize, rows: &[Vec<f32>], counts: &[u64]) -> DenoiseIndex {
        let flat: Vec<f32> = rows.iter().flatten().copied().collect();
        let model = ClusterModel::new(side, flat, counts.to_vec()).unwrap();
        let forest = build_kd_forest(&model, 2, 2, 7).unwrap();
        let graph = build_knn_graph(&model, (rows.len() - 1).min(4)).unwrap();
        DenoiseIndex::new(1.0, model, forest, graph).unwrap()
    }

    fn random_index(side: usize, n_clusters: usize, seed: u64) -> DenoiseIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f32>> = (0..n_clusters)
            .map(|_| {
                (0..side * side)
                    .map(|_| rng.gen_range(0.05..2.0f32))
                    .collect()
            })
            .collect();
        let counts: Vec<u64> = (0..n_clusters).map(|_| rng.gen_range(1..500)).collect();
        let flat: Vec<f32> = rows.iter().flatten().copied().collect();
        let model = ClusterModel::new(side, flat, counts).unwrap();
        let forest = build_kd_forest(&model, 4, 4, seed).unwrap();
        let graph = build_knn_graph(&model, 2 * side * side).unwrap();
        DenoiseIndex::new(1.0, model, forest, graph).unwrap()
    }

    #[test]
    fn sole_surviving_cluster_returns_its_scaled_centroid_exactly() {
        // Cluster 1 has a zero where y is positive, so only cluster 0
        // carries weight and the division cancels: out = mean(y) * c0.
        let rows = vec![vec![0.5f32, 1.0, 1.5, 2.0], vec![0.0, 1.0, 1.0, 1.0]];
        let index = index_from_rows(2, &rows, &[3, 5]);
        let y = CountPatch::new(2, vec![2, 1, 0, 3]).unwrap();
        let est = denoise_patch(&y, &index, &DenoiseParams::default()).unwrap();
        assert!(!est.fallback);
        let mu = y.mean();
        let expect: Vec<f64> = rows[0].iter().map(|&c| mu * f64::from(c)).collect();
        assert_eq!(est.patch.values(), expect.as_slice());
    }

    #[test]
    fn all_zero_patch_denoises_to_zero_without_processing() {
        let index = random_index(2, 10, 3);
        let y = CountPatch::new(2, vec![0; 4]).unwrap();
        let est = denoise_patch(&y, &index, &DenoiseParams::default()).unwrap();
        assert_eq!(est.patch.values(), &[0.0; 4]);
        assert_eq!(est.clusters_processed, 0);
        assert!(!est.fallback);
    }

    #[test]
    fn impossible_everywhere_falls_back_to_the_observation() {
        // Every centroid is zero in position 0, where y has a count.
        let rows = vec![vec![0.0f32, 1.0, 1.0, 1.0], vec![0.0, 2.0, 1.0, 0.5]];
        let index = index_from_rows(2, &rows, &[1, 1]);
        let y = CountPatch::new(2, vec![4, 1, 2, 0]).unwrap();
        let est = denoise_patch(&y, &index, &DenoiseParams::default()).unwrap();
        assert!(est.fallback);
        assert_eq!(est.patch.values(), &[4.0, 1.0, 2.0, 0.0]);
        assert_eq!(est.clusters_processed, 2);
    }

    #[test]
    fn exhaustive_matches_the_two_term_hand_computation() {
        let rows = vec![vec![0.5f32, 1.0, 1.5, 2.0], vec![1.5, 0.5, 1.0, 0.25]];
        let counts = [7u64, 2];
        let index = index_from_rows(2, &rows, &counts);
        let y = CountPatch::new(2, vec![1, 2, 0, 3]).unwrap();
        let mu = y.mean();
        let params = DenoiseParams {
            exhaustive: true,
            ..DenoiseParams::default()
        };
        let est = denoise_patch(&y, &index, &params).unwrap();

        // Literal per-element pmf evaluation, no tables.
        let lw: Vec<f64> = (0..2)
            .map(|j| {
                let intensity = Patch::new(
                    2,
                    rows[j].iter().map(|&c| mu * f64::from(c)).collect(),
                )
                .unwrap();
                patch_log_likelihood(&y, &intensity).unwrap() + (counts[j] as f64).ln()
            })
            .collect();
        let t: Vec<f64> = lw.iter().map(|&l| (l - lw[0].max(lw[1])).exp()).collect();
        let w = t[0] + t[1];
        for i in 0..4 {
            let expect =
                (t[0] * mu * f64::from(rows[0][i]) + t[1] * mu * f64::from(rows[1][i])) / w;
            let got = est.patch.values()[i];
            assert!(
                (got - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                "element {i}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn exhaustive_agrees_with_the_brute_force_oracle() {
        let index = random_index(3, 60, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = DenoiseParams {
            exhaustive: true,
            ..DenoiseParams::default()
        };
        for _ in 0..20 {
            let y = CountPatch::new(3, (0..9).map(|_| rng.gen_range(0..6)).collect()).unwrap();
            if y.sum() == 0 {
                continue;
            }
            let est = denoise_patch(&y, &index, &params).unwrap();
            assert_eq!(est.clusters_processed, 60);
            let oracle = brute_force_mmse_clusters(&y, index.model(), y.mean()).unwrap();
            for (a, b) in est.patch.values().iter().zip(oracle.values()) {
                assert!(
                    (a - b).abs() <= 1e-9 * b.abs(),
                    "search {a} vs oracle {b}"
                );
            }
        }
    }

    #[test]
    fn early_termination_tracks_the_exhaustive_answer() {
        let index = random_index(3, 200, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let default = DenoiseParams::default();
        let exhaustive = DenoiseParams {
            exhaustive: true,
            ..DenoiseParams::default()
        };
        for _ in 0..10 {
            let y = CountPatch::new(3, (0..9).map(|_| rng.gen_range(0..8)).collect()).unwrap();
            if y.sum() == 0 {
                continue;
            }
            let fast = denoise_patch(&y, &index, &default).unwrap();
            let full = denoise_patch(&y, &index, &exhaustive).unwrap();
            let mu = y.mean();
            for (a, b) in fast.patch.values().iter().zip(full.patch.values()) {
                assert!((a - b).abs() <= 1e-6 * mu, "fast {a} vs full {b}");
            }
        }
    }

    #[test]
    fn scratch_reuse_changes_nothing() {
        let index = random_index(2, 30, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = DenoiseParams::default();
        let mut scratch = QueryScratch::new();
        for _ in 0..15 {
            let y = CountPatch::new(2, (0..4).map(|_| rng.gen_range(0..7)).collect()).unwrap();
            let reused = denoise_patch_with_scratch(&y, &index, &params, &mut scratch).unwrap();
            let fresh = denoise_patch(&y, &index, &params).unwrap();
            assert_eq!(reused.patch.values(), fresh.patch.values());
            assert_eq!(reused.clusters_processed, fresh.clusters_processed);
        }
    }

    #[test]
    fn estimates_stay_inside_the_candidate_hull() {
        let index = random_index(2, 25, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let y = CountPatch::new(2, (0..4).map(|_| rng.gen_range(0..9)).collect()).unwrap();
            if y.sum() == 0 {
                continue;
            }
            let est = denoise_patch(&y, &index, &DenoiseParams::default()).unwrap();
            let mu = y.mean();
            for (i, &v) in est.patch.values().iter().enumerate() {
                let lo = (0..25)
                    .map(|j| f64::from(index.model().centroid(j)[i]))
                    .fold(f64::INFINITY, f64::min);
                let hi = (0..25)
                    .map(|j| f64::from(index.model().centroid(j)[i]))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(v >= mu * lo - 1e-9 && v <= mu * hi + 1e-9);
            }
        }
    }

    #[test]
    fn rejects_mismatched_dimensions_and_bad_params() {
        let index = random_index(2, 10, 1);
        let y9 = CountPatch::new(3, vec![1; 9]).unwrap();
        assert!(denoise_patch(&y9, &index, &DenoiseParams::default()).is_err());
        let y = CountPatch::new(2, vec![1; 4]).unwrap();
        let bad_window = DenoiseParams {
            convergence_window: 0,
            ..DenoiseParams::default()
        };
        assert!(denoise_patch(&y, &index, &bad_window).is_err());
        let bad_eps = DenoiseParams {
            epsilon: -1.0,
            ..DenoiseParams::default()
        };
        assert!(denoise_patch(&y, &index, &bad_eps).is_err());
    }

    #[test]
    fn corpus_oracle_rejects_degenerate_inputs() {
        let patches = vec![Patch::new(1, vec![0.0]).unwrap()];
        let y = CountPatch::new(1, vec![2]).unwrap();
        assert!(matches!(
            brute_force_mmse_corpus(&y, &patches, 2.0),
            Err(Error::DegenerateWeights(_))
        ));
        assert!(brute_force_mmse_corpus(&y, &[], 2.0).is_err());
        assert!(brute_force_mmse_corpus(&y, &patches, 0.0).is_err());
    }

    #[test]
    fn single_cluster_oracle_returns_the_scaled_centroid_exactly() {
        let model = ClusterModel::new(2, vec![0.25f32, 0.5, 0.75, 1.25], vec![9]).unwrap();
        let y = CountPatch::new(2, vec![1, 0, 2, 1]).unwrap();
        let mu = y.mean();
        let est = brute_force_mmse_clusters(&y, &model, mu).unwrap();
        let expect: Vec<f64> = [0.25, 0.5, 0.75, 1.25]
            .iter()
            .map(|&c| mu * c)
            .collect();
        assert_eq!(est.values(), expect.as_slice());
    }
}
