//! Whole-image denoising and benchmark evaluation.
//!
//! [`denoise_image`] runs the per-patch estimator over every sliding window
//! of a count image and averages the overlapping estimates back into an
//! intensity image. [`evaluate`] wraps that in the usual benchmark loop:
//! scale a clean image to a target peak, draw Poisson counts, denoise, and
//! report PSNR against the scaled original, averaged over several noise
//! realizations per peak.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::denoise::{denoise_patch_with_scratch, DenoiseParams, PatchEstimate, QueryScratch};
use crate::error::{Error, Result};
use crate::image::{CountImage, IntensityImage};
use crate::index::DenoiseIndex;
use crate::metrics::psnr;
use crate::noise::add_poisson_noise;
use crate::patch::{aggregate_patches, extract_count_patches};
use crate::seed::derive_seed;

/// Patches per parallel work unit. Fixed so the chunk boundaries — and with
/// them every floating-point result — do not depend on the worker count.
const PATCH_CHUNK: usize = 64;

/// Result of denoising one count image.
#[derive(Debug, Clone)]
pub struct DenoisedImage {
    /// The reconstructed intensity image.
    pub image: IntensityImage,
    /// Number of overlapping patches that were denoised.
    pub patches: usize,
    /// Patches where no cluster had nonzero likelihood and the raw counts
    /// were passed through unchanged.
    pub fallbacks: usize,
    /// Total clusters processed across all patches; divide by `patches` for
    /// the average search effort.
    pub clusters_processed: u64,
}

/// Denoises every sliding patch of `noisy` and averages the overlaps.
///
/// The per-patch work is embarrassingly parallel and runs on the current
/// rayon thread pool; results are combined in patch order, so the output is
/// identical regardless of how many workers run.
pub fn denoise_image(
    noisy: &CountImage,
    index: &DenoiseIndex,
    params: &DenoiseParams,
) -> Result<DenoisedImage> {
    params.validate()?;
    let side = index.side();
    if noisy.width() < side || noisy.height() < side {
        return Err(Error::ImageTooSmall {
            width: noisy.width(),
            height: noisy.height(),
            side,
        });
    }
    let extracted = extract_count_patches(noisy, side)?;
    let (count_patches, positions): (Vec<_>, Vec<_>) = extracted.into_iter().unzip();

    let estimates: Vec<PatchEstimate> = count_patches
        .par_chunks(PATCH_CHUNK)
        .map(|chunk| {
            let mut scratch = QueryScratch::new();
            chunk
                .iter()
                .map(|patch| denoise_patch_with_scratch(patch, index, params, &mut scratch))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut fallbacks = 0usize;
    let mut clusters_processed = 0u64;
    let mut patches = Vec::with_capacity(estimates.len());
    for est in estimates {
        fallbacks += usize::from(est.fallback);
        clusters_processed += est.clusters_processed as u64;
        patches.push(est.patch);
    }
    let image = aggregate_patches(&patches, &positions, noisy.width(), noisy.height())?;
    Ok(DenoisedImage {
        image,
        patches: patches.len(),
        fallbacks,
        clusters_processed,
    })
}

/// One benchmark row: a single peak, averaged over noise realizations.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub peak: f64,
    pub realizations: usize,
    /// PSNR of the raw counts against the scaled clean image, in dB.
    pub psnr_noisy_db: f64,
    /// PSNR of the denoised image against the scaled clean image, in dB.
    pub psnr_denoised_db: f64,
    /// Wall-clock time spent denoising (all realizations of this peak).
    pub seconds: f64,
    /// Fallback patches summed over all realizations.
    pub fallbacks: usize,
}

/// Benchmark results for one image across several peaks.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub image: String,
    pub rows: Vec<EvalRow>,
}

/// Runs the peak-sweep benchmark for one clean image.
///
/// For peak index `p` and realization `r` the Poisson draw is seeded with
/// `derive_seed(seed, p, r)`, so every (peak, realization) cell is
/// reproducible on its own and independent of the others.
pub fn evaluate(
    image_name: &str,
    clean: &IntensityImage,
    index: &DenoiseIndex,
    peaks: &[f64],
    realizations: usize,
    seed: u64,
    params: &DenoiseParams,
) -> Result<EvaluationReport> {
    if peaks.is_empty() {
        return Err(Error::EmptyInput("no peaks to evaluate".into()));
    }
    if realizations == 0 {
        return Err(Error::invalid(
            "realizations",
            "at least one noise realization is required",
        ));
    }
    let mut rows = Vec::with_capacity(peaks.len());
    for (p, &peak) in peaks.iter().enumerate() {
        let reference = clean.scaled_to_peak(peak)?;
        let mut sum_noisy = 0.0;
        let mut sum_denoised = 0.0;
        let mut fallbacks = 0usize;
        let mut seconds = 0.0;
        for r in 0..realizations {
            let noisy = add_poisson_noise(clean, peak, derive_seed(seed, p as u64, r as u64))?;
            sum_noisy += psnr(&reference, &noisy.to_intensity(), peak)?;
            let start = Instant::now();
            let denoised = denoise_image(&noisy, index, params)?;
            seconds += start.elapsed().as_secs_f64();
            sum_denoised += psnr(&reference, &denoised.image, peak)?;
            fallbacks += denoised.fallbacks;
        }
        rows.push(EvalRow {
            peak,
            realizations,
            psnr_noisy_db: sum_noisy / realizations as f64,
            psnr_denoised_db: sum_denoised / realizations as f64,
            seconds,
            fallbacks,
        });
    }
    Ok(EvaluationReport {
        image: image_name.to_string(),
        rows,
    })
}

impl EvaluationReport {
    /// Renders the report as CSV, one row per peak.
    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "image,peak,realization-count,psnr_noisy_db,psnr_denoised_db,seconds,fallbacks\n",
        );
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.3},{}",
                self.image,
                row.peak,
                row.realizations,
                row.psnr_noisy_db,
                row.psnr_denoised_db,
                row.seconds,
                row.fallbacks
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Renders the report as an aligned human-readable table.
    pub fn render_table(&self) -> String {
        let mut out = format!("image: {}\n", self.image);
        out.push_str("  peak   noisy dB   denoised dB   gain dB   seconds   fallbacks\n");
        for row in &self.rows {
            writeln!(
                out,
                "{:>6} {:>10.2} {:>13.2} {:>9.2} {:>9.3} {:>11}",
                row.peak,
                row.psnr_noisy_db,
                row.psnr_denoised_db,
                row.psnr_denoised_db - row.psnr_noisy_db,
                row.seconds,
                row.fallbacks
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_corpus, normalize_corpus};
    use crate::index::{build_denoise_index, IndexBuildParams};

    fn smooth_test_image(width: usize, height: usize, phase: f64) -> IntensityImage {
        let data = (0..width * height)
            .map(|i| {
                let r = (i / width) as f64;
                let c = (i % width) as f64;
                3.0 + (0.13 * r + phase).sin() + (0.09 * c - phase).cos()
            })
            .collect();
        IntensityImage::new(width, height, data).unwrap()
    }

    fn small_index(seed: u64) -> DenoiseIndex {
        let images = vec![
            smooth_test_image(40, 40, 0.0),
            smooth_test_image(40, 40, 1.3),
        ];
        let corpus = ingest_corpus(&images, 4, None, seed).unwrap();
        let corpus = normalize_corpus(corpus).unwrap();
        let params = IndexBuildParams {
            knn_k: Some(6),
            tree_count: 4,
            leaf_capacity: 4,
            max_iters: 10,
            seed,
            ..IndexBuildParams::new(12)
        };
        build_denoise_index(corpus, &params).unwrap()
    }

    #[test]
    fn denoised_image_matches_input_shape_and_counts_patches() {
        let index = small_index(5);
        let clean = smooth_test_image(20, 16, 0.4);
        let noisy = add_poisson_noise(&clean, 8.0, 11).unwrap();
        let out = denoise_image(&noisy, &index, &DenoiseParams::default()).unwrap();
        assert_eq!(out.image.width(), 20);
        assert_eq!(out.image.height(), 16);
        assert_eq!(out.patches, (20 - 4 + 1) * (16 - 4 + 1));
        assert!(out.clusters_processed >= out.patches as u64 - out.fallbacks as u64);
    }

    #[test]
    fn denoising_improves_psnr_on_a_smooth_scene() {
        let index = small_index(7);
        let clean = smooth_test_image(32, 32, 0.9);
        let peak = 2.0;
        let scaled = clean.scaled_to_peak(peak).unwrap();
        let noisy = add_poisson_noise(&clean, peak, 3).unwrap();
        let before = psnr(&scaled, &noisy.to_intensity(), peak).unwrap();
        let out = denoise_image(&noisy, &index, &DenoiseParams::default()).unwrap();
        let after = psnr(&scaled, &out.image, peak).unwrap();
        assert!(
            after > before + 1.0,
            "expected a clear PSNR gain, got {before:.2} -> {after:.2}"
        );
    }

    #[test]
    fn denoise_image_is_deterministic() {
        let index = small_index(9);
        let clean = smooth_test_image(24, 20, 0.2);
        let noisy = add_poisson_noise(&clean, 4.0, 21).unwrap();
        let a = denoise_image(&noisy, &index, &DenoiseParams::default()).unwrap();
        let b = denoise_image(&noisy, &index, &DenoiseParams::default()).unwrap();
        assert_eq!(a.image.data(), b.image.data());
        assert_eq!(a.clusters_processed, b.clusters_processed);
    }

    #[test]
    fn rejects_images_smaller_than_the_patch() {
        let index = small_index(13);
        let tiny = CountImage::new(3, 3, vec![1; 9]).unwrap();
        assert!(matches!(
            denoise_image(&tiny, &index, &DenoiseParams::default()),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn evaluate_produces_one_row_per_peak_and_is_deterministic() {
        let index = small_index(15);
        let clean = smooth_test_image(18, 18, 0.6);
        let peaks = [1.0, 4.0];
        let a = evaluate("scene", &clean, &index, &peaks, 2, 42, &DenoiseParams::default())
            .unwrap();
        let b = evaluate("scene", &clean, &index, &peaks, 2, 42, &DenoiseParams::default())
            .unwrap();
        assert_eq!(a.rows.len(), 2);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.peak, rb.peak);
            assert_eq!(ra.psnr_noisy_db.to_bits(), rb.psnr_noisy_db.to_bits());
            assert_eq!(ra.psnr_denoised_db.to_bits(), rb.psnr_denoised_db.to_bits());
            assert_eq!(ra.fallbacks, rb.fallbacks);
            assert!(ra.seconds >= 0.0);
        }
    }

    #[test]
    fn csv_has_the_documented_header_and_row_count() {
        let report = EvaluationReport {
            image: "lena".into(),
            rows: vec![EvalRow {
                peak: 2.0,
                realizations: 3,
                psnr_noisy_db: 11.5,
                psnr_denoised_db: 19.25,
                seconds: 0.5,
                fallbacks: 1,
            }],
        };
        let csv = report.render_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "image,peak,realization-count,psnr_noisy_db,psnr_denoised_db,seconds,fallbacks"
        );
        assert_eq!(lines.next().unwrap(), "lena,2,3,11.500000,19.250000,0.500,1");
        assert!(lines.next().is_none());
        let table = report.render_table();
        assert!(table.contains("lena"));
        assert!(table.contains("19.25"));
    }

    #[test]
    fn evaluate_rejects_empty_configuration() {
        let index = small_index(19);
        let clean = smooth_test_image(12, 12, 0.1);
        assert!(evaluate("x", &clean, &index, &[], 1, 0, &DenoiseParams::default()).is_err());
        assert!(
            evaluate("x", &clean, &index, &[1.0], 0, 0, &DenoiseParams::default()).is_err()
        );
    }

    #[test]
    fn realization_seeds_are_independent_per_cell() {
        // Changing the realization count must not change the first cell.
        let clean = smooth_test_image(10, 10, 0.8);
        let a = add_poisson_noise(&clean, 3.0, derive_seed(7, 0, 0)).unwrap();
        let b = add_poisson_noise(&clean, 3.0, derive_seed(7, 0, 0)).unwrap();
        assert_eq!(a.data(), b.data());
        let c = add_poisson_noise(&clean, 3.0, derive_seed(7, 0, 1)).unwrap();
        assert_ne!(a.data(), c.data());
    }
}
