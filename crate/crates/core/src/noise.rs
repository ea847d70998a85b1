//! Poisson noise simulation.
//!
//! Synthetic low-light observations are produced by scaling a clean image
//! so its maximum equals the requested peak and drawing each pixel from a
//! Poisson with that scaled intensity as its mean. Sampling is exact for
//! every mean — no Gaussian shortcut — so simulated data follows the same
//! distribution the denoiser models, including the strongly skewed
//! low-count regime the whole exercise is about.

use crate::error::{Error, Result};
use crate::image::{CountImage, IntensityImage};
use crate::poisson::ln_factorial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Means below this use sequential-search inversion; above it, transformed
/// rejection. The crossover keeps inversion's expected loop length short.
const INVERSION_CUTOFF: f64 = 10.0;

/// Draws one Poisson sample by inverting the CDF with a sequential search.
/// Expected work is O(mean), fine for small means.
fn sample_inversion<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    let mut k = 0u64;
    let mut pmf = (-mean).exp();
    let mut cdf = pmf;
    let u: f64 = rng.gen();
    // The float CDF plateaus a few ulps below 1, so a draw inside that gap
    // could loop forever; the cap is far beyond any non-negligible mass.
    let cap = (10.0 * mean + 200.0) as u64;
    while u > cdf && k < cap {
        k += 1;
        pmf *= mean / k as f64;
        cdf += pmf;
    }
    k
}

/// Draws one Poisson sample with Hörmann's transformed rejection (PTRS).
/// Exact for means >= 10, with a bounded expected number of rejections.
fn sample_transformed_rejection<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    let log_mean = mean.ln();
    let b = 0.931 + 2.53 * mean.sqrt();
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        // Most draws land in the bulk and accept without evaluating the pmf.
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if (v * inv_alpha / (a / (us * us) + b)).ln()
            <= k * log_mean - mean - ln_factorial(k as u64)
        {
            return k as u64;
        }
    }
}

/// One exact Poisson draw with the given mean.
pub(crate) fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean.is_finite() && mean >= 0.0);
    if mean == 0.0 {
        0
    } else if mean < INVERSION_CUTOFF {
        sample_inversion(rng, mean)
    } else {
        sample_transformed_rejection(rng, mean)
    }
}

/// Simulates a photon-limited observation of `image` at the given peak.
///
/// The image is scaled so its maximum intensity equals `peak`; each output
/// pixel is an independent Poisson draw with the scaled intensity as mean.
/// The draw order is row-major from a single ChaCha8 stream, so the result
/// is a pure function of (image, peak, seed).
pub fn add_poisson_noise(image: &IntensityImage, peak: f64, seed: u64) -> Result<CountImage> {
    if !peak.is_finite() || peak <= 0.0 {
        return Err(Error::invalid("peak", format!("must be positive and finite, got {peak}")));
    }
    let max = image.max_value();
    if max == 0.0 {
        return Err(Error::EmptyInput(
            "cannot add noise to an all-zero image".into(),
        ));
    }
    let factor = peak / max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(image.data().len());
    for &v in image.data() {
        let draw = sample_poisson(&mut rng, v * factor);
        let count = u32::try_from(draw).map_err(|_| {
            Error::ValueOutOfRange(format!("poisson draw {draw} exceeds u32 range"))
        })?;
        data.push(count);
    }
    CountImage::new(image.width(), image.height(), data)
}
