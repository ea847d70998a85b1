//! Poisson log-probabilities.
//!
//! The observation model treats every pixel count as an independent Poisson
//! draw whose mean is the underlying intensity. All probability work happens
//! in the log domain; at patch dimension in the hundreds the linear-domain
//! products underflow long before the weights stop mattering.

use crate::error::{Error, Result};
use crate::patch::{CountPatch, Patch};
use statrs::function::gamma::ln_gamma;

/// ln(n!) via the log-gamma function.
///
/// 0! and 1! are exactly 1, so their logs are returned as exact zeros
/// rather than the rounding dust `ln_gamma` produces near its roots; small
/// counts dominate photon-limited data, so this keeps the most common terms
/// exact.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Log-probability of observing `count` from a Poisson with the given mean.
///
/// The mean may be zero: a zero-mean Poisson is the unit mass at zero, so
/// the result is 0 for `count == 0` and -inf otherwise. Negative or
/// non-finite means are domain errors.
pub fn poisson_log_pmf(count: u32, mean: f64) -> Result<f64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::Domain(format!(
            "poisson mean must be finite and nonnegative, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(if count == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(count as f64 * mean.ln() - mean - ln_factorial(count as u64))
}

/// Log-likelihood of a count patch under an intensity patch, elementwise
/// independent: the sum of per-pixel Poisson log-pmfs.
///
/// Returns -inf as soon as any pixel is impossible (zero intensity with a
/// positive count).
pub fn patch_log_likelihood(observed: &CountPatch, intensity: &Patch) -> Result<f64> {
    if observed.dim() != intensity.dim() {
        return Err(Error::DimensionMismatch {
            context: "patch log-likelihood",
            left: observed.dim(),
            right: intensity.dim(),
        });
    }
    let mut total = 0.0;
    for (&y, &x) in observed.values().iter().zip(intensity.values()) {
        let term = poisson_log_pmf(y, x)?;
        if term == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += term;
    }
    Ok(total)
}
