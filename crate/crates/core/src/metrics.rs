//! Image quality metrics.

use crate::error::{Error, Result};
use crate::image::IntensityImage;

/// Mean squared error between two images of identical shape.
pub fn mse(reference: &IntensityImage, estimate: &IntensityImage) -> Result<f64> {
    if reference.width() != estimate.width() || reference.height() != estimate.height() {
        return Err(Error::DimensionMismatch {
            context: "mse image shapes",
            left: reference.data().len(),
            right: estimate.data().len(),
        });
    }
    let n = reference.data().len() as f64;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// Peak signal-to-noise ratio in decibels, 10*log10(peak^2 / MSE).
///
/// Identical images have zero MSE and PSNR +inf.
pub fn psnr(reference: &IntensityImage, estimate: &IntensityImage, peak: f64) -> Result<f64> {
    if !peak.is_finite() || peak <= 0.0 {
        return Err(Error::invalid("peak", format!("must be positive and finite, got {peak}")));
    }
    let err = mse(reference, estimate)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat(value: f64) -> IntensityImage {
        IntensityImage::new(4, 4, vec![value; 16]).unwrap()
    }

    #[test]
    fn mse_of_constant_offset() {
        assert_eq!(mse(&flat(3.0), &flat(5.0)).unwrap(), 4.0);
    }

    #[test]
    fn identical_images_have_infinite_psnr() {
        assert_eq!(psnr(&flat(7.0), &flat(7.0), 255.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_at_peak_squared_error_is_zero_db() {
        // MSE equal to peak^2 sits exactly at 0 dB.
        let reference = flat(0.0);
        let estimate = flat(255.0);
        assert_abs_diff_eq!(psnr(&reference, &estimate, 255.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psnr_matches_hand_computed_value() {
        // MSE 255 at peak 255 gives 10*log10(255) = 24.0654 dB.
        let reference = flat(0.0);
        let estimate = flat(255.0f64.sqrt());
        assert_abs_diff_eq!(
            psnr(&reference, &estimate, 255.0).unwrap(),
            24.0654,
            epsilon = 1e-4
        );
    }

    #[test]
    fn psnr_is_symmetric_in_its_images() {
        let a = IntensityImage::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = IntensityImage::new(2, 2, vec![0.0, 2.5, 3.0, 8.0]).unwrap();
        assert_eq!(psnr(&a, &b, 8.0).unwrap(), psnr(&b, &a, 8.0).unwrap());
    }

    #[test]
    fn shape_mismatch_and_bad_peak_error() {
        let a = flat(1.0);
        let b = IntensityImage::new(2, 2, vec![1.0; 4]).unwrap();
        assert!(mse(&a, &b).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
        assert!(psnr(&a, &a, f64::NEG_INFINITY).is_err());
    }
}
