//! Grayscale image containers.
//!
//! Two kinds of image move through the pipeline: real-valued intensity
//! images (clean inputs, denoised outputs) and integer count images
//! (photon-limited observations). Both store row-major data.

use crate::error::{Error, Result};

/// A grayscale image with finite, nonnegative real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl IntensityImage {
    /// Wraps row-major data, rejecting empty shapes, length mismatches, and
    /// negative or non-finite samples.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image size", "width and height must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "image data length",
                left: data.len(),
                right: width * height,
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!(
                "intensity sample {v} is negative or not finite"
            )));
        }
        Ok(IntensityImage { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Largest sample value.
    pub fn max_value(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| if v > m { v } else { m })
    }

    /// Rescales so the maximum sample equals `peak`. Errors on an all-zero
    /// image, where no such scaling exists.
    pub fn scaled_to_peak(&self, peak: f64) -> Result<IntensityImage> {
        if !peak.is_finite() || peak <= 0.0 {
            return Err(Error::invalid("peak", format!("must be positive and finite, got {peak}")));
        }
        let max = self.max_value();
        if max == 0.0 {
            return Err(Error::EmptyInput("cannot rescale an all-zero image".into()));
        }
        let factor = peak / max;
        let data = self.data.iter().map(|&v| v * factor).collect();
        Ok(IntensityImage {
            width: self.width,
            height: self.height,
            data,
        })
    }
}

/// A grayscale image of nonnegative integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountImage {
    width: usize,
    height: usize,
    data: Vec<u32>,
}

impl CountImage {
    pub fn new(width: usize, height: usize, data: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image size", "width and height must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "image data length",
                left: data.len(),
                right: width * height,
            });
        }
        Ok(CountImage { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.data[row * self.width + col]
    }

    /// The counts viewed as real intensities.
    pub fn to_intensity(&self) -> IntensityImage {
        IntensityImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}
