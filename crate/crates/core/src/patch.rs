//! Square patches and the extract/aggregate pair.
//!
//! Denoising operates on every overlapping `side`×`side` window of the
//! image (stride 1). After per-patch estimation the overlapping estimates
//! are averaged back into an image; interior pixels receive `side`²
//! contributions, border pixels fewer.

use crate::error::{Error, Result};
use crate::image::{CountImage, IntensityImage};

/// A square patch of nonnegative real values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    side: usize,
    values: Vec<f64>,
}

impl Patch {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("patch side", "must be positive"));
        }
        if values.len() != side * side {
            return Err(Error::DimensionMismatch {
                context: "patch length",
                left: values.len(),
                right: side * side,
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!(
                "patch value {v} is negative or not finite"
            )));
        }
        Ok(Patch { side, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A square patch of counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountPatch {
    side: usize,
    values: Vec<u32>,
}

impl CountPatch {
    pub fn new(side: usize, values: Vec<u32>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("patch side", "must be positive"));
        }
        if values.len() != side * side {
            return Err(Error::DimensionMismatch {
                context: "patch length",
                left: values.len(),
                right: side * side,
            });
        }
        Ok(CountPatch { side, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn sum(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }

    /// Mean count, the scale estimate the denoiser works with.
    pub fn mean(&self) -> f64 {
        self.sum() as f64 / self.values.len() as f64
    }

    /// The counts as a real-valued patch.
    pub fn to_patch(&self) -> Patch {
        Patch {
            side: self.side,
            values: self.values.iter().map(|&v| v as f64).collect(),
        }
    }
}

/// Top-left corner of a patch inside an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchPosition {
    pub row: usize,
    pub col: usize,
}

fn check_fits(width: usize, height: usize, side: usize) -> Result<()> {
    if side == 0 {
        return Err(Error::invalid("patch side", "must be positive"));
    }
    if width < side || height < side {
        return Err(Error::ImageTooSmall { width, height, side });
    }
    Ok(())
}

/// Positions of all overlapping patches in row-major order.
pub fn patch_grid(width: usize, height: usize, side: usize) -> Result<Vec<PatchPosition>> {
    check_fits(width, height, side)?;
    let rows = height - side + 1;
    let cols = width - side + 1;
    let mut out = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            out.push(PatchPosition { row, col });
        }
    }
    Ok(out)
}

fn window<T: Copy>(data: &[T], width: usize, pos: PatchPosition, side: usize) -> Vec<T> {
    let mut values = Vec::with_capacity(side * side);
    for r in 0..side {
        let start = (pos.row + r) * width + pos.col;
        values.extend_from_slice(&data[start..start + side]);
    }
    values
}

/// Every overlapping `side`×`side` patch of an intensity image, paired with
/// its position, in row-major position order.
pub fn extract_patches(image: &IntensityImage, side: usize) -> Result<Vec<(Patch, PatchPosition)>> {
    let grid = patch_grid(image.width(), image.height(), side)?;
    Ok(grid
        .into_iter()
        .map(|pos| {
            let values = window(image.data(), image.width(), pos, side);
            (Patch { side, values }, pos)
        })
        .collect())
}

/// Count-image analogue of [`extract_patches`].
pub fn extract_count_patches(
    image: &CountImage,
    side: usize,
) -> Result<Vec<(CountPatch, PatchPosition)>> {
    let grid = patch_grid(image.width(), image.height(), side)?;
    Ok(grid
        .into_iter()
        .map(|pos| {
            let values = window(image.data(), image.width(), pos, side);
            (CountPatch { side, values }, pos)
        })
        .collect())
}

/// Averages overlapping patches back into a `width`×`height` image.
///
/// Every pixel of the output must be covered by at least one patch and each
/// patch must lie inside the image; violations are reported as errors rather
/// than silently zero-filled.
pub fn aggregate_patches(
    patches: &[Patch],
    positions: &[PatchPosition],
    width: usize,
    height: usize,
) -> Result<IntensityImage> {
    if patches.len() != positions.len() {
        return Err(Error::DimensionMismatch {
            context: "patches vs positions",
            left: patches.len(),
            right: positions.len(),
        });
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("image size", "width and height must be positive"));
    }
    let mut sum = vec![0.0f64; width * height];
    let mut cover = vec![0u32; width * height];
    for (patch, pos) in patches.iter().zip(positions) {
        let side = patch.side;
        if pos.row + side > height || pos.col + side > width {
            return Err(Error::PatchOutOfBounds {
                row: pos.row,
                col: pos.col,
                side,
                width,
                height,
            });
        }
        for r in 0..side {
            let base = (pos.row + r) * width + pos.col;
            let row_vals = &patch.values[r * side..(r + 1) * side];
            for (c, &v) in row_vals.iter().enumerate() {
                sum[base + c] += v;
                cover[base + c] += 1;
            }
        }
    }
    if let Some(i) = cover.iter().position(|&c| c == 0) {
        return Err(Error::UncoveredPixel {
            row: i / width,
            col: i % width,
        });
    }
    let data = sum
        .iter()
        .zip(&cover)
        .map(|(&s, &c)| s / c as f64)
        .collect();
    IntensityImage::new(width, height, data)
}
