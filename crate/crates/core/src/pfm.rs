//! Reading and writing grayscale PFM (portable floatmap) files.
//!
//! Denoised images carry fractional intensities that PGM would truncate,
//! so the float output format is PFM: magic `Pf` (grayscale), a scale line
//! whose sign encodes endianness (negative = little-endian, which is what
//! we write), and rows stored bottom-up as 32-bit floats.

use crate::error::{Error, Result};
use crate::image::IntensityImage;
use crate::pgm::atomic_write_bytes;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Writes a grayscale little-endian PFM.
pub fn save(image: &IntensityImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(32 + 4 * image.data().len());
    write!(out, "Pf\n{} {}\n-1.0\n", image.width(), image.height()).expect("write to vec");
    for row in (0..image.height()).rev() {
        for col in 0..image.width() {
            out.extend_from_slice(&(image.get(row, col) as f32).to_le_bytes());
        }
    }
    atomic_write_bytes(path, &out)
}

fn header_line<'a>(bytes: &'a [u8], pos: &mut usize, path: &Path) -> Result<&'a str> {
    let start = *pos;
    while let Some(&c) = bytes.get(*pos) {
        *pos += 1;
        if c == b'\n' {
            let line = &bytes[start..*pos - 1];
            return std::str::from_utf8(line)
                .map(str::trim)
                .map_err(|_| Error::format(path, "non-ASCII header line"));
        }
    }
    Err(Error::format(path, "header ended early"))
}

/// Loads a grayscale PFM in either endianness.
pub fn load(path: impl AsRef<Path>) -> Result<IntensityImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let magic = header_line(&bytes, &mut pos, path)?;
    if magic != "Pf" {
        return Err(Error::format(
            path,
            format!("not a grayscale PFM (magic {magic:?})"),
        ));
    }
    let dims = header_line(&bytes, &mut pos, path)?;
    let mut it = dims.split_ascii_whitespace();
    let width: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(path, "bad width"))?;
    let height: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(path, "bad height"))?;
    if it.next().is_some() {
        return Err(Error::format(path, "trailing tokens after dimensions"));
    }
    let scale: f32 = header_line(&bytes, &mut pos, path)?
        .parse()
        .map_err(|_| Error::format(path, "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(path, format!("bad scale {scale}")));
    }
    let little_endian = scale < 0.0;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "zero image dimension"));
    }
    let n = width * height;
    let raster = &bytes[pos..];
    if raster.len() < 4 * n {
        return Err(Error::format(
            path,
            format!("raster has {} bytes, needs {}", raster.len(), 4 * n),
        ));
    }
    let mut data = vec![0.0f64; n];
    for (i, quad) in raster[..4 * n].chunks_exact(4).enumerate() {
        let q = [quad[0], quad[1], quad[2], quad[3]];
        let v = if little_endian {
            f32::from_le_bytes(q)
        } else {
            f32::from_be_bytes(q)
        };
        // Rows are stored bottom-up.
        let row = height - 1 - i / width;
        let col = i % width;
        data[row * width + col] = f64::from(v);
    }
    IntensityImage::new(width, height, data)
}
