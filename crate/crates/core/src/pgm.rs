//! Reading and writing PGM (portable graymap) files.
//!
//! Both the binary (`P5`) and ASCII (`P2`) variants are read, with `#`
//! comments allowed anywhere in the header, maxval up to 65535, and 16-bit
//! binary samples stored big-endian per the format. Count images are always
//! written as 16-bit `P5` so simulated observations round-trip without
//! clipping; intensity images are rounded and written at the narrowest
//! depth that holds their range.

use crate::error::{Error, Result};
use crate::image::{CountImage, IntensityImage};
use std::fs;
use std::io::Write;
use std::path::Path;

const MAX_SUPPORTED_MAXVAL: u32 = 65535;

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> HeaderParser<'a> {
    fn skip_separators(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while let Some(&c) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => return Ok(()),
                None => {
                    return Err(Error::format(self.path, "header ended early"));
                }
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_separators()?;
        let start = self.pos;
        while let Some(&c) = self.bytes.get(self.pos) {
            if c.is_ascii_whitespace() || c == b'#' {
                break;
            }
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(self.path, "non-ASCII header token"))
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::format(self.path, format!("bad {what}: {tok:?}")))
    }
}

/// Loads a `P2` or `P5` graymap as counts.
pub fn load_count(path: impl AsRef<Path>) -> Result<CountImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut parser = HeaderParser {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let magic = parser.token()?;
    if magic != "P5" && magic != "P2" {
        return Err(Error::format(path, format!("not a PGM file (magic {magic:?})")));
    }
    let width = parser.number("width")? as usize;
    let height = parser.number("height")? as usize;
    let maxval = parser.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "zero image dimension"));
    }
    if maxval == 0 || maxval > MAX_SUPPORTED_MAXVAL {
        return Err(Error::format(path, format!("unsupported maxval {maxval}")));
    }
    let n = width * height;
    let data = if magic == "P5" {
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(parser.pos) {
            Some(c) if c.is_ascii_whitespace() => parser.pos += 1,
            _ => return Err(Error::format(path, "missing separator before raster")),
        }
        let raster = &bytes[parser.pos..];
        let wide = maxval > 255;
        let needed = if wide { 2 * n } else { n };
        if raster.len() < needed {
            return Err(Error::format(
                path,
                format!("raster has {} bytes, needs {needed}", raster.len()),
            ));
        }
        if wide {
            raster[..needed]
                .chunks_exact(2)
                .map(|p| u32::from(u16::from_be_bytes([p[0], p[1]])))
                .collect()
        } else {
            raster[..needed].iter().map(|&b| u32::from(b)).collect()
        }
    } else {
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            vals.push(parser.number("sample")?);
        }
        vals
    };
    if let Some(&v) = data.iter().find(|&&v| v > maxval) {
        return Err(Error::format(path, format!("sample {v} exceeds maxval {maxval}")));
    }
    CountImage::new(width, height, data)
}

/// Loads a graymap as real intensities.
pub fn load_intensity(path: impl AsRef<Path>) -> Result<IntensityImage> {
    Ok(load_count(path)?.to_intensity())
}

pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.tmp"),
        None => "tmp".to_string(),
    });
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub(crate) use atomic_write as atomic_write_bytes;

/// Writes counts as a 16-bit binary PGM (maxval 65535, big-endian samples).
/// Counts above 65535 do not fit the format and are an error.
pub fn save_count(image: &CountImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(&v) = image.data().iter().find(|&&v| v > MAX_SUPPORTED_MAXVAL) {
        return Err(Error::ValueOutOfRange(format!(
            "count {v} exceeds the 16-bit PGM maximum {MAX_SUPPORTED_MAXVAL}"
        )));
    }
    let mut out = Vec::with_capacity(32 + 2 * image.data().len());
    write!(out, "P5\n{} {}\n{}\n", image.width(), image.height(), MAX_SUPPORTED_MAXVAL)
        .expect("write to vec");
    for &v in image.data() {
        out.extend_from_slice(&(v as u16).to_be_bytes());
    }
    atomic_write(path, &out)
}

/// Rounds intensities to the nearest integer and writes a binary PGM,
/// 8-bit when the rounded range fits in a byte and 16-bit otherwise.
/// Rounded values above 65535 are an error.
pub fn save_intensity_rounded(image: &IntensityImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rounded: Vec<u32> = image
        .data()
        .iter()
        .map(|&v| {
            let r = v.round();
            if r > MAX_SUPPORTED_MAXVAL as f64 {
                Err(Error::ValueOutOfRange(format!(
                    "intensity {v} rounds past the 16-bit PGM maximum"
                )))
            } else {
                Ok(r as u32)
            }
        })
        .collect::<Result<_>>()?;
    let wide = rounded.iter().any(|&v| v > 255);
    let maxval = if wide { MAX_SUPPORTED_MAXVAL } else { 255 };
    let mut out = Vec::with_capacity(32 + 2 * rounded.len());
    write!(out, "P5\n{} {}\n{}\n", image.width(), image.height(), maxval).expect("write to vec");
    if wide {
        for &v in &rounded {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
    } else {
        out.extend(rounded.iter().map(|&v| v as u8));
    }
    atomic_write(path, &out)
}
