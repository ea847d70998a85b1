//! Deterministic synthetic scenes for tests and benchmarks.
//!
//! [`synth_scene`] composes smooth gradients, sinusoidal textures, Gaussian
//! blobs, and flat geometric shapes into a clean intensity image with the
//! kind of structure patch models feed on: smooth regions, oriented edges,
//! and repeating texture. Everything is a closed-form function of the pixel
//! coordinates; the RNG only picks scene parameters, so two calls with the
//! same seed produce bitwise-identical buffers and there is no per-pixel
//! noise to confuse a denoising benchmark.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Intensity floor: scenes never reach exact zero, so Poisson rates stay
/// positive everywhere and PSNR references are well behaved.
const FLOOR: f64 = 0.05;

struct Blob {
    row: f64,
    col: f64,
    sigma: f64,
    amplitude: f64,
}

struct Rect {
    top: usize,
    left: usize,
    height: usize,
    width: usize,
    level: f64,
}

struct Disc {
    row: f64,
    col: f64,
    radius: f64,
    level: f64,
}

struct Wave {
    kr: f64,
    kc: f64,
    phase: f64,
    amplitude: f64,
}

/// Renders a `width`×`height` clean scene, row-major.
///
/// # Panics
///
/// Panics if `width` or `height` is zero.
pub fn synth_scene(width: usize, height: usize, seed: u64) -> Vec<f64> {
    assert!(width > 0 && height > 0, "scene dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = width as f64;
    let h = height as f64;

    // Smooth background: offset, tilted plane, and two long-wavelength waves.
    let offset = rng.gen_range(0.8..1.6);
    let tilt_r = rng.gen_range(-0.6..0.6) / h;
    let tilt_c = rng.gen_range(-0.6..0.6) / w;
    let waves: Vec<Wave> = (0..2)
        .map(|_| Wave {
            kr: rng.gen_range(1.0..3.0) * std::f64::consts::TAU / h,
            kc: rng.gen_range(1.0..3.0) * std::f64::consts::TAU / w,
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            amplitude: rng.gen_range(0.1..0.35),
        })
        .collect();

    // Fine texture: higher-frequency waves confined to a horizontal band.
    let texture: Vec<Wave> = (0..2)
        .map(|_| Wave {
            kr: rng.gen_range(0.4..1.1),
            kc: rng.gen_range(0.4..1.1),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            amplitude: rng.gen_range(0.15..0.4),
        })
        .collect();
    let band_top = rng.gen_range(0.0..0.5) * h;
    let band_bottom = band_top + rng.gen_range(0.2..0.4) * h;

    let blobs: Vec<Blob> = (0..rng.gen_range(3..=6))
        .map(|_| Blob {
            row: rng.gen_range(0.0..h),
            col: rng.gen_range(0.0..w),
            sigma: rng.gen_range(0.04..0.15) * w.min(h),
            amplitude: rng.gen_range(0.4..1.4),
        })
        .collect();

    let rects: Vec<Rect> = (0..rng.gen_range(2..=3))
        .map(|_| {
            let rh = rng.gen_range(height / 8..height / 3).max(1);
            let rw = rng.gen_range(width / 8..width / 3).max(1);
            Rect {
                top: rng.gen_range(0..height.saturating_sub(rh).max(1)),
                left: rng.gen_range(0..width.saturating_sub(rw).max(1)),
                height: rh,
                width: rw,
                level: rng.gen_range(0.3..2.4),
            }
        })
        .collect();

    let discs: Vec<Disc> = (0..rng.gen_range(1..=2))
        .map(|_| Disc {
            row: rng.gen_range(0.0..h),
            col: rng.gen_range(0.0..w),
            radius: rng.gen_range(0.06..0.2) * w.min(h),
            level: rng.gen_range(0.3..2.4),
        })
        .collect();

    let mut data = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let rf = r as f64;
            let cf = c as f64;
            let mut v = offset + tilt_r * rf + tilt_c * cf;
            for wave in &waves {
                v += wave.amplitude * (wave.kr * rf + wave.kc * cf + wave.phase).sin();
            }
            if rf >= band_top && rf < band_bottom {
                for wave in &texture {
                    v += wave.amplitude * (wave.kr * rf + wave.phase).sin()
                        * (wave.kc * cf + wave.phase).cos();
                }
            }
            // Flat shapes overwrite the background: hard edges, no blending.
            for rect in &rects {
                if r >= rect.top
                    && r < rect.top + rect.height
                    && c >= rect.left
                    && c < rect.left + rect.width
                {
                    v = rect.level;
                }
            }
            for disc in &discs {
                let dr = rf - disc.row;
                let dc = cf - disc.col;
                if dr * dr + dc * dc <= disc.radius * disc.radius {
                    v = disc.level;
                }
            }
            // Blobs add on top of whatever is underneath.
            for blob in &blobs {
                let dr = rf - blob.row;
                let dc = cf - blob.col;
                let d2 = dr * dr + dc * dc;
                v += blob.amplitude * (-d2 / (2.0 * blob.sigma * blob.sigma)).exp();
            }
            data.push(v.max(FLOOR));
        }
    }
    data
}
