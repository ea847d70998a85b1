//! Patch corpus assembly and intensity normalization.
//!
//! The prior is empirical: every overlapping patch of a set of clean
//! training images. Before clustering, the corpus is normalized by its
//! grand mean intensity so the model is indexed by *shape* rather than
//! absolute brightness; at query time each noisy patch is likewise reduced
//! to its own mean and a shape.

use crate::error::{Error, Result};
use crate::image::IntensityImage;
use crate::patch::{extract_patches, Patch};
use crate::vecmath::compensated_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A bag of same-sized training patches.
///
/// `mean_intensity` is 0 until [`normalize_corpus`] runs, after which it
/// records the grand mean the patches were divided by.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchCorpus {
    side: usize,
    patches: Vec<Patch>,
    mean_intensity: f64,
}

impl PatchCorpus {
    /// Builds a corpus directly from patches, for callers that assemble
    /// their own training set instead of slicing images. The corpus starts
    /// un-normalized (`mean_intensity` = 0).
    pub fn from_patches(side: usize, patches: Vec<Patch>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("patch side", "must be positive"));
        }
        if patches.is_empty() {
            return Err(Error::EmptyInput("corpus needs at least one patch".into()));
        }
        if let Some(bad) = patches.iter().find(|p| p.side() != side) {
            return Err(Error::DimensionMismatch {
                context: "corpus patch side",
                left: bad.side(),
                right: side,
            });
        }
        Ok(PatchCorpus {
            side,
            patches,
            mean_intensity: 0.0,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn mean_intensity(&self) -> f64 {
        self.mean_intensity
    }
}

/// Collects every overlapping patch from each usable image, optionally
/// capped to a random subset.
///
/// Images smaller than the patch are skipped; it is an error when none
/// remain. With `cap = Some(n)` and more than `n` patches available, a
/// uniform sample of exactly `n` is kept (seeded, so reproducible), in
/// their original extraction order.
pub fn ingest_corpus(
    images: &[IntensityImage],
    side: usize,
    cap: Option<usize>,
    seed: u64,
) -> Result<PatchCorpus> {
    if side == 0 {
        return Err(Error::invalid("patch side", "must be positive"));
    }
    if let Some(0) = cap {
        return Err(Error::invalid("cap", "must be positive when given"));
    }
    let mut patches = Vec::new();
    let mut usable = 0usize;
    for image in images {
        if image.width() < side || image.height() < side {
            continue;
        }
        usable += 1;
        patches.extend(extract_patches(image, side)?.into_iter().map(|(p, _)| p));
    }
    if usable == 0 {
        return Err(Error::EmptyInput(format!(
            "no image among {} is at least {side}x{side}",
            images.len()
        )));
    }
    if let Some(cap) = cap {
        if cap < patches.len() {
            // Partial Fisher-Yates: after `cap` swap steps the prefix holds a
            // uniform sample of the index range.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut indices: Vec<usize> = (0..patches.len()).collect();
            for i in 0..cap {
                let j = rng.gen_range(i..indices.len());
                indices.swap(i, j);
            }
            let mut keep = indices[..cap].to_vec();
            keep.sort_unstable();
            patches = keep.into_iter().map(|i| patches[i].clone()).collect();
        }
    }
    Ok(PatchCorpus {
        side,
        patches,
        mean_intensity: 0.0,
    })
}

/// Divides every patch element by the corpus grand mean and records that
/// mean. An all-zero corpus has no meaningful scale and is rejected.
pub fn normalize_corpus(corpus: PatchCorpus) -> Result<PatchCorpus> {
    let total = compensated_sum(
        corpus
            .patches
            .iter()
            .flat_map(|p| p.values().iter().copied()),
    );
    let count = (corpus.patches.len() * corpus.dim()) as f64;
    if corpus.patches.is_empty() {
        return Err(Error::EmptyInput("corpus has no patches".into()));
    }
    let mean = total / count;
    if mean == 0.0 {
        return Err(Error::EmptyInput("corpus is entirely zero".into()));
    }
    let side = corpus.side;
    let patches = corpus
        .patches
        .into_iter()
        .map(|p| {
            let values = p.values().iter().map(|&v| v / mean).collect();
            Patch::new(side, values)
        })
        .collect::<Result<_>>()?;
    Ok(PatchCorpus {
        side,
        patches,
        mean_intensity: mean,
    })
}
