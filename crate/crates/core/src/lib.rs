//! Patch-based denoising of photon-limited (Poisson) grayscale images.
//!
//! The estimator treats a large corpus of natural-image patches as an
//! empirical prior. Each noisy patch is denoised by a minimum mean squared
//! error average over cluster centroids of that corpus, weighted by the
//! Poisson likelihood of the observed counts under each centroid. A forest
//! of randomized k-d trees plus a K-nearest-neighbor graph over centroids
//! finds the high-likelihood clusters without touching the whole model, and
//! an early-termination rule stops once the weight mass has stabilized.
//!
//! The crate splits into three layers:
//!
//! * primitives — [`image`], [`patch`], [`poisson`], [`noise`], [`metrics`],
//!   and the [`pgm`]/[`pfm`] file formats;
//! * model building — [`corpus`], [`kmeans`], [`kdforest`], [`knngraph`],
//!   assembled and persisted by [`index`];
//! * denoising — [`denoise`] for single patches, [`pipeline`] for whole
//!   images and PSNR evaluation runs.
//!
//! Every randomized step is driven by an explicit seed and produces
//! bit-identical results across runs and worker counts.

pub mod corpus;
pub mod denoise;
pub mod error;
pub mod image;
pub mod index;
pub mod kdforest;
pub mod kmeans;
pub mod knngraph;
pub mod metrics;
pub mod noise;
pub mod patch;
pub mod pfm;
pub mod pgm;
pub mod pipeline;
pub mod poisson;
pub mod seed;
mod vecmath;

pub use error::{Error, Result};
