//! One-class anomaly detection of Parkinsonian fixation patterns from
//! spatiotemporal eye-video slices.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: tensors, layers with reverse-mode gradients, Adam, gradient
//!   checking and a radix-2 2-D DFT.
//! - [`dataio`]: PGM frames, center-slice extraction, augmentation, manifests.
//! - [`synthgen`]: synthetic tremor / drift fixation slices.
//! - [`ganomaly`]: encoder-decoder-encoder generator with a discriminator.
//! - [`anogan`]: plain GAN baseline scored by latent inversion.
//! - [`stats`]: fold planning, ROC/AUC, thresholds, one-way ANOVA.

pub mod anogan;
pub mod arch;
pub mod dataio;
pub mod error;
pub mod ganomaly;
pub mod numerics;
pub mod seed;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
pub use numerics::tensor::Tensor;
