//! Deterministic double-precision numerics: tensors, layers with exact
//! reverse-mode gradients, Adam, finite-difference gradient checks and a
//! radix-2 2-D DFT.

pub mod adam;
pub mod fft;
mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fft::{dft2d, dft2d_magnitude};
pub use gradcheck::{check_gradients, grad_check, GradCheckConfig, GradCheckReport, ScalarLoss};
pub use layers::LayerSpec;
pub use network::{Gradients, Network, Trace};
pub use tensor::Tensor;
