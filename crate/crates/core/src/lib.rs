//! Training-free low-light image enhancement by attribute-guided diffusion
//! sampling.
//!
//! A low-light input is lightly noised for a few diffusion steps and then
//! denoised with a pre-trained (or toy, or analytic) noise predictor whose
//! reverse-step means are shifted by the gradient of three attribute
//! losses: exposure against a spatially varying target map, Fourier phase
//! against the input, and Retinex reflectance against the input.
//!
//! | module | contents |
//! |---|---|
//! | [`diffusion`] | noise schedules, forward noising, `x̂₀`, posterior |
//! | [`denoiser`] | `ε_θ` providers: analytic Gaussian, toy conv net, external adapter |
//! | [`attributes`] | exposure / phase / color losses and their gradients |
//! | [`retinex`] | reflectance–illumination decomposers |
//! | [`sampler`] | guided reverse sampling with dynamic scale and steps |
//! | [`metrics`] | PSNR, SSIM, mean exposure |
//! | [`pipeline`] | image I/O, configuration, batch runs and manifests |
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod attributes;
pub(crate) mod checkpoint;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod image;
pub mod metrics;
pub(crate) mod nn;
pub mod pipeline;
pub mod retinex;
pub mod sampler;

pub use error::{Error, Result};
pub use image::{ColorSpace, ImageTensor, Range};
