//! Reflectance/illumination decomposition, `img ≈ R ⊙ L`.
//!
//! Two providers: [`ClassicalDecomposer`], a deterministic blurred
//! max-channel estimator that needs no assets, and [`NetworkDecomposer`], a
//! small convolutional illumination estimator loaded from a checkpoint.
//! Both are differentiable through [`Decomposer::reflectance_vjp`], which is
//! what lets the color loss push gradients back onto the image.

mod classical;
mod network;

use std::sync::Arc;

use crate::error::Result;
use crate::image::ImageTensor;

pub use classical::{classical_decompose, ClassicalDecomposer};
pub use network::{
    load_decomposer_network, train_decomposer_network, NetworkDecomposer, NetworkTrainingConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Same channel count as the input, values in `[0,1]`.
    pub reflectance: ImageTensor,
    /// Single channel, values in `(0,1]`.
    pub illumination: ImageTensor,
}

impl Decomposition {
    /// `R ⊙ L` with `L` broadcast over channels.
    pub fn recompose(&self) -> ImageTensor {
        let c = self.reflectance.channels();
        let l = self.illumination.data();
        let mut out = self.reflectance.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v *= l[i / c];
        }
        out
    }
}

pub trait Decomposer: Send + Sync {
    fn name(&self) -> &str;

    fn decompose(&self, img: &ImageTensor) -> Result<Decomposition>;

    /// Vector-Jacobian product of the reflectance map: given `∂ℓ/∂R`,
    /// return `∂ℓ/∂img`.
    fn reflectance_vjp(&self, img: &ImageTensor, grad_r: &ImageTensor) -> Result<ImageTensor>;

    fn differentiable(&self) -> bool {
        true
    }

    /// Relative reconstruction error `‖R⊙L − img‖/‖img‖` this provider
    /// guarantees on pixels at or above its illumination floor.
    fn reconstruction_tolerance(&self) -> f64;
}

pub type DecomposerHandle = Arc<dyn Decomposer>;

/// Relative reconstruction error over pixels whose channels are all `≥ floor`.
pub fn reconstruction_error(img: &ImageTensor, d: &Decomposition, floor: f64) -> f64 {
    let rec = d.recompose();
    let c = img.channels();
    let (mut num, mut den) = (0.0, 0.0);
    for (px, rpx) in img.data().chunks_exact(c).zip(rec.data().chunks_exact(c)) {
        if px.iter().all(|v| *v >= floor) {
            for (a, b) in px.iter().zip(rpx) {
                num += (a - b) * (a - b);
                den += a * a;
            }
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Largest channel per pixel and which channel it came from.
pub(crate) fn max_channel(img: &ImageTensor) -> (Vec<f64>, Vec<usize>) {
    let c = img.channels();
    img.data()
        .chunks_exact(c)
        .map(|px| {
            let mut best = 0;
            for k in 1..c {
                if px[k] > px[best] {
                    best = k;
                }
            }
            (px[best], best)
        })
        .unzip()
}

/// Separable Gaussian blur with clamp-to-edge sampling, plus its transpose.
#[derive(Debug, Clone)]
pub(crate) struct GaussianBlur {
    weights: Vec<f64>,
    radius: usize,
}

impl GaussianBlur {
    pub fn new(sigma: f64) -> Self {
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        let raw: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        Self {
            weights: raw.into_iter().map(|w| w / sum).collect(),
            radius,
        }
    }

    fn tap(&self, i: usize, k: usize, n: usize) -> usize {
        (i as isize + k as isize - self.radius as isize).clamp(0, n as isize - 1) as usize
    }

    fn pass(&self, src: &[f64], h: usize, w: usize, horizontal: bool, transpose: bool) -> Vec<f64> {
        let mut dst = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                for (k, wk) in self.weights.iter().enumerate() {
                    let j = if horizontal {
                        y * w + self.tap(x, k, w)
                    } else {
                        self.tap(y, k, h) * w + x
                    };
                    if transpose {
                        dst[j] += wk * src[y * w + x];
                    } else {
                        dst[y * w + x] += wk * src[j];
                    }
                }
            }
        }
        dst
    }

    pub fn apply(&self, src: &[f64], h: usize, w: usize) -> Vec<f64> {
        let tmp = self.pass(src, h, w, true, false);
        self.pass(&tmp, h, w, false, false)
    }

    pub fn apply_transpose(&self, src: &[f64], h: usize, w: usize) -> Vec<f64> {
        let tmp = self.pass(src, h, w, false, true);
        self.pass(&tmp, h, w, true, true)
    }
}
