//! Full-reference quality metrics and exposure statistics.
//!
//! All functions expect images on the `[0,1]` scale. SSIM is computed on
//! luminance with an 11×11 Gaussian window (σ = 1.5), `K₁ = 0.01`,
//! `K₂ = 0.03`, averaged over the positions where the window fits entirely
//! inside the image.

use serde::{Deserialize, Serialize};

use crate::attributes::luma;
use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Peak signal-to-noise ratio in dB with peak 1. Identical images give
/// `f64::INFINITY`.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h×w` plane.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(i, wk)| wk * src[y * w + x + i])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(i, wk)| wk * tmp[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean structural similarity of the luminance planes of `a` and `b`.
pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    let (h, w, _) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Size {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let (x, y) = (luma(a), luma(b));
    let k = gaussian_window();
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(u, v)| u * v).collect() };
    let mx = filter_valid(&x, h, w, &k);
    let my = filter_valid(&y, h, w, &k);
    let mxx = filter_valid(&prod(&x, &x), h, w, &k);
    let myy = filter_valid(&prod(&y, &y), h, w, &k);
    let mxy = filter_valid(&prod(&x, &y), h, w, &k);
    let (c1, c2) = (K1 * K1, K2 * K2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// Global mean luminance.
pub fn mean_exposure(img: &ImageTensor) -> f64 {
    let l = luma(img);
    l.iter().sum::<f64>() / l.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub id: String,
    /// `None` when the images are identical (infinite PSNR).
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub mean_exposure: f64,
}

impl MetricReport {
    /// Score `output` against `reference`. SSIM is omitted for images
    /// smaller than its window.
    pub fn compute(id: &str, output: &ImageTensor, reference: &ImageTensor) -> Result<Self> {
        let p = psnr(output, reference)?;
        let s = match ssim(output, reference) {
            Ok(v) => Some(v),
            Err(Error::Size { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            id: id.to_owned(),
            psnr: p.is_finite().then_some(p),
            ssim: s,
            mean_exposure: mean_exposure(output),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Range;

    #[test]
    fn psnr_trivial_cases() {
        let zeros = ImageTensor::zeros(4, 4, 3, Range::Unit);
        let ones = ImageTensor::filled(4, 4, 3, Range::Unit, 1.0);
        assert_eq!(psnr(&zeros, &zeros).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&zeros, &ones).unwrap(), 0.0);
        let tenth = ImageTensor::filled(4, 4, 3, Range::Unit, 0.1);
        assert!((psnr(&zeros, &tenth).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_identical_and_inverted() {
        let a = ImageTensor::from_fn(16, 16, 3, Range::Unit, |y, x, _| {
            ((x / 3 + y / 2) % 2) as f64
        });
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let inv = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &inv).unwrap() < 0.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = ImageTensor::zeros(10, 40, 3, Range::Unit);
        assert!(matches!(ssim(&a, &a), Err(Error::Size { .. })));
    }

    #[test]
    fn exposure_extremes() {
        assert_eq!(
            mean_exposure(&ImageTensor::zeros(3, 3, 3, Range::Unit)),
            0.0
        );
        let white = ImageTensor::filled(3, 3, 3, Range::Unit, 1.0);
        assert!((mean_exposure(&white) - 1.0).abs() < 1e-15);
    }
}
