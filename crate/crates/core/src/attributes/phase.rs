//! Fourier phase agreement between two images.
//!
//! For `X = DFT₂(x)` and phase `P_k = arg X_k`, a small change in `x_n`
//! moves the phase by `∂P_k/∂x_n = Im(W_kn / X_k)` with the DFT kernel
//! `W_kn = e^{−2πi⟨k,n⟩/N}`. The gradient of `Σ_k f(P_k − Q_k)` is then
//! `Im(DFT₂(c))` with `c_k = f′(P_k − Q_k) / X_k`, one extra transform.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Mean squared difference of raw phase angles.
    Raw,
    /// Mean of `|e^{iP} − e^{iQ}|² = 2 − 2cos(P − Q)`; wrap-safe.
    #[default]
    Phasor,
}

/// Coefficients below this fraction of the largest magnitude have no
/// well-defined phase and are treated as phase 0 with zero gradient.
const DEGENERATE_MAGNITUDE: f64 = 1e-10;
/// Imaginary parts this small relative to the magnitude are rounding noise
/// on bins that are real for real input.
const REAL_AXIS_SNAP: f64 = 1e-12;

/// In-place 2D DFT (unnormalized, forward kernel) of an `h×w` grid.
pub fn dft2(buf: &mut [Complex<f64>], h: usize, w: usize) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(w).process(buf);
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}

/// Per-channel spectra of an image, each `h·w` long.
pub fn spectra(img: &ImageTensor) -> Vec<Vec<Complex<f64>>> {
    let (h, w, _) = img.shape();
    (0..img.channels())
        .map(|c| {
            let mut buf: Vec<Complex<f64>> = img
                .channel(c)
                .into_iter()
                .map(|v| Complex::new(v, 0.0))
                .collect();
            dft2(&mut buf, h, w);
            buf
        })
        .collect()
}

fn max_norm(spec: &[Complex<f64>]) -> f64 {
    spec.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Phase of a coefficient with the degenerate-magnitude and real-axis
/// conventions applied. Returns `(phase, well_defined)`.
fn phase_of(z: Complex<f64>, scale: f64) -> (f64, bool) {
    let mag = z.norm();
    if mag <= DEGENERATE_MAGNITUDE * scale || mag == 0.0 {
        return (0.0, false);
    }
    let im = if z.im.abs() <= REAL_AXIS_SNAP * mag {
        0.0
    } else {
        z.im
    };
    (im.atan2(z.re), true)
}

/// Phase angles per channel, computed once for a fixed reference image.
#[derive(Debug, Clone)]
pub struct PhaseSpectrum {
    height: usize,
    width: usize,
    phases: Vec<Vec<f64>>,
}

impl PhaseSpectrum {
    pub fn of(img: &ImageTensor) -> Self {
        let phases = spectra(img)
            .iter()
            .map(|spec| {
                let scale = max_norm(spec);
                spec.iter().map(|z| phase_of(*z, scale).0).collect()
            })
            .collect();
        Self {
            height: img.height(),
            width: img.width(),
            phases,
        }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.phases[c]
    }

    /// Phase-only reconstruction: inverse DFT with every amplitude set to 1.
    pub fn reconstruct(&self) -> ImageTensor {
        let (h, w) = (self.height, self.width);
        let n = (h * w) as f64;
        let mut out = ImageTensor::zeros(h, w, self.phases.len(), crate::image::Range::Signed);
        for (c, ph) in self.phases.iter().enumerate() {
            // Inverse transform via conj(DFT(conj(·)))/N.
            let mut buf: Vec<Complex<f64>> =
                ph.iter().map(|p| Complex::from_polar(1.0, -p)).collect();
            dft2(&mut buf, h, w);
            for (i, z) in buf.iter().enumerate() {
                out.set(i / w, i % w, c, z.re / n);
            }
        }
        out
    }
}

fn check(x: &ImageTensor, target: &PhaseSpectrum) -> Result<()> {
    let want = (target.height, target.width, target.phases.len());
    if x.shape() != want {
        return Err(crate::Error::shape(
            crate::image::format_shape(want),
            crate::image::format_shape(x.shape()),
        ));
    }
    Ok(())
}

/// Phase loss between `x0hat` and `y0`.
pub fn phase_loss(x0hat: &ImageTensor, y0: &ImageTensor, mode: PhaseMode) -> Result<f64> {
    x0hat.check_same_shape(y0)?;
    Ok(phase_loss_and_grad(x0hat, &PhaseSpectrum::of(y0), mode)?.0)
}

/// Loss against a precomputed target spectrum and its gradient w.r.t. `x0hat`.
pub fn phase_loss_and_grad(
    x0hat: &ImageTensor,
    target: &PhaseSpectrum,
    mode: PhaseMode,
) -> Result<(f64, ImageTensor)> {
    check(x0hat, target)?;
    let (h, w, channels) = x0hat.shape();
    let count = (h * w * channels) as f64;
    let mut loss = 0.0;
    let mut grad = x0hat.map(|_| 0.0);
    for (c, spec) in spectra(x0hat).into_iter().enumerate() {
        let scale = max_norm(&spec);
        let mut coef = vec![Complex::new(0.0, 0.0); spec.len()];
        for (k, z) in spec.iter().enumerate() {
            let (p, defined) = phase_of(*z, scale);
            let delta = p - target.phases[c][k];
            let (f, df) = match mode {
                PhaseMode::Raw => (delta * delta, 2.0 * delta),
                PhaseMode::Phasor => (2.0 - 2.0 * delta.cos(), 2.0 * delta.sin()),
            };
            loss += f;
            if defined {
                coef[k] = Complex::new(df / count, 0.0) / z;
            }
        }
        dft2(&mut coef, h, w);
        for (i, z) in coef.iter().enumerate() {
            grad.set(i / w, i % w, c, z.im);
        }
    }
    Ok((loss / count, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Range;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn fft_matches_direct_dft() {
        let (h, w) = (3, 5);
        let data: Vec<f64> = (0..15).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let mut buf: Vec<Complex<f64>> = data.iter().map(|v| Complex::new(*v, 0.0)).collect();
        dft2(&mut buf, h, w);
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ang =
                            -2.0 * PI * ((ky * y) as f64 / h as f64 + (kx * x) as f64 / w as f64);
                        acc += Complex::from_polar(data[y * w + x], ang);
                    }
                }
                assert!((acc - buf[ky * w + kx]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_by_two_hand_oracle() {
        // x = [1, 2; 3, 5]: X = [11, -3; -5, 1], phases [0, π; π, 0].
        // y = [4, 1; 1, 1]: Y = [7, 3; 3, 3],    phases all 0.
        let x = ImageTensor::new(2, 2, 1, Range::Unit, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let y = ImageTensor::new(2, 2, 1, Range::Unit, vec![4.0, 1.0, 1.0, 1.0]).unwrap();
        let raw = phase_loss(&x, &y, PhaseMode::Raw).unwrap();
        assert_relative_eq!(raw, 2.0 * PI * PI / 4.0, epsilon = 1e-10);
        let phasor = phase_loss(&x, &y, PhaseMode::Phasor).unwrap();
        assert_relative_eq!(phasor, 2.0 * 4.0 / 4.0, epsilon = 1e-10);
    }

    #[test]
    fn identical_and_scaled_inputs_have_zero_loss() {
        let x = ImageTensor::from_fn(6, 7, 3, Range::Unit, |y, x, c| {
            0.5 + 0.4 * ((y * 3 + x * 5 + c) as f64).sin()
        });
        for mode in [PhaseMode::Raw, PhaseMode::Phasor] {
            assert!(phase_loss(&x, &x, mode).unwrap().abs() < 1e-20);
            assert!(phase_loss(&x.scale(3.7), &x, mode).unwrap() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = ImageTensor::zeros(4, 4, 3, Range::Unit);
        let b = ImageTensor::zeros(4, 5, 3, Range::Unit);
        assert!(matches!(
            phase_loss(&a, &b, PhaseMode::Phasor),
            Err(crate::Error::Shape { .. })
        ));
    }

    #[test]
    fn phase_only_reconstruction_of_impulse_is_impulse() {
        let mut img = ImageTensor::zeros(4, 4, 1, Range::Unit);
        img.set(0, 0, 0, 0.8);
        let rec = PhaseSpectrum::of(&img).reconstruct();
        assert_relative_eq!(rec.get(0, 0, 0), 1.0, epsilon = 1e-12);
        assert!(rec.data()[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
