//! Attribute losses that steer sampling: exposure, structure (Fourier
//! phase) and color (Retinex reflectance), plus their weighted sum and its
//! gradient with respect to the clean-image estimate `x̂₀`.
//!
//! All losses take images on the `[0,1]` scale. Inputs are not clamped, so
//! gradients stay informative when an intermediate estimate overshoots.

mod color;
mod exposure;
mod phase;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Range};
use crate::retinex::Decomposer;

pub use color::{color_loss, color_loss_and_grad};
pub use exposure::{
    exposure_loss, exposure_loss_and_grad, exposure_map, exposure_map_with_sign, ExposureMap,
    ExposureSign, DEFAULT_EXPOSURE_AMPLITUDE, DEFAULT_EXPOSURE_BASE, DEFAULT_POOL_SIZE,
};
pub use phase::{dft2, phase_loss, phase_loss_and_grad, spectra, PhaseMode, PhaseSpectrum};

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Single-channel luminance `0.299R + 0.587G + 0.114B`.
pub fn luminance(img: &ImageTensor) -> Result<ImageTensor> {
    if img.channels() != 3 {
        return Err(Error::Channel(format!(
            "luminance needs RGB input, got {} channel(s)",
            img.channels()
        )));
    }
    ImageTensor::new(img.height(), img.width(), 1, img.range(), luma(img))
}

/// Luminance per pixel; single-channel images pass through.
pub(crate) fn luma(img: &ImageTensor) -> Vec<f64> {
    if img.channels() == 1 {
        return img.data().to_vec();
    }
    img.data()
        .chunks_exact(3)
        .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
        .collect()
}

/// Pull a per-pixel luminance gradient back onto the image channels.
pub(crate) fn luma_backward(img: &ImageTensor, g: &[f64]) -> ImageTensor {
    if img.channels() == 1 {
        return img.with_data(g.to_vec());
    }
    img.with_data(
        g.iter()
            .flat_map(|gi| LUMA_WEIGHTS.iter().map(move |w| w * gi))
            .collect(),
    )
}

/// Relative weights `(λ₁, λ₂, λ₃)` for exposure, structure and color.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lambdas {
    pub exposure: f64,
    pub structure: f64,
    pub color: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Self {
            exposure: 1000.0,
            structure: 10.0,
            color: 0.03,
        }
    }
}

impl Lambdas {
    pub fn as_array(&self) -> [f64; 3] {
        [self.exposure, self.structure, self.color]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toggles {
    pub exposure: bool,
    pub structure: bool,
    pub color: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self::all()
    }
}

impl Toggles {
    pub fn all() -> Self {
        Self {
            exposure: true,
            structure: true,
            color: true,
        }
    }

    pub fn none() -> Self {
        Self {
            exposure: false,
            structure: false,
            color: false,
        }
    }

    pub fn exposure_only() -> Self {
        Self {
            exposure: true,
            ..Self::none()
        }
    }

    pub fn any(&self) -> bool {
        self.exposure || self.structure || self.color
    }
}

/// Knobs for the attribute losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeSettings {
    pub lambdas: Lambdas,
    pub toggles: Toggles,
    pub exposure_base: f64,
    pub exposure_amplitude: f64,
    pub exposure_sign: ExposureSign,
    pub pool_size: usize,
    pub phase_mode: PhaseMode,
}

impl Default for AttributeSettings {
    fn default() -> Self {
        Self {
            lambdas: Lambdas::default(),
            toggles: Toggles::all(),
            exposure_base: DEFAULT_EXPOSURE_BASE,
            exposure_amplitude: DEFAULT_EXPOSURE_AMPLITUDE,
            exposure_sign: ExposureSign::default(),
            pool_size: DEFAULT_POOL_SIZE,
            phase_mode: PhaseMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeLossReport {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub lambdas: Lambdas,
    pub total: f64,
    /// `∂total/∂x̂₀` on the `[0,1]` scale.
    pub grad: ImageTensor,
}

/// Targets derived once from the low-light input and reused every step.
pub struct AttributeTargets<'a> {
    settings: AttributeSettings,
    exposure: ExposureMap,
    phase: Option<PhaseSpectrum>,
    reflectance: Option<ImageTensor>,
    decomposer: &'a dyn Decomposer,
}

impl<'a> AttributeTargets<'a> {
    /// Compute `E`, the phase spectrum and the reflectance of `y0` (in `[0,1]`).
    pub fn new(
        y0: &ImageTensor,
        settings: AttributeSettings,
        decomposer: &'a dyn Decomposer,
    ) -> Result<Self> {
        let exposure = exposure_map_with_sign(
            y0,
            settings.exposure_amplitude,
            settings.exposure_base,
            settings.exposure_sign,
        )?;
        Self::with_exposure_map(y0, exposure, settings, decomposer)
    }

    /// Like [`AttributeTargets::new`] with a caller-supplied exposure map.
    pub fn with_exposure_map(
        y0: &ImageTensor,
        exposure: ExposureMap,
        settings: AttributeSettings,
        decomposer: &'a dyn Decomposer,
    ) -> Result<Self> {
        if settings.pool_size == 0 {
            return Err(Error::Config("pool size must be positive".into()));
        }
        if settings.toggles.any() && settings.lambdas.as_array().iter().all(|l| *l == 0.0) {
            log::warn!("all attribute weights are zero; guidance is a no-op");
        }
        let phase = settings.toggles.structure.then(|| PhaseSpectrum::of(y0));
        let reflectance = if settings.toggles.color {
            Some(decomposer.decompose(y0)?.reflectance)
        } else {
            None
        };
        Ok(Self {
            settings,
            exposure,
            phase,
            reflectance,
            decomposer,
        })
    }

    pub fn exposure_map(&self) -> &ExposureMap {
        &self.exposure
    }

    pub fn settings(&self) -> &AttributeSettings {
        &self.settings
    }

    /// Weighted losses and the gradient of their sum at `x0hat` (in `[0,1]`).
    pub fn evaluate(&self, x0hat: &ImageTensor) -> Result<AttributeLossReport> {
        let s = &self.settings;
        let lambdas = s.lambdas;
        let mut grad = x0hat.map(|_| 0.0).with_range(Range::Unit);
        let mut add = |g: &ImageTensor, w: f64| {
            for (a, b) in grad.data_mut().iter_mut().zip(g.data()) {
                *a += w * b;
            }
        };
        let (mut l1, mut l2, mut l3) = (0.0, 0.0, 0.0);
        if s.toggles.exposure {
            let (l, g) = exposure_loss_and_grad(x0hat, &self.exposure, s.pool_size)?;
            l1 = l;
            add(&g, lambdas.exposure);
        }
        if let Some(target) = &self.phase {
            let (l, g) = phase_loss_and_grad(x0hat, target, s.phase_mode)?;
            l2 = l;
            add(&g, lambdas.structure);
        }
        if let Some(target) = &self.reflectance {
            let (l, g) = color_loss_and_grad(x0hat, target, self.decomposer)?;
            l3 = l;
            add(&g, lambdas.color);
        }
        Ok(AttributeLossReport {
            l1,
            l2,
            l3,
            lambdas,
            total: lambdas.exposure * l1 + lambdas.structure * l2 + lambdas.color * l3,
            grad,
        })
    }
}

/// One-shot evaluation of the aggregate loss and its gradient.
pub fn total_loss_and_grad(
    x0hat: &ImageTensor,
    y0: &ImageTensor,
    exposure: &ExposureMap,
    lambdas: Lambdas,
    toggles: Toggles,
    decomposer: &dyn Decomposer,
) -> Result<AttributeLossReport> {
    x0hat.check_same_shape(y0)?;
    let settings = AttributeSettings {
        lambdas,
        toggles,
        ..AttributeSettings::default()
    };
    AttributeTargets::with_exposure_map(y0, exposure.clone(), settings, decomposer)?.evaluate(x0hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retinex::ClassicalDecomposer;

    #[test]
    fn luminance_coefficients() {
        let px = |r, g, b| ImageTensor::new(1, 1, 3, Range::Unit, vec![r, g, b]).unwrap();
        assert!((luminance(&px(1.0, 1.0, 1.0)).unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(luminance(&px(0.0, 1.0, 0.0)).unwrap()[0], 0.587);
        for g in [0.0, 0.25, 0.9] {
            assert!((luminance(&px(g, g, g)).unwrap()[0] - g).abs() < 1e-15);
        }
        let gray = ImageTensor::zeros(2, 2, 1, Range::Unit);
        assert!(matches!(luminance(&gray), Err(Error::Channel(_))));
    }

    #[test]
    fn all_toggles_off_is_zero() {
        let y0 = ImageTensor::from_fn(8, 8, 3, Range::Unit, |y, x, c| {
            0.05 + 0.01 * (y + 2 * x + c) as f64
        });
        let x = y0.map(|v| 1.0 - v);
        let e = exposure_map(&y0, 0.25, 0.46).unwrap();
        let dec = ClassicalDecomposer::default();
        let r =
            total_loss_and_grad(&x, &y0, &e, Lambdas::default(), Toggles::none(), &dec).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.grad.data().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn exposure_only_matched_is_zero() {
        let y0 = ImageTensor::from_fn(4, 4, 3, Range::Unit, |y, x, _| 0.05 * (y + x) as f64);
        let e = exposure_map(&y0, 0.25, 0.46).unwrap();
        let x = ImageTensor::from_fn(4, 4, 3, Range::Unit, |y, x, _| e.values().get(y, x, 0));
        let dec = ClassicalDecomposer::default();
        let r = total_loss_and_grad(
            &x,
            &y0,
            &e,
            Lambdas::default(),
            Toggles::exposure_only(),
            &dec,
        )
        .unwrap();
        assert!(r.total.abs() < 1e-25);
    }

    #[test]
    fn total_is_weighted_sum() {
        let y0 = ImageTensor::from_fn(8, 8, 3, Range::Unit, |y, x, c| {
            0.1 + 0.3 * ((y * 5 + x * 3 + c) as f64 * 0.37).sin().abs()
        });
        let x = y0.map(|v| (v * 1.8).min(1.0));
        let e = exposure_map(&y0, 0.25, 0.46).unwrap();
        let dec = ClassicalDecomposer::default();
        let r = total_loss_and_grad(&x, &y0, &e, Lambdas::default(), Toggles::all(), &dec).unwrap();
        let want = 1000.0 * r.l1 + 10.0 * r.l2 + 0.03 * r.l3;
        assert!((r.total - want).abs() <= 1e-10);
        assert!(r.l1 > 0.0 && r.l2 >= 0.0 && r.l3 > 0.0);
    }
}
