use std::sync::Arc;

use super::{Denoiser, DenoiserHandle, DenoiserMetadata};
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::image::ImageTensor;

#[derive(Debug, Clone)]
enum MeanField {
    Image(ImageTensor),
    Uniform { value: f64, channels: usize },
}

/// Bayes-optimal noise predictor for data `x₀ ~ N(m, v·I)`.
///
/// With `x_t = a·x₀ + b·ε`, `a = √ᾱ_t`, `b = √(1−ᾱ_t)`, the pair `(ε, x_t)`
/// is jointly Gaussian with `Cov(ε, x_t) = b` and `Var(x_t) = a²v + b²`
/// per pixel, so
///
/// ```text
/// E[ε | x_t] = b·(x_t − a·m) / (a²·v + b²)
/// ```
#[derive(Debug, Clone)]
pub struct AnalyticGaussianDenoiser {
    mean: MeanField,
    variance: f64,
    schedule: NoiseSchedule,
    meta: DenoiserMetadata,
}

/// Exact oracle for a Gaussian data distribution with per-pixel mean `mean`
/// (in the signed range) and isotropic `variance`.
pub fn analytic_gaussian_denoiser(
    mean: ImageTensor,
    variance: f64,
    schedule: &NoiseSchedule,
) -> Result<DenoiserHandle> {
    Ok(Arc::new(AnalyticGaussianDenoiser::new(
        mean, variance, schedule,
    )?))
}

impl AnalyticGaussianDenoiser {
    pub fn new(mean: ImageTensor, variance: f64, schedule: &NoiseSchedule) -> Result<Self> {
        check_variance(variance)?;
        let meta = DenoiserMetadata {
            name: "analytic-gaussian".into(),
            resolution: Some((mean.height(), mean.width())),
            channels: Some(mean.channels()),
            schedule: schedule.into(),
        };
        Ok(Self {
            mean: MeanField::Image(mean),
            variance,
            schedule: schedule.clone(),
            meta,
        })
    }

    /// Same mean `value` at every pixel; accepts any resolution.
    pub fn uniform(
        value: f64,
        channels: usize,
        variance: f64,
        schedule: &NoiseSchedule,
    ) -> Result<Self> {
        check_variance(variance)?;
        Ok(Self {
            mean: MeanField::Uniform { value, channels },
            variance,
            schedule: schedule.clone(),
            meta: DenoiserMetadata {
                name: "analytic-gaussian-uniform".into(),
                resolution: None,
                channels: Some(channels),
                schedule: schedule.into(),
            },
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// The data mean broadcast to `(h, w, c)`.
    pub fn mean_image(&self, h: usize, w: usize) -> ImageTensor {
        match &self.mean {
            MeanField::Image(m) => m.clone(),
            MeanField::Uniform { value, channels } => {
                ImageTensor::filled(h, w, *channels, crate::image::Range::Signed, *value)
            }
        }
    }
}

fn check_variance(variance: f64) -> Result<()> {
    if variance > 0.0 && variance.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "data variance must be positive, got {variance}"
        )))
    }
}

impl Denoiser for AnalyticGaussianDenoiser {
    fn predict(&self, x_t: &ImageTensor, t: usize) -> Result<ImageTensor> {
        self.schedule.check_step(t)?;
        self.meta.check_input(x_t.shape())?;
        let ab = self.schedule.alpha_bar(t);
        let (a, b2) = (ab.sqrt(), 1.0 - ab);
        let gain = b2.sqrt() / (ab * self.variance + b2);
        Ok(match &self.mean {
            MeanField::Image(m) => x_t.zip_map(m, |x, mu| gain * (x - a * mu)),
            MeanField::Uniform { value, .. } => x_t.map(|x| gain * (x - a * value)),
        })
    }

    fn metadata(&self) -> &DenoiserMetadata {
        &self.meta
    }
}
