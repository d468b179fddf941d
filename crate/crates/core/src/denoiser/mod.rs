//! Noise predictors `ε_θ(x_t, t)`.
//!
//! Every provider implements [`Denoiser`] and is shared as a
//! [`DenoiserHandle`]. Inference is read-only: the same `(x_t, t)` always
//! yields the same prediction and the output has the input's shape.

mod analytic;
mod external;
mod toy;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffusion::{BetaSpec, NoiseSchedule};
use crate::error::{Error, Result};
use crate::image::{format_shape, ImageTensor};

pub use analytic::{analytic_gaussian_denoiser, AnalyticGaussianDenoiser};
pub use external::{load_external, ExternalManifest, ProcessDenoiser, EXTERNAL_FORMAT};
pub use toy::{
    epsilon_loss, train_toy_denoiser, train_toy_model, ToyArchitecture, ToyDenoiser,
    TrainingConfig, TrainingReport,
};

pub trait Denoiser: Send + Sync {
    /// Predict the noise in `x_t` (values in the signed range) at step `t`.
    fn predict(&self, x_t: &ImageTensor, t: usize) -> Result<ImageTensor>;

    fn metadata(&self) -> &DenoiserMetadata;
}

pub type DenoiserHandle = Arc<dyn Denoiser>;

/// Schedule identity a model was trained against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInfo {
    pub steps: usize,
    pub beta: BetaSpec,
}

impl From<&NoiseSchedule> for ScheduleInfo {
    fn from(s: &NoiseSchedule) -> Self {
        Self {
            steps: s.steps(),
            beta: s.spec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserMetadata {
    pub name: String,
    /// `(height, width)`; `None` accepts any resolution.
    pub resolution: Option<(usize, usize)>,
    /// `None` accepts 1 or 3 channels.
    pub channels: Option<usize>,
    pub schedule: ScheduleInfo,
}

impl DenoiserMetadata {
    /// Compatibility check for an input of shape `(h, w, c)`.
    pub fn check_input(&self, (h, w, c): (usize, usize, usize)) -> Result<()> {
        if let Some((mh, mw)) = self.resolution {
            if (mh, mw) != (h, w) {
                return Err(Error::Compatibility {
                    what: "resolution".into(),
                    expected: format!("{mh}x{mw}"),
                    actual: format!("{h}x{w}"),
                });
            }
        }
        if let Some(mc) = self.channels {
            if mc != c {
                return Err(Error::Compatibility {
                    what: "channels".into(),
                    expected: mc.to_string(),
                    actual: c.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn check_schedule(&self, schedule: &NoiseSchedule) -> Result<()> {
        let got = ScheduleInfo::from(schedule);
        if got != self.schedule {
            return Err(Error::Compatibility {
                what: "noise schedule".into(),
                expected: format!("{:?}", self.schedule),
                actual: format!("{got:?}"),
            });
        }
        Ok(())
    }
}

/// Wraps a closure as a denoiser. Handy for baselines and tests.
pub struct FnDenoiser<F> {
    f: F,
    meta: DenoiserMetadata,
}

impl<F> FnDenoiser<F>
where
    F: Fn(&ImageTensor, usize) -> ImageTensor + Send + Sync,
{
    pub fn new(name: &str, schedule: &NoiseSchedule, f: F) -> Self {
        Self {
            f,
            meta: DenoiserMetadata {
                name: name.to_string(),
                resolution: None,
                channels: None,
                schedule: schedule.into(),
            },
        }
    }
}

impl<F> Denoiser for FnDenoiser<F>
where
    F: Fn(&ImageTensor, usize) -> ImageTensor + Send + Sync,
{
    fn predict(&self, x_t: &ImageTensor, t: usize) -> Result<ImageTensor> {
        let out = (self.f)(x_t, t);
        if !out.same_shape(x_t) {
            return Err(Error::shape(
                format_shape(x_t.shape()),
                format_shape(out.shape()),
            ));
        }
        Ok(out)
    }

    fn metadata(&self) -> &DenoiserMetadata {
        &self.meta
    }
}

/// A denoiser that always predicts zero noise.
pub fn zero_denoiser(schedule: &NoiseSchedule) -> DenoiserHandle {
    Arc::new(FnDenoiser::new("zero", schedule, |x: &ImageTensor, _| {
        x.map(|_| 0.0)
    }))
}
