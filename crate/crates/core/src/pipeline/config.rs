use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::attributes::PhaseMode;
use crate::denoiser::{load_external, AnalyticGaussianDenoiser, DenoiserHandle};
use crate::diffusion::{make_schedule, BetaSpec, NoiseSchedule, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::retinex::{load_decomposer_network, ClassicalDecomposer, DecomposerHandle};
use crate::sampler::GuidanceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecomposerKind {
    #[default]
    Classical,
    Network,
}

/// Everything needed to reproduce a batch run, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub guidance: GuidanceConfig,
    pub schedule_steps: usize,
    pub beta: BetaSpec,
    /// Toy checkpoint or external manifest. Without one, a built-in
    /// Gaussian prior centred on the exposure base is used.
    pub model: Option<PathBuf>,
    /// Per-pixel variance of the built-in prior in the signed range.
    pub prior_variance: f64,
    pub decomposer: DecomposerKind,
    pub decomposer_model: Option<PathBuf>,
    /// Manifest path; defaults to `manifest.jsonl` in the output directory.
    pub manifest: Option<PathBuf>,
    /// Process images on the rayon pool.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            guidance: GuidanceConfig::default(),
            schedule_steps: DEFAULT_STEPS,
            beta: BetaSpec::default(),
            model: None,
            prior_variance: 2e-3,
            decomposer: DecomposerKind::Classical,
            decomposer_model: None,
            manifest: None,
            parallel: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        make_schedule(self.schedule_steps, self.beta)
    }

    /// The configured denoiser, or the built-in prior for `channels`.
    pub fn build_denoiser(&self, channels: usize) -> Result<DenoiserHandle> {
        let schedule = self.schedule()?;
        match &self.model {
            Some(path) => load_external(path, &schedule, None),
            None => {
                let mean = 2.0 * self.guidance.attributes.exposure_base - 1.0;
                Ok(Arc::new(AnalyticGaussianDenoiser::uniform(
                    mean,
                    channels,
                    self.prior_variance,
                    &schedule,
                )?))
            }
        }
    }

    pub fn build_decomposer(&self) -> Result<DecomposerHandle> {
        match (self.decomposer, &self.decomposer_model) {
            (DecomposerKind::Classical, _) => Ok(Arc::new(ClassicalDecomposer::default())),
            (DecomposerKind::Network, Some(path)) => load_decomposer_network(path),
            (DecomposerKind::Network, None) => Err(Error::Config(
                "the network decomposer needs a decomposer model path".into(),
            )),
        }
    }
}

/// Command-line values that take precedence over a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub omega: Option<usize>,
    pub scale: Option<f64>,
    pub grad_steps: Option<usize>,
    pub max_grad_steps: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub exposure_base: Option<f64>,
    pub exposure_amp: Option<f64>,
    pub pool_size: Option<usize>,
    pub phase_mode: Option<PhaseMode>,
    pub decomposer: Option<DecomposerKind>,
    pub decomposer_model: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub no_exposure: bool,
    pub no_structure: bool,
    pub no_color: bool,
    pub static_scale: bool,
    pub static_steps: bool,
    pub seed: Option<u64>,
    pub manifest: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let g = &mut cfg.guidance;
        let a = &mut g.attributes;
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.omega => g.omega);
        set!(self.scale => g.scale);
        set!(self.grad_steps => g.grad_steps);
        set!(self.max_grad_steps => g.max_grad_steps);
        set!(self.seed => g.seed);
        set!(self.lambda1 => a.lambdas.exposure);
        set!(self.lambda2 => a.lambdas.structure);
        set!(self.lambda3 => a.lambdas.color);
        set!(self.exposure_base => a.exposure_base);
        set!(self.exposure_amp => a.exposure_amplitude);
        set!(self.pool_size => a.pool_size);
        set!(self.phase_mode => a.phase_mode);
        set!(self.decomposer => cfg.decomposer);
        if self.no_exposure {
            a.toggles.exposure = false;
        }
        if self.no_structure {
            a.toggles.structure = false;
        }
        if self.no_color {
            a.toggles.color = false;
        }
        g.static_scale |= self.static_scale;
        g.static_steps |= self.static_steps;
        if self.decomposer_model.is_some() {
            cfg.decomposer_model = self.decomposer_model.clone();
        }
        if self.model.is_some() {
            cfg.model = self.model.clone();
        }
        if self.manifest.is_some() {
            cfg.manifest = self.manifest.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = RunConfig::from_toml_str(
            "[guidance]\nomega = 4\n[guidance.attributes.lambdas]\nstructure = 2.5\n",
        )
        .unwrap();
        assert_eq!(cfg.guidance.omega, 4);
        assert_eq!(cfg.guidance.scale, 1.8);
        assert_eq!(cfg.guidance.attributes.lambdas.structure, 2.5);
        assert_eq!(cfg.guidance.attributes.lambdas.exposure, 1000.0);
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.guidance.seed = 99;
        cfg.model = Some("weights/toy.ckpt".into());
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = RunConfig::from_toml_str("[guidance]\nomega = 4\nscale = 0.5\n").unwrap();
        ConfigOverrides {
            omega: Some(7),
            no_color: true,
            static_steps: true,
            ..Default::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.guidance.omega, 7);
        assert_eq!(cfg.guidance.scale, 0.5);
        assert!(!cfg.guidance.attributes.toggles.color);
        assert!(cfg.guidance.attributes.toggles.exposure);
        assert!(cfg.guidance.static_steps);
    }

    #[test]
    fn network_without_model_is_config_error() {
        let cfg = RunConfig {
            decomposer: DecomposerKind::Network,
            ..Default::default()
        };
        assert!(matches!(cfg.build_decomposer(), Err(Error::Config(_))));
    }
}
