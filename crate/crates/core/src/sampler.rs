//! Attribute-guided reverse sampling.
//!
//! The input is pushed `ω` steps into the forward process, then walked back
//! with the denoiser while each reverse-step mean is shifted against the
//! gradient of the attribute loss at the current clean-image estimate:
//!
//! ```text
//! x_{t-1} ~ N(μ_t − ŝ·Σ_t·∇L(x̂₀), Σ_t)
//! ```
//!
//! The scale `ŝ` and the number of gradient repeats `N̂` are recomputed every
//! step from the ratio `r = ‖x_t − x̃_{t-1}‖ / ‖∇L‖`, where `x̃_{t-1}` is a
//! provisional unguided draw. Gradients below `1e-12` skip guidance for the
//! step.
//!
//! Randomness comes from a [`SamplerRng`] with two independent ChaCha8
//! streams. The main stream feeds the noising draw, the repeats and every
//! step output; the auxiliary stream feeds only the provisional draws. When
//! guidance is inactive the main stream is consumed exactly as by
//! [`partial_noise_denoise`], so the two agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::{AttributeSettings, AttributeTargets};
use crate::denoiser::Denoiser;
use crate::diffusion::{
    forward_noise, gaussian_noise, gaussian_noise_like, make_schedule, posterior_mean_var,
    predict_x0, NoiseSchedule,
};
use crate::error::{Error, Result};
use crate::image::{ImageTensor, Range};
use crate::retinex::Decomposer;

/// Gradients with a smaller L2 norm disable guidance for the step.
pub const GRAD_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    /// Forward-noising depth and number of guided reverse steps.
    pub omega: usize,
    /// Base guidance scale `s`.
    pub scale: f64,
    /// Base gradient step count `N`.
    pub grad_steps: usize,
    pub attributes: AttributeSettings,
    pub seed: u64,
    pub clamp_final: bool,
    /// Use `ŝ = s` instead of the dynamic scale.
    pub static_scale: bool,
    /// Use `N̂ = N` instead of the dynamic step count.
    pub static_steps: bool,
    /// Upper bound on `N̂`. A vanishing gradient makes the dynamic count
    /// explode, so the applied count is clamped to this.
    pub max_grad_steps: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            omega: 10,
            scale: 1.8,
            grad_steps: 3,
            attributes: AttributeSettings::default(),
            seed: 0,
            clamp_final: true,
            static_scale: false,
            static_steps: false,
            max_grad_steps: 50,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        if self.omega > schedule.steps() {
            return Err(Error::Config(format!(
                "omega {} exceeds the schedule length {}",
                self.omega,
                schedule.steps()
            )));
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(Error::Config(format!(
                "scale {} must be finite and >= 0",
                self.scale
            )));
        }
        if self.grad_steps == 0 || self.max_grad_steps == 0 {
            return Err(Error::Config(
                "grad_steps and max_grad_steps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
    /// `ŝ` used for the step.
    pub scale: f64,
    /// `N̂` used for the step.
    pub steps: usize,
    /// `‖∇L‖₂` in the signed range at the first evaluation of the step.
    pub grad_norm: f64,
    /// `‖x_t − x̃_{t-1}‖₂` for the provisional draw; `None` when skipped.
    pub draw_norm: Option<f64>,
    /// `‖x_t − x_{t-1}‖₂` for the returned sample.
    pub step_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerTrace {
    pub records: Vec<StepRecord>,
}

impl SamplerTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `Σ N̂` over all steps.
    pub fn total_grad_steps(&self) -> usize {
        self.records.iter().map(|r| r.steps).sum()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

/// Main and auxiliary random streams for one sampling run.
#[derive(Debug, Clone)]
pub struct SamplerRng {
    pub main: ChaCha8Rng,
    pub aux: ChaCha8Rng,
}

impl SamplerRng {
    pub fn new(seed: u64) -> Self {
        let main = ChaCha8Rng::seed_from_u64(seed);
        let mut aux = ChaCha8Rng::seed_from_u64(seed);
        aux.set_stream(1);
        Self { main, aux }
    }
}

/// `ŝ = r·s`, `N̂ = max(1, round(r·N))` with `r = ‖x_t − x_prev‖/‖grad‖`.
/// Rounding is half away from zero. Returns `(0, 1)` when `‖grad‖ < 1e-12`.
pub fn dynamic_scale_and_steps(
    x_t: &ImageTensor,
    x_prev_draw: &ImageTensor,
    grad: &ImageTensor,
    s: f64,
    n: usize,
) -> Result<(f64, usize)> {
    x_t.check_same_shape(x_prev_draw)?;
    x_t.check_same_shape(grad)?;
    let g = grad.norm_l2();
    if g < GRAD_EPSILON {
        return Ok((0.0, 1));
    }
    let r = x_t.sub(x_prev_draw).norm_l2() / g;
    let steps = (r * n as f64).round().max(1.0);
    Ok((r * s, steps as usize))
}

/// Everything a guided step needs besides the current state.
pub struct GuidanceContext<'a> {
    targets: AttributeTargets<'a>,
    schedule: NoiseSchedule,
    config: GuidanceConfig,
}

impl<'a> GuidanceContext<'a> {
    /// Derive the attribute targets from `y0` (in `[0,1]`).
    pub fn new(
        y0: &ImageTensor,
        schedule: NoiseSchedule,
        decomposer: &'a dyn Decomposer,
        config: GuidanceConfig,
    ) -> Result<Self> {
        config.validate(&schedule)?;
        let targets = AttributeTargets::new(y0, config.attributes, decomposer)?;
        Ok(Self {
            targets,
            schedule,
            config,
        })
    }

    pub fn targets(&self) -> &AttributeTargets<'a> {
        &self.targets
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn config(&self) -> &GuidanceConfig {
        &self.config
    }
}

/// Result of one outer reverse step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub x_prev: ImageTensor,
    /// Latest clean-image estimate, signed range, unclamped.
    pub x0_hat: ImageTensor,
    pub record: StepRecord,
}

struct Estimate {
    x0_hat: ImageTensor,
    grad: ImageTensor,
    l: [f64; 4],
}

fn estimate(
    x_t: &ImageTensor,
    t: usize,
    denoiser: &dyn Denoiser,
    ctx: &GuidanceContext,
) -> Result<(Estimate, ImageTensor)> {
    let eps = denoiser.predict(x_t, t)?;
    let x0_hat = predict_x0(x_t, &eps, t, &ctx.schedule)?;
    let report = ctx.targets.evaluate(&x0_hat.to_unit())?;
    // d/dx of L((x + 1)/2)
    let grad = report.grad.scale(0.5).with_range(Range::Signed);
    let l = [report.l1, report.l2, report.l3, report.total];
    if !l.iter().all(|v| v.is_finite()) || !grad.is_finite() || !x0_hat.is_finite() {
        return Err(Error::Numeric {
            t,
            l1: report.l1,
            l2: report.l2,
            l3: report.l3,
        });
    }
    Ok((Estimate { x0_hat, grad, l }, eps))
}

fn draw(mean: &ImageTensor, var: f64, rng: &mut ChaCha8Rng) -> ImageTensor {
    let z = gaussian_noise_like(mean, rng);
    mean.axpby(1.0, &z, var.sqrt())
}

fn shifted(mean: &ImageTensor, grad: &ImageTensor, s_hat: f64, var: f64) -> ImageTensor {
    if s_hat == 0.0 {
        mean.clone()
    } else {
        mean.axpby(1.0, grad, -s_hat * var)
    }
}

/// One guided reverse step from `x_t` (signed range) at step `t`.
pub fn guided_step(
    x_t: &ImageTensor,
    t: usize,
    denoiser: &dyn Denoiser,
    ctx: &GuidanceContext,
    rng: &mut SamplerRng,
) -> Result<StepOutput> {
    ctx.schedule.check_step(t)?;
    let cfg = &ctx.config;
    let (mut est, eps) = estimate(x_t, t, denoiser, ctx)?;
    let (mu, var) = posterior_mean_var(x_t, &eps, t, &ctx.schedule)?;
    let first = est.l;
    let grad_norm = est.grad.norm_l2();

    let (s_hat, n_hat, draw_norm) = if grad_norm < GRAD_EPSILON {
        (0.0, 1, None)
    } else {
        let provisional = draw(&mu, var, &mut rng.aux);
        let (s_dyn, n_dyn) =
            dynamic_scale_and_steps(x_t, &provisional, &est.grad, cfg.scale, cfg.grad_steps)?;
        let s_hat = if cfg.static_scale { cfg.scale } else { s_dyn };
        let n_hat = if cfg.static_steps {
            cfg.grad_steps
        } else {
            n_dyn
        };
        if n_hat > cfg.max_grad_steps {
            log::warn!(
                "step {t}: gradient steps {n_hat} capped at {}",
                cfg.max_grad_steps
            );
        }
        let n_hat = n_hat.min(cfg.max_grad_steps);
        (s_hat, n_hat, Some(x_t.sub(&provisional).norm_l2()))
    };

    for _ in 1..n_hat {
        let resampled = draw(&shifted(&mu, &est.grad, s_hat, var), var, &mut rng.main);
        est = estimate(&resampled, t, denoiser, ctx)?.0;
    }

    let mean = shifted(&mu, &est.grad, s_hat, var);
    let x_prev = if t > 1 {
        draw(&mean, var, &mut rng.main)
    } else {
        mean
    };
    let record = StepRecord {
        t,
        l1: first[0],
        l2: first[1],
        l3: first[2],
        total: first[3],
        scale: s_hat,
        steps: n_hat,
        grad_norm,
        draw_norm,
        step_norm: x_t.sub(&x_prev).norm_l2(),
    };
    Ok(StepOutput {
        x_prev,
        x0_hat: est.x0_hat,
        record,
    })
}

fn schedule_of(denoiser: &dyn Denoiser) -> Result<NoiseSchedule> {
    let info = denoiser.metadata().schedule;
    make_schedule(info.steps, info.beta)
}

fn check_input(y0: &ImageTensor, denoiser: &dyn Denoiser) -> Result<()> {
    if y0.range() != Range::Unit {
        return Err(Error::Config(
            "input image must be on the [0,1] scale".into(),
        ));
    }
    denoiser.metadata().check_input(y0.shape())
}

fn finish(x0_hat: &ImageTensor, clamp: bool) -> ImageTensor {
    let out = x0_hat.to_unit();
    if clamp {
        out.clamped()
    } else {
        out
    }
}

/// Enhance `y0` (in `[0,1]`) with streams seeded from `config.seed`.
pub fn enhance(
    y0: &ImageTensor,
    denoiser: &dyn Denoiser,
    decomposer: &dyn Decomposer,
    config: &GuidanceConfig,
) -> Result<(ImageTensor, SamplerTrace)> {
    enhance_with_rng(
        y0,
        denoiser,
        decomposer,
        config,
        &mut SamplerRng::new(config.seed),
    )
}

/// [`enhance`] with caller-supplied random streams.
pub fn enhance_with_rng(
    y0: &ImageTensor,
    denoiser: &dyn Denoiser,
    decomposer: &dyn Decomposer,
    config: &GuidanceConfig,
    rng: &mut SamplerRng,
) -> Result<(ImageTensor, SamplerTrace)> {
    let schedule = schedule_of(denoiser)?;
    config.validate(&schedule)?;
    check_input(y0, denoiser)?;
    if config.omega == 0 {
        return Ok((y0.clone(), SamplerTrace::default()));
    }
    let ctx = GuidanceContext::new(y0, schedule, decomposer, *config)?;
    let noise = gaussian_noise_like(y0, &mut rng.main);
    let mut x = forward_noise(&y0.to_signed(), config.omega, &ctx.schedule, &noise)?;
    let mut trace = SamplerTrace::default();
    let mut x0_hat = x.clone();
    for t in (1..=config.omega).rev() {
        let out = guided_step(&x, t, denoiser, &ctx, rng)?;
        log::debug!(
            "t={t} total={:.4e} s_hat={:.3e} n_hat={}",
            out.record.total,
            out.record.scale,
            out.record.steps
        );
        trace.records.push(out.record);
        x = out.x_prev;
        x0_hat = out.x0_hat;
    }
    Ok((finish(&x0_hat, config.clamp_final), trace))
}

fn reverse_unguided(
    mut x: ImageTensor,
    from: usize,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<ImageTensor> {
    let mut x0_hat = x.clone();
    for t in (1..=from).rev() {
        let eps = denoiser.predict(&x, t)?;
        x0_hat = predict_x0(&x, &eps, t, schedule)?;
        let (mu, var) = posterior_mean_var(&x, &eps, t, schedule)?;
        x = if t > 1 { draw(&mu, var, rng) } else { mu };
    }
    Ok(x0_hat)
}

/// Noise `y0` to step `omega` and denoise it without guidance, consuming
/// `rng.main` exactly as [`enhance_with_rng`] does when guidance is off.
pub fn partial_noise_denoise(
    y0: &ImageTensor,
    denoiser: &dyn Denoiser,
    omega: usize,
    clamp_final: bool,
    rng: &mut SamplerRng,
) -> Result<ImageTensor> {
    let schedule = schedule_of(denoiser)?;
    if omega > schedule.steps() {
        return Err(Error::Config(format!(
            "omega {omega} exceeds the schedule length {}",
            schedule.steps()
        )));
    }
    check_input(y0, denoiser)?;
    if omega == 0 {
        return Ok(y0.clone());
    }
    let noise = gaussian_noise_like(y0, &mut rng.main);
    let x = forward_noise(&y0.to_signed(), omega, &schedule, &noise)?;
    let x0_hat = reverse_unguided(x, omega, denoiser, &schedule, &mut rng.main)?;
    Ok(finish(&x0_hat, clamp_final))
}

/// Ancestral sampling from pure noise over the full schedule. Returns the
/// final clean-image estimate in the signed range, unclamped.
pub fn sample_unguided(
    denoiser: &dyn Denoiser,
    shape: (usize, usize, usize),
    rng: &mut ChaCha8Rng,
) -> Result<ImageTensor> {
    let schedule = schedule_of(denoiser)?;
    denoiser.metadata().check_input(shape)?;
    let (h, w, c) = shape;
    let x = gaussian_noise(h, w, c, rng);
    reverse_unguided(x, schedule.steps(), denoiser, &schedule, rng)
}
