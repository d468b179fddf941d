//! DDPM noise schedules and the closed-form pieces of the forward and
//! reverse processes.
//!
//! Timesteps are 1-based: `t ∈ 1..=T`. `ᾱ_0` is taken as 1 wherever a
//! formula reaches one step past the start of the chain.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Range};

/// How the per-step noise variances `β_t` are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaSpec {
    /// Evenly spaced from `start` (t = 1) to `end` (t = T).
    Linear {
        start: f64,
        end: f64,
    },
    Constant {
        beta: f64,
    },
}

impl Default for BetaSpec {
    fn default() -> Self {
        BetaSpec::Linear {
            start: 1e-4,
            end: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    spec: BetaSpec,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    posterior_vars: Vec<f64>,
}

pub const DEFAULT_STEPS: usize = 1000;

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_schedule(DEFAULT_STEPS, BetaSpec::default()).expect("default schedule is valid")
    }
}

/// Precompute the schedule for `steps` steps.
pub fn make_schedule(steps: usize, spec: BetaSpec) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::Config("schedule needs at least one step".into()));
    }
    let betas: Vec<f64> = match spec {
        BetaSpec::Linear { start, end } => {
            if steps == 1 {
                vec![start]
            } else {
                let span = (steps - 1) as f64;
                (0..steps)
                    .map(|i| start + (end - start) * i as f64 / span)
                    .collect()
            }
        }
        BetaSpec::Constant { beta } => vec![beta; steps],
    };
    if let Some(bad) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(Error::Config(format!("beta {bad} outside (0, 1)")));
    }

    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for a in &alphas {
        acc *= a;
        alpha_bars.push(acc);
    }
    let posterior_vars = (0..steps)
        .map(|i| {
            if i == 0 {
                betas[0]
            } else {
                (1.0 - alpha_bars[i - 1]) / (1.0 - alpha_bars[i]) * betas[i]
            }
        })
        .collect();

    Ok(NoiseSchedule {
        spec,
        betas,
        alphas,
        alpha_bars,
        posterior_vars,
    })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn spec(&self) -> BetaSpec {
        self.spec
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            Err(Error::Step {
                t,
                max: self.steps(),
            })
        } else {
            Ok(())
        }
    }

    /// `β_t`. Panics if `t` is out of range.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// Fixed reverse-process variance `β̃_t`.
    pub fn posterior_var(&self, t: usize) -> f64 {
        self.posterior_vars[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn posterior_vars(&self) -> &[f64] {
        &self.posterior_vars
    }
}

/// `x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε`, unclamped.
pub fn forward_noise(
    x0: &ImageTensor,
    t: usize,
    schedule: &NoiseSchedule,
    noise: &ImageTensor,
) -> Result<ImageTensor> {
    schedule.check_step(t)?;
    x0.check_same_shape(noise)?;
    let ab = schedule.alpha_bar(t);
    Ok(x0.axpby(ab.sqrt(), noise, (1.0 - ab).sqrt()))
}

/// One-shot clean-image estimate `x̂₀ = (x_t − √(1−ᾱ_t)·ε)/√ᾱ_t`.
///
/// The result is not clamped; call [`ImageTensor::clamped`] when needed.
pub fn predict_x0(
    x_t: &ImageTensor,
    eps: &ImageTensor,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<ImageTensor> {
    schedule.check_step(t)?;
    x_t.check_same_shape(eps)?;
    let ab = schedule.alpha_bar(t);
    let inv = 1.0 / ab.sqrt();
    Ok(x_t.axpby(inv, eps, -(1.0 - ab).sqrt() * inv))
}

/// Reverse-step Gaussian: mean `(x_t − β_t·ε/√(1−ᾱ_t))/√α_t` and the fixed
/// variance `β̃_t`.
pub fn posterior_mean_var(
    x_t: &ImageTensor,
    eps: &ImageTensor,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<(ImageTensor, f64)> {
    schedule.check_step(t)?;
    x_t.check_same_shape(eps)?;
    let inv_sqrt_alpha = 1.0 / schedule.alpha(t).sqrt();
    let eps_coef = schedule.beta(t) / (1.0 - schedule.alpha_bar(t)).sqrt();
    let mean = x_t.axpby(inv_sqrt_alpha, eps, -eps_coef * inv_sqrt_alpha);
    Ok((mean, schedule.posterior_var(t)))
}

/// Unit Gaussian noise shaped like `(height, width, channels)`.
pub fn gaussian_noise<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    channels: usize,
    rng: &mut R,
) -> ImageTensor {
    ImageTensor::from_fn(height, width, channels, Range::Signed, |_, _, _| {
        rng.sample(StandardNormal)
    })
}

pub fn gaussian_noise_like<R: Rng + ?Sized>(img: &ImageTensor, rng: &mut R) -> ImageTensor {
    let (h, w, c) = img.shape();
    gaussian_noise(h, w, c, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_schedule_products() {
        let s = make_schedule(3, BetaSpec::Constant { beta: 0.01 }).unwrap();
        assert_relative_eq!(s.alpha_bar(1), 0.99, epsilon = 1e-15);
        assert_relative_eq!(s.alpha_bar(2), 0.9801, epsilon = 1e-15);
        assert_relative_eq!(s.alpha_bar(3), 0.970299, epsilon = 1e-15);

        let s = make_schedule(1, BetaSpec::Constant { beta: 0.5 }).unwrap();
        assert_eq!(s.alpha_bars(), &[0.5]);
        assert_eq!(s.posterior_var(1), 0.5);
    }

    #[test]
    fn default_schedule_tail_matches_reference_product() {
        // ᾱ_1000 for linear(1e-4, 0.02), from a 40-digit cumulative product.
        let s = NoiseSchedule::default();
        assert_eq!(s.steps(), 1000);
        assert_relative_eq!(
            s.alpha_bar(1000),
            4.035829765375682e-05,
            max_relative = 1e-9
        );
        assert_relative_eq!(s.alpha_bar(10), 0.9981052047858344, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_betas() {
        assert!(matches!(
            make_schedule(10, BetaSpec::Constant { beta: 1.0 }),
            Err(Error::Config(_))
        ));
        assert!(make_schedule(
            10,
            BetaSpec::Linear {
                start: 0.0,
                end: 0.1
            }
        )
        .is_err());
        assert!(make_schedule(0, BetaSpec::default()).is_err());
    }

    #[test]
    fn forward_noise_edge_cases() {
        let s = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = gaussian_noise(4, 4, 3, &mut rng);
        let zeros = ImageTensor::zeros(4, 4, 3, Range::Signed);
        let out = forward_noise(&x0, 500, &s, &zeros).unwrap();
        let k = s.alpha_bar(500).sqrt();
        for (o, x) in out.data().iter().zip(x0.data()) {
            assert_eq!(*o, k * x);
        }
        let out = forward_noise(&zeros, 500, &s, &x0).unwrap();
        let k = (1.0 - s.alpha_bar(500)).sqrt();
        for (o, x) in out.data().iter().zip(x0.data()) {
            assert_eq!(*o, k * x);
        }
        assert!(matches!(
            forward_noise(&x0, 0, &s, &zeros),
            Err(Error::Step { t: 0, .. })
        ));
        assert!(forward_noise(&x0, 1001, &s, &zeros).is_err());
    }

    #[test]
    fn predict_x0_with_zero_eps_rescales() {
        let s = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x_t = gaussian_noise(4, 4, 1, &mut rng);
        let zeros = ImageTensor::zeros(4, 4, 1, Range::Signed);
        let out = predict_x0(&x_t, &zeros, 300, &s).unwrap();
        for (o, x) in out.data().iter().zip(x_t.data()) {
            assert_relative_eq!(*o, x / s.alpha_bar(300).sqrt(), max_relative = 1e-15);
        }
    }

    #[test]
    fn predict_x0_matches_direct_evaluation() {
        let s = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x_t = gaussian_noise(4, 4, 3, &mut rng);
        let eps = gaussian_noise(4, 4, 3, &mut rng);
        for t in [1, 17, 250, 999] {
            let out = predict_x0(&x_t, &eps, t, &s).unwrap();
            // Recompute ᾱ_t from the betas rather than trusting the cache.
            let ab: f64 = s.betas()[..t].iter().map(|b| 1.0 - b).product();
            for i in 0..out.len() {
                let want = (x_t[i] - (1.0 - ab).sqrt() * eps[i]) / ab.sqrt();
                assert_relative_eq!(out[i], want, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn posterior_single_step_by_hand() {
        let s = make_schedule(1, BetaSpec::Constant { beta: 0.36 }).unwrap();
        let x = ImageTensor::filled(1, 1, 1, Range::Signed, 0.8);
        let eps = ImageTensor::filled(1, 1, 1, Range::Signed, 0.5);
        let (mean, var) = posterior_mean_var(&x, &eps, 1, &s).unwrap();
        // α = 0.64, √α = 0.8, √(1−ᾱ) = 0.6: (0.8 − 0.36·0.5/0.6)/0.8 = 0.625
        assert_relative_eq!(mean[0], 0.625, epsilon = 1e-15);
        assert_eq!(var, 0.36);

        let zeros = ImageTensor::zeros(1, 1, 1, Range::Signed);
        let (mean, _) = posterior_mean_var(&x, &zeros, 1, &s).unwrap();
        assert_relative_eq!(mean[0], 1.0, epsilon = 1e-15);
        assert!(posterior_mean_var(&x, &zeros, 0, &s).is_err());
    }

    #[test]
    fn posterior_matches_reimplementation() {
        let s = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x_t = gaussian_noise(3, 5, 3, &mut rng);
        let eps = gaussian_noise(3, 5, 3, &mut rng);
        for t in [1, 2, 10, 640] {
            let (mean, var) = posterior_mean_var(&x_t, &eps, t, &s).unwrap();
            let beta = s.betas()[t - 1];
            let ab: f64 = s.betas()[..t].iter().map(|b| 1.0 - b).product();
            let ab_prev: f64 = s.betas()[..t - 1].iter().map(|b| 1.0 - b).product();
            for i in 0..mean.len() {
                let want = (x_t[i] - beta / (1.0 - ab).sqrt() * eps[i]) / (1.0 - beta).sqrt();
                assert_relative_eq!(mean[i], want, max_relative = 1e-10);
            }
            let want_var = if t == 1 {
                beta
            } else {
                (1.0 - ab_prev) / (1.0 - ab) * beta
            };
            assert_relative_eq!(var, want_var, max_relative = 1e-9);
        }
    }

    #[test]
    fn schedule_invariants_hold() {
        for spec in [
            BetaSpec::default(),
            BetaSpec::Constant { beta: 0.02 },
            BetaSpec::Linear {
                start: 0.3,
                end: 0.001,
            },
        ] {
            let s = make_schedule(200, spec).unwrap();
            for t in 1..=200 {
                let ab = s.alpha_bar(t);
                assert!(ab > 0.0 && ab < 1.0);
                assert!(ab < s.alpha_bar(t - 1));
                assert!((ab - s.alpha_bar(t - 1) * s.alpha(t)).abs() <= 1e-12);
                assert!(s.posterior_var(t) >= 0.0);
            }
        }
    }
}
