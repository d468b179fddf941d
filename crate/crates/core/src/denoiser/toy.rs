//! Desk-scale trainable noise predictor.
//!
//! The prediction is a Gaussian-prior baseline plus a learned residual:
//!
//! ```text
//! ε̂(x_t, t) = k_t·(x_t − a_t·M) + a_t·r(x_t, t)
//! k_t = b_t / (a_t²·v + b_t²),   a_t = √ᾱ_t,   b_t = √(1−ᾱ_t)
//! ```
//!
//! `M` is a learned per-pixel mean map, `v = exp(log_var)` a learned
//! scalar variance, and `r` a three-layer 3×3 conv net whose hidden layers
//! are modulated per channel by `(1 + G·φ(t), B·φ(t))` with `φ` a sinusoidal
//! timestep embedding. The baseline term is the exact predictor for
//! Gaussian data, so the residual only has to model what the data adds.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Denoiser, DenoiserHandle, DenoiserMetadata, ScheduleInfo};
use crate::checkpoint;
use crate::diffusion::{forward_noise, gaussian_noise_like, NoiseSchedule};
use crate::error::{Error, Result};
use crate::image::{format_shape, hex_digest, ImageTensor, Range};
use crate::nn::{relu_inplace, Adam, Conv3x3};

pub(crate) const TOY_KIND: &str = "toy-denoiser";
const MAX_PARAMS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyArchitecture {
    pub hidden: usize,
    /// Length of the timestep embedding; must be even.
    pub time_features: usize,
}

impl Default for ToyArchitecture {
    fn default() -> Self {
        Self {
            hidden: 16,
            time_features: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub seed: u64,
    pub steps: usize,
    pub learning_rate: f64,
    /// Evaluate the fixed probe set every this many steps.
    pub eval_every: usize,
    pub eval_samples: usize,
    pub architecture: ToyArchitecture,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 2000,
            learning_rate: 5e-3,
            eval_every: 200,
            eval_samples: 64,
            architecture: ToyArchitecture::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Probe-set ε-loss before training and after every `eval_every` steps.
    pub eval_losses: Vec<f64>,
    pub final_loss: f64,
    pub param_checksum: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ToyHeader {
    kind: String,
    architecture: ToyArchitecture,
    height: usize,
    width: usize,
    channels: usize,
    schedule: ScheduleInfo,
}

#[derive(Debug, Clone)]
pub struct ToyDenoiser {
    arch: ToyArchitecture,
    height: usize,
    width: usize,
    channels: usize,
    mean_map: Vec<f64>,
    log_var: f64,
    conv1: Conv3x3,
    film1_gain: Vec<f64>,
    film1_bias: Vec<f64>,
    conv2: Conv3x3,
    film2_gain: Vec<f64>,
    film2_bias: Vec<f64>,
    conv3: Conv3x3,
    schedule: NoiseSchedule,
    meta: DenoiserMetadata,
}

struct Cache {
    phi: Vec<f64>,
    z1: Vec<f64>,
    gamma1: Vec<f64>,
    u1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    gamma2: Vec<f64>,
    u2: Vec<f64>,
    h2: Vec<f64>,
    a: f64,
    b: f64,
    k: f64,
    centered: Vec<f64>,
}

fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = if half > 1 {
            (-(1000f64).ln() * i as f64 / (half - 1) as f64).exp()
        } else {
            1.0
        };
        out.push((t as f64 * freq).sin());
        out.push((t as f64 * freq).cos());
    }
    out
}

/// Per-channel affine modulation `γ ⊙ z + β` on channels-last maps.
fn modulate(z: &[f64], gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let c = gamma.len();
    z.iter()
        .enumerate()
        .map(|(i, v)| gamma[i % c] * v + beta[i % c])
        .collect()
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    m.chunks_exact(v.len())
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

impl ToyDenoiser {
    pub fn new<R: Rng + ?Sized>(
        height: usize,
        width: usize,
        channels: usize,
        arch: ToyArchitecture,
        schedule: &NoiseSchedule,
        rng: &mut R,
    ) -> Result<Self> {
        if arch.hidden == 0 || arch.time_features == 0 || !arch.time_features.is_multiple_of(2) {
            return Err(Error::Config(format!("invalid toy architecture {arch:?}")));
        }
        let hid = arch.hidden;
        let f = arch.time_features;
        let model = Self {
            arch,
            height,
            width,
            channels,
            mean_map: vec![0.0; height * width * channels],
            log_var: 0.0,
            conv1: Conv3x3::init(channels, hid, 1.0, rng),
            film1_gain: vec![0.0; hid * f],
            film1_bias: vec![0.0; hid * f],
            conv2: Conv3x3::init(hid, hid, 1.0, rng),
            film2_gain: vec![0.0; hid * f],
            film2_bias: vec![0.0; hid * f],
            conv3: Conv3x3::init(hid, channels, 0.1, rng),
            schedule: schedule.clone(),
            meta: Self::metadata_for(height, width, channels, schedule.into()),
        };
        if model.param_count() >= MAX_PARAMS {
            return Err(Error::Config(format!(
                "toy denoiser would have {} parameters (cap {MAX_PARAMS})",
                model.param_count()
            )));
        }
        Ok(model)
    }

    fn metadata_for(h: usize, w: usize, c: usize, schedule: ScheduleInfo) -> DenoiserMetadata {
        DenoiserMetadata {
            name: "toy-conv".into(),
            resolution: Some((h, w)),
            channels: Some(c),
            schedule,
        }
    }

    pub fn architecture(&self) -> ToyArchitecture {
        self.arch
    }

    pub fn param_count(&self) -> usize {
        self.flat_params().len()
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        p.extend_from_slice(&self.mean_map);
        p.push(self.log_var);
        for (conv, gain, bias) in [
            (&self.conv1, &self.film1_gain, &self.film1_bias),
            (&self.conv2, &self.film2_gain, &self.film2_bias),
        ] {
            p.extend_from_slice(&conv.weight);
            p.extend_from_slice(&conv.bias);
            p.extend_from_slice(gain);
            p.extend_from_slice(bias);
        }
        p.extend_from_slice(&self.conv3.weight);
        p.extend_from_slice(&self.conv3.bias);
        p
    }

    fn set_flat_params(&mut self, p: &[f64]) {
        let mut at = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&p[at..at + dst.len()]);
            at += dst.len();
        };
        take(&mut self.mean_map);
        take(std::slice::from_mut(&mut self.log_var));
        take(&mut self.conv1.weight);
        take(&mut self.conv1.bias);
        take(&mut self.film1_gain);
        take(&mut self.film1_bias);
        take(&mut self.conv2.weight);
        take(&mut self.conv2.bias);
        take(&mut self.film2_gain);
        take(&mut self.film2_bias);
        take(&mut self.conv3.weight);
        take(&mut self.conv3.bias);
    }

    /// SHA-256 of the parameter vector.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in self.flat_params() {
            h.update(v.to_le_bytes());
        }
        hex_digest(&h.finalize())
    }

    fn forward(&self, x: &[f64], t: usize) -> (Vec<f64>, Cache) {
        let (h, w) = (self.height, self.width);
        let phi = time_embedding(t, self.arch.time_features);
        let ab = self.schedule.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        let var = self.log_var.exp();
        let k = b / (ab * var + b * b);

        let z1 = self.conv1.forward(x, h, w);
        let gamma1: Vec<f64> = mat_vec(&self.film1_gain, &phi)
            .iter()
            .map(|g| 1.0 + g)
            .collect();
        let beta1 = mat_vec(&self.film1_bias, &phi);
        let u1 = modulate(&z1, &gamma1, &beta1);
        let mut h1 = u1.clone();
        relu_inplace(&mut h1);

        let z2 = self.conv2.forward(&h1, h, w);
        let gamma2: Vec<f64> = mat_vec(&self.film2_gain, &phi)
            .iter()
            .map(|g| 1.0 + g)
            .collect();
        let beta2 = mat_vec(&self.film2_bias, &phi);
        let u2 = modulate(&z2, &gamma2, &beta2);
        let mut h2 = u2.clone();
        relu_inplace(&mut h2);

        let r = self.conv3.forward(&h2, h, w);
        let centered: Vec<f64> = x
            .iter()
            .zip(&self.mean_map)
            .map(|(xi, m)| xi - a * m)
            .collect();
        let out = centered
            .iter()
            .zip(&r)
            .map(|(c, ri)| k * c + a * ri)
            .collect();
        (
            out,
            Cache {
                phi,
                z1,
                gamma1,
                u1,
                h1,
                z2,
                gamma2,
                u2,
                h2,
                a,
                b,
                k,
                centered,
            },
        )
    }

    /// Gradient of the loss w.r.t. the flat parameters given `dL/dε̂`.
    fn backward(&self, x: &[f64], cache: &Cache, grad_out: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let hid = self.arch.hidden;
        let Cache { a, b, k, .. } = *cache;
        let var = self.log_var.exp();

        let g_mean: Vec<f64> = grad_out.iter().map(|g| -a * k * g).collect();
        let g_k: f64 = grad_out
            .iter()
            .zip(&cache.centered)
            .map(|(g, c)| g * c)
            .sum();
        let denom = a * a * var + b * b;
        let g_log_var = g_k * (-b * a * a * var / (denom * denom));

        let g_r: Vec<f64> = grad_out.iter().map(|g| a * g).collect();
        let c3 = self.conv3.backward(&cache.h2, h, w, &g_r);

        let film_back = |g_h: &[f64], u: &[f64], z: &[f64], gamma: &[f64]| {
            let mut g_gamma = vec![0.0; hid];
            let mut g_beta = vec![0.0; hid];
            let mut g_z = vec![0.0; z.len()];
            for i in 0..z.len() {
                if u[i] <= 0.0 {
                    continue;
                }
                let o = i % hid;
                g_gamma[o] += g_h[i] * z[i];
                g_beta[o] += g_h[i];
                g_z[i] = g_h[i] * gamma[o];
            }
            let outer = |g: &[f64]| -> Vec<f64> {
                g.iter()
                    .flat_map(|gi| cache.phi.iter().map(move |p| gi * p))
                    .collect()
            };
            (g_z, outer(&g_gamma), outer(&g_beta))
        };

        let (g_z2, g_film2_gain, g_film2_bias) =
            film_back(&c3.input, &cache.u2, &cache.z2, &cache.gamma2);
        let c2 = self.conv2.backward(&cache.h1, h, w, &g_z2);
        let (g_z1, g_film1_gain, g_film1_bias) =
            film_back(&c2.input, &cache.u1, &cache.z1, &cache.gamma1);
        let c1 = self.conv1.backward(x, h, w, &g_z1);

        let mut g = Vec::with_capacity(self.mean_map.len() + 1);
        g.extend(g_mean);
        g.push(g_log_var);
        g.extend(c1.weight);
        g.extend(c1.bias);
        g.extend(g_film1_gain);
        g.extend(g_film1_bias);
        g.extend(c2.weight);
        g.extend(c2.bias);
        g.extend(g_film2_gain);
        g.extend(g_film2_bias);
        g.extend(c3.weight);
        g.extend(c3.bias);
        g
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ToyHeader {
            kind: TOY_KIND.into(),
            architecture: self.arch,
            height: self.height,
            width: self.width,
            channels: self.channels,
            schedule: self.meta.schedule,
        };
        checkpoint::write(path, &header, &self.flat_params())
    }

    pub fn load(path: &Path, schedule: &NoiseSchedule) -> Result<Self> {
        let (header, params): (ToyHeader, _) = checkpoint::read(path, TOY_KIND)?;
        Self::from_parts(path, header, params, schedule)
    }

    pub(crate) fn from_bytes(path: &Path, bytes: &[u8], schedule: &NoiseSchedule) -> Result<Self> {
        let (header, params): (ToyHeader, _) = checkpoint::decode(path, bytes, TOY_KIND)?;
        Self::from_parts(path, header, params, schedule)
    }

    fn from_parts(
        path: &Path,
        header: ToyHeader,
        params: Vec<f64>,
        schedule: &NoiseSchedule,
    ) -> Result<Self> {
        let meta = Self::metadata_for(
            header.height,
            header.width,
            header.channels,
            header.schedule,
        );
        meta.check_schedule(schedule)?;
        // Shapes come from the header; the RNG only fills values we overwrite.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::new(
            header.height,
            header.width,
            header.channels,
            header.architecture,
            schedule,
            &mut rng,
        )
        .map_err(|e| Error::load(path, e))?;
        if params.len() != model.param_count() {
            return Err(Error::load(
                path,
                format!(
                    "expected {} parameters for {:?}, found {}",
                    model.param_count(),
                    header.architecture,
                    params.len()
                ),
            ));
        }
        model.set_flat_params(&params);
        Ok(model)
    }
}

impl Denoiser for ToyDenoiser {
    fn predict(&self, x_t: &ImageTensor, t: usize) -> Result<ImageTensor> {
        self.schedule.check_step(t)?;
        self.meta.check_input(x_t.shape())?;
        let (out, _) = self.forward(x_t.data(), t);
        Ok(x_t.with_data(out))
    }

    fn metadata(&self) -> &DenoiserMetadata {
        &self.meta
    }
}

struct Probe {
    image: usize,
    t: usize,
    noise: ImageTensor,
}

fn probe_set(dataset: &[ImageTensor], schedule: &NoiseSchedule, n: usize, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let image = rng.random_range(0..dataset.len());
            let t = rng.random_range(1..=schedule.steps());
            let noise = gaussian_noise_like(&dataset[image], &mut rng);
            Probe { image, t, noise }
        })
        .collect()
}

fn probe_loss(
    model: &dyn Denoiser,
    dataset: &[ImageTensor],
    probes: &[Probe],
    schedule: &NoiseSchedule,
) -> Result<f64> {
    let mut total = 0.0;
    for p in probes {
        let x_t = forward_noise(&dataset[p.image], p.t, schedule, &p.noise)?;
        let eps = model.predict(&x_t, p.t)?;
        total += eps.sub(&p.noise).data().iter().map(|d| d * d).sum::<f64>() / eps.len() as f64;
    }
    Ok(total / probes.len() as f64)
}

fn signed_dataset(dataset: &[ImageTensor]) -> Result<Vec<ImageTensor>> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Data("empty training dataset".into()))?;
    dataset
        .iter()
        .map(|img| {
            if !img.same_shape(first) {
                return Err(Error::Data(format!(
                    "resolution mismatch: {} vs {}",
                    format_shape(first.shape()),
                    format_shape(img.shape())
                )));
            }
            Ok(match img.range() {
                Range::Unit => img.to_signed(),
                Range::Signed => img.clone(),
            })
        })
        .collect()
}

/// Monte Carlo estimate of `E‖ε̂ − ε‖²/n` over `samples` draws of image,
/// uniform `t` and noise.
pub fn epsilon_loss<R: Rng + ?Sized>(
    model: &dyn Denoiser,
    dataset: &[ImageTensor],
    schedule: &NoiseSchedule,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let data = signed_dataset(dataset)?;
    let seed = rng.random();
    probe_loss(
        model,
        &data,
        &probe_set(&data, schedule, samples, seed),
        schedule,
    )
}

/// Train a [`ToyDenoiser`] on the standard ε-prediction objective.
///
/// Single-threaded; the same config and data give bit-identical parameters.
pub fn train_toy_denoiser(
    dataset: &[ImageTensor],
    schedule: &NoiseSchedule,
    config: &TrainingConfig,
) -> Result<(DenoiserHandle, TrainingReport)> {
    let (model, report) = train_toy_model(dataset, schedule, config)?;
    Ok((Arc::new(model), report))
}

/// Like [`train_toy_denoiser`] but returns the concrete model, e.g. to save it.
pub fn train_toy_model(
    dataset: &[ImageTensor],
    schedule: &NoiseSchedule,
    config: &TrainingConfig,
) -> Result<(ToyDenoiser, TrainingReport)> {
    let data = signed_dataset(dataset)?;
    if config.eval_every == 0 || config.eval_samples == 0 {
        return Err(Error::Config(
            "eval_every and eval_samples must be positive".into(),
        ));
    }
    let (h, w, c) = data[0].shape();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ToyDenoiser::new(h, w, c, config.architecture, schedule, &mut rng)?;
    // Start the mean map at the data mean.
    let n = data.len() as f64;
    for img in &data {
        for (m, v) in model.mean_map.iter_mut().zip(img.data()) {
            *m += v / n;
        }
    }

    let probes = probe_set(
        &data,
        schedule,
        config.eval_samples,
        config.seed ^ 0x5eed_cafe,
    );
    let mut params = model.flat_params();
    let mut opt = Adam::new(params.len(), config.learning_rate);
    let mut eval_losses = vec![probe_loss(&model, &data, &probes, schedule)?];

    for step in 1..=config.steps {
        let img = &data[rng.random_range(0..data.len())];
        let t = rng.random_range(1..=schedule.steps());
        let noise = gaussian_noise_like(img, &mut rng);
        let x_t = forward_noise(img, t, schedule, &noise)?;
        let (out, cache) = model.forward(x_t.data(), t);
        let scale = 2.0 / out.len() as f64;
        let g_out: Vec<f64> = out
            .iter()
            .zip(noise.data())
            .map(|(o, e)| scale * (o - e))
            .collect();
        let grads = model.backward(x_t.data(), &cache, &g_out);
        if !grads.iter().all(|g| g.is_finite()) {
            return Err(Error::Model(format!(
                "non-finite gradient at training step {step}"
            )));
        }
        // Cosine decay to 10% of the base rate.
        let progress = step as f64 / config.steps as f64;
        opt.set_lr(config.learning_rate * (0.55 + 0.45 * (std::f64::consts::PI * progress).cos()));
        opt.update(&mut params, &grads);
        model.set_flat_params(&params);
        if step % config.eval_every == 0 {
            eval_losses.push(probe_loss(&model, &data, &probes, schedule)?);
        }
    }

    let final_loss = probe_loss(&model, &data, &probes, schedule)?;
    let report = TrainingReport {
        eval_losses,
        final_loss,
        param_checksum: model.checksum(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::zero_denoiser;

    fn tiny_config(steps: usize) -> TrainingConfig {
        TrainingConfig {
            seed: 3,
            steps,
            learning_rate: 1e-2,
            eval_every: 50,
            eval_samples: 32,
            architecture: ToyArchitecture {
                hidden: 4,
                time_features: 4,
            },
        }
    }

    fn gradient_image(h: usize, w: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, 3, Range::Unit, |y, x, c| {
            0.2 + 0.6 * (y + x) as f64 / (h + w) as f64 + 0.05 * c as f64
        })
    }

    #[test]
    fn backward_matches_finite_differences() {
        let s = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arch = ToyArchitecture {
            hidden: 3,
            time_features: 4,
        };
        let mut model = ToyDenoiser::new(3, 4, 3, arch, &s, &mut rng).unwrap();
        // Give every parameter a generic value so no path is trivially zero.
        let mut p = model.flat_params();
        for v in p.iter_mut() {
            *v += 0.3 * (rng.random::<f64>() - 0.5);
        }
        model.set_flat_params(&p);
        let x: Vec<f64> = (0..36).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let target: Vec<f64> = (0..36).map(|_| rng.random::<f64>() - 0.5).collect();
        let t = 123;
        let loss = |m: &ToyDenoiser| -> f64 {
            m.forward(&x, t)
                .0
                .iter()
                .zip(&target)
                .map(|(o, e)| (o - e) * (o - e))
                .sum()
        };
        let (out, cache) = model.forward(&x, t);
        let g_out: Vec<f64> = out
            .iter()
            .zip(&target)
            .map(|(o, e)| 2.0 * (o - e))
            .collect();
        let grads = model.backward(&x, &cache, &g_out);
        let h = 1e-6;
        for i in 0..p.len() {
            let mut m = model.clone();
            let mut q = p.clone();
            q[i] += h;
            m.set_flat_params(&q);
            let up = loss(&m);
            q[i] -= 2.0 * h;
            m.set_flat_params(&q);
            let fd = (up - loss(&m)) / (2.0 * h);
            let err = (fd - grads[i]).abs() / (fd.abs().max(grads[i].abs()).max(1e-4));
            assert!(err < 1e-4, "param {i}: fd {fd} vs analytic {}", grads[i]);
        }
    }

    #[test]
    fn zero_predictor_baseline_is_unit() {
        let s = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = vec![gradient_image(8, 8)];
        let loss = epsilon_loss(zero_denoiser(&s).as_ref(), &data, &s, 400, &mut rng).unwrap();
        // 400 × 192 unit-variance squares: standard error ≈ 0.005.
        assert!((loss - 1.0).abs() < 0.03, "{loss}");
    }

    #[test]
    fn training_is_deterministic_and_improves() {
        let s = NoiseSchedule::default();
        let data = vec![gradient_image(6, 6), gradient_image(6, 6).map(|v| 1.0 - v)];
        let cfg = tiny_config(200);
        let (_, r1) = train_toy_model(&data, &s, &cfg).unwrap();
        let (_, r2) = train_toy_model(&data, &s, &cfg).unwrap();
        assert_eq!(r1.param_checksum, r2.param_checksum);
        assert_eq!(r1.eval_losses, r2.eval_losses);
        for w in r1.eval_losses.windows(2).take(3) {
            assert!(w[1] < w[0], "eval losses {:?}", r1.eval_losses);
        }
    }

    #[test]
    fn rejects_bad_datasets() {
        let s = NoiseSchedule::default();
        let cfg = tiny_config(10);
        assert!(matches!(
            train_toy_denoiser(&[], &s, &cfg),
            Err(Error::Data(_))
        ));
        let mixed = vec![gradient_image(4, 4), gradient_image(4, 5)];
        assert!(matches!(
            train_toy_denoiser(&mixed, &s, &cfg),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let s = NoiseSchedule::default();
        let (model, _) = train_toy_model(&[gradient_image(4, 4)], &s, &tiny_config(20)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.ckpt");
        model.save(&path).unwrap();
        let back = ToyDenoiser::load(&path, &s).unwrap();
        assert_eq!(back.checksum(), model.checksum());
        let x = gradient_image(4, 4).to_signed();
        assert_eq!(
            back.predict(&x, 40).unwrap(),
            model.predict(&x, 40).unwrap()
        );

        let other =
            crate::diffusion::make_schedule(100, crate::diffusion::BetaSpec::default()).unwrap();
        assert!(matches!(
            ToyDenoiser::load(&path, &other),
            Err(Error::Compatibility { .. })
        ));
    }
}
