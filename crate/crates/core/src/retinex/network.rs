//! Convolutional illumination estimator.
//!
//! Three 3×3 conv layers (`C → hidden → hidden → 1`, ReLU between) produce
//! `z`; the illumination is `L = floor + (1 − floor)·σ(z)` and the
//! reflectance `R = clamp(img / L, 0, 1)`. Checkpoints use the crate's
//! parameter container with kind `"retinex-net"` and carry the relative
//! reconstruction tolerance the weights were validated at; loading
//! re-measures it on a fixed probe image and refuses weights that miss it.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    reconstruction_error, ClassicalDecomposer, Decomposer, DecomposerHandle, Decomposition,
};
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::image::{ImageTensor, Range};
use crate::nn::{relu_inplace, sigmoid, Adam, Conv3x3};

const KIND: &str = "retinex-net";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetHeader {
    kind: String,
    channels: usize,
    hidden: usize,
    floor: f64,
    reconstruction_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkDecomposer {
    channels: usize,
    hidden: usize,
    floor: f64,
    tolerance: f64,
    conv1: Conv3x3,
    conv2: Conv3x3,
    conv3: Conv3x3,
}

struct Trace {
    h1: Vec<f64>,
    h2: Vec<f64>,
    sig: Vec<f64>,
    l: Vec<f64>,
}

/// Fixed smooth probe used to validate reconstruction at load time.
fn probe_image(channels: usize) -> ImageTensor {
    ImageTensor::from_fn(16, 16, channels, Range::Unit, |y, x, c| {
        0.5 + 0.4 * (0.35 * x as f64 + 0.2 * y as f64 + 1.3 * c as f64).sin()
    })
}

impl NetworkDecomposer {
    fn init<R: Rng + ?Sized>(channels: usize, hidden: usize, floor: f64, rng: &mut R) -> Self {
        Self {
            channels,
            hidden,
            floor,
            tolerance: f64::INFINITY,
            conv1: Conv3x3::init(channels, hidden, 1.0, rng),
            conv2: Conv3x3::init(hidden, hidden, 1.0, rng),
            conv3: Conv3x3::init(hidden, 1, 0.5, rng),
        }
    }

    fn layers(&self) -> [&Conv3x3; 3] {
        [&self.conv1, &self.conv2, &self.conv3]
    }

    fn flat_params(&self) -> Vec<f64> {
        self.layers()
            .iter()
            .flat_map(|c| c.weight.iter().chain(&c.bias).copied())
            .collect()
    }

    fn set_flat_params(&mut self, p: &[f64]) {
        let mut at = 0;
        for conv in [&mut self.conv1, &mut self.conv2, &mut self.conv3] {
            let nw = conv.weight.len();
            conv.weight.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = conv.bias.len();
            conv.bias.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
    }

    fn forward(&self, img: &ImageTensor) -> Trace {
        let (h, w, _) = img.shape();
        let mut h1 = self.conv1.forward(img.data(), h, w);
        relu_inplace(&mut h1);
        let mut h2 = self.conv2.forward(&h1, h, w);
        relu_inplace(&mut h2);
        let z = self.conv3.forward(&h2, h, w);
        let sig: Vec<f64> = z.iter().map(|v| sigmoid(*v)).collect();
        let l = sig
            .iter()
            .map(|s| self.floor + (1.0 - self.floor) * s)
            .collect();
        Trace { h1, h2, sig, l }
    }

    /// Back-propagate `∂ℓ/∂L` to the input and the parameters.
    fn backward_from_l(&self, img: &ImageTensor, tr: &Trace, g_l: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (h, w, _) = img.shape();
        let g_z: Vec<f64> = g_l
            .iter()
            .zip(&tr.sig)
            .map(|(g, s)| g * (1.0 - self.floor) * s * (1.0 - s))
            .collect();
        let c3 = self.conv3.backward(&tr.h2, h, w, &g_z);
        let g_h2: Vec<f64> = c3
            .input
            .iter()
            .zip(&tr.h2)
            .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
            .collect();
        let c2 = self.conv2.backward(&tr.h1, h, w, &g_h2);
        let g_h1: Vec<f64> = c2
            .input
            .iter()
            .zip(&tr.h1)
            .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
            .collect();
        let c1 = self.conv1.backward(img.data(), h, w, &g_h1);
        let mut params = Vec::new();
        for g in [&c1, &c2, &c3] {
            params.extend_from_slice(&g.weight);
            params.extend_from_slice(&g.bias);
        }
        (c1.input, params)
    }

    pub fn save(&self, path: &Path, reconstruction_tolerance: f64) -> Result<()> {
        let header = NetHeader {
            kind: KIND.into(),
            channels: self.channels,
            hidden: self.hidden,
            floor: self.floor,
            reconstruction_tolerance,
        };
        checkpoint::write(path, &header, &self.flat_params())
    }

    /// Reconstruction error on the built-in probe image.
    pub fn probe_reconstruction_error(&self) -> Result<f64> {
        let probe = probe_image(self.channels);
        Ok(reconstruction_error(
            &probe,
            &self.decompose(&probe)?,
            self.floor,
        ))
    }
}

impl Decomposer for NetworkDecomposer {
    fn name(&self) -> &str {
        "network"
    }

    fn decompose(&self, img: &ImageTensor) -> Result<Decomposition> {
        if img.channels() != self.channels {
            return Err(Error::Compatibility {
                what: "channels".into(),
                expected: self.channels.to_string(),
                actual: img.channels().to_string(),
            });
        }
        let (h, w, c) = img.shape();
        let tr = self.forward(img);
        let reflectance = img
            .with_data(
                img.data()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / tr.l[i / c]).clamp(0.0, 1.0))
                    .collect(),
            )
            .with_range(Range::Unit);
        Ok(Decomposition {
            reflectance,
            illumination: ImageTensor::new(h, w, 1, Range::Unit, tr.l)?,
        })
    }

    fn reflectance_vjp(&self, img: &ImageTensor, grad_r: &ImageTensor) -> Result<ImageTensor> {
        img.check_same_shape(grad_r)?;
        let (h, w, c) = img.shape();
        let tr = self.forward(img);
        let mut g_img = vec![0.0; img.len()];
        let mut g_l = vec![0.0; h * w];
        for (i, (&v, &g)) in img.data().iter().zip(grad_r.data()).enumerate() {
            let l = tr.l[i / c];
            if (0.0..=1.0).contains(&(v / l)) {
                g_img[i] += g / l;
                g_l[i / c] -= g * v / (l * l);
            }
        }
        let (g_in, _) = self.backward_from_l(img, &tr, &g_l);
        for (a, b) in g_img.iter_mut().zip(g_in) {
            *a += b;
        }
        Ok(grad_r.with_data(g_img))
    }

    fn reconstruction_tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Load a network decomposer and verify its declared reconstruction
/// tolerance on the probe image.
pub fn load_decomposer_network(path: &Path) -> Result<DecomposerHandle> {
    let (header, params): (NetHeader, _) = checkpoint::read(path, KIND)?;
    if header.channels != 1 && header.channels != 3 {
        return Err(Error::load(
            path,
            format!("unsupported channel count {}", header.channels),
        ));
    }
    if header.hidden == 0 || !(header.floor > 0.0 && header.floor < 1.0) {
        return Err(Error::load(path, "invalid architecture in header"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = NetworkDecomposer::init(header.channels, header.hidden, header.floor, &mut rng);
    if params.len() != net.flat_params().len() {
        return Err(Error::load(
            path,
            "parameter count does not match architecture",
        ));
    }
    net.set_flat_params(&params);
    net.tolerance = header.reconstruction_tolerance;
    let measured = net.probe_reconstruction_error()?;
    if !(measured <= header.reconstruction_tolerance) {
        return Err(Error::load(
            path,
            format!(
                "reconstruction error {measured:.3e} exceeds declared tolerance {:.3e}",
                header.reconstruction_tolerance
            ),
        ));
    }
    Ok(Arc::new(net))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkTrainingConfig {
    pub seed: u64,
    pub steps: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    pub floor: f64,
}

impl Default for NetworkTrainingConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 400,
            learning_rate: 1e-2,
            hidden: 8,
            floor: 1e-3,
        }
    }
}

/// Fit a network decomposer by regressing its illumination onto the
/// classical estimator's on `images`, then return it with its measured
/// probe reconstruction error.
pub fn train_decomposer_network(
    images: &[ImageTensor],
    config: &NetworkTrainingConfig,
) -> Result<(NetworkDecomposer, f64)> {
    let first = images
        .first()
        .ok_or_else(|| Error::Data("no training images".into()))?;
    let channels = first.channels();
    let teacher = ClassicalDecomposer::new(3.0, config.floor)?;
    let targets: Vec<Vec<f64>> = images
        .iter()
        .map(|img| Ok(teacher.decompose(img)?.illumination.into_data()))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = NetworkDecomposer::init(channels, config.hidden, config.floor, &mut rng);
    let mut params = net.flat_params();
    let mut opt = Adam::new(params.len(), config.learning_rate);
    for _ in 0..config.steps {
        let k = rng.random_range(0..images.len());
        let img = &images[k];
        if img.channels() != channels {
            return Err(Error::Data(
                "training images must share a channel count".into(),
            ));
        }
        let tr = net.forward(img);
        let n = tr.l.len() as f64;
        let g_l: Vec<f64> =
            tr.l.iter()
                .zip(&targets[k])
                .map(|(l, t)| 2.0 * (l - t) / n)
                .collect();
        let (_, grads) = net.backward_from_l(img, &tr, &g_l);
        opt.update(&mut params, &grads);
        net.set_flat_params(&params);
    }
    let err = net.probe_reconstruction_error()?;
    net.tolerance = err;
    Ok((net, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn training_set() -> Vec<ImageTensor> {
        (0..4)
            .map(|k| {
                ImageTensor::from_fn(12, 12, 3, Range::Unit, |y, x, c| {
                    0.3 + 0.25 * ((x + k) as f64 * 0.4 + y as f64 * 0.3 + c as f64).cos()
                })
            })
            .collect()
    }

    #[test]
    fn missing_file_is_a_load_error() {
        let Err(err) = load_decomposer_network(Path::new("/nonexistent/rnet.ckpt")) else {
            panic!("expected an error");
        };
        assert!(matches!(err, Error::Load { .. }));
        assert!(err.to_string().contains("/nonexistent/rnet.ckpt"));
    }

    #[test]
    fn train_save_load_roundtrip() {
        let cfg = NetworkTrainingConfig {
            steps: 150,
            ..Default::default()
        };
        let (net, err) = train_decomposer_network(&training_set(), &cfg).unwrap();
        assert!(err.is_finite());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rnet.ckpt");
        net.save(&path, err * 1.01 + 1e-12).unwrap();
        let handle = load_decomposer_network(&path).unwrap();
        let img = &training_set()[1];
        let d = handle.decompose(img).unwrap();
        assert_eq!(d.reflectance.shape(), img.shape());
        assert_eq!(d.illumination.channels(), 1);

        // Declaring a tolerance the weights cannot meet is rejected.
        net.save(&path, err * 0.5).unwrap();
        assert!(matches!(
            load_decomposer_network(&path),
            Err(Error::Load { .. })
        ));
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = NetworkDecomposer::init(3, 4, 1e-3, &mut rng);
        let img = ImageTensor::from_fn(6, 6, 3, Range::Unit, |_, _, _| rng.random_range(0.05..0.5));
        let probe = img.map(|_| rng.random_range(-1.0..1.0));
        let f = |x: &ImageTensor| -> f64 {
            let r = net.decompose(x).unwrap().reflectance;
            r.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        };
        let g = net.reflectance_vjp(&img, &probe).unwrap();
        let scale = g.max_abs();
        for i in 0..img.len() {
            let mut p = img.clone();
            p.data_mut()[i] += 1e-6;
            let mut m = img.clone();
            m.data_mut()[i] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6 * scale);
            assert!(err < 1e-3, "idx {i}: fd {fd} vs {}", g[i]);
        }
    }
}
