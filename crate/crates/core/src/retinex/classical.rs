use super::{max_channel, Decomposer, Decomposition, GaussianBlur};
use crate::error::{Error, Result};
use crate::image::{ImageTensor, Range};

/// Blurred max-channel illumination estimator.
///
/// ```text
/// m = max_c img_c
/// L = max(floor, m, G_σ * m)
/// R = clamp(img / L, 0, 1)
/// ```
///
/// Bounding `L` below by `m` keeps `R ≤ 1` without clipping, so `R ⊙ L`
/// reproduces every pixel at or above the floor.
#[derive(Debug, Clone)]
pub struct ClassicalDecomposer {
    blur_sigma: f64,
    floor: f64,
    blur: GaussianBlur,
}

impl Default for ClassicalDecomposer {
    fn default() -> Self {
        Self::new(5.0, 1e-3).expect("default parameters are valid")
    }
}

enum Active {
    Floor,
    Pixel,
    Blurred,
}

struct Forward {
    argmax: Vec<usize>,
    l: Vec<f64>,
    active: Vec<Active>,
}

impl ClassicalDecomposer {
    pub fn new(blur_sigma: f64, floor: f64) -> Result<Self> {
        if !(blur_sigma > 0.0) {
            return Err(Error::Config(format!(
                "blur sigma {blur_sigma} must be positive"
            )));
        }
        if !(floor > 0.0) {
            return Err(Error::Config(format!(
                "illumination floor {floor} must be positive"
            )));
        }
        Ok(Self {
            blur_sigma,
            floor,
            blur: GaussianBlur::new(blur_sigma),
        })
    }

    pub fn blur_sigma(&self) -> f64 {
        self.blur_sigma
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn forward(&self, img: &ImageTensor) -> Forward {
        let (h, w, _) = img.shape();
        let (m, argmax) = max_channel(img);
        let blurred = self.blur.apply(&m, h, w);
        let (l, active) = m
            .iter()
            .zip(&blurred)
            .map(|(&mi, &bi)| {
                if self.floor >= mi && self.floor >= bi {
                    (self.floor, Active::Floor)
                } else if mi >= bi {
                    (mi, Active::Pixel)
                } else {
                    (bi, Active::Blurred)
                }
            })
            .unzip();
        Forward { argmax, l, active }
    }
}

/// Decompose `img` with a fresh [`ClassicalDecomposer`].
pub fn classical_decompose(
    img: &ImageTensor,
    blur_sigma: f64,
    floor: f64,
) -> Result<Decomposition> {
    ClassicalDecomposer::new(blur_sigma, floor)?.decompose(img)
}

impl Decomposer for ClassicalDecomposer {
    fn name(&self) -> &str {
        "classical"
    }

    fn decompose(&self, img: &ImageTensor) -> Result<Decomposition> {
        let (h, w, c) = img.shape();
        let fwd = self.forward(img);
        let reflectance = img.with_data(
            img.data()
                .iter()
                .enumerate()
                .map(|(i, v)| (v / fwd.l[i / c]).clamp(0.0, 1.0))
                .collect(),
        );
        Ok(Decomposition {
            reflectance: reflectance.with_range(Range::Unit),
            illumination: ImageTensor::new(h, w, 1, Range::Unit, fwd.l)?,
        })
    }

    fn reflectance_vjp(&self, img: &ImageTensor, grad_r: &ImageTensor) -> Result<ImageTensor> {
        img.check_same_shape(grad_r)?;
        let (h, w, c) = img.shape();
        let fwd = self.forward(img);
        let mut g_img = vec![0.0; img.len()];
        let mut g_l = vec![0.0; h * w];
        for (i, (&v, &g)) in img.data().iter().zip(grad_r.data()).enumerate() {
            let p = i / c;
            let l = fwd.l[p];
            let q = v / l;
            if (0.0..=1.0).contains(&q) {
                g_img[i] += g / l;
                g_l[p] -= g * v / (l * l);
            }
        }
        let mut g_m = vec![0.0; h * w];
        let mut g_blurred = vec![0.0; h * w];
        for p in 0..h * w {
            match fwd.active[p] {
                Active::Floor => {}
                Active::Pixel => g_m[p] += g_l[p],
                Active::Blurred => g_blurred[p] = g_l[p],
            }
        }
        for (gm, gb) in g_m
            .iter_mut()
            .zip(self.blur.apply_transpose(&g_blurred, h, w))
        {
            *gm += gb;
        }
        for p in 0..h * w {
            g_img[p * c + fwd.argmax[p]] += g_m[p];
        }
        Ok(grad_r.with_data(g_img))
    }

    fn reconstruction_tolerance(&self) -> f64 {
        1e-6
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retinex::reconstruction_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> ImageTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_fn(h, w, 3, Range::Unit, |_, _, _| rng.random_range(0.05..0.95))
    }

    #[test]
    fn constant_gray() {
        for g in [0.0, 5e-4, 0.3, 1.0] {
            let img = ImageTensor::filled(6, 5, 3, Range::Unit, g);
            let d = classical_decompose(&img, 5.0, 1e-3).unwrap();
            let l = g.max(1e-3);
            assert!(d.illumination.data().iter().all(|v| (v - l).abs() < 1e-15));
            assert!(d
                .reflectance
                .data()
                .iter()
                .all(|v| (v - g / l).abs() < 1e-12));
        }
    }

    #[test]
    fn black_image() {
        let img = ImageTensor::zeros(4, 4, 3, Range::Unit);
        let d = ClassicalDecomposer::default().decompose(&img).unwrap();
        assert!(d.illumination.data().iter().all(|v| *v == 1e-3));
        assert!(d.reflectance.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn brightness_scaling_leaves_reflectance() {
        let img = random_image(16, 16, 4);
        let dec = ClassicalDecomposer::default();
        let a = dec.decompose(&img).unwrap().reflectance;
        let b = dec.decompose(&img.scale(0.5)).unwrap().reflectance;
        let mad = a.sub(&b).data().iter().map(|v| v.abs()).sum::<f64>() / a.len() as f64;
        assert!(mad < 0.02, "{mad}");
    }

    #[test]
    fn reconstructs_above_floor() {
        let dec = ClassicalDecomposer::default();
        for seed in 0..5 {
            let img = random_image(12, 9, seed);
            let d = dec.decompose(&img).unwrap();
            assert_eq!(d.illumination.channels(), 1);
            assert_eq!(d.reflectance.shape(), img.shape());
            assert!(reconstruction_error(&img, &d, dec.floor()) < 1e-6);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let dec = ClassicalDecomposer::new(2.0, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..3 {
            let img = random_image(8, 8, 100 + seed);
            let probe = img.map(|_| rng.random_range(-1.0..1.0));
            let f = |x: &ImageTensor| -> f64 {
                let r = dec.decompose(x).unwrap().reflectance;
                r.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            };
            let g = dec.reflectance_vjp(&img, &probe).unwrap();
            let scale = g.max_abs();
            let h = 1e-6;
            for i in 0..img.len() {
                let mut p = img.clone();
                p.data_mut()[i] += h;
                let mut m = img.clone();
                m.data_mut()[i] -= h;
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6 * scale);
                assert!(err < 1e-3, "seed {seed} idx {i}: fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ClassicalDecomposer::new(0.0, 1e-3).is_err());
        assert!(ClassicalDecomposer::new(1.0, 0.0).is_err());
    }
}
