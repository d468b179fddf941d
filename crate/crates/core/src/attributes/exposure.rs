use serde::{Deserialize, Serialize};

use super::{luma, luma_backward};
use crate::error::{Error, Result};
use crate::image::{ImageTensor, Range};

/// Which way the normalized luminance deviation moves the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureSign {
    /// `E = B − A·Norm(Y − Ȳ)`: dark pixels get the larger targets.
    #[default]
    DarkBoost,
    /// `E = B + A·Norm(Y − Ȳ)`, the formula with its printed sign.
    Literal,
}

/// Per-pixel target exposure derived from a low-light input.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureMap {
    values: ImageTensor,
    base: f64,
    amplitude: f64,
}

impl ExposureMap {
    /// Constant target `value` everywhere (amplitude 0).
    pub fn uniform(height: usize, width: usize, value: f64) -> Self {
        Self {
            values: ImageTensor::filled(height, width, 1, Range::Unit, value),
            base: value,
            amplitude: 0.0,
        }
    }

    pub fn values(&self) -> &ImageTensor {
        &self.values
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }
}

pub const DEFAULT_EXPOSURE_BASE: f64 = 0.46;
pub const DEFAULT_EXPOSURE_AMPLITUDE: f64 = 0.25;
pub const DEFAULT_POOL_SIZE: usize = 16;

/// Build the target map from `y0` in `[0,1]` with the dark-boost sign.
pub fn exposure_map(y0: &ImageTensor, amplitude: f64, base: f64) -> Result<ExposureMap> {
    exposure_map_with_sign(y0, amplitude, base, ExposureSign::DarkBoost)
}

pub fn exposure_map_with_sign(
    y0: &ImageTensor,
    amplitude: f64,
    base: f64,
    sign: ExposureSign,
) -> Result<ExposureMap> {
    if !(amplitude >= 0.0) {
        return Err(Error::Config(format!("exposure amplitude {amplitude} < 0")));
    }
    if !(base > 0.0 && base < 1.0) {
        return Err(Error::Config(format!(
            "exposure base {base} outside (0, 1)"
        )));
    }
    let y = luma(y0);
    let avg = y.iter().sum::<f64>() / y.len() as f64;
    let d: Vec<f64> = y.iter().map(|v| v - avg).collect();
    let (lo, hi) = d
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let s = match sign {
        ExposureSign::DarkBoost => -1.0,
        ExposureSign::Literal => 1.0,
    };
    let values = d
        .iter()
        .map(|&v| {
            let norm = if hi > lo {
                2.0 * (v - lo) / (hi - lo) - 1.0
            } else {
                0.0
            };
            base + s * amplitude * norm
        })
        .collect();
    Ok(ExposureMap {
        values: ImageTensor::new(y0.height(), y0.width(), 1, Range::Unit, values)?,
        base,
        amplitude,
    })
}

/// Non-overlapping `pool × pool` averages; edge pools may be partial.
/// Returns the pooled map and each pool's pixel count.
pub(crate) fn avg_pool(values: &[f64], h: usize, w: usize, pool: usize) -> (Vec<f64>, Vec<usize>) {
    let (ph, pw) = (h.div_ceil(pool), w.div_ceil(pool));
    let mut sums = vec![0.0; ph * pw];
    let mut counts = vec![0usize; ph * pw];
    for y in 0..h {
        for x in 0..w {
            let p = (y / pool) * pw + x / pool;
            sums[p] += values[y * w + x];
            counts[p] += 1;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        *s /= c as f64;
    }
    (sums, counts)
}

fn check_inputs(x0hat: &ImageTensor, e: &ExposureMap, pool: usize) -> Result<()> {
    if pool == 0 {
        return Err(Error::Config("pool size must be positive".into()));
    }
    if (x0hat.height(), x0hat.width()) != (e.values.height(), e.values.width()) {
        return Err(Error::shape(
            format!("{}x{}", e.values.height(), e.values.width()),
            format!("{}x{}", x0hat.height(), x0hat.width()),
        ));
    }
    Ok(())
}

/// Mean squared difference between pooled luminance of `x0hat` and pooled `E`.
pub fn exposure_loss(x0hat: &ImageTensor, e: &ExposureMap, pool: usize) -> Result<f64> {
    Ok(exposure_loss_and_grad(x0hat, e, pool)?.0)
}

/// Loss and its gradient with respect to `x0hat` (both on the `[0,1]` scale).
pub fn exposure_loss_and_grad(
    x0hat: &ImageTensor,
    e: &ExposureMap,
    pool: usize,
) -> Result<(f64, ImageTensor)> {
    check_inputs(x0hat, e, pool)?;
    let (h, w) = (x0hat.height(), x0hat.width());
    let (py, counts) = avg_pool(&luma(x0hat), h, w, pool);
    let (pe, _) = avg_pool(e.values.data(), h, w, pool);
    let n = py.len() as f64;
    let diff: Vec<f64> = py.iter().zip(&pe).map(|(a, b)| a - b).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;

    let pw = w.div_ceil(pool);
    let mut g_luma = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let p = (y / pool) * pw + x / pool;
            g_luma[y * w + x] = 2.0 * diff[p] / (n * counts[p] as f64);
        }
    }
    Ok((loss, luma_backward(x0hat, &g_luma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gray(values: &[f64], h: usize, w: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, 3, Range::Unit, |y, x, _| values[y * w + x])
    }

    #[test]
    fn constant_input_gives_base() {
        let img = ImageTensor::filled(5, 7, 3, Range::Unit, 0.13);
        let e = exposure_map(&img, 0.25, 0.46).unwrap();
        assert!(e.values().data().iter().all(|&v| v == 0.46));
    }

    #[test]
    fn two_by_two_grid() {
        // Y = [0, .2; .4, 1]: Ȳ = .4, d = [-.4, -.2, 0, .6], Norm = [-1, -.6, -.2, 1].
        let img = gray(&[0.0, 0.2, 0.4, 1.0], 2, 2);
        let e = exposure_map(&img, 0.25, 0.46).unwrap();
        let want = [0.71, 0.61, 0.51, 0.21];
        for (got, want) in e.values().data().iter().zip(want) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        let lit = exposure_map_with_sign(&img, 0.25, 0.46, ExposureSign::Literal).unwrap();
        assert_relative_eq!(lit.values()[0], 0.21, epsilon = 1e-12);
        assert_relative_eq!(lit.values()[3], 0.71, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = ImageTensor::filled(2, 2, 3, Range::Unit, 0.5);
        assert!(exposure_map(&img, -0.1, 0.46).is_err());
        assert!(exposure_map(&img, 0.25, 1.0).is_err());
        let e = ExposureMap::uniform(2, 2, 0.46);
        assert!(matches!(exposure_loss(&img, &e, 0), Err(Error::Config(_))));
    }

    #[test]
    fn black_image_against_uniform_target() {
        let img = ImageTensor::zeros(9, 6, 3, Range::Unit);
        let e = ExposureMap::uniform(9, 6, 0.46);
        for pool in [1, 2, 4, 16] {
            assert_relative_eq!(
                exposure_loss(&img, &e, pool).unwrap(),
                0.2116,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn zero_when_luminance_matches() {
        let img = gray(&[0.1, 0.5, 0.3, 0.9, 0.2, 0.7], 2, 3);
        let e = exposure_map(&img, 0.25, 0.46).unwrap();
        let matched = gray(e.values().data(), 2, 3);
        assert!(exposure_loss(&matched, &e, 2).unwrap() < 1e-30);
    }

    #[test]
    fn pooling_then_mse_brute_force() {
        let img = ImageTensor::from_fn(4, 4, 3, Range::Unit, |y, x, c| {
            ((y * 7 + x * 3 + c * 5) % 11) as f64 / 10.0
        });
        let e = ExposureMap {
            values: ImageTensor::from_fn(4, 4, 1, Range::Unit, |y, x, _| {
                0.2 + 0.05 * ((y * 4 + x) % 5) as f64
            }),
            base: 0.46,
            amplitude: 0.25,
        };
        let mut total = 0.0;
        for by in 0..2 {
            for bx in 0..2 {
                let (mut sy, mut se) = (0.0, 0.0);
                for y in 2 * by..2 * by + 2 {
                    for x in 2 * bx..2 * bx + 2 {
                        sy += 0.299 * img.get(y, x, 0)
                            + 0.587 * img.get(y, x, 1)
                            + 0.114 * img.get(y, x, 2);
                        se += e.values().get(y, x, 0);
                    }
                }
                total += ((sy - se) / 4.0).powi(2);
            }
        }
        assert_relative_eq!(
            exposure_loss(&img, &e, 2).unwrap(),
            total / 4.0,
            max_relative = 1e-12
        );
    }
}
