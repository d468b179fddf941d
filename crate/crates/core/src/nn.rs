//! Minimal dense building blocks shared by the trainable providers: a 3×3
//! same-padding convolution on channels-last feature maps with an explicit
//! backward pass, and Adam.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv3x3 {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[out][in][ky][kx]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub(crate) struct ConvGrads {
    pub input: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv3x3 {
    /// He-normal weights times `gain`, zero bias.
    pub fn init<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, gain: f64, rng: &mut R) -> Self {
        let std = gain * (2.0 / (in_ch * 9) as f64).sqrt();
        let weight = (0..out_ch * in_ch * 9)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            in_ch,
            out_ch,
            weight,
            bias: vec![0.0; out_ch],
        }
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_ch + i) * 3 + ky) * 3 + kx
    }

    pub fn forward(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        debug_assert_eq!(input.len(), h * w * self.in_ch);
        let mut out = vec![0.0; h * w * self.out_ch];
        for y in 0..h {
            for x in 0..w {
                let obase = (y * w + x) * self.out_ch;
                out[obase..obase + self.out_ch].copy_from_slice(&self.bias);
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let ibase = (sy as usize * w + sx as usize) * self.in_ch;
                        for o in 0..self.out_ch {
                            let mut acc = 0.0;
                            for i in 0..self.in_ch {
                                acc += self.weight[self.widx(o, i, ky, kx)] * input[ibase + i];
                            }
                            out[obase + o] += acc;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn backward(&self, input: &[f64], h: usize, w: usize, grad_out: &[f64]) -> ConvGrads {
        let mut g_in = vec![0.0; input.len()];
        let mut g_w = vec![0.0; self.weight.len()];
        let mut g_b = vec![0.0; self.out_ch];
        for y in 0..h {
            for x in 0..w {
                let obase = (y * w + x) * self.out_ch;
                for o in 0..self.out_ch {
                    g_b[o] += grad_out[obase + o];
                }
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let ibase = (sy as usize * w + sx as usize) * self.in_ch;
                        for o in 0..self.out_ch {
                            let go = grad_out[obase + o];
                            if go == 0.0 {
                                continue;
                            }
                            for i in 0..self.in_ch {
                                let wi = self.widx(o, i, ky, kx);
                                g_w[wi] += go * input[ibase + i];
                                g_in[ibase + i] += go * self.weight[wi];
                            }
                        }
                    }
                }
            }
        }
        ConvGrads {
            input: g_in,
            weight: g_w,
            bias: g_b,
        }
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

pub(crate) fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let conv = Conv3x3::init(2, 3, 1.0, &mut rng);
        let (h, w) = (4, 5);
        let input: Vec<f64> = (0..h * w * 2).map(|_| rng.random::<f64>() - 0.5).collect();
        let probe: Vec<f64> = (0..h * w * 3).map(|_| rng.random::<f64>() - 0.5).collect();
        let objective = |c: &Conv3x3, inp: &[f64]| -> f64 {
            c.forward(inp, h, w)
                .iter()
                .zip(&probe)
                .map(|(a, b)| a * b)
                .sum()
        };
        let grads = conv.backward(&input, h, w, &probe);
        let step = 1e-6;
        for i in 0..input.len() {
            let mut p = input.clone();
            p[i] += step;
            let mut m = input.clone();
            m[i] -= step;
            let fd = (objective(&conv, &p) - objective(&conv, &m)) / (2.0 * step);
            assert!((fd - grads.input[i]).abs() < 1e-8);
        }
        for i in 0..conv.weight.len() {
            let mut c = conv.clone();
            c.weight[i] += step;
            let up = objective(&c, &input);
            c.weight[i] -= 2.0 * step;
            let fd = (up - objective(&c, &input)) / (2.0 * step);
            assert!((fd - grads.weight[i]).abs() < 1e-8);
        }
        let bias_sum: Vec<f64> = (0..3)
            .map(|o| probe.iter().skip(o).step_by(3).sum())
            .collect();
        for o in 0..3 {
            assert!((bias_sum[o] - grads.bias[o]).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.update(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2));
    }
}
