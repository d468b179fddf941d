//! Dense `H×W×C` image storage used by every stage of the pipeline.
//!
//! Pixels are `f64`, interleaved in row-major HWC order. The declared
//! [`Range`] records which interval the values are meant to live in; it is
//! only enforced by [`ImageTensor::clamped`], so intermediate diffusion
//! states may legitimately leave it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Declared dynamic range of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Range {
    /// `[0, 1]`, used at I/O and loss boundaries.
    Unit,
    /// `[-1, 1]`, used inside the sampler.
    Signed,
}

impl Range {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Range::Unit => (0.0, 1.0),
            Range::Signed => (-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb,
    Luminance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    range: Range,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        range: Range,
        data: Vec<f64>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("H, W >= 1", format!("{height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Channel(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(
                format!("{} values", height * width * channels),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            range,
            data,
        })
    }

    /// Panics if the dimensions are invalid.
    pub fn filled(height: usize, width: usize, channels: usize, range: Range, value: f64) -> Self {
        Self::new(
            height,
            width,
            channels,
            range,
            vec![value; height * width * channels],
        )
        .expect("invalid image dimensions")
    }

    pub fn zeros(height: usize, width: usize, channels: usize, range: Range) -> Self {
        Self::filled(height, width, channels, range, 0.0)
    }

    /// Builds an image from `f(y, x, c)`. Panics if the dimensions are invalid.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        range: Range,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, range, data).expect("invalid image dimensions")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn range(&self) -> Range {
        self.range
    }

    pub fn color_space(&self) -> ColorSpace {
        if self.channels == 3 {
            ColorSpace::Rgb
        } else {
            ColorSpace::Luminance
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    pub fn with_range(mut self, range: Range) -> Self {
        self.range = range;
        self
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn check_same_shape(&self, other: &ImageTensor) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(
                format_shape(self.shape()),
                format_shape(other.shape()),
            ))
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination. Panics on shape mismatch; callers check first.
    pub fn zip_map(&self, other: &ImageTensor, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        assert!(self.same_shape(other), "zip_map shape mismatch");
        self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `a·self + b·other`, keeping `self`'s declared range.
    pub fn axpby(&self, a: f64, other: &ImageTensor, b: f64) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| k * v)
    }

    pub fn sub(&self, other: &ImageTensor) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ImageTensor) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Clamp into the declared range.
    pub fn clamped(&self) -> Self {
        let (lo, hi) = self.range.bounds();
        self.map(|v| v.clamp(lo, hi))
    }

    /// `[0,1] → [-1,1]` via `2x − 1`.
    pub fn to_signed(&self) -> Self {
        self.map(|v| 2.0 * v - 1.0).with_range(Range::Signed)
    }

    /// `[-1,1] → [0,1]` via `(x + 1)/2`.
    pub fn to_unit(&self) -> Self {
        self.map(|v| 0.5 * (v + 1.0)).with_range(Range::Unit)
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// SHA-256 over the little-endian bit patterns of every value.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.data {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex_digest(&hasher.finalize())
    }

    /// Same header, new values. Panics if the length differs.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.data.len(), "with_data length mismatch");
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            range: self.range,
            data,
        }
    }
}

impl std::ops::Index<usize> for ImageTensor {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

pub(crate) fn format_shape((h, w, c): (usize, usize, usize)) -> String {
    format!("{h}x{w}x{c}")
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
