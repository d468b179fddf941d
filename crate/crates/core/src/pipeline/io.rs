use std::path::Path;

use ::image::imageops::{self, FilterType};
use ::image::{DynamicImage, ImageBuffer, ImageError, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Range};

/// Read an 8-bit PNG or JPEG into `[0,1]`. Grayscale stays single channel;
/// alpha is dropped.
pub fn load_image(path: &Path) -> Result<ImageTensor> {
    let img = ::image::open(path).map_err(|e| match e {
        ImageError::IoError(io) => Error::Io(io),
        other => Error::Format(format!("{}: {other}", path.display())),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, img.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, img.to_rgb8().into_raw()),
        other => {
            return Err(Error::Format(format!(
                "{}: only 8-bit channels are supported, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    ImageTensor::new(
        h,
        w,
        channels,
        Range::Unit,
        bytes.into_iter().map(|b| b as f64 / 255.0).collect(),
    )
}

/// Write `img` (in `[0,1]`) as an 8-bit PNG, rounding half to even.
pub fn save_image(img: &ImageTensor, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round_ties_even().clamp(0.0, 255.0) as u8)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(ImageBuffer::from_raw(w, h, bytes).expect("buffer size")),
        _ => DynamicImage::ImageRgb8(ImageBuffer::from_raw(w, h, bytes).expect("buffer size")),
    };
    dynamic
        .save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|e| match e {
            ImageError::IoError(io) => Error::Io(io),
            other => Error::Format(other.to_string()),
        })
}

/// How an input was fitted to the denoiser's resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ResizeRecord {
    Native,
    CenterCropResize {
        from: (usize, usize),
        crop: (usize, usize),
        to: (usize, usize),
    },
}

/// Center-crop `img` to the aspect ratio of `(th, tw)`, then resize with a
/// triangle filter. Returns the input unchanged when it already matches.
pub fn center_crop_resize(
    img: &ImageTensor,
    (th, tw): (usize, usize),
) -> (ImageTensor, ResizeRecord) {
    let (h, w, c) = img.shape();
    if (h, w) == (th, tw) {
        return (img.clone(), ResizeRecord::Native);
    }
    // Largest crop with the target aspect ratio.
    let (ch, cw) = if h * tw >= w * th {
        ((w * th + tw / 2) / tw, w)
    } else {
        (h, (h * tw + th / 2) / th)
    };
    let (ch, cw) = (ch.clamp(1, h), cw.clamp(1, w));
    let (y0, x0) = ((h - ch) / 2, (w - cw) / 2);
    let data: Vec<f32> = (0..ch)
        .flat_map(|y| (0..cw).flat_map(move |x| (0..c).map(move |k| (y0 + y, x0 + x, k))))
        .map(|(y, x, k)| img.get(y, x, k) as f32)
        .collect();
    let (cw32, ch32, tw32, th32) = (cw as u32, ch as u32, tw as u32, th as u32);
    let out: Vec<f32> = if c == 1 {
        let buf: ImageBuffer<Luma<f32>, _> =
            ImageBuffer::from_raw(cw32, ch32, data).expect("crop size");
        imageops::resize(&buf, tw32, th32, FilterType::Triangle).into_raw()
    } else {
        let buf: ImageBuffer<Rgb<f32>, _> =
            ImageBuffer::from_raw(cw32, ch32, data).expect("crop size");
        imageops::resize(&buf, tw32, th32, FilterType::Triangle).into_raw()
    };
    let tensor = ImageTensor::new(
        th,
        tw,
        c,
        img.range(),
        out.into_iter().map(f64::from).collect(),
    )
    .expect("resize output shape");
    (
        tensor,
        ResizeRecord::CenterCropResize {
            from: (h, w),
            crop: (ch, cw),
            to: (th, tw),
        },
    )
}
