//! Final degradation: noise, blur, resolution loss, median filtering and JPEG
//! artifacts, applied in that fixed order.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::imageops::{self, FilterType};
use image::{DynamicImage, ImageFormat, Rgba, RgbaImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::filter::{gaussian_blur_plane, mirror};
use crate::layer::Layer;
use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PostOp {
    GaussianNoise { sigma: f32 },
    GaussianBlur { radius: f32 },
    /// Downscale by `scale`, then back to the original size.
    Resize { scale: f32 },
    MedianBlur { kernel: u32 },
    Jpeg { quality: u8 },
}

impl PostOp {
    pub fn name(&self) -> &'static str {
        match self {
            PostOp::GaussianNoise { .. } => "gaussian_noise",
            PostOp::GaussianBlur { .. } => "gaussian_blur",
            PostOp::Resize { .. } => "resize",
            PostOp::MedianBlur { .. } => "median_blur",
            PostOp::Jpeg { .. } => "jpeg",
        }
    }

    fn check(&self) -> Result<(), String> {
        match *self {
            PostOp::GaussianNoise { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => Err(format!("noise sigma {sigma}")),
            PostOp::GaussianBlur { radius } if !(radius >= 0.0 && radius.is_finite()) => Err(format!("blur radius {radius}")),
            PostOp::Resize { scale } if !(scale > 0.0 && scale <= 1.0) => Err(format!("resize scale {scale} not in (0, 1]")),
            PostOp::MedianBlur { kernel } if kernel % 2 == 0 => Err(format!("median kernel {kernel} must be odd")),
            PostOp::Jpeg { quality } if !(1..=100).contains(&quality) => Err(format!("jpeg quality {quality}")),
            _ => Ok(()),
        }
    }
}

/// Apply `ops` in order. Every op keeps the image size; alpha is left opaque.
pub fn postprocess<R: Rng + ?Sized>(layer: &Layer, ops: &[PostOp], rng: &mut R) -> Layer {
    let mut img = layer.image.clone();
    for op in ops {
        debug_assert!(op.check().is_ok(), "{op:?}");
        img = match *op {
            PostOp::GaussianNoise { sigma } => gaussian_noise(&img, sigma, rng),
            PostOp::GaussianBlur { radius } => gaussian_blur(&img, radius),
            PostOp::Resize { scale } => resize_roundtrip(&img, scale),
            PostOp::MedianBlur { kernel } => median_blur(&img, kernel),
            PostOp::Jpeg { quality } => jpeg_roundtrip(&img, quality),
        };
    }
    Layer::from_image(img).with_offset(layer.offset_x, layer.offset_y)
}

pub fn gaussian_noise<R: Rng + ?Sized>(img: &RgbaImage, sigma: f32, rng: &mut R) -> RgbaImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0f32, sigma).expect("finite sigma");
    let mut out = img.clone();
    for p in out.pixels_mut() {
        for c in 0..3 {
            p[c] = (p[c] as f32 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// Gaussian blur with standard deviation `radius`, per color channel.
pub fn gaussian_blur(img: &RgbaImage, radius: f32) -> RgbaImage {
    if radius <= 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = img.clone();
    for c in 0..3 {
        let mut plane: Vec<f32> = img.pixels().map(|p| p[c] as f32).collect();
        gaussian_blur_plane(&mut plane, w, h, radius);
        for (p, v) in out.pixels_mut().zip(plane) {
            p[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

pub fn resize_roundtrip(img: &RgbaImage, scale: f32) -> RgbaImage {
    let (w, h) = img.dimensions();
    let sw = ((w as f32 * scale).round() as u32).max(1);
    let sh = ((h as f32 * scale).round() as u32).max(1);
    if (sw, sh) == (w, h) {
        return img.clone();
    }
    let small = imageops::resize(img, sw, sh, FilterType::Triangle);
    imageops::resize(&small, w, h, FilterType::Triangle)
}

/// `kernel`x`kernel` median per color channel, mirrored at the borders.
pub fn median_blur(img: &RgbaImage, kernel: u32) -> RgbaImage {
    if kernel <= 1 {
        return img.clone();
    }
    let r = (kernel / 2) as isize;
    let (w, h) = img.dimensions();
    let mut out = img.clone();
    let mut window = Vec::with_capacity((kernel * kernel) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut px = *img.get_pixel(x, y);
            for c in 0..3 {
                window.clear();
                for dy in -r..=r {
                    let sy = mirror(y as isize + dy, h as usize) as u32;
                    for dx in -r..=r {
                        let sx = mirror(x as isize + dx, w as usize) as u32;
                        window.push(img.get_pixel(sx, sy)[c]);
                    }
                }
                let mid = window.len() / 2;
                px[c] = *window.select_nth_unstable(mid).1;
            }
            out.put_pixel(x, y, px);
        }
    }
    out
}

pub fn jpeg_roundtrip(img: &RgbaImage, quality: u8) -> RgbaImage {
    let rgb = DynamicImage::ImageRgba8(img.clone()).to_rgb8();
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100))
        .encode_image(&rgb)
        .expect("in-memory jpeg encode");
    let decoded = image::load(Cursor::new(buf), ImageFormat::Jpeg).expect("decoding our own jpeg");
    let mut out = decoded.to_rgba8();
    for (o, p) in out.pixels_mut().zip(img.pixels()) {
        *o = Rgba([o[0], o[1], o[2], p[3]]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostConfig {
    pub enabled: bool,
    /// Chance that each op fires, independently.
    pub prob: f64,
    pub noise_sigma: Span<f32>,
    pub blur_radius: Span<f32>,
    pub resize_scale: Span<f32>,
    pub median_kernels: Vec<u32>,
    pub jpeg_quality: Span<u8>,
}

impl Default for PostConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            prob: 0.25,
            noise_sigma: Span::new(2.0, 8.0),
            blur_radius: Span::new(0.5, 2.0),
            resize_scale: Span::new(0.4, 1.0),
            median_kernels: vec![1, 3, 5],
            jpeg_quality: Span::new(50, 95),
        }
    }
}

impl PostConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.prob) {
            return Err("postprocess.prob must lie in [0, 1]".into());
        }
        self.noise_sigma.check_within("postprocess.noise_sigma", 0.0, 255.0)?;
        self.blur_radius.check_within("postprocess.blur_radius", 0.0, 64.0)?;
        self.resize_scale.check_within("postprocess.resize_scale", f32::MIN_POSITIVE, 1.0)?;
        self.jpeg_quality.check_within("postprocess.jpeg_quality", 1, 100)?;
        if self.median_kernels.is_empty() {
            return Err("postprocess.median_kernels is empty".into());
        }
        for &kernel in &self.median_kernels {
            PostOp::MedianBlur { kernel }.check().map_err(|e| format!("postprocess.median_kernels: {e}"))?;
        }
        Ok(())
    }

    /// Ops that fire for one sample, in application order. Empty when disabled.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<PostOp> {
        if !self.enabled {
            return Vec::new();
        }
        let mut ops = Vec::new();
        if rng.random_bool(self.prob) {
            ops.push(PostOp::GaussianNoise { sigma: self.noise_sigma.sample(rng) });
        }
        if rng.random_bool(self.prob) {
            ops.push(PostOp::GaussianBlur { radius: self.blur_radius.sample(rng) });
        }
        if rng.random_bool(self.prob) {
            ops.push(PostOp::Resize { scale: self.resize_scale.sample(rng) });
        }
        if rng.random_bool(self.prob) {
            let kernel = self.median_kernels[rng.random_range(0..self.median_kernels.len())];
            ops.push(PostOp::MedianBlur { kernel });
        }
        if rng.random_bool(self.prob) {
            ops.push(PostOp::Jpeg { quality: self.jpeg_quality.sample(rng) });
        }
        ops
    }
}
