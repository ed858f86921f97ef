//! Geometric distortions of a text layer and random detector-style margins.
//!
//! All warps go through one projective resampler: output pixel centers are
//! mapped back through the inverse homography and sampled bilinearly with
//! premultiplied alpha. The output canvas is the integer hull of the mapped
//! source corners, so nothing is cropped.

use image::Rgba;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layer::Layer;
use crate::span::Span;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("transformed canvas {width}x{height} exceeds the {max} px limit")]
    TooLarge { width: u64, height: u64, max: u32 },
    #[error("transform is degenerate")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

/// One geometric distortion. Angles are in degrees; positive rotation turns
/// clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    None,
    Stretch { fx: f64, fy: f64 },
    /// Shrink `edge` to `ratio` of its length, centered; the opposite edge stays.
    Trapezoidate { edge: Edge, ratio: f64 },
    /// Shear so the text leans toward `toward`.
    Skew { toward: Edge, angle: f64 },
    Rotate { angle: f64 },
}

impl Transform {
    pub fn is_identity(&self) -> bool {
        match *self {
            Transform::None => true,
            Transform::Stretch { fx, fy } => fx == 1.0 && fy == 1.0,
            Transform::Trapezoidate { ratio, .. } => ratio == 1.0,
            Transform::Skew { angle, .. } | Transform::Rotate { angle } => angle == 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Margins {
    pub top: u32,
    pub bottom: u32,
    pub left: u32,
    pub right: u32,
}

/// Row-major 3x3 matrix mapping source to destination coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(pub [f64; 9]);

impl Homography {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        let w = m[6] * x + m[7] * y + m[8];
        ((m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w)
    }

    pub fn inverse(&self) -> Option<Homography> {
        let m = &self.0;
        let c00 = m[4] * m[8] - m[5] * m[7];
        let c01 = m[5] * m[6] - m[3] * m[8];
        let c02 = m[3] * m[7] - m[4] * m[6];
        let det = m[0] * c00 + m[1] * c01 + m[2] * c02;
        if det.abs() < 1e-12 || !det.is_finite() {
            return None;
        }
        let inv = [
            c00,
            m[2] * m[7] - m[1] * m[8],
            m[1] * m[5] - m[2] * m[4],
            c01,
            m[0] * m[8] - m[2] * m[6],
            m[2] * m[3] - m[0] * m[5],
            c02,
            m[1] * m[6] - m[0] * m[7],
            m[0] * m[4] - m[1] * m[3],
        ];
        Some(Homography(inv.map(|v| v / det)))
    }

    /// Homography taking each `src[i]` to `dst[i]`.
    pub fn from_quads(src: [(f64, f64); 4], dst: [(f64, f64); 4]) -> Option<Homography> {
        let mut a = [[0.0f64; 9]; 8];
        for i in 0..4 {
            let (x, y) = src[i];
            let (u, v) = dst[i];
            a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
            a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
        }
        // Gauss-Jordan with partial pivoting on the augmented 8x9 system.
        for col in 0..8 {
            let pivot = (col..8).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
            if a[pivot][col].abs() < 1e-12 {
                return None;
            }
            a.swap(col, pivot);
            let d = a[col][col];
            for k in col..9 {
                a[col][k] /= d;
            }
            for row in 0..8 {
                if row != col {
                    let f = a[row][col];
                    if f != 0.0 {
                        for k in col..9 {
                            a[row][k] -= f * a[col][k];
                        }
                    }
                }
            }
        }
        let h: Vec<f64> = a.iter().map(|r| r[8]).collect();
        Some(Homography([h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0]))
    }

    fn affine(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Homography {
        Homography([a, b, c, d, e, f, 0.0, 0.0, 1.0])
    }
}

/// The homography a transform applies to a `w`x`h` raster (pixel-edge coordinates).
pub fn homography(t: &Transform, w: f64, h: f64) -> Option<Homography> {
    let hm = match *t {
        Transform::None => Homography::affine(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        Transform::Stretch { fx, fy } => Homography::affine(fx, 0.0, 0.0, 0.0, fy, 0.0),
        // About the raster origin: quarter turns keep the hull on integer
        // coordinates, and warp re-anchors the result at the hull anyway.
        Transform::Rotate { angle } => {
            let (s, c) = angle.to_radians().sin_cos();
            Homography::affine(c, -s, 0.0, s, c, 0.0)
        }
        Transform::Skew { toward, angle } => {
            let t = angle.to_radians().tan();
            match toward {
                // Top edge slides right, bottom edge stays.
                Edge::Right => Homography::affine(1.0, -t, t * h, 0.0, 1.0, 0.0),
                Edge::Left => Homography::affine(1.0, t, -t * h, 0.0, 1.0, 0.0),
                // Right edge rises, left edge stays.
                Edge::Top => Homography::affine(1.0, 0.0, 0.0, -t, 1.0, 0.0),
                Edge::Bottom => Homography::affine(1.0, 0.0, 0.0, t, 1.0, 0.0),
            }
        }
        Transform::Trapezoidate { edge, ratio } => {
            let src = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
            let (iw, ih) = (w * (1.0 - ratio) / 2.0, h * (1.0 - ratio) / 2.0);
            let dst = match edge {
                Edge::Top => [(iw, 0.0), (w - iw, 0.0), (w, h), (0.0, h)],
                Edge::Bottom => [(0.0, 0.0), (w, 0.0), (w - iw, h), (iw, h)],
                Edge::Left => [(0.0, ih), (w, 0.0), (w, h), (0.0, h - ih)],
                Edge::Right => [(0.0, 0.0), (w, ih), (w, h - ih), (0.0, h)],
            };
            return Homography::from_quads(src, dst);
        }
    };
    Some(hm)
}

/// Apply `t` to `layer`, growing the canvas to hold the whole result.
pub fn transform(layer: &Layer, t: &Transform, max_dimension: u32) -> Result<Layer, TransformError> {
    if t.is_identity() {
        return Ok(layer.clone());
    }
    let hm = homography(t, layer.width() as f64, layer.height() as f64)
        .ok_or(TransformError::Degenerate)?;
    warp(layer, &hm, max_dimension)
}

/// Resample `layer` through `hm`. The output offset keeps the layer's frame:
/// local point `p` ends up at frame position `offset + hm(p)`.
pub fn warp(layer: &Layer, hm: &Homography, max_dimension: u32) -> Result<Layer, TransformError> {
    let inv = hm.inverse().ok_or(TransformError::Degenerate)?;
    let (w, h) = (layer.width() as f64, layer.height() as f64);
    let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)].map(|(x, y)| hm.apply(x, y));
    if corners.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(TransformError::Degenerate);
    }
    // Tolerate float noise such as cos(90 deg) != 0 when snapping the hull.
    const SNAP: f64 = 1e-6;
    let min_x = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let max_x = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let max_y = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_x + SNAP).floor();
    let y0 = (min_y + SNAP).floor();
    let out_w = ((max_x - SNAP).ceil() - x0).max(1.0);
    let out_h = ((max_y - SNAP).ceil() - y0).max(1.0);
    if out_w > max_dimension as f64 || out_h > max_dimension as f64 {
        return Err(TransformError::TooLarge {
            width: out_w as u64,
            height: out_h as u64,
            max: max_dimension,
        });
    }
    let mut out = Layer::new(out_w as u32, out_h as u32)
        .with_offset(layer.offset_x + x0 as i32, layer.offset_y + y0 as i32);
    for (x, y, p) in out.image.enumerate_pixels_mut() {
        let (u, v) = inv.apply(x0 + x as f64 + 0.5, y0 + y as f64 + 0.5);
        *p = sample_bilinear(layer, u - 0.5, v - 0.5);
    }
    Ok(out)
}

/// Bilinear sample at continuous pixel-center coordinates; outside is transparent.
pub fn sample_bilinear(layer: &Layer, x: f64, y: f64) -> Rgba<u8> {
    let (w, h) = (layer.width() as i64, layer.height() as i64);
    if !(x > -1.0 && y > -1.0 && x < w as f64 && y < h as f64) {
        return Rgba([0, 0, 0, 0]);
    }
    let xf = x.floor();
    let yf = y.floor();
    let (fx, fy) = (x - xf, y - yf);
    let (xi, yi) = (xf as i64, yf as i64);
    let fetch = |px: i64, py: i64| -> [f64; 4] {
        if px < 0 || py < 0 || px >= w || py >= h {
            [0.0; 4]
        } else {
            let p = layer.image.get_pixel(px as u32, py as u32);
            let a = p[3] as f64;
            [p[0] as f64 * a, p[1] as f64 * a, p[2] as f64 * a, a]
        }
    };
    if fx == 0.0 && fy == 0.0 {
        if xi >= 0 && yi >= 0 {
            return *layer.image.get_pixel(xi as u32, yi as u32);
        }
        return Rgba([0, 0, 0, 0]);
    }
    let taps = [
        (fetch(xi, yi), (1.0 - fx) * (1.0 - fy)),
        (fetch(xi + 1, yi), fx * (1.0 - fy)),
        (fetch(xi, yi + 1), (1.0 - fx) * fy),
        (fetch(xi + 1, yi + 1), fx * fy),
    ];
    let mut acc = [0.0f64; 4];
    for (v, wgt) in taps {
        if wgt == 0.0 {
            continue;
        }
        for c in 0..4 {
            acc[c] += v[c] * wgt;
        }
    }
    let a = acc[3];
    let alpha = a.round().clamp(0.0, 255.0) as u8;
    if alpha == 0 {
        return Rgba([0, 0, 0, 0]);
    }
    let px = |c: usize| (acc[c] / a).round().clamp(0.0, 255.0) as u8;
    Rgba([px(0), px(1), px(2), alpha])
}

/// Pad the canvas with transparent pixels; content keeps its frame position.
pub fn add_margins(layer: &Layer, m: Margins) -> Layer {
    let mut out = Layer::new(layer.width() + m.left + m.right, layer.height() + m.top + m.bottom)
        .with_offset(layer.offset_x - m.left as i32, layer.offset_y - m.top as i32);
    image::imageops::replace(&mut out.image, &layer.image, m.left as i64, m.top as i64);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    pub enabled: bool,
    /// Largest rotation magnitude, degrees.
    pub rotate: f64,
    /// Largest skew angle, degrees.
    pub skew: f64,
    /// Per-axis stretch factor.
    pub stretch: Span<f64>,
    /// Trapezoid edge length ratio.
    pub trapezoid: Span<f64>,
    pub max_dimension: u32,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            rotate: 25.0,
            skew: 15.0,
            stretch: Span::new(0.75, 1.25),
            trapezoid: Span::new(0.5, 1.0),
            max_dimension: 4096,
        }
    }
}

const EDGES: [Edge; 4] = [Edge::Top, Edge::Bottom, Edge::Left, Edge::Right];

impl TransformConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..90.0).contains(&self.rotate) || !(0.0..80.0).contains(&self.skew) {
            return Err("transform.rotate must be in [0, 90) and transform.skew in [0, 80)".into());
        }
        self.stretch.check("transform.stretch")?;
        if self.stretch.lo <= 0.0 {
            return Err("transform.stretch must be positive".into());
        }
        self.trapezoid.check("transform.trapezoid")?;
        if self.trapezoid.lo <= 0.0 || self.trapezoid.hi > 1.0 {
            return Err("transform.trapezoid must lie in (0, 1]".into());
        }
        if self.max_dimension == 0 {
            return Err("transform.max_dimension must be positive".into());
        }
        Ok(())
    }

    /// One transform kind, uniform over none/stretch/trapezoidate/skew/rotate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Transform {
        if !self.enabled {
            return Transform::None;
        }
        match rng.random_range(0..5) {
            0 => Transform::None,
            1 => Transform::Stretch { fx: self.stretch.sample(rng), fy: self.stretch.sample(rng) },
            2 => Transform::Trapezoidate {
                edge: EDGES[rng.random_range(0..4)],
                ratio: self.trapezoid.sample(rng),
            },
            3 => Transform::Skew {
                toward: EDGES[rng.random_range(0..4)],
                angle: rng.random_range(0.0..=self.skew),
            },
            _ => Transform::Rotate { angle: rng.random_range(-self.rotate..=self.rotate) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginConfig {
    pub enabled: bool,
    /// Margin per side as a fraction of the layer height (top/bottom) or width (left/right).
    pub ratio: Span<f64>,
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self { enabled: true, ratio: Span::new(0.0, 0.15) }
    }
}

impl MarginConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.ratio.check_within("margin.ratio", 0.0, 10.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, width: u32, height: u32) -> Margins {
        if !self.enabled {
            return Margins::default();
        }
        let mut side = |dim: u32| (self.ratio.sample(rng) * dim as f64).round() as u32;
        Margins {
            top: side(height),
            bottom: side(height),
            left: side(width),
            right: side(width),
        }
    }
}
