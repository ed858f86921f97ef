//! Per-character glyph boards and their placement on a line or a parabola.
//!
//! Boards live in a pen-local frame: the pen origin sits on the baseline at
//! `(0, 0)` and `y` grows downward. Layout translates each board by its pen
//! position, so all boards of a text share one frame.

use ab_glyph::{point, Font, PxScale, ScaleFont};
use image::Rgba;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::gaussian_blur_plane;
use crate::layer::{dilate_alpha, erode_alpha, flatten, Layer};
use crate::resources::FontDescriptor;
use crate::span::Span;
use crate::transformer::{sample_bilinear, warp, Homography};

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("font {font} has no glyph for {ch:?}")]
    Uncovered { font: String, ch: char },
    #[error("font {font} failed to produce an outline for {ch:?}")]
    NoOutline { font: String, ch: char },
    #[error("text is empty")]
    EmptyText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharBoard {
    /// White glyph coverage, positioned relative to the pen origin.
    pub layer: Layer,
    pub advance: f32,
    /// Middle of the em box in the pen-local frame.
    pub center: (f32, f32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elastic {
    /// Scale of the smoothed noise, px; also caps any single displacement.
    pub alpha: f32,
    /// Smoothing radius of the displacement field, px.
    pub sigma: f32,
}

#[derive(Debug, Clone)]
pub struct ShapeParams<'a> {
    pub font: &'a FontDescriptor,
    pub font_size: f32,
    /// Stroke weight change in px: positive dilates, negative erodes.
    pub thickness: i32,
    pub char_margin: f32,
    /// Signed height difference between the middle and the ends of a curved
    /// line; positive bends the ends downward.
    pub curve_gap: f32,
    pub curved: bool,
    pub rotate_with_slope: bool,
    pub elastic: Option<Elastic>,
}

/// Rasterize one board per character of `text`.
pub fn render_char_boards(text: &str, params: &ShapeParams<'_>) -> Result<Vec<CharBoard>, ShapeError> {
    if text.is_empty() {
        return Err(ShapeError::EmptyText);
    }
    let font = &params.font.font;
    let scale = PxScale::from(params.font_size);
    let scaled = font.as_scaled(scale);
    let center_y = -(scaled.ascent() + scaled.descent()) / 2.0;
    text.chars()
        .map(|ch| {
            let id = font.glyph_id(ch);
            if id.0 == 0 {
                return Err(ShapeError::Uncovered { font: params.font.family.clone(), ch });
            }
            let advance = scaled.h_advance(id);
            let glyph = id.with_scale_and_position(scale, point(0.0, 0.0));
            let layer = match font.outline_glyph(glyph) {
                Some(outline) => {
                    let b = outline.px_bounds();
                    let (w, h) = (b.width().ceil() as u32, b.height().ceil() as u32);
                    let mut l = Layer::new(w, h).with_offset(b.min.x as i32, b.min.y as i32);
                    outline.draw(|x, y, cov| {
                        if x < l.width() && y < l.height() {
                            let a = (cov.clamp(0.0, 1.0) * 255.0).round() as u8;
                            l.image.put_pixel(x, y, Rgba([255, 255, 255, a]));
                        }
                    });
                    thicken(&l, params.thickness).trimmed()
                }
                None if ch.is_whitespace() => Layer::new(1, 1),
                None => return Err(ShapeError::NoOutline { font: params.font.family.clone(), ch }),
            };
            Ok(CharBoard { layer, advance, center: (advance / 2.0, center_y) })
        })
        .collect()
}

fn thicken(l: &Layer, k: i32) -> Layer {
    if k == 0 {
        return l.clone();
    }
    let alpha = l.alpha();
    let (w, h) = (l.width(), l.height());
    let (plane, pw, ph, shift) = if k > 0 {
        let (p, pw, ph) = dilate_alpha(&alpha, w, h, k as u32);
        (p, pw, ph, k)
    } else {
        (erode_alpha(&alpha, w, h, k.unsigned_abs()), w, h, 0)
    };
    let mut out = Layer::new(pw, ph).with_offset(l.offset_x - shift, l.offset_y - shift);
    for (p, a) in out.image.pixels_mut().zip(plane) {
        *p = Rgba([255, 255, 255, a]);
    }
    out
}

/// Smoothed random displacement field on a `w`x`h` grid: uniform noise in
/// [-1, 1], Gaussian-smoothed, scaled by `alpha`. Vectors longer than `alpha`
/// are shortened to it, so no pixel moves further than `alpha` px.
pub fn displacement_field<R: Rng + ?Sized>(
    w: usize,
    h: usize,
    alpha: f32,
    sigma: f32,
    rng: &mut R,
) -> (Vec<f32>, Vec<f32>) {
    let unit = Uniform::new_inclusive(-1.0f32, 1.0).expect("valid range");
    let mut dx: Vec<f32> = (0..w * h).map(|_| unit.sample(rng)).collect();
    let mut dy: Vec<f32> = (0..w * h).map(|_| unit.sample(rng)).collect();
    gaussian_blur_plane(&mut dx, w, h, sigma);
    gaussian_blur_plane(&mut dy, w, h, sigma);
    for (x, y) in dx.iter_mut().zip(dy.iter_mut()) {
        let (sx, sy) = (*x * alpha, *y * alpha);
        let norm = (sx * sx + sy * sy).sqrt();
        let k = if norm > alpha { alpha / norm } else { 1.0 };
        (*x, *y) = (sx * k, sy * k);
    }
    (dx, dy)
}

/// Elastic distortion: resample the board through a smooth random
/// displacement field bounded by `alpha` px.
pub fn apply_elastic<R: Rng + ?Sized>(board: &CharBoard, alpha: f32, sigma: f32, rng: &mut R) -> CharBoard {
    assert!(sigma > 0.0, "elastic sigma must be positive");
    if alpha <= 0.0 {
        return board.clone();
    }
    let pad = alpha.ceil() as i32;
    let src = &board.layer;
    let (w, h) = (src.width() as i32 + 2 * pad, src.height() as i32 + 2 * pad);
    let (dx, dy) = displacement_field(w as usize, h as usize, alpha, sigma, rng);
    let mut out = Layer::new(w as u32, h as u32).with_offset(src.offset_x - pad, src.offset_y - pad);
    for (x, y, p) in out.image.enumerate_pixels_mut() {
        let i = (y * w as u32 + x) as usize;
        let sx = x as f64 - pad as f64 + dx[i] as f64;
        let sy = y as f64 - pad as f64 + dy[i] as f64;
        *p = sample_bilinear(src, sx, sy);
    }
    CharBoard { layer: out.trimmed(), ..board.clone() }
}

/// Pen x position of every board for a straight line.
fn pen_positions(boards: &[CharBoard], char_margin: f32) -> Vec<f32> {
    let mut pen = 0.0f32;
    boards
        .iter()
        .map(|b| {
            let at = pen;
            pen += b.advance + char_margin;
            at
        })
        .collect()
}

fn placed(layer: &Layer, dx: i32, dy: i32) -> Layer {
    let mut l = layer.clone();
    l.offset_x += dx;
    l.offset_y += dy;
    l
}

/// Boards left to right on a common baseline, `advance + char_margin` apart.
pub fn layout_straight(boards: &[CharBoard], char_margin: f32) -> Layer {
    assert!(!boards.is_empty(), "layout needs at least one board");
    let pens = pen_positions(boards, char_margin);
    let layers: Vec<Layer> = boards
        .iter()
        .zip(&pens)
        .map(|(b, &pen)| placed(&b.layer, pen.round() as i32, 0))
        .collect();
    flatten(&layers).trimmed()
}

/// Vertical offset and slope (dy/dx) for boards centered at `centers_x` on the
/// parabola `y = gap * t^2`, where `t` maps the outermost centers to -1 and 1.
pub fn curve_offsets(centers_x: &[f32], gap: f32) -> Vec<(f32, f32)> {
    let (first, last) = match (centers_x.first(), centers_x.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Vec::new(),
    };
    let mid = (first + last) / 2.0;
    let half = (last - first) / 2.0;
    centers_x
        .iter()
        .map(|&cx| {
            if half <= 0.0 {
                return (0.0, 0.0);
            }
            let t = (cx - mid) / half;
            (gap * t * t, 2.0 * gap * t / half)
        })
        .collect()
}

/// Boards on a parabola whose vertex sits under the middle of the text.
pub fn layout_curved(boards: &[CharBoard], char_margin: f32, gap: f32, rotate_with_slope: bool) -> Layer {
    assert!(!boards.is_empty(), "layout needs at least one board");
    let pens = pen_positions(boards, char_margin);
    let centers: Vec<f32> = boards.iter().zip(&pens).map(|(b, p)| p + b.center.0).collect();
    let curve = curve_offsets(&centers, gap);
    let layers: Vec<Layer> = boards
        .iter()
        .zip(&pens)
        .zip(&curve)
        .map(|((b, &pen), &(dy, slope))| {
            let angle = slope.atan() as f64;
            let layer = if rotate_with_slope && angle != 0.0 && b.layer.coverage() > 0 {
                rotate_about(&b.layer, angle, b.center)
            } else {
                b.layer.clone()
            };
            placed(&layer, pen.round() as i32, dy.round() as i32)
        })
        .collect();
    flatten(&layers).trimmed()
}

/// Rotate a pen-frame layer by `angle` radians (clockwise on screen) about a
/// pen-frame point.
fn rotate_about(layer: &Layer, angle: f64, center: (f32, f32)) -> Layer {
    let (s, c) = angle.sin_cos();
    let cx = center.0 as f64 - layer.offset_x as f64;
    let cy = center.1 as f64 - layer.offset_y as f64;
    let hm = Homography([c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy, 0.0, 0.0, 1.0]);
    warp(layer, &hm, u32::MAX).expect("rotation of a finite board is well formed")
}

/// Full text shape stage: boards, optional elastic distortion, layout.
pub fn shape_text<R: Rng + ?Sized>(text: &str, params: &ShapeParams<'_>, rng: &mut R) -> Result<Layer, ShapeError> {
    let mut boards = render_char_boards(text, params)?;
    if let Some(e) = params.elastic {
        boards = boards.iter().map(|b| apply_elastic(b, e.alpha, e.sigma, rng)).collect();
    }
    Ok(if params.curved {
        layout_curved(&boards, params.char_margin, params.curve_gap, params.rotate_with_slope)
    } else {
        layout_straight(&boards, params.char_margin)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    pub enabled: bool,
    pub prob: f64,
    /// Middle-to-end height gap as a fraction of the font size.
    pub gap: Span<f32>,
    pub rotate_prob: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { enabled: true, prob: 0.5, gap: Span::new(0.0, 0.5), rotate_prob: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticConfig {
    pub enabled: bool,
    pub prob: f64,
    pub alpha: Span<f32>,
    pub sigma: Span<f32>,
}

impl Default for ElasticConfig {
    fn default() -> Self {
        Self { enabled: true, prob: 0.5, alpha: Span::new(8.0, 34.0), sigma: Span::new(4.0, 6.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeConfig {
    pub font_size: Span<f32>,
    pub thickness: Span<i32>,
    pub char_margin: Span<f32>,
    pub curve: CurveConfig,
    pub elastic: ElasticConfig,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            font_size: Span::new(24.0, 40.0),
            thickness: Span::new(0, 2),
            char_margin: Span::new(0.0, 3.0),
            curve: CurveConfig::default(),
            elastic: ElasticConfig::default(),
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<(), String> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(format!("{name} = {p} is outside [0, 1]"))
    }
}

impl ShapeConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.font_size.check("shape.font_size")?;
        if self.font_size.lo <= 0.0 {
            return Err("shape.font_size must be positive".into());
        }
        self.thickness.check_within("shape.thickness", -3, 8)?;
        self.char_margin.check("shape.char_margin")?;
        check_prob("shape.curve.prob", self.curve.prob)?;
        check_prob("shape.curve.rotate_prob", self.curve.rotate_prob)?;
        self.curve.gap.check_within("shape.curve.gap", 0.0, 4.0)?;
        check_prob("shape.elastic.prob", self.elastic.prob)?;
        self.elastic.alpha.check_within("shape.elastic.alpha", 0.0, 64.0)?;
        self.elastic.sigma.check("shape.elastic.sigma")?;
        if self.elastic.sigma.lo <= 0.0 {
            return Err("shape.elastic.sigma must be positive".into());
        }
        Ok(())
    }

    pub fn sample<'a, R: Rng + ?Sized>(&self, font: &'a FontDescriptor, rng: &mut R) -> ShapeParams<'a> {
        let font_size = self.font_size.sample(rng);
        let thickness = self.thickness.sample(rng);
        let char_margin = self.char_margin.sample(rng);
        let curved = self.curve.enabled && rng.random_bool(self.curve.prob);
        let (curve_gap, rotate_with_slope) = if curved {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (sign * self.curve.gap.sample(rng) * font_size, rng.random_bool(self.curve.rotate_prob))
        } else {
            (0.0, false)
        };
        let elastic = (self.elastic.enabled && rng.random_bool(self.elastic.prob)).then(|| Elastic {
            alpha: self.elastic.alpha.sample(rng),
            sigma: self.elastic.sigma.sample(rng),
        });
        ShapeParams {
            font,
            font_size,
            thickness,
            char_margin,
            curve_gap,
            curved,
            rotate_with_slope,
            elastic,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::path::Path;

    fn font() -> FontDescriptor {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/fonts/DejaVuSans.ttf");
        FontDescriptor::load(&p).unwrap()
    }

    fn params(f: &FontDescriptor, size: f32) -> ShapeParams<'_> {
        ShapeParams {
            font: f,
            font_size: size,
            thickness: 0,
            char_margin: 0.0,
            curve_gap: 0.0,
            curved: false,
            rotate_with_slope: false,
            elastic: None,
        }
    }

    #[test]
    fn single_glyph_fits_em_box() {
        let f = font();
        let boards = render_char_boards("A", &params(&f, 32.0)).unwrap();
        assert_eq!(boards.len(), 1);
        let s = f.font.as_scaled(32.0);
        let em = (s.ascent() - s.descent()).ceil() as u32;
        assert!(boards[0].layer.height() <= em);
        assert!(boards[0].layer.coverage() > 0);
    }

    #[test]
    fn boards_have_positive_advances() {
        let f = font();
        let boards = render_char_boards("ab", &params(&f, 24.0)).unwrap();
        assert_eq!(boards.len(), 2);
        assert!(boards.iter().all(|b| b.advance > 0.0));
    }

    #[test]
    fn whitespace_board_is_empty() {
        let f = font();
        let boards = render_char_boards(" ", &params(&f, 24.0)).unwrap();
        assert_eq!(boards.len(), 1);
        assert_eq!(boards[0].layer.coverage(), 0);
        assert!(boards[0].advance > 0.0);
    }

    #[test]
    fn uncovered_char_is_an_error() {
        let f = font();
        let err = render_char_boards("a\u{10FFFD}", &params(&f, 24.0)).unwrap_err();
        assert!(matches!(err, ShapeError::Uncovered { ch: '\u{10FFFD}', .. }));
    }

    #[test]
    fn thickness_grows_and_shrinks_coverage() {
        let f = font();
        let base = render_char_boards("H", &params(&f, 32.0)).unwrap()[0].layer.coverage();
        let bold = render_char_boards("H", &ShapeParams { thickness: 2, ..params(&f, 32.0) }).unwrap()[0]
            .layer
            .coverage();
        let thin = render_char_boards("H", &ShapeParams { thickness: -1, ..params(&f, 32.0) }).unwrap()[0]
            .layer
            .coverage();
        assert!(thin < base && base < bold);
    }

    #[test]
    fn straight_layout_of_one_board_is_the_board() {
        let f = font();
        let boards = render_char_boards("g", &params(&f, 30.0)).unwrap();
        let out = layout_straight(&boards, 4.0);
        let b = &boards[0].layer;
        assert_eq!((out.rect(), out.alpha()), (b.rect(), b.alpha()));
        for (p, q) in out.image.pixels().zip(b.image.pixels()) {
            if q[3] > 0 {
                assert_eq!(p, q);
            }
        }
    }

    #[test]
    fn straight_layout_width_from_metrics() {
        let f = font();
        let boards = render_char_boards("Ti", &params(&f, 30.0)).unwrap();
        let out = layout_straight(&boards, 0.0);
        // Union of the two placed glyph boxes, from the font metrics directly.
        let (a, b) = (&boards[0].layer, &boards[1].layer);
        let second_x = boards[0].advance.round() as i32 + b.offset_x;
        let left = a.offset_x.min(second_x);
        let right = (a.offset_x + a.width() as i32).max(second_x + b.width() as i32);
        assert_eq!(out.width() as i32, right - left);
    }

    #[test]
    fn margin_adds_linear_width() {
        let f = font();
        let boards = render_char_boards("abcde", &params(&f, 28.0)).unwrap();
        let w0 = layout_straight(&boards, 0.0).width();
        let w5 = layout_straight(&boards, 5.0).width();
        assert_eq!(w5 - w0, 5 * 4);
    }

    #[test]
    fn curved_with_zero_gap_equals_straight() {
        let f = font();
        let boards = render_char_boards("curve", &params(&f, 28.0)).unwrap();
        for rotate in [false, true] {
            assert_eq!(layout_curved(&boards, 2.0, 0.0, rotate), layout_straight(&boards, 2.0));
        }
    }

    #[test]
    fn curve_offsets_hit_gap_at_the_ends() {
        let off = curve_offsets(&[-1.0, 0.0, 1.0], 7.5);
        assert_eq!(off[0].0, 7.5);
        assert_eq!(off[1].0, 0.0);
        assert_eq!(off[2].0, 7.5);
        assert_eq!(off[0].1, -off[2].1);
        let off = curve_offsets(&[10.0, 30.0, 50.0, 70.0, 90.0], -4.0);
        assert_eq!(off[0].0, off[4].0);
        assert_eq!(off[1].0, off[3].0);
        assert_eq!(off[2].0, 0.0);
        assert_eq!(off[0].0, -4.0);
    }

    #[test]
    fn curved_layout_is_symmetric_for_equal_boards() {
        let f = font();
        let boards = render_char_boards("ooooo", &params(&f, 24.0)).unwrap();
        let out = layout_curved(&boards, 1.0, 10.0, false);
        // Ends sit 10 px lower than the middle glyph.
        let straight = layout_straight(&boards, 1.0);
        assert_eq!(out.height(), straight.height() + 10);
        let mirrored = image::imageops::flip_horizontal(&out.image);
        let cols = |img: &image::RgbaImage| -> Vec<u32> {
            (0..img.width())
                .map(|x| (0..img.height()).filter(|&y| img.get_pixel(x, y)[3] > 0).map(|y| y).sum())
                .collect()
        };
        // Column mass centers mirror up to the rounding of pen positions.
        let a = cols(&out.image);
        let b = cols(&mirrored);
        let diff: i64 = a.iter().zip(&b).map(|(x, y)| (*x as i64 - *y as i64).abs()).sum();
        let total: i64 = a.iter().map(|&x| x as i64).sum();
        assert!((diff as f64) < 0.2 * total as f64, "{diff} / {total}");
    }

    #[test]
    fn elastic_zero_alpha_is_identity() {
        let f = font();
        let board = render_char_boards("k", &params(&f, 32.0)).unwrap().remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(apply_elastic(&board, 0.0, 4.0, &mut rng), board);
    }

    #[test]
    fn displacement_is_bounded_by_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Light smoothing so the raw field would overshoot without the clamp.
        let (dx, dy) = displacement_field(40, 30, 30.0, 0.5, &mut rng);
        let max = dx.iter().zip(&dy).map(|(a, b)| (a * a + b * b).sqrt()).fold(0.0f32, f32::max);
        assert!(max <= 30.0 + 1e-4 && max > 25.0, "{max}");
    }

    #[test]
    fn elastic_output_sources_nearby_pixels() {
        let f = font();
        let board = render_char_boards("W", &params(&f, 32.0)).unwrap().remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = apply_elastic(&board, 2.0, 4.0, &mut rng);
        let src = &board.layer;
        // A covered output pixel must have a covered source pixel within the
        // displacement bound plus the bilinear footprint.
        let reach = 2.0f64 + std::f64::consts::SQRT_2;
        for (x, y, p) in out.layer.image.enumerate_pixels() {
            if p[3] == 0 {
                continue;
            }
            let fx = (out.layer.offset_x + x as i32) as f64;
            let fy = (out.layer.offset_y + y as i32) as f64;
            let near = src.image.enumerate_pixels().any(|(sx, sy, q)| {
                let gx = (src.offset_x + sx as i32) as f64;
                let gy = (src.offset_y + sy as i32) as f64;
                q[3] > 0 && ((gx - fx).powi(2) + (gy - fy).powi(2)).sqrt() <= reach
            });
            assert!(near, "pixel ({fx}, {fy}) has no source nearby");
        }
        let (m0, m1) = (src.alpha_mass() as f64, out.layer.alpha_mass() as f64);
        assert!((m1 - m0).abs() <= 0.1 * m0, "{m0} -> {m1}");
        assert!(out.layer.width() <= src.width() + 4 && out.layer.height() <= src.height() + 4);
    }

    #[test]
    fn heavy_smoothing_approaches_constant_shift() {
        let spread = |sigma: f32| {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let (dx, dy) = displacement_field(32, 32, 1.0, sigma, &mut rng);
            let n = dx.len() as f32;
            let var = |v: &[f32]| {
                let m = v.iter().sum::<f32>() / n;
                v.iter().map(|x| (x - m).powi(2)).sum::<f32>() / n
            };
            var(&dx) + var(&dy)
        };
        let (s1, s4, s32) = (spread(1.0), spread(4.0), spread(32.0));
        assert!(s1 > s4 && s4 > s32, "{s1} {s4} {s32}");
        assert!(s32 < 0.01 * s1, "{s1} {s32}");
    }
}
