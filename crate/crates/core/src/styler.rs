//! Text color, texture fill and boundary effects (border, shadow, extrude).

use image::{Rgba, RgbaImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::layer::{dilate_alpha, flatten, Layer};
use crate::resources::ColorMap;
use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    None,
    Border { width: u32, gray: u8 },
    Shadow { dx: i32, dy: i32, gray: u8 },
    Extrude { depth: u32, gray: u8 },
}

/// Draw one color-map entry and one gray value per cluster, in cluster order
/// (text, background, then effect when present).
pub fn sample_colors<R: Rng + ?Sized>(map: &ColorMap, rng: &mut R) -> Vec<u8> {
    assert!(!map.entries.is_empty(), "color map has no entries");
    let entry = &map.entries[rng.random_range(0..map.entries.len())];
    entry
        .clusters
        .iter()
        .map(|c| {
            let v = if c.std > 0.0 {
                Normal::new(c.mean, c.std).expect("finite std").sample(rng)
            } else {
                c.mean
            };
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect()
}

/// Set RGB to `gray` wherever the layer has coverage.
pub fn colorize(layer: &Layer, gray: u8) -> Layer {
    let mut out = layer.clone();
    for p in out.image.pixels_mut() {
        if p[3] > 0 {
            *p = Rgba([gray, gray, gray, p[3]]);
        }
    }
    out
}

/// Blend a random crop of `texture` (tiled when smaller than the layer) into
/// the covered pixels at opacity `alpha`. The alpha channel is untouched.
pub fn apply_texture<R: Rng + ?Sized>(layer: &Layer, texture: &RgbaImage, alpha: f32, rng: &mut R) -> Layer {
    let (tw, th) = texture.dimensions();
    let ox = rng.random_range(0..tw);
    let oy = rng.random_range(0..th);
    let mut out = layer.clone();
    if alpha <= 0.0 {
        return out;
    }
    let a = alpha.min(1.0);
    for (x, y, p) in out.image.enumerate_pixels_mut() {
        if p[3] == 0 {
            continue;
        }
        let t = texture.get_pixel((ox + x) % tw, (oy + y) % th);
        for c in 0..3 {
            p[c] = (p[c] as f32 * (1.0 - a) + t[c] as f32 * a).round() as u8;
        }
    }
    out
}

fn tinted(layer: &Layer, gray: u8) -> Layer {
    let mut out = layer.clone();
    for p in out.image.pixels_mut() {
        *p = if p[3] > 0 { Rgba([gray, gray, gray, p[3]]) } else { Rgba([0, 0, 0, 0]) };
    }
    out
}

fn shifted(layer: &Layer, dx: i32, dy: i32) -> Layer {
    let mut out = layer.clone();
    out.offset_x += dx;
    out.offset_y += dy;
    out
}

/// Apply a boundary effect beneath the text. The canvas grows to fit it.
pub fn apply_effect(layer: &Layer, effect: &Effect) -> Layer {
    match *effect {
        Effect::None => layer.clone(),
        Effect::Border { width, gray } => {
            let (plane, w, h) = dilate_alpha(&layer.alpha(), layer.width(), layer.height(), width);
            let mut ring = Layer::new(w, h)
                .with_offset(layer.offset_x - width as i32, layer.offset_y - width as i32);
            for (p, a) in ring.image.pixels_mut().zip(plane) {
                if a > 0 {
                    *p = Rgba([gray, gray, gray, a]);
                }
            }
            flatten(&[ring, layer.clone()])
        }
        Effect::Shadow { dx, dy, gray } => flatten(&[shifted(&tinted(layer, gray), dx, dy), layer.clone()]),
        Effect::Extrude { depth, gray } => {
            let body = tinted(layer, gray);
            let mut stack: Vec<Layer> =
                (1..=depth as i32).rev().map(|k| shifted(&body, k, k)).collect();
            stack.push(layer.clone());
            flatten(&stack)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureStyle {
    pub enabled: bool,
    pub prob: f64,
    pub alpha: Span<f32>,
}

impl Default for TextureStyle {
    fn default() -> Self {
        Self { enabled: true, prob: 0.5, alpha: Span::new(0.0, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectConfig {
    pub enabled: bool,
    /// Probability that any effect is applied; the kind is then uniform.
    pub prob: f64,
    pub border_width: Span<u32>,
    pub shadow_offset: Span<i32>,
    pub extrude_depth: Span<u32>,
}

impl Default for EffectConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            prob: 0.5,
            border_width: Span::new(1, 4),
            shadow_offset: Span::new(-4, 4),
            extrude_depth: Span::new(1, 4),
        }
    }
}

impl EffectConfig {
    pub fn sample<R: Rng + ?Sized>(&self, gray: u8, rng: &mut R) -> Effect {
        if !self.enabled || !rng.random_bool(self.prob) {
            return Effect::None;
        }
        match rng.random_range(0..3) {
            0 => Effect::Border { width: self.border_width.sample(rng), gray },
            1 => Effect::Shadow {
                dx: self.shadow_offset.sample(rng),
                dy: self.shadow_offset.sample(rng),
                gray,
            },
            _ => Effect::Extrude { depth: self.extrude_depth.sample(rng), gray },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleConfig {
    /// Draw colors from the color map; otherwise uniformly random grays.
    pub color_map: bool,
    pub texture: TextureStyle,
    pub effect: EffectConfig,
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self { color_map: true, texture: TextureStyle::default(), effect: EffectConfig::default() }
    }
}

impl StyleConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("style.texture.prob", self.texture.prob), ("style.effect.prob", self.effect.prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        self.texture.alpha.check_within("style.texture.alpha", 0.0, 1.0)?;
        self.effect.border_width.check_within("style.effect.border_width", 1, 64)?;
        self.effect.shadow_offset.check_within("style.effect.shadow_offset", -64, 64)?;
        self.effect.extrude_depth.check_within("style.effect.extrude_depth", 1, 64)?;
        Ok(())
    }

    /// Text, background and effect grays.
    pub fn sample_palette<R: Rng + ?Sized>(&self, map: &ColorMap, rng: &mut R) -> [u8; 3] {
        if !self.color_map {
            return [rng.random(), rng.random(), rng.random()];
        }
        let c = sample_colors(map, rng);
        let effect = c.get(2).copied().unwrap_or_else(|| rng.random());
        [c[0], c[1], effect]
    }
}
