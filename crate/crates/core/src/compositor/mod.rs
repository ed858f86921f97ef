//! Background construction, mid-ground/foreground merging and the
//! visibility check.

mod blend;
mod visibility;

pub use blend::{blend_channel, blend_over, blend_pixel, BlendMode};
pub use visibility::{gray, leak_stats, visibility_check, Visibility, TEXT_ALPHA};

use image::{Rgba, RgbaImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::layer::{dilate_alpha, Layer};
use crate::resources::{ResourceError, ResourceSet};
use crate::span::Span;

/// Opaque `w`x`h` background of `gray`, optionally overlaid by a random crop
/// of `texture` (tiled as needed) at the given opacity.
pub fn fill_background<R: Rng + ?Sized>(
    w: u32,
    h: u32,
    gray: u8,
    texture: Option<(&RgbaImage, f32)>,
    rng: &mut R,
) -> Layer {
    let mut bg = Layer::filled(w, h, Rgba([gray, gray, gray, 255]));
    let Some((tex, opacity)) = texture else {
        return bg;
    };
    let (tw, th) = tex.dimensions();
    let (ox, oy) = (rng.random_range(0..tw), rng.random_range(0..th));
    if opacity <= 0.0 {
        return bg;
    }
    let a = opacity.min(1.0);
    for (x, y, p) in bg.image.enumerate_pixels_mut() {
        let t = tex.get_pixel((ox + x) % tw, (oy + y) % th);
        for c in 0..3 {
            p[c] = (gray as f32 * (1.0 - a) + t[c] as f32 * a).round() as u8;
        }
    }
    bg
}

/// Background from the resource pools: `gray` plus, when enabled, a random
/// texture at a random opacity.
pub fn make_background<R: Rng + ?Sized>(
    resources: &ResourceSet,
    size: (u32, u32),
    gray: u8,
    cfg: &BackgroundConfig,
    rng: &mut R,
) -> Result<Layer, ResourceError> {
    if !cfg.texture {
        return Ok(fill_background(size.0, size.1, gray, None, rng));
    }
    let tex = resources.textures.pick(rng).pixels()?;
    let opacity = cfg.alpha.sample(rng);
    Ok(fill_background(size.0, size.1, gray, Some((&tex, opacity)), rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeScene {
    /// Opaque, at least as large as the foreground.
    pub background: Layer,
    /// Noise text; its offset is ignored in favor of the shift passed to [`composite`].
    pub midground: Layer,
    /// Target text; defines the output canvas.
    pub foreground: Layer,
    pub fg_protect_margin: u32,
}

/// Mask of pixels where the mid-ground is suppressed: foreground coverage
/// grown by `margin` px.
pub fn protected_region(fg: &Layer, margin: u32) -> Vec<bool> {
    let (w, h) = (fg.width(), fg.height());
    let (plane, pw, _) = dilate_alpha(&fg.alpha(), w, h, margin);
    let mut out = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            out[(y * w + x) as usize] = plane[((y + margin) * pw + x + margin) as usize] > 0;
        }
    }
    out
}

/// Merge background, shifted mid-ground and foreground into one opaque image
/// the size of the foreground layer. `mid_shift` is the mid-ground's top-left
/// corner in canvas coordinates.
pub fn composite(scene: &CompositeScene, mid_mode: BlendMode, fg_mode: BlendMode, mid_shift: (i32, i32)) -> Layer {
    let fg = &scene.foreground;
    let (w, h) = (fg.width(), fg.height());
    let mut out = Layer::new(w, h);
    for (x, y, p) in out.image.enumerate_pixels_mut() {
        let b = scene.background.image.get_pixel(x % scene.background.width(), y % scene.background.height());
        *p = Rgba([b[0], b[1], b[2], 255]);
    }
    let protect = protected_region(fg, scene.fg_protect_margin);
    let mid = &scene.midground;
    for (x, y, p) in out.image.enumerate_pixels_mut() {
        if protect[(y * w + x) as usize] {
            continue;
        }
        let (mx, my) = (x as i32 - mid_shift.0, y as i32 - mid_shift.1);
        if mx < 0 || my < 0 || mx >= mid.width() as i32 || my >= mid.height() as i32 {
            continue;
        }
        let m = mid.image.get_pixel(mx as u32, my as u32);
        let rgb = blend_over([p[0], p[1], p[2]], [m[0], m[1], m[2]], m[3], mid_mode);
        *p = Rgba([rgb[0], rgb[1], rgb[2], 255]);
    }
    for (p, f) in out.image.pixels_mut().zip(fg.image.pixels()) {
        let rgb = blend_over([p[0], p[1], p[2]], [f[0], f[1], f[2]], f[3], fg_mode);
        *p = Rgba([rgb[0], rgb[1], rgb[2], 255]);
    }
    out
}

/// Range of mid-ground shifts that keeps at least one mid-ground pixel on a
/// `canvas`-sized image.
pub fn shift_range(canvas: (u32, u32), mid: (u32, u32)) -> ((i32, i32), (i32, i32)) {
    (
        (1 - mid.0 as i32, canvas.0 as i32 - 1),
        (1 - mid.1 as i32, canvas.1 as i32 - 1),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    pub texture: bool,
    /// Texture opacity.
    pub alpha: Span<f32>,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self { texture: true, alpha: Span::new(0.0, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    /// Draw blend modes from `modes`; when off, both merges use `normal`.
    pub enabled: bool,
    pub modes: Vec<BlendMode>,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self { enabled: true, modes: BlendMode::ALL.to_vec() }
    }
}

impl BlendConfig {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BlendMode {
        if !self.enabled || self.modes.is_empty() {
            return BlendMode::Normal;
        }
        self.modes[rng.random_range(0..self.modes.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilityConfig {
    pub enabled: bool,
    /// Largest gray-level step a fill may cross.
    pub tolerance: u8,
    /// Largest acceptable share of leaking boundary pixels.
    pub threshold: f64,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self { enabled: true, tolerance: 10, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MidgroundConfig {
    pub enabled: bool,
}

impl Default for MidgroundConfig {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositorConfig {
    pub background: BackgroundConfig,
    pub midground: MidgroundConfig,
    pub blend: BlendConfig,
    pub visibility: VisibilityConfig,
    pub fg_protect_margin: u32,
}

impl Default for CompositorConfig {
    fn default() -> Self {
        Self {
            background: BackgroundConfig::default(),
            midground: MidgroundConfig::default(),
            blend: BlendConfig::default(),
            visibility: VisibilityConfig::default(),
            fg_protect_margin: 2,
        }
    }
}

impl CompositorConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.background.alpha.check_within("compositor.background.alpha", 0.0, 1.0)?;
        if !(0.0..=1.0).contains(&self.visibility.threshold) {
            return Err("compositor.visibility.threshold must lie in [0, 1]".into());
        }
        if self.blend.enabled && self.blend.modes.is_empty() {
            return Err("compositor.blend.modes is empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::over;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn text_layer(w: u32, h: u32, gray: u8) -> Layer {
        let mut l = Layer::new(w, h);
        for (x, y, p) in l.image.enumerate_pixels_mut() {
            if (x / 3 + y / 2) % 2 == 0 && x > 2 && y > 2 && x < w - 3 && y < h - 3 {
                *p = Rgba([gray, gray, gray, if x % 5 == 0 { 100 } else { 255 }]);
            }
        }
        l
    }

    #[test]
    fn background_opacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tex = RgbaImage::from_pixel(3, 3, Rgba([40, 80, 120, 255]));
        let plain = fill_background(5, 4, 90, Some((&tex, 0.0)), &mut rng);
        assert!(plain.image.pixels().all(|p| p.0 == [90, 90, 90, 255]));
        let full = fill_background(5, 4, 90, Some((&tex, 1.0)), &mut rng);
        assert!(full.image.pixels().all(|p| p.0 == [40, 80, 120, 255]));
        let half = fill_background(5, 4, 90, Some((&tex, 0.5)), &mut rng);
        let mid = |c: u8| ((90.0 + c as f64) / 2.0).round() as u8;
        assert!(half.image.pixels().all(|p| p.0 == [mid(40), mid(80), mid(120), 255]));
    }

    #[test]
    fn empty_midground_and_normal_mode_is_alpha_over() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tex = RgbaImage::from_fn(7, 5, |x, y| Rgba([(x * 30) as u8, (y * 40) as u8, 9, 255]));
        let fg = text_layer(30, 14, 20);
        let bg = fill_background(30, 14, 200, Some((&tex, 0.7)), &mut rng);
        let scene = CompositeScene {
            background: bg.clone(),
            midground: Layer::new(10, 10),
            foreground: fg.clone(),
            fg_protect_margin: 2,
        };
        let out = composite(&scene, BlendMode::Multiply, BlendMode::Normal, (3, 3));
        for ((o, b), f) in out.image.pixels().zip(bg.image.pixels()).zip(fg.image.pixels()) {
            assert_eq!(*o, over(*f, *b));
        }
    }

    #[test]
    fn midground_outside_canvas_has_no_effect() {
        let fg = text_layer(30, 14, 20);
        let bg = Layer::filled(30, 14, Rgba([200, 200, 200, 255]));
        let mid = Layer::filled(8, 8, Rgba([0, 0, 0, 255]));
        let with = CompositeScene { background: bg.clone(), midground: mid, foreground: fg.clone(), fg_protect_margin: 2 };
        let without = CompositeScene { midground: Layer::new(1, 1), ..with.clone() };
        let a = composite(&with, BlendMode::Normal, BlendMode::Normal, (40, 0));
        let b = composite(&without, BlendMode::Normal, BlendMode::Normal, (0, 0));
        assert_eq!(a, b);
        let c = composite(&with, BlendMode::Normal, BlendMode::Normal, (-8, -8));
        assert_eq!(c, b);
    }

    #[test]
    fn protected_region_suppresses_midground() {
        let fg = text_layer(40, 20, 30);
        let bg = Layer::filled(40, 20, Rgba([180, 180, 180, 255]));
        let mid = Layer::filled(40, 20, Rgba([0, 0, 255, 255]));
        let margin = 2;
        let scene = CompositeScene { background: bg.clone(), midground: mid, foreground: fg.clone(), fg_protect_margin: margin };
        let out = composite(&scene, BlendMode::Normal, BlendMode::Multiply, (0, 0));
        let protect = protected_region(&fg, margin);
        let mut checked = 0;
        for (i, (x, y, o)) in out.image.enumerate_pixels().enumerate() {
            let b = bg.image.get_pixel(x, y);
            let f = fg.image.get_pixel(x, y);
            if protect[i] {
                // Only the foreground blend may have changed the background here.
                let rgb = blend_over([b[0], b[1], b[2]], [f[0], f[1], f[2]], f[3], BlendMode::Multiply);
                assert_eq!(o.0[..3], rgb);
                checked += 1;
            } else {
                assert_eq!(o.0[..3], [0, 0, 255]);
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn protected_region_covers_margin() {
        let mut fg = Layer::new(9, 9);
        fg.image.put_pixel(4, 4, Rgba([0, 0, 0, 255]));
        let p = protected_region(&fg, 2);
        assert_eq!(p.iter().filter(|&&b| b).count(), 13);
        assert!(p[4 * 9 + 6] && !p[4 * 9 + 7]);
    }

    #[test]
    fn shift_range_keeps_a_pixel() {
        let ((x0, x1), (y0, y1)) = shift_range((30, 10), (12, 8));
        assert_eq!((x0, x1, y0, y1), (-11, 29, -7, 9));
    }
}
