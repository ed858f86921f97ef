//! One sample end to end: text, shape, style, geometry, compositing, the
//! visibility check and degradation.
//!
//! Randomness comes from keyed streams on `(seed, index)`, so a sample never
//! depends on which worker renders it or in what order.

use std::collections::BTreeSet;

use image::RgbaImage;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::{composite, make_background, shift_range, visibility_check, CompositeScene, Visibility};
use crate::config::GenConfig;
use crate::glyph_shaper::{shape_text, ShapeError};
use crate::layer::Layer;
use crate::postprocessor::postprocess;
use crate::resources::{pick_font, ResourceError, ResourceSet};
use crate::rng::{stream, Lane};
use crate::styler::{apply_effect, apply_texture, colorize, Effect};
use crate::text_sampler::{self, Origin};
use crate::transformer::{add_margins, transform, TransformError};

/// Optional rendering functions; a stage appears in a trace only when it ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    CurvedText,
    ElasticDistortion,
    ColorMap,
    TextTexture,
    BackgroundTexture,
    TextEffect,
    Transformation,
    Margin,
    Midground,
    BlendModes,
    VisibilityCheck,
    PostProcessing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtRecord {
    /// Image path relative to the output directory.
    pub path: String,
    pub label: String,
    pub index: u64,
    pub origin: Origin,
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("text {text:?} cannot be rendered: {reason}")]
    Unrenderable { text: String, reason: String },
    #[error("discarded by the visibility check on all {attempts} attempts (last leak ratio {last_ratio:.3})")]
    RetriesExhausted { attempts: u32, last_ratio: f64 },
    #[error(transparent)]
    Resource(#[from] ResourceError),
}

#[derive(Debug, Clone)]
pub struct Sample {
    /// Opaque final image.
    pub image: RgbaImage,
    pub label: String,
    pub origin: Origin,
    /// The string handed to the foreground shaper.
    pub shaped_text: String,
    /// Noise text of the mid-ground layer, if one was drawn.
    pub midground_text: Option<String>,
    pub trace: BTreeSet<Stage>,
    /// Attempts rejected by the visibility check before this one.
    pub discards: u32,
    pub visibility: Option<Visibility>,
    /// Intermediate rasters by name; only filled when requested.
    pub intermediates: Vec<(String, RgbaImage)>,
}

struct Recorder {
    trace: BTreeSet<Stage>,
    /// Every string handed to the shaper, tagged by layer.
    shaped: Vec<(&'static str, String)>,
    intermediates: Option<Vec<(String, RgbaImage)>>,
}

impl Recorder {
    fn mark(&mut self, stage: Stage) {
        self.trace.insert(stage);
    }

    fn keep(&mut self, name: &str, layer: &Layer) {
        if let Some(v) = &mut self.intermediates {
            v.push((name.to_string(), layer.image.clone()));
        }
    }
}

enum LayerError {
    Shape(ShapeError),
    Transform(TransformError),
    Resource(ResourceError),
}

impl std::fmt::Display for LayerError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerError::Shape(e) => e.fmt(f),
            LayerError::Transform(e) => e.fmt(f),
            LayerError::Resource(e) => e.fmt(f),
        }
    }
}

/// Stages (a)-(c) for one text: font, shape, color, texture, effect,
/// transform and margins.
fn render_text_layer<R: Rng + ?Sized>(
    resources: &ResourceSet,
    cfg: &GenConfig,
    text: &str,
    gray: u8,
    effect_gray: u8,
    rng: &mut R,
    rec: &mut Recorder,
    tag: &'static str,
) -> Result<Layer, LayerError> {
    let font = pick_font(&resources.fonts, text, rng).map_err(LayerError::Resource)?;
    let params = cfg.shape.sample(font, rng);
    if params.curved {
        rec.mark(Stage::CurvedText);
    }
    if params.elastic.is_some() {
        rec.mark(Stage::ElasticDistortion);
    }
    rec.shaped.push((tag, text.to_string()));
    let shaped = shape_text(text, &params, rng).map_err(LayerError::Shape)?;
    rec.keep(&format!("{tag}_shape"), &shaped);

    let mut layer = colorize(&shaped, gray);
    let tex = &cfg.style.texture;
    if tex.enabled && rng.random_bool(tex.prob) {
        let pixels = resources.textures.pick(rng).pixels().map_err(LayerError::Resource)?;
        let alpha = tex.alpha.sample(rng);
        layer = apply_texture(&layer, &pixels, alpha, rng);
        rec.mark(Stage::TextTexture);
    }
    let effect = cfg.style.effect.sample(effect_gray, rng);
    if effect != Effect::None {
        layer = apply_effect(&layer, &effect);
        rec.mark(Stage::TextEffect);
    }
    rec.keep(&format!("{tag}_style"), &layer);

    let t = cfg.transform.sample(rng);
    if !t.is_identity() {
        layer = transform(&layer, &t, cfg.transform.max_dimension).map_err(LayerError::Transform)?;
        rec.mark(Stage::Transformation);
    }
    layer = layer.trimmed();
    if cfg.margin.enabled {
        let m = cfg.margin.sample(rng, layer.width(), layer.height());
        layer = add_margins(&layer, m);
        rec.mark(Stage::Margin);
    }
    rec.keep(&format!("{tag}_geometry"), &layer);
    Ok(layer)
}

/// Render sample `index` of the run described by `cfg`.
pub fn generate_sample(resources: &ResourceSet, cfg: &GenConfig, index: u64) -> Result<Sample, SampleError> {
    render(resources, cfg, index, false)
}

/// Like [`generate_sample`], also returning the intermediate rasters of the
/// accepted attempt.
pub fn generate_sample_with_intermediates(
    resources: &ResourceSet,
    cfg: &GenConfig,
    index: u64,
) -> Result<Sample, SampleError> {
    render(resources, cfg, index, true)
}

fn render(resources: &ResourceSet, cfg: &GenConfig, index: u64, capture: bool) -> Result<Sample, SampleError> {
    let seed = cfg.output.seed;
    let text = text_sampler::sample(&resources.lexicon, &cfg.sampler, &mut stream(seed, index, Lane::Text));
    let unrenderable = |reason: String| SampleError::Unrenderable { text: text.text.clone(), reason };
    if !resources.fonts.fonts().iter().any(|f| f.covers_text(&text.text)) {
        return Err(unrenderable("no font covers every character".into()));
    }

    let mut last_ratio = 1.0;
    for attempt in 0..cfg.retry_limit {
        let rng = &mut stream(seed, index, Lane::Attempt(attempt));
        let mut rec = Recorder { trace: BTreeSet::new(), shaped: Vec::new(), intermediates: capture.then(Vec::new) };

        let [text_gray, bg_gray, effect_gray] = cfg.style.sample_palette(&resources.colormap, rng);
        if cfg.style.color_map {
            rec.mark(Stage::ColorMap);
        }
        let fg = render_text_layer(resources, cfg, &text.text, text_gray, effect_gray, rng, &mut rec, "foreground")
            .map_err(|e| unrenderable(e.to_string()))?;
        let size = (fg.width(), fg.height());

        let comp = &cfg.compositor;
        let background = make_background(resources, size, bg_gray, &comp.background, rng)?;
        if comp.background.texture {
            rec.mark(Stage::BackgroundTexture);
        }
        rec.keep("background", &background);

        let (mut midground, mut mid_shift) = (Layer::new(1, 1), (0, 0));
        if comp.midground.enabled {
            let noise = text_sampler::sample_plain(&resources.lexicon, rng).text;
            let [mid_gray, _, mid_effect] = cfg.style.sample_palette(&resources.colormap, rng);
            // An uncoverable noise word only costs the mid-ground, not the sample.
            if let Ok(mid) = render_text_layer(resources, cfg, &noise, mid_gray, mid_effect, rng, &mut rec, "midground") {
                let ((x0, x1), (y0, y1)) = shift_range(size, (mid.width(), mid.height()));
                mid_shift = (rng.random_range(x0..=x1), rng.random_range(y0..=y1));
                midground = mid;
                rec.mark(Stage::Midground);
            }
        }

        let (mid_mode, fg_mode) = (comp.blend.sample(rng), comp.blend.sample(rng));
        if comp.blend.enabled {
            rec.mark(Stage::BlendModes);
        }
        let scene = CompositeScene { background, midground, foreground: fg, fg_protect_margin: comp.fg_protect_margin };
        let merged = composite(&scene, mid_mode, fg_mode, mid_shift);
        rec.keep("composite", &merged);

        let mut visibility = None;
        if comp.visibility.enabled {
            let v = visibility_check(
                &merged.image,
                &scene.foreground.image,
                comp.visibility.tolerance,
                comp.visibility.threshold,
            );
            rec.mark(Stage::VisibilityCheck);
            visibility = Some(v);
            if !v.keep {
                last_ratio = v.ratio;
                continue;
            }
        }

        let ops = cfg.postprocess.sample(rng);
        if !ops.is_empty() {
            rec.mark(Stage::PostProcessing);
        }
        let out = postprocess(&merged, &ops, rng);
        rec.keep("final", &out);

        let shaped_by = |tag: &str| rec.shaped.iter().find(|(t, _)| *t == tag).map(|(_, s)| s.clone());
        return Ok(Sample {
            image: out.image,
            label: text.text.clone(),
            origin: text.origin,
            shaped_text: shaped_by("foreground").unwrap_or_default(),
            midground_text: if rec.trace.contains(&Stage::Midground) { shaped_by("midground") } else { None },
            trace: rec.trace,
            discards: attempt,
            visibility,
            intermediates: rec.intermediates.unwrap_or_default(),
        });
    }
    Err(SampleError::RetriesExhausted { attempts: cfg.retry_limit, last_ratio })
}
