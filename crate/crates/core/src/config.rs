//! The generation config: one TOML document holding every stage's ranges plus
//! resource paths and output settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::CompositorConfig;
use crate::glyph_shaper::ShapeConfig;
use crate::postprocessor::PostConfig;
use crate::resources::ResourcePaths;
use crate::styler::StyleConfig;
use crate::text_sampler::SamplerConfig;
use crate::transformer::{MarginConfig, TransformConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Png,
    Jpg,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpg => "jpg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: ImageFormat,
    /// Only used for `jpg` output.
    pub jpeg_quality: u8,
    pub count: u64,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: ImageFormat::Png, jpeg_quality: 95, count: 1000, seed: 0, workers: 0 }
    }
}

fn default_retry_limit() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub resources: ResourcePaths,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub shape: ShapeConfig,
    #[serde(default)]
    pub style: StyleConfig,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub margin: MarginConfig,
    #[serde(default)]
    pub compositor: CompositorConfig,
    #[serde(default)]
    pub postprocess: PostConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Render attempts per sample before it is reported as failed.
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
}

impl GenConfig {
    /// Defaults for every stage around the given resources.
    pub fn with_resources(resources: ResourcePaths) -> Self {
        Self {
            resources,
            sampler: SamplerConfig::default(),
            shape: ShapeConfig::default(),
            style: StyleConfig::default(),
            transform: TransformConfig::default(),
            margin: MarginConfig::default(),
            compositor: CompositorConfig::default(),
            postprocess: PostConfig::default(),
            output: OutputConfig::default(),
            retry_limit: default_retry_limit(),
        }
    }

    /// Parse without touching the file system; paths stay as written.
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Read, parse, resolve relative paths against the config's directory and
    /// validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_toml(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resources = cfg.resources.resolved(base);
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let checks = [
            self.sampler.validate(),
            self.shape.validate(),
            self.style.validate(),
            self.transform.validate(),
            self.margin.validate(),
            self.compositor.validate(),
            self.postprocess.validate(),
        ];
        for c in checks {
            c.map_err(ConfigError::Invalid)?;
        }
        if self.output.count == 0 {
            return Err(ConfigError::Invalid("output.count must be at least 1".into()));
        }
        if !(1..=100).contains(&self.output.jpeg_quality) {
            return Err(ConfigError::Invalid("output.jpeg_quality must lie in [1, 100]".into()));
        }
        if self.retry_limit == 0 {
            return Err(ConfigError::Invalid("retry_limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[resources]
lexicon = "lexicon.txt"
fonts = "fonts"
textures = "textures"
colormap = "colormap.txt"
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = GenConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.retry_limit, 5);
        assert_eq!(cfg.output, OutputConfig::default());
        assert!(cfg.resources.case_augment);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(GenConfig::from_toml(&format!("{MINIMAL}\n[output]\ncuont = 3\n")).is_err());
        assert!(GenConfig::from_toml(&format!("{MINIMAL}\n[shape.curve]\nprob = 0.2\nflavor = 1\n")).is_err());
    }

    #[test]
    fn invalid_values_are_reported() {
        let mut cfg = GenConfig::from_toml(MINIMAL).unwrap();
        cfg.output.count = 0;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
        let mut cfg = GenConfig::from_toml(MINIMAL).unwrap();
        cfg.retry_limit = 0;
        assert!(cfg.validate().is_err());
        let bad = GenConfig::from_toml(&format!("{MINIMAL}\n[sampler]\np_length = 1.5\n")).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = GenConfig::from_toml(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(GenConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn shipped_default_matches_built_in_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
        let cfg = GenConfig::load(&path).unwrap();
        let mut expected = GenConfig::with_resources(cfg.resources.clone());
        expected.output.dir = cfg.output.dir.clone();
        assert_eq!(cfg, expected);
        assert!(cfg.resources.fonts.is_dir() && cfg.resources.lexicon.is_file());
    }

    #[test]
    fn load_resolves_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = GenConfig::load(&path).unwrap();
        assert_eq!(cfg.resources.fonts, dir.path().join("fonts"));
        assert_eq!(cfg.output.dir, dir.path().join("out"));
        assert!(matches!(GenConfig::load(&dir.path().join("missing.toml")), Err(ConfigError::Io { .. })));
    }
}
