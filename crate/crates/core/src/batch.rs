//! Batch generation over sample indices, the ground-truth manifest, and
//! corpus statistics.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ImageFormat as Codec, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, GenConfig, ImageFormat};
use crate::pipeline::{generate_sample, generate_sample_with_intermediates, GtRecord, Sample, SampleError, Stage};
use crate::resources::ResourceSet;

pub const MANIFEST: &str = "gt.txt";
pub const SUMMARY: &str = "summary.json";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("encoding image: {0}")]
    Encode(#[from] image::ImageError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BatchError + '_ {
    move |source| BatchError::Io { path: path.to_path_buf(), source }
}

/// How sample indices are spread over threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon pool with the given thread count (0: one per core).
    #[cfg(feature = "parallel")]
    Parallel { workers: usize },
}

impl Execution {
    /// Parallel when compiled in and more than one worker is asked for.
    pub fn for_workers(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        if workers != 1 {
            return Execution::Parallel { workers };
        }
        let _ = workers;
        Execution::Sequential
    }

    fn map<T: Send, F>(self, count: u64, f: F) -> Result<Vec<T>, BatchError>
    where
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => Ok((0..count).map(f).collect()),
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => {
                use rayon::prelude::*;
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| BatchError::Pool(e.to_string()))?;
                Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub requested: u64,
    pub succeeded: u64,
    pub failed: u64,
    /// Samples that needed more than one attempt.
    pub retried: u64,
    /// Attempts rejected by the visibility check, over all samples.
    pub discards: u64,
    /// Written samples whose label differs from the text given to the shaper.
    pub label_mismatches: u64,
    pub origins: BTreeMap<String, u64>,
    /// How many written samples ran each optional stage.
    pub stages: BTreeMap<String, u64>,
    pub failures: Vec<Failure>,
    pub wall_time_secs: f64,
    pub workers: usize,
    pub config: GenConfig,
}

/// Encode an opaque image for the chosen output format.
pub fn encode(image: &RgbaImage, format: ImageFormat, jpeg_quality: u8) -> Result<Vec<u8>, image::ImageError> {
    let rgb = DynamicImage::ImageRgba8(image.clone()).to_rgb8();
    let mut buf = Vec::new();
    match format {
        ImageFormat::Png => rgb.write_to(&mut Cursor::new(&mut buf), Codec::Png)?,
        ImageFormat::Jpg => JpegEncoder::new_with_quality(&mut buf, jpeg_quality).encode_image(&rgb)?,
    }
    Ok(buf)
}

pub fn image_path(index: u64, format: ImageFormat) -> String {
    format!("{IMAGE_DIR}/{index:08}.{}", format.extension())
}

fn snake(v: impl Serialize) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Render `cfg.output.count` samples into `cfg.output.dir` and write the
/// manifest and run summary. Output is identical for any execution mode.
pub fn generate_batch(resources: &ResourceSet, cfg: &GenConfig, exec: Execution) -> Result<BatchSummary, BatchError> {
    cfg.validate()?;
    let start = Instant::now();
    let out = &cfg.output;
    let images = out.dir.join(IMAGE_DIR);
    std::fs::create_dir_all(&images).map_err(io_err(&images))?;

    let results = exec.map(out.count, |index| -> Result<Result<(GtRecord, Sample), Failure>, BatchError> {
        match generate_sample(resources, cfg, index) {
            Ok(sample) => {
                let rel = image_path(index, out.format);
                let bytes = encode(&sample.image, out.format, out.jpeg_quality)?;
                let path = out.dir.join(&rel);
                std::fs::write(&path, bytes).map_err(io_err(&path))?;
                let record = GtRecord { path: rel, label: sample.label.clone(), index, origin: sample.origin };
                Ok(Ok((record, sample)))
            }
            Err(e @ (SampleError::Unrenderable { .. } | SampleError::RetriesExhausted { .. })) => {
                Ok(Err(Failure { index, reason: e.to_string() }))
            }
            Err(SampleError::Resource(e)) => Err(BatchError::Config(ConfigError::Invalid(e.to_string()))),
        }
    })?;

    let mut summary = BatchSummary {
        requested: out.count,
        succeeded: 0,
        failed: 0,
        retried: 0,
        discards: 0,
        label_mismatches: 0,
        origins: BTreeMap::new(),
        stages: BTreeMap::new(),
        failures: Vec::new(),
        wall_time_secs: 0.0,
        workers: match exec {
            Execution::Sequential => 1,
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers: 0 } => rayon::current_num_threads(),
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => workers,
        },
        config: cfg.clone(),
    };
    let mut records = Vec::new();
    for r in results {
        match r? {
            Ok((record, sample)) => {
                summary.succeeded += 1;
                summary.discards += sample.discards as u64;
                summary.retried += (sample.discards > 0) as u64;
                summary.label_mismatches += (sample.shaped_text != record.label) as u64;
                *summary.origins.entry(snake(record.origin)).or_default() += 1;
                for stage in &sample.trace {
                    *summary.stages.entry(snake(stage)).or_default() += 1;
                }
                records.push(record);
            }
            Err(f) => {
                summary.failed += 1;
                summary.failures.push(f);
            }
        }
    }
    let manifest = out.dir.join(MANIFEST);
    std::fs::write(&manifest, format_manifest(&records)).map_err(io_err(&manifest))?;
    summary.wall_time_secs = start.elapsed().as_secs_f64();
    let path = out.dir.join(SUMMARY);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, json).map_err(io_err(&path))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Manifest

pub fn format_manifest(records: &[GtRecord]) -> String {
    records.iter().map(|r| format!("{}\t{}\n", r.path, r.label)).collect()
}

#[derive(Debug, Error, PartialEq)]
#[error("manifest line {line}: {reason}")]
pub struct ManifestError {
    pub line: usize,
    pub reason: String,
}

/// `(path, label)` pairs of a `path<TAB>label` manifest. Blank lines are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<(String, String)>, ManifestError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| match l.split_once('\t') {
            Some((p, label)) if !p.is_empty() && !label.contains('\t') => Ok((p.to_string(), label.to_string())),
            _ => Err(ManifestError { line: i + 1, reason: "expected `path<TAB>label`".into() }),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Statistics

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharCount {
    #[serde(rename = "char")]
    pub ch: char,
    /// Labels containing the character at least once.
    pub words: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatsReport {
    pub labels: u64,
    /// Label length in characters -> label count.
    pub length_histogram: BTreeMap<usize, u64>,
    /// Most frequent first; ties by character.
    pub char_counts: Vec<CharCount>,
}

pub fn stats_from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> StatsReport {
    let mut report = StatsReport::default();
    let mut chars: BTreeMap<char, u64> = BTreeMap::new();
    for label in labels {
        report.labels += 1;
        *report.length_histogram.entry(label.chars().count()).or_default() += 1;
        let mut seen: Vec<char> = label.chars().collect();
        seen.sort_unstable();
        seen.dedup();
        for c in seen {
            *chars.entry(c).or_default() += 1;
        }
    }
    report.char_counts = chars.into_iter().map(|(ch, words)| CharCount { ch, words }).collect();
    report.char_counts.sort_by(|a, b| b.words.cmp(&a.words).then(a.ch.cmp(&b.ch)));
    report
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

pub fn stats(manifest: &Path) -> Result<StatsReport, StatsError> {
    let text = std::fs::read_to_string(manifest).map_err(|source| StatsError::Io { path: manifest.into(), source })?;
    let rows = parse_manifest(&text)?;
    Ok(stats_from_labels(rows.iter().map(|(_, l)| l.as_str())))
}

// ---------------------------------------------------------------------------
// Preview

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewRecord {
    pub index: u64,
    pub label: Option<String>,
    pub trace: Vec<Stage>,
    pub error: Option<String>,
}

/// Render the first `count` samples with their intermediate rasters into
/// `dir/<index>/<stage>.png`, plus a `trace.json` listing.
pub fn preview(resources: &ResourceSet, cfg: &GenConfig, count: u64, dir: &Path) -> Result<Vec<PreviewRecord>, BatchError> {
    let mut records = Vec::new();
    for index in 0..count {
        let sub = dir.join(format!("{index:08}"));
        std::fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        let record = match generate_sample_with_intermediates(resources, cfg, index) {
            Ok(s) => {
                for (i, (name, img)) in s.intermediates.iter().enumerate() {
                    let path = sub.join(format!("{i:02}_{name}.png"));
                    img.save_with_format(&path, Codec::Png)?;
                }
                PreviewRecord { index, label: Some(s.label), trace: s.trace.into_iter().collect(), error: None }
            }
            Err(SampleError::Resource(e)) => return Err(BatchError::Config(ConfigError::Invalid(e.to_string()))),
            Err(e) => PreviewRecord { index, label: None, trace: Vec::new(), error: Some(e.to_string()) },
        };
        records.push(record);
    }
    let path = dir.join("trace.json");
    std::fs::write(&path, serde_json::to_string_pretty(&records).expect("records serialize")).map_err(io_err(&path))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_sampler::Origin;

    #[test]
    fn hand_counted_stats() {
        let r = stats_from_labels(["ab", "b"]);
        assert_eq!(r.labels, 2);
        assert_eq!(r.length_histogram, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(r.char_counts, vec![CharCount { ch: 'b', words: 2 }, CharCount { ch: 'a', words: 1 }]);
        // Repeats inside one label count once.
        assert_eq!(stats_from_labels(["aaa"]).char_counts, vec![CharCount { ch: 'a', words: 1 }]);
    }

    #[test]
    fn empty_manifest_gives_empty_report() {
        assert_eq!(stats_from_labels(parse_manifest("").unwrap().iter().map(|(_, l)| l.as_str())), StatsReport::default());
    }

    #[test]
    fn manifest_round_trip() {
        let records = vec![
            GtRecord { path: "images/00000000.png".into(), label: "Hello world".into(), index: 0, origin: Origin::Plain },
            GtRecord { path: "images/00000002.png".into(), label: "日本".into(), index: 2, origin: Origin::CharAugmented },
        ];
        let text = format_manifest(&records);
        let parsed = parse_manifest(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        for (r, (p, l)) in records.iter().zip(&parsed) {
            assert_eq!((&r.path, &r.label), (p, l));
        }
        assert_eq!(parse_manifest("no tab here\n").unwrap_err().line, 1);
        assert!(parse_manifest("a\tb\tc\n").is_err());
    }

    #[test]
    fn encoded_png_decodes_to_same_pixels() {
        let img = RgbaImage::from_fn(9, 5, |x, y| image::Rgba([x as u8 * 20, y as u8 * 40, 7, 255]));
        let bytes = encode(&img, ImageFormat::Png, 95).unwrap();
        assert_eq!(image::load_from_memory(&bytes).unwrap().to_rgba8(), img);
        assert!(!encode(&img, ImageFormat::Jpg, 80).unwrap().is_empty());
    }

    #[test]
    fn execution_choice() {
        assert_eq!(Execution::for_workers(1), Execution::Sequential);
        #[cfg(feature = "parallel")]
        assert_eq!(Execution::for_workers(4), Execution::Parallel { workers: 4 });
    }
}
