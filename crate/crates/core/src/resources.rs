//! External inputs of the generator: lexicon, fonts, textures and color map.
//!
//! Everything here is immutable once loaded and can be shared across worker
//! threads by reference. Texture pixels are decoded lazily on first use and
//! cached.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use ab_glyph::{Font, FontArc};
use image::RgbaImage;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {0} contains no words")]
    EmptyLexicon(PathBuf),
    #[error("lexicon line {line}: {reason}")]
    InvalidWord { line: usize, reason: &'static str },
    #[error("color map line {line}: {reason}")]
    MalformedColorMap { line: usize, reason: String },
    #[error("color map {0} contains no entries")]
    EmptyColorMap(PathBuf),
    #[error("no usable font files found in {0}")]
    NoFonts(PathBuf),
    #[error("invalid font file {0}")]
    InvalidFont(PathBuf),
    #[error("no PNG/JPEG textures found in {0}")]
    NoTextures(PathBuf),
    #[error("failed to decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("no font in the pool covers every character of {0:?}")]
    NoCoveringFont(String),
}

fn read_text(path: &Path) -> Result<String, ResourceError> {
    fs::read_to_string(path).map_err(|source| ResourceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Lexicon

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    words: Vec<String>,
    vocabulary: Vec<char>,
    /// For each vocabulary character (same index), the words containing it.
    containing: Vec<Vec<u32>>,
}

impl Lexicon {
    pub fn new(words: Vec<String>) -> Result<Self, ResourceError> {
        for (i, w) in words.iter().enumerate() {
            validate_word(w).map_err(|reason| ResourceError::InvalidWord { line: i + 1, reason })?;
        }
        let vocabulary: Vec<char> = words
            .iter()
            .flat_map(|w| w.chars())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let slot: HashMap<char, usize> =
            vocabulary.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut containing = vec![Vec::new(); vocabulary.len()];
        let mut seen = HashSet::new();
        for (wi, w) in words.iter().enumerate() {
            seen.clear();
            for c in w.chars() {
                if seen.insert(c) {
                    containing[slot[&c]].push(wi as u32);
                }
            }
        }
        Ok(Self { words, vocabulary, containing })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Distinct characters of all words, in code point order.
    pub fn vocabulary(&self) -> &[char] {
        &self.vocabulary
    }

    /// Indices of the words that contain the `k`-th vocabulary character.
    pub fn words_containing(&self, k: usize) -> &[u32] {
        &self.containing[k]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn validate_word(w: &str) -> Result<(), &'static str> {
    if w.is_empty() {
        return Err("empty word");
    }
    if w.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
        return Err("word contains a tab or line break");
    }
    Ok(())
}

fn capitalize(w: &str) -> String {
    let mut chars = w.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
        None => String::new(),
    }
}

/// Expand words into their capitalized, upper-cased and lower-cased forms,
/// deduplicated in first-seen order.
///
/// A word whose lower-cased form is shared with another distinct input word
/// (e.g. "iPod" next to "IPOD") is also kept verbatim, so the output never has
/// fewer distinct words than the input.
pub fn case_augment(words: &[String]) -> Vec<String> {
    let mut spellings: HashMap<String, usize> = HashMap::new();
    let mut distinct = HashSet::new();
    for w in words {
        if distinct.insert(w.as_str()) {
            *spellings.entry(w.to_lowercase()).or_default() += 1;
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for w in words {
        let mut push = |s: String| {
            if seen.insert(s.clone()) {
                out.push(s);
            }
        };
        if w.chars().any(char::is_alphabetic) {
            push(capitalize(w));
            push(w.to_uppercase());
            push(w.to_lowercase());
            if spellings[&w.to_lowercase()] > 1 {
                push(w.clone());
            }
        } else {
            push(w.clone());
        }
    }
    out
}

/// Load a one-word-per-line UTF-8 lexicon. Blank lines are skipped.
pub fn load_lexicon(path: &Path, case_aug: bool) -> Result<Lexicon, ResourceError> {
    let text = read_text(path)?;
    let mut words = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        validate_word(line).map_err(|reason| ResourceError::InvalidWord { line: i + 1, reason })?;
        words.push(line.to_string());
    }
    if words.is_empty() {
        return Err(ResourceError::EmptyLexicon(path.to_path_buf()));
    }
    if case_aug {
        words = case_augment(&words);
    }
    Lexicon::new(words)
}

// ---------------------------------------------------------------------------
// Color map

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorMapEntry {
    /// Text, background and (optionally) effect color clusters, in that order.
    pub clusters: Vec<Cluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorMap {
    pub entries: Vec<ColorMapEntry>,
}

impl ColorMap {
    pub fn parse(text: &str) -> Result<Self, ResourceError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            entries.push(parse_entry(line).map_err(|reason| {
                ResourceError::MalformedColorMap { line: i + 1, reason }
            })?);
        }
        Ok(Self { entries })
    }
}

fn parse_entry(line: &str) -> Result<ColorMapEntry, String> {
    let mut fields = line.split_whitespace();
    let k: usize = fields
        .next()
        .ok_or("missing cluster count")?
        .parse()
        .map_err(|_| "cluster count is not an integer".to_string())?;
    if !(2..=3).contains(&k) {
        return Err(format!("cluster count {k} is not 2 or 3"));
    }
    let nums = fields
        .map(|f| f.parse::<f64>().map_err(|_| format!("{f:?} is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    if nums.len() != 2 * k {
        return Err(format!("expected {} values after the count, found {}", 2 * k, nums.len()));
    }
    let clusters = nums
        .chunks_exact(2)
        .map(|pair| {
            let (mean, std) = (pair[0], pair[1]);
            if !(0.0..=255.0).contains(&mean) {
                return Err(format!("mean {mean} outside [0, 255]"));
            }
            if !(std >= 0.0) || !std.is_finite() {
                return Err(format!("standard deviation {std} is negative or not finite"));
            }
            Ok(Cluster { mean, std })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ColorMapEntry { clusters })
}

/// Load a color map: one entry per line, `K m1 s1 m2 s2 [m3 s3]`.
pub fn load_color_map(path: &Path) -> Result<ColorMap, ResourceError> {
    let map = ColorMap::parse(&read_text(path)?)?;
    if map.entries.is_empty() {
        return Err(ResourceError::EmptyColorMap(path.to_path_buf()));
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Fonts

#[derive(Clone)]
pub struct FontDescriptor {
    pub path: PathBuf,
    /// File stem of the font file.
    pub family: String,
    pub font: FontArc,
    coverage: Arc<HashSet<char>>,
}

impl std::fmt::Debug for FontDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FontDescriptor")
            .field("path", &self.path)
            .field("family", &self.family)
            .field("codepoints", &self.coverage.len())
            .finish()
    }
}

impl PartialEq for FontDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.path == other.path && self.family == other.family && self.coverage == other.coverage
    }
}

impl FontDescriptor {
    pub fn from_bytes(path: impl Into<PathBuf>, data: Vec<u8>) -> Result<Self, ResourceError> {
        let path = path.into();
        let font = FontArc::try_from_vec(data).map_err(|_| ResourceError::InvalidFont(path.clone()))?;
        let coverage: HashSet<char> = font
            .codepoint_ids()
            .filter(|(id, _)| id.0 != 0)
            .map(|(_, c)| c)
            .collect();
        let family = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self { path, family, font, coverage: Arc::new(coverage) })
    }

    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let data = fs::read(path).map_err(|source| ResourceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(path, data)
    }

    pub fn covers(&self, c: char) -> bool {
        self.coverage.contains(&c)
    }

    pub fn covers_text(&self, text: &str) -> bool {
        text.chars().all(|c| self.covers(c))
    }

    /// Restrict the reported coverage to `chars`.
    pub fn with_coverage(mut self, chars: impl IntoIterator<Item = char>) -> Self {
        let keep: HashSet<char> = chars.into_iter().filter(|c| self.coverage.contains(c)).collect();
        self.coverage = Arc::new(keep);
        self
    }

    pub fn coverage_len(&self) -> usize {
        self.coverage.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FontPool {
    fonts: Vec<FontDescriptor>,
}

impl FontPool {
    pub fn new(fonts: Vec<FontDescriptor>) -> Option<Self> {
        (!fonts.is_empty()).then_some(Self { fonts })
    }

    /// Load every `.ttf`/`.otf` file under `dir` (sorted by path).
    pub fn load_dir(dir: &Path) -> Result<Self, ResourceError> {
        let paths = scan(dir, &["ttf", "otf"])?;
        let fonts = paths.iter().map(|p| FontDescriptor::load(p)).collect::<Result<Vec<_>, _>>()?;
        Self::new(fonts).ok_or_else(|| ResourceError::NoFonts(dir.to_path_buf()))
    }

    pub fn fonts(&self) -> &[FontDescriptor] {
        &self.fonts
    }
}

/// Pick a font uniformly among those covering every character of `text`.
pub fn pick_font<'a, R: Rng + ?Sized>(
    pool: &'a FontPool,
    text: &str,
    rng: &mut R,
) -> Result<&'a FontDescriptor, ResourceError> {
    let candidates: Vec<&FontDescriptor> =
        pool.fonts.iter().filter(|f| f.covers_text(text)).collect();
    if candidates.is_empty() {
        return Err(ResourceError::NoCoveringFont(text.to_string()));
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

// ---------------------------------------------------------------------------
// Textures

#[derive(Debug)]
pub struct TextureRef {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pixels: OnceLock<Arc<RgbaImage>>,
}

impl PartialEq for TextureRef {
    fn eq(&self, other: &Self) -> bool {
        self.path == other.path && self.width == other.width && self.height == other.height
    }
}

impl TextureRef {
    /// Reference a texture file; only the header is read here.
    pub fn open(path: &Path) -> Result<Self, ResourceError> {
        let (width, height) = image::image_dimensions(path).map_err(|source| ResourceError::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self { path: path.to_path_buf(), width, height, pixels: OnceLock::new() })
    }

    /// In-memory texture; `name` only serves as its path for reporting.
    pub fn from_image(name: impl Into<PathBuf>, img: RgbaImage) -> Self {
        let (width, height) = img.dimensions();
        let cell = OnceLock::new();
        let _ = cell.set(Arc::new(img));
        Self { path: name.into(), width, height, pixels: cell }
    }

    /// Decoded pixels, loaded on first call.
    pub fn pixels(&self) -> Result<Arc<RgbaImage>, ResourceError> {
        if let Some(p) = self.pixels.get() {
            return Ok(p.clone());
        }
        let img = image::open(&self.path)
            .map_err(|source| ResourceError::Image { path: self.path.clone(), source })?
            .to_rgba8();
        Ok(self.pixels.get_or_init(|| Arc::new(img)).clone())
    }
}

#[derive(Debug, PartialEq)]
pub struct TexturePool {
    textures: Vec<TextureRef>,
}

impl TexturePool {
    pub fn new(textures: Vec<TextureRef>) -> Option<Self> {
        (!textures.is_empty()).then_some(Self { textures })
    }

    /// Recursively collect PNG and JPEG files under `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ResourceError> {
        let paths = scan(dir, &["png", "jpg", "jpeg"])?;
        let textures = paths.iter().map(|p| TextureRef::open(p)).collect::<Result<Vec<_>, _>>()?;
        Self::new(textures).ok_or_else(|| ResourceError::NoTextures(dir.to_path_buf()))
    }

    pub fn textures(&self) -> &[TextureRef] {
        &self.textures
    }

    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &TextureRef {
        &self.textures[rng.random_range(0..self.textures.len())]
    }
}

fn scan(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, ResourceError> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(|e| ResourceError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let ext = entry
            .path()
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if exts.contains(&ext.as_str()) {
            out.push(entry.into_path());
        }
    }
    out.sort();
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePaths {
    pub lexicon: PathBuf,
    pub fonts: PathBuf,
    pub textures: PathBuf,
    pub colormap: PathBuf,
    #[serde(default = "default_case_augment")]
    pub case_augment: bool,
}

fn default_case_augment() -> bool {
    true
}

impl ResourcePaths {
    /// Resolve relative paths against `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        let join = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Self {
            lexicon: join(&self.lexicon),
            fonts: join(&self.fonts),
            textures: join(&self.textures),
            colormap: join(&self.colormap),
            case_augment: self.case_augment,
        }
    }
}

#[derive(Debug, PartialEq)]
pub struct ResourceSet {
    pub lexicon: Lexicon,
    pub fonts: FontPool,
    pub textures: TexturePool,
    pub colormap: ColorMap,
}

impl ResourceSet {
    pub fn load(paths: &ResourcePaths) -> Result<Self, ResourceError> {
        Ok(Self {
            lexicon: load_lexicon(&paths.lexicon, paths.case_augment)?,
            fonts: FontPool::load_dir(&paths.fonts)?,
            textures: TexturePool::load_dir(&paths.textures)?,
            colormap: load_color_map(&paths.colormap)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn strings(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn case_augment_produces_three_variants() {
        assert_eq!(case_augment(&strings(&["hello"])), strings(&["Hello", "HELLO", "hello"]));
        assert_eq!(case_augment(&strings(&["42!"])), strings(&["42!"]));
    }

    #[test]
    fn lexicon_file_without_augment_is_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.txt");
        fs::write(&p, "hello\r\n\nworld\n").unwrap();
        let lex = load_lexicon(&p, false).unwrap();
        assert_eq!(lex.words(), &strings(&["hello", "world"])[..]);
        let lex = load_lexicon(&p, true).unwrap();
        assert_eq!(lex.len(), 6);
    }

    #[test]
    fn lexicon_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.txt");
        fs::write(&p, "\n\n").unwrap();
        assert!(matches!(load_lexicon(&p, true), Err(ResourceError::EmptyLexicon(_))));
        assert!(matches!(
            load_lexicon(&dir.path().join("missing.txt"), false),
            Err(ResourceError::Io { .. })
        ));
        fs::write(&p, "a\tb\n").unwrap();
        assert!(matches!(load_lexicon(&p, false), Err(ResourceError::InvalidWord { line: 1, .. })));
    }

    #[test]
    fn vocabulary_index() {
        let lex = Lexicon::new(strings(&["ab", "bc", "b"])).unwrap();
        assert_eq!(lex.vocabulary(), &['a', 'b', 'c']);
        assert_eq!(lex.words_containing(1), &[0, 1, 2]);
        assert_eq!(lex.words_containing(2), &[1]);
    }

    #[test]
    fn color_map_lines() {
        let m = ColorMap::parse("2 100.0 10.0 200.0 5.0\n3 0 0 128 1 255 2\n").unwrap();
        assert_eq!(
            m.entries[0].clusters,
            vec![Cluster { mean: 100.0, std: 10.0 }, Cluster { mean: 200.0, std: 5.0 }]
        );
        assert_eq!(m.entries[1].clusters.len(), 3);
        for bad in ["1 50 5", "4 1 1 1 1 1 1 1 1", "2 300 1 0 0", "2 10 -1 0 0", "2 10 1 0", "x"] {
            assert!(
                matches!(ColorMap::parse(bad), Err(ResourceError::MalformedColorMap { line: 1, .. })),
                "{bad}"
            );
        }
    }

    fn dejavu() -> FontDescriptor {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/fonts/DejaVuSans.ttf");
        FontDescriptor::load(&path).unwrap()
    }

    #[test]
    fn pick_font_filters_by_coverage() {
        let full = dejavu();
        let latin = full.clone().with_coverage('a'..='z');
        // DejaVu has no CJK glyphs, so the coverage set is stated explicitly.
        let cjk = FontDescriptor {
            family: "cjk".into(),
            coverage: Arc::new(['漢'].into_iter().collect()),
            ..full.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        let single = FontPool::new(vec![latin.clone()]).unwrap();
        assert_eq!(pick_font(&single, "abc", &mut rng).unwrap().family, latin.family);

        let both = FontPool::new(vec![latin.clone(), cjk.clone()]).unwrap();
        assert_eq!(pick_font(&both, "漢", &mut rng).unwrap().family, "cjk");
        assert!(matches!(pick_font(&single, "漢", &mut rng), Err(ResourceError::NoCoveringFont(_))));
    }

    #[test]
    fn loading_twice_is_structurally_identical() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets");
        let paths = ResourcePaths {
            lexicon: "lexicon.txt".into(),
            fonts: "fonts".into(),
            textures: "textures".into(),
            colormap: "colormap.txt".into(),
            case_augment: true,
        }
        .resolved(&root);
        let a = ResourceSet::load(&paths).unwrap();
        let b = ResourceSet::load(&paths).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fonts.fonts().len(), 3);
        assert_eq!(a.textures.textures().len(), 5);
    }

    proptest! {
        #[test]
        fn case_augment_size_bounds(words in prop::collection::vec("[a-zA-Z0-9!]{1,6}", 1..20)) {
            let distinct: HashSet<&String> = words.iter().collect();
            let out = case_augment(&words);
            let uniq: HashSet<&String> = out.iter().collect();
            prop_assert_eq!(uniq.len(), out.len());
            prop_assert!(out.len() >= distinct.len());
            prop_assert!(out.len() <= 3 * distinct.len());
        }

        #[test]
        fn picked_font_covers_text(
            masks in prop::collection::vec(prop::collection::vec(any::<bool>(), 8), 1..5),
            text in "[a-h]{1,4}",
            seed in any::<u64>(),
        ) {
            let base = dejavu();
            let letters: Vec<char> = ('a'..='h').collect();
            let fonts = masks
                .iter()
                .map(|m| base.clone().with_coverage(letters.iter().zip(m).filter(|(_, &on)| on).map(|(&c, _)| c)))
                .collect();
            let pool = FontPool::new(fonts).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match pick_font(&pool, &text, &mut rng) {
                Ok(f) => prop_assert!(text.chars().all(|c| f.covers(c))),
                Err(_) => prop_assert!(pool.fonts().iter().all(|f| !f.covers_text(&text))),
            }
        }
    }
}
