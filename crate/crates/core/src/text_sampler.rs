//! Target text selection with length and character distribution control.
//!
//! Plain sampling draws lexicon words uniformly, which inherits the lexicon's
//! long tail: few long words, few words with rare characters. Two optional
//! augmentations flatten it:
//!
//! * length augmentation draws a target length uniformly in `1..=max_length`
//!   and builds a string of exactly that length by concatenating random words
//!   and cutting the overflow on the right;
//! * character augmentation draws a vocabulary character uniformly and then a
//!   word containing it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::resources::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Probability of a length-augmented sample.
    pub p_length: f64,
    /// Probability of a character-augmented sample, checked only when length
    /// augmentation did not fire.
    pub p_char: f64,
    pub max_length: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { p_length: 0.5, p_char: 0.0, max_length: 25 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("p_length", self.p_length), ("p_char", self.p_char)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("sampler.{name} = {p} is outside [0, 1]"));
            }
        }
        if self.max_length == 0 {
            return Err("sampler.max_length must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Plain,
    LengthAugmented,
    CharAugmented,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextSample {
    pub text: String,
    pub origin: Origin,
    /// The vocabulary character a character-augmented sample was drawn for.
    pub pivot: Option<char>,
}

/// Bernoulli draw that consumes no randomness for the degenerate probabilities.
fn coin<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    if p <= 0.0 {
        false
    } else if p >= 1.0 {
        true
    } else {
        rng.random_bool(p)
    }
}

fn any_word<'a, R: Rng + ?Sized>(lexicon: &'a Lexicon, rng: &mut R) -> &'a str {
    assert!(!lexicon.is_empty(), "cannot sample from an empty lexicon");
    &lexicon.words()[rng.random_range(0..lexicon.len())]
}

pub fn sample_plain<R: Rng + ?Sized>(lexicon: &Lexicon, rng: &mut R) -> TextSample {
    TextSample {
        text: any_word(lexicon, rng).to_string(),
        origin: Origin::Plain,
        pivot: None,
    }
}

/// Concatenate `words` left to right until at least `target` characters are
/// collected, then cut the rightmost overflow.
pub fn fit_to_length<'a, I>(words: I, target: usize) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = String::new();
    let mut len = 0;
    for w in words {
        for c in w.chars() {
            if len == target {
                return out;
            }
            out.push(c);
            len += 1;
        }
        if len >= target {
            break;
        }
    }
    out
}

pub fn sample_length_augmented<R: Rng + ?Sized>(
    lexicon: &Lexicon,
    max_length: usize,
    rng: &mut R,
) -> TextSample {
    let target = rng.random_range(1..=max_length.max(1));
    let words = std::iter::repeat_with(|| any_word(lexicon, rng));
    TextSample {
        text: fit_to_length(words, target),
        origin: Origin::LengthAugmented,
        pivot: None,
    }
}

pub fn sample_char_augmented<R: Rng + ?Sized>(lexicon: &Lexicon, rng: &mut R) -> TextSample {
    assert!(!lexicon.is_empty(), "cannot sample from an empty lexicon");
    let k = rng.random_range(0..lexicon.vocabulary().len());
    let holders = lexicon.words_containing(k);
    let w = holders[rng.random_range(0..holders.len())] as usize;
    TextSample {
        text: lexicon.words()[w].clone(),
        origin: Origin::CharAugmented,
        pivot: Some(lexicon.vocabulary()[k]),
    }
}

pub fn sample<R: Rng + ?Sized>(lexicon: &Lexicon, cfg: &SamplerConfig, rng: &mut R) -> TextSample {
    if coin(rng, cfg.p_length) {
        sample_length_augmented(lexicon, cfg.max_length, rng)
    } else if coin(rng, cfg.p_char) {
        sample_char_augmented(lexicon, rng)
    } else {
        sample_plain(lexicon, rng)
    }
}
