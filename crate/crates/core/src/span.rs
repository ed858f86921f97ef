use rand::distr::uniform::SampleUniform;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]`, written as a two-element array in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Clone + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Span<T> {
    pub lo: T,
    pub hi: T,
}

impl<T> Span<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }
}

impl<T> From<[T; 2]> for Span<T> {
    fn from([lo, hi]: [T; 2]) -> Self {
        Self { lo, hi }
    }
}

impl<T> From<Span<T>> for [T; 2] {
    fn from(s: Span<T>) -> Self {
        [s.lo, s.hi]
    }
}

impl<T: PartialOrd + Copy + SampleUniform + std::fmt::Debug> Span<T> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        rng.random_range(self.lo..=self.hi)
    }

    pub fn check(&self, name: &str) -> Result<(), String> {
        if self.lo <= self.hi {
            Ok(())
        } else {
            Err(format!("{name}: range {:?} has lo > hi", [self.lo, self.hi]))
        }
    }

    pub fn check_within(&self, name: &str, min: T, max: T) -> Result<(), String> {
        self.check(name)?;
        if self.lo < min || self.hi > max {
            return Err(format!("{name}: range {:?} must lie within {:?}", [self.lo, self.hi], [min, max]));
        }
        Ok(())
    }
}
