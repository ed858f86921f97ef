//! Flood-fill test for text that cannot be told apart from its surroundings.
//!
//! Text pixels are those whose foreground alpha is at least [`TEXT_ALPHA`];
//! boundary pixels are text pixels with a 4-neighbor that is not text. Fills
//! start from text pixels and spread to any 4-neighbor whose gray level is
//! within `tolerance` of the pixel it is reached from. A boundary pixel leaks
//! when its fill region also contains non-text pixels. The sample is
//! discarded when the leaking share of boundary pixels exceeds `threshold`.
//!
//! Because the spread criterion compares neighbors rather than each pixel to
//! the seed, fill regions do not depend on seed order, and the leak ratio can
//! only grow with the tolerance.

use std::collections::VecDeque;

use image::RgbaImage;
use serde::{Deserialize, Serialize};

/// Foreground alpha at or above which a pixel belongs to the text.
pub const TEXT_ALPHA: u8 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub boundary: usize,
    pub leaked: usize,
    /// `leaked / boundary`; 1 when there is no boundary. Kept when `ratio <= threshold`.
    pub ratio: f64,
    pub keep: bool,
}

/// Integer mean of R, G and B.
pub fn gray(p: &image::Rgba<u8>) -> u8 {
    ((p[0] as u16 + p[1] as u16 + p[2] as u16) / 3) as u8
}

/// Leak analysis on a gray plane and a text mask of the same `w`x`h` shape.
pub fn leak_stats(gray: &[u8], text: &[bool], w: usize, h: usize, tolerance: u8) -> (usize, usize) {
    assert_eq!(gray.len(), w * h);
    assert_eq!(text.len(), w * h);
    let neighbors = |i: usize| {
        let (x, y) = (i % w, i / w);
        [
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y > 0).then(|| i - w),
            (y + 1 < h).then(|| i + w),
        ]
        .into_iter()
        .flatten()
    };
    let is_boundary = |i: usize| text[i] && neighbors(i).any(|j| !text[j]);

    let mut visited = vec![false; w * h];
    let mut queue = VecDeque::new();
    let (mut boundary, mut leaked) = (0, 0);
    for seed in 0..w * h {
        if !text[seed] || visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        let (mut region_boundary, mut leaks) = (0, false);
        while let Some(p) = queue.pop_front() {
            if text[p] {
                if is_boundary(p) {
                    region_boundary += 1;
                }
            } else {
                leaks = true;
            }
            for q in neighbors(p) {
                if !visited[q] && gray[p].abs_diff(gray[q]) <= tolerance {
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
        boundary += region_boundary;
        if leaks {
            leaked += region_boundary;
        }
    }
    (boundary, leaked)
}

/// Decide whether the text in `image` (located by `fg_alpha`) is visible.
pub fn visibility_check(image: &RgbaImage, fg_alpha: &RgbaImage, tolerance: u8, threshold: f64) -> Visibility {
    assert_eq!(image.dimensions(), fg_alpha.dimensions(), "mask must match the image");
    let (w, h) = (image.width() as usize, image.height() as usize);
    let g: Vec<u8> = image.pixels().map(gray).collect();
    let text: Vec<bool> = fg_alpha.pixels().map(|p| p[3] >= TEXT_ALPHA).collect();
    let (boundary, leaked) = leak_stats(&g, &text, w, h, tolerance);
    // No boundary means no visible text: treat it as fully leaking.
    let ratio = if boundary == 0 { 1.0 } else { leaked as f64 / boundary as f64 };
    Visibility { boundary, leaked, ratio, keep: ratio <= threshold }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgba;

    fn scene(text_gray: u8, bg_gray: u8) -> (RgbaImage, RgbaImage) {
        let mut img = RgbaImage::from_pixel(20, 12, Rgba([bg_gray, bg_gray, bg_gray, 255]));
        let mut mask = RgbaImage::new(20, 12);
        for y in 3..9 {
            for x in 4..16 {
                img.put_pixel(x, y, Rgba([text_gray, text_gray, text_gray, 255]));
                mask.put_pixel(x, y, Rgba([255, 255, 255, 255]));
            }
        }
        (img, mask)
    }

    #[test]
    fn maximal_contrast_is_kept() {
        let (img, mask) = scene(0, 255);
        let v = visibility_check(&img, &mask, 10, 0.5);
        assert_eq!(v.ratio, 0.0);
        assert!(v.keep);
    }

    #[test]
    fn equal_colors_are_discarded() {
        let (img, mask) = scene(90, 90);
        for tol in [0, 10, 255] {
            let v = visibility_check(&img, &mask, tol, 0.5);
            assert_eq!(v.ratio, 1.0);
            assert!(!v.keep);
        }
    }

    #[test]
    fn half_broken_boundary() {
        // Two identical text blocks; only the right one matches the background.
        let mut img = RgbaImage::from_pixel(16, 16, Rgba([200, 200, 200, 255]));
        let mut mask = RgbaImage::new(16, 16);
        for y in 4..12 {
            for x in (2..6).chain(10..14) {
                let g = if x < 8 { 20 } else { 200 };
                img.put_pixel(x, y, Rgba([g, g, g, 255]));
                mask.put_pixel(x, y, Rgba([0, 0, 0, 255]));
            }
        }
        let v = visibility_check(&img, &mask, 10, 0.5);
        assert_eq!(v.ratio, 0.5);
        assert!(v.keep);
        assert!(!visibility_check(&img, &mask, 10, 0.49).keep);
    }

    #[test]
    fn no_text_is_discarded() {
        let img = RgbaImage::from_pixel(4, 4, Rgba([0, 0, 0, 255]));
        let v = visibility_check(&img, &RgbaImage::new(4, 4), 10, 0.99);
        assert!(!v.keep && v.ratio == 1.0);
        // A threshold of 1 disables rejection entirely.
        assert!(visibility_check(&img, &RgbaImage::new(4, 4), 10, 1.0).keep);
    }

    #[test]
    fn gray_is_integer_mean() {
        assert_eq!(gray(&Rgba([1, 2, 4, 0])), 2);
        assert_eq!(gray(&Rgba([255, 255, 255, 0])), 255);
    }
}
