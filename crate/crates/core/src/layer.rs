//! RGBA raster layers positioned in a shared integer coordinate frame.
//!
//! Every pipeline stage consumes and produces [`Layer`]s. Colors are stored
//! with straight (non-premultiplied) alpha; the alpha channel alone decides
//! coverage.

use image::{Rgba, RgbaImage};

/// Axis-aligned rectangle in frame coordinates. `w`/`h` may be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> i32 {
        self.x + self.w as i32
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h as i32
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    /// Smallest rectangle containing both; empty rectangles are ignored.
    pub fn union(&self, other: &Rect) -> Rect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        let r = self.right().max(other.right());
        let b = self.bottom().max(other.bottom());
        Rect::new(x, y, (r - x) as u32, (b - y) as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub image: RgbaImage,
    pub offset_x: i32,
    pub offset_y: i32,
}

impl Layer {
    /// Fully transparent layer. Zero dimensions are bumped to 1.
    pub fn new(width: u32, height: u32) -> Self {
        Self::from_image(RgbaImage::new(width.max(1), height.max(1)))
    }

    pub fn filled(width: u32, height: u32, color: Rgba<u8>) -> Self {
        Self::from_image(RgbaImage::from_pixel(width.max(1), height.max(1), color))
    }

    pub fn from_image(image: RgbaImage) -> Self {
        Self { image, offset_x: 0, offset_y: 0 }
    }

    pub fn with_offset(mut self, x: i32, y: i32) -> Self {
        self.offset_x = x;
        self.offset_y = y;
        self
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    /// Extent of the raster in frame coordinates.
    pub fn rect(&self) -> Rect {
        Rect::new(self.offset_x, self.offset_y, self.width(), self.height())
    }

    /// Bounding box of non-zero alpha in frame coordinates, if any.
    pub fn alpha_bbox(&self) -> Option<Rect> {
        let (w, h) = self.image.dimensions();
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        for (x, y, p) in self.image.enumerate_pixels() {
            if p[3] > 0 {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
        if x0 == u32::MAX {
            return None;
        }
        debug_assert!(x1 <= w && y1 <= h);
        Some(Rect::new(
            self.offset_x + x0 as i32,
            self.offset_y + y0 as i32,
            x1 - x0,
            y1 - y0,
        ))
    }

    /// Crop to the alpha bounding box. A layer without coverage collapses to a
    /// single transparent pixel at its current offset.
    pub fn trimmed(&self) -> Layer {
        match self.alpha_bbox() {
            Some(r) => self.crop(r),
            None => Layer::new(1, 1).with_offset(self.offset_x, self.offset_y),
        }
    }

    /// Copy out `rect` (frame coordinates); regions outside the raster are transparent.
    pub fn crop(&self, rect: Rect) -> Layer {
        let mut out = Layer::new(rect.w, rect.h).with_offset(rect.x, rect.y);
        let dx = rect.x - self.offset_x;
        let dy = rect.y - self.offset_y;
        for (x, y, p) in out.image.enumerate_pixels_mut() {
            let sx = x as i32 + dx;
            let sy = y as i32 + dy;
            if sx >= 0 && sy >= 0 && (sx as u32) < self.width() && (sy as u32) < self.height() {
                *p = *self.image.get_pixel(sx as u32, sy as u32);
            }
        }
        out
    }

    /// Grow the canvas so it also covers `rect`; existing pixels keep their frame position.
    pub fn expanded_to(&self, rect: Rect) -> Layer {
        self.crop(self.rect().union(&rect))
    }

    /// Number of pixels with non-zero alpha.
    pub fn coverage(&self) -> usize {
        self.image.pixels().filter(|p| p[3] > 0).count()
    }

    /// Sum of alpha values.
    pub fn alpha_mass(&self) -> u64 {
        self.image.pixels().map(|p| p[3] as u64).sum()
    }

    /// Alpha-composite `src` over this layer, clipped to this layer's extent.
    pub fn draw_over(&mut self, src: &Layer) {
        let dx = src.offset_x - self.offset_x;
        let dy = src.offset_y - self.offset_y;
        for (x, y, s) in src.image.enumerate_pixels() {
            if s[3] == 0 {
                continue;
            }
            let tx = x as i32 + dx;
            let ty = y as i32 + dy;
            if tx < 0 || ty < 0 || tx as u32 >= self.width() || ty as u32 >= self.height() {
                continue;
            }
            let d = self.image.get_pixel_mut(tx as u32, ty as u32);
            *d = over(*s, *d);
        }
    }

    /// Replace the RGB of every pixel with `rgb`, keeping alpha.
    pub fn set_rgb(&mut self, rgb: [u8; 3]) {
        for p in self.image.pixels_mut() {
            p[0] = rgb[0];
            p[1] = rgb[1];
            p[2] = rgb[2];
        }
    }

    /// Alpha plane as a row-major vector.
    pub fn alpha(&self) -> Vec<u8> {
        self.image.pixels().map(|p| p[3]).collect()
    }
}

/// Composite a union of layers: the result covers every input extent and
/// draws them in order.
pub fn flatten(layers: &[Layer]) -> Layer {
    let rect = layers
        .iter()
        .fold(Rect::new(0, 0, 0, 0), |acc, l| acc.union(&l.rect()));
    let mut out = Layer::new(rect.w, rect.h).with_offset(rect.x, rect.y);
    for l in layers {
        out.draw_over(l);
    }
    out
}

/// Straight-alpha "over" operator.
pub fn over(src: Rgba<u8>, dst: Rgba<u8>) -> Rgba<u8> {
    if src[3] == 255 || dst[3] == 0 {
        return src;
    }
    let sa = src[3] as f32 / 255.0;
    let da = dst[3] as f32 / 255.0;
    let oa = sa + da * (1.0 - sa);
    let mut out = [0u8; 4];
    for c in 0..3 {
        let v = (src[c] as f32 * sa + dst[c] as f32 * da * (1.0 - sa)) / oa;
        out[c] = v.round().clamp(0.0, 255.0) as u8;
    }
    out[3] = (oa * 255.0).round() as u8;
    Rgba(out)
}

/// Offsets of a discrete disk of the given radius.
pub(crate) fn disk(radius: u32) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let mut pts = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                pts.push((dx, dy));
            }
        }
    }
    pts
}

/// Grayscale morphological dilation of an alpha plane with a disk. The output
/// plane is `2 * radius` larger in each dimension.
pub(crate) fn dilate_alpha(alpha: &[u8], w: u32, h: u32, radius: u32) -> (Vec<u8>, u32, u32) {
    let (ow, oh) = (w + 2 * radius, h + 2 * radius);
    let mut out = vec![0u8; (ow * oh) as usize];
    let se = disk(radius);
    let r = radius as i32;
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let a = alpha[(y as u32 * w + x as u32) as usize];
            if a == 0 {
                continue;
            }
            for &(dx, dy) in &se {
                let idx = ((y + r + dy) as u32 * ow + (x + r + dx) as u32) as usize;
                if out[idx] < a {
                    out[idx] = a;
                }
            }
        }
    }
    (out, ow, oh)
}

/// Grayscale erosion with a disk; pixels outside the plane count as zero.
pub(crate) fn erode_alpha(alpha: &[u8], w: u32, h: u32, radius: u32) -> Vec<u8> {
    let se = disk(radius);
    let mut out = vec![0u8; alpha.len()];
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let mut m = u8::MAX;
            for &(dx, dy) in &se {
                let (sx, sy) = (x + dx, y + dy);
                let v = if sx < 0 || sy < 0 || sx >= w as i32 || sy >= h as i32 {
                    0
                } else {
                    alpha[(sy as u32 * w + sx as u32) as usize]
                };
                m = m.min(v);
                if m == 0 {
                    break;
                }
            }
            out[(y as u32 * w + x as u32) as usize] = m;
        }
    }
    out
}
