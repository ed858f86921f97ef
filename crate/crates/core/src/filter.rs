//! Separable Gaussian filtering of `f32` planes.

/// Normalized 1-D Gaussian taps covering +-3 sigma.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f32> = (0..=2 * radius)
        .map(|i| {
            let d = i as f32 - radius as f32;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Index into `0..n` mirrored about the borders (`-1 -> 0`, `n -> n - 1`),
/// valid for any distance outside.
pub fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Blur a row-major `w`x`h` plane in place, mirroring at the borders.
pub fn gaussian_blur_plane(plane: &mut [f32], w: usize, h: usize, sigma: f32) {
    if sigma <= 0.0 || w == 0 || h == 0 {
        return;
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0f32; plane.len()];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let sx = mirror(x as isize + i as isize - r, w);
                acc += row[sx] * kv;
            }
            tmp[y * w + x] = acc;
        }
    }
    for x in 0..w {
        for y in 0..h {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let sy = mirror(y as isize + i as isize - r, h);
                acc += tmp[sy * w + x] * kv;
            }
            plane[y * w + x] = acc;
        }
    }
}
