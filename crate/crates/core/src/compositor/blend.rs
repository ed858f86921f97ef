//! Separable blend modes on 8-bit channels.
//!
//! `b` is the base (lower) channel, `t` the top channel, both in `0..=255`.
//! Every formula is evaluated in floating point on the 0..255 scale, clamped
//! and rounded half up:
//!
//! | mode           | result                                                         |
//! |----------------|----------------------------------------------------------------|
//! | `normal`       | `t`                                                            |
//! | `multiply`     | `b*t/255`                                                      |
//! | `screen`       | `255 - (255-b)*(255-t)/255`                                    |
//! | `overlay`      | `b <= 127 ? 2*b*t/255 : 255 - 2*(255-b)*(255-t)/255`           |
//! | `hard_light`   | `t <= 127 ? 2*b*t/255 : 255 - 2*(255-b)*(255-t)/255`           |
//! | `soft_light`   | `255 * ((1-B)*B*T + B*(1-(1-B)*(1-T)))`, `B=b/255`, `T=t/255`  |
//! | `dodge`        | `b == 0 ? 0 : t == 255 ? 255 : min(255, b*255/(255-t))`        |
//! | `divide`       | `t == 0 ? 255 : min(255, b*255/t)`                             |
//! | `addition`     | `min(255, b+t)`                                                |
//! | `difference`   | `abs(b-t)`                                                     |
//! | `darken_only`  | `min(b, t)`                                                    |
//! | `lighten_only` | `max(b, t)`                                                    |

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    Normal,
    Multiply,
    Screen,
    Overlay,
    HardLight,
    SoftLight,
    Dodge,
    Divide,
    Addition,
    Difference,
    DarkenOnly,
    LightenOnly,
}

impl BlendMode {
    pub const ALL: [BlendMode; 12] = [
        BlendMode::Normal,
        BlendMode::Multiply,
        BlendMode::Screen,
        BlendMode::Overlay,
        BlendMode::HardLight,
        BlendMode::SoftLight,
        BlendMode::Dodge,
        BlendMode::Divide,
        BlendMode::Addition,
        BlendMode::Difference,
        BlendMode::DarkenOnly,
        BlendMode::LightenOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlendMode::Normal => "normal",
            BlendMode::Multiply => "multiply",
            BlendMode::Screen => "screen",
            BlendMode::Overlay => "overlay",
            BlendMode::HardLight => "hard_light",
            BlendMode::SoftLight => "soft_light",
            BlendMode::Dodge => "dodge",
            BlendMode::Divide => "divide",
            BlendMode::Addition => "addition",
            BlendMode::Difference => "difference",
            BlendMode::DarkenOnly => "darken_only",
            BlendMode::LightenOnly => "lighten_only",
        }
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5).floor() as u8
}

fn hard_mix(b: f64, t: f64, low: bool) -> f64 {
    if low {
        2.0 * b * t / 255.0
    } else {
        255.0 - 2.0 * (255.0 - b) * (255.0 - t) / 255.0
    }
}

pub fn blend_channel(base: u8, top: u8, mode: BlendMode) -> u8 {
    let (b, t) = (base as f64, top as f64);
    match mode {
        BlendMode::Normal => top,
        BlendMode::Multiply => to_u8(b * t / 255.0),
        BlendMode::Screen => to_u8(255.0 - (255.0 - b) * (255.0 - t) / 255.0),
        BlendMode::Overlay => to_u8(hard_mix(b, t, base <= 127)),
        BlendMode::HardLight => to_u8(hard_mix(b, t, top <= 127)),
        BlendMode::SoftLight => {
            let (bn, tn) = (b / 255.0, t / 255.0);
            to_u8(255.0 * ((1.0 - bn) * bn * tn + bn * (1.0 - (1.0 - bn) * (1.0 - tn))))
        }
        BlendMode::Dodge => match (base, top) {
            (0, _) => 0,
            (_, 255) => 255,
            _ => to_u8(b * 255.0 / (255.0 - t)),
        },
        BlendMode::Divide => match top {
            0 => 255,
            _ => to_u8(b * 255.0 / t),
        },
        BlendMode::Addition => base.saturating_add(top),
        BlendMode::Difference => base.abs_diff(top),
        BlendMode::DarkenOnly => base.min(top),
        BlendMode::LightenOnly => base.max(top),
    }
}

pub fn blend_pixel(base: [u8; 3], top: [u8; 3], mode: BlendMode) -> [u8; 3] {
    [
        blend_channel(base[0], top[0], mode),
        blend_channel(base[1], top[1], mode),
        blend_channel(base[2], top[2], mode),
    ]
}

/// Blend `top` with coverage `alpha` onto an opaque base pixel: the blended
/// color is mixed with the base in proportion to the top's alpha.
pub fn blend_over(base: [u8; 3], top: [u8; 3], alpha: u8, mode: BlendMode) -> [u8; 3] {
    if alpha == 0 {
        return base;
    }
    let mixed = blend_pixel(base, top, mode);
    if alpha == 255 {
        return mixed;
    }
    let a = alpha as f64 / 255.0;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = to_u8(base[c] as f64 * (1.0 - a) + mixed[c] as f64 * a);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(blend_channel(77, 255, BlendMode::Multiply), 77);
        assert_eq!(blend_channel(77, 0, BlendMode::Screen), 77);
        assert_eq!(blend_channel(77, 77, BlendMode::Difference), 0);
        assert_eq!(blend_channel(200, 100, BlendMode::Addition), 255);
        // 2 * 64 * 128 / 255 = 64.25
        assert_eq!(blend_channel(64, 128, BlendMode::Overlay), 64);
        assert_eq!(blend_channel(9, 0, BlendMode::Divide), 255);
        assert_eq!(blend_channel(0, 0, BlendMode::Divide), 255);
        // 1 * 255 / 2 = 127.5 rounds up
        assert_eq!(blend_channel(1, 253, BlendMode::Dodge), 128);
    }

    #[test]
    fn names_are_unique() {
        let names: std::collections::HashSet<_> = BlendMode::ALL.iter().map(|m| m.name()).collect();
        assert_eq!(names.len(), 12);
        for m in BlendMode::ALL {
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
    }

    #[test]
    fn partial_alpha_mixes_linearly() {
        assert_eq!(blend_over([100; 3], [200; 3], 0, BlendMode::Normal), [100; 3]);
        assert_eq!(blend_over([0; 3], [255; 3], 128, BlendMode::Normal), [128; 3]);
    }
}
