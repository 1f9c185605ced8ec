use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ImageBuffer, CHANNELS};
use crate::rng::RngState;

pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorJitterConfig {
    pub brightness_delta: f64,
    pub contrast_range: (f64, f64),
    pub saturation_range: (f64, f64),
    /// Degrees.
    pub hue_delta: f64,
}

impl Default for ColorJitterConfig {
    fn default() -> Self {
        Self {
            brightness_delta: 32.0 / 255.0,
            contrast_range: (0.5, 1.5),
            saturation_range: (0.5, 1.5),
            hue_delta: 18.0,
        }
    }
}

impl ColorJitterConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi && hi.is_finite();
        if !(self.brightness_delta >= 0.0 && self.hue_delta >= 0.0) {
            return Err(Error::domain("jitter deltas must be non-negative"));
        }
        if !range_ok(self.contrast_range) || !range_ok(self.saturation_range) {
            return Err(Error::domain(format!(
                "jitter ranges must satisfy 0 < lo <= hi: contrast {:?}, saturation {:?}",
                self.contrast_range, self.saturation_range
            )));
        }
        Ok(())
    }
}

/// Concrete jitter parameters for one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue_degrees: f64,
}

impl JitterParams {
    pub const IDENTITY: JitterParams = JitterParams {
        brightness: 0.0,
        contrast: 1.0,
        saturation: 1.0,
        hue_degrees: 0.0,
    };

    pub fn sample(c: &ColorJitterConfig, rng: &mut RngState) -> Self {
        Self {
            brightness: rng.uniform(-c.brightness_delta, c.brightness_delta),
            contrast: rng.uniform(c.contrast_range.0, c.contrast_range.1),
            saturation: rng.uniform(c.saturation_range.0, c.saturation_range.1),
            hue_degrees: rng.uniform(-c.hue_delta, c.hue_delta),
        }
    }
}

fn luma(px: &[f64]) -> f64 {
    LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2]
}

pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Applies brightness, contrast, saturation, then hue, and clamps once at the
/// end.
pub fn apply_jitter(img: &ImageBuffer, p: &JitterParams) -> ImageBuffer {
    let mut data = img.data().to_vec();
    if p.brightness != 0.0 {
        for v in &mut data {
            *v += p.brightness;
        }
    }
    if p.contrast != 1.0 {
        let n = (img.height() * img.width()) as f64;
        let mean = data.chunks_exact(CHANNELS).map(luma).sum::<f64>() / n;
        for v in &mut data {
            *v = mean + p.contrast * (*v - mean);
        }
    }
    if p.saturation != 1.0 {
        for px in data.chunks_exact_mut(CHANNELS) {
            let y = luma(px);
            for v in px.iter_mut() {
                *v = y + p.saturation * (*v - y);
            }
        }
    }
    if p.hue_degrees != 0.0 {
        for px in data.chunks_exact_mut(CHANNELS) {
            let [h, s, v] = rgb_to_hsv([px[0], px[1], px[2]]);
            let out = hsv_to_rgb([h + p.hue_degrees, s, v]);
            px.copy_from_slice(&out);
        }
    }
    ImageBuffer::from_clamped(img.height(), img.width(), data)
}

pub fn color_jitter(img: &ImageBuffer, c: &ColorJitterConfig, rng: &mut RngState) -> Result<ImageBuffer> {
    c.validate()?;
    Ok(apply_jitter(img, &JitterParams::sample(c, rng)))
}
