//! Separable resampling with several interpolation kernels.
//!
//! Output pixel `d` samples the source at `(d + 0.5) * scale - 0.5` (pixel
//! centers aligned). When downscaling, kernels are stretched by the scale
//! factor so that they average instead of alias.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{clip_bbox, BBox};
use crate::raster::{ImageBuffer, CHANNELS};
use crate::rng::RngState;
use crate::sample::{ObjectLabel, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Nearest,
    Bilinear,
    Bicubic,
    Area,
    Lanczos,
}

impl Interpolation {
    pub const ALL: [Interpolation; 5] = [
        Interpolation::Nearest,
        Interpolation::Bilinear,
        Interpolation::Bicubic,
        Interpolation::Area,
        Interpolation::Lanczos,
    ];
}

/// A fixed kernel or one picked uniformly per call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpChoice {
    Fixed(Interpolation),
    Random,
}

impl InterpChoice {
    pub fn resolve(self, rng: &mut RngState) -> Interpolation {
        match self {
            InterpChoice::Fixed(k) => k,
            InterpChoice::Random => Interpolation::ALL[rng.below(Interpolation::ALL.len())],
        }
    }
}

/// Contribution weights of source indices to one output index.
struct Taps {
    start: usize,
    weights: Vec<f64>,
}

fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn lanczos3(x: f64) -> f64 {
    if x.abs() < 3.0 {
        sinc(x) * sinc(x / 3.0)
    } else {
        0.0
    }
}

fn axis_taps(src_len: usize, dst_len: usize, kernel: Interpolation) -> Vec<Taps> {
    let scale = src_len as f64 / dst_len as f64;
    let last = src_len as isize - 1;
    (0..dst_len)
        .map(|d| match kernel {
            Interpolation::Nearest => {
                let s = (((d as f64 + 0.5) * scale).floor() as usize).min(src_len - 1);
                Taps {
                    start: s,
                    weights: vec![1.0],
                }
            }
            Interpolation::Area => {
                // exact overlap of [d*scale, (d+1)*scale) with each source pixel
                let lo = d as f64 * scale;
                let hi = (d as f64 + 1.0) * scale;
                let first = lo.floor() as usize;
                let end = (hi.ceil() as usize).min(src_len);
                let weights: Vec<f64> = (first..end)
                    .map(|i| (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0))
                    .collect();
                normalize(first, weights)
            }
            Interpolation::Bilinear | Interpolation::Bicubic | Interpolation::Lanczos => {
                let (support, f): (f64, fn(f64) -> f64) = match kernel {
                    Interpolation::Bilinear => (1.0, |x: f64| (1.0 - x.abs()).max(0.0)),
                    Interpolation::Bicubic => (2.0, cubic),
                    _ => (3.0, lanczos3),
                };
                let stretch = scale.max(1.0);
                let center = (d as f64 + 0.5) * scale - 0.5;
                let radius = support * stretch;
                let first = (center - radius).floor() as isize;
                let end = (center + radius).ceil() as isize;
                // accumulate weights onto clamped (edge-replicated) indices
                let lo = first.clamp(0, last) as usize;
                let hi = end.clamp(0, last) as usize;
                let mut weights = vec![0.0; hi - lo + 1];
                for i in first..=end {
                    let w = f((i as f64 - center) / stretch);
                    if w != 0.0 {
                        weights[i.clamp(0, last) as usize - lo] += w;
                    }
                }
                normalize(lo, weights)
            }
        })
        .collect()
}

fn normalize(start: usize, mut weights: Vec<f64>) -> Taps {
    let total: f64 = weights.iter().sum();
    if total != 0.0 && total != 1.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    Taps { start, weights }
}

/// Resamples an interleaved `h x w x channels` plane to `th x tw`.
pub(crate) fn resample_plane(
    data: &[f64],
    h: usize,
    w: usize,
    channels: usize,
    th: usize,
    tw: usize,
    kernel: Interpolation,
) -> Vec<f64> {
    let xtaps = axis_taps(w, tw, kernel);
    let ytaps = axis_taps(h, th, kernel);
    // horizontal pass
    let mut tmp = vec![0.0; h * tw * channels];
    for y in 0..h {
        let row = &data[y * w * channels..(y + 1) * w * channels];
        for (x, t) in xtaps.iter().enumerate() {
            let out = &mut tmp[(y * tw + x) * channels..][..channels];
            for (k, &wt) in t.weights.iter().enumerate() {
                if wt == 0.0 {
                    continue;
                }
                let src = &row[(t.start + k) * channels..][..channels];
                for c in 0..channels {
                    out[c] += wt * src[c];
                }
            }
        }
    }
    // vertical pass
    let mut out = vec![0.0; th * tw * channels];
    for (y, t) in ytaps.iter().enumerate() {
        let dst = &mut out[y * tw * channels..(y + 1) * tw * channels];
        for (k, &wt) in t.weights.iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            let src = &tmp[(t.start + k) * tw * channels..][..tw * channels];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wt * s;
            }
        }
    }
    out
}

pub fn resize_image(
    img: &ImageBuffer,
    target_h: usize,
    target_w: usize,
    kernel: Interpolation,
) -> Result<ImageBuffer> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::domain(format!(
            "resize target must be at least 1x1, got {target_h}x{target_w}"
        )));
    }
    let data = resample_plane(
        img.data(),
        img.height(),
        img.width(),
        CHANNELS,
        target_h,
        target_w,
        kernel,
    );
    Ok(ImageBuffer::from_clamped(target_h, target_w, data))
}

/// Resizes the sample to `target_h x target_w`, scaling each box per axis.
pub fn resize_sample(
    s: &Sample,
    target_h: usize,
    target_w: usize,
    kernel: Interpolation,
) -> Result<Sample> {
    let image = resize_image(&s.image, target_h, target_w, kernel)?;
    let sx = target_w as f64 / s.width() as f64;
    let sy = target_h as f64 / s.height() as f64;
    let labels = s
        .labels
        .iter()
        .filter_map(|l| {
            let b = l.bbox;
            let scaled = BBox::new(b.xmin() * sx, b.ymin() * sy, b.xmax() * sx, b.ymax() * sy).ok()?;
            clip_bbox(&scaled, target_w as f64, target_h as f64).map(|c| l.with_bbox(c))
        })
        .collect::<Vec<ObjectLabel>>();
    Ok(Sample { image, labels })
}

pub fn random_resize(
    s: &Sample,
    target_h: usize,
    target_w: usize,
    interp: InterpChoice,
    rng: &mut RngState,
) -> Result<Sample> {
    let kernel = interp.resolve(rng);
    resize_sample(s, target_h, target_w, kernel)
}

/// Output size that brings the short side to `short` without letting the
/// long side exceed `long_cap`.
pub fn short_side_size(h: usize, w: usize, short: usize, long_cap: usize) -> (usize, usize) {
    let (lo, hi) = (h.min(w) as f64, h.max(w) as f64);
    let mut scale = short as f64 / lo;
    if hi * scale > long_cap as f64 {
        scale = long_cap as f64 / hi;
    }
    let th = ((h as f64 * scale).round() as usize).max(1);
    let tw = ((w as f64 * scale).round() as usize).max(1);
    (th, tw)
}
