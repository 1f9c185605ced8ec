//! Geometry-preserving image mixup for detection.
//!
//! Two images are blended on a canvas large enough to hold both, each anchored
//! at the top-left corner without any resizing, so every box keeps its
//! original coordinates. Labels of both images are concatenated and each
//! label's loss weight is scaled by its image's blending coefficient.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ImageBuffer, CHANNELS};
use crate::rng::RngState;
use crate::sample::{ObjectLabel, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::domain(format!(
                "beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Detection mixup wants both shape parameters at least 1, so that most
    /// draws are real blends rather than one image plus faint noise.
    pub fn suits_detection(&self) -> bool {
        self.alpha >= 1.0 && self.beta >= 1.0
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

impl Default for BetaParams {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            beta: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixupConfig {
    pub dist: BetaParams,
    /// Overrides sampling with a constant ratio (e.g. 0.5 for even mixing).
    pub fixed_ratio: Option<f64>,
    /// Labels whose mixed weight is at or below this value are dropped.
    /// Zero disables dropping.
    pub min_weight: f64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        Self {
            dist: BetaParams::default(),
            fixed_ratio: None,
            min_weight: 0.0,
        }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.fixed_ratio {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::domain(format!("fixed mixup ratio {r} outside [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.min_weight) {
            return Err(Error::domain(format!(
                "min_weight {} outside [0, 1)",
                self.min_weight
            )));
        }
        if self.fixed_ratio.is_none() && !self.dist.suits_detection() {
            log::warn!(
                "Beta({}, {}) has a shape parameter below 1; most mixed images will be near one source",
                self.dist.alpha,
                self.dist.beta
            );
        }
        Ok(())
    }

    fn keeps(&self, weight: f64) -> bool {
        self.min_weight == 0.0 || weight > self.min_weight
    }
}

/// Draws `X / (X + Y)` with `X ~ Gamma(alpha, 1)` and `Y ~ Gamma(beta, 1)`.
///
/// The result lies strictly inside `(0, 1)`; the rare draws that round to an
/// endpoint are redrawn.
pub fn sample_beta(dist: &BetaParams, rng: &mut RngState) -> f64 {
    let gx = Gamma::new(dist.alpha, 1.0).expect("validated shape");
    let gy = Gamma::new(dist.beta, 1.0).expect("validated shape");
    loop {
        let x: f64 = gx.sample(rng);
        let y: f64 = gy.sample(rng);
        let v = x / (x + y);
        if v > 0.0 && v < 1.0 {
            return v;
        }
    }
}

/// Blends `a` with weight `lambda` and `b` with weight `1 - lambda`.
///
/// The canvas is `max(h_a, h_b) x max(w_a, w_b)`, starts at zero, and each
/// source contributes only over its own top-left-anchored extent.
pub fn mix_images(a: &ImageBuffer, b: &ImageBuffer, lambda: f64) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("mixup ratio {lambda} outside [0, 1]")));
    }
    let h = a.height().max(b.height());
    let w = a.width().max(b.width());
    let (wa, wb) = coefficients(lambda);
    let mut canvas = vec![0.0; h * w * CHANNELS];
    accumulate(&mut canvas, w, a, wa);
    accumulate(&mut canvas, w, b, wb);
    Ok(ImageBuffer::from_clamped(h, w, canvas))
}

/// `(lambda, 1 - lambda)` with the larger weight rounded and the smaller one
/// taken as its exact complement, so `coefficients(fl(1 - l))` is the swapped
/// pair of `coefficients(l)` bit for bit.
fn coefficients(lambda: f64) -> (f64, f64) {
    if lambda >= 0.5 {
        (lambda, 1.0 - lambda)
    } else {
        let wb = 1.0 - lambda;
        (1.0 - wb, wb)
    }
}

fn accumulate(canvas: &mut [f64], canvas_width: usize, src: &ImageBuffer, coef: f64) {
    let row_len = src.width() * CHANNELS;
    for y in 0..src.height() {
        let dst = &mut canvas[y * canvas_width * CHANNELS..][..row_len];
        for (d, s) in dst.iter_mut().zip(src.row(y)) {
            *d += coef * s;
        }
    }
}

/// Result of mixing two samples; `lambda` is the coefficient applied to `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub sample: Sample,
    pub lambda: f64,
}

pub fn mix_samples(
    a: &Sample,
    b: &Sample,
    cfg: &MixupConfig,
    rng: &mut RngState,
) -> Result<MixedSample> {
    cfg.validate()?;
    let lambda = match cfg.fixed_ratio {
        Some(r) => r,
        None => sample_beta(&cfg.dist, rng),
    };
    let image = mix_images(&a.image, &b.image, lambda)?;
    let rest = 1.0 - lambda;
    let labels: Vec<ObjectLabel> = a
        .labels
        .iter()
        .map(|l| (l, lambda))
        .chain(b.labels.iter().map(|l| (l, rest)))
        .map(|(l, coef)| ObjectLabel {
            weight: l.weight * coef,
            ..*l
        })
        .filter(|l| cfg.keeps(l.weight))
        .collect();
    Ok(MixedSample {
        sample: Sample { image, labels },
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::BBox;

    fn constant(h: usize, w: usize, v: f64) -> ImageBuffer {
        ImageBuffer::filled(h, w, [v; 3]).unwrap()
    }

    fn labelled(img: ImageBuffer, n: usize, class: usize) -> Sample {
        let labels = (0..n)
            .map(|i| ObjectLabel::new(BBox::new(i as f64, 0.0, i as f64 + 1.0, 1.0).unwrap(), class))
            .collect();
        Sample::new(img, labels).unwrap()
    }

    #[test]
    fn canvas_takes_max_extent() {
        let out = mix_images(&constant(416, 416, 0.1), &constant(300, 500, 0.1), 0.5).unwrap();
        assert_eq!((out.height(), out.width()), (416, 500));
        // only `a` covers the bottom-left, only `b` the top-right
        assert_eq!(out.pixel(400, 0)[0], 0.5 * 0.1);
        assert_eq!(out.pixel(0, 450)[0], 0.5 * 0.1);
        // neither covers the bottom-right
        assert_eq!(out.pixel(400, 450), [0.0; 3]);
    }

    #[test]
    fn constant_blend() {
        let out = mix_images(&constant(4, 4, 0.2), &constant(4, 4, 0.6), 0.5).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn lambda_one_is_identity() {
        let a = ImageBuffer::from_fn(3, 5, |y, x| [y as f64 / 3.0, x as f64 / 5.0, 0.7]).unwrap();
        let out = mix_images(&a, &constant(3, 5, 0.9), 1.0).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn labels_concatenate() {
        let a = labelled(constant(8, 8, 0.3), 2, 0);
        let b = labelled(constant(8, 8, 0.3), 3, 1);
        let cfg = MixupConfig::default();
        let m = mix_samples(&a, &b, &cfg, &mut RngState::new(3)).unwrap();
        assert!(m.lambda > 0.0 && m.lambda < 1.0);
        assert_eq!(m.sample.labels.len(), 5);
        assert_eq!(m.sample.labels[0].weight, m.lambda);
        assert_eq!(m.sample.labels[4].weight, 1.0 - m.lambda);
        assert_eq!(m.sample.labels[2].bbox, b.labels[0].bbox);
    }

    #[test]
    fn even_ratio_halves_weights() {
        let a = labelled(constant(8, 8, 0.3), 2, 0);
        let b = labelled(constant(8, 8, 0.3), 2, 1);
        let cfg = MixupConfig {
            fixed_ratio: Some(0.5),
            ..Default::default()
        };
        let m = mix_samples(&a, &b, &cfg, &mut RngState::new(0)).unwrap();
        assert!(m.sample.labels.iter().all(|l| l.weight == 0.5));
    }

    #[test]
    fn drop_rule_at_degenerate_ratio() {
        let a = labelled(constant(8, 8, 0.3), 2, 0);
        let b = labelled(constant(8, 8, 0.3), 3, 1);
        let mut cfg = MixupConfig {
            fixed_ratio: Some(1.0),
            ..Default::default()
        };
        let kept = mix_samples(&a, &b, &cfg, &mut RngState::new(0)).unwrap();
        assert_eq!(kept.sample.labels.len(), 5);
        assert!(kept.sample.labels[2..].iter().all(|l| l.weight == 0.0));

        cfg.min_weight = 0.01;
        let dropped = mix_samples(&a, &b, &cfg, &mut RngState::new(0)).unwrap();
        assert_eq!(dropped.sample.labels.len(), 2);
        assert!(dropped.sample.labels.iter().all(|l| l.class_id == 0));
    }

    #[test]
    fn invalid_configs() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, f64::INFINITY).is_err());
        let cfg = MixupConfig {
            fixed_ratio: Some(1.2),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = MixupConfig {
            min_weight: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn beta_draws_are_deterministic_and_interior() {
        let d = BetaParams::new(0.2, 0.2).unwrap();
        let mut r1 = RngState::new(11);
        let mut r2 = RngState::new(11);
        for _ in 0..10_000 {
            let v = sample_beta(&d, &mut r1);
            assert!(v > 0.0 && v < 1.0);
            assert_eq!(v, sample_beta(&d, &mut r2));
        }
    }

    #[test]
    fn uniform_beta_mean() {
        let d = BetaParams::new(1.0, 1.0).unwrap();
        let mut rng = RngState::new(5);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_beta(&d, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    proptest::proptest! {
        #[test]
        fn mirror_is_pixel_identical(
            (ha, wa, hb, wb) in (1usize..12, 1usize..12, 1usize..12, 1usize..12),
            lambda in 0.0..=1.0f64,
            seed in 0u64..1000,
        ) {
            let mut rng = RngState::new(seed);
            let mut img = |h, w| {
                ImageBuffer::from_fn(h, w, |_, _| [rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)])
                    .unwrap()
            };
            let (a, b) = (img(ha, wa), img(hb, wb));
            let ab = mix_images(&a, &b, lambda).unwrap();
            let ba = mix_images(&b, &a, 1.0 - lambda).unwrap();
            proptest::prop_assert_eq!(&ab, &ba);
            proptest::prop_assert_eq!((ab.height(), ab.width()), (ha.max(hb), wa.max(wb)));
        }
    }
}
