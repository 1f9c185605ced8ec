use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{clip_bbox, iou, BBox};
use crate::rng::RngState;
use crate::sample::Sample;

/// Limits on the crops [`random_crop`] may propose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropConstraint {
    /// A crop is accepted only if some ground-truth box overlaps it with at
    /// least this IoU. `None` accepts any crop that keeps an object.
    pub min_iou: Option<f64>,
    /// Crop area as a fraction of the image area.
    pub min_scale: f64,
    pub max_scale: f64,
    /// Allowed crop `width / height` relative to the image's own aspect.
    pub aspect_range: (f64, f64),
    pub max_trials: usize,
}

impl Default for CropConstraint {
    fn default() -> Self {
        Self {
            min_iou: None,
            min_scale: 0.3,
            max_scale: 1.0,
            aspect_range: (0.5, 2.0),
            max_trials: 50,
        }
    }
}

impl CropConstraint {
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.min_iou {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::domain(format!("crop min_iou {m} outside [0, 1]")));
            }
        }
        if !(self.min_scale > 0.0 && self.min_scale <= self.max_scale && self.max_scale <= 1.0) {
            return Err(Error::domain(format!(
                "crop scale range [{}, {}] must lie in (0, 1] and be ordered",
                self.min_scale, self.max_scale
            )));
        }
        let (lo, hi) = self.aspect_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::domain(format!("crop aspect range ({lo}, {hi}) is invalid")));
        }
        if self.max_trials == 0 {
            return Err(Error::domain("crop max_trials must be at least 1"));
        }
        Ok(())
    }
}

/// Integer pixel rectangle `[x0, x0 + w) x [y0, y0 + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl CropRect {
    fn as_bbox(&self) -> BBox {
        BBox::new(
            self.x0 as f64,
            self.y0 as f64,
            (self.x0 + self.width) as f64,
            (self.y0 + self.height) as f64,
        )
        .expect("non-empty crop")
    }
}

/// Crops to `rect`, keeping labels whose box center lies strictly inside it.
/// Kept boxes are shifted into crop coordinates and clipped to it.
pub fn crop_sample(s: &Sample, rect: CropRect) -> Result<Sample> {
    let image = s.image.crop(rect.y0, rect.x0, rect.height, rect.width)?;
    let area = rect.as_bbox();
    let (dx, dy) = (rect.x0 as f64, rect.y0 as f64);
    let labels = s
        .labels
        .iter()
        .filter(|l| center_inside(&l.bbox, &area))
        .filter_map(|l| {
            let moved = l.bbox.translate(-dx, -dy).ok()?;
            clip_bbox(&moved, rect.width as f64, rect.height as f64).map(|b| l.with_bbox(b))
        })
        .collect();
    Ok(Sample { image, labels })
}

fn center_inside(b: &BBox, area: &BBox) -> bool {
    let (cx, cy) = b.center();
    cx > area.xmin() && cx < area.xmax() && cy > area.ymin() && cy < area.ymax()
}

fn propose(s: &Sample, c: &CropConstraint, rng: &mut RngState) -> Option<CropRect> {
    let (w, h) = (s.width(), s.height());
    let scale = rng.uniform(c.min_scale, c.max_scale);
    let aspect = rng.uniform(c.aspect_range.0, c.aspect_range.1);
    let cw = (w as f64 * (scale * aspect).sqrt()).round() as usize;
    let ch = (h as f64 * (scale / aspect).sqrt()).round() as usize;
    if cw == 0 || ch == 0 || cw > w || ch > h {
        return None;
    }
    let x0 = rng.between(0, w - cw);
    let y0 = rng.between(0, h - ch);
    let rect = CropRect {
        x0,
        y0,
        width: cw,
        height: ch,
    };
    if s.labels.is_empty() {
        return Some(rect);
    }
    let area = rect.as_bbox();
    if let Some(min_iou) = c.min_iou {
        if !s.labels.iter().any(|l| iou(&l.bbox, &area) >= min_iou) {
            return None;
        }
    }
    s.labels
        .iter()
        .any(|l| center_inside(&l.bbox, &area))
        .then_some(rect)
}

/// Samples up to `max_trials` crops and applies the first acceptable one.
/// Returns the sample unchanged when every trial fails.
pub fn random_crop(s: &Sample, c: &CropConstraint, rng: &mut RngState) -> Result<Sample> {
    c.validate()?;
    for _ in 0..c.max_trials {
        if let Some(rect) = propose(s, c, rng) {
            return crop_sample(s, rect);
        }
    }
    Ok(s.clone())
}
