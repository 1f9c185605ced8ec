//! Sliding-patch robustness harness.
//!
//! An out-of-context patch is pasted at every grid position of a scene. For
//! detections run on those frames the harness measures how often the patch
//! itself is found (recall) and how often objects that were present in the
//! clean scene go missing (disappearance rate).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::augment::{resample_plane, Interpolation};
use crate::error::{Error, Result};
use crate::eval::DetectionRecord;
use crate::geom::{iou, BBox};
use crate::raster::{ImageBuffer, CHANNELS};

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSpec {
    pub patch: ImageBuffer,
    /// Row-major `h x w` opacity in `[0, 1]`; `None` pastes opaquely.
    pub alpha_mask: Option<Vec<f64>>,
    pub stride_x: usize,
    pub stride_y: usize,
    pub scale: f64,
}

impl PatchSpec {
    /// Opaque patch with the default stride of half the patch size.
    pub fn new(patch: ImageBuffer) -> Self {
        let stride_x = (patch.width() / 2).max(1);
        let stride_y = (patch.height() / 2).max(1);
        Self {
            patch,
            alpha_mask: None,
            stride_x,
            stride_y,
            scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.stride_x == 0 || self.stride_y == 0 {
            return Err(Error::domain("patch strides must be positive"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::domain(format!("patch scale {} must be positive", self.scale)));
        }
        if let Some(mask) = &self.alpha_mask {
            if mask.len() != self.patch.width() * self.patch.height() {
                return Err(Error::domain(format!(
                    "alpha mask has {} entries, patch is {}x{}",
                    mask.len(),
                    self.patch.height(),
                    self.patch.width()
                )));
            }
            if mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::domain("alpha mask values must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Patch and mask after applying `scale`.
    fn scaled(&self) -> Result<(ImageBuffer, Option<Vec<f64>>)> {
        if self.scale == 1.0 {
            return Ok((self.patch.clone(), self.alpha_mask.clone()));
        }
        let (h, w) = (self.patch.height(), self.patch.width());
        let th = ((h as f64 * self.scale).round() as usize).max(1);
        let tw = ((w as f64 * self.scale).round() as usize).max(1);
        let patch = crate::augment::resize_image(&self.patch, th, tw, Interpolation::Bilinear)?;
        let mask = self.alpha_mask.as_ref().map(|m| {
            resample_plane(m, h, w, 1, th, tw, Interpolation::Bilinear)
                .into_iter()
                .map(|v| v.clamp(0.0, 1.0))
                .collect()
        });
        Ok((patch, mask))
    }
}

/// Ground truth of one generated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame_id: String,
    pub patch_bbox: BBox,
    pub patch_class_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialFrame {
    pub truth: FrameTruth,
    pub image: ImageBuffer,
}

pub fn frame_id(index: usize) -> String {
    format!("frame_{index:05}")
}

/// Top-left offsets `(x, y)` of every placement, row by row.
fn placements(scene_h: usize, scene_w: usize, ph: usize, pw: usize, sx: usize, sy: usize) -> Vec<(usize, usize)> {
    let ys = (0..=scene_h - ph).step_by(sy);
    ys.flat_map(|y| (0..=scene_w - pw).step_by(sx).map(move |x| (x, y)))
        .collect()
}

/// Lazily rendered frames; one per grid position where the scaled patch fits.
pub struct Frames<'a> {
    scene: &'a ImageBuffer,
    patch: ImageBuffer,
    mask: Option<Vec<f64>>,
    class_id: usize,
    positions: Vec<(usize, usize)>,
    next: usize,
}

impl Frames<'_> {
    pub fn truths(&self) -> Vec<FrameTruth> {
        (0..self.positions.len()).map(|i| self.truth(i)).collect()
    }

    fn truth(&self, i: usize) -> FrameTruth {
        let (x, y) = self.positions[i];
        FrameTruth {
            frame_id: frame_id(i),
            patch_bbox: BBox::new(
                x as f64,
                y as f64,
                (x + self.patch.width()) as f64,
                (y + self.patch.height()) as f64,
            )
            .expect("patch has positive size"),
            patch_class_id: self.class_id,
        }
    }

    /// Renders frame `i`.
    pub fn render(&self, i: usize) -> AdversarialFrame {
        let (ox, oy) = self.positions[i];
        let mut data = self.scene.data().to_vec();
        let sw = self.scene.width();
        let (ph, pw) = (self.patch.height(), self.patch.width());
        for y in 0..ph {
            let src = self.patch.row(y);
            let dst = &mut data[((oy + y) * sw + ox) * CHANNELS..][..pw * CHANNELS];
            match &self.mask {
                None => dst.copy_from_slice(src),
                Some(mask) => {
                    for x in 0..pw {
                        let a = mask[y * pw + x];
                        for c in 0..CHANNELS {
                            let k = x * CHANNELS + c;
                            dst[k] = a * src[k] + (1.0 - a) * dst[k];
                        }
                    }
                }
            }
        }
        AdversarialFrame {
            truth: self.truth(i),
            image: ImageBuffer::from_clamped(self.scene.height(), sw, data),
        }
    }
}

impl Iterator for Frames<'_> {
    type Item = AdversarialFrame;

    fn next(&mut self) -> Option<AdversarialFrame> {
        if self.next >= self.positions.len() {
            return None;
        }
        let frame = self.render(self.next);
        self.next += 1;
        Some(frame)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.positions.len() - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Frames<'_> {}

/// Slides the patch over the scene with the configured strides.
pub fn generate_frames<'a>(scene: &'a ImageBuffer, spec: &PatchSpec, patch_class_id: usize) -> Result<Frames<'a>> {
    spec.validate()?;
    let (patch, mask) = spec.scaled()?;
    if patch.height() > scene.height() || patch.width() > scene.width() {
        return Err(Error::domain(format!(
            "patch {}x{} does not fit in scene {}x{}",
            patch.height(),
            patch.width(),
            scene.height(),
            scene.width()
        )));
    }
    let positions = placements(
        scene.height(),
        scene.width(),
        patch.height(),
        patch.width(),
        spec.stride_x,
        spec.stride_y,
    );
    Ok(Frames {
        scene,
        patch,
        mask,
        class_id: patch_class_id,
        positions,
        next: 0,
    })
}

/// An exact count rendered as a percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub count: usize,
    pub total: usize,
    /// `100 * count / total`, rounded to two decimals.
    pub percent: f64,
}

impl Rate {
    fn new(count: usize, total: usize) -> Result<Self> {
        if total == 0 {
            return Err(Error::domain("rate over an empty population"));
        }
        let raw = 100.0 * count as f64 / total as f64;
        Ok(Self {
            count,
            total,
            percent: (raw * 100.0).round() / 100.0,
        })
    }
}

pub type DetectionsByFrame = BTreeMap<String, Vec<DetectionRecord>>;

pub fn group_by_image(dets: Vec<DetectionRecord>) -> DetectionsByFrame {
    let mut out = DetectionsByFrame::new();
    for d in dets {
        out.entry(d.image_id.clone()).or_default().push(d);
    }
    out
}

fn found(dets: Option<&Vec<DetectionRecord>>, class_id: usize, target: &BBox, thr: f64) -> bool {
    dets.into_iter()
        .flatten()
        .any(|d| d.class_id == class_id && iou(&d.bbox, target) >= thr)
}

/// Share of frames in which the pasted patch is detected.
pub fn patch_recall(frames: &[FrameTruth], dets: &DetectionsByFrame, iou_threshold: f64) -> Result<Rate> {
    let hits = frames
        .iter()
        .filter(|f| found(dets.get(&f.frame_id), f.patch_class_id, &f.patch_bbox, iou_threshold))
        .count();
    Rate::new(hits, frames.len())
}

/// An object present in the clean scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanObject {
    pub bbox: BBox,
    pub class_id: usize,
}

/// Share of (object, frame) pairs where a clean-scene object is no longer
/// detected.
///
/// With `exclude_occluded = Some(t)`, objects whose IoU with the pasted patch
/// reaches `t` are left out of that frame's count entirely.
pub fn disappearance_rate(
    clean: &[CleanObject],
    frames: &[FrameTruth],
    dets: &DetectionsByFrame,
    iou_threshold: f64,
    exclude_occluded: Option<f64>,
) -> Result<Rate> {
    if clean.is_empty() {
        return Err(Error::domain("no clean-scene objects to track"));
    }
    let mut missing = 0;
    let mut total = 0;
    for f in frames {
        let frame_dets = dets.get(&f.frame_id);
        for obj in clean {
            if exclude_occluded.is_some_and(|t| iou(&obj.bbox, &f.patch_bbox) >= t) {
                continue;
            }
            total += 1;
            if !found(frame_dets, obj.class_id, &obj.bbox, iou_threshold) {
                missing += 1;
            }
        }
    }
    Rate::new(missing, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanSource {
    Annotations,
    Detections,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElephantReport {
    pub frames: usize,
    pub iou_threshold: f64,
    pub clean_source: CleanSource,
    pub clean_objects: usize,
    pub exclude_occluded: Option<f64>,
    pub patch_recall: Rate,
    pub disappearance: Rate,
}

pub fn evaluate(
    frames: &[FrameTruth],
    clean: &[CleanObject],
    clean_source: CleanSource,
    dets: &DetectionsByFrame,
    iou_threshold: f64,
    exclude_occluded: Option<f64>,
) -> Result<ElephantReport> {
    Ok(ElephantReport {
        frames: frames.len(),
        iou_threshold,
        clean_source,
        clean_objects: clean.len(),
        exclude_occluded,
        patch_recall: patch_recall(frames, dets, iou_threshold)?,
        disappearance: disappearance_rate(clean, frames, dets, iou_threshold, exclude_occluded)?,
    })
}
