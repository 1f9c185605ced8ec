use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{clip_bbox, BBox};
use crate::raster::{ImageBuffer, CHANNELS};

/// One annotated object.
///
/// `weight` is the per-object loss weight introduced by mixup; plain
/// annotations carry 1.0. `difficult` follows the VOC marker and is carried
/// through every transform untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectLabel {
    pub bbox: BBox,
    pub class_id: usize,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub difficult: bool,
}

fn default_weight() -> f64 {
    1.0
}

impl ObjectLabel {
    pub fn new(bbox: BBox, class_id: usize) -> Self {
        Self {
            bbox,
            class_id,
            weight: 1.0,
            difficult: false,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::domain(format!("label weight {weight} outside [0, 1]")));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn with_difficult(mut self, difficult: bool) -> Self {
        self.difficult = difficult;
        self
    }

    pub(crate) fn with_bbox(self, bbox: BBox) -> Self {
        Self { bbox, ..self }
    }
}

/// An image together with its object labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ImageBuffer,
    pub labels: Vec<ObjectLabel>,
}

impl Sample {
    /// Checks that every label overlaps the image with positive area and
    /// carries a weight in `[0, 1]`.
    pub fn new(image: ImageBuffer, labels: Vec<ObjectLabel>) -> Result<Self> {
        let (w, h) = (image.width() as f64, image.height() as f64);
        for (i, l) in labels.iter().enumerate() {
            if clip_bbox(&l.bbox, w, h).is_none() {
                return Err(Error::domain(format!(
                    "label {i} box {:?} lies outside the {}x{} image",
                    l.bbox.to_array(),
                    image.height(),
                    image.width()
                )));
            }
            if !(0.0..=1.0).contains(&l.weight) {
                return Err(Error::domain(format!(
                    "label {i} weight {} outside [0, 1]",
                    l.weight
                )));
            }
        }
        Ok(Self { image, labels })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Validates the sample invariants; used by tests and fuzzers.
    pub fn check(&self) -> Result<()> {
        Sample::new(self.image.clone(), self.labels.clone()).map(|_| ())
    }
}

/// Mirrors the sample left-to-right.
///
/// Pixel column `x` moves to `width - 1 - x`; a box `(xmin, y0, xmax, y1)`
/// becomes `(W - xmax, y0, W - xmin, y1)`. Label order is kept.
pub fn hflip(s: &Sample) -> Sample {
    let (h, w) = (s.height(), s.width());
    let src = s.image.data();
    let mut data = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let from = (y * w + x) * CHANNELS;
            let to = (y * w + (w - 1 - x)) * CHANNELS;
            data[to..to + CHANNELS].copy_from_slice(&src[from..from + CHANNELS]);
        }
    }
    let wf = w as f64;
    let labels = s
        .labels
        .iter()
        .map(|l| {
            let b = l.bbox;
            let flipped = BBox::new(wf - b.xmax(), b.ymin(), wf - b.xmin(), b.ymax())
                .expect("reflection keeps positive area");
            l.with_bbox(flipped)
        })
        .collect();
    Sample {
        image: ImageBuffer::from_clamped(h, w, data),
        labels,
    }
}
