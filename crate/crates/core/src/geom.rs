//! Axis-aligned boxes in continuous pixel coordinates.
//!
//! The origin is the top-left corner of the image, x grows rightward and y
//! downward. A box covers the real rectangle `[xmin, xmax] x [ymin, ymax]`;
//! there is no inclusive/exclusive pixel convention at this level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite coordinates and non-positive area.
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        if ![xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite box coordinates ({xmin}, {ymin}, {xmax}, {ymax})"
            )));
        }
        if !(xmin < xmax && ymin < ymax) {
            return Err(Error::domain(format!(
                "box ({xmin}, {ymin}, {xmax}, {ymax}) has no positive area"
            )));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// COCO-style `[x, y, w, h]`.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x, y, x + w, y + h)
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn ymin(&self) -> f64 {
        self.ymin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.xmin + self.xmax),
            0.5 * (self.ymin + self.ymax),
        )
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.xmin, self.ymin, self.xmax, self.ymax]
    }

    /// Shifts the box by `(dx, dy)`.
    pub fn translate(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy)
    }

    /// Scales each axis independently about the origin.
    pub fn scale(&self, sx: f64, sy: f64) -> Result<Self> {
        Self::new(self.xmin * sx, self.ymin * sy, self.xmax * sx, self.ymax * sy)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.xmax.min(other.xmax) - self.xmin.max(other.xmin);
        let h = self.ymax.min(other.ymax) - self.ymin.max(other.ymin);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// Intersection over union. Zero for disjoint or merely touching boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Clamps `b` into `[0, width] x [0, height]`. Returns `None` when nothing of
/// positive area survives.
pub fn clip_bbox(b: &BBox, width: f64, height: f64) -> Option<BBox> {
    let xmin = b.xmin.clamp(0.0, width);
    let ymin = b.ymin.clamp(0.0, height);
    let xmax = b.xmax.clamp(0.0, width);
    let ymax = b.ymax.clamp(0.0, height);
    BBox::new(xmin, ymin, xmax, ymax).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(a: f64, b: f64, c: f64, d: f64) -> BBox {
        BBox::new(a, b, c, d).unwrap()
    }

    #[test]
    fn iou_examples() {
        let b = bx(3.0, 4.0, 17.5, 9.0);
        assert_eq!(iou(&b, &b), 1.0);
        assert_eq!(iou(&bx(0., 0., 10., 10.), &bx(20., 20., 30., 30.)), 0.0);
        let v = iou(&bx(0., 0., 10., 10.), &bx(5., 0., 15., 10.));
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn touching_boxes_do_not_overlap() {
        assert_eq!(iou(&bx(0., 0., 10., 10.), &bx(10., 0., 20., 10.)), 0.0);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(
            clip_bbox(&bx(-5., -5., 10., 10.), 100., 100.),
            Some(bx(0., 0., 10., 10.))
        );
        let inside = bx(10., 10., 20., 20.);
        assert_eq!(clip_bbox(&inside, 100., 100.), Some(inside));
        assert_eq!(clip_bbox(&bx(110., 110., 120., 120.), 100., 100.), None);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox::new(1., 1., 1., 2.).is_err());
        assert!(BBox::new(1., 1., 2., 0.).is_err());
        assert!(BBox::new(f64::NAN, 1., 2., 3.).is_err());
    }

    #[test]
    fn serde_uses_corner_array() {
        let b = bx(1., 2., 3., 4.);
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1.0,2.0,3.0,4.0]");
        assert!(serde_json::from_str::<BBox>("[3,2,1,4]").is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-50.0..150.0f64, -50.0..150.0f64, 0.01..80.0f64, 0.01..80.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            if a != b {
                prop_assert!(ab < 1.0);
            }
        }

        #[test]
        fn clip_is_idempotent(b in arb_box(), w in 1.0..120.0f64, h in 1.0..120.0f64) {
            if let Some(c) = clip_bbox(&b, w, h) {
                prop_assert_eq!(clip_bbox(&c, w, h), Some(c));
                prop_assert!(c.xmin() >= 0.0 && c.xmax() <= w);
                prop_assert!(c.ymin() >= 0.0 && c.ymax() <= h);
            }
        }
    }
}
