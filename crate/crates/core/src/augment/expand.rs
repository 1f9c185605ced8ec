use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{ImageBuffer, CHANNELS};
use crate::rng::RngState;
use crate::sample::Sample;

/// Where the original image lands on the expanded canvas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpandPlacement {
    pub ratio: f64,
    pub height: usize,
    pub width: usize,
    pub offset_y: usize,
    pub offset_x: usize,
}

/// Draws a ratio in `[1, max_ratio]`, sizes the canvas `ceil(r*h) x ceil(r*w)`
/// and picks a uniform offset.
pub fn expand_placement(h: usize, w: usize, max_ratio: f64, rng: &mut RngState) -> Result<ExpandPlacement> {
    if !(max_ratio >= 1.0 && max_ratio.is_finite()) {
        return Err(Error::domain(format!("expansion ratio {max_ratio} must be >= 1")));
    }
    let ratio = rng.uniform(1.0, max_ratio);
    let height = ((ratio * h as f64).ceil() as usize).max(h);
    let width = ((ratio * w as f64).ceil() as usize).max(w);
    let offset_y = rng.between(0, height - h);
    let offset_x = rng.between(0, width - w);
    Ok(ExpandPlacement {
        ratio,
        height,
        width,
        offset_y,
        offset_x,
    })
}

/// Places the sample on a `fill`-colored canvas and shifts its boxes.
pub fn expand_with(s: &Sample, p: &ExpandPlacement, fill: [f64; 3]) -> Result<Sample> {
    if p.height < s.height() + p.offset_y || p.width < s.width() + p.offset_x {
        return Err(Error::domain(format!(
            "placement {p:?} does not fit a {}x{} image",
            s.height(),
            s.width()
        )));
    }
    let mut canvas = ImageBuffer::filled(p.height, p.width, fill)?.into_data();
    let row_len = s.width() * CHANNELS;
    for y in 0..s.height() {
        let start = ((y + p.offset_y) * p.width + p.offset_x) * CHANNELS;
        canvas[start..start + row_len].copy_from_slice(s.image.row(y));
    }
    let (dx, dy) = (p.offset_x as f64, p.offset_y as f64);
    let labels = s
        .labels
        .iter()
        .map(|l| Ok(l.with_bbox(l.bbox.translate(dx, dy)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sample {
        image: ImageBuffer::from_clamped(p.height, p.width, canvas),
        labels,
    })
}

pub fn random_expand(s: &Sample, max_ratio: f64, fill: [f64; 3], rng: &mut RngState) -> Result<Sample> {
    let p = expand_placement(s.height(), s.width(), max_ratio, rng)?;
    expand_with(s, &p, fill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::BBox;
    use crate::sample::ObjectLabel;

    fn sample() -> Sample {
        let img = ImageBuffer::from_fn(100, 100, |y, x| [(x % 7) as f64 / 6.0, (y % 5) as f64 / 4.0, 0.3]).unwrap();
        Sample::new(img, vec![ObjectLabel::new(BBox::new(10., 10., 20., 20.).unwrap(), 3)]).unwrap()
    }

    #[test]
    fn translation() {
        let s = sample();
        let p = ExpandPlacement {
            ratio: 2.0,
            height: 200,
            width: 200,
            offset_y: 30,
            offset_x: 50,
        };
        let out = expand_with(&s, &p, [0.5; 3]).unwrap();
        assert_eq!(out.labels[0].bbox.to_array(), [60., 40., 70., 50.]);
        assert_eq!(out.labels[0].class_id, 3);
        assert_eq!(out.image.pixel(30, 50), s.image.pixel(0, 0));
        assert_eq!(out.image.pixel(0, 0), [0.5; 3]);
        assert_eq!(out.image.pixel(199, 199), [0.5; 3]);
    }

    #[test]
    fn unit_ratio_is_identity() {
        let s = sample();
        let out = random_expand(&s, 1.0, [0.5; 3], &mut RngState::new(2)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn rejects_shrinking_ratio() {
        assert!(random_expand(&sample(), 0.5, [0.5; 3], &mut RngState::new(2)).is_err());
    }
}
