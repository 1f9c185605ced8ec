use crate::error::{Error, Result};

/// Row-major `height x width x 3` raster of intensities in `[0, 1]`.
///
/// Intensities are kept as `f64` so that blending is exact; quantization to
/// 8 bits only happens in [`crate::io::image`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

pub const CHANNELS: usize = 3;

impl ImageBuffer {
    /// All-zero (black) image.
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, [0.0; 3])
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        check_dims(height, width)?;
        check_intensities(&rgb)?;
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_data(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * CHANNELS {
            return Err(Error::domain(format!(
                "image data has {} values, expected {height}x{width}x3 = {}",
                data.len(),
                height * width * CHANNELS
            )));
        }
        check_intensities(&data)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds an image by evaluating `f(y, x)` for every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        check_dims(height, width)?;
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self::from_data(height, width, data)
    }

    /// Wraps data produced by an internal kernel, clamping into `[0, 1]`.
    pub(crate) fn from_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * CHANNELS);
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, y: usize, x: usize) -> usize {
        (y * self.width + x) * CHANNELS
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let o = self.offset(y, x);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// Writes one pixel, clamping each channel into `[0, 1]`.
    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let o = self.offset(y, x);
        for (d, v) in self.data[o..o + CHANNELS].iter_mut().zip(rgb) {
            *d = v.clamp(0.0, 1.0);
        }
    }

    pub fn row(&self, y: usize) -> &[f64] {
        let start = self.offset(y, 0);
        &self.data[start..start + self.width * CHANNELS]
    }

    /// Copies out the sub-rectangle `[y0, y0+h) x [x0, x0+w)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || y0 + h > self.height || x0 + w > self.width {
            return Err(Error::domain(format!(
                "crop {h}x{w} at ({y0}, {x0}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w * CHANNELS);
        for y in y0..y0 + h {
            let o = self.offset(y, x0);
            data.extend_from_slice(&self.data[o..o + w * CHANNELS]);
        }
        Ok(Self {
            height: h,
            width: w,
            data,
        })
    }

    /// Mean over all pixels of each channel.
    pub fn channel_means(&self) -> [f64; 3] {
        let mut sums = [0.0; 3];
        for px in self.data.chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                sums[c] += px[c];
            }
        }
        let n = (self.height * self.width) as f64;
        sums.map(|s| s / n)
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::domain(format!(
            "image dimensions must be at least 1x1, got {height}x{width}"
        )));
    }
    Ok(())
}

fn check_intensities(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("intensity {v} outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(ImageBuffer::zeros(0, 3).is_err());
        assert!(ImageBuffer::from_data(1, 1, vec![0.0; 2]).is_err());
        assert!(ImageBuffer::from_data(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(ImageBuffer::from_data(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn crop_copies_region() {
        let img = ImageBuffer::from_fn(4, 5, |y, x| [y as f64 / 4.0, x as f64 / 5.0, 0.0]).unwrap();
        let c = img.crop(1, 2, 2, 3).unwrap();
        assert_eq!(c.height(), 2);
        assert_eq!(c.width(), 3);
        assert_eq!(c.pixel(0, 0), img.pixel(1, 2));
        assert_eq!(c.pixel(1, 2), img.pixel(2, 4));
        assert!(img.crop(3, 0, 2, 1).is_err());
    }
}
