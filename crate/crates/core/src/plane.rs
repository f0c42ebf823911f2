//! Basic pixel containers: a single 2-D plane and a stack of equally sized planes.

use crate::error::{Error, Result};

/// A 2-D grayscale raster of real intensities, stored row-major.
///
/// The same type holds input frames (0..255 range), normalized network
/// inputs (-1..1 range) and intermediate feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ImagePlane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "plane data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("plane contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Extract the sub-plane at (x, y) with the given size. Must lie inside.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<ImagePlane> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::Dimension(format!(
                "crop {}x{}+{}+{} exceeds plane {}x{}",
                w, h, x, y, self.width, self.height
            )));
        }
        let mut out = ImagePlane::zeros(w, h);
        for row in 0..h {
            let src = &self.data[(y + row) * self.width + x..(y + row) * self.width + x + w];
            out.data[row * w..(row + 1) * w].copy_from_slice(src);
        }
        Ok(out)
    }

    /// Affine map of 8-bit intensities [0, 255] onto [-1, 1].
    pub fn normalized(&self) -> ImagePlane {
        let data = self.data.iter().map(|v| v / 127.5 - 1.0).collect();
        ImagePlane {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// An ordered list of planes with identical dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    maps: Vec<ImagePlane>,
}

impl FeatureStack {
    pub fn new(maps: Vec<ImagePlane>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Dimension("feature stack must be nonempty".into()))?;
        let (w, h) = (first.width(), first.height());
        if maps.iter().any(|m| m.width() != w || m.height() != h) {
            return Err(Error::Dimension(
                "feature stack maps must share dimensions".into(),
            ));
        }
        Ok(Self { maps })
    }

    pub fn from_plane(plane: ImagePlane) -> Self {
        Self { maps: vec![plane] }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.maps[0].width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.maps[0].height()
    }

    #[inline]
    pub fn map(&self, i: usize) -> &ImagePlane {
        &self.maps[i]
    }

    pub fn maps(&self) -> &[ImagePlane] {
        &self.maps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(ImagePlane::from_vec(3, 2, vec![0.0; 5]).is_err());
        assert!(ImagePlane::from_vec(3, 2, vec![0.0; 6]).is_ok());
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(ImagePlane::from_vec(2, 1, vec![0.0, f32::NAN]).is_err());
    }

    #[test]
    fn stack_requires_uniform_dims() {
        let a = ImagePlane::zeros(3, 3);
        let b = ImagePlane::zeros(3, 4);
        assert!(FeatureStack::new(vec![a.clone(), b]).is_err());
        assert!(FeatureStack::new(vec![a.clone(), a]).is_ok());
        assert!(FeatureStack::new(vec![]).is_err());
    }

    #[test]
    fn crop_bounds() {
        let mut p = ImagePlane::zeros(4, 3);
        p.set(2, 1, 7.0);
        let c = p.crop(1, 1, 3, 2).unwrap();
        assert_eq!(c.get(1, 0), 7.0);
        assert!(p.crop(2, 0, 3, 3).is_err());
    }

    #[test]
    fn normalize_endpoints() {
        let p = ImagePlane::from_vec(3, 1, vec![0.0, 127.5, 255.0]).unwrap();
        let n = p.normalized();
        assert_eq!(n.data(), &[-1.0, 0.0, 1.0]);
    }
}
