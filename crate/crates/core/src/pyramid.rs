//! Image pyramid construction from (minSize, scaleFactor) with bilinear
//! resampling.

use crate::plane::ImagePlane;

/// One level of the image pyramid.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    /// Ordinal of the level; 0 is the largest.
    pub index: usize,
    /// Original -> level coordinate multiplier, strictly decreasing with index.
    pub scale: f64,
    pub image: ImagePlane,
}

/// Bilinear sample with edge clamping at fractional coordinates.
#[inline]
pub fn sample_bilinear(src: &ImagePlane, x: f64, y: f64) -> f32 {
    let (w, h) = (src.width(), src.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = (x - x0 as f64) as f32;
    let fy = (y - y0 as f64) as f32;
    let top = src.get(x0, y0) * (1.0 - fx) + src.get(x1, y0) * fx;
    let bot = src.get(x0, y1) * (1.0 - fx) + src.get(x1, y1) * fx;
    top * (1.0 - fy) + bot * fy
}

/// Bilinear resize with pixel-center alignment. A same-size resize returns a
/// bit-identical copy.
pub fn resize_bilinear(src: &ImagePlane, new_w: usize, new_h: usize) -> ImagePlane {
    if new_w == src.width() && new_h == src.height() {
        return src.clone();
    }
    let sx = src.width() as f64 / new_w as f64;
    let sy = src.height() as f64 / new_h as f64;
    let mut out = ImagePlane::zeros(new_w, new_h);
    for y in 0..new_h {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..new_w {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            out.set(x, y, sample_bilinear(src, src_x, src_y));
        }
    }
    out
}

/// Build the image pyramid for a scanning window of `(window_w, window_h)`.
///
/// The first scale is `window_w / min_size` (upscaling is permitted when
/// `min_size` is below the window width); each following level divides the
/// scale by `scale_factor`. Construction stops before the first level
/// smaller than the window. An image too small for any level yields an
/// empty pyramid.
pub fn build_pyramid(
    image: &ImagePlane,
    window: (usize, usize),
    min_size: usize,
    scale_factor: f64,
) -> Vec<PyramidLevel> {
    assert!(scale_factor > 1.0, "scaleFactor must exceed 1");
    assert!(min_size >= 1, "minSize must be at least 1");
    let mut levels = Vec::new();
    let mut scale = window.0 as f64 / min_size as f64;
    let mut index = 0;
    loop {
        let w = (image.width() as f64 * scale).floor() as usize;
        let h = (image.height() as f64 * scale).floor() as usize;
        if w < window.0 || h < window.1 {
            break;
        }
        levels.push(PyramidLevel {
            index,
            scale,
            image: resize_bilinear(image, w, h),
        });
        scale /= scale_factor;
        index += 1;
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resize_is_bit_identical() {
        let mut p = ImagePlane::zeros(7, 5);
        for (i, v) in p.data_mut().iter_mut().enumerate() {
            *v = (i * 13 % 251) as f32;
        }
        assert_eq!(resize_bilinear(&p, 7, 5), p);
    }

    #[test]
    fn resize_preserves_constants() {
        let p = ImagePlane::constant(10, 8, 42.0);
        let r = resize_bilinear(&p, 23, 5);
        assert!(r.data().iter().all(|&v| (v - 42.0).abs() < 1e-4));
    }

    #[test]
    fn pyramid_level_count_example() {
        // 640x480, window 27x31, minSize 40, scaleFactor 1.2 -> 13 levels
        let img = ImagePlane::zeros(640, 480);
        let levels = build_pyramid(&img, (27, 31), 40, 1.2);
        assert_eq!(levels.len(), 13);
        assert!((levels[0].scale - 0.675).abs() < 1e-12);
        assert!((levels[12].scale - 0.675 / 1.2f64.powi(12)).abs() < 1e-12);
        for pair in levels.windows(2) {
            assert!((pair[0].scale / pair[1].scale - 1.2).abs() < 1e-9);
        }
    }

    #[test]
    fn min_size_equal_window_starts_at_original() {
        let img = ImagePlane::zeros(100, 100);
        let levels = build_pyramid(&img, (27, 31), 27, 1.1);
        assert_eq!(levels[0].scale, 1.0);
        assert_eq!(levels[0].image, img);
    }

    #[test]
    fn window_sized_image_single_level() {
        let img = ImagePlane::zeros(27, 31);
        let levels = build_pyramid(&img, (27, 31), 27, 1.05);
        assert_eq!(levels.len(), 1);
    }

    #[test]
    fn undersized_image_empty_pyramid() {
        let img = ImagePlane::zeros(20, 20);
        let levels = build_pyramid(&img, (27, 31), 27, 1.05);
        assert!(levels.is_empty());
    }
}
