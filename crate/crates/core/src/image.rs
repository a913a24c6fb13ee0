// SPDX-License-Identifier: Apache-2.0

//! Grayscale images and integral images.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Luma weights applied to (R, G, B) when converting color input.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Smallest width and height accepted by the detector.
pub const MIN_DETECTION_SIZE: usize = 32;

/// Row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayscaleImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image has zero width or height"));
        }
        if data.len() != width * height {
            return Err(Error::invalid("pixel buffer length does not match dimensions"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite pixel intensity"));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// 8-bit grayscale samples, mapped to `v / 255`.
    pub fn from_luma8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(width, height, pixels.iter().map(|&v| f64::from(v) / 255.0).collect())
    }

    /// Interleaved 8-bit RGB samples, converted with [`LUMA_WEIGHTS`].
    pub fn from_rgb8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::invalid("rgb buffer length does not match dimensions"));
        }
        let data = pixels
            .chunks_exact(3)
            .map(|px| {
                (LUMA_WEIGHTS[0] * f64::from(px[0])
                    + LUMA_WEIGHTS[1] * f64::from(px[1])
                    + LUMA_WEIGHTS[2] * f64::from(px[2]))
                    / 255.0
            })
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Half-open integer rectangle `[x, x + width) × [y, y + height)`.
///
/// Coordinates may lie outside the image; lookups clip or replicate as documented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

impl PixelRect {
    pub const fn new(x: i64, y: i64, width: i64, height: i64) -> Self {
        Self { x, y, width, height }
    }
}

/// Cumulative sums: entry `(x, y)` holds the sum over `[0..=x] × [0..=y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

/// Computes the integral image of `img`.
pub fn compute_integral_image(img: &GrayscaleImage) -> IntegralImage {
    IntegralImage::new(img)
}

impl IntegralImage {
    pub fn new(img: &GrayscaleImage) -> Self {
        let (w, h) = (img.width, img.height);
        let mut sums = Vec::with_capacity(w * h);
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += img.data[y * w + x];
                let above = if y > 0 { sums[(y - 1) * w + x] } else { 0.0 };
                sums.push(row + above);
            }
        }
        Self { width: w, height: h, sums }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw cumulative sum at `(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.sums[y * self.width + x]
    }

    /// Cumulative sum with the convention that negative coordinates give 0.
    #[inline]
    fn corner(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 {
            0.0
        } else {
            self.sums[y as usize * self.width + x as usize]
        }
    }

    /// Sum over `rect` clipped to the image; area outside contributes 0.
    pub fn box_sum(&self, rect: PixelRect) -> f64 {
        let x0 = rect.x.max(0);
        let y0 = rect.y.max(0);
        let x1 = rect.x.saturating_add(rect.width).min(self.width as i64);
        let y1 = rect.y.saturating_add(rect.height).min(self.height as i64);
        if x0 >= x1 || y0 >= y1 {
            return 0.0;
        }
        self.corner(x1 - 1, y1 - 1) - self.corner(x0 - 1, y1 - 1) - self.corner(x1 - 1, y0 - 1)
            + self.corner(x0 - 1, y0 - 1)
    }

    /// Sum over `rect` as if the image were extended by replicating its border pixels.
    ///
    /// Box filters whose weights sum to zero therefore respond with 0 to a constant
    /// image everywhere, including near the borders.
    pub fn box_sum_replicated(&self, rect: PixelRect) -> f64 {
        if rect.width <= 0 || rect.height <= 0 {
            return 0.0;
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let inside = rect.x >= 0 && rect.y >= 0 && rect.x + rect.width <= w && rect.y + rect.height <= h;
        if inside {
            return self.box_sum(rect);
        }
        let xs = axis_segments(rect.x, rect.x + rect.width, w);
        let ys = axis_segments(rect.y, rect.y + rect.height, h);
        let mut total = 0.0;
        for &(ya, yb, ym) in ys.iter().flatten() {
            for &(xa, xb, xm) in xs.iter().flatten() {
                let s = self.box_sum(PixelRect::new(xa, ya, xb - xa, yb - ya));
                total += s * (xm * ym) as f64;
            }
        }
        total
    }
}

/// Splits `[a, b)` into in-image segments with replication multiplicities:
/// the part left of 0 maps to index 0, the part right of `len` to `len - 1`.
fn axis_segments(a: i64, b: i64, len: i64) -> [Option<(i64, i64, i64)>; 3] {
    let left = (b.min(0) - a).max(0);
    let right = (b - a.max(len)).max(0);
    let mid_a = a.max(0);
    let mid_b = b.min(len);
    [
        (left > 0).then_some((0, 1, left)),
        (mid_a < mid_b).then_some((mid_a, mid_b, 1)),
        (right > 0).then_some((len - 1, len, right)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_image_gives_zero_sums() {
        let img = GrayscaleImage::new(3, 3, vec![0.0; 9]).unwrap();
        let ii = compute_integral_image(&img);
        assert!((0..3).all(|y| (0..3).all(|x| ii.at(x, y) == 0.0)));
    }

    #[test]
    fn ones_2x2() {
        let img = GrayscaleImage::new(2, 2, vec![1.0; 4]).unwrap();
        let ii = compute_integral_image(&img);
        assert_eq!([ii.at(0, 0), ii.at(1, 0), ii.at(0, 1), ii.at(1, 1)], [1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn empty_image_is_rejected() {
        assert!(matches!(GrayscaleImage::new(0, 4, vec![]), Err(Error::InvalidInput(_))));
        assert!(GrayscaleImage::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn box_sum_full_and_single() {
        let img = GrayscaleImage::new(5, 4, vec![1.0; 20]).unwrap();
        let ii = compute_integral_image(&img);
        assert_eq!(ii.box_sum(PixelRect::new(0, 0, 5, 4)), 20.0);
        assert_eq!(ii.box_sum(PixelRect::new(-3, -3, 50, 50)), 20.0);
        assert_eq!(ii.box_sum(PixelRect::new(2, 1, 0, 3)), 0.0);
        assert_eq!(ii.box_sum(PixelRect::new(7, 1, 2, 3)), 0.0);

        let img = GrayscaleImage::from_fn(4, 4, |x, y| (x + 4 * y) as f64 / 16.0).unwrap();
        let ii = compute_integral_image(&img);
        assert_eq!(ii.box_sum(PixelRect::new(2, 3, 1, 1)), img.get(2, 3));
    }

    #[test]
    fn replicated_sum_extends_border() {
        let img = GrayscaleImage::from_fn(3, 2, |x, y| (1 + x + 3 * y) as f64).unwrap();
        let ii = compute_integral_image(&img);
        // Brute force over the padded grid.
        let rect = PixelRect::new(-2, -1, 7, 5);
        let mut expected = 0.0;
        for y in rect.y..rect.y + rect.height {
            for x in rect.x..rect.x + rect.width {
                expected += img.get(x.clamp(0, 2) as usize, y.clamp(0, 1) as usize);
            }
        }
        assert_eq!(ii.box_sum_replicated(rect), expected);
        // Entirely outside on one side.
        let rect = PixelRect::new(5, 0, 2, 1);
        assert_eq!(ii.box_sum_replicated(rect), 2.0 * img.get(2, 0));
    }

    #[test]
    fn luma_conversion() {
        let img = GrayscaleImage::from_rgb8(1, 1, &[255, 0, 0]).unwrap();
        assert!((img.get(0, 0) - 0.299).abs() < 1e-12);
    }
}
