// SPDX-License-Identifier: Apache-2.0

use crate::image::{IntegralImage, PixelRect};

/// Weight applied to `Dxy` in the determinant.
pub const DXY_WEIGHT: f64 = 0.9;

/// Area-normalized box-filter second derivatives at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianComponents {
    pub dxx: f64,
    pub dyy: f64,
    pub dxy: f64,
}

impl HessianComponents {
    pub fn determinant(&self) -> f64 {
        let w = DXY_WEIGHT * self.dxy;
        self.dxx * self.dyy - w * w
    }

    pub fn trace(&self) -> f64 {
        self.dxx + self.dyy
    }
}

/// Filter side length of `interval` in `octave`: 9, 15, 21, 27 for the first
/// octave, then the step doubles each octave (15, 27, 39, 51, ...).
pub fn filter_size(octave: usize, interval: usize) -> usize {
    3 * ((2usize << octave) * (interval + 1) + 1)
}

#[inline]
fn boxed(ii: &IntegralImage, row: i64, col: i64, rows: i64, cols: i64) -> f64 {
    ii.box_sum_replicated(PixelRect::new(col, row, cols, rows))
}

/// Box-filter approximations of `Lxx`, `Lyy`, `Lxy` centred on pixel `(x, y)`.
///
/// `filter_size` must be odd and at least 9. Out-of-image area is filled by
/// border replication.
pub fn hessian_components(ii: &IntegralImage, x: i64, y: i64, filter_size: usize) -> HessianComponents {
    debug_assert!(filter_size >= 9 && filter_size % 2 == 1);
    let (r, c) = (y, x);
    let w = filter_size as i64;
    let b = (w - 1) / 2;
    let l = w / 3;
    let inverse_area = 1.0 / (w * w) as f64;

    let dxx = boxed(ii, r - l + 1, c - b, 2 * l - 1, w) - 3.0 * boxed(ii, r - l + 1, c - l / 2, 2 * l - 1, l);
    let dyy = boxed(ii, r - b, c - l + 1, w, 2 * l - 1) - 3.0 * boxed(ii, r - l / 2, c - l + 1, l, 2 * l - 1);
    let dxy = boxed(ii, r - l, c + 1, l, l) + boxed(ii, r + 1, c - l, l, l)
        - boxed(ii, r - l, c - l, l, l)
        - boxed(ii, r + 1, c + 1, l, l);

    HessianComponents { dxx: dxx * inverse_area, dyy: dyy * inverse_area, dxy: dxy * inverse_area }
}

/// `det(H) = Dxx·Dyy − (0.9·Dxy)²` at pixel `(x, y)`.
pub fn hessian_response(ii: &IntegralImage, x: i64, y: i64, filter_size: usize) -> f64 {
    hessian_components(ii, x, y, filter_size).determinant()
}
