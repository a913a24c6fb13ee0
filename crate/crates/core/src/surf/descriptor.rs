// SPDX-License-Identifier: Apache-2.0

use core::f64::consts::{PI, TAU};

use libm::{atan2, cos, exp, round, sin, sqrt};

use super::InterestPoint;
use crate::image::{IntegralImage, PixelRect};
use crate::DESCRIPTOR_LEN;

/// Pre-normalization norm below which a descriptor is reported as all-zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

const ORIENTATION_WINDOW: f64 = PI / 3.0;
const ORIENTATION_STEP: f64 = 0.15;

#[inline]
fn boxed(ii: &IntegralImage, row: i64, col: i64, rows: i64, cols: i64) -> f64 {
    ii.box_sum_replicated(PixelRect::new(col, row, cols, rows))
}

/// Horizontal Haar wavelet of side `size` centred on `(row, col)`, normalized by its area.
pub fn haar_x(ii: &IntegralImage, row: i64, col: i64, size: i64) -> f64 {
    let half = size / 2;
    let raw = boxed(ii, row - half, col, size, half) - boxed(ii, row - half, col - half, size, half);
    raw / (size * size) as f64
}

/// Vertical Haar wavelet of side `size` centred on `(row, col)`, normalized by its area.
pub fn haar_y(ii: &IntegralImage, row: i64, col: i64, size: i64) -> f64 {
    let half = size / 2;
    let raw = boxed(ii, row, col - half, half, size) - boxed(ii, row - half, col - half, half, size);
    raw / (size * size) as f64
}

/// Angle of `(x, y)` in `[0, 2π)`.
fn angle(x: f64, y: f64) -> f64 {
    let a = atan2(y, x);
    let a = if a < 0.0 { a + TAU } else { a };
    if a >= TAU {
        0.0
    } else {
        a
    }
}

fn gaussian(x: f64, y: f64, sigma: f64) -> f64 {
    exp(-(x * x + y * y) / (2.0 * sigma * sigma)) / (2.0 * PI * sigma * sigma)
}

/// Dominant orientation: the largest summed Haar response over a sliding 60°
/// window, sampled on a disc of radius `6·scale`.
pub fn orientation(ii: &IntegralImage, point: &InterestPoint) -> f64 {
    let s = round(point.scale).max(1.0) as i64;
    let r = round(point.y) as i64;
    let c = round(point.x) as i64;

    let mut responses = [(0.0f64, 0.0f64, 0.0f64); 109];
    let mut n = 0;
    for i in -6i64..=6 {
        for j in -6i64..=6 {
            if i * i + j * j >= 36 {
                continue;
            }
            let g = gaussian(i as f64, j as f64, 2.5);
            let rx = g * haar_x(ii, r + j * s, c + i * s, 4 * s);
            let ry = g * haar_y(ii, r + j * s, c + i * s, 4 * s);
            responses[n] = (rx, ry, angle(rx, ry));
            n += 1;
        }
    }
    let responses = &responses[..n];

    let mut best = 0.0;
    let mut best_angle = 0.0;
    let mut start = 0.0;
    while start < TAU {
        let end = start + ORIENTATION_WINDOW;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(rx, ry, a) in responses {
            let inside = if end <= TAU { a > start && a < end } else { a > start || a < end - TAU };
            if inside {
                sx += rx;
                sy += ry;
            }
        }
        let magnitude = sx * sx + sy * sy;
        if magnitude > best {
            best = magnitude;
            best_angle = angle(sx, sy);
        }
        start += ORIENTATION_STEP;
    }
    best_angle
}

/// SURF-64 descriptor: a 4×4 grid of 5×5 samples over a `20·scale` window
/// aligned with the point orientation. Each cell contributes
/// `(Σdx, Σdy, Σ|dx|, Σ|dy|)` of Gaussian-weighted (σ = 3.3·scale) Haar responses
/// expressed in the rotated frame. The result has unit L2 norm, or is all-zero
/// when the raw norm is below [`DEGENERATE_NORM`].
pub fn compute_descriptor(ii: &IntegralImage, point: &InterestPoint) -> [f64; DESCRIPTOR_LEN] {
    let scale = point.scale;
    let (co, si) = (cos(point.orientation), sin(point.orientation));
    let haar_size = 2 * (round(scale).max(1.0) as i64);
    let sigma = 3.3 * scale;

    let mut desc = [0.0; DESCRIPTOR_LEN];
    let mut idx = 0;
    for i in 0..4 {
        for j in 0..4 {
            let (mut sdx, mut sdy, mut adx, mut ady) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..5 {
                for l in 0..5 {
                    // (u, v): sample offset in the keypoint frame.
                    let u = (-10.0 + (5 * i + k) as f64 + 0.5) * scale;
                    let v = (-10.0 + (5 * j + l) as f64 + 0.5) * scale;
                    let sx = point.x + u * co - v * si;
                    let sy = point.y + u * si + v * co;
                    let g = exp(-(u * u + v * v) / (2.0 * sigma * sigma));
                    let row = round(sy) as i64;
                    let col = round(sx) as i64;
                    let rx = haar_x(ii, row, col, haar_size);
                    let ry = haar_y(ii, row, col, haar_size);
                    let dx = g * (rx * co + ry * si);
                    let dy = g * (-rx * si + ry * co);
                    sdx += dx;
                    sdy += dy;
                    adx += dx.abs();
                    ady += dy.abs();
                }
            }
            desc[idx] = sdx;
            desc[idx + 1] = sdy;
            desc[idx + 2] = adx;
            desc[idx + 3] = ady;
            idx += 4;
        }
    }

    let norm = sqrt(desc.iter().map(|v| v * v).sum::<f64>());
    if !(norm >= DEGENERATE_NORM) {
        return [0.0; DESCRIPTOR_LEN];
    }
    desc.iter_mut().for_each(|v| *v /= norm);
    desc
}
