// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::descriptor::{compute_descriptor, orientation};
use super::hessian::{filter_size, hessian_components};
use super::{DetectorConfig, InterestPoint, PointSelection};
use crate::error::{Error, Result};
use crate::image::{GrayscaleImage, IntegralImage, MIN_DETECTION_SIZE};
use crate::DESCRIPTOR_LEN;

/// Ratio between the Gaussian σ and the box filter side (1.2 / 9).
const SCALE_PER_FILTER: f64 = 1.2 / 9.0;

/// Determinant and trace sign sampled on a regular grid for one filter size.
struct ResponseLayer {
    width: usize,
    height: usize,
    step: usize,
    filter: usize,
    responses: Vec<f64>,
    laplacian: Vec<bool>,
}

impl ResponseLayer {
    fn build(ii: &IntegralImage, step: usize, filter: usize) -> Self {
        let width = ii.width() / step;
        let height = ii.height() / step;
        let mut responses = Vec::with_capacity(width * height);
        let mut laplacian = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                let h = hessian_components(ii, (c * step) as i64, (r * step) as i64, filter);
                responses.push(h.determinant());
                laplacian.push(h.trace() >= 0.0);
            }
        }
        Self { width, height, step, filter, responses, laplacian }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.responses[r * self.width + c]
    }
}

/// A scale-space extremum before orientation and description.
#[derive(Debug, Clone)]
struct Candidate {
    x: f64,
    y: f64,
    scale: f64,
    laplacian_sign: i8,
    response: f64,
}

/// Detects and describes interest points with the default detector settings
/// and the given point budget.
pub fn detect_interest_points(img: &GrayscaleImage, max_points: usize) -> Result<Vec<InterestPoint>> {
    let config = DetectorConfig { max_points, ..DetectorConfig::default() };
    detect_interest_points_with(img, &config)
}

/// Detects and describes interest points.
///
/// The result is sorted by response, strongest first, and holds at most
/// `config.max_points` entries.
pub fn detect_interest_points_with(img: &GrayscaleImage, config: &DetectorConfig) -> Result<Vec<InterestPoint>> {
    if img.width() < MIN_DETECTION_SIZE || img.height() < MIN_DETECTION_SIZE {
        return Err(Error::invalid("image is smaller than 32x32"));
    }
    let ii = IntegralImage::new(img);
    extract(&ii, config)
}

/// Detection and description on a precomputed integral image.
pub fn extract(ii: &IntegralImage, config: &DetectorConfig) -> Result<Vec<InterestPoint>> {
    if config.max_points == 0 {
        return Err(Error::invalid("max_points must be at least 1"));
    }
    if config.intervals < 3 || config.octaves == 0 || config.init_sample == 0 {
        return Err(Error::invalid("detector needs at least one octave of three intervals"));
    }
    let mut candidates = find_extrema(ii, config);
    candidates.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });

    if candidates.len() > config.max_points {
        match config.selection {
            PointSelection::TopResponse => candidates.truncate(config.max_points),
            PointSelection::RandomSample { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut keep = sample(&mut rng, candidates.len(), config.max_points).into_vec();
                keep.sort_unstable();
                candidates = keep.into_iter().map(|i| candidates[i].clone()).collect();
            }
        }
    }

    Ok(candidates
        .into_iter()
        .map(|c| {
            let mut p = InterestPoint {
                x: c.x,
                y: c.y,
                scale: c.scale,
                orientation: 0.0,
                laplacian_sign: c.laplacian_sign,
                response: c.response,
                descriptor: [0.0; DESCRIPTOR_LEN],
            };
            if !config.upright {
                p.orientation = orientation(ii, &p);
            }
            p.descriptor = compute_descriptor(ii, &p);
            p
        })
        .collect())
}

fn find_extrema(ii: &IntegralImage, config: &DetectorConfig) -> Vec<Candidate> {
    let mut out = Vec::new();
    for octave in 0..config.octaves {
        let step = config.init_sample << octave;
        if ii.width() / step < 3 || ii.height() / step < 3 {
            break;
        }
        let layers: Vec<ResponseLayer> =
            (0..config.intervals).map(|i| ResponseLayer::build(ii, step, filter_size(octave, i))).collect();
        for triple in layers.windows(3) {
            let (b, m, t) = (&triple[0], &triple[1], &triple[2]);
            let border = ((t.filter + 1) / (2 * t.step)).max(1);
            if t.height <= 2 * border + 1 || t.width <= 2 * border + 1 {
                continue;
            }
            for r in border + 1..t.height - border {
                for c in border + 1..t.width - border {
                    if !is_extremum(r, c, b, m, t, config.threshold) {
                        continue;
                    }
                    if let Some(cand) = interpolate(r, c, b, m, t, ii) {
                        out.push(cand);
                    }
                }
            }
        }
    }
    out
}

fn is_extremum(r: usize, c: usize, b: &ResponseLayer, m: &ResponseLayer, t: &ResponseLayer, threshold: f64) -> bool {
    let candidate = m.at(r, c);
    if candidate < threshold {
        return false;
    }
    for rr in r - 1..=r + 1 {
        for cc in c - 1..=c + 1 {
            if t.at(rr, cc) >= candidate || b.at(rr, cc) >= candidate {
                return false;
            }
            if (rr != r || cc != c) && m.at(rr, cc) >= candidate {
                return false;
            }
        }
    }
    true
}

/// Quadratic refinement of the extremum in (x, y, scale). Returns `None` when
/// the fitted offset leaves the sampling cell or the Hessian is singular.
fn interpolate(
    r: usize,
    c: usize,
    b: &ResponseLayer,
    m: &ResponseLayer,
    t: &ResponseLayer,
    ii: &IntegralImage,
) -> Option<Candidate> {
    let v = m.at(r, c);
    let dx = (m.at(r, c + 1) - m.at(r, c - 1)) / 2.0;
    let dy = (m.at(r + 1, c) - m.at(r - 1, c)) / 2.0;
    let ds = (t.at(r, c) - b.at(r, c)) / 2.0;

    let dxx = m.at(r, c + 1) + m.at(r, c - 1) - 2.0 * v;
    let dyy = m.at(r + 1, c) + m.at(r - 1, c) - 2.0 * v;
    let dss = t.at(r, c) + b.at(r, c) - 2.0 * v;
    let dxy = (m.at(r + 1, c + 1) - m.at(r + 1, c - 1) - m.at(r - 1, c + 1) + m.at(r - 1, c - 1)) / 4.0;
    let dxs = (t.at(r, c + 1) - t.at(r, c - 1) - b.at(r, c + 1) + b.at(r, c - 1)) / 4.0;
    let dys = (t.at(r + 1, c) - t.at(r - 1, c) - b.at(r + 1, c) + b.at(r - 1, c)) / 4.0;

    let h = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
    let offset = solve3(h, [-dx, -dy, -ds])?;
    if offset.iter().any(|o| !(o.abs() < 0.5)) {
        return None;
    }

    let step = m.step as f64;
    let x = (c as f64 + offset[0]) * step;
    let y = (r as f64 + offset[1]) * step;
    let filter_step = (m.filter - b.filter) as f64;
    let scale = SCALE_PER_FILTER * (m.filter as f64 + offset[2] * filter_step);
    if !(x >= 0.0 && y >= 0.0 && x < ii.width() as f64 && y < ii.height() as f64 && scale > 0.0) {
        return None;
    }
    Some(Candidate { x, y, scale, laplacian_sign: if m.laplacian[r * m.width + c] { 1 } else { -1 }, response: v })
}

/// Solves `a · x = rhs` by Cramer's rule.
fn solve3(a: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = rhs[row];
        }
        *xi = det(&m) / d;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve3_identity() {
        let x = solve3([[2.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 1.0]], [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, [0.5, 0.5, 3.0]);
        assert!(solve3([[0.0; 3]; 3], [1.0; 3]).is_none());
    }

    #[test]
    fn small_images_are_rejected() {
        let img = GrayscaleImage::from_fn(31, 64, |_, _| 0.5).unwrap();
        assert!(matches!(detect_interest_points(&img, 10), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_budget_is_rejected() {
        let img = GrayscaleImage::from_fn(64, 64, |_, _| 0.5).unwrap();
        assert!(detect_interest_points(&img, 0).is_err());
    }

    #[test]
    fn constant_image_has_no_points() {
        let img = GrayscaleImage::from_fn(64, 64, |_, _| 0.5).unwrap();
        assert!(detect_interest_points(&img, 500).unwrap().is_empty());
    }
}
