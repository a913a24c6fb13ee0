// SPDX-License-Identifier: Apache-2.0

//! Fast-Hessian interest point detection and SURF-64 description.

mod descriptor;
mod detector;
mod hessian;

pub use descriptor::{compute_descriptor, haar_x, haar_y, orientation};
pub use detector::{detect_interest_points, detect_interest_points_with, extract};
pub use hessian::{filter_size, hessian_components, hessian_response, HessianComponents, DXY_WEIGHT};

use crate::DESCRIPTOR_LEN;

/// A detected feature with its SURF descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestPoint {
    pub x: f64,
    pub y: f64,
    /// Gaussian σ of the matched filter, in pixels.
    pub scale: f64,
    /// Radians in `[0, 2π)`.
    pub orientation: f64,
    /// Sign of the Hessian trace: `1` for dark blobs on a bright background, `-1` otherwise.
    pub laplacian_sign: i8,
    pub response: f64,
    pub descriptor: [f64; DESCRIPTOR_LEN],
}

impl InterestPoint {
    /// `true` when the descriptor is the all-zero vector of a flat neighborhood.
    pub fn is_degenerate(&self) -> bool {
        self.descriptor.iter().all(|&v| v == 0.0)
    }
}

/// How the per-image point budget is filled when there are more candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSelection {
    /// Keep the strongest responses.
    TopResponse,
    /// Keep a seeded uniform sample of the candidates.
    RandomSample { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub octaves: usize,
    pub intervals: usize,
    /// Sampling step of the first octave; doubles every octave.
    pub init_sample: usize,
    /// Minimum area-normalized Hessian determinant.
    pub threshold: f64,
    pub max_points: usize,
    /// Skip orientation assignment and use orientation 0.
    pub upright: bool,
    pub selection: PointSelection,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            octaves: 4,
            intervals: 4,
            init_sample: 2,
            threshold: 1e-4,
            max_points: 500,
            upright: false,
            selection: PointSelection::TopResponse,
        }
    }
}
