// SPDX-License-Identifier: Apache-2.0

//! Core algorithms of a bag-of-visual-words image retrieval engine.
//!
//! The pipeline is:
//!
//! 1. [`surf`] detects Fast-Hessian interest points on an [`image::IntegralImage`]
//!    and describes each one with a 64-component SURF vector.
//! 2. [`vocabulary`] clusters descriptors into a [`vocabulary::Dictionary`] of
//!    visual words (approximate k-means over a randomized [`kdforest::KdForest`])
//!    and computes per-word idf.
//! 3. [`encoder`] turns an image's points into an [`encoder::ImageDescriptor`]:
//!    the top visual words by tf-idf weight, each with its occurrence locations.
//! 4. [`query`] selects the words inside positive/negative rectangles and ranks
//!    a [`corpus::Corpus`] by matched-word counts.
//! 5. [`eval`] scores rankings with average precision and runs the whole-image
//!    and region evaluation protocols.
//!
//! The crate is `no_std` (it needs `alloc`). Storage, file formats and the
//! CLI live in the companion `topsurf` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod image;
pub mod kdforest;
pub mod query;
pub mod surf;
pub mod vocabulary;

pub use corpus::{Corpus, MemoryCorpus};
pub use encoder::{encode_image, ImageDescriptor, VisualWordOccurrence};
pub use error::{Error, Result};
pub use image::{GrayscaleImage, IntegralImage, PixelRect};
pub use query::{region_query, whole_image_query, Polarity, QuerySpec, RankedResult, Rect};
pub use surf::{detect_interest_points, DetectorConfig, InterestPoint};
pub use vocabulary::{build_dictionary, BuildParams, Descriptor, Dictionary, WordIndex};

/// Number of components in a SURF descriptor.
pub const DESCRIPTOR_LEN: usize = 64;

/// Tag given to images that carry no category.
pub const UNTAGGED: &str = "untagged";

/// The eight image categories of the reference experiments.
pub const REFERENCE_CATEGORIES: [&str; 8] =
    ["airplane", "beach", "motorbike", "forest", "elephant", "horse", "bus", "building"];
