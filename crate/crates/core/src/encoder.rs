// SPDX-License-Identifier: Apache-2.0

//! Per-image visual-word descriptors.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use libm::sqrt;

use crate::error::Result;
use crate::surf::InterestPoint;
use crate::vocabulary::{Descriptor, Dictionary, WordIndex};

/// Default number of visual words kept per image.
pub const MAX_WORDS: usize = 100;

/// One visual word of an image with every location it was observed at.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisualWordOccurrence {
    pub index: WordIndex,
    /// `locations.len() / total_points` of the owning descriptor.
    pub tf: f64,
    pub idf: f32,
    /// `(x, y)` image coordinates, sorted.
    pub locations: Vec<(f32, f32)>,
}

impl VisualWordOccurrence {
    pub fn weight(&self) -> f64 {
        self.tf * f64::from(self.idf)
    }

    pub fn contains_location_in(&self, x0: f32, y0: f32, x1: f32, y1: f32) -> bool {
        self.locations.iter().any(|&(x, y)| x0 <= x && x <= x1 && y0 <= y && y <= y1)
    }
}

/// The visual-word descriptor of one image: at most `max_words` occurrences,
/// heaviest tf·idf first, ties by ascending word index.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageDescriptor {
    pub image_id: String,
    pub occurrences: Vec<VisualWordOccurrence>,
    /// Assigned (non-degenerate) points before truncation.
    pub total_points: u32,
}

impl ImageDescriptor {
    pub fn empty(image_id: impl Into<String>) -> Self {
        Self { image_id: image_id.into(), occurrences: Vec::new(), total_points: 0 }
    }

    pub fn words(&self) -> impl Iterator<Item = WordIndex> + '_ {
        self.occurrences.iter().map(|o| o.index)
    }

    pub fn get(&self, word: WordIndex) -> Option<&VisualWordOccurrence> {
        self.occurrences.iter().find(|o| o.index == word)
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    fn norm(&self) -> f64 {
        sqrt(self.occurrences.iter().map(|o| o.weight() * o.weight()).sum())
    }
}

/// Narrows a point descriptor to dictionary precision.
pub fn to_dictionary_precision(point: &InterestPoint) -> Descriptor {
    core::array::from_fn(|i| point.descriptor[i] as f32)
}

/// Assigns every non-degenerate point to its nearest word, groups by word and
/// keeps the `max_words` heaviest words by tf·idf.
pub fn encode_image(
    dict: &Dictionary,
    points: &[InterestPoint],
    image_id: impl Into<String>,
    max_words: usize,
) -> Result<ImageDescriptor> {
    let mut groups: BTreeMap<WordIndex, Vec<(f32, f32)>> = BTreeMap::new();
    let mut total = 0u32;
    for p in points.iter().filter(|p| !p.is_degenerate()) {
        let word = dict.assign_nearest_word(&to_dictionary_precision(p))?;
        groups.entry(word).or_default().push((p.x as f32, p.y as f32));
        total += 1;
    }
    Ok(descriptor_from_groups(dict, groups, total, image_id.into(), max_words))
}

/// Builds a descriptor from pre-assigned word locations.
pub fn encode_assigned(
    dict: &Dictionary,
    assigned: impl IntoIterator<Item = (WordIndex, (f32, f32))>,
    image_id: impl Into<String>,
    max_words: usize,
) -> ImageDescriptor {
    let mut groups: BTreeMap<WordIndex, Vec<(f32, f32)>> = BTreeMap::new();
    let mut total = 0u32;
    for (w, loc) in assigned {
        groups.entry(w).or_default().push(loc);
        total += 1;
    }
    descriptor_from_groups(dict, groups, total, image_id.into(), max_words)
}

fn descriptor_from_groups(
    dict: &Dictionary,
    groups: BTreeMap<WordIndex, Vec<(f32, f32)>>,
    total: u32,
    image_id: String,
    max_words: usize,
) -> ImageDescriptor {
    let mut occurrences: Vec<VisualWordOccurrence> = groups
        .into_iter()
        .map(|(index, mut locations)| {
            locations.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            VisualWordOccurrence {
                index,
                tf: locations.len() as f64 / f64::from(total),
                idf: dict.idf_of(index),
                locations,
            }
        })
        .collect();
    sort_by_weight(&mut occurrences);
    occurrences.truncate(max_words);
    ImageDescriptor { image_id, occurrences, total_points: total }
}

/// Orders occurrences by weight descending, then word index ascending.
pub fn sort_by_weight(occurrences: &mut [VisualWordOccurrence]) {
    occurrences.sort_by(|a, b| b.weight().total_cmp(&a.weight()).then(a.index.cmp(&b.index)));
}

/// Cosine similarity of the sparse tf·idf vectors; 0 when either is empty or zero.
pub fn descriptor_cosine(a: &ImageDescriptor, b: &ImageDescriptor) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

fn dot(a: &ImageDescriptor, b: &ImageDescriptor) -> f64 {
    let mut dot = 0.0;
    for oa in &a.occurrences {
        if let Some(ob) = b.get(oa.index) {
            dot += oa.weight() * ob.weight();
        }
    }
    dot
}
