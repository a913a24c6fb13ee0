// SPDX-License-Identifier: Apache-2.0

//! Region queries: positive/negative rectangles over a source image, ranked by
//! the number of distinct selected words each corpus image contains.
//!
//! `score = |P ∩ W| − λ·|N ∩ W|`, where `P` and `N` are the words of the
//! source inside positive and negative rectangles and `W` the words of the
//! candidate. Results are ordered by score, then by tf-idf cosine similarity
//! to the source, then by image id.
//!
//! Candidates come from the postings of `P`. Any image outside those postings
//! scores at most 0, so the rest of the corpus is only visited when fewer than
//! `limit` candidates score above 0.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::Corpus;
use crate::encoder::{descriptor_cosine, ImageDescriptor};
use crate::error::{Error, Result};
use crate::vocabulary::WordIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum Polarity {
    Positive,
    Negative,
}

/// Closed rectangle in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rect {
    pub x0: f32,
    pub y0: f32,
    pub x1: f32,
    pub y1: f32,
    pub polarity: Polarity,
}

impl Rect {
    /// Builds a rectangle, ordering the corners.
    pub fn new(xa: f32, ya: f32, xb: f32, yb: f32, polarity: Polarity) -> Result<Self> {
        if ![xa, ya, xb, yb].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidQuery("rectangle coordinates must be finite".into()));
        }
        Ok(Self { x0: xa.min(xb), y0: ya.min(yb), x1: xa.max(xb), y1: ya.max(yb), polarity })
    }

    pub fn positive(x0: f32, y0: f32, x1: f32, y1: f32) -> Self {
        Self { x0, y0, x1, y1, polarity: Polarity::Positive }
    }

    pub fn negative(x0: f32, y0: f32, x1: f32, y1: f32) -> Self {
        Self { x0, y0, x1, y1, polarity: Polarity::Negative }
    }

    pub fn is_valid(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite()) && self.x0 <= self.x1 && self.y0 <= self.y1
    }

    pub fn contains(&self, x: f32, y: f32) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }

    /// Smallest positive rectangle holding every location of `desc`.
    pub fn covering(desc: &ImageDescriptor) -> Option<Self> {
        let mut it = desc.occurrences.iter().flat_map(|o| o.locations.iter());
        let &(x, y) = it.next()?;
        let mut r = Rect::positive(x, y, x, y);
        for &(x, y) in it {
            r.x0 = r.x0.min(x);
            r.y0 = r.y0.min(y);
            r.x1 = r.x1.max(x);
            r.y1 = r.y1.max(y);
        }
        Some(r)
    }
}

/// How negative words affect candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum NegativeMode {
    /// Subtract `λ` per matched negative word.
    #[default]
    Penalty,
    /// Drop any image containing a negative word.
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuerySpec {
    pub source_image: String,
    pub rects: Vec<Rect>,
    pub limit: usize,
    pub negative_weight: f64,
    pub exclude_source: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub negative_mode: NegativeMode,
}

/// Default number of results returned by a query.
pub const DEFAULT_LIMIT: usize = 20;

impl QuerySpec {
    pub fn new(source_image: impl Into<String>, rects: Vec<Rect>) -> Self {
        Self {
            source_image: source_image.into(),
            rects,
            limit: DEFAULT_LIMIT,
            negative_weight: 1.0,
            exclude_source: true,
            negative_mode: NegativeMode::Penalty,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn with_negative_weight(mut self, lambda: f64) -> Self {
        self.negative_weight = lambda;
        self
    }

    pub fn with_exclude_source(mut self, exclude: bool) -> Self {
        self.exclude_source = exclude;
        self
    }

    pub fn with_negative_mode(mut self, mode: NegativeMode) -> Self {
        self.negative_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.limit == 0 {
            return Err(Error::InvalidQuery("limit must be at least 1".into()));
        }
        if !(self.negative_weight >= 0.0 && self.negative_weight.is_finite()) {
            return Err(Error::InvalidQuery("negative weight must be a non-negative number".into()));
        }
        if let Some(r) = self.rects.iter().find(|r| !r.is_valid()) {
            return Err(Error::InvalidQuery(format!("malformed rectangle {r:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankedResult {
    pub image_id: String,
    pub score: f64,
    /// Cosine similarity to the source, the first tie-breaker.
    pub similarity: f64,
    pub matched_positive: BTreeSet<WordIndex>,
    pub matched_negative: BTreeSet<WordIndex>,
}

/// Total result order: score desc, similarity desc, image id asc.
pub fn result_order(a: &RankedResult, b: &RankedResult) -> Ordering {
    b.score.total_cmp(&a.score).then(b.similarity.total_cmp(&a.similarity)).then(a.image_id.cmp(&b.image_id))
}

/// Words with at least one location inside a rectangle of the given polarity.
pub fn words_in_rects(desc: &ImageDescriptor, rects: &[Rect], polarity: Polarity) -> BTreeSet<WordIndex> {
    let selected: Vec<&Rect> = rects.iter().filter(|r| r.polarity == polarity).collect();
    desc.occurrences
        .iter()
        .filter(|o| o.locations.iter().any(|&(x, y)| selected.iter().any(|r| r.contains(x, y))))
        .map(|o| o.index)
        .collect()
}

struct Scorer<'a> {
    source: &'a ImageDescriptor,
    positive: BTreeSet<WordIndex>,
    negative: BTreeSet<WordIndex>,
    spec: &'a QuerySpec,
}

impl Scorer<'_> {
    /// `None` when the image is excluded from the ranking.
    fn score(&self, candidate: &ImageDescriptor) -> Option<RankedResult> {
        if self.spec.exclude_source && candidate.image_id == self.spec.source_image {
            return None;
        }
        let words: BTreeSet<WordIndex> = candidate.words().collect();
        let matched_positive: BTreeSet<WordIndex> = self.positive.intersection(&words).copied().collect();
        let matched_negative: BTreeSet<WordIndex> = self.negative.intersection(&words).copied().collect();
        if self.spec.negative_mode == NegativeMode::Hard && !matched_negative.is_empty() {
            return None;
        }
        let score = matched_positive.len() as f64 - self.spec.negative_weight * matched_negative.len() as f64;
        Some(RankedResult {
            image_id: candidate.image_id.clone(),
            score,
            similarity: descriptor_cosine(self.source, candidate),
            matched_positive,
            matched_negative,
        })
    }
}

/// Ranks corpus images for a rectangle selection on `spec.source_image`.
pub fn region_query(spec: &QuerySpec, corpus: &impl Corpus) -> Result<Vec<RankedResult>> {
    spec.validate()?;
    let source =
        corpus.descriptor(&spec.source_image).ok_or_else(|| Error::NotFound(format!("image {}", spec.source_image)))?;
    let positive = words_in_rects(source, &spec.rects, Polarity::Positive);
    if positive.is_empty() {
        return Err(Error::InvalidQuery("positive selection contains no visual words".into()));
    }
    let negative = words_in_rects(source, &spec.rects, Polarity::Negative);
    let scorer = Scorer { source, positive, negative, spec };

    let mut candidates: BTreeMap<&str, ()> = BTreeMap::new();
    for &w in &scorer.positive {
        for id in corpus.postings(w)? {
            candidates.insert(id.as_str(), ());
        }
    }
    let mut results: Vec<RankedResult> = Vec::with_capacity(candidates.len());
    for id in candidates.keys() {
        let desc = corpus.descriptor(id).ok_or_else(|| Error::NotFound(format!("descriptor of posted image {id}")))?;
        if let Some(r) = scorer.score(desc) {
            if r.score > 0.0 {
                results.push(r);
            }
        }
    }

    if results.len() < spec.limit {
        // Images scoring <= 0 may still fill the list.
        results.clear();
        for id in corpus.image_ids() {
            if let Some(desc) = corpus.descriptor(id) {
                if let Some(r) = scorer.score(desc) {
                    results.push(r);
                }
            }
        }
    }

    results.sort_by(result_order);
    results.truncate(spec.limit);
    Ok(results)
}

/// Uses every word of the source image as the positive selection.
pub fn whole_image_query(source: &str, corpus: &impl Corpus, limit: usize) -> Result<Vec<RankedResult>> {
    let spec = whole_image_spec(source, corpus)?.with_limit(limit);
    region_query(&spec, corpus)
}

/// The query spec equivalent to a whole-image query.
pub fn whole_image_spec(source: &str, corpus: &impl Corpus) -> Result<QuerySpec> {
    let desc = corpus.descriptor(source).ok_or_else(|| Error::NotFound(format!("image {source}")))?;
    let rect =
        Rect::covering(desc).ok_or_else(|| Error::InvalidQuery(format!("image {source} has no visual words")))?;
    Ok(QuerySpec::new(source, alloc::vec![rect]))
}
