// SPDX-License-Identifier: Apache-2.0

//! Ranked-retrieval metrics and the evaluation protocols built on them.
//!
//! Average precision of a ranking of length `N` is
//! `Σ_{r=1..N} P(r)·rel(r) / D`, where `P(r)` is the precision of the top `r`
//! results and `D` defaults to `min(R, N)` for `R` relevant images in the
//! collection. The literal `D = R` variant is available as
//! [`Denominator::Relevant`].

mod protocol;
mod report;

pub use protocol::{
    run_region_protocol, run_whole_image_protocol, run_whole_image_report, ProtocolOptions, QueryOutcome, RegionQuery,
    RelevanceRule, DEFAULT_CUTOFF,
};
pub use report::{EvalReport, EvalRow};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Denominator used by [`average_precision`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum Denominator {
    /// `min(R, N)`.
    #[default]
    Cutoff,
    /// `R`, the number of relevant images in the collection.
    Relevant,
}

/// Binary-relevance ranking of one query, rank 1 first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub query_id: String,
    pub image_ids: Vec<String>,
    pub relevance: Vec<bool>,
    /// Relevant images in the collection for this query.
    pub relevant_total: usize,
}

impl Ranking {
    pub fn new(
        query_id: impl Into<String>,
        image_ids: Vec<String>,
        relevance: Vec<bool>,
        relevant_total: usize,
    ) -> Result<Self> {
        if image_ids.len() != relevance.len() {
            return Err(Error::invalid("relevance flags do not match ranking length"));
        }
        Ok(Self { query_id: query_id.into(), image_ids, relevance, relevant_total })
    }

    /// A ranking with anonymous ids, handy for metric tests.
    pub fn from_pattern(pattern: &[bool], relevant_total: usize) -> Self {
        Self {
            query_id: String::new(),
            image_ids: (0..pattern.len()).map(|i| format!("{i}")).collect(),
            relevance: pattern.to_vec(),
            relevant_total,
        }
    }

    /// Number retrieved, `N`.
    pub fn len(&self) -> usize {
        self.relevance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevance.is_empty()
    }

    /// The first `n` ranks as a ranking of its own.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            query_id: self.query_id.clone(),
            image_ids: self.image_ids[..n].to_vec(),
            relevance: self.relevance[..n].to_vec(),
            relevant_total: self.relevant_total,
        }
    }
}

/// Fraction of the top `r` results that are relevant. `1 ≤ r ≤ N`.
pub fn precision_at(ranking: &Ranking, r: usize) -> Result<f64> {
    if r == 0 || r > ranking.len() {
        return Err(Error::invalid(format!("rank {r} outside 1..={}", ranking.len())));
    }
    let hits = ranking.relevance[..r].iter().filter(|&&rel| rel).count();
    Ok(hits as f64 / r as f64)
}

/// Relevant fraction of everything retrieved; 0 for an empty ranking.
pub fn precision(ranking: &Ranking) -> f64 {
    if ranking.is_empty() {
        0.0
    } else {
        precision_at(ranking, ranking.len()).expect("non-empty ranking")
    }
}

/// Average precision with the default `min(R, N)` denominator.
pub fn average_precision(ranking: &Ranking) -> f64 {
    average_precision_with(ranking, Denominator::Cutoff)
}

/// Average precision; 0 when there is nothing relevant or nothing retrieved.
pub fn average_precision_with(ranking: &Ranking, denominator: Denominator) -> f64 {
    let n = ranking.len();
    let d = match denominator {
        Denominator::Cutoff => ranking.relevant_total.min(n),
        Denominator::Relevant => ranking.relevant_total,
    };
    if d == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in ranking.relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    // More hits than `d` can only come from an inconsistent `R`.
    (sum / d as f64).min(1.0)
}

/// Mean of [`average_precision_with`] over `rankings`.
pub fn mean_average_precision(rankings: &[Ranking], denominator: Denominator) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::invalid("mean average precision needs at least one ranking"));
    }
    let total: f64 = rankings.iter().map(|r| average_precision_with(r, denominator)).sum();
    Ok(total / rankings.len() as f64)
}
