// SPDX-License-Identifier: Apache-2.0

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::report::{EvalReport, EvalRow};
use super::{average_precision_with, precision, Denominator, Ranking};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::query::{region_query, whole_image_spec, QuerySpec};
use crate::UNTAGGED;

/// Default evaluation cutoff.
pub const DEFAULT_CUTOFF: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolOptions {
    pub cutoff: usize,
    pub denominator: Denominator,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self { cutoff: DEFAULT_CUTOFF, denominator: Denominator::Cutoff }
    }
}

/// How results of a region query are judged.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RelevanceRule {
    /// Relevant iff the result carries the source image's tag.
    #[default]
    TagMatch,
    /// Relevant iff the result is in the supplied set. `None` is an error at run time.
    Explicit(Option<BTreeSet<String>>),
}

impl RelevanceRule {
    pub fn name(&self) -> &'static str {
        match self {
            RelevanceRule::TagMatch => "tag-match",
            RelevanceRule::Explicit(_) => "explicit-set",
        }
    }
}

/// A region query and the report row it is aggregated into.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionQuery {
    /// Report row; defaults to the source image's tag.
    #[cfg_attr(feature = "serde", serde(default))]
    pub label: Option<String>,
    pub spec: QuerySpec,
}

/// Per-query result of a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub label: String,
    pub ranking: Ranking,
    pub average_precision: f64,
    pub precision: f64,
}

/// Judges a result list and scores it.
fn outcome(
    label: &str,
    query_id: &str,
    results: Vec<String>,
    relevant: impl Fn(&str) -> bool,
    relevant_total: usize,
    denominator: Denominator,
) -> Result<QueryOutcome> {
    let relevance = results.iter().map(|id| relevant(id)).collect();
    let ranking = Ranking::new(query_id, results, relevance, relevant_total)?;
    Ok(QueryOutcome {
        label: label.to_string(),
        average_precision: average_precision_with(&ranking, denominator),
        precision: precision(&ranking),
        ranking,
    })
}

/// Whole-image protocol for one category: every image carrying `category`
/// queries with all of its words; results sharing its tag are relevant. The
/// query image never appears in its own ranking.
pub fn run_whole_image_protocol(
    corpus: &impl Corpus,
    category: &str,
    options: &ProtocolOptions,
) -> Result<(EvalRow, Vec<QueryOutcome>)> {
    if options.cutoff == 0 {
        return Err(Error::invalid("cutoff must be at least 1"));
    }
    let members = corpus.tagged(category);
    if members.is_empty() {
        return Err(Error::invalid(format!("no images tagged {category:?}")));
    }
    let tag = corpus.tag(&members[0]).unwrap_or(category).to_string();
    let relevant_total = members.len() - 1;

    let mut outcomes = Vec::with_capacity(members.len());
    for id in members {
        let results = match whole_image_spec(id, corpus) {
            Ok(spec) => {
                region_query(&spec.with_limit(options.cutoff), corpus)?.into_iter().map(|r| r.image_id).collect()
            }
            // A query image without visual words retrieves nothing.
            Err(Error::InvalidQuery(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
        outcomes.push(outcome(
            &tag,
            id,
            results,
            |r| corpus.tag(r) == Some(tag.as_str()),
            relevant_total,
            options.denominator,
        )?);
    }
    Ok((EvalRow::aggregate(&tag, &outcomes), outcomes))
}

/// Runs the whole-image protocol for each category, in the given order.
pub fn run_whole_image_report(
    corpus: &impl Corpus,
    categories: &[&str],
    options: &ProtocolOptions,
) -> Result<EvalReport> {
    let rows = categories
        .iter()
        .map(|c| run_whole_image_protocol(corpus, c, options).map(|(row, _)| row))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new("whole-image", RelevanceRule::TagMatch.name(), options, rows))
}

/// Region protocol: each query runs with `limit = cutoff`; rows aggregate
/// queries by label, in ascending label order.
pub fn run_region_protocol(
    corpus: &impl Corpus,
    queries: &[RegionQuery],
    rule: &RelevanceRule,
    options: &ProtocolOptions,
) -> Result<(EvalReport, Vec<QueryOutcome>)> {
    if options.cutoff == 0 {
        return Err(Error::invalid("cutoff must be at least 1"));
    }
    if queries.is_empty() {
        return Err(Error::invalid("region protocol needs at least one query"));
    }
    let explicit = match rule {
        RelevanceRule::Explicit(None) => {
            return Err(Error::invalid("explicit relevance rule needs a relevant-image set"))
        }
        RelevanceRule::Explicit(Some(set)) => Some(set),
        RelevanceRule::TagMatch => None,
    };

    let mut outcomes = Vec::with_capacity(queries.len());
    for q in queries {
        let spec = q.spec.clone().with_limit(options.cutoff);
        let source = spec.source_image.as_str();
        let source_tag = corpus.tag(source).unwrap_or(UNTAGGED).to_string();
        let label = q.label.clone().unwrap_or_else(|| source_tag.clone());
        let results: Vec<String> = region_query(&spec, corpus)?.into_iter().map(|r| r.image_id).collect();
        let excluded = |id: &str| spec.exclude_source && id == source;

        let o = match explicit {
            Some(set) => {
                let total = set.iter().filter(|id| corpus.descriptor(id).is_some() && !excluded(id)).count();
                outcome(&label, source, results, |r| set.contains(r), total, options.denominator)?
            }
            None => {
                let total = corpus.tagged(&source_tag).iter().filter(|id| !excluded(id)).count();
                outcome(
                    &label,
                    source,
                    results,
                    |r| corpus.tag(r) == Some(source_tag.as_str()),
                    total,
                    options.denominator,
                )?
            }
        };
        outcomes.push(o);
    }

    let mut by_label: BTreeMap<&str, Vec<QueryOutcome>> = BTreeMap::new();
    for o in &outcomes {
        by_label.entry(o.label.as_str()).or_default().push(o.clone());
    }
    let rows = by_label.iter().map(|(label, os)| EvalRow::aggregate(label, os)).collect();
    Ok((EvalReport::new("region", rule.name(), options, rows), outcomes))
}
