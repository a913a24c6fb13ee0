// SPDX-License-Identifier: Apache-2.0

//! Protocol runs over a stored index and their run directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topsurf_core::eval::{
    run_region_protocol, run_whole_image_report, EvalReport, ProtocolOptions, RegionQuery, RelevanceRule,
};
use topsurf_core::query::{NegativeMode, QuerySpec, Rect};
use topsurf_core::{Corpus, REFERENCE_CATEGORIES, UNTAGGED};

use crate::error::{Error, IoContext, Result};
use crate::formats::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    WholeImage,
    Region,
}

/// One entry of a region-query file (a JSON array of these).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionQueryEntry {
    #[serde(default)]
    pub label: Option<String>,
    pub source_image: String,
    pub rects: Vec<Rect>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub exclude_source: Option<bool>,
    #[serde(default)]
    pub negative_mode: Option<NegativeMode>,
}

impl RegionQueryEntry {
    pub fn to_query(&self) -> RegionQuery {
        let mut spec = QuerySpec::new(self.source_image.clone(), self.rects.clone());
        if let Some(l) = self.lambda {
            spec = spec.with_negative_weight(l);
        }
        if let Some(x) = self.exclude_source {
            spec = spec.with_exclude_source(x);
        }
        if let Some(m) = self.negative_mode {
            spec = spec.with_negative_mode(m);
        }
        RegionQuery { label: self.label.clone(), spec }
    }
}

pub fn read_region_queries(path: &Path) -> Result<Vec<RegionQuery>> {
    let text = std::fs::read_to_string(path).at(path)?;
    let entries: Vec<RegionQueryEntry> = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(entries.iter().map(RegionQueryEntry::to_query).collect())
}

/// Image ids, one per line.
pub fn read_id_set(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).at(path)?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

/// The reference categories present in the index, or else every tag except
/// the untagged one.
pub fn default_categories(corpus: &impl Corpus) -> Vec<String> {
    let present: Vec<String> =
        REFERENCE_CATEGORIES.iter().filter(|c| !corpus.tagged(c).is_empty()).map(|c| c.to_string()).collect();
    if !present.is_empty() {
        return present;
    }
    corpus.tags().filter(|t| *t != UNTAGGED).map(String::from).collect()
}

#[derive(Debug, Clone)]
pub struct EvaluateRequest {
    pub protocol: Protocol,
    pub categories: Vec<String>,
    pub options: ProtocolOptions,
    pub queries: Option<PathBuf>,
    pub relevant: Option<PathBuf>,
}

pub fn evaluate(corpus: &impl Corpus, req: &EvaluateRequest) -> Result<EvalReport> {
    match req.protocol {
        Protocol::WholeImage => {
            let cats: Vec<&str> = req.categories.iter().map(String::as_str).collect();
            Ok(run_whole_image_report(corpus, &cats, &req.options)?)
        }
        Protocol::Region => {
            let path = req.queries.as_ref().ok_or_else(|| Error::Config("region protocol needs --queries".into()))?;
            let queries = read_region_queries(path)?;
            let rule = match &req.relevant {
                Some(p) => RelevanceRule::Explicit(Some(read_id_set(p)?)),
                None => RelevanceRule::TagMatch,
            };
            Ok(run_region_protocol(corpus, &queries, &rule, &req.options)?.0)
        }
    }
}

/// Writes `report.tsv`, `report.txt` and `config.json` into `dir`.
pub fn write_run_dir(dir: &Path, report: &EvalReport, config: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    write_atomic(&dir.join("report.tsv"), report.to_tsv().as_bytes())?;
    write_atomic(&dir.join("report.txt"), report.to_table().as_bytes())?;
    let mut json = serde_json::to_string_pretty(config).expect("config serializes");
    json.push('\n');
    write_atomic(&dir.join("config.json"), json.as_bytes())
}
