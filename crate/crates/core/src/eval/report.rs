// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::protocol::{ProtocolOptions, QueryOutcome};
use super::Denominator;

/// Column header of the report TSV.
pub const TSV_HEADER: &str = "category\tmap\tprecision\tn_queries\tcutoff";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalRow {
    pub category: String,
    pub map: f64,
    pub precision: f64,
    pub n_queries: usize,
}

impl EvalRow {
    /// Means of average precision and precision over `outcomes`.
    pub fn aggregate(category: &str, outcomes: &[QueryOutcome]) -> Self {
        let n = outcomes.len();
        let mean = |f: fn(&QueryOutcome) -> f64| {
            if n == 0 {
                0.0
            } else {
                outcomes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            category: category.to_string(),
            map: mean(|o| o.average_precision),
            precision: mean(|o| o.precision),
            n_queries: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub protocol: String,
    pub relevance_rule: String,
    pub cutoff: usize,
    pub denominator: Denominator,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(protocol: &str, relevance_rule: &str, options: &ProtocolOptions, rows: Vec<EvalRow>) -> Self {
        Self {
            protocol: protocol.to_string(),
            relevance_rule: relevance_rule.to_string(),
            cutoff: options.cutoff,
            denominator: options.denominator,
            rows,
        }
    }

    pub fn row(&self, category: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    /// Tab-separated rows under [`TSV_HEADER`]; fractions with 6 decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{:.6}\t{:.6}\t{}\t{}", r.category, r.map, r.precision, r.n_queries, self.cutoff);
        }
        out
    }

    /// Aligned table with percentages to two decimals.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.category.len()).max().unwrap_or(0).max("Category".len());
        let mut out =
            format!("{} protocol, top {} results, relevance: {}\n", self.protocol, self.cutoff, self.relevance_rule);
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>9}  {:>7}", "Category", "MAP (%)", "Prec. (%)", "Queries");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8.2}  {:>9.2}  {:>7}",
                r.category,
                r.map * 100.0,
                r.precision * 100.0,
                r.n_queries
            );
        }
        out
    }
}
