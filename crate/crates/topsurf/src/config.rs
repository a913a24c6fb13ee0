// SPDX-License-Identifier: Apache-2.0

//! Engine configuration: one TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topsurf_core::kdforest::ForestParams;
use topsurf_core::surf::{DetectorConfig, PointSelection};
use topsurf_core::vocabulary::{BuildParams, Seeding};

use crate::error::{Error, IoContext, Result};
use crate::store::Layout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSettings {
    pub octaves: usize,
    pub intervals: usize,
    pub threshold: f64,
    pub max_points: usize,
    pub upright: bool,
    /// Keep a seeded random sample of the candidates instead of the strongest.
    pub random_sample: bool,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            octaves: d.octaves,
            intervals: d.intervals,
            threshold: d.threshold,
            max_points: d.max_points,
            upright: d.upright,
            random_sample: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnSettings {
    pub trees: usize,
    /// Leaf checks per query; 0 searches exhaustively.
    pub checks: usize,
}

impl Default for AnnSettings {
    fn default() -> Self {
        let f = ForestParams::default();
        Self { trees: f.trees, checks: f.checks.unwrap_or(0) }
    }
}

impl AnnSettings {
    pub fn forest(&self) -> ForestParams {
        ForestParams { trees: self.trees, checks: (self.checks > 0).then_some(self.checks) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSettings {
    pub k: usize,
    pub iterations: usize,
    pub nn_count: usize,
    pub uniform_seeding: bool,
}

impl Default for BuildSettings {
    fn default() -> Self {
        let b = BuildParams::default();
        Self { k: b.k, iterations: b.iterations, nn_count: b.nn_count, uniform_seeding: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySettings {
    pub lambda: f64,
    pub limit: usize,
}

impl Default for QuerySettings {
    fn default() -> Self {
        Self { lambda: 1.0, limit: topsurf_core::query::DEFAULT_LIMIT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub dictionary: PathBuf,
    pub index_root: PathBuf,
    pub image_root: PathBuf,
    pub layout: Layout,
    pub seed: u64,
    pub bind: String,
    pub static_dir: Option<PathBuf>,
    pub detector: DetectorSettings,
    pub ann: AnnSettings,
    pub build: BuildSettings,
    pub query: QuerySettings,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            dictionary: "dictionary.tsdc".into(),
            index_root: "index".into(),
            image_root: "images".into(),
            layout: Layout::PerWord,
            seed: 0,
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
            detector: DetectorSettings::default(),
            ann: AnnSettings::default(),
            build: BuildSettings::default(),
            query: QuerySettings::default(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn detector_config(&self) -> DetectorConfig {
        let d = &self.detector;
        DetectorConfig {
            octaves: d.octaves,
            intervals: d.intervals,
            threshold: d.threshold,
            max_points: d.max_points,
            upright: d.upright,
            selection: if d.random_sample {
                PointSelection::RandomSample { seed: self.seed }
            } else {
                PointSelection::TopResponse
            },
            ..DetectorConfig::default()
        }
    }

    pub fn build_params(&self) -> BuildParams {
        BuildParams {
            k: self.build.k,
            iterations: self.build.iterations,
            nn_count: self.build.nn_count,
            points_per_image: self.detector.max_points,
            seed: self.seed,
            forest: self.ann.forest(),
            seeding: if self.build.uniform_seeding { Seeding::Uniform } else { Seeding::PlusPlus },
        }
    }
}
