// SPDX-License-Identifier: Apache-2.0

//! Batch steps shared by the CLI and the acceptance runs: extraction,
//! dictionary building and indexing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use topsurf_core::encoder::{encode_image, to_dictionary_precision, ImageDescriptor, MAX_WORDS};
use topsurf_core::surf::{detect_interest_points_with, DetectorConfig, InterestPoint};
use topsurf_core::vocabulary::{build_dictionary_with_report, BuildParams, BuildReport, Dictionary, TrainingSet};
use topsurf_core::UNTAGGED;

use crate::error::{Error, IoContext, Result};
use crate::formats::{read_points, write_points};
use crate::imageio::{is_image_path, load_gray};
use crate::store::IndexStore;

pub const POINTS_EXTENSION: &str = "tsip";

/// Relative path with forward slashes.
pub fn relative_id(root: &Path, path: &Path) -> Result<String> {
    let rel = path
        .strip_prefix(root)
        .map_err(|_| Error::Config(format!("{} is outside {}", path.display(), root.display())))?;
    let parts: Option<Vec<&str>> = rel.components().map(|c| c.as_os_str().to_str()).collect();
    parts.map(|p| p.join("/")).ok_or_else(|| Error::format(path, "path is not UTF-8"))
}

/// Regular files under `dir`, sorted by path.
fn files_under(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::io(dir, e.into()))?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Images under `dir` as `(image_id, path)`, sorted by id. Other files are
/// skipped with a warning.
pub fn image_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for path in files_under(dir)? {
        if is_image_path(&path) {
            out.push((relative_id(dir, &path)?, path));
        } else {
            log::warn!("skipping non-image file {}", path.display());
        }
    }
    out.sort();
    Ok(out)
}

/// Point files under `dir` as `(image_id, path)`; the id drops the extension.
pub fn point_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let suffix = format!(".{POINTS_EXTENSION}");
    let mut out = Vec::new();
    for path in files_under(dir)? {
        let id = relative_id(dir, &path)?;
        if let Some(stem) = id.strip_suffix(&suffix) {
            out.push((stem.to_string(), path));
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractSummary {
    pub images: usize,
    pub points: usize,
    /// `(image_id, message)` of images that could not be processed.
    pub failures: Vec<(String, String)>,
}

pub fn extract_image(path: &Path, config: &DetectorConfig) -> Result<Vec<InterestPoint>> {
    let img = load_gray(path)?;
    Ok(detect_interest_points_with(&img, config)?)
}

/// Writes `out_dir/<image_id>.tsip` for every image under `image_dir`.
pub fn extract_dir(image_dir: &Path, out_dir: &Path, config: &DetectorConfig) -> Result<ExtractSummary> {
    let images = image_files(image_dir)?;
    std::fs::create_dir_all(out_dir).at(out_dir)?;
    let results: Vec<(String, Result<usize>)> = images
        .par_iter()
        .map(|(id, path)| {
            let r = extract_image(path, config).and_then(|points| {
                write_points(&out_dir.join(format!("{id}.{POINTS_EXTENSION}")), &points)?;
                Ok(points.len())
            });
            (id.clone(), r)
        })
        .collect();
    let mut summary = ExtractSummary::default();
    for (id, r) in results {
        match r {
            Ok(n) => {
                summary.images += 1;
                summary.points += n;
            }
            Err(Error::Io { path, source }) if path.starts_with(out_dir) => return Err(Error::Io { path, source }),
            Err(e) => {
                log::warn!("{id}: {e}");
                summary.failures.push((id, e.to_string()));
            }
        }
    }
    Ok(summary)
}

/// One training image per point file, degenerate descriptors dropped.
pub fn training_set(points_dir: &Path) -> Result<TrainingSet> {
    let mut training = TrainingSet::new();
    for (_, path) in point_files(points_dir)? {
        let points = read_points(&path)?;
        training.push_image(points.iter().filter(|p| !p.is_degenerate()).map(to_dictionary_precision));
    }
    Ok(training)
}

pub fn build_from_points(points_dir: &Path, params: &BuildParams) -> Result<(Dictionary, BuildReport)> {
    let training = training_set(points_dir)?;
    log::info!(
        "clustering {} descriptors from {} images into {} words",
        training.descriptors().len(),
        training.image_count(),
        params.k
    );
    Ok(build_dictionary_with_report(&training, params)?)
}

/// Where category tags come from.
#[derive(Debug, Clone, Default)]
pub enum TagSource {
    /// Every image is untagged.
    #[default]
    None,
    /// `image_id → tag`; unlisted images are untagged.
    Map(BTreeMap<String, String>),
    /// First path component of the image id; top-level files are untagged.
    Directories,
}

impl TagSource {
    pub fn tag_of(&self, image_id: &str) -> String {
        match self {
            TagSource::None => UNTAGGED.to_string(),
            TagSource::Map(m) => m.get(image_id).cloned().unwrap_or_else(|| UNTAGGED.to_string()),
            TagSource::Directories => match image_id.split_once('/') {
                Some((dir, _)) => dir.to_string(),
                None => UNTAGGED.to_string(),
            },
        }
    }
}

/// Reads `image_id TAB tag` lines; blank lines and `#` comments are ignored.
pub fn read_tags_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).at(path)?;
    let mut tags = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, format!("line {}: expected image_id<TAB>tag", n + 1)))?;
        tags.insert(id.to_string(), tag.trim().to_string());
    }
    Ok(tags)
}

/// What to index.
#[derive(Debug, Clone)]
pub enum IndexInput {
    /// Images, extracted on the fly.
    Images { dir: PathBuf, detector: DetectorConfig },
    /// Previously extracted point files.
    Points { dir: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IndexSummary {
    pub indexed: usize,
    pub failures: Vec<(String, String)>,
    pub images_in_index: usize,
}

/// Encodes every input and adds the batch to `store` in one update.
pub fn index_into(
    store: &mut IndexStore,
    dict: &Dictionary,
    input: &IndexInput,
    tags: &TagSource,
) -> Result<IndexSummary> {
    let files = match input {
        IndexInput::Images { dir, .. } => image_files(dir)?,
        IndexInput::Points { dir } => point_files(dir)?,
    };
    let encoded: Vec<(String, Result<ImageDescriptor>)> = files
        .par_iter()
        .map(|(id, path)| {
            let points = match input {
                IndexInput::Images { detector, .. } => extract_image(path, detector),
                IndexInput::Points { .. } => read_points(path),
            };
            let desc = points.and_then(|p| Ok(encode_image(dict, &p, id.as_str(), MAX_WORDS)?));
            (id.clone(), desc)
        })
        .collect();

    let mut summary = IndexSummary::default();
    let mut batch = Vec::with_capacity(encoded.len());
    for (id, desc) in encoded {
        match desc {
            Ok(d) => {
                let tag = tags.tag_of(&id);
                batch.push((d, tag));
            }
            Err(e) => {
                log::warn!("{id}: {e}");
                summary.failures.push((id, e.to_string()));
            }
        }
    }
    summary.indexed = batch.len();
    store.add_batch(batch)?;
    summary.images_in_index = store.manifest().images.len();
    Ok(summary)
}
