// SPDX-License-Identifier: Apache-2.0

//! Visual vocabulary: approximate k-means clustering and idf weights.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::log;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kdforest::{dist2, ForestParams, KdForest};
use crate::DESCRIPTOR_LEN;

/// A 64-component descriptor in the precision the dictionary stores.
pub type Descriptor = [f32; DESCRIPTOR_LEN];

/// 1-based index of a visual word in its dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct WordIndex(pub u32);

impl WordIndex {
    /// Index into 0-based storage.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_slot(slot: usize) -> Self {
        WordIndex(slot as u32 + 1)
    }
}

impl fmt::Display for WordIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How initial centroids are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Seeding {
    /// Seeded D²-weighted sampling (k-means++).
    #[default]
    PlusPlus,
    /// Seeded uniform sampling without replacement.
    Uniform,
}

/// Which images the idf values were computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum IdfSource {
    #[default]
    Training,
    Indexed,
    External,
}

impl IdfSource {
    pub fn code(self) -> u8 {
        match self {
            IdfSource::Training => 0,
            IdfSource::Indexed => 1,
            IdfSource::External => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(IdfSource::Training),
            1 => Some(IdfSource::Indexed),
            2 => Some(IdfSource::External),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BuildParams {
    pub k: usize,
    pub iterations: usize,
    /// Candidates retrieved from the forest per assignment query.
    pub nn_count: usize,
    /// Recorded in the dictionary metadata; not used by clustering.
    pub points_per_image: usize,
    pub seed: u64,
    pub forest: ForestParams,
    pub seeding: Seeding,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self {
            k: 10_000,
            iterations: 250,
            nn_count: 25,
            points_per_image: 500,
            seed: 0,
            forest: ForestParams::default(),
            seeding: Seeding::default(),
        }
    }
}

/// Provenance of a dictionary, stored alongside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BuildMeta {
    pub iterations: u32,
    pub iterations_run: u32,
    pub nn_count: u32,
    pub points_per_image: u32,
    /// Number of training images.
    pub corpus_size: u32,
    pub seed: u64,
    pub idf_source: IdfSource,
}

/// Descriptors grouped by the image they came from.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    descriptors: Vec<Descriptor>,
    image_ends: Vec<usize>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// All descriptors as a single image.
    pub fn flat(descriptors: Vec<Descriptor>) -> Self {
        let end = descriptors.len();
        Self { descriptors, image_ends: vec![end] }
    }

    pub fn push_image(&mut self, descriptors: impl IntoIterator<Item = Descriptor>) {
        self.descriptors.extend(descriptors);
        self.image_ends.push(self.descriptors.len());
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    pub fn image_count(&self) -> usize {
        self.image_ends.len()
    }

    /// Descriptor index ranges, one per image.
    pub fn image_ranges(&self) -> impl Iterator<Item = core::ops::Range<usize>> + '_ {
        let starts = core::iter::once(0).chain(self.image_ends.iter().copied());
        starts.zip(self.image_ends.iter().copied()).map(|(a, b)| a..b)
    }
}

/// A visual vocabulary. Immutable once built; the search forest is derived
/// deterministically from the centroids and the build seed.
#[derive(Debug, Clone)]
pub struct Dictionary {
    centroids: Vec<Descriptor>,
    idf: Vec<f32>,
    ann: ForestParams,
    meta: BuildMeta,
    forest: KdForest,
}

impl PartialEq for Dictionary {
    fn eq(&self, other: &Self) -> bool {
        self.centroids == other.centroids && self.idf == other.idf && self.ann == other.ann && self.meta == other.meta
    }
}

/// Per-iteration statistics of a dictionary build.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    /// Total squared distance of descriptors to their centroids after each update.
    pub distortion: Vec<f64>,
    pub iterations_run: usize,
    /// Final 0-based cluster of every training descriptor.
    pub assignments: Vec<u32>,
}

impl Dictionary {
    /// Assembles a dictionary from stored parts.
    pub fn from_parts(centroids: Vec<Descriptor>, idf: Vec<f32>, ann: ForestParams, meta: BuildMeta) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::invalid("dictionary needs at least one word"));
        }
        if idf.len() != centroids.len() {
            return Err(Error::invalid("idf length does not match dictionary size"));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite centroid component"));
        }
        if idf.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("idf values must be finite and non-negative"));
        }
        if ann.trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        let forest = KdForest::build(&centroids, ann.trees, meta.seed);
        Ok(Self { centroids, idf, ann, meta, forest })
    }

    pub fn size(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[Descriptor] {
        &self.centroids
    }

    pub fn centroid(&self, word: WordIndex) -> &Descriptor {
        &self.centroids[word.slot()]
    }

    pub fn idf(&self) -> &[f32] {
        &self.idf
    }

    pub fn idf_of(&self, word: WordIndex) -> f32 {
        self.idf[word.slot()]
    }

    pub fn ann_params(&self) -> ForestParams {
        self.ann
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    pub fn contains(&self, word: WordIndex) -> bool {
        word.0 >= 1 && word.slot() < self.centroids.len()
    }

    /// Replaces the idf vector, e.g. after recomputing it over an indexed corpus.
    pub fn with_idf(mut self, idf: Vec<f64>, source: IdfSource) -> Result<Self> {
        if idf.len() != self.centroids.len() {
            return Err(Error::invalid("idf length does not match dictionary size"));
        }
        self.idf = idf.into_iter().map(|v| v as f32).collect();
        self.meta.idf_source = source;
        Ok(self)
    }

    /// Same dictionary searched with different forest settings.
    pub fn with_ann(self, ann: ForestParams) -> Result<Self> {
        Self::from_parts(self.centroids, self.idf, ann, self.meta)
    }

    /// Nearest word using the dictionary's own search settings.
    pub fn assign_nearest_word(&self, descriptor: &Descriptor) -> Result<WordIndex> {
        self.assign_with(descriptor, self.meta.nn_count.max(1) as usize, self.ann.checks)
    }

    /// Nearest word with explicit search breadth and leaf-check budget
    /// (`None` = exact). Ties go to the lowest word index.
    pub fn assign_with(&self, descriptor: &Descriptor, breadth: usize, checks: Option<usize>) -> Result<WordIndex> {
        if descriptor.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite descriptor component"));
        }
        let n = self.forest.nearest(&self.centroids, descriptor, breadth, checks).expect("dictionary is never empty");
        Ok(WordIndex::from_slot(n.index))
    }
}

/// Computes `idf[w] = ln(N / n_w)` over `N` images, where `n_w` counts images
/// containing word `w`. Words that occur nowhere get `ln(N) + 1`.
pub fn compute_idf<'a, I>(corpus_word_sets: I, word_count: usize) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a BTreeSet<WordIndex>>,
{
    let mut doc_freq = vec![0usize; word_count];
    let mut images = 0usize;
    for set in corpus_word_sets {
        images += 1;
        for w in set {
            if w.0 == 0 || w.slot() >= word_count {
                return Err(Error::invalid(format!("word index {w} out of range 1..={word_count}")));
            }
            doc_freq[w.slot()] += 1;
        }
    }
    if images == 0 {
        return Err(Error::invalid("idf needs a non-empty corpus"));
    }
    let n = images as f64;
    Ok(doc_freq.into_iter().map(|df| if df == 0 { log(n) + 1.0 } else { log(n / df as f64) }).collect())
}

/// Initial centroid indices for `n` descriptors, `k` clusters and `seed`.
pub fn initial_centroids(descriptors: &[Descriptor], k: usize, seed: u64, seeding: Seeding) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match seeding {
        Seeding::Uniform => sample(&mut rng, descriptors.len(), k).into_vec(),
        Seeding::PlusPlus => plus_plus(descriptors, k, &mut rng),
    }
}

fn plus_plus(descriptors: &[Descriptor], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = descriptors.len();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut nearest: Vec<f64> = descriptors.iter().map(|d| dist2(d, &descriptors[first])).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // Every remaining descriptor duplicates a centroid.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        let c = descriptors[next];
        update_nearest(descriptors, &c, &mut nearest);
    }
    chosen
}

#[cfg(feature = "parallel")]
fn update_nearest(descriptors: &[Descriptor], c: &Descriptor, nearest: &mut [f64]) {
    use rayon::prelude::*;
    nearest.par_iter_mut().zip(descriptors.par_iter()).for_each(|(m, d)| *m = m.min(dist2(d, c)));
}

#[cfg(not(feature = "parallel"))]
fn update_nearest(descriptors: &[Descriptor], c: &Descriptor, nearest: &mut [f64]) {
    nearest.iter_mut().zip(descriptors.iter()).for_each(|(m, d)| *m = m.min(dist2(d, c)));
}

/// Clusters the training descriptors into `params.k` visual words and
/// computes idf over the training images.
pub fn build_dictionary(training: &TrainingSet, params: &BuildParams) -> Result<Dictionary> {
    build_dictionary_with_report(training, params).map(|(d, _)| d)
}

pub fn build_dictionary_with_report(training: &TrainingSet, params: &BuildParams) -> Result<(Dictionary, BuildReport)> {
    let data = training.descriptors();
    if params.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if params.iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    if data.len() < params.k {
        return Err(Error::invalid(format!("{} descriptors cannot form {} clusters", data.len(), params.k)));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite descriptor component"));
    }

    let k = params.k;
    let mut centroids: Vec<Descriptor> =
        initial_centroids(data, k, params.seed, params.seeding).into_iter().map(|i| data[i]).collect();
    let mut assignments = vec![u32::MAX; data.len()];
    let mut report = BuildReport::default();

    for iteration in 0..params.iterations {
        let forest = KdForest::build(&centroids, params.forest.trees, params.seed.wrapping_add(iteration as u64 + 1));
        let next = assign_all(data, &centroids, &forest, params.nn_count.max(1), params.forest.checks);
        let changed = next.iter().zip(assignments.iter()).filter(|(a, b)| a != b).count();
        assignments = next;
        report.iterations_run = iteration + 1;
        if changed == 0 {
            break;
        }
        centroids = update_centroids(data, &mut assignments, &centroids);
        report.distortion.push(distortion(data, &assignments, &centroids));
    }
    if report.distortion.is_empty() {
        report.distortion.push(distortion(data, &assignments, &centroids));
    }

    let mut word_sets: Vec<BTreeSet<WordIndex>> = Vec::with_capacity(training.image_count());
    for range in training.image_ranges() {
        word_sets.push(assignments[range].iter().map(|&a| WordIndex::from_slot(a as usize)).collect());
    }
    let idf = compute_idf(word_sets.iter(), k)?;

    let meta = BuildMeta {
        iterations: params.iterations as u32,
        iterations_run: report.iterations_run as u32,
        nn_count: params.nn_count as u32,
        points_per_image: params.points_per_image as u32,
        corpus_size: training.image_count() as u32,
        seed: params.seed,
        idf_source: IdfSource::Training,
    };
    let dict = Dictionary::from_parts(centroids, idf.into_iter().map(|v| v as f32).collect(), params.forest, meta)?;
    report.assignments = assignments;
    Ok((dict, report))
}

#[cfg(feature = "parallel")]
fn assign_all(
    data: &[Descriptor],
    centroids: &[Descriptor],
    forest: &KdForest,
    breadth: usize,
    checks: Option<usize>,
) -> Vec<u32> {
    use rayon::prelude::*;
    data.par_iter().map(|d| forest.nearest(centroids, d, breadth, checks).map_or(0, |n| n.index as u32)).collect()
}

#[cfg(not(feature = "parallel"))]
fn assign_all(
    data: &[Descriptor],
    centroids: &[Descriptor],
    forest: &KdForest,
    breadth: usize,
    checks: Option<usize>,
) -> Vec<u32> {
    data.iter().map(|d| forest.nearest(centroids, d, breadth, checks).map_or(0, |n| n.index as u32)).collect()
}

/// Recomputes centroids as assignment means. Empty clusters take the
/// descriptor farthest from its current centroid, which is reassigned to them.
fn update_centroids(data: &[Descriptor], assignments: &mut [u32], previous: &[Descriptor]) -> Vec<Descriptor> {
    let k = previous.len();
    let mut sums = vec![[0.0f64; DESCRIPTOR_LEN]; k];
    let mut counts = vec![0usize; k];
    for (d, &a) in data.iter().zip(assignments.iter()) {
        let a = a as usize;
        counts[a] += 1;
        for (s, &v) in sums[a].iter_mut().zip(d.iter()) {
            *s += f64::from(v);
        }
    }
    let mut centroids: Vec<Descriptor> = (0..k)
        .map(|c| {
            if counts[c] == 0 {
                previous[c]
            } else {
                let n = counts[c] as f64;
                core::array::from_fn(|i| (sums[c][i] / n) as f32)
            }
        })
        .collect();

    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        let mut far: Vec<(f64, usize)> = data
            .iter()
            .zip(assignments.iter())
            .enumerate()
            .map(|(i, (d, &a))| (dist2(d, &centroids[a as usize]), i))
            .collect();
        far.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut donors = far.into_iter().map(|(_, i)| i);
        for c in empty {
            let Some(i) = donors.by_ref().find(|&i| counts[assignments[i] as usize] > 1) else {
                break;
            };
            counts[assignments[i] as usize] -= 1;
            assignments[i] = c as u32;
            counts[c] = 1;
            centroids[c] = data[i];
        }
    }
    centroids
}

/// Total squared distance of every descriptor to its assigned centroid.
pub fn distortion(data: &[Descriptor], assignments: &[u32], centroids: &[Descriptor]) -> f64 {
    data.iter().zip(assignments.iter()).map(|(d, &a)| dist2(d, &centroids[a as usize])).sum()
}
