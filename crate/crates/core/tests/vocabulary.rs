// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use topsurf_core::kdforest::{dist2, ForestParams, KdForest};
use topsurf_core::vocabulary::{
    build_dictionary, build_dictionary_with_report, compute_idf, initial_centroids, BuildParams, Descriptor,
    TrainingSet,
};
use topsurf_core::WordIndex;

fn random_mean(rng: &mut ChaCha8Rng) -> Descriptor {
    std::array::from_fn(|_| rng.random_range(-1.0f32..1.0))
}

/// `per_cluster` samples around each mean, interleaved cluster by cluster.
fn mixture(means: &[Descriptor], per_cluster: usize, sigma: f32, rng: &mut ChaCha8Rng) -> Vec<(usize, Descriptor)> {
    let noise = Normal::new(0.0f32, sigma).unwrap();
    let mut out = Vec::with_capacity(means.len() * per_cluster);
    for _ in 0..per_cluster {
        for (c, m) in means.iter().enumerate() {
            out.push((c, std::array::from_fn(|i| m[i] + noise.sample(rng))));
        }
    }
    out
}

/// Exact nearest centroid, lowest index on ties.
fn brute_nearest(centroids: &[Descriptor], q: &Descriptor) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(c, q);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Plain Lloyd's iteration with exhaustive assignment, from the given start.
fn lloyd(data: &[Descriptor], mut centroids: Vec<Descriptor>, max_iter: usize) -> (Vec<Descriptor>, f64) {
    let mut assign = vec![usize::MAX; data.len()];
    for _ in 0..max_iter {
        let next: Vec<usize> = data.iter().map(|d| brute_nearest(&centroids, d)).collect();
        if next == assign {
            break;
        }
        assign = next;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Descriptor> = data.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(d, _)| d).collect();
            if members.is_empty() {
                continue;
            }
            *centroid = std::array::from_fn(|i| {
                (members.iter().map(|m| f64::from(m[i])).sum::<f64>() / members.len() as f64) as f32
            });
        }
    }
    let cost = data.iter().zip(&assign).map(|(d, &a)| dist2(d, &centroids[a])).sum();
    (centroids, cost)
}

fn params(k: usize, seed: u64) -> BuildParams {
    BuildParams { k, iterations: 100, seed, ..BuildParams::default() }
}

#[test]
fn three_gaussians_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let means: Vec<Descriptor> = (0..3).map(|_| random_mean(&mut rng)).collect();
    let samples = mixture(&means, 300, 0.03, &mut rng);
    let data: Vec<Descriptor> = samples.iter().map(|s| s.1).collect();
    let training = TrainingSet::flat(data.clone());

    for seed in 0..5 {
        let (dict, report) = build_dictionary_with_report(&training, &params(3, seed)).unwrap();
        for m in &means {
            let err = dict.centroids().iter().map(|c| dist2(c, m).sqrt()).fold(f64::INFINITY, f64::min);
            assert!(err < 0.05, "seed {seed}: centroid error {err}");
        }

        let start =
            initial_centroids(&data, 3, seed, BuildParams::default().seeding).iter().map(|&i| data[i]).collect();
        let (_, oracle) = lloyd(&data, start, 100);
        let ours = *report.distortion.last().unwrap();
        assert!((ours - oracle).abs() <= 0.05 * oracle, "seed {seed}: {ours} vs {oracle}");
    }
}

#[test]
fn builds_are_byte_identical_for_a_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let means: Vec<Descriptor> = (0..6).map(|_| random_mean(&mut rng)).collect();
    let data: Vec<Descriptor> = mixture(&means, 50, 0.2, &mut rng).into_iter().map(|s| s.1).collect();
    let training = TrainingSet::flat(data);
    let bits = |d: &topsurf_core::Dictionary| -> Vec<u32> {
        d.centroids().iter().flatten().chain(d.idf().iter()).map(|v| v.to_bits()).collect()
    };
    let a = build_dictionary(&training, &params(10, 42)).unwrap();
    let b = build_dictionary(&training, &params(10, 42)).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a, b);
    let c = build_dictionary(&training, &params(10, 43)).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn exact_search_never_increases_distortion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let means: Vec<Descriptor> = (0..8).map(|_| random_mean(&mut rng)).collect();
    let data: Vec<Descriptor> = mixture(&means, 40, 0.4, &mut rng).into_iter().map(|s| s.1).collect();
    let p = BuildParams { forest: ForestParams { trees: 4, checks: None }, ..params(12, 1) };
    let (_, report) = build_dictionary_with_report(&TrainingSet::flat(data), &p).unwrap();
    assert!(report.distortion.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{:?}", report.distortion);
}

/// Training data and fresh queries drawn from the same 40-component mixture.
fn ann_fixture() -> (topsurf_core::Dictionary, Vec<Descriptor>) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let means: Vec<Descriptor> = (0..40).map(|_| random_mean(&mut rng)).collect();
    let data: Vec<Descriptor> = mixture(&means, 50, 0.15, &mut rng).into_iter().map(|s| s.1).collect();
    let dict = build_dictionary(&TrainingSet::flat(data), &BuildParams { iterations: 20, ..params(100, 9) }).unwrap();
    let queries = mixture(&means, 25, 0.15, &mut rng).into_iter().map(|s| s.1).collect();
    (dict, queries)
}

#[test]
fn approximate_assignment_matches_linear_scan() {
    let (dict, queries) = ann_fixture();
    assert_eq!(dict.size(), 100);
    assert_eq!(queries.len(), 1000);
    let nn = dict.meta().nn_count as usize;
    let mut agree = 0;
    for q in &queries {
        let truth = brute_nearest(dict.centroids(), q);
        if dict.assign_with(q, nn, Some(32)).unwrap().slot() == truth {
            agree += 1;
        }
        assert_eq!(dict.assign_with(q, nn, None).unwrap().slot(), truth);
    }
    assert!(agree >= 950, "agreement {agree}/1000");
    let default_agree = queries
        .iter()
        .filter(|q| dict.assign_nearest_word(q).unwrap().slot() == brute_nearest(dict.centroids(), q))
        .count();
    assert_eq!(default_agree, agree);
}

#[test]
fn forest_knn_matches_sorted_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<Descriptor> = (0..300).map(|_| random_mean(&mut rng)).collect();
    let forest = KdForest::build(&points, 4, 2);
    for _ in 0..50 {
        let q = random_mean(&mut rng);
        let got: Vec<usize> = forest.knn(&points, &q, 10, None).iter().map(|n| n.index).collect();
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (dist2(p, &q), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: Vec<usize> = all[..10].iter().map(|p| p.1).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn training_idf_follows_word_spread() {
    // Image i holds descriptors near means 0..=i, so word spread is graded.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let means: Vec<Descriptor> = (0..4).map(|_| random_mean(&mut rng)).collect();
    let mut training = TrainingSet::new();
    for i in 0..4 {
        training.push_image(mixture(&means[..=i], 10, 0.01, &mut rng).into_iter().map(|s| s.1));
    }
    let dict = build_dictionary(&training, &params(4, 0)).unwrap();
    for (m, mean) in means.iter().enumerate() {
        let w = WordIndex::from_slot(brute_nearest(dict.centroids(), mean));
        let expected = (4.0f64 / (4 - m) as f64).ln() as f32;
        assert!((dict.idf_of(w) - expected).abs() < 1e-6);
    }
    assert_eq!(dict.meta().corpus_size, 4);
}

proptest! {
    #[test]
    fn idf_is_antitone_in_document_frequency(
        sets in prop::collection::vec(prop::collection::btree_set(0u32..12, 0..12), 1..30)
    ) {
        let sets: Vec<BTreeSet<WordIndex>> =
            sets.into_iter().map(|s| s.into_iter().map(|w| WordIndex::from_slot(w as usize)).collect()).collect();
        let idf = compute_idf(sets.iter(), 12).unwrap();
        let df: Vec<usize> =
            (0..12).map(|w| sets.iter().filter(|s| s.contains(&WordIndex::from_slot(w))).count()).collect();
        for a in 0..12 {
            prop_assert!(idf[a] >= 0.0);
            for b in 0..12 {
                if df[a] < df[b] {
                    prop_assert!(idf[a] > idf[b]);
                }
                if df[a] == df[b] {
                    prop_assert_eq!(idf[a], idf[b]);
                }
            }
        }
    }
}
