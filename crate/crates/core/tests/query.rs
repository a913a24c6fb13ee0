// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topsurf_core::encoder::ImageDescriptor;
use topsurf_core::query::{NegativeMode, Polarity, QuerySpec, Rect};
use topsurf_core::{region_query, whole_image_query, Corpus, Error, MemoryCorpus};

fn selected(desc: &ImageDescriptor, spec: &QuerySpec, polarity: Polarity) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for o in &desc.occurrences {
        for &(x, y) in &o.locations {
            for r in spec.rects.iter().filter(|r| r.polarity == polarity) {
                if r.x0 <= x && x <= r.x1 && r.y0 <= y && y <= r.y1 {
                    out.insert(o.index.0);
                }
            }
        }
    }
    out
}

fn cosine(a: &ImageDescriptor, b: &ImageDescriptor) -> f64 {
    let wa: BTreeMap<u32, f64> = a.occurrences.iter().map(|o| (o.index.0, o.tf * o.idf as f64)).collect();
    let wb: BTreeMap<u32, f64> = b.occurrences.iter().map(|o| (o.index.0, o.tf * o.idf as f64)).collect();
    let dot: f64 = wa.iter().filter_map(|(w, x)| wb.get(w).map(|y| x * y)).sum();
    let na = wa.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = wb.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Scores every image from scratch: `(id, score, similarity)` in rank order,
/// or `None` when the positive selection is empty.
fn brute_force(spec: &QuerySpec, corpus: &MemoryCorpus) -> Option<Vec<(String, f64, f64)>> {
    let source = corpus.descriptor(&spec.source_image).unwrap();
    let pos = selected(source, spec, Polarity::Positive);
    if pos.is_empty() {
        return None;
    }
    let neg = selected(source, spec, Polarity::Negative);
    let mut scored = Vec::new();
    for d in corpus.descriptors() {
        if spec.exclude_source && d.image_id == spec.source_image {
            continue;
        }
        let words: BTreeSet<u32> = d.occurrences.iter().map(|o| o.index.0).collect();
        let p = pos.intersection(&words).count() as f64;
        let n = neg.intersection(&words).count() as f64;
        if spec.negative_mode == NegativeMode::Hard && n > 0.0 {
            continue;
        }
        scored.push((d.image_id.clone(), p - spec.negative_weight * n, cosine(source, d)));
    }
    let positive: Vec<_> = scored.iter().filter(|s| s.1 > 0.0).cloned().collect();
    let mut pool = if positive.len() >= spec.limit { positive } else { scored };
    pool.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
    pool.truncate(spec.limit);
    Some(pool)
}

fn scores(spec: &QuerySpec, corpus: &MemoryCorpus) -> BTreeMap<String, f64> {
    let spec = spec.clone().with_limit(usize::MAX);
    region_query(&spec, corpus).unwrap().into_iter().map(|r| (r.image_id, r.score)).collect()
}

#[test]
fn region_query_matches_brute_force_scorer() {
    let corpus = common::random_corpus(11, 100, 300, 60);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut answered = 0;
    for i in 0..200 {
        let mut spec = common::random_spec(&mut rng, &corpus);
        if i % 5 == 0 {
            spec = spec.with_negative_mode(NegativeMode::Hard);
        }
        match (brute_force(&spec, &corpus), region_query(&spec, &corpus)) {
            (None, Err(Error::InvalidQuery(_))) => {}
            (Some(want), Ok(got)) => {
                answered += 1;
                assert_eq!(got.len(), want.len());
                for (g, w) in got.iter().zip(&want) {
                    assert_eq!(g.image_id, w.0, "spec {i}");
                    assert_eq!(g.score, w.1);
                    assert!((g.similarity - w.2).abs() < 1e-12);
                    assert_eq!(
                        g.score,
                        g.matched_positive.len() as f64 - spec.negative_weight * g.matched_negative.len() as f64
                    );
                }
            }
            (want, got) => panic!("spec {i}: oracle {want:?} vs {got:?}"),
        }
    }
    assert!(answered > 150);
}

#[test]
fn monotonicity_and_neutral_negatives() {
    let corpus = common::random_corpus(21, 100, 300, 60);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let spec = common::random_spec(&mut rng, &corpus);
        let Ok(_) = region_query(&spec, &corpus) else { continue };
        let before = scores(&spec, &corpus);

        let mut wider = spec.clone();
        wider.rects.push(common::random_rect(&mut rng, Polarity::Positive));
        let after = scores(&wider, &corpus);
        for (id, s) in &before {
            assert!(after[id] >= *s, "{id}: {} < {s}", after[id]);
        }

        let neutral = spec.clone().with_negative_weight(0.0);
        let mut plain = neutral.clone();
        plain.rects.retain(|r| r.polarity == Polarity::Positive);
        let a: Vec<_> = region_query(&neutral, &corpus).unwrap().into_iter().map(|r| (r.image_id, r.score)).collect();
        let b: Vec<_> = region_query(&plain, &corpus).unwrap().into_iter().map(|r| (r.image_id, r.score)).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn errors() {
    let corpus = common::random_corpus(1, 5, 50, 10);
    let spec = QuerySpec::new("missing", vec![Rect::positive(0.0, 0.0, 100.0, 100.0)]);
    assert!(matches!(region_query(&spec, &corpus), Err(Error::NotFound(_))));
    let spec = QuerySpec::new("img000", vec![Rect::negative(0.0, 0.0, 100.0, 100.0)]);
    assert!(matches!(region_query(&spec, &corpus), Err(Error::InvalidQuery(_))));
    let spec = QuerySpec::new("img000", vec![Rect::positive(0.0, 0.0, 100.0, 100.0)]).with_limit(0);
    assert!(region_query(&spec, &corpus).is_err());
    assert!(matches!(whole_image_query("nope", &corpus, 5), Err(Error::NotFound(_))));
}

#[test]
fn whole_image_query_ranks_identical_copy_first() {
    let mut corpus = common::random_corpus(3, 30, 200, 40);
    let mut copy = corpus.descriptor("img007").unwrap().clone();
    copy.image_id = "twin".into();
    corpus.insert(copy, "a").unwrap();
    let results = whole_image_query("img007", &corpus, 10).unwrap();
    assert_eq!(results[0].image_id, "twin");
    assert!((results[0].similarity - 1.0).abs() < 1e-12);
    assert!(results.iter().all(|r| r.image_id != "img007"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn results_are_sorted_and_bounded(seed in 0u64..10_000) {
        let corpus = common::random_corpus(seed, 20, 60, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = common::random_spec(&mut rng, &corpus);
        if let Ok(results) = region_query(&spec, &corpus) {
            prop_assert!(results.len() <= spec.limit);
            let expected = corpus.image_count() - usize::from(spec.exclude_source);
            prop_assert!(results.len() == spec.limit.min(expected) || results.iter().all(|r| r.score > 0.0));
            for w in results.windows(2) {
                prop_assert!(topsurf_core::query::result_order(&w[0], &w[1]).is_lt());
            }
        }
    }
}
