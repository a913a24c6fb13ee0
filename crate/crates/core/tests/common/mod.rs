// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topsurf_core::encoder::{ImageDescriptor, VisualWordOccurrence};
use topsurf_core::query::{Polarity, QuerySpec, Rect};
use topsurf_core::{MemoryCorpus, WordIndex};

pub const SIDE: f32 = 100.0;

/// Random descriptor over words `1..=word_count` with 1 to 3 locations per word.
pub fn random_descriptor(rng: &mut ChaCha8Rng, id: &str, word_count: u32, max_words: usize) -> ImageDescriptor {
    let n = rng.random_range(1..=max_words.min(word_count as usize));
    let mut occurrences: Vec<VisualWordOccurrence> = sample(rng, word_count as usize, n)
        .into_iter()
        .map(|slot| {
            let count = rng.random_range(1..=3);
            let mut locations: Vec<(f32, f32)> = (0..count)
                .map(|_| (rng.random_range(0.0..SIDE).round(), rng.random_range(0.0..SIDE).round()))
                .collect();
            locations.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            VisualWordOccurrence {
                index: WordIndex::from_slot(slot),
                tf: 0.0,
                idf: rng.random_range(0.1f32..5.0),
                locations,
            }
        })
        .collect();
    let total: usize = occurrences.iter().map(|o| o.locations.len()).sum();
    for o in &mut occurrences {
        o.tf = o.locations.len() as f64 / total as f64;
    }
    topsurf_core::encoder::sort_by_weight(&mut occurrences);
    ImageDescriptor { image_id: id.to_string(), occurrences, total_points: total as u32 }
}

pub fn random_corpus(seed: u64, images: usize, word_count: u32, max_words: usize) -> MemoryCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = MemoryCorpus::new(word_count);
    for i in 0..images {
        let d = random_descriptor(&mut rng, &format!("img{i:03}"), word_count, max_words);
        corpus.insert(d, ["a", "b", "c", "d"][i % 4]).unwrap();
    }
    corpus
}

pub fn random_rect(rng: &mut ChaCha8Rng, polarity: Polarity) -> Rect {
    let (xa, xb) = (rng.random_range(0.0..SIDE), rng.random_range(0.0..SIDE));
    let (ya, yb) = (rng.random_range(0.0..SIDE), rng.random_range(0.0..SIDE));
    Rect::new(xa, ya, xb, yb, polarity).unwrap()
}

/// A spec with 1 to 3 positive and 0 to 2 negative rectangles.
pub fn random_spec(rng: &mut ChaCha8Rng, corpus: &MemoryCorpus) -> QuerySpec {
    let ids: Vec<&str> = topsurf_core::Corpus::image_ids(corpus).collect();
    let source = ids[rng.random_range(0..ids.len())];
    let mut rects: Vec<Rect> = (0..rng.random_range(1..=3)).map(|_| random_rect(rng, Polarity::Positive)).collect();
    rects.extend((0..rng.random_range(0..=2)).map(|_| random_rect(rng, Polarity::Negative)));
    QuerySpec::new(source, rects)
        .with_limit(rng.random_range(1..=40))
        .with_negative_weight([0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)])
        .with_exclude_source(rng.random_bool(0.8))
}
