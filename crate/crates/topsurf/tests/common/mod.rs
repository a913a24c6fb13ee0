// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topsurf_core::encoder::{sort_by_weight, ImageDescriptor, VisualWordOccurrence};
use topsurf_core::WordIndex;

/// Random descriptor over words `1..=word_count`.
pub fn random_descriptor(rng: &mut ChaCha8Rng, id: &str, word_count: u32, max_words: usize) -> ImageDescriptor {
    let n = rng.random_range(1..=max_words.min(word_count as usize));
    let mut occurrences: Vec<VisualWordOccurrence> = sample(rng, word_count as usize, n)
        .into_iter()
        .map(|slot| {
            let mut locations: Vec<(f32, f32)> = (0..rng.random_range(1..=3))
                .map(|_| (rng.random_range(0..640) as f32, rng.random_range(0..480) as f32))
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
    sort_by_weight(&mut occurrences);
    ImageDescriptor { image_id: id.to_string(), occurrences, total_points: total as u32 }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
