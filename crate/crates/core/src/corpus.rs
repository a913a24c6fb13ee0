// SPDX-License-Identifier: Apache-2.0

//! Read access to indexed images, postings and category tags.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::ImageDescriptor;
use crate::error::{Error, Result};
use crate::vocabulary::WordIndex;

/// Committed, read-only view of an indexed corpus.
pub trait Corpus {
    /// Dictionary size `K`; valid words are `1..=K`.
    fn word_count(&self) -> u32;

    fn descriptor(&self, image_id: &str) -> Option<&ImageDescriptor>;

    /// Image ids containing `word`, ascending.
    fn postings(&self, word: WordIndex) -> Result<&[String]>;

    /// Every image id, ascending.
    fn image_ids(&self) -> impl Iterator<Item = &str>;

    fn image_count(&self) -> usize;

    fn tag(&self, image_id: &str) -> Option<&str>;

    /// Image ids carrying `tag`, ascending. Unknown tags give an empty slice.
    fn tagged(&self, tag: &str) -> &[String];

    /// Every tag in use, ascending.
    fn tags(&self) -> impl Iterator<Item = &str>;
}

/// Normalizes a category tag: trimmed, lowercase, no whitespace.
pub fn normalize_tag(tag: &str) -> Result<String> {
    let t = tag.trim().to_lowercase();
    if t.is_empty() || t.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("invalid tag {tag:?}")));
    }
    Ok(t)
}

/// In-memory corpus. Also the committed-state mirror of the on-disk store.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryCorpus {
    word_count: u32,
    descriptors: BTreeMap<String, ImageDescriptor>,
    postings: Vec<Vec<String>>,
    tags: BTreeMap<String, String>,
    by_tag: BTreeMap<String, Vec<String>>,
}

fn insert_sorted(list: &mut Vec<String>, id: &str) {
    if let Err(pos) = list.binary_search_by(|p| p.as_str().cmp(id)) {
        list.insert(pos, id.to_string());
    }
}

fn remove_sorted(list: &mut Vec<String>, id: &str) {
    if let Ok(pos) = list.binary_search_by(|p| p.as_str().cmp(id)) {
        list.remove(pos);
    }
}

impl MemoryCorpus {
    pub fn new(word_count: u32) -> Self {
        Self {
            word_count,
            descriptors: BTreeMap::new(),
            postings: vec![Vec::new(); word_count as usize],
            tags: BTreeMap::new(),
            by_tag: BTreeMap::new(),
        }
    }

    fn check_word(&self, word: WordIndex) -> Result<()> {
        if word.0 == 0 || word.0 > self.word_count {
            return Err(Error::invalid(format!("word {} outside 1..={}", word.0, self.word_count)));
        }
        Ok(())
    }

    /// Adds or replaces an image. Postings of words the previous version had
    /// and the new one lacks are cleared.
    pub fn insert(&mut self, descriptor: ImageDescriptor, tag: &str) -> Result<()> {
        let tag = normalize_tag(tag)?;
        for w in descriptor.words() {
            self.check_word(w)?;
        }
        let id = descriptor.image_id.clone();
        self.remove(&id);
        for w in descriptor.words() {
            insert_sorted(&mut self.postings[w.slot()], &id);
        }
        insert_sorted(self.by_tag.entry(tag.clone()).or_default(), &id);
        self.tags.insert(id.clone(), tag);
        self.descriptors.insert(id, descriptor);
        Ok(())
    }

    /// Removes an image; returns its descriptor if it was present.
    pub fn remove(&mut self, image_id: &str) -> Option<ImageDescriptor> {
        let old = self.descriptors.remove(image_id)?;
        for w in old.words() {
            remove_sorted(&mut self.postings[w.slot()], image_id);
        }
        if let Some(tag) = self.tags.remove(image_id) {
            if let Some(list) = self.by_tag.get_mut(&tag) {
                remove_sorted(list, image_id);
                if list.is_empty() {
                    self.by_tag.remove(&tag);
                }
            }
        }
        Some(old)
    }

    /// Assembles a corpus whose postings were loaded separately (e.g. from
    /// per-word files). No consistency check is made; see [`Self::verify`].
    pub fn from_parts(
        word_count: u32,
        descriptors: BTreeMap<String, ImageDescriptor>,
        tags: BTreeMap<String, String>,
        mut postings: Vec<Vec<String>>,
    ) -> Result<Self> {
        if postings.len() != word_count as usize {
            return Err(Error::invalid("postings table does not match the word count"));
        }
        postings.iter_mut().for_each(|p| {
            p.sort();
            p.dedup();
        });
        let mut by_tag: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (id, tag) in &tags {
            insert_sorted(by_tag.entry(tag.clone()).or_default(), id);
        }
        Ok(Self { word_count, descriptors, postings, tags, by_tag })
    }

    /// Checks `w ∈ words(i) ⇔ i ∈ postings(w)` for every image and word, and
    /// that every image carries a tag.
    pub fn verify(&self) -> Result<()> {
        let mut expected = vec![Vec::<String>::new(); self.word_count as usize];
        for (id, d) in &self.descriptors {
            for w in d.words() {
                self.check_word(w)?;
                expected[w.slot()].push(id.clone());
            }
            if !self.tags.contains_key(id) {
                return Err(Error::invalid(format!("image {id} has no tag")));
            }
        }
        for (slot, (want, have)) in expected.iter_mut().zip(self.postings.iter()).enumerate() {
            want.sort();
            if want != have {
                return Err(Error::invalid(format!("postings of word {} disagree with stored descriptors", slot + 1)));
            }
        }
        if self.tags.len() != self.descriptors.len() {
            return Err(Error::invalid("tags refer to images without descriptors"));
        }
        Ok(())
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ImageDescriptor> {
        self.descriptors.values()
    }

    pub fn tag_map(&self) -> &BTreeMap<String, String> {
        &self.tags
    }

    pub fn postings_table(&self) -> &[Vec<String>] {
        &self.postings
    }
}

impl Corpus for MemoryCorpus {
    fn word_count(&self) -> u32 {
        self.word_count
    }

    fn descriptor(&self, image_id: &str) -> Option<&ImageDescriptor> {
        self.descriptors.get(image_id)
    }

    fn postings(&self, word: WordIndex) -> Result<&[String]> {
        self.check_word(word)?;
        Ok(&self.postings[word.slot()])
    }

    fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.descriptors.keys().map(String::as_str)
    }

    fn image_count(&self) -> usize {
        self.descriptors.len()
    }

    fn tag(&self, image_id: &str) -> Option<&str> {
        self.tags.get(image_id).map(String::as_str)
    }

    fn tagged(&self, tag: &str) -> &[String] {
        let key = tag.trim().to_lowercase();
        self.by_tag.get(&key).map_or(&[], Vec::as_slice)
    }

    fn tags(&self) -> impl Iterator<Item = &str> {
        self.by_tag.keys().map(String::as_str)
    }
}
