// SPDX-License-Identifier: Apache-2.0

//! On-disk index: descriptors, inverted postings, tags and a manifest.
//!
//! ```text
//! root/
//!   manifest.json            committed image set and dictionary checksum
//!   descriptors/<id>.tsvw
//!   postings/<word>.ids      newline-delimited sorted ids (per-word layout)
//!   postings.pack            concatenated id lists (compact layout)
//!   postings.idx             TSPX offsets into postings.pack
//!   tags.tsv                 id TAB tag
//!   journal/                 staged files of an unfinished update
//!   LOCK
//! ```
//!
//! An update stages every new file under `journal/`, writes the plan, then
//! renames `COMMIT` into place. Files are moved into the tree only after
//! that. Opening a store for writing rolls a committed journal forward and
//! discards an uncommitted one, so a crash leaves either the old state or the
//! new one.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use topsurf_core::corpus::normalize_tag;
use topsurf_core::encoder::ImageDescriptor;
use topsurf_core::{Corpus, MemoryCorpus, WordIndex};

use crate::error::{Error, IoContext, Result};
use crate::formats::{decode_descriptor, encode_descriptor, read_descriptor};

pub const MANIFEST: &str = "manifest.json";
pub const TAGS: &str = "tags.tsv";
pub const DESCRIPTORS: &str = "descriptors";
pub const POSTINGS: &str = "postings";
pub const PACK: &str = "postings.pack";
pub const PACK_INDEX: &str = "postings.idx";
const JOURNAL: &str = "journal";
const PLAN: &str = "plan";
const COMMIT: &str = "COMMIT";
const LOCK: &str = "LOCK";
const TSPX_MAGIC: &[u8; 4] = b"TSPX";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One `postings/<word>.ids` file per used word.
    #[default]
    PerWord,
    /// `postings.pack` plus an offset table.
    Compact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dictionary_checksum: String,
    pub dictionary_size: u32,
    pub layout: Layout,
    /// Committed image ids, ascending.
    pub images: Vec<String>,
}

/// Rejects ids that cannot serve as relative paths or postings lines.
pub fn validate_image_id(id: &str) -> Result<()> {
    let bad = id.is_empty()
        || id.len() > usize::from(u16::MAX)
        || id.starts_with('/')
        || id.contains(['\\', '\n', '\r', '\t', '\0'])
        || id.split('/').any(|c| c.is_empty() || c == "." || c == "..");
    if bad {
        return Err(topsurf_core::Error::InvalidInput(format!("invalid image id {id:?}")).into());
    }
    Ok(())
}

fn descriptor_rel(id: &str) -> PathBuf {
    PathBuf::from(DESCRIPTORS).join(format!("{id}.tsvw"))
}

fn postings_rel(word: WordIndex) -> PathBuf {
    PathBuf::from(POSTINGS).join(format!("{}.ids", word.0))
}

fn id_list(ids: &[String]) -> Vec<u8> {
    let mut out = Vec::new();
    for id in ids {
        out.extend_from_slice(id.as_bytes());
        out.push(b'\n');
    }
    out
}

fn parse_id_list(path: &Path, bytes: &[u8]) -> Result<Vec<String>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::format(path, "postings are not UTF-8"))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(String::from).collect())
}

fn encode_pack(postings: &[Vec<String>]) -> (Vec<u8>, Vec<u8>) {
    let mut pack = Vec::new();
    let mut idx = Vec::with_capacity(10 + 8 * (postings.len() + 1));
    idx.extend_from_slice(TSPX_MAGIC);
    idx.write_u16::<LittleEndian>(crate::formats::VERSION).unwrap();
    idx.write_u32::<LittleEndian>(postings.len() as u32).unwrap();
    idx.write_u64::<LittleEndian>(0).unwrap();
    for list in postings {
        pack.extend(id_list(list));
        idx.write_u64::<LittleEndian>(pack.len() as u64).unwrap();
    }
    (pack, idx)
}

fn decode_pack(root: &Path, words: u32) -> Result<Vec<Vec<String>>> {
    let (pack_path, idx_path) = (root.join(PACK), root.join(PACK_INDEX));
    let pack = fs::read(&pack_path).at(&pack_path)?;
    let idx = fs::read(&idx_path).at(&idx_path)?;
    let bad = |m: &str| Error::format(&idx_path, m);
    let mut r = idx.as_slice();
    let mut magic = [0u8; 4];
    std::io::Read::read_exact(&mut r, &mut magic).map_err(|_| bad("truncated file"))?;
    let version = r.read_u16::<LittleEndian>().map_err(|_| bad("truncated file"))?;
    if &magic != TSPX_MAGIC || version != crate::formats::VERSION {
        return Err(bad("not a postings offset table"));
    }
    let k = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated file"))?;
    if k != words || r.len() != 8 * (k as usize + 1) {
        return Err(bad("offset table does not match the dictionary size"));
    }
    let offsets: Vec<usize> = (0..=k).map(|_| r.read_u64::<LittleEndian>().unwrap() as usize).collect();
    offsets
        .windows(2)
        .map(|w| {
            let slice = pack.get(w[0]..w[1]).ok_or_else(|| bad("offset outside postings.pack"))?;
            parse_id_list(&pack_path, slice)
        })
        .collect()
}

fn encode_tags(tags: &BTreeMap<String, String>) -> Vec<u8> {
    let mut out = Vec::new();
    for (id, tag) in tags {
        writeln!(out, "{id}\t{tag}").unwrap();
    }
    out
}

fn read_tags(root: &Path) -> Result<BTreeMap<String, String>> {
    let path = root.join(TAGS);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(&path).at(&path)?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|line| {
            let (id, tag) = line.split_once('\t').ok_or_else(|| Error::format(&path, format!("bad line {line:?}")))?;
            Ok((id.to_string(), tag.to_string()))
        })
        .collect()
}

fn read_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST);
    let text = fs::read_to_string(&path).at(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

fn manifest_bytes(m: &Manifest) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(m).expect("manifest serializes");
    s.push('\n');
    s.into_bytes()
}

/// Staged file operations of one update.
#[derive(Default)]
struct Plan {
    puts: Vec<(PathBuf, Vec<u8>)>,
    deletes: Vec<PathBuf>,
}

/// Reads the committed state of the tree (no journal handling).
fn load_state(root: &Path) -> Result<(Manifest, MemoryCorpus)> {
    let manifest = read_manifest(root)?;
    let mut descriptors = BTreeMap::new();
    for id in &manifest.images {
        let path = root.join(descriptor_rel(id));
        let d = read_descriptor(&path)?;
        if &d.image_id != id {
            return Err(Error::format(&path, format!("holds image {:?}", d.image_id)));
        }
        descriptors.insert(id.clone(), d);
    }
    let k = manifest.dictionary_size;
    let postings = match manifest.layout {
        Layout::Compact => decode_pack(root, k)?,
        Layout::PerWord => {
            let mut table = vec![Vec::new(); k as usize];
            let dir = root.join(POSTINGS);
            if dir.exists() {
                for entry in fs::read_dir(&dir).at(&dir)? {
                    let path = entry.at(&dir)?.path();
                    let word = path
                        .file_name()
                        .and_then(|n| n.to_str())
                        .and_then(|n| n.strip_suffix(".ids"))
                        .and_then(|n| n.parse::<u32>().ok())
                        .filter(|&w| w >= 1 && w <= k)
                        .ok_or_else(|| Error::format(&path, "unexpected file in postings directory"))?;
                    let bytes = fs::read(&path).at(&path)?;
                    table[(word - 1) as usize] = parse_id_list(&path, &bytes)?;
                }
            }
            table
        }
    };
    let tags = read_tags(root)?;
    let corpus = MemoryCorpus::from_parts(k, descriptors, tags, postings)?;
    Ok((manifest, corpus))
}

/// Applies a committed journal and removes it; drops an uncommitted one.
fn recover(root: &Path) -> Result<()> {
    let journal = root.join(JOURNAL);
    if !journal.exists() {
        return Ok(());
    }
    if journal.join(COMMIT).exists() {
        log::warn!("rolling forward interrupted update in {}", root.display());
        let plan_path = journal.join(PLAN);
        let plan = fs::read_to_string(&plan_path).at(&plan_path)?;
        for line in plan.lines() {
            let bad = || Error::format(&plan_path, format!("bad plan line {line:?}"));
            match line.split_once('\t').ok_or_else(bad)? {
                ("del", rel) => remove_if_exists(&root.join(rel))?,
                (op, rel) => {
                    let staged = journal.join(op.strip_prefix("put:").ok_or_else(bad)?);
                    if staged.exists() {
                        move_into(&staged, &root.join(rel))?;
                    }
                }
            }
        }
    } else {
        log::warn!("discarding uncommitted update in {}", root.display());
    }
    fs::remove_dir_all(&journal).at(&journal)
}

fn remove_if_exists(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(path, e)),
        _ => Ok(()),
    }
}

fn move_into(from: &Path, to: &Path) -> Result<()> {
    if let Some(dir) = to.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::rename(from, to).at(to)
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).at(path)?;
    f.write_all(bytes).at(path)?;
    f.sync_all().at(path)
}

/// An index directory and its committed contents.
pub struct IndexStore {
    root: PathBuf,
    manifest: Manifest,
    corpus: MemoryCorpus,
    lock: Option<File>,
    crash_after: Option<usize>,
    ops: usize,
}

impl std::fmt::Debug for IndexStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IndexStore").field("root", &self.root).field("images", &self.manifest.images.len()).finish()
    }
}

fn acquire_lock(root: &Path) -> Result<File> {
    let path = root.join(LOCK);
    let file = OpenOptions::new().create(true).truncate(false).write(true).open(&path).at(&path)?;
    match file.try_lock() {
        Ok(()) => Ok(file),
        Err(fs::TryLockError::WouldBlock) => Err(Error::Locked(root.to_path_buf())),
        Err(fs::TryLockError::Error(e)) => Err(Error::io(path, e)),
    }
}

impl IndexStore {
    /// Opens an index for writing, creating it when `root` holds none. The
    /// dictionary must match the one the index was built with.
    pub fn open_writer(root: &Path, dictionary_checksum: &str, dictionary_size: u32, layout: Layout) -> Result<Self> {
        fs::create_dir_all(root).at(root)?;
        let lock = acquire_lock(root)?;
        recover(root)?;
        if !root.join(MANIFEST).exists() {
            let manifest = Manifest {
                format_version: MANIFEST_VERSION,
                dictionary_checksum: dictionary_checksum.to_string(),
                dictionary_size,
                layout,
                images: Vec::new(),
            };
            if layout == Layout::Compact {
                let (pack, idx) = encode_pack(&vec![Vec::new(); dictionary_size as usize]);
                crate::formats::write_atomic(&root.join(PACK), &pack)?;
                crate::formats::write_atomic(&root.join(PACK_INDEX), &idx)?;
            }
            let path = root.join(MANIFEST);
            crate::formats::write_atomic(&path, &manifest_bytes(&manifest))?;
        }
        let mut store = Self::load(root)?;
        store.check_dictionary(dictionary_checksum)?;
        store.lock = Some(lock);
        Ok(store)
    }

    /// Opens the committed state for reading. A pending journal is recovered
    /// when no writer holds the index.
    pub fn open(root: &Path) -> Result<Self> {
        if root.join(JOURNAL).exists() {
            if let Ok(_lock) = acquire_lock(root) {
                recover(root)?;
            }
        }
        Self::load(root)
    }

    fn load(root: &Path) -> Result<Self> {
        let (manifest, corpus) = load_state(root)?;
        Ok(Self { root: root.to_path_buf(), manifest, corpus, lock: None, crash_after: None, ops: 0 })
    }

    /// Hard error unless `checksum` is the index's dictionary checksum.
    pub fn check_dictionary(&self, checksum: &str) -> Result<()> {
        if self.manifest.dictionary_checksum != checksum {
            return Err(Error::DictionaryMismatch {
                expected: self.manifest.dictionary_checksum.clone(),
                actual: checksum.to_string(),
            });
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn corpus(&self) -> &MemoryCorpus {
        &self.corpus
    }

    /// Testing hook: fail with [`Error::InjectedCrash`] before the `n`-th
    /// file operation from now, leaving the disk as it is at that point.
    pub fn set_crash_after(&mut self, n: Option<usize>) {
        self.crash_after = n;
        self.ops = 0;
    }

    fn step(&mut self) -> Result<()> {
        if self.crash_after == Some(self.ops) {
            return Err(Error::InjectedCrash);
        }
        self.ops += 1;
        Ok(())
    }

    pub fn add_image(&mut self, desc: ImageDescriptor, tag: &str) -> Result<()> {
        self.add_batch(vec![(desc, tag.to_string())])
    }

    /// Adds or replaces images in one atomic update. Images already stored
    /// with identical contents and tag are left alone.
    pub fn add_batch(&mut self, items: Vec<(ImageDescriptor, String)>) -> Result<()> {
        if self.lock.is_none() {
            return Err(Error::Config("index was opened read-only".into()));
        }
        let mut next = self.corpus.clone();
        let mut changed_ids = BTreeSet::new();
        let mut changed_words = BTreeSet::new();
        for (desc, tag) in items {
            validate_image_id(&desc.image_id)?;
            let tag = normalize_tag(&tag)?;
            if let Some(old) = next.descriptor(&desc.image_id) {
                if *old == desc && next.tag(&desc.image_id) == Some(tag.as_str()) {
                    continue;
                }
                changed_words.extend(old.words());
            }
            changed_words.extend(desc.words());
            changed_ids.insert(desc.image_id.clone());
            encode_descriptor(&desc).map_err(|e| Error::format(descriptor_rel(&desc.image_id), e.0))?;
            next.insert(desc, &tag)?;
        }
        if changed_ids.is_empty() {
            return Ok(());
        }

        let mut plan = Plan::default();
        for id in &changed_ids {
            let desc = next.descriptor(id).expect("just inserted");
            plan.puts.push((descriptor_rel(id), encode_descriptor(desc).expect("validated above")));
        }
        match self.manifest.layout {
            Layout::PerWord => {
                for &w in &changed_words {
                    let ids = next.postings(w)?;
                    if ids.is_empty() {
                        plan.deletes.push(postings_rel(w));
                    } else {
                        plan.puts.push((postings_rel(w), id_list(ids)));
                    }
                }
            }
            Layout::Compact => {
                let (pack, idx) = encode_pack(next.postings_table());
                plan.puts.push((PACK.into(), pack));
                plan.puts.push((PACK_INDEX.into(), idx));
            }
        }
        plan.puts.push((TAGS.into(), encode_tags(next.tag_map())));
        let mut manifest = self.manifest.clone();
        manifest.images = next.image_ids().map(String::from).collect();
        plan.puts.push((MANIFEST.into(), manifest_bytes(&manifest)));

        self.commit(&plan)?;
        self.corpus = next;
        self.manifest = manifest;
        Ok(())
    }

    fn commit(&mut self, plan: &Plan) -> Result<()> {
        let journal = self.root.join(JOURNAL);
        if journal.exists() {
            fs::remove_dir_all(&journal).at(&journal)?;
        }
        fs::create_dir_all(&journal).at(&journal)?;
        let mut lines = String::new();
        for (i, (rel, bytes)) in plan.puts.iter().enumerate() {
            self.step()?;
            write_synced(&journal.join(format!("{i}.stage")), bytes)?;
            lines.push_str(&format!("put:{i}.stage\t{}\n", rel.display()));
        }
        for rel in &plan.deletes {
            lines.push_str(&format!("del\t{}\n", rel.display()));
        }
        self.step()?;
        write_synced(&journal.join(PLAN), lines.as_bytes())?;
        self.step()?;
        write_synced(&journal.join("COMMIT.tmp"), b"")?;
        self.step()?;
        fs::rename(journal.join("COMMIT.tmp"), journal.join(COMMIT)).at(&journal)?;

        for (i, (rel, _)) in plan.puts.iter().enumerate() {
            self.step()?;
            move_into(&journal.join(format!("{i}.stage")), &self.root.join(rel))?;
        }
        for rel in &plan.deletes {
            self.step()?;
            remove_if_exists(&self.root.join(rel))?;
        }
        self.step()?;
        fs::remove_dir_all(&journal).at(&journal)
    }

    /// Full rescan of the tree: every descriptor file is decoded, the
    /// postings are checked against word containment in both directions, and
    /// the result must equal the in-memory state.
    pub fn verify(&self) -> Result<()> {
        let (manifest, disk) = load_state(&self.root)?;
        disk.verify()?;
        let dir = self.root.join(DESCRIPTORS);
        let mut on_disk = BTreeSet::new();
        if dir.exists() {
            for entry in walkdir::WalkDir::new(&dir) {
                let entry = entry.map_err(|e| Error::format(&dir, e.to_string()))?;
                if entry.file_type().is_file() {
                    let bytes = fs::read(entry.path()).at(entry.path())?;
                    let d = decode_descriptor(&bytes).map_err(|e| Error::format(entry.path(), e.0))?;
                    on_disk.insert(d.image_id);
                }
            }
        }
        let listed: BTreeSet<String> = manifest.images.iter().cloned().collect();
        if on_disk != listed {
            return Err(Error::format(&dir, "descriptor files differ from the manifest"));
        }
        if manifest != self.manifest || disk != self.corpus {
            return Err(Error::format(&self.root, "on-disk state differs from the loaded state"));
        }
        Ok(())
    }
}

impl Corpus for IndexStore {
    fn word_count(&self) -> u32 {
        self.corpus.word_count()
    }

    fn descriptor(&self, image_id: &str) -> Option<&ImageDescriptor> {
        self.corpus.descriptor(image_id)
    }

    fn postings(&self, word: WordIndex) -> topsurf_core::Result<&[String]> {
        self.corpus.postings(word)
    }

    fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.corpus.image_ids()
    }

    fn image_count(&self) -> usize {
        self.corpus.image_count()
    }

    fn tag(&self, image_id: &str) -> Option<&str> {
        self.corpus.tag(image_id)
    }

    fn tagged(&self, tag: &str) -> &[String] {
        self.corpus.tagged(tag)
    }

    fn tags(&self) -> impl Iterator<Item = &str> {
        self.corpus.tags()
    }
}
