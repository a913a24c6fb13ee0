// SPDX-License-Identifier: Apache-2.0

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use topsurf_core::kdforest::ForestParams;
use topsurf_core::vocabulary::{BuildMeta, Descriptor, Dictionary, IdfSource};
use topsurf_core::DESCRIPTOR_LEN;

use super::{bad, expect_end, load, read_header, write_atomic, FormatError, VERSION};
use crate::error::Result;

pub const TSDC_MAGIC: &[u8; 4] = b"TSDC";

/// Stored in place of the checks budget for exhaustive search.
const CHECKS_EXHAUSTIVE: u32 = u32::MAX;

pub fn encode_dictionary(dict: &Dictionary) -> Result<Vec<u8>, FormatError> {
    let k = u32::try_from(dict.size()).map_err(|_| bad("dictionary too large"))?;
    let ann = dict.ann_params();
    let trees = u16::try_from(ann.trees).map_err(|_| bad("too many trees"))?;
    let checks = match ann.checks {
        None => CHECKS_EXHAUSTIVE,
        Some(c) => u32::try_from(c).ok().filter(|&c| c != CHECKS_EXHAUSTIVE).ok_or_else(|| bad("checks too large"))?,
    };
    let meta = dict.meta();
    let mut out = Vec::with_capacity(64 + dict.size() * (DESCRIPTOR_LEN + 1) * 4);
    out.write_all(TSDC_MAGIC)?;
    out.write_u16::<LittleEndian>(VERSION)?;
    out.write_u32::<LittleEndian>(k)?;
    for &v in dict.centroids().iter().flatten() {
        out.write_f32::<LittleEndian>(v)?;
    }
    for &v in dict.idf() {
        out.write_f32::<LittleEndian>(v)?;
    }
    out.write_u16::<LittleEndian>(trees)?;
    out.write_u32::<LittleEndian>(checks)?;
    for v in [meta.iterations, meta.iterations_run, meta.nn_count, meta.points_per_image, meta.corpus_size] {
        out.write_u32::<LittleEndian>(v)?;
    }
    out.write_u64::<LittleEndian>(meta.seed)?;
    out.write_u8(meta.idf_source.code())?;
    Ok(out)
}

pub fn decode_dictionary(bytes: &[u8]) -> Result<Dictionary, FormatError> {
    let mut r = bytes;
    read_header(&mut r, TSDC_MAGIC)?;
    let k = r.read_u32::<LittleEndian>()? as usize;
    if r.len() < k * (DESCRIPTOR_LEN + 1) * 4 {
        return Err(bad("truncated file"));
    }
    let mut centroids: Vec<Descriptor> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut c = [0.0f32; DESCRIPTOR_LEN];
        r.read_f32_into::<LittleEndian>(&mut c)?;
        centroids.push(c);
    }
    let mut idf = vec![0.0f32; k];
    r.read_f32_into::<LittleEndian>(&mut idf)?;
    let trees = usize::from(r.read_u16::<LittleEndian>()?);
    let checks = match r.read_u32::<LittleEndian>()? {
        CHECKS_EXHAUSTIVE => None,
        c => Some(c as usize),
    };
    let mut u = || r.read_u32::<LittleEndian>();
    let (iterations, iterations_run, nn_count, points_per_image, corpus_size) = (u()?, u()?, u()?, u()?, u()?);
    let seed = r.read_u64::<LittleEndian>()?;
    let code = r.read_u8()?;
    let idf_source = IdfSource::from_code(code).ok_or_else(|| bad(format!("unknown idf source {code}")))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    expect_end(&rest)?;
    let meta = BuildMeta { iterations, iterations_run, nn_count, points_per_image, corpus_size, seed, idf_source };
    Dictionary::from_parts(centroids, idf, ForestParams { trees, checks }, meta).map_err(|e| bad(e.to_string()))
}

/// Hex SHA-256 of the serialized dictionary.
pub fn dictionary_checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<String> {
    let bytes = encode_dictionary(dict).map_err(|e| crate::Error::format(path, e.0))?;
    write_atomic(path, &bytes)?;
    Ok(dictionary_checksum(&bytes))
}

/// Loads a dictionary and its checksum.
pub fn read_dictionary(path: &Path) -> Result<(Dictionary, String)> {
    load(path, |bytes| Ok((decode_dictionary(bytes)?, dictionary_checksum(bytes))))
}

/// Textual mirror of the binary dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryJson {
    pub version: u16,
    pub size: usize,
    pub centroids: Vec<Vec<f32>>,
    pub idf: Vec<f32>,
    pub ann: ForestParams,
    pub build_meta: BuildMeta,
}

pub fn dictionary_to_json(dict: &Dictionary) -> DictionaryJson {
    DictionaryJson {
        version: VERSION,
        size: dict.size(),
        centroids: dict.centroids().iter().map(|c| c.to_vec()).collect(),
        idf: dict.idf().to_vec(),
        ann: dict.ann_params(),
        build_meta: *dict.meta(),
    }
}
