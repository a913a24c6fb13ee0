// SPDX-License-Identifier: Apache-2.0

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use topsurf_core::encoder::{ImageDescriptor, VisualWordOccurrence};
use topsurf_core::WordIndex;

use super::{bad, expect_end, load, read_header, write_atomic, FormatError, VERSION};
use crate::error::Result;

pub const TSVW_MAGIC: &[u8; 4] = b"TSVW";

pub fn encode_descriptor(desc: &ImageDescriptor) -> Result<Vec<u8>, FormatError> {
    let id = desc.image_id.as_bytes();
    let id_len = u16::try_from(id.len()).map_err(|_| bad("image id too long"))?;
    let count = u16::try_from(desc.occurrences.len()).map_err(|_| bad("too many occurrences"))?;
    let mut out = Vec::new();
    out.write_all(TSVW_MAGIC)?;
    out.write_u16::<LittleEndian>(VERSION)?;
    out.write_u16::<LittleEndian>(id_len)?;
    out.write_all(id)?;
    out.write_u32::<LittleEndian>(desc.total_points)?;
    out.write_u16::<LittleEndian>(count)?;
    for o in &desc.occurrences {
        let locs = u16::try_from(o.locations.len()).map_err(|_| bad("too many locations"))?;
        out.write_u32::<LittleEndian>(o.index.0)?;
        out.write_f32::<LittleEndian>(o.tf as f32)?;
        out.write_f32::<LittleEndian>(o.idf)?;
        out.write_u16::<LittleEndian>(locs)?;
        for &(x, y) in &o.locations {
            out.write_f32::<LittleEndian>(x)?;
            out.write_f32::<LittleEndian>(y)?;
        }
    }
    Ok(out)
}

/// Decodes a descriptor. A stored tf equal to `locations / total_points` in
/// f32 is restored at full precision.
pub fn decode_descriptor(bytes: &[u8]) -> Result<ImageDescriptor, FormatError> {
    let mut r = bytes;
    read_header(&mut r, TSVW_MAGIC)?;
    let id_len = usize::from(r.read_u16::<LittleEndian>()?);
    let mut id = vec![0u8; id_len];
    r.read_exact(&mut id)?;
    let image_id = String::from_utf8(id).map_err(|_| bad("image id is not UTF-8"))?;
    let total_points = r.read_u32::<LittleEndian>()?;
    let count = r.read_u16::<LittleEndian>()?;
    let mut occurrences = Vec::with_capacity(usize::from(count));
    for _ in 0..count {
        let index = WordIndex(r.read_u32::<LittleEndian>()?);
        let stored_tf = r.read_f32::<LittleEndian>()?;
        let idf = r.read_f32::<LittleEndian>()?;
        let n = usize::from(r.read_u16::<LittleEndian>()?);
        let mut locations = Vec::with_capacity(n);
        for _ in 0..n {
            locations.push((r.read_f32::<LittleEndian>()?, r.read_f32::<LittleEndian>()?));
        }
        let exact = if total_points > 0 { n as f64 / f64::from(total_points) } else { 0.0 };
        let tf = if exact as f32 == stored_tf { exact } else { f64::from(stored_tf) };
        occurrences.push(VisualWordOccurrence { index, tf, idf, locations });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    expect_end(&rest)?;
    Ok(ImageDescriptor { image_id, occurrences, total_points })
}

pub fn write_descriptor(path: &Path, desc: &ImageDescriptor) -> Result<()> {
    let bytes = encode_descriptor(desc).map_err(|e| crate::Error::format(path, e.0))?;
    write_atomic(path, &bytes)
}

pub fn read_descriptor(path: &Path) -> Result<ImageDescriptor> {
    load(path, decode_descriptor)
}
