// SPDX-License-Identifier: Apache-2.0

//! Little-endian binary files: interest points (`TSIP`), dictionaries
//! (`TSDC`) and image descriptors (`TSVW`).

mod descriptor;
mod dictionary;
mod points;

pub use descriptor::{decode_descriptor, encode_descriptor, read_descriptor, write_descriptor, TSVW_MAGIC};
pub use dictionary::{
    decode_dictionary, dictionary_checksum, dictionary_to_json, encode_dictionary, read_dictionary, write_dictionary,
    DictionaryJson, TSDC_MAGIC,
};
pub use points::{decode_points, encode_points, read_points, write_points, TSIP_MAGIC};

use std::io::{self, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt};

use crate::error::{Error, IoContext, Result};

/// Current version of every format.
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct FormatError(pub String);

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            FormatError("truncated file".into())
        } else {
            FormatError(e.to_string())
        }
    }
}

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError(msg.into())
}

fn read_header(r: &mut &[u8], magic: &[u8; 4]) -> Result<(), FormatError> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(bad(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    Ok(())
}

fn expect_end(r: &[u8]) -> Result<(), FormatError> {
    if r.is_empty() {
        Ok(())
    } else {
        Err(bad(format!("{} trailing bytes", r.len())))
    }
}

fn load<T>(path: &Path, decode: impl FnOnce(&[u8]) -> Result<T, FormatError>) -> Result<T> {
    let bytes = std::fs::read(path).at(path)?;
    decode(&bytes).map_err(|e| Error::format(path, e.0))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).at(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).at(&tmp)?;
    std::fs::rename(&tmp, path).at(path)
}
