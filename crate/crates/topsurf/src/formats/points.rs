// SPDX-License-Identifier: Apache-2.0

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use topsurf_core::surf::InterestPoint;
use topsurf_core::DESCRIPTOR_LEN;

use super::{bad, expect_end, load, read_header, write_atomic, FormatError, VERSION};
use crate::error::Result;

pub const TSIP_MAGIC: &[u8; 4] = b"TSIP";

const POINT_BYTES: usize = 4 * 4 + 1 + 4 + 4 * DESCRIPTOR_LEN;

/// Serializes points; every float is narrowed to f32.
pub fn encode_points(points: &[InterestPoint]) -> Result<Vec<u8>, FormatError> {
    let count = u32::try_from(points.len()).map_err(|_| bad("too many points"))?;
    let mut out = Vec::with_capacity(10 + points.len() * POINT_BYTES);
    out.write_all(TSIP_MAGIC)?;
    out.write_u16::<LittleEndian>(VERSION)?;
    out.write_u32::<LittleEndian>(count)?;
    for p in points {
        for v in [p.x, p.y, p.scale, p.orientation] {
            out.write_f32::<LittleEndian>(v as f32)?;
        }
        out.write_i8(p.laplacian_sign)?;
        out.write_f32::<LittleEndian>(p.response as f32)?;
        for &v in &p.descriptor {
            out.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    Ok(out)
}

pub fn decode_points(bytes: &[u8]) -> Result<Vec<InterestPoint>, FormatError> {
    let mut r = bytes;
    read_header(&mut r, TSIP_MAGIC)?;
    let count = r.read_u32::<LittleEndian>()? as usize;
    if r.len() != count * POINT_BYTES {
        return Err(bad(format!("{} points need {} bytes, found {}", count, count * POINT_BYTES, r.len())));
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut f = || r.read_f32::<LittleEndian>().map(f64::from);
        let (x, y, scale, orientation) = (f()?, f()?, f()?, f()?);
        let laplacian_sign = r.read_i8()?;
        let response = f64::from(r.read_f32::<LittleEndian>()?);
        let mut descriptor = [0.0f64; DESCRIPTOR_LEN];
        for d in &mut descriptor {
            *d = f64::from(r.read_f32::<LittleEndian>()?);
        }
        points.push(InterestPoint { x, y, scale, orientation, laplacian_sign, response, descriptor });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    expect_end(&rest)?;
    Ok(points)
}

pub fn write_points(path: &Path, points: &[InterestPoint]) -> Result<()> {
    let bytes = encode_points(points).map_err(|e| crate::Error::format(path, e.0))?;
    write_atomic(path, &bytes)
}

pub fn read_points(path: &Path) -> Result<Vec<InterestPoint>> {
    load(path, decode_points)
}
