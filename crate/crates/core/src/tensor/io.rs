/*
Copyright 2026 The palm-dl Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Binary tensor records: magic `DTN1`, u32 order, u64 extents, then f64 data,
//! all little-endian. A file may hold several records back to back.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::DenseTensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DTN1";

/// Largest order accepted when reading, to reject garbage headers early.
const MAX_ORDER: u32 = 64;

pub fn write_record<W: Write>(w: &mut W, t: &DenseTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &x in t.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one record, or `None` at a clean end of stream.
pub fn read_record<R: Read>(r: &mut R) -> Result<Option<DenseTensor>> {
    let mut magic = [0u8; 4];
    match r.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad tensor magic {magic:?}")));
    }
    let order = u32::from_le_bytes(read_array(r)?);
    if order == 0 || order > MAX_ORDER {
        return Err(Error::Format(format!("implausible tensor order {order}")));
    }
    let mut shape = Vec::with_capacity(order as usize);
    let mut len: usize = 1;
    for _ in 0..order {
        let d = u64::from_le_bytes(read_array(r)?);
        let d = usize::try_from(d).map_err(|_| Error::Format(format!("extent {d} too large")))?;
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        shape.push(d);
    }
    let mut data = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        data.push(f64::from_le_bytes(read_array(r)?));
    }
    DenseTensor::new(shape, data)
        .map(Some)
        .map_err(|e| Error::Format(e.to_string()))
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::Format("truncated tensor record".into())
        } else {
            e.into()
        }
    })?;
    Ok(b)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    write_tensors(path, std::slice::from_ref(t))
}

pub fn write_tensors(path: impl AsRef<Path>, ts: &[DenseTensor]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in ts {
        write_record(&mut w, t)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file holding exactly one record.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut ts = read_tensors(path)?;
    if ts.len() != 1 {
        return Err(Error::Format(format!("expected one tensor, found {}", ts.len())));
    }
    Ok(ts.remove(0))
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<DenseTensor>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    while let Some(t) = read_record(&mut r)? {
        out.push(t);
    }
    Ok(out)
}
