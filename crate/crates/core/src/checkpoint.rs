//! Binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! version: u8            (currently 1)
//! count:   u32           number of entries
//! entry:   name_len u16, name bytes (utf-8),
//!          rank u8, extents rank x u32,
//!          payload prod(extents) x f32
//! ```
//!
//! Round trips are bit-exact; readers validate the version, utf-8 names and
//! exact payload sizes and report expected vs actual byte counts on
//! truncation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::ParamStore;
use crate::tensor::Tensor;

pub const CONTAINER_VERSION: u8 = 1;

pub fn write_container<W: Write>(mut w: W, entries: &[(&str, &Tensor)]) -> Result<()> {
    w.write_all(&[CONTAINER_VERSION])?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, tensor) in entries {
        let bytes = name.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::invalid(format!("parameter name too long: {name}")));
        }
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        let shape = tensor.shape();
        if shape.len() > u8::MAX as usize {
            return Err(Error::invalid("tensor rank exceeds u8"));
        }
        w.write_all(&[shape.len() as u8])?;
        for &d in shape {
            if d > u32::MAX as usize {
                return Err(Error::invalid("tensor extent exceeds u32"));
            }
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in tensor.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_container<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut pos = 0usize;
    let need = |pos: usize, n: usize, what: &str| -> Result<()> {
        if pos + n > data.len() {
            Err(Error::format(format!(
                "truncated container while reading {what}: expected {} bytes, file has {}",
                pos + n,
                data.len()
            )))
        } else {
            Ok(())
        }
    };

    need(pos, 1, "version byte")?;
    let version = data[pos];
    pos += 1;
    if version != CONTAINER_VERSION {
        return Err(Error::format(format!(
            "unsupported container version {version}, expected {CONTAINER_VERSION}"
        )));
    }
    need(pos, 4, "entry count")?;
    let count = u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;

    let mut entries = Vec::with_capacity(count);
    for idx in 0..count {
        need(pos, 2, "name length")?;
        let name_len = u16::from_le_bytes(data[pos..pos + 2].try_into().unwrap()) as usize;
        pos += 2;
        need(pos, name_len, "name bytes")?;
        let name = std::str::from_utf8(&data[pos..pos + name_len])
            .map_err(|_| Error::format(format!("entry {idx}: name is not valid utf-8")))?
            .to_string();
        pos += name_len;
        need(pos, 1, "rank")?;
        let rank = data[pos] as usize;
        pos += 1;
        let mut shape = Vec::with_capacity(rank);
        let mut numel: u64 = 1;
        for _ in 0..rank {
            need(pos, 4, "extent")?;
            let d = u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as u64;
            pos += 4;
            numel = numel
                .checked_mul(d)
                .ok_or_else(|| Error::format(format!("entry `{name}`: extent overflow")))?;
            shape.push(d as usize);
        }
        if numel > (data.len() as u64) {
            return Err(Error::format(format!(
                "entry `{name}`: payload of {numel} elements exceeds file size"
            )));
        }
        let numel = numel as usize;
        need(pos, numel * 4, "f32 payload")?;
        let mut values = Vec::with_capacity(numel);
        for i in 0..numel {
            let off = pos + i * 4;
            values.push(f32::from_le_bytes(data[off..off + 4].try_into().unwrap()));
        }
        pos += numel * 4;
        entries.push((name, Tensor::new(shape, values)?));
    }
    if pos != data.len() {
        return Err(Error::format(format!(
            "container has {} trailing bytes after the last entry",
            data.len() - pos
        )));
    }
    Ok(entries)
}

/// Save every parameter in name order.
pub fn save_params(store: &ParamStore, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let entries: Vec<(&str, &Tensor)> = store.iter().map(|(n, t)| (n.as_str(), t)).collect();
    write_container(file, &entries)
}

pub fn load_params(path: &Path) -> Result<ParamStore> {
    let file = BufReader::new(File::open(path)?);
    let entries = read_container(file)?;
    let mut store = ParamStore::new();
    for (name, tensor) in entries {
        store.insert(&name, tensor);
    }
    Ok(store)
}
