//! Point-cloud binary format.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! magic:   "PCDS" (4 bytes)
//! version: u8 (currently 1)
//! count:   u32 number of events
//! event:   point count u32, D u8, class-label byte (0xff = none),
//!          payload N x D x f32
//! ```
//!
//! Domain label, normalization stats and arbitrary run metadata travel in a
//! JSON sidecar at `<path>.json` so the binary layout stays fixed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NormStats, PointCloud};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PCDS_MAGIC: &[u8; 4] = b"PCDS";
pub const PCDS_VERSION: u8 = 1;
const NO_LABEL: u8 = 0xff;

/// Sidecar metadata written next to every `.pcds` file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub domain_label: String,
    pub normalization: Option<NormStats>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn save_pc(dataset: &Dataset, path: &Path) -> Result<()> {
    save_pc_with_meta(dataset, path, BTreeMap::new())
}

pub fn save_pc_with_meta(
    dataset: &Dataset,
    path: &Path,
    meta: BTreeMap<String, serde_json::Value>,
) -> Result<()> {
    dataset.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(PCDS_MAGIC)?;
    w.write_all(&[PCDS_VERSION])?;
    w.write_all(&(dataset.events.len() as u32).to_le_bytes())?;
    for (i, event) in dataset.events.iter().enumerate() {
        w.write_all(&(event.n_points() as u32).to_le_bytes())?;
        w.write_all(&[event.dim() as u8])?;
        let label = dataset
            .class_labels
            .as_ref()
            .map(|l| l[i])
            .unwrap_or(NO_LABEL);
        w.write_all(&[label])?;
        for v in event.points().values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    drop(w);

    let manifest = Manifest {
        domain_label: dataset.domain_label.clone(),
        normalization: dataset.normalization.clone(),
        meta,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Option<Manifest>> {
    let sidecar = sidecar_path(path);
    if !sidecar.exists() {
        return Ok(None);
    }
    let json = std::fs::read_to_string(sidecar)?;
    Ok(Some(serde_json::from_str(&json)?))
}

pub fn load_pc(path: &Path) -> Result<Dataset> {
    let mut data = Vec::new();
    File::open(path)?.read_to_end(&mut data)?;
    let mut pos = 0usize;
    let need = |pos: usize, n: usize, what: &str| -> Result<()> {
        if pos + n > data.len() {
            Err(Error::format(format!(
                "truncated pcds file while reading {what}: expected {} bytes, file has {}",
                pos + n,
                data.len()
            )))
        } else {
            Ok(())
        }
    };

    need(pos, 4, "magic")?;
    if &data[0..4] != PCDS_MAGIC {
        return Err(Error::format("not a PCDS file (bad magic)".to_string()));
    }
    pos += 4;
    need(pos, 1, "version")?;
    let version = data[pos];
    pos += 1;
    if version != PCDS_VERSION {
        return Err(Error::format(format!(
            "unsupported pcds version {version}, expected {PCDS_VERSION}"
        )));
    }
    need(pos, 4, "event count")?;
    let count = u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;

    let mut events = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut any_label = false;
    for ev in 0..count {
        need(pos, 4, "point count")?;
        let n = u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        need(pos, 2, "dimension and label")?;
        let d = data[pos] as usize;
        let label = data[pos + 1];
        pos += 2;
        let payload = n
            .checked_mul(d)
            .and_then(|e| e.checked_mul(4))
            .ok_or_else(|| Error::format(format!("event {ev}: extent overflow ({n} x {d})")))?;
        need(pos, payload, "point payload")?;
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n * d {
            let off = pos + i * 4;
            values.push(f32::from_le_bytes(data[off..off + 4].try_into().unwrap()));
        }
        pos += payload;
        events.push(PointCloud::new(Tensor::new(vec![n, d], values)?)?);
        labels.push(label);
        if label != NO_LABEL {
            any_label = true;
        }
    }
    if pos != data.len() {
        return Err(Error::format(format!(
            "pcds file has {} trailing bytes",
            data.len() - pos
        )));
    }

    let manifest = load_manifest(path)?;
    let domain_label = manifest
        .as_ref()
        .map(|m| m.domain_label.clone())
        .filter(|l| !l.is_empty())
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "unknown".to_string())
        });

    let mut ds = Dataset::new(events, domain_label)?;
    if any_label {
        ds.class_labels = Some(labels);
    }
    ds.normalization = manifest.and_then(|m| m.normalization);
    ds.validate()?;
    Ok(ds)
}
