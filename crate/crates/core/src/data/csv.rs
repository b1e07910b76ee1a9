//! CSV import for external detector events.
//!
//! Expected header: `event_id,x,y,z` or `event_id,x,y,z,charge`. Rows group
//! into one point cloud per event id, in order of first appearance; points
//! keep row order within an event.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{Dataset, PointCloud};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format("csv file is empty".to_string()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = match cols.as_slice() {
        ["event_id", "x", "y", "z"] => 3,
        ["event_id", "x", "y", "z", "charge"] => 4,
        _ => {
            return Err(Error::format(format!(
                "csv header must be `event_id,x,y,z[,charge]`, got `{header}`"
            )))
        }
    };

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::format(format!(
                "line {}: expected {} fields, got {}",
                line_no + 1,
                d + 1,
                fields.len()
            )));
        }
        let id = fields[0].to_string();
        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        for f in &fields[1..] {
            let v: f32 = f.parse().map_err(|_| {
                Error::format(format!("line {}: `{f}` is not a number", line_no + 1))
            })?;
            entry.push(v);
        }
    }
    if order.is_empty() {
        return Err(Error::format("csv file has no data rows".to_string()));
    }

    let mut events = Vec::with_capacity(order.len());
    for id in &order {
        let values = groups.remove(id).unwrap();
        let n = values.len() / d;
        events.push(PointCloud::new(Tensor::new(vec![n, d], values)?)?);
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    Dataset::new(events, label)
}
