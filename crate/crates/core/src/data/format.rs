//! On-disk dataset format.
//!
//! A dataset is a JSON manifest (`<stem>.json`) plus four raw little-endian
//! arrays next to it:
//!
//! | file              | element | layout                                   |
//! |-------------------|---------|------------------------------------------|
//! | `<stem>.inputs`   | f64     | `n_samples x n_inputs`, row-major        |
//! | `<stem>.targets`  | f64     | `n_samples x n_outputs`, row-major       |
//! | `<stem>.coords`   | f64     | axis values, axes concatenated in order  |
//! | `<stem>.index`    | u32     | `n_samples x n_axes` coordinate indices  |
//!
//! Each array entry in the manifest records its file name, element type and
//! SHA-256.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util;
use crate::matrix::Matrix;

use super::dataset::{Axis, Dataset, Fidelity};
use super::schema::Schema;

pub const DATASET_FORMAT: &str = "mfrpn-dataset/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayRef {
    pub file: String,
    pub element_type: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRef {
    pub name: String,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub name: String,
    pub fidelity: Fidelity,
    pub normalization_id: String,
    pub byte_order: String,
    pub n_samples: usize,
    pub axes: Vec<AxisRef>,
    pub schema: Schema,
    pub inputs: ArrayRef,
    pub targets: ArrayRef,
    pub coordinates: ArrayRef,
    pub sample_index: ArrayRef,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

fn stem_of(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::InvalidConfig(format!("{} has no usable file stem", path.display())))
}

fn sibling(manifest: &Path, file: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(file)
}

/// Writes the manifest at `manifest_path` and the arrays beside it.
pub fn write_dataset(dataset: &Dataset, manifest_path: &Path) -> Result<DatasetManifest> {
    let stem = stem_of(manifest_path)?;
    let put = |suffix: &str, element_type: &str, bytes: Vec<u8>| -> Result<ArrayRef> {
        let file = format!("{stem}.{suffix}");
        io_util::write(&sibling(manifest_path, &file), &bytes)?;
        Ok(ArrayRef {
            file,
            element_type: element_type.to_string(),
            sha256: io_util::sha256_hex(&bytes),
        })
    };
    let coords: Vec<f64> = dataset.axes().iter().flat_map(|a| a.values.iter().copied()).collect();
    let inputs = put("inputs", "f64", io_util::f64s_to_le_bytes(dataset.inputs().as_slice()))?;
    let targets = put("targets", "f64", io_util::f64s_to_le_bytes(dataset.targets().as_slice()))?;
    let coordinates = put("coords", "f64", io_util::f64s_to_le_bytes(&coords))?;
    let sample_index = put("index", "u32", io_util::u32s_to_le_bytes(dataset.coord_index()))?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.to_string(),
        name: dataset.name.clone(),
        fidelity: dataset.fidelity,
        normalization_id: dataset.normalization_id().to_string(),
        byte_order: "little-endian".to_string(),
        n_samples: dataset.len(),
        axes: dataset
            .axes()
            .iter()
            .map(|a| AxisRef {
                name: a.name.clone(),
                length: a.len(),
            })
            .collect(),
        schema: dataset.schema().clone(),
        inputs,
        targets,
        coordinates,
        sample_index,
        metadata: dataset.metadata.clone(),
    };
    io_util::write_json(manifest_path, &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(manifest_path: &Path) -> Result<DatasetManifest> {
    let m: DatasetManifest = io_util::read_json(manifest_path)?;
    if m.format != DATASET_FORMAT {
        return Err(Error::load(manifest_path, format!("unsupported format {:?}", m.format)));
    }
    if m.byte_order != "little-endian" {
        return Err(Error::load(manifest_path, "only little-endian arrays are supported"));
    }
    Ok(m)
}

fn read_f64s(manifest: &Path, a: &ArrayRef) -> Result<(PathBuf, Vec<f64>)> {
    let path = sibling(manifest, &a.file);
    if a.element_type != "f64" {
        return Err(Error::load(&path, format!("element type {:?}, expected f64", a.element_type)));
    }
    let bytes = io_util::read_verified(&path, &a.sha256)?;
    let v = io_util::le_bytes_to_f64s(&bytes)
        .ok_or_else(|| Error::load(&path, "length is not a multiple of 8 bytes"))?;
    Ok((path, v))
}

fn check_width(path: &Path, len: usize, n: usize, declared: usize, what: &str) -> Result<()> {
    if len != n * declared {
        let per_sample = if n == 0 { 0.0 } else { len as f64 / n as f64 };
        return Err(Error::Schema(format!(
            "{}: array holds {per_sample} values per sample over {n} samples, but the schema declares {declared} {what} features",
            path.display()
        )));
    }
    Ok(())
}

fn screen(path: &Path, m: &Matrix, schema_names: &[String]) -> Result<()> {
    if let Some((r, c)) = m.first_non_finite() {
        return Err(Error::load(
            path,
            format!("non-finite value at sample {r}, feature {:?}", schema_names[c]),
        ));
    }
    Ok(())
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let m = read_manifest(manifest_path)?;
    let n = m.n_samples;
    let n_in = m.schema.n_inputs();
    let n_out = m.schema.n_outputs();

    let (ipath, inputs) = read_f64s(manifest_path, &m.inputs)?;
    check_width(&ipath, inputs.len(), n, n_in, "input")?;
    let (tpath, targets) = read_f64s(manifest_path, &m.targets)?;
    check_width(&tpath, targets.len(), n, n_out, "output")?;
    let inputs = Matrix::from_vec(n, n_in, inputs)?;
    let targets = Matrix::from_vec(n, n_out, targets)?;
    let names = |fs: &[super::schema::Feature]| fs.iter().map(|f| f.name.clone()).collect::<Vec<_>>();
    screen(&ipath, &inputs, &names(&m.schema.input_features))?;
    screen(&tpath, &targets, &names(&m.schema.output_features))?;

    let (cpath, coords) = read_f64s(manifest_path, &m.coordinates)?;
    let total: usize = m.axes.iter().map(|a| a.length).sum();
    if coords.len() != total {
        return Err(Error::load(
            &cpath,
            format!("{} coordinate values, axes declare {total}", coords.len()),
        ));
    }
    let mut axes = Vec::with_capacity(m.axes.len());
    let mut offset = 0;
    for a in &m.axes {
        let values = coords[offset..offset + a.length].to_vec();
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::load(&cpath, format!("non-finite coordinate {bad} on axis {:?}", a.name)));
        }
        axes.push(Axis::new(a.name.clone(), values));
        offset += a.length;
    }

    let xpath = sibling(manifest_path, &m.sample_index.file);
    if m.sample_index.element_type != "u32" {
        return Err(Error::load(&xpath, "sample index must be u32"));
    }
    let bytes = io_util::read_verified(&xpath, &m.sample_index.sha256)?;
    let index = io_util::le_bytes_to_u32s(&bytes)
        .ok_or_else(|| Error::load(&xpath, "length is not a multiple of 4 bytes"))?;
    if index.len() != n * m.axes.len() {
        return Err(Error::load(
            &xpath,
            format!("{} index entries, expected {} samples x {} axes", index.len(), n, m.axes.len()),
        ));
    }

    let mut ds = Dataset::new(m.name, m.schema, axes, inputs, targets, index, m.fidelity)
        .map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", manifest_path.display())),
            other => Error::load(manifest_path, other.to_string()),
        })?;
    ds.set_normalization_id(m.normalization_id);
    ds.metadata = m.metadata;
    Ok(ds)
}
