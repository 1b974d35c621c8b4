//! Network checkpoints: a TOML manifest next to a flat little-endian `f64`
//! parameter file. Parameters are written layer by layer, each layer's
//! weights (row-major, `out x in`) followed by its biases.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{self, u64_string};

use super::net::{DenseNet, Init, LeakyRelu};

pub const NET_FORMAT: &str = "mfrpn-net/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl Precision {
    pub fn ensure_supported(self) -> Result<()> {
        match self {
            Precision::F64 => Ok(()),
            Precision::F32 => Err(Error::InvalidConfig(
                "single precision is not available in this build; use precision = \"f64\"".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetManifest {
    pub format: String,
    pub dims: Vec<usize>,
    pub hidden_activation: String,
    pub negative_slope: f64,
    pub output_activation: String,
    pub init: Init,
    #[serde(with = "u64_string")]
    pub seed: u64,
    pub precision: Precision,
    pub byte_order: String,
    pub param_count: usize,
    pub params_file: String,
    pub sha256: String,
}

/// Parameter bytes exactly as they are written to disk.
pub fn param_bytes(net: &DenseNet) -> Vec<u8> {
    io_util::f64s_to_le_bytes(&net.params_flat())
}

fn paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf, String) {
    let file = format!("{stem}.bin");
    (dir.join(format!("{stem}.toml")), dir.join(&file), file)
}

/// Writes `<dir>/<stem>.toml` and `<dir>/<stem>.bin`.
pub fn write_net(net: &DenseNet, dir: &Path, stem: &str) -> Result<NetManifest> {
    let (manifest_path, bin_path, bin_name) = paths(dir, stem);
    let bytes = param_bytes(net);
    let manifest = NetManifest {
        format: NET_FORMAT.to_string(),
        dims: net.dims().to_vec(),
        hidden_activation: "leaky-relu".to_string(),
        negative_slope: net.activation().negative_slope,
        output_activation: "linear".to_string(),
        init: net.init(),
        seed: net.seed(),
        precision: Precision::F64,
        byte_order: "little-endian".to_string(),
        param_count: net.param_count(),
        params_file: bin_name,
        sha256: io_util::sha256_hex(&bytes),
    };
    io_util::write(&bin_path, &bytes)?;
    io_util::write_toml(&manifest_path, &manifest)?;
    Ok(manifest)
}

pub fn read_net(dir: &Path, stem: &str) -> Result<DenseNet> {
    let (manifest_path, _, _) = paths(dir, stem);
    let m: NetManifest = io_util::read_toml(&manifest_path)?;
    if m.format != NET_FORMAT {
        return Err(Error::load(
            &manifest_path,
            format!("unsupported format {:?}", m.format),
        ));
    }
    m.precision.ensure_supported()?;
    if m.byte_order != "little-endian" {
        return Err(Error::load(&manifest_path, "only little-endian parameters are supported"));
    }
    let bin_path = dir.join(&m.params_file);
    let bytes = io_util::read_verified(&bin_path, &m.sha256)?;
    let values = io_util::le_bytes_to_f64s(&bytes)
        .ok_or_else(|| Error::load(&bin_path, "length is not a multiple of 8 bytes"))?;
    if values.len() != m.param_count {
        return Err(Error::load(
            &bin_path,
            format!("{} parameters on disk, manifest records {}", values.len(), m.param_count),
        ));
    }
    let activation = LeakyRelu::new(m.negative_slope)?;
    let mut net = DenseNet::new(&m.dims, activation, m.init, m.seed)?;
    if net.param_count() != m.param_count {
        return Err(Error::load(
            &manifest_path,
            format!("dims {:?} imply {} parameters, manifest records {}", m.dims, net.param_count(), m.param_count),
        ));
    }
    net.set_params_flat(&values)?;
    Ok(net)
}
