//! Ensemble checkpoints: one directory per member holding the trainable and
//! prior network checkpoints plus the bootstrap subset, and a top-level
//! `ensemble.toml` manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::io_util::{self, u64_string};
use crate::nnet::{read_net, write_net};

use super::{Ensemble, RpnMember, TrainConfig};

pub const ENSEMBLE_FORMAT: &str = "mfrpn-ensemble/1";
pub(crate) const STATS_FILE: &str = "norm_stats.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct MemberRecord {
    pub index: usize,
    #[serde(with = "u64_string")]
    pub member_seed: u64,
    pub dir: String,
    pub prior_scale: f64,
    pub bootstrap_file: String,
    pub bootstrap_len: usize,
    pub bootstrap_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnsembleManifest {
    format: String,
    kind: String,
    #[serde(with = "u64_string")]
    ensemble_seed: u64,
    prior_scale: f64,
    bootstrap_fraction: f64,
    member_count: usize,
    steps_trained: u64,
    normalization_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization_stats: Option<String>,
    config: TrainConfig,
    members: Vec<MemberRecord>,
}

pub(crate) fn member_dir(index: usize) -> String {
    format!("member_{index:04}")
}

/// Writes `<prefix>trainable`, `<prefix>prior` and `<prefix>bootstrap.bin` into `dir`.
pub(crate) fn write_member(
    member: &RpnMember,
    root: &Path,
    index: usize,
    prefix: &str,
) -> Result<MemberRecord> {
    let rel = member_dir(index);
    let dir = root.join(&rel);
    write_net(&member.trainable, &dir, &format!("{prefix}trainable"))?;
    write_net(&member.prior, &dir, &format!("{prefix}prior"))?;
    let idx: Vec<u32> = member
        .bootstrap_indices
        .iter()
        .map(|&i| u32::try_from(i).expect("bootstrap index fits in u32"))
        .collect();
    let bytes = io_util::u32s_to_le_bytes(&idx);
    let bootstrap_file = format!("{prefix}bootstrap.bin");
    io_util::write(&dir.join(&bootstrap_file), &bytes)?;
    Ok(MemberRecord {
        index,
        member_seed: member.member_seed,
        dir: rel,
        prior_scale: member.prior_scale,
        bootstrap_file,
        bootstrap_len: idx.len(),
        bootstrap_sha256: io_util::sha256_hex(&bytes),
    })
}

pub(crate) fn read_member(root: &Path, rec: &MemberRecord, prefix: &str) -> Result<RpnMember> {
    let dir = root.join(&rec.dir);
    let trainable = read_net(&dir, &format!("{prefix}trainable"))?;
    let prior = read_net(&dir, &format!("{prefix}prior"))?;
    let path = dir.join(&rec.bootstrap_file);
    let bytes = io_util::read_verified(&path, &rec.bootstrap_sha256)?;
    let idx = io_util::le_bytes_to_u32s(&bytes)
        .ok_or_else(|| Error::load(&path, "length is not a multiple of 4 bytes"))?;
    if idx.len() != rec.bootstrap_len {
        return Err(Error::load(&path, "bootstrap length disagrees with the manifest"));
    }
    Ok(RpnMember {
        trainable,
        prior,
        prior_scale: rec.prior_scale,
        member_seed: rec.member_seed,
        bootstrap_indices: idx.into_iter().map(|i| i as usize).collect(),
    })
}

pub(crate) fn write_stats(root: &Path, stats: Option<&NormStats>) -> Result<Option<String>> {
    match stats {
        Some(s) => {
            s.save(&root.join(STATS_FILE))?;
            Ok(Some(STATS_FILE.to_string()))
        }
        None => Ok(None),
    }
}

pub(crate) fn read_stats(root: &Path, file: &Option<String>) -> Result<Option<NormStats>> {
    file.as_ref()
        .map(|f| NormStats::load(&root.join(f)))
        .transpose()
}

/// Saves an ensemble (and optionally the normalization statistics it was
/// trained under) into `dir`.
pub fn save_ensemble(ensemble: &Ensemble, dir: &Path, stats: Option<&NormStats>) -> Result<()> {
    let members = ensemble
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| write_member(m, dir, i, ""))
        .collect::<Result<Vec<_>>>()?;
    let manifest = EnsembleManifest {
        format: ENSEMBLE_FORMAT.to_string(),
        kind: "sf-rpn".to_string(),
        ensemble_seed: ensemble.config.ensemble_seed,
        prior_scale: ensemble.config.prior_scale,
        bootstrap_fraction: ensemble.config.bootstrap_fraction,
        member_count: ensemble.members.len(),
        steps_trained: ensemble.steps_trained,
        normalization_id: ensemble.normalization_id.clone(),
        normalization_stats: write_stats(dir, stats)?,
        config: ensemble.config.clone(),
        members,
    };
    io_util::write_toml(&dir.join("ensemble.toml"), &manifest)
}

pub fn load_ensemble(dir: &Path) -> Result<(Ensemble, Option<NormStats>)> {
    let path = dir.join("ensemble.toml");
    let m: EnsembleManifest = io_util::read_toml(&path)?;
    if m.format != ENSEMBLE_FORMAT {
        return Err(Error::load(&path, format!("unsupported format {:?}", m.format)));
    }
    if m.members.len() != m.member_count {
        return Err(Error::load(&path, "member_count disagrees with the member list"));
    }
    let members = m
        .members
        .iter()
        .map(|r| read_member(dir, r, ""))
        .collect::<Result<Vec<_>>>()?;
    let stats = read_stats(dir, &m.normalization_stats)?;
    let ensemble = Ensemble {
        members,
        normalization_id: m.normalization_id,
        config: m.config,
        steps_trained: m.steps_trained,
        loss_traces: Vec::new(),
    };
    ensemble.check_consistent()?;
    Ok((ensemble, stats))
}
