use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::io_util::{self, u64_string};
use crate::rpn::checkpoint::{read_member, read_stats, write_member, write_stats, MemberRecord};
use crate::rpn::TrainConfig;

use super::{MfEnsemble, MfMember};

pub const MF_FORMAT: &str = "mfrpn-mf-ensemble/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MfMemberRecord {
    index: usize,
    #[serde(with = "u64_string")]
    member_seed: u64,
    lf: MemberRecord,
    hf: MemberRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MfManifest {
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
    members: Vec<MfMemberRecord>,
}

/// Each member directory holds `lf_*` and `hf_*` network checkpoints and
/// bootstrap subsets; `mf_ensemble.toml` records seeds and normalization.
pub fn save_mf_ensemble(ensemble: &MfEnsemble, dir: &Path, stats: Option<&NormStats>) -> Result<()> {
    let members = ensemble
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(MfMemberRecord {
                index: i,
                member_seed: m.member_seed,
                lf: write_member(&m.lf, dir, i, "lf_")?,
                hf: write_member(&m.hf, dir, i, "hf_")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = MfManifest {
        format: MF_FORMAT.to_string(),
        kind: "mf-rpn".to_string(),
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
    io_util::write_toml(&dir.join("mf_ensemble.toml"), &manifest)
}

pub fn load_mf_ensemble(dir: &Path) -> Result<(MfEnsemble, Option<NormStats>)> {
    let path = dir.join("mf_ensemble.toml");
    let m: MfManifest = io_util::read_toml(&path)?;
    if m.format != MF_FORMAT {
        return Err(Error::load(&path, format!("unsupported format {:?}", m.format)));
    }
    if m.members.len() != m.member_count {
        return Err(Error::load(&path, "member_count disagrees with the member list"));
    }
    let members = m
        .members
        .iter()
        .map(|r| {
            MfMember::new(
                read_member(dir, &r.lf, "lf_")?,
                read_member(dir, &r.hf, "hf_")?,
                r.member_seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = read_stats(dir, &m.normalization_stats)?;
    Ok((
        MfEnsemble {
            members,
            normalization_id: m.normalization_id,
            config: m.config,
            steps_trained: m.steps_trained,
            loss_traces: Vec::new(),
        },
        stats,
    ))
}
