use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Feature, HEAT_TENDENCY, MOISTURE_TENDENCY};
use crate::error::{Error, Result};
use crate::io_util::u64_string;
use crate::matrix::Matrix;
use crate::rpn::PredictiveEnsemble;
use crate::seed;

use super::scores::{crps_fair, crps_point, mae, r2};

pub const HEAT_SCALE: f64 = 1004.6;
pub const MOISTURE_SCALE: f64 = 2.26e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    Global,
    LonLat,
    PressureLat,
    Temporal,
}

impl Grouping {
    pub const ALL: [Grouping; 4] = [Self::Global, Self::LonLat, Self::PressureLat, Self::Temporal];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Global => "global",
            Self::LonLat => "lon-lat",
            Self::PressureLat => "pressure-lat",
            Self::Temporal => "temporal",
        }
    }

    /// Axes kept as group keys; every other axis is concatenated. For
    /// `pressure-lat` the level comes from the output variable itself.
    pub fn key_axes(self) -> &'static [&'static str] {
        match self {
            Self::Global => &[],
            Self::LonLat => &["lat", "lon"],
            Self::PressureLat => &["lat"],
            Self::Temporal => &["time"],
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown grouping {s:?}; expected one of global, lon-lat, pressure-lat, temporal"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R2Mode {
    #[default]
    Raw,
    /// Negative values shown as 0 in figure-mode exports.
    Clipped,
}

impl fmt::Display for R2Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::Clipped => "clipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub heat_scale: f64,
    pub moisture_scale: f64,
    pub crps_samples: usize,
    #[serde(with = "u64_string")]
    pub crps_seed: u64,
    pub r2_mode: R2Mode,
    /// Consecutive time steps averaged into one day before scoring.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub daily_window: Option<usize>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            heat_scale: HEAT_SCALE,
            moisture_scale: MOISTURE_SCALE,
            crps_samples: 32,
            crps_seed: 0,
            r2_mode: R2Mode::Raw,
            daily_window: None,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("heat_scale", self.heat_scale), ("moisture_scale", self.moisture_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.crps_samples < 2 {
            return Err(Error::InvalidConfig(format!(
                "crps_samples must be at least 2, got {}",
                self.crps_samples
            )));
        }
        if self.daily_window == Some(0) {
            return Err(Error::InvalidConfig("daily_window must be at least 1".into()));
        }
        Ok(())
    }

    /// MAE scale for an output feature, chosen by its group.
    pub fn scale_for(&self, feature: &Feature) -> f64 {
        match feature.group.as_deref() {
            Some(HEAT_TENDENCY) => self.heat_scale,
            Some(MOISTURE_TENDENCY) => self.moisture_scale,
            _ => 1.0,
        }
    }

    /// Sorted member indices scored by CRPS. `None` for a single member,
    /// which is scored as a point mass.
    pub fn crps_members(&self, n_members: usize) -> Option<Vec<usize>> {
        if n_members < 2 {
            return None;
        }
        if n_members <= self.crps_samples {
            return Some((0..n_members).collect());
        }
        let mut rng = seed::rng(seed::derive(self.crps_seed, seed::TAG_CRPS));
        let mut idx = rand::seq::index::sample(&mut rng, n_members, self.crps_samples).into_vec();
        idx.sort_unstable();
        Some(idx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    /// Index of the group along each key axis.
    pub group_index: Vec<u32>,
    /// Coordinate value of the group along each key axis.
    pub group_values: Vec<f64>,
    pub variable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_hpa: Option<f64>,
    pub scale: f64,
    pub count: usize,
    pub mae: f64,
    /// Missing when the group's targets have zero variance.
    pub r2: Option<f64>,
    pub crps: f64,
    pub sigma_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub grouping: Grouping,
    pub group_axes: Vec<String>,
    pub config: MetricConfig,
    pub n_members: usize,
    /// Members used as CRPS samples; empty for point-mass scoring.
    pub crps_members: Vec<usize>,
    /// Scored points after any daily averaging.
    pub n_points: usize,
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    /// R² as shown in figure-mode exports.
    pub fn display_r2(&self, row: &MetricRow) -> Option<f64> {
        match self.config.r2_mode {
            R2Mode::Raw => row.r2,
            R2Mode::Clipped => row.r2.map(|v| v.max(0.0)),
        }
    }
}

struct Points<'a> {
    coords: Cow<'a, [u32]>,
    targets: Cow<'a, Matrix>,
    pred: Cow<'a, PredictiveEnsemble>,
}

fn daily_average<'a>(
    dataset: &'a Dataset,
    predictive: &'a PredictiveEnsemble,
    window: Option<usize>,
) -> Result<Points<'a>> {
    let Some(w) = window else {
        return Ok(Points {
            coords: Cow::Borrowed(dataset.coord_index()),
            targets: Cow::Borrowed(dataset.targets()),
            pred: Cow::Borrowed(predictive),
        });
    };
    let t = dataset.axis_position("time").ok_or_else(|| {
        Error::InvalidConfig("daily averaging needs a \"time\" axis in the dataset".into())
    })?;
    let mut days: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
    for i in 0..dataset.len() {
        let mut key = dataset.sample_coords(i).to_vec();
        key[t] /= w as u32;
        days.entry(key).or_default().push(i);
    }
    let average = |m: &Matrix| {
        let mut out = Matrix::zeros(days.len(), m.cols());
        for (r, members) in days.values().enumerate() {
            let row = out.row_mut(r);
            for &i in members {
                for (o, v) in row.iter_mut().zip(m.row(i)) {
                    *o += v;
                }
            }
            row.iter_mut().for_each(|o| *o /= members.len() as f64);
        }
        out
    };
    let targets = average(dataset.targets());
    let outputs = predictive.member_outputs.iter().map(average).collect();
    let coords = days.keys().flatten().copied().collect::<Vec<_>>();
    Ok(Points {
        coords: Cow::Owned(coords),
        targets: Cow::Owned(targets),
        pred: Cow::Owned(PredictiveEnsemble::from_members(outputs)?),
    })
}

/// Scores `predictive` (aligned row-for-row with `dataset`) per group and
/// output variable.
pub fn grouped_metrics(
    model: &str,
    dataset: &Dataset,
    predictive: &PredictiveEnsemble,
    grouping: Grouping,
    config: &MetricConfig,
) -> Result<MetricReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_out = dataset.targets().cols();
    if predictive.mean.rows() != dataset.len() || predictive.mean.cols() != n_out {
        return Err(Error::Shape(format!(
            "predictions are {}x{} but the dataset has {} samples of {} outputs",
            predictive.mean.rows(),
            predictive.mean.cols(),
            dataset.len(),
            n_out
        )));
    }
    let key_pos = grouping
        .key_axes()
        .iter()
        .map(|name| {
            dataset.axis_position(name).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "grouping {grouping} needs a {name:?} axis; the dataset has {:?}",
                    dataset.axes().iter().map(|a| a.name.as_str()).collect::<Vec<_>>()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let window = config.daily_window;
    let points = daily_average(dataset, predictive, window)?;
    let n_axes = dataset.axes().len();
    let n_points = points.targets.rows();

    let mut groups: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
    for p in 0..n_points {
        let c = &points.coords[p * n_axes..(p + 1) * n_axes];
        groups.entry(key_pos.iter().map(|&k| c[k]).collect()).or_default().push(p);
    }
    let crps_members = config.crps_members(points.pred.len());
    let time_pos = dataset.axis_position("time");
    let group_value = |k: usize, idx: u32| {
        let pos = key_pos[k];
        let step = match (window, time_pos) {
            (Some(w), Some(t)) if t == pos => idx as usize * w,
            _ => idx as usize,
        };
        dataset.axes()[pos].values[step]
    };

    let features = &dataset.schema().output_features;
    let pred = &points.pred;
    let targets = &points.targets;
    let group_list: Vec<(&Vec<u32>, &Vec<usize>)> = groups.iter().collect();
    let rows = group_list
        .par_iter()
        .map(|(key, members)| {
            let group_values: Vec<f64> = key.iter().enumerate().map(|(k, &i)| group_value(k, i)).collect();
            (0..n_out)
                .map(|j| {
                    let y: Vec<f64> = members.iter().map(|&p| targets.get(p, j)).collect();
                    let yhat: Vec<f64> = members.iter().map(|&p| pred.mean.get(p, j)).collect();
                    let scale = config.scale_for(&features[j]);
                    let r2 = match r2(&yhat, &y) {
                        Ok(v) => Some(v),
                        Err(Error::UndefinedR2 | Error::InsufficientData { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    let mut crps_sum = 0.0;
                    let mut samples = Vec::new();
                    for (&p, (&yt, &yp)) in members.iter().zip(y.iter().zip(&yhat)) {
                        crps_sum += match &crps_members {
                            None => crps_point(yp, yt),
                            Some(idx) => {
                                samples.clear();
                                samples.extend(idx.iter().map(|&m| pred.member_outputs[m].get(p, j)));
                                crps_fair(&samples, yt)?
                            }
                        };
                    }
                    let sigma_sum: f64 = members.iter().map(|&p| pred.sigma.get(p, j)).sum();
                    let n = members.len() as f64;
                    Ok(MetricRow {
                        group_index: (*key).clone(),
                        group_values: group_values.clone(),
                        variable: features[j].name.clone(),
                        output_group: features[j].group.clone(),
                        level_hpa: features[j].level_hpa,
                        scale,
                        count: members.len(),
                        mae: mae(&yhat, &y, scale)?,
                        r2,
                        crps: crps_sum / n,
                        sigma_mean: sigma_sum / n,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(MetricReport {
        model: model.to_string(),
        grouping,
        group_axes: grouping.key_axes().iter().map(|s| s.to_string()).collect(),
        config: config.clone(),
        n_members: points.pred.len(),
        crps_members: crps_members.unwrap_or_default(),
        n_points,
        rows,
    })
}
