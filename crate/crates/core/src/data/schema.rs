use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEAT_TENDENCY: &str = "heat_tendency";
pub const MOISTURE_TENDENCY: &str = "moisture_tendency";

/// Nominal mid-level pressures [hPa] of the 26 retained model levels, top
/// of atmosphere first.
pub const CLIMATE_LEVELS_HPA: [f64; 26] = [
    3.64, 7.59, 14.36, 24.61, 38.27, 54.60, 72.01, 87.82, 103.32, 121.55, 142.99, 168.23, 197.91,
    232.83, 273.91, 322.24, 379.10, 445.99, 524.69, 609.78, 691.39, 763.40, 820.86, 859.53,
    887.02, 912.64,
];

/// Humidity and moisture tendency drop this many levels from the top.
pub const MOISTURE_LEVEL_OFFSET: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_hpa: Option<f64>,
    /// Output group used to pick the MAE scaling constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl Feature {
    pub fn new(name: impl Into<String>, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            units: units.into(),
            level_hpa: None,
            group: None,
        }
    }

    pub fn at_level(mut self, hpa: f64) -> Self {
        self.level_hpa = Some(hpa);
        self
    }

    pub fn in_group(mut self, group: &str) -> Self {
        self.group = Some(group.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub input_features: Vec<Feature>,
    pub output_features: Vec<Feature>,
    pub coordinate_axes: Vec<String>,
}

impl Schema {
    /// Convection-parameterization layout: 26 temperature and 22 humidity
    /// levels plus four surface fields in, 26 heat and 22 moisture tendency
    /// levels out.
    pub fn climate() -> Self {
        let moist = &CLIMATE_LEVELS_HPA[MOISTURE_LEVEL_OFFSET..];
        let mut inputs: Vec<Feature> = CLIMATE_LEVELS_HPA
            .iter()
            .enumerate()
            .map(|(i, &p)| Feature::new(format!("T_{}", i + 1), "K").at_level(p))
            .collect();
        inputs.extend(
            moist
                .iter()
                .enumerate()
                .map(|(i, &p)| Feature::new(format!("q_{}", i + 1), "kg/kg").at_level(p)),
        );
        inputs.extend([
            Feature::new("P_s", "Pa"),
            Feature::new("SOLIN", "W/m2"),
            Feature::new("H_Cs", "W/m2"),
            Feature::new("lambdaET_s", "W/m2"),
        ]);
        let mut outputs: Vec<Feature> = CLIMATE_LEVELS_HPA
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                Feature::new(format!("dT_{}", i + 1), "K/s")
                    .at_level(p)
                    .in_group(HEAT_TENDENCY)
            })
            .collect();
        outputs.extend(moist.iter().enumerate().map(|(i, &p)| {
            Feature::new(format!("dq_{}", i + 1), "kg/kg/s")
                .at_level(p)
                .in_group(MOISTURE_TENDENCY)
        }));
        Self {
            name: "climate".to_string(),
            input_features: inputs,
            output_features: outputs,
            coordinate_axes: vec!["time".into(), "lat".into(), "lon".into()],
        }
    }

    /// Unitless features `x0..`, `y0..` over the given axes.
    pub fn generic(name: &str, n_inputs: usize, n_outputs: usize, axes: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            input_features: (0..n_inputs).map(|i| Feature::new(format!("x{i}"), "1")).collect(),
            output_features: (0..n_outputs).map(|i| Feature::new(format!("y{i}"), "1")).collect(),
            coordinate_axes: axes.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.input_features.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_features.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in self.input_features.iter().chain(&self.output_features) {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!(
                    "feature name {:?} appears more than once in schema {:?}",
                    f.name, self.name
                )));
            }
        }
        let mut axes = HashSet::new();
        for a in &self.coordinate_axes {
            if !axes.insert(a.as_str()) {
                return Err(Error::Schema(format!("axis {a:?} repeated")));
            }
        }
        Ok(())
    }

    /// Same feature names in the same order.
    pub fn features_match(&self, other: &Schema) -> bool {
        let names = |fs: &[Feature]| fs.iter().map(|f| f.name.clone()).collect::<Vec<_>>();
        names(&self.input_features) == names(&other.input_features)
            && names(&self.output_features) == names(&other.output_features)
    }

    pub fn describe(&self) -> String {
        format!(
            "{} ({} inputs, {} outputs, axes [{}])",
            self.name,
            self.n_inputs(),
            self.n_outputs(),
            self.coordinate_axes.join(", ")
        )
    }
}
