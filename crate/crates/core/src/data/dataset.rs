use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::schema::Schema;

pub const RAW: &str = "raw";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Lf,
    Hf,
    Test,
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fidelity::Lf => "lf",
            Fidelity::Hf => "hf",
            Fidelity::Test => "test",
        })
    }
}

/// One coordinate axis and its (monotone) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_monotone(&self) -> bool {
        let v = &self.values;
        v.windows(2).all(|w| w[0] <= w[1]) || v.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Samples over a coordinate grid: inputs, targets, and for every sample
/// the index of its coordinate along each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    schema: Schema,
    axes: Vec<Axis>,
    inputs: Matrix,
    targets: Matrix,
    /// `n_samples x n_axes`, row-major.
    coord_index: Vec<u32>,
    pub fidelity: Fidelity,
    normalization_id: String,
    /// Provenance (generator settings, seeds) carried through save/load.
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        schema: Schema,
        axes: Vec<Axis>,
        inputs: Matrix,
        targets: Matrix,
        coord_index: Vec<u32>,
        fidelity: Fidelity,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            schema,
            axes,
            inputs,
            targets,
            coord_index,
            fidelity,
            normalization_id: RAW.to_string(),
            metadata: BTreeMap::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Samples laid out as the row-major product of the axes (last axis fastest).
    pub fn on_grid(
        name: impl Into<String>,
        schema: Schema,
        axes: Vec<Axis>,
        inputs: Matrix,
        targets: Matrix,
        fidelity: Fidelity,
    ) -> Result<Self> {
        let index = grid_index(&axes);
        Self::new(name, schema, axes, inputs, targets, index, fidelity)
    }

    /// Generic schema over a single `sample` axis.
    pub fn from_arrays(name: impl Into<String>, inputs: Matrix, targets: Matrix) -> Result<Self> {
        let n = inputs.rows();
        let schema = Schema::generic("generic", inputs.cols(), targets.cols(), &["sample"]);
        let axis = Axis::new("sample", (0..n).map(|i| i as f64).collect());
        Self::on_grid(name, schema, vec![axis], inputs, targets, Fidelity::Hf)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let n = self.inputs.rows();
        if self.inputs.cols() != self.schema.n_inputs() {
            return Err(Error::Schema(format!(
                "inputs have {} columns but the schema declares {} input features",
                self.inputs.cols(),
                self.schema.n_inputs()
            )));
        }
        if self.targets.cols() != self.schema.n_outputs() {
            return Err(Error::Schema(format!(
                "targets have {} columns but the schema declares {} output features",
                self.targets.cols(),
                self.schema.n_outputs()
            )));
        }
        if self.targets.rows() != n {
            return Err(Error::Shape(format!(
                "{n} input rows but {} target rows",
                self.targets.rows()
            )));
        }
        let names: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        if names != self.schema.coordinate_axes {
            return Err(Error::Schema(format!(
                "axes {names:?} do not match the schema axes {:?}",
                self.schema.coordinate_axes
            )));
        }
        for a in &self.axes {
            if !a.is_monotone() {
                return Err(Error::Data(format!("axis {:?} is not monotone", a.name)));
            }
        }
        if self.coord_index.len() != n * self.axes.len() {
            return Err(Error::Shape(format!(
                "coordinate index holds {} entries, expected {}",
                self.coord_index.len(),
                n * self.axes.len()
            )));
        }
        for (k, &c) in self.coord_index.iter().enumerate() {
            let a = &self.axes[k % self.axes.len()];
            if c as usize >= a.len() {
                return Err(Error::Data(format!(
                    "sample {} points past the end of axis {:?}",
                    k / self.axes.len(),
                    a.name
                )));
            }
        }
        for (what, m, feats) in [
            ("input", &self.inputs, &self.schema.input_features),
            ("target", &self.targets, &self.schema.output_features),
        ] {
            if let Some((r, c)) = m.first_non_finite() {
                return Err(Error::Data(format!(
                    "non-finite {what} at sample {r}, feature {:?}",
                    feats[c].name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis_position(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn coord_index(&self) -> &[u32] {
        &self.coord_index
    }

    /// Axis indices of sample `i`.
    pub fn sample_coords(&self, i: usize) -> &[u32] {
        let k = self.axes.len();
        &self.coord_index[i * k..(i + 1) * k]
    }

    pub fn normalization_id(&self) -> &str {
        &self.normalization_id
    }

    pub fn is_raw(&self) -> bool {
        self.normalization_id == RAW
    }

    pub(crate) fn with_values(&self, inputs: Matrix, targets: Matrix, normalization_id: String) -> Dataset {
        Dataset {
            inputs,
            targets,
            normalization_id,
            ..self.clone()
        }
    }

    pub(crate) fn set_normalization_id(&mut self, id: String) {
        self.normalization_id = id;
    }

    /// Keeps only the listed samples, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let k = self.axes.len();
        let mut coord_index = Vec::with_capacity(indices.len() * k);
        for &i in indices {
            coord_index.extend_from_slice(self.sample_coords(i));
        }
        Dataset {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select_rows(indices),
            coord_index,
            ..self.clone()
        }
    }
}

pub fn grid_index(axes: &[Axis]) -> Vec<u32> {
    let n: usize = axes.iter().map(Axis::len).product();
    let mut out = Vec::with_capacity(n * axes.len());
    let mut idx = vec![0u32; axes.len()];
    for _ in 0..n {
        out.extend_from_slice(&idx);
        for d in (0..axes.len()).rev() {
            idx[d] += 1;
            if (idx[d] as usize) < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}
