//! Datasets over gridded coordinates, Z-score statistics, the on-disk
//! format and synthetic multi-fidelity generators.

mod dataset;
mod format;
mod norm;
mod schema;
pub mod synthetic;

pub use dataset::{grid_index, Axis, Dataset, Fidelity, RAW};
pub use format::{load_dataset, read_manifest, write_dataset, DatasetManifest, DATASET_FORMAT};
pub use norm::{compute_stats, denormalize, normalize, FeatureStats, NormStats, STD_FLOOR};
pub use schema::{
    Feature, Schema, CLIMATE_LEVELS_HPA, HEAT_TENDENCY, MOISTURE_LEVEL_OFFSET, MOISTURE_TENDENCY,
};
pub use synthetic::{gen_synthetic_mf, SyntheticSets, SyntheticSpec};
