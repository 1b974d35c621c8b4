//! Dense feed-forward networks with hand-written backpropagation and Adam.

mod adam;
pub mod checkpoint;
mod net;

pub use adam::{AdamConfig, AdamState, DecayMode};
pub use checkpoint::{param_bytes, read_net, write_net, NetManifest, Precision};
pub use net::{
    glorot_init, validate_dims, DenseNet, Gradients, Init, Layer, LeakyRelu, Trace,
    DEFAULT_NEGATIVE_SLOPE,
};
