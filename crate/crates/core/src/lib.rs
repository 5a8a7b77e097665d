//! Higher-order spike-and-slab Boltzmann machine.
//!
//! Three groups of binary spike units `f` (one per block), `g` and `h` (a grid
//! of `M x N` per block) gate real-valued slabs, one per `(g, h)` pair, whose
//! filters combine to explain a real-valued visible vector.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checkpoint;
pub mod error;
pub mod features;
pub mod filters;
pub mod gibbs;
pub mod meanfield;
pub mod model;
pub mod oracle;
pub mod params;
pub mod toydata;
pub mod trainer;
pub mod verify;

pub use checkpoint::{ChainSnapshot, Checkpoint, Progress};
pub use error::{Error, Result};
pub use features::{DecodabilityReport, DecodeOptions, FeatureKind, FeatureSpec, LinearModel};
pub use gibbs::{ChainInit, ChainState, GibbsConfig};
pub use meanfield::{MeanFieldState, MfConfig, MfInit};
pub use model::{BiasSign, Covariance, GaussianSpec};
pub use oracle::{ConfigTable, EnumBudget};
pub use params::{BlockShape, LatentSample, ModelParams, ParamGrad, SpikeConfig};
pub use toydata::{Dataset, ToyConfig};
pub use trainer::{EpochLog, Rows, TrainConfig, Trainer};
