//! Rock type identification at the drilling bit from surface drilling
//! telemetry: preprocessing, feature engineering, classifiers, grouped
//! cross-validation and a physics-based synthetic well generator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas in the numeric kernels.
#![allow(clippy::needless_range_loop)]

pub mod domain;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod ingest;
pub mod models;
pub mod synth;

pub use domain::{class_share, ChannelId, Class, DepthGrid, LabeledBins, WellFrame, BIN_SIZE};
pub use error::{Error, ErrorKind, Result};
pub use features::{assemble_matrix, FeatureMatrix, FeatureSpec, Family};
pub use models::{fit, ModelSpec, TrainedModel};
