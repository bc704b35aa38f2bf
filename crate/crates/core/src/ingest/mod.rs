//! Raw-file ingestion: parse the canonical CSVs, clip to the horizontal
//! section, aggregate onto the 0.1 m grid, forward-fill and label.

mod frame_io;
mod grid;
mod parse;
mod pipeline;

use serde::{Deserialize, Serialize};

use crate::domain::{ChannelId, Class};

pub use frame_io::{decode_frame, encode_frame, read_frame, write_frame};
pub use grid::{
    bin_records, bin_to_grid, clip_horizontal, forward_fill, labels_to_grid, BinnedChannel, Filled,
};
pub use parse::{
    parse_bounds, parse_bounds_str, parse_lithology, parse_lithology_str, parse_mwd, parse_mwd_str,
    BadRow, BadRowPolicy, MwdColumn, MwdFile, MWD_COLUMNS,
};
pub use pipeline::{digest, run_pipeline, Manifest, PipelineConfig, PipelineRun, StageRecord};

/// One measurement parsed from an MWD file, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub well_id: String,
    pub hole_id: String,
    pub depth: f64,
    pub channel: ChannelId,
    pub value: f64,
}

/// Lithology map entry covering `[top, bottom)` meters of measured depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LithoInterval {
    pub well_id: String,
    pub top: f64,
    pub bottom: f64,
    pub class: Class,
}

/// Horizontal-section limits and bit cross-section for one well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellBounds {
    pub start: f64,
    pub end: f64,
    pub bit_area: f64,
}
