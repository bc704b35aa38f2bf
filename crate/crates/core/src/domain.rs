//! Shared domain types: channels, the 0.1 m depth grid, per-lateral frames.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed depth-bin size in meters.
pub const BIN_SIZE: f64 = 0.1;

const BINS_PER_METER: f64 = 10.0;

/// Guard for divisions by measured quantities (SI units).
pub const EPS: f64 = 1e-9;

/// Rock class at a bin. `0` is sand, `1` is shale or hard rock (the positive class).
pub type Class = u8;
pub const SAND: Class = 0;
pub const SHALE: Class = 1;

/// The eight measured surface channels. All values are stored in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelId {
    /// Weight on bit, N.
    Wob,
    /// Surface torque, N·m.
    Trq,
    /// Rate of penetration, m/s.
    Rop,
    /// Rotary speed, rev/s.
    Rpm,
    /// Input flow rate, m³/s.
    Qin,
    /// Output flow rate, m³/s.
    Qout,
    /// Standpipe pressure, Pa.
    Spp,
    /// Hook load, N.
    Hl,
}

impl ChannelId {
    pub const ALL: [ChannelId; 8] = [
        ChannelId::Wob,
        ChannelId::Trq,
        ChannelId::Rop,
        ChannelId::Rpm,
        ChannelId::Qin,
        ChannelId::Qout,
        ChannelId::Spp,
        ChannelId::Hl,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Wob => "wob",
            ChannelId::Trq => "trq",
            ChannelId::Rop => "rop",
            ChannelId::Rpm => "rpm",
            ChannelId::Qin => "qin",
            ChannelId::Qout => "qout",
            ChannelId::Spp => "spp",
            ChannelId::Hl => "hl",
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelId::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown channel `{s}`")))
    }
}

/// Uniform 0.1 m grid along measured depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthGrid {
    start_depth: f64,
    n_bins: usize,
}

impl DepthGrid {
    pub fn new(start_depth: f64, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Config("depth grid needs at least one bin".into()));
        }
        if !start_depth.is_finite() {
            return Err(Error::Config("depth grid start must be finite".into()));
        }
        Ok(Self { start_depth, n_bins })
    }

    /// Smallest grid aligned to multiples of [`BIN_SIZE`] that covers `[top, bottom]`.
    pub fn covering(top: f64, bottom: f64) -> Result<Self> {
        let start = snap_down(top);
        let probe = Self {
            start_depth: start,
            n_bins: usize::MAX,
        };
        let last = probe
            .bin_of(bottom)
            .ok_or_else(|| Error::Config(format!("invalid depth range [{top}, {bottom}]")))?;
        Self::new(start, last + 1)
    }

    pub fn start_depth(&self) -> f64 {
        self.start_depth
    }

    pub fn bin_size(&self) -> f64 {
        BIN_SIZE
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Top depth of bin `i`.
    pub fn depth_of(&self, i: usize) -> f64 {
        self.start_depth + i as f64 / BINS_PER_METER
    }

    /// Bin containing `depth`, i.e. `i` with `depth_of(i) <= depth < depth_of(i + 1)`.
    pub fn bin_of(&self, depth: f64) -> Option<usize> {
        let x = (depth - self.start_depth) / BIN_SIZE;
        let i = snap_index(x)?;
        (i < self.n_bins).then_some(i)
    }
}

/// Floor with a tolerance for decimal depths that are not exactly representable.
fn snap_index(x: f64) -> Option<usize> {
    if !x.is_finite() {
        return None;
    }
    let r = x.round();
    let i = if (x - r).abs() < 1e-6 { r } else { x.floor() };
    (i >= 0.0).then_some(i as usize)
}

fn snap_down(depth: f64) -> f64 {
    let x = depth / BIN_SIZE;
    let r = x.round();
    let i = if (x - r).abs() < 1e-6 { r } else { x.floor() };
    i / BINS_PER_METER
}

/// Convert a distance in meters into a whole number of bins.
pub fn meters_to_bins(meters: f64) -> Result<usize> {
    let x = meters / BIN_SIZE;
    let r = x.round();
    if !(meters > 0.0) || (x - r).abs() > 1e-6 {
        return Err(Error::FeatureSpec(format!(
            "{meters} m is not a positive multiple of {BIN_SIZE} m"
        )));
    }
    Ok(r as usize)
}

/// One lateral's depth-gridded telemetry and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WellFrame {
    pub well_id: String,
    pub hole_id: String,
    pub grid: DepthGrid,
    /// Indexed by [`ChannelId::index`].
    pub channels: [Vec<Option<f64>>; 8],
    /// Standard deviation of raw samples inside each bin.
    pub within_bin_std: [Vec<Option<f64>>; 8],
    pub labels: Vec<Option<Class>>,
    /// Borehole cross-section, m².
    pub bit_area: f64,
}

impl WellFrame {
    /// Frame with every channel and label missing.
    pub fn empty(well_id: &str, hole_id: &str, grid: DepthGrid, bit_area: f64) -> Self {
        let n = grid.n_bins();
        Self {
            well_id: well_id.to_owned(),
            hole_id: hole_id.to_owned(),
            grid,
            channels: std::array::from_fn(|_| vec![None; n]),
            within_bin_std: std::array::from_fn(|_| vec![None; n]),
            labels: vec![None; n],
            bit_area,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.grid.n_bins()
    }

    pub fn channel(&self, id: ChannelId) -> &[Option<f64>] {
        &self.channels[id.index()]
    }

    pub fn channel_mut(&mut self, id: ChannelId) -> &mut Vec<Option<f64>> {
        &mut self.channels[id.index()]
    }

    pub fn std_of(&self, id: ChannelId) -> &[Option<f64>] {
        &self.within_bin_std[id.index()]
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_bins();
        let bad = |what: &str| Err(Error::Config(format!("{}/{}: {what}", self.well_id, self.hole_id)));
        if self.channels.iter().any(|c| c.len() != n) || self.within_bin_std.iter().any(|c| c.len() != n) {
            return bad("channel length differs from grid");
        }
        if self.labels.len() != n {
            return bad("label length differs from grid");
        }
        if self
            .within_bin_std
            .iter()
            .flatten()
            .flatten()
            .any(|s| !(*s >= 0.0))
        {
            return bad("negative within-bin std");
        }
        if self.labels.iter().flatten().any(|c| *c > 1) {
            return bad("label outside {0, 1}");
        }
        if !(self.bit_area > 0.0) {
            return bad("bit area must be positive");
        }
        Ok(())
    }

    /// Truncate to the first `n_bins` bins.
    pub fn truncated(&self, n_bins: usize) -> Result<Self> {
        let n = n_bins.min(self.n_bins());
        let grid = DepthGrid::new(self.grid.start_depth(), n)?;
        let cut = |v: &Vec<Option<f64>>| v[..n].to_vec();
        Ok(Self {
            well_id: self.well_id.clone(),
            hole_id: self.hole_id.clone(),
            grid,
            channels: std::array::from_fn(|i| cut(&self.channels[i])),
            within_bin_std: std::array::from_fn(|i| cut(&self.within_bin_std[i])),
            labels: self.labels[..n].to_vec(),
            bit_area: self.bit_area,
        })
    }
}

/// Interval lengths, true classes and scores for length-weighted metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBins {
    lengths: Vec<f64>,
    y: Vec<Class>,
    scores: Vec<f64>,
}

impl LabeledBins {
    pub fn new(lengths: Vec<f64>, y: Vec<Class>, scores: Vec<f64>) -> Result<Self> {
        if lengths.len() != y.len() || y.len() != scores.len() {
            return Err(Error::Config("lengths, classes and scores differ in length".into()));
        }
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("interval lengths must be positive".into()));
        }
        Ok(Self { lengths, y, scores })
    }

    /// Every interval one grid bin long.
    pub fn uniform(y: Vec<Class>, scores: Vec<f64>) -> Result<Self> {
        Self::new(vec![BIN_SIZE; y.len()], y, scores)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn y(&self) -> &[Class] {
        &self.y
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Share of class-1 bins among labeled bins.
pub fn class_share(frame: &WellFrame) -> Result<f64> {
    let (pos, total) = frame
        .labels
        .iter()
        .flatten()
        .fold((0usize, 0usize), |(p, t), c| (p + usize::from(*c == SHALE), t + 1));
    if total == 0 {
        return Err(Error::NoLabeledBins);
    }
    Ok(pos as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with(labels: Vec<Option<Class>>) -> WellFrame {
        let grid = DepthGrid::new(1000.0, labels.len()).unwrap();
        let mut f = WellFrame::empty("w", "h", grid, 0.03);
        f.labels = labels;
        f
    }

    #[test]
    fn class_share_counts_labeled_bins_only() {
        assert_eq!(class_share(&frame_with(vec![Some(1); 5])).unwrap(), 1.0);
        let f = frame_with(vec![Some(0), Some(0), Some(0), Some(1)]);
        assert_eq!(class_share(&f).unwrap(), 0.25);
        let f = frame_with(vec![Some(0), None, Some(1)]);
        assert_eq!(class_share(&f).unwrap(), 0.5);
        assert!(matches!(
            class_share(&frame_with(vec![None, None])),
            Err(Error::NoLabeledBins)
        ));
    }

    #[test]
    fn bin_index_roundtrip() {
        for start in [0.0, 1000.0, 2345.6, 987.3] {
            let g = DepthGrid::new(start, 5000).unwrap();
            for i in 0..g.n_bins() {
                assert_eq!(g.bin_of(g.depth_of(i)), Some(i), "start {start} bin {i}");
                assert_eq!(g.bin_of(g.depth_of(i) + 0.05), Some(i));
            }
            assert_eq!(g.bin_of(g.depth_of(5000)), None);
            assert_eq!(g.bin_of(start - 0.05), None);
        }
    }

    #[test]
    fn covering_grid_includes_both_ends() {
        let g = DepthGrid::covering(1000.03, 1000.3).unwrap();
        assert_eq!(g.start_depth(), 1000.0);
        assert_eq!(g.n_bins(), 4);
        assert_eq!(g.bin_of(1000.3), Some(3));
    }

    #[test]
    fn meters_to_bins_rejects_off_grid() {
        assert_eq!(meters_to_bins(0.5).unwrap(), 5);
        assert_eq!(meters_to_bins(10.0).unwrap(), 100);
        assert!(meters_to_bins(0.25).is_err());
        assert!(meters_to_bins(0.0).is_err());
    }

    #[test]
    fn channel_names_are_unique_and_parse_back() {
        for c in ChannelId::ALL {
            assert_eq!(c.name().parse::<ChannelId>().unwrap(), c);
        }
        let mut names: Vec<_> = ChannelId::ALL.iter().map(|c| c.name()).collect();
        names.dedup();
        assert_eq!(names.len(), 8);
    }
}
