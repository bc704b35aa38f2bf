use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{ChannelId, Class, DepthGrid};
use crate::error::{Error, Result};

use super::{LithoInterval, RawRecord, WellBounds};

/// Keep only records inside their well's `[start, end]` horizontal section.
pub fn clip_horizontal(
    records: Vec<RawRecord>,
    bounds: &BTreeMap<String, WellBounds>,
) -> Result<Vec<RawRecord>> {
    let missing: BTreeSet<&str> = records
        .iter()
        .filter(|r| !bounds.contains_key(&r.well_id))
        .map(|r| r.well_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingBounds(missing.into_iter().map(str::to_owned).collect()));
    }
    Ok(records
        .into_iter()
        .filter(|r| {
            let b = &bounds[&r.well_id];
            r.depth >= b.start && r.depth <= b.end
        })
        .collect())
}

/// Per-bin aggregate of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedChannel {
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
    pub count: Vec<usize>,
}

/// Average `(depth, value)` samples per bin with the population standard
/// deviation. Samples outside the grid are ignored.
pub fn bin_to_grid(samples: &[(f64, f64)], grid: &DepthGrid) -> BinnedChannel {
    let n = grid.n_bins();
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n];
    for &(d, v) in samples {
        if let Some(i) = grid.bin_of(d) {
            buckets[i].push(v);
        }
    }
    let mut mean = Vec::with_capacity(n);
    let mut std = Vec::with_capacity(n);
    let mut count = Vec::with_capacity(n);
    for b in &buckets {
        count.push(b.len());
        if b.is_empty() {
            mean.push(None);
            std.push(None);
            continue;
        }
        let k = b.len() as f64;
        let m = b.iter().sum::<f64>() / k;
        let var = b.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / k;
        mean.push(Some(m));
        std.push(Some(var.sqrt()));
    }
    BinnedChannel { mean, std, count }
}

/// Bin all records of one lateral, per channel.
pub fn bin_records(records: &[RawRecord], grid: &DepthGrid) -> [BinnedChannel; 8] {
    std::array::from_fn(|i| {
        let ch = ChannelId::ALL[i];
        let samples: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.channel == ch)
            .map(|r| (r.depth, r.value))
            .collect();
        bin_to_grid(&samples, grid)
    })
}

/// Forward-filled sequence. The first `leading_gap` entries had no preceding
/// observation and stay missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Filled {
    pub values: Vec<Option<f64>>,
    pub leading_gap: usize,
}

pub fn forward_fill(seq: &[Option<f64>]) -> Filled {
    let leading_gap = seq.iter().take_while(|v| v.is_none()).count();
    let mut last = None;
    let values = seq
        .iter()
        .map(|v| {
            if v.is_some() {
                last = *v;
            }
            last
        })
        .collect();
    Filled { values, leading_gap }
}

/// Rasterize one well's lithology onto `grid`.
///
/// Each bin takes the class with the largest covered length; equal coverage
/// goes to the class of the deeper interval. Bins without any overlap stay
/// unlabeled.
pub fn labels_to_grid(intervals: &[LithoInterval], grid: &DepthGrid) -> Result<Vec<Option<Class>>> {
    let mut sorted: Vec<&LithoInterval> = intervals.iter().collect();
    sorted.sort_by(|a, b| a.top.total_cmp(&b.top).then(a.bottom.total_cmp(&b.bottom)));
    check_overlaps(&sorted)?;

    let n = grid.n_bins();
    let grid_top = grid.depth_of(0);
    let grid_bottom = grid.depth_of(n);
    // coverage[bin][class], deepest top per class touching the bin
    let mut coverage = vec![[0.0f64; 2]; n];
    let mut deepest = vec![[f64::NEG_INFINITY; 2]; n];
    for iv in sorted {
        let top = iv.top.max(grid_top);
        let bottom = iv.bottom.min(grid_bottom);
        if !(top < bottom) {
            continue;
        }
        let first = grid.bin_of(top).unwrap_or(0);
        let last = grid.bin_of(bottom).unwrap_or(n - 1);
        for i in first..=last.min(n - 1) {
            let overlap = bottom.min(grid.depth_of(i + 1)) - top.max(grid.depth_of(i));
            if overlap > 0.0 {
                let c = iv.class as usize;
                coverage[i][c] += overlap;
                deepest[i][c] = deepest[i][c].max(iv.top);
            }
        }
    }
    Ok(coverage
        .iter()
        .zip(&deepest)
        .map(|(cov, deep)| {
            const TIE: f64 = 1e-9;
            match (cov[0] > 0.0, cov[1] > 0.0) {
                (false, false) => None,
                (true, false) => Some(0),
                (false, true) => Some(1),
                (true, true) if (cov[0] - cov[1]).abs() <= TIE => Some(if deep[1] > deep[0] { 1 } else { 0 }),
                (true, true) => Some(if cov[1] > cov[0] { 1 } else { 0 }),
            }
        })
        .collect())
}

fn check_overlaps(sorted: &[&LithoInterval]) -> Result<()> {
    let mut reach: Option<&LithoInterval> = None;
    for iv in sorted {
        if let Some(prev) = reach {
            if iv.top < prev.bottom && iv.class != prev.class {
                return Err(Error::OverlappingIntervals {
                    well: iv.well_id.clone(),
                    a_top: prev.top,
                    a_bottom: prev.bottom,
                    b_top: iv.top,
                    b_bottom: iv.bottom,
                });
            }
        }
        if reach.is_none_or(|p| iv.bottom > p.bottom) {
            reach = Some(iv);
        }
    }
    Ok(())
}
