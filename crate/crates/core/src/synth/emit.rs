//! Write a benchmark in the raw ingest formats: one MWD CSV per lateral plus
//! the lithology and bounds tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::domain::{ChannelId, WellFrame};
use crate::error::{Error, Result};
use crate::ingest::MWD_COLUMNS;

use super::Benchmark;

pub const MWD_DIR: &str = "mwd";
pub const LITHOLOGY_FILE: &str = "lithology.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";

/// Offsets of the two raw samples inside a 0.1 m bin.
const SAMPLE_OFFSETS: [f64; 2] = [0.025, 0.075];

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// MWD CSV text for one lateral. Each bin becomes two rows at
/// `value - s` and `value + s`, where `s` is the within-bin spread, so that
/// binning reproduces both the bin mean and the within-bin deviation.
pub fn mwd_csv(frame: &WellFrame) -> String {
    let mut out = String::from("well_id,hole_id,depth_m");
    for c in &MWD_COLUMNS {
        out.push(',');
        out.push_str(c.name);
    }
    out.push('\n');
    for i in 0..frame.n_bins() {
        let top = frame.grid.depth_of(i);
        for (k, offset) in SAMPLE_OFFSETS.iter().enumerate() {
            let sign = if k == 0 { -1.0 } else { 1.0 };
            write!(out, "{},{},{}", frame.well_id, frame.hole_id, top + offset).unwrap();
            for c in &MWD_COLUMNS {
                out.push(',');
                let id: ChannelId = c.channel;
                if let Some(v) = frame.channel(id)[i] {
                    let s = frame.std_of(id)[i].unwrap_or(0.0);
                    write!(out, "{}", (v + sign * s) / c.to_si).unwrap();
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Write `mwd/<well>_<hole>.csv`, `lithology.csv` and `bounds.csv` under `dir`.
pub fn write_benchmark(dir: &Path, bench: &Benchmark) -> Result<()> {
    let mwd = dir.join(MWD_DIR);
    fs::create_dir_all(&mwd).map_err(|e| Error::io(&mwd, e))?;
    let mut litho = String::from("well_id,top_m,bottom_m,litho_class\n");
    let mut bounds = String::from("well_id,horiz_start_m,horiz_end_m,bit_area_m2\n");
    for well in &bench.wells {
        for frame in &well.frames {
            write(&mwd.join(format!("{}_{}.csv", frame.well_id, frame.hole_id)), &mwd_csv(frame))?;
        }
        let grid = well.spec.grid();
        let mut start = 0;
        for i in 1..=well.litho.len() {
            if i == well.litho.len() || well.litho[i] != well.litho[start] {
                writeln!(
                    litho,
                    "{},{},{},{}",
                    well.well_id,
                    grid.depth_of(start),
                    grid.depth_of(i),
                    well.litho[start]
                )
                .unwrap();
                start = i;
            }
        }
        writeln!(
            bounds,
            "{},{},{},{}",
            well.well_id,
            grid.depth_of(0),
            grid.depth_of(grid.n_bins()),
            well.spec.bit_area
        )
        .unwrap();
    }
    write(&dir.join(LITHOLOGY_FILE), &litho)?;
    write(&dir.join(BOUNDS_FILE), &bounds)
}
