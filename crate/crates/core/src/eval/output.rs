//! CSV exports of an evaluation for external plotting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::cv::EvaluationReport;

pub const ROC_CSV: &str = "roc.csv";
pub const PR_CSV: &str = "pr.csv";
pub const WELLS_CSV: &str = "wells.csv";

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for line in lines {
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `roc.csv` (`threshold,fpr,tpr`) and `pr.csv` (`threshold,recall,precision`)
/// from the pooled predictions.
pub fn write_curves(dir: &Path, report: &EvaluationReport) -> Result<()> {
    write_lines(
        &dir.join(ROC_CSV),
        "threshold,fpr,tpr",
        report.curve.iter().map(|p| format!("{},{},{}", p.threshold, p.fpr, p.tpr)),
    )?;
    write_lines(
        &dir.join(PR_CSV),
        "threshold,recall,precision",
        report
            .curve
            .iter()
            .map(|p| format!("{},{},{}", p.threshold, p.recall, p.precision)),
    )
}

/// `wells.csv`: per-well Accuracy L of the model against the majority baseline.
pub fn write_wells(dir: &Path, report: &EvaluationReport) -> Result<()> {
    write_lines(
        &dir.join(WELLS_CSV),
        "well_id,shale_share,accl_model,accl_major,improvement",
        report
            .well_rows()
            .into_iter()
            .map(|(w, s, m, b, d)| format!("{w},{s},{m},{b},{d}")),
    )
}
