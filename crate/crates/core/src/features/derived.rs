//! Per-bin derived drilling quantities.

use std::f64::consts::PI;

use crate::domain::{ChannelId, WellFrame, EPS};
use crate::error::{Error, Result};

/// Adjusted penetration rate `ROP / (WOB * sqrt(TRQ))`, proportionality constant 1.
pub fn compute_apr(rop: f64, wob: f64, trq: f64) -> Option<f64> {
    if wob <= EPS || trq <= EPS {
        return None;
    }
    Some(rop / (wob * trq.sqrt()))
}

/// Specific energy of drilling in Pa: `WOB/A + 2π·RPM·TRQ / (A·ROP)`.
pub fn compute_sed(wob: f64, rpm: f64, trq: f64, rop: f64, area: f64) -> Result<Option<f64>> {
    if !(area > 0.0) {
        return Err(Error::Config(format!("bit area must be positive, got {area}")));
    }
    if rop <= EPS {
        return Ok(None);
    }
    Ok(Some(wob / area + (2.0 * PI * rpm * trq) / (area * rop)))
}

pub fn apr_series(frame: &WellFrame) -> Vec<Option<f64>> {
    let (rop, wob, trq) = (
        frame.channel(ChannelId::Rop),
        frame.channel(ChannelId::Wob),
        frame.channel(ChannelId::Trq),
    );
    (0..frame.n_bins())
        .map(|i| compute_apr(rop[i]?, wob[i]?, trq[i]?))
        .collect()
}

pub fn sed_series(frame: &WellFrame) -> Result<Vec<Option<f64>>> {
    let (wob, rpm, trq, rop) = (
        frame.channel(ChannelId::Wob),
        frame.channel(ChannelId::Rpm),
        frame.channel(ChannelId::Trq),
        frame.channel(ChannelId::Rop),
    );
    (0..frame.n_bins())
        .map(|i| match (wob[i], rpm[i], trq[i], rop[i]) {
            (Some(w), Some(n), Some(t), Some(r)) => compute_sed(w, n, t, r, frame.bit_area),
            _ => Ok(None),
        })
        .collect()
}
