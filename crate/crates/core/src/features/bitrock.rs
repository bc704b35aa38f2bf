//! Local identification of the bit–rock interaction model
//!
//! ```text
//! TOB = (b1 + b2·WOB) / Ω + b3
//! ```
//!
//! fitted by linear least squares over a short trailing window. Surface
//! torque stands in for torque on bit.

use crate::domain::{ChannelId, WellFrame, EPS};
use crate::error::{Error, Result};

use super::window::rolling_features;

/// Scaled Gram matrices above this condition estimate count as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitRockFit {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub residual_rms: f64,
    pub window_ok: bool,
}

impl BitRockFit {
    fn failed() -> Self {
        Self {
            b1: 0.0,
            b2: 0.0,
            b3: 0.0,
            residual_rms: 0.0,
            window_ok: false,
        }
    }

    pub fn coefficients(&self) -> Option<[f64; 3]> {
        self.window_ok.then_some([self.b1, self.b2, self.b3])
    }
}

type M3 = [[f64; 3]; 3];

fn inverse(a: &M3) -> Option<M3> {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]
    };
    let det = a[0][0] * c(0, 0) + a[0][1] * c(0, 1) + a[0][2] * c(0, 2);
    if !det.is_finite() || det.abs() < f64::MIN_POSITIVE {
        return None;
    }
    // inverse = adjugate / det; adjugate is the transposed cofactor matrix
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = c(j, i) / det;
        }
    }
    Some(inv)
}

fn norm1(a: &M3) -> f64 {
    (0..3)
        .map(|j| (0..3).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn mul(a: &M3, x: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2])
}

/// Least-squares fit of `(b1, b2, b3)` over one window via the normal
/// equations on regressors `[1/Ω, WOB/Ω, 1]`.
///
/// The Gram matrix is equilibrated to unit diagonal before the condition
/// check and solve; one step of iterative refinement follows.
pub fn fit_bit_rock_model(wob: &[f64], tob: &[f64], omega: &[f64]) -> Result<BitRockFit> {
    let m = wob.len();
    if m < 3 {
        return Err(Error::FeatureSpec(format!("bit-rock window needs at least 3 samples, got {m}")));
    }
    if tob.len() != m || omega.len() != m {
        return Err(Error::FeatureSpec("bit-rock window inputs differ in length".into()));
    }
    if omega.iter().any(|w| !(*w > EPS)) || wob.iter().chain(tob).any(|v| !v.is_finite()) {
        return Ok(BitRockFit::failed());
    }
    let rows: Vec<[f64; 3]> = wob.iter().zip(omega).map(|(w, o)| [1.0 / o, w / o, 1.0]).collect();

    let mut gram = [[0.0; 3]; 3];
    for x in &rows {
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] += x[i] * x[j];
            }
        }
    }
    let scale: [f64; 3] = std::array::from_fn(|i| gram[i][i].sqrt());
    if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Ok(BitRockFit::failed());
    }
    let mut scaled = gram;
    for i in 0..3 {
        for j in 0..3 {
            scaled[i][j] /= scale[i] * scale[j];
        }
    }
    let Some(inv) = inverse(&scaled) else {
        return Ok(BitRockFit::failed());
    };
    let cond = norm1(&scaled) * norm1(&inv);
    if !(cond <= MAX_CONDITION) {
        return Ok(BitRockFit::failed());
    }

    let solve = |target: &dyn Fn(usize) -> f64| -> [f64; 3] {
        let mut rhs = [0.0; 3];
        for (k, x) in rows.iter().enumerate() {
            let y = target(k);
            for i in 0..3 {
                rhs[i] += x[i] * y;
            }
        }
        let z = mul(&inv, std::array::from_fn(|i| rhs[i] / scale[i]));
        std::array::from_fn(|i| z[i] / scale[i])
    };
    let predict = |b: &[f64; 3], k: usize| rows[k][0] * b[0] + rows[k][1] * b[1] + b[2];

    let mut b = solve(&|k| tob[k]);
    let correction = solve(&|k| tob[k] - predict(&b, k));
    for i in 0..3 {
        b[i] += correction[i];
    }
    let sse: f64 = (0..m).map(|k| (tob[k] - predict(&b, k)).powi(2)).sum();
    Ok(BitRockFit {
        b1: b[0],
        b2: b[1],
        b3: b[2],
        residual_rms: (sse / m as f64).sqrt(),
        window_ok: true,
    })
}

/// Per-bin fitted coefficients and their rolling standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct MathColumns {
    pub b: [Vec<Option<f64>>; 3],
    pub fluctuation: [Vec<Option<f64>>; 3],
}

/// Fit the bit–rock model on the trailing `window` bins ending at every bin.
pub fn math_features(frame: &WellFrame, window: usize, fluctuation_window_m: f64) -> Result<MathColumns> {
    if window < 3 {
        return Err(Error::FeatureSpec(format!("math window must be >= 3, got {window}")));
    }
    let n = frame.n_bins();
    let (wob, trq, rpm) = (
        frame.channel(ChannelId::Wob),
        frame.channel(ChannelId::Trq),
        frame.channel(ChannelId::Rpm),
    );
    let mut b: [Vec<Option<f64>>; 3] = std::array::from_fn(|_| vec![None; n]);
    let (mut w, mut t, mut o) = (Vec::with_capacity(window), Vec::with_capacity(window), Vec::with_capacity(window));
    for i in window.saturating_sub(1)..n {
        w.clear();
        t.clear();
        o.clear();
        for k in (i + 1 - window)..=i {
            if let (Some(a), Some(c), Some(d)) = (wob[k], trq[k], rpm[k]) {
                w.push(a);
                t.push(c);
                o.push(d);
            }
        }
        if w.len() < window {
            continue;
        }
        if let Some(coef) = fit_bit_rock_model(&w, &t, &o)?.coefficients() {
            for j in 0..3 {
                b[j][i] = Some(coef[j]);
            }
        }
    }
    let fluctuation = [
        rolling_features(&b[0], fluctuation_window_m)?.std,
        rolling_features(&b[1], fluctuation_window_m)?.std,
        rolling_features(&b[2], fluctuation_window_m)?.std,
    ];
    Ok(MathColumns { b, fluctuation })
}
