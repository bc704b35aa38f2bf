//! Synthetic wells: a two-state lithology chain and telemetry driven by the
//! bit-rock drilling model with rock-dependent coefficients.
//!
//! Rate of penetration follows `ROP = a1 + a2*WOB + a3*Omega` and torque on
//! bit follows `TOB = a4*ROP/Omega + a5`. Weight on bit and rotary speed are
//! bounded random walks; flow, pressure and hook load are autocorrelated
//! processes with a small class-dependent shift.

mod benchmark;
mod emit;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{ChannelId, Class, DepthGrid, WellFrame, SAND, SHALE};
use crate::error::{Error, Result};

pub use benchmark::{gen_benchmark, Benchmark, BenchmarkSpec, SynthWell};
pub use emit::{write_benchmark, BOUNDS_FILE, LITHOLOGY_FILE, MWD_DIR};

/// Coefficients of the bit-rock model for one rock class, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RockParams {
    /// Base penetration rate, m/s.
    pub a1: f64,
    /// Penetration per unit weight, m/s per N.
    pub a2: f64,
    /// Penetration per revolution, m.
    pub a3: f64,
    /// Cutting torque factor, N*m*s/m*(rev/s).
    pub a4: f64,
    /// Friction torque, N*m.
    pub a5: f64,
}

impl RockParams {
    pub const SAND: RockParams = RockParams {
        a1: 1e-3,
        a2: 1e-7,
        a3: 2e-3,
        a4: 1e6,
        a5: 1e3,
    };
    pub const SHALE: RockParams = RockParams {
        a1: 0.5e-3,
        a2: 0.6e-7,
        a3: 1.2e-3,
        a4: 1.4e6,
        a5: 1.5e3,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.a2, self.a3, self.a4, self.a5];
        if all.iter().any(|v| !v.is_finite()) || !(self.a2 > 0.0) || !(self.a4 > 0.0) {
            return Err(Error::Config(format!("rock parameters need finite values with a2 > 0 and a4 > 0: {self:?}")));
        }
        Ok(())
    }

    pub fn rop(&self, wob: f64, omega: f64) -> f64 {
        self.a1 + self.a2 * wob + self.a3 * omega
    }

    pub fn tob(&self, rop: f64, omega: f64) -> f64 {
        self.a4 * rop / omega + self.a5
    }

    /// Coefficients `(b1, b2, b3)` of `TOB = (b1 + b2*WOB)/Omega + b3`.
    pub fn reduced(&self) -> [f64; 3] {
        [self.a4 * self.a1, self.a4 * self.a2, self.a4 * self.a3 + self.a5]
    }

    fn scaled(&self, f: [f64; 5]) -> Self {
        Self {
            a1: self.a1 * f[0],
            a2: self.a2 * f[1],
            a3: self.a3 * f[2],
            a4: self.a4 * f[3],
            a5: self.a5 * f[4],
        }
    }
}

/// Reflected random walk confined to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomWalk {
    pub lo: f64,
    pub hi: f64,
    /// Standard deviation of one step.
    pub step: f64,
}

impl RandomWalk {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo <= self.hi) || !(self.step >= 0.0) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Config(format!("{what}: need lo <= hi and step >= 0")));
        }
        Ok(())
    }

    fn path(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = if self.hi > self.lo { rng.random_range(self.lo..=self.hi) } else { self.lo };
        let step = Normal::new(0.0, self.step).expect("valid std");
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(v);
            v += step.sample(rng);
            let width = self.hi - self.lo;
            if width > 0.0 {
                // Fold back into range; steps larger than the range wrap repeatedly.
                while v < self.lo || v > self.hi {
                    v = if v < self.lo { 2.0 * self.lo - v } else { 2.0 * self.hi - v };
                }
            } else {
                v = self.lo;
            }
        }
        out
    }
}

/// Autocorrelated channel: `level * (1 + x_t + shift * class)` with
/// `x_t = phi * x_{t-1} + sigma * e_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    pub level: f64,
    pub phi: f64,
    pub sigma: f64,
    /// Relative shift while drilling class 1.
    pub shale_shift: f64,
}

impl Nuisance {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.phi.abs() < 1.0) || !(self.sigma >= 0.0) || !self.level.is_finite() || !self.shale_shift.is_finite() {
            return Err(Error::Config(format!("{what}: need |phi| < 1 and sigma >= 0")));
        }
        Ok(())
    }

    fn path(&self, litho: &[Class], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let e = Normal::new(0.0, self.sigma).expect("valid std");
        let stationary = self.sigma / (1.0 - self.phi * self.phi).sqrt();
        let mut x = Normal::new(0.0, stationary).expect("valid std").sample(rng);
        litho
            .iter()
            .map(|&c| {
                let v = self.level * (1.0 + x + self.shale_shift * f64::from(c));
                x = self.phi * x + e.sample(rng);
                v
            })
            .collect()
    }
}

/// Stationary AR(1) process `x_t = phi * x_{t-1} + sigma * e_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub phi: f64,
    pub sigma: f64,
}

impl Drift {
    fn path(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.sigma == 0.0 {
            return vec![0.0; n];
        }
        let e = Normal::new(0.0, self.sigma).expect("valid std");
        let stationary = self.sigma / (1.0 - self.phi * self.phi).sqrt();
        let mut x = Normal::new(0.0, stationary).expect("valid std").sample(rng);
        (0..n)
            .map(|_| {
                let v = x;
                x = self.phi * x + e.sample(rng);
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSet {
    pub qin: Nuisance,
    pub qout: Nuisance,
    pub spp: Nuisance,
    pub hl: Nuisance,
}

impl Default for NuisanceSet {
    fn default() -> Self {
        let ar = |level: f64, shale_shift: f64| Nuisance {
            level,
            phi: 0.9,
            sigma: 0.01,
            shale_shift,
        };
        Self {
            // 2000 L/min, 1950 L/min, 150 bar, 800 kN.
            qin: ar(2000.0 / 60000.0, 0.006),
            qout: ar(1950.0 / 60000.0, -0.009),
            spp: ar(1.5e7, 0.009),
            hl: ar(8e5, -0.006),
        }
    }
}

/// Everything needed to generate one lateral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthWellSpec {
    pub n_bins: usize,
    /// Measured depth of the first bin, m.
    pub start_depth: f64,
    /// Per-bin probability of leaving the current class once its run is at
    /// least `min_run` bins long, indexed by class.
    pub switch_prob: [f64; 2],
    pub min_run: usize,
    /// Indexed by class.
    pub rocks: [RockParams; 2],
    /// Weight on bit, N.
    pub wob: RandomWalk,
    /// Rotary speed, rev/s.
    pub omega: RandomWalk,
    /// Multiplicative Gaussian measurement noise, indexed by [`ChannelId::index`].
    pub noise: [f64; 8],
    /// Relative spread of raw samples inside a bin, indexed by class.
    pub within_bin_spread: [f64; 2],
    pub nuisance: NuisanceSet,
    /// Slowly varying rock strength: the penetration rate of either class is
    /// scaled by `exp(x_t)` with `x_t` an AR(1) process.
    pub strength: Drift,
    /// Expected share of missing bins per channel.
    pub missing_rate: f64,
    /// Mean length of a missing run, bins.
    pub missing_run: f64,
    pub bit_area: f64,
    pub seed: u64,
}

impl Default for SynthWellSpec {
    fn default() -> Self {
        Self {
            n_bins: 1000,
            start_depth: 2000.0,
            // Sand runs average 30 + 219.9 bins and shale runs 30 + 9, which
            // puts 13.5% of the length in class 1.
            switch_prob: [1.0 / 220.9, 0.1],
            min_run: 30,
            rocks: [RockParams::SAND, RockParams::SHALE],
            wob: RandomWalk { lo: 2e4, hi: 8e4, step: 1.5e3 },
            omega: RandomWalk { lo: 1.0, hi: 2.5, step: 0.03 },
            noise: [0.02, 0.15, 0.2, 0.01, 0.0, 0.0, 0.0, 0.0],
            within_bin_spread: [0.02, 0.03],
            nuisance: NuisanceSet::default(),
            strength: Drift { phi: 0.98, sigma: 0.05 },
            missing_rate: 0.02,
            missing_run: 5.0,
            bit_area: 0.0366,
            seed: 0,
        }
    }
}

impl SynthWellSpec {
    /// Spec with no noise, no strength drift, no missing data and no
    /// within-bin spread.
    pub fn noiseless() -> Self {
        Self {
            noise: [0.0; 8],
            strength: Drift { phi: 0.0, sigma: 0.0 },
            within_bin_spread: [0.0; 2],
            missing_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n_bins == 0 {
            return bad("n_bins must be >= 1");
        }
        if self.switch_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("switch probabilities must lie in [0, 1]");
        }
        if self.min_run == 0 {
            return bad("min_run must be >= 1");
        }
        for r in &self.rocks {
            r.validate()?;
        }
        if self.rocks[0] == self.rocks[1] {
            return bad("rock classes need distinct parameters");
        }
        self.wob.validate("wob")?;
        self.omega.validate("omega")?;
        if !(self.omega.lo > 0.0) {
            return bad("rotary speed range must stay above zero");
        }
        if self.noise.iter().chain(&self.within_bin_spread).any(|s| !(*s >= 0.0)) {
            return bad("noise levels must be non-negative");
        }
        let n = &self.nuisance;
        n.qin.validate("qin")?;
        n.qout.validate("qout")?;
        n.spp.validate("spp")?;
        n.hl.validate("hl")?;
        if !(self.strength.phi.abs() < 1.0) || !(self.strength.sigma >= 0.0) {
            return bad("strength drift needs |phi| < 1 and sigma >= 0");
        }
        if !(0.0..1.0).contains(&self.missing_rate) || !(self.missing_run >= 1.0) {
            return bad("need 0 <= missing_rate < 1 and missing_run >= 1");
        }
        if !(self.bit_area > 0.0) {
            return bad("bit_area must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> DepthGrid {
        DepthGrid::new(self.start_depth, self.n_bins).expect("validated n_bins")
    }

    /// Long-run share of class 1 implied by the chain's expected run lengths.
    pub fn stationary_share(&self) -> f64 {
        let run = |p: f64| if p > 0.0 { self.min_run as f64 - 1.0 + 1.0 / p } else { f64::INFINITY };
        let (l0, l1) = (run(self.switch_prob[0]), run(self.switch_prob[1]));
        match (l0.is_finite(), l1.is_finite()) {
            (true, true) => l1 / (l0 + l1),
            (false, true) => 0.0,
            (true, false) => 1.0,
            (false, false) => 0.0,
        }
    }

    /// Multiply every rock coefficient by a factor drawn from
    /// `[1 - jitter, 1 + jitter]`; one factor per coefficient, shared by
    /// both classes so that their contrast survives.
    pub fn jittered(&self, jitter: f64, rng: &mut ChaCha8Rng) -> Self {
        if jitter == 0.0 {
            return self.clone();
        }
        let f: [f64; 5] = std::array::from_fn(|_| 1.0 + jitter * rng.random_range(-1.0..=1.0));
        Self {
            rocks: [self.rocks[0].scaled(f), self.rocks[1].scaled(f)],
            ..self.clone()
        }
    }
}

/// Class sequence from the two-state chain. A class can only be left once
/// its current run has reached `min_run` bins.
pub fn gen_lithology(spec: &SynthWellSpec, rng: &mut ChaCha8Rng) -> Vec<Class> {
    let mut state = if rng.random::<f64>() < spec.stationary_share() { SHALE } else { SAND };
    let mut run = 0;
    let mut out = Vec::with_capacity(spec.n_bins);
    for _ in 0..spec.n_bins {
        out.push(state);
        run += 1;
        if run >= spec.min_run && rng.random::<f64>() < spec.switch_prob[state as usize] {
            state = 1 - state;
            run = 0;
        }
    }
    out
}

/// Noise-free control inputs and model outputs of one lateral.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub wob: Vec<f64>,
    pub omega: Vec<f64>,
    pub rop: Vec<f64>,
    pub tob: Vec<f64>,
}

/// Telemetry for `litho` (one class per bin). Labels of the frame equal
/// `litho`.
pub fn gen_telemetry(
    litho: &[Class],
    spec: &SynthWellSpec,
    well_id: &str,
    hole_id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<(WellFrame, Truth)> {
    spec.validate()?;
    if litho.len() != spec.n_bins {
        return Err(Error::Config(format!(
            "lithology has {} bins, spec expects {}",
            litho.len(),
            spec.n_bins
        )));
    }
    let n = spec.n_bins;
    let wob = spec.wob.path(n, rng);
    let omega = spec.omega.path(n, rng);
    let strength = spec.strength.path(n, rng);
    let rop: Vec<f64> = (0..n)
        .map(|i| spec.rocks[litho[i] as usize].rop(wob[i], omega[i]) * strength[i].exp())
        .collect();
    let tob: Vec<f64> = (0..n)
        .map(|i| spec.rocks[litho[i] as usize].tob(rop[i], omega[i]))
        .collect();
    let nu = &spec.nuisance;
    let qin = nu.qin.path(litho, rng);
    let qout = nu.qout.path(litho, rng);
    let spp = nu.spp.path(litho, rng);
    let hl = nu.hl.path(litho, rng);

    let mut frame = WellFrame::empty(well_id, hole_id, spec.grid(), spec.bit_area);
    let std_normal = Normal::new(0.0, 1.0).expect("valid std");
    let clean: [(ChannelId, &[f64]); 8] = [
        (ChannelId::Wob, &wob),
        (ChannelId::Trq, &tob),
        (ChannelId::Rop, &rop),
        (ChannelId::Rpm, &omega),
        (ChannelId::Qin, &qin),
        (ChannelId::Qout, &qout),
        (ChannelId::Spp, &spp),
        (ChannelId::Hl, &hl),
    ];
    for (id, values) in clean {
        let noise = spec.noise[id.index()];
        let mut measured = Vec::with_capacity(n);
        let mut spread = Vec::with_capacity(n);
        for (i, &v) in values.iter().enumerate() {
            let m = if noise > 0.0 { v * (1.0 + noise * std_normal.sample(rng)) } else { v };
            let s = spec.within_bin_spread[litho[i] as usize];
            let sd = if s > 0.0 { (m * s * std_normal.sample(rng)).abs() } else { 0.0 };
            measured.push(Some(m));
            spread.push(Some(sd));
        }
        inject_missing(&mut measured, &mut spread, spec, rng);
        *frame.channel_mut(id) = measured;
        frame.within_bin_std[id.index()] = spread;
    }
    frame.labels = litho.iter().map(|&c| Some(c)).collect();
    frame.validate()?;
    Ok((frame, Truth { wob, omega, rop, tob }))
}

/// Blank out runs with geometric lengths so that about `missing_rate` of the
/// bins go missing.
fn inject_missing(values: &mut [Option<f64>], spread: &mut [Option<f64>], spec: &SynthWellSpec, rng: &mut ChaCha8Rng) {
    if spec.missing_rate <= 0.0 {
        return;
    }
    let start = spec.missing_rate / spec.missing_run;
    let extend = 1.0 - 1.0 / spec.missing_run;
    let mut i = 0;
    while i < values.len() {
        if rng.random::<f64>() < start {
            loop {
                values[i] = None;
                spread[i] = None;
                i += 1;
                if i >= values.len() || rng.random::<f64>() >= extend {
                    break;
                }
            }
        } else {
            i += 1;
        }
    }
}

/// Deterministic child seed for `(master, stream, index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 16);
    rng.random()
}
