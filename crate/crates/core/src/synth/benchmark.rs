use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Class, WellFrame};
use crate::error::{Error, Result};

use super::{derive_seed, gen_lithology, gen_telemetry, SynthWellSpec};

const STREAM_JITTER: u64 = 1;
const STREAM_LITHO: u64 = 2;
const STREAM_TELEMETRY: u64 = 3;

/// A set of wells with well-to-well variation, calibrated to a target
/// class-1 share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub n_wells: usize,
    pub laterals: usize,
    pub template: SynthWellSpec,
    /// Relative spread of the per-well rock coefficients.
    pub jitter: f64,
    /// Accepted range of the pooled class-1 length share.
    pub share_range: (f64, f64),
    /// Every well must hold at least this class-1 share.
    pub min_well_share: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            n_wells: 8,
            laterals: 1,
            template: SynthWellSpec::default(),
            jitter: 0.2,
            share_range: (0.10, 0.17),
            min_well_share: 0.02,
            max_attempts: 100,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthWell {
    pub well_id: String,
    pub spec: SynthWellSpec,
    /// Shared by all laterals of the well.
    pub litho: Vec<Class>,
    pub frames: Vec<WellFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub wells: Vec<SynthWell>,
    pub pooled_share: f64,
    /// Calibration attempt that was accepted, counted from 0.
    pub attempt: usize,
}

impl Benchmark {
    pub fn frames(&self) -> Vec<WellFrame> {
        self.wells.iter().flat_map(|w| w.frames.iter().cloned()).collect()
    }
}

pub fn well_id(i: usize) -> String {
    format!("W{:02}", i + 1)
}

fn share(litho: &[Class]) -> f64 {
    litho.iter().filter(|&&c| c == 1).count() as f64 / litho.len().max(1) as f64
}

/// Generate `n_wells` wells. Lithologies are redrawn with fresh seeds until
/// the pooled share lands in `share_range` and every well reaches
/// `min_well_share`.
pub fn gen_benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    if spec.n_wells < 2 {
        return Err(Error::TooFewWells(spec.n_wells));
    }
    if spec.laterals == 0 {
        return Err(Error::Config("laterals must be >= 1".into()));
    }
    if !(spec.jitter >= 0.0 && spec.jitter < 1.0) {
        return Err(Error::Config(format!("jitter must lie in [0, 1), got {}", spec.jitter)));
    }
    let (lo, hi) = spec.share_range;
    if !(lo <= hi) {
        return Err(Error::Config("share_range must be ordered".into()));
    }
    spec.template.validate()?;

    let specs: Vec<SynthWellSpec> = (0..spec.n_wells)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_JITTER, i as u64));
            SynthWellSpec {
                seed: derive_seed(spec.seed, STREAM_TELEMETRY, i as u64),
                ..spec.template.jittered(spec.jitter, &mut rng)
            }
        })
        .collect();

    let mut achieved = f64::NAN;
    for attempt in 0..spec.max_attempts.max(1) {
        let lithos: Vec<Vec<Class>> = (0..spec.n_wells)
            .map(|i| {
                let index = (attempt * spec.n_wells + i) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_LITHO, index));
                gen_lithology(&specs[i], &mut rng)
            })
            .collect();
        let total: usize = lithos.iter().map(Vec::len).sum();
        let ones: usize = lithos.iter().map(|l| l.iter().filter(|&&c| c == 1).count()).sum();
        achieved = ones as f64 / total as f64;
        let wells_ok = lithos.iter().all(|l| share(l) >= spec.min_well_share);
        if !(lo..=hi).contains(&achieved) || !wells_ok {
            log::debug!("calibration attempt {attempt}: share {achieved:.4}, per-well floor met: {wells_ok}");
            continue;
        }
        let wells = lithos
            .into_par_iter()
            .zip(specs.par_iter())
            .enumerate()
            .map(|(i, (litho, s))| {
                let id = well_id(i);
                let frames = (0..spec.laterals)
                    .map(|k| {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, STREAM_TELEMETRY, k as u64));
                        gen_telemetry(&litho, s, &id, &format!("H{}", k + 1), &mut rng).map(|(f, _)| f)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SynthWell {
                    well_id: id,
                    spec: s.clone(),
                    litho,
                    frames,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Benchmark {
            wells,
            pooled_share: achieved,
            attempt,
        });
    }
    Err(Error::Calibration {
        lo,
        hi,
        attempts: spec.max_attempts,
        achieved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_benchmark_is_calibrated() {
        let b = gen_benchmark(&BenchmarkSpec::default()).unwrap();
        assert_eq!(b.wells.len(), 8);
        assert!((0.10..=0.17).contains(&b.pooled_share), "{}", b.pooled_share);
        for w in &b.wells {
            assert!(share(&w.litho) >= 0.02);
            assert_eq!(w.frames[0].labels.len(), 1000);
        }
    }

    #[test]
    fn same_seed_same_benchmark() {
        let spec = BenchmarkSpec {
            n_wells: 3,
            laterals: 2,
            ..BenchmarkSpec::default()
        };
        assert_eq!(gen_benchmark(&spec).unwrap(), gen_benchmark(&spec).unwrap());
    }

    #[test]
    fn zero_jitter_shares_rock_params() {
        let spec = BenchmarkSpec {
            jitter: 0.0,
            ..BenchmarkSpec::default()
        };
        let b = gen_benchmark(&spec).unwrap();
        assert!(b.wells.iter().all(|w| w.spec.rocks == spec.template.rocks));
        let jittered = gen_benchmark(&BenchmarkSpec::default()).unwrap();
        assert_ne!(jittered.wells[0].spec.rocks, jittered.wells[1].spec.rocks);
    }

    #[test]
    fn impossible_calibration_reports_share() {
        let spec = BenchmarkSpec {
            share_range: (0.9, 0.95),
            max_attempts: 3,
            ..BenchmarkSpec::default()
        };
        match gen_benchmark(&spec) {
            Err(Error::Calibration { attempts: 3, achieved, .. }) => assert!(achieved < 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_well_rejected() {
        let spec = BenchmarkSpec {
            n_wells: 1,
            ..BenchmarkSpec::default()
        };
        assert!(matches!(gen_benchmark(&spec), Err(Error::TooFewWells(1))));
    }
}
