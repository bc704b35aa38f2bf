//! Feature engineering: derived channels, windowed statistics, lags,
//! label lags, bit–rock model coefficients, and matrix assembly.
//!
//! Every column is named `<family>:<base>[:<stat>]`, e.g. `B:rop`,
//! `D:wob:diff_1m`, `L:trq:lag_0.5m`, `F:wob:std_bin`, `E:class:lag_20m`,
//! `M:b1`, `FM:b1:std_1m`. Names are parsed back into [`FeatureName`], so an
//! explicit feature list can name any column the families can produce.

mod bitrock;
mod derived;
mod matrix;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{meters_to_bins, ChannelId};
use crate::error::{Error, Result};

pub use bitrock::{fit_bit_rock_model, math_features, BitRockFit, MathColumns, MAX_CONDITION};
pub use derived::{apr_series, compute_apr, compute_sed, sed_series};
pub use matrix::{assemble_matrix, frame_columns, FeatureMatrix, RowKey};
pub use window::{
    extra_feature, extra_features, lag_feature, lag_features, rolling_features, Rolling, MIN_LABEL_LAG_M,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Base channels plus APR and SED.
    B,
    /// Trailing rolling mean, std and border difference.
    D,
    /// Lagged base values.
    L,
    /// Within-bin standard deviations.
    F,
    /// True class lagged by at least the LWD sensor offset.
    E,
    /// Bit–rock model coefficients.
    M,
    /// Rolling std of the bit–rock coefficients.
    FM,
    /// Greedy-selected list (or an explicit one).
    G,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "B" => Family::B,
            "D" => Family::D,
            "L" => Family::L,
            "F" => Family::F,
            "E" => Family::E,
            "M" => Family::M,
            "FM" => Family::FM,
            "G" => Family::G,
            other => return Err(Error::FeatureSpec(format!("unknown feature family `{other}`"))),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Parse `"B+D+L"`, `"B,D,L"` or `"-"` (no features).
pub fn parse_families(s: &str) -> Result<Vec<Family>> {
    let s = s.trim();
    if s == "-" || s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(['+', ',']).map(str::parse).collect()
}

/// Series a windowed or lagged feature is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Base {
    Channel(ChannelId),
    Apr,
    Sed,
}

impl Base {
    pub const ALL: [Base; 10] = [
        Base::Channel(ChannelId::Wob),
        Base::Channel(ChannelId::Trq),
        Base::Channel(ChannelId::Rop),
        Base::Channel(ChannelId::Rpm),
        Base::Channel(ChannelId::Qin),
        Base::Channel(ChannelId::Qout),
        Base::Channel(ChannelId::Spp),
        Base::Channel(ChannelId::Hl),
        Base::Apr,
        Base::Sed,
    ];
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Base::Channel(c) => c.fmt(f),
            Base::Apr => f.write_str("apr"),
            Base::Sed => f.write_str("sed"),
        }
    }
}

impl FromStr for Base {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apr" => Ok(Base::Apr),
            "sed" => Ok(Base::Sed),
            other => other.parse().map(Base::Channel),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RollStat {
    Mean,
    Std,
    Diff,
}

/// A fully-specified feature column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureName {
    Basic(Base),
    Rolling { base: Base, stat: RollStat, window_m: f64 },
    Lag { base: Base, lag_m: f64 },
    Fluctuation(ChannelId),
    Extra { lag_m: f64 },
    Math(usize),
    MathFluctuation { coef: usize, window_m: f64 },
}

impl FeatureName {
    pub fn family(&self) -> Family {
        match self {
            FeatureName::Basic(_) => Family::B,
            FeatureName::Rolling { .. } => Family::D,
            FeatureName::Lag { .. } => Family::L,
            FeatureName::Fluctuation(_) => Family::F,
            FeatureName::Extra { .. } => Family::E,
            FeatureName::Math(_) => Family::M,
            FeatureName::MathFluctuation { .. } => Family::FM,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            FeatureName::Rolling { window_m, .. } | FeatureName::MathFluctuation { window_m, .. } => {
                if meters_to_bins(window_m)? < 2 {
                    return Err(Error::FeatureSpec(format!("window {window_m} m spans fewer than 2 bins")));
                }
            }
            FeatureName::Lag { lag_m, .. } => {
                meters_to_bins(lag_m)?;
            }
            FeatureName::Extra { lag_m } => {
                if !(lag_m >= MIN_LABEL_LAG_M) {
                    return Err(Error::FeatureSpec(format!(
                        "label lag {lag_m} m is below the {MIN_LABEL_LAG_M} m sensor offset"
                    )));
                }
                meters_to_bins(lag_m)?;
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureName::Basic(b) => write!(f, "B:{b}"),
            FeatureName::Rolling { base, stat, window_m } => {
                let s = match stat {
                    RollStat::Mean => "mean",
                    RollStat::Std => "std",
                    RollStat::Diff => "diff",
                };
                write!(f, "D:{base}:{s}_{window_m}m")
            }
            FeatureName::Lag { base, lag_m } => write!(f, "L:{base}:lag_{lag_m}m"),
            FeatureName::Fluctuation(c) => write!(f, "F:{c}:std_bin"),
            FeatureName::Extra { lag_m } => write!(f, "E:class:lag_{lag_m}m"),
            FeatureName::Math(k) => write!(f, "M:b{}", k + 1),
            FeatureName::MathFluctuation { coef, window_m } => write!(f, "FM:b{}:std_{window_m}m", coef + 1),
        }
    }
}

fn meters_suffix(s: &str, prefix: &str) -> Option<f64> {
    s.strip_prefix(prefix)?.strip_suffix('m')?.parse().ok()
}

fn coef_index(s: &str) -> Option<usize> {
    match s {
        "b1" => Some(0),
        "b2" => Some(1),
        "b3" => Some(2),
        _ => None,
    }
}

impl FromStr for FeatureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownFeature(s.to_owned());
        let parts: Vec<&str> = s.split(':').collect();
        let base = |p: &str| p.parse::<Base>().map_err(|_| unknown());
        let name = match parts.as_slice() {
            ["B", b] => FeatureName::Basic(base(b)?),
            ["D", b, stat] => {
                let (stat, w) = [("mean_", RollStat::Mean), ("std_", RollStat::Std), ("diff_", RollStat::Diff)]
                    .into_iter()
                    .find_map(|(p, st)| meters_suffix(stat, p).map(|w| (st, w)))
                    .ok_or_else(unknown)?;
                FeatureName::Rolling { base: base(b)?, stat, window_m: w }
            }
            ["L", b, lag] => FeatureName::Lag {
                base: base(b)?,
                lag_m: meters_suffix(lag, "lag_").ok_or_else(unknown)?,
            },
            ["F", c, "std_bin"] => FeatureName::Fluctuation(c.parse().map_err(|_| unknown())?),
            ["E", "class", lag] => FeatureName::Extra {
                lag_m: meters_suffix(lag, "lag_").ok_or_else(unknown)?,
            },
            ["M", b] => FeatureName::Math(coef_index(b).ok_or_else(unknown)?),
            ["FM", b, w] => FeatureName::MathFluctuation {
                coef: coef_index(b).ok_or_else(unknown)?,
                window_m: meters_suffix(w, "std_").ok_or_else(unknown)?,
            },
            _ => return Err(unknown()),
        };
        name.validate()?;
        Ok(name)
    }
}

/// The forward-selected feature list reported for the field data: ROP, HL,
/// WOB rolling border difference, 1 m rolling std of ROP and TRQ, 1 m
/// rolling mean of ROP, 0.5 m lagged TRQ, and 10 m lagged QOUT, QIN, HL, TRQ.
pub const GREEDY_SET: [&str; 11] = [
    "B:rop",
    "B:hl",
    "D:wob:diff_1m",
    "D:rop:std_1m",
    "D:trq:std_1m",
    "D:rop:mean_1m",
    "L:trq:lag_0.5m",
    "L:qout:lag_10m",
    "L:qin:lag_10m",
    "L:hl:lag_10m",
    "L:trq:lag_10m",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub families: Vec<Family>,
    pub lag_distances: Vec<f64>,
    pub rolling_window: f64,
    pub extra_lags: Vec<f64>,
    pub math_window: usize,
    /// Column list used for family G; defaults to [`GREEDY_SET`].
    pub explicit: Option<Vec<String>>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            families: vec![Family::B],
            lag_distances: vec![0.1, 0.5, 1.0, 10.0],
            rolling_window: 1.0,
            extra_lags: vec![20.0, 50.0],
            math_window: 5,
            explicit: None,
        }
    }
}

impl FeatureSpec {
    pub fn with_families(families: &[Family]) -> Self {
        Self {
            families: families.to_vec(),
            ..Self::default()
        }
    }

    /// Only the named columns.
    pub fn explicit(names: &[String]) -> Self {
        Self {
            families: vec![Family::G],
            explicit: Some(names.to_vec()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &d in self.lag_distances.iter().chain(&self.extra_lags).chain([&self.rolling_window]) {
            meters_to_bins(d)?;
        }
        if meters_to_bins(self.rolling_window)? < 2 {
            return Err(Error::FeatureSpec("rolling window must span at least 2 bins".into()));
        }
        if self.math_window < 3 {
            return Err(Error::FeatureSpec(format!(
                "math window must be at least 3 samples, got {}",
                self.math_window
            )));
        }
        if let Some(&l) = self.extra_lags.iter().find(|l| !(**l >= MIN_LABEL_LAG_M)) {
            return Err(Error::FeatureSpec(format!(
                "label lag {l} m is below the {MIN_LABEL_LAG_M} m sensor offset"
            )));
        }
        Ok(())
    }

    /// Ordered, de-duplicated column list.
    pub fn columns(&self) -> Result<Vec<FeatureName>> {
        self.validate()?;
        let w = self.rolling_window;
        let mut out: Vec<FeatureName> = Vec::new();
        for fam in &self.families {
            match fam {
                Family::B => out.extend(Base::ALL.map(FeatureName::Basic)),
                Family::D => {
                    for base in Base::ALL {
                        for stat in [RollStat::Mean, RollStat::Std, RollStat::Diff] {
                            out.push(FeatureName::Rolling { base, stat, window_m: w });
                        }
                    }
                }
                Family::L => {
                    for base in Base::ALL {
                        for &lag_m in &self.lag_distances {
                            out.push(FeatureName::Lag { base, lag_m });
                        }
                    }
                }
                Family::F => out.extend(ChannelId::ALL.map(FeatureName::Fluctuation)),
                Family::E => out.extend(self.extra_lags.iter().map(|&lag_m| FeatureName::Extra { lag_m })),
                Family::M => out.extend((0..3).map(FeatureName::Math)),
                Family::FM => out.extend((0..3).map(|coef| FeatureName::MathFluctuation { coef, window_m: w })),
                Family::G => match &self.explicit {
                    Some(names) => {
                        for n in names {
                            out.push(n.parse()?);
                        }
                    }
                    None => out.extend(GREEDY_SET.iter().map(|n| n.parse::<FeatureName>().expect("valid"))),
                },
            }
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|n| seen.insert(n.to_string()));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        let spec = FeatureSpec::with_families(&[
            Family::B,
            Family::D,
            Family::L,
            Family::F,
            Family::E,
            Family::M,
            Family::FM,
        ]);
        for name in spec.columns().unwrap() {
            let text = name.to_string();
            assert_eq!(text.parse::<FeatureName>().unwrap(), name, "{text}");
            assert!(text.starts_with(&format!("{}:", name.family())));
        }
    }

    #[test]
    fn family_column_counts() {
        let count = |f: &[Family]| FeatureSpec::with_families(f).columns().unwrap().len();
        assert_eq!(count(&[Family::B]), 10);
        assert_eq!(count(&[Family::G]), 11);
        assert_eq!(count(&[Family::D]), 30);
        assert_eq!(count(&[Family::L]), 40);
        assert_eq!(count(&[Family::F]), 8);
        assert_eq!(count(&[Family::E]), 2);
        assert_eq!(count(&[]), 0);
        assert_eq!(count(&[Family::B, Family::G]), 10 + 9);
    }

    #[test]
    fn rejects_bad_names_and_specs() {
        assert!(matches!("X:rop".parse::<FeatureName>(), Err(Error::UnknownFeature(_))));
        assert!(matches!("B:gamma".parse::<FeatureName>(), Err(Error::UnknownFeature(_))));
        assert!("E:class:lag_10m".parse::<FeatureName>().is_err());
        assert!("D:rop:mean_0.1m".parse::<FeatureName>().is_err());
        assert!(parse_families("B+Q").is_err());
        assert_eq!(parse_families("-").unwrap(), vec![]);
        assert_eq!(parse_families("B+D+L").unwrap(), vec![Family::B, Family::D, Family::L]);

        let spec = FeatureSpec { extra_lags: vec![10.0], ..FeatureSpec::default() };
        assert!(spec.validate().is_err());
        let spec = FeatureSpec { math_window: 2, ..FeatureSpec::default() };
        assert!(spec.validate().is_err());
        let spec = FeatureSpec { lag_distances: vec![0.25], ..FeatureSpec::default() };
        assert!(spec.validate().is_err());
    }
}
