//! Probability classifiers behind one contract: fit on a [`FeatureMatrix`],
//! predict the probability of class 1 per row.

mod gbdt;
mod io;
mod logistic;
mod mlp;
mod prep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use gbdt::{fit_gbdt, fit_gbdt_traced, GbdtModel, GbdtParams, Node, Tree};
pub use io::{load_model, save_model, BlobRef, MODEL_BLOB, MODEL_HEADER};
pub use logistic::{fit_logistic, LogisticModel, LogisticParams};
pub use mlp::{fit_mlp, gradient_check, Layer, MlpModel, MlpParams, Network, MOMENTUM};
pub use prep::Preprocessor;

/// Numerical floor for probabilities entering a log-loss.
pub const PROB_CLAMP: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean log-loss with probabilities clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn log_loss(y: &[u8], p: &[f64]) -> f64 {
    let n = y.len().max(1) as f64;
    y.iter()
        .zip(p)
        .map(|(&y, &p)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum::<f64>()
        / n
}

/// Model family and its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Constant training prior; the uninformative baseline.
    Prior,
    Logistic(LogisticParams),
    Gbdt(GbdtParams),
    Mlp(MlpParams),
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Prior => "prior",
            ModelSpec::Logistic(_) => "logistic",
            ModelSpec::Gbdt(_) => "gbdt",
            ModelSpec::Mlp(_) => "mlp",
        }
    }

    /// Replace the seed of stochastic families.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self.clone() {
            ModelSpec::Gbdt(p) => ModelSpec::Gbdt(GbdtParams { seed, ..p }),
            ModelSpec::Mlp(p) => ModelSpec::Mlp(MlpParams { seed, ..p }),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorModel {
    pub features: Vec<String>,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Prior(PriorModel),
    Logistic(LogisticModel),
    Gbdt(GbdtModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn family(&self) -> &'static str {
        match self {
            TrainedModel::Prior(_) => "prior",
            TrainedModel::Logistic(_) => "logistic",
            TrainedModel::Gbdt(_) => "gbdt",
            TrainedModel::Mlp(_) => "mlp",
        }
    }

    pub fn features(&self) -> &[String] {
        match self {
            TrainedModel::Prior(m) => &m.features,
            TrainedModel::Logistic(m) => &m.features,
            TrainedModel::Gbdt(m) => &m.features,
            TrainedModel::Mlp(m) => &m.features,
        }
    }

    /// Probability of class 1 for every row of `x`.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let cols = schema_columns(self.features(), x)?;
        Ok(match self {
            TrainedModel::Prior(m) => vec![m.prior; x.n_rows()],
            TrainedModel::Logistic(m) => m.predict_mapped(x, &cols),
            TrainedModel::Gbdt(m) => m.predict_mapped(x, &cols),
            TrainedModel::Mlp(m) => m.predict_mapped(x, &cols),
        })
    }
}

/// Fit the requested family on every row of `x`.
pub fn fit(x: &FeatureMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    Ok(match spec {
        ModelSpec::Prior => {
            check_classes(x)?;
            TrainedModel::Prior(PriorModel {
                features: x.columns().to_vec(),
                prior: x.positive_share(),
            })
        }
        ModelSpec::Logistic(p) => TrainedModel::Logistic(fit_logistic(x, p)?),
        ModelSpec::Gbdt(p) => TrainedModel::Gbdt(fit_gbdt(x, p)?),
        ModelSpec::Mlp(p) => TrainedModel::Mlp(fit_mlp(x, p)?),
    })
}

/// Map model features onto matrix columns by name.
pub(crate) fn schema_columns(features: &[String], x: &FeatureMatrix) -> Result<Vec<usize>> {
    let mut missing = Vec::new();
    let cols: Vec<usize> = features
        .iter()
        .filter_map(|f| {
            let c = x.column_index(f);
            if c.is_none() {
                missing.push(f.clone());
            }
            c
        })
        .collect();
    let extra: Vec<String> = x
        .columns()
        .iter()
        .filter(|c| !features.contains(c))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::SchemaMismatch { missing, extra });
    }
    Ok(cols)
}

pub(crate) fn check_classes(x: &FeatureMatrix) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::Empty);
    }
    let pos = x.target().iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == x.n_rows() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn log_loss_clamps() {
        assert!(log_loss(&[1], &[0.0]).is_finite());
        assert!((log_loss(&[1, 0], &[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
    }
}
