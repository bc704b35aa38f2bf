//! Logistic regression fitted by full-batch gradient descent with
//! backtracking line search on the mean negative log-likelihood.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::prep::Preprocessor;
use super::{check_classes, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2_penalty: f64,
    pub max_iter: usize,
    /// Stop once the gradient max-norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2_penalty: 0.0,
            max_iter: 10_000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub features: Vec<String>,
    pub prep: Preprocessor,
    /// One weight per standardized input, followed by the bias.
    pub weights: Vec<f64>,
    pub params: LogisticParams,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn bias(&self) -> f64 {
        *self.weights.last().expect("bias present")
    }

    pub(crate) fn predict_mapped(&self, x: &FeatureMatrix, cols: &[usize]) -> Vec<f64> {
        let design = self.prep.transform(x, cols);
        let p = self.weights.len() - 1;
        let w = Array1::from(self.weights[..p].to_vec());
        let b = self.bias();
        design.dot(&w).iter().map(|eta| sigmoid(eta + b)).collect()
    }
}

struct Objective<'a> {
    x: &'a Array2<f64>,
    y: Array1<f64>,
    l2: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Objective<'_> {
    fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        let p = self.x.ncols().max(1);
        self.x.as_slice().expect("design matrix is contiguous").chunks_exact(p)
    }

    fn linear(&self, w: &Array1<f64>, b: f64) -> Array1<f64> {
        let w = w.as_slice().expect("contiguous weights");
        if w.is_empty() {
            return Array1::from_elem(self.y.len(), b);
        }
        self.rows().map(|row| dot(row, w) + b).collect()
    }

    /// `X^T r`, accumulated row by row to stream the matrix once.
    fn transposed(&self, r: &Array1<f64>) -> Array1<f64> {
        let mut out = vec![0.0; self.x.ncols()];
        if !out.is_empty() {
            for (row, &ri) in self.rows().zip(r) {
                for (o, xj) in out.iter_mut().zip(row) {
                    *o += ri * xj;
                }
            }
        }
        Array1::from(out)
    }

    /// Objective value given the linear predictor `eta = X w + b`.
    fn value_at(&self, eta: &Array1<f64>, w: &Array1<f64>) -> f64 {
        let n = self.y.len() as f64;
        let nll = eta.iter().zip(&self.y).map(|(e, y)| softplus(*e) - y * e).sum::<f64>() / n;
        nll + 0.5 * self.l2 * w.dot(w)
    }

    fn gradient_at(&self, eta: &Array1<f64>, w: &Array1<f64>) -> (Array1<f64>, f64) {
        let n = self.y.len() as f64;
        let resid: Array1<f64> = eta.iter().zip(&self.y).map(|(e, y)| sigmoid(*e) - y).collect();
        let gw = self.transposed(&resid) / n + self.l2 * w;
        (gw, resid.sum() / n)
    }
}

/// Iterations between exact recomputations of the linear predictor, which
/// is otherwise updated incrementally along each search direction.
const REFRESH: usize = 64;

pub fn fit_logistic(x: &FeatureMatrix, params: &LogisticParams) -> Result<LogisticModel> {
    if !(params.l2_penalty >= 0.0) || !params.l2_penalty.is_finite() {
        return Err(Error::Params(format!("l2_penalty must be non-negative, got {}", params.l2_penalty)));
    }
    check_classes(x)?;
    let prep = Preprocessor::fit(x);
    let cols: Vec<usize> = (0..x.n_cols()).collect();
    let design = prep.transform(x, &cols);
    let obj = Objective {
        x: &design,
        y: x.target().iter().map(|&y| f64::from(y)).collect(),
        l2: params.l2_penalty,
    };

    let p = design.len_of(Axis(1));
    let mut w = Array1::<f64>::zeros(p);
    let mut b = 0.0;
    let mut eta = obj.linear(&w, b);
    let mut f = obj.value_at(&eta, &w);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < params.max_iter {
        let (gw, gb) = obj.gradient_at(&eta, &w);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < params.tolerance {
            break;
        }
        iterations += 1;
        let gnorm2 = gw.dot(&gw) + gb * gb;
        // Change of the linear predictor per unit step.
        let direction = obj.linear(&gw, gb);
        step *= 2.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w - &(step * &gw);
            let eta_new = &eta - &(step * &direction);
            let f_new = obj.value_at(&eta_new, &w_new);
            if f_new <= f - 1e-4 * step * gnorm2 {
                w = w_new;
                b -= step * gb;
                eta = eta_new;
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if iterations % REFRESH == 0 {
            eta = obj.linear(&w, b);
            f = obj.value_at(&eta, &w);
        }
    }
    log::debug!("logistic: {iterations} iterations, loss {f:.6}");

    let mut weights = w.to_vec();
    weights.push(b);
    Ok(LogisticModel {
        features: x.columns().to_vec(),
        prep,
        weights,
        params: params.clone(),
        iterations,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::features::RowKey;

    pub(crate) fn matrix(cols: &[&str], rows: &[Vec<Option<f64>>], y: &[u8]) -> FeatureMatrix {
        let keys = (0..y.len())
            .map(|i| RowKey {
                well_id: Arc::from("w"),
                hole_id: Arc::from("h"),
                bin: i,
                depth: i as f64 * 0.1,
            })
            .collect();
        FeatureMatrix::new(
            cols.iter().map(|s| s.to_string()).collect(),
            rows.concat(),
            y.to_vec(),
            keys,
        )
        .unwrap()
    }

    fn separable() -> FeatureMatrix {
        let xs = [-3.0, -2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 3.0];
        let rows: Vec<_> = xs.iter().map(|x| vec![Some(*x)]).collect();
        let y: Vec<u8> = xs.iter().map(|x| u8::from(*x > 0.0)).collect();
        matrix(&["x"], &rows, &y)
    }

    #[test]
    fn zero_weights_give_one_half() {
        let x = separable();
        let mut m = fit_logistic(&x, &LogisticParams::default()).unwrap();
        m.weights.iter_mut().for_each(|w| *w = 0.0);
        let p = m.predict_mapped(&x, &[0]);
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn separable_reaches_full_accuracy() {
        let x = separable();
        let m = fit_logistic(&x, &LogisticParams::default()).unwrap();
        let p = m.predict_mapped(&x, &[0]);
        for (p, y) in p.iter().zip(x.target()) {
            assert_eq!(u8::from(*p >= 0.5), *y);
        }
    }

    #[test]
    fn known_weights_give_hand_computed_probability() {
        let x = matrix(&["a", "b"], &[vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(-1.0)]], &[0, 1]);
        let mut m = fit_logistic(&x, &LogisticParams::default()).unwrap();
        // identity standardization so weights act on raw values
        m.prep.center = vec![0.0, 0.0];
        m.prep.scale = vec![1.0, 1.0];
        m.weights = vec![0.5, -0.25, 0.1];
        let p = m.predict_mapped(&x, &[0, 1]);
        let eta: f64 = 0.5 * 1.0 - 0.25 * 2.0 + 0.1;
        assert!((p[0] - 1.0 / (1.0 + (-eta).exp())).abs() < 1e-15);
    }

    fn overlapping() -> FeatureMatrix {
        let rows: Vec<Vec<Option<f64>>> = (0..40)
            .map(|i| {
                let a = (i as f64 * 0.37).sin() * 2.0;
                let b = if i % 7 == 0 { None } else { Some((i as f64 * 0.11).cos()) };
                vec![Some(a), b]
            })
            .collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from((i * 13) % 5 < 2)).collect();
        matrix(&["a", "b"], &rows, &y)
    }

    #[test]
    fn duplicated_rows_give_same_weights() {
        let x = overlapping();
        let idx: Vec<usize> = (0..x.n_rows()).chain(0..x.n_rows()).collect();
        let doubled = x.select_rows(&idx);
        let a = fit_logistic(&x, &LogisticParams::default()).unwrap();
        let b = fit_logistic(&doubled, &LogisticParams::default()).unwrap();
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert!((u - v).abs() < 1e-6 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn column_scaling_does_not_change_predictions() {
        let x = overlapping();
        let scaled_rows: Vec<Vec<Option<f64>>> = (0..x.n_rows())
            .map(|r| vec![x.get(r, 0).map(|v| v * 1234.5), x.get(r, 1)])
            .collect();
        let xs = matrix(&["a", "b"], &scaled_rows, x.target());
        let p = fit_logistic(&x, &LogisticParams::default()).unwrap().predict_mapped(&x, &[0, 1]);
        let q = fit_logistic(&xs, &LogisticParams::default()).unwrap().predict_mapped(&xs, &[0, 1]);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = matrix(&["a"], &[vec![Some(1.0)], vec![Some(2.0)]], &[1, 1]);
        assert!(matches!(fit_logistic(&x, &LogisticParams::default()), Err(Error::SingleClass)));
    }
}
