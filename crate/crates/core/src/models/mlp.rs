//! Feed-forward network with ReLU hidden layers and a sigmoid output unit,
//! trained by mini-batch SGD with momentum on the mean log-loss.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::prep::Preprocessor;
use super::{check_classes, sigmoid, softplus};

pub const MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    /// Start the output layer at zero so every initial prediction is 0.5.
    pub zero_output_init: bool,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![100, 500],
            epochs: 200,
            batch_size: 64,
            step_size: 0.01,
            zero_output_init: false,
            seed: 0,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Params("hidden layer sizes must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Params("batch_size must be >= 1".into()));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Params(format!("step_size must be > 0, got {}", self.step_size)));
        }
        Ok(())
    }
}

/// Dense layer mapping `inputs -> outputs` as `a @ weights + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Network parameters without any preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Gradient of one layer's weights and bias.
type LayerGradient = (Array2<f64>, Array1<f64>);

impl Network {
    /// Random network for `sizes = [inputs, hidden.., 1]`. Hidden layers draw
    /// from `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, the output layer from
    /// `U(-sqrt(6/(fan_in+fan_out)), ..)` unless `zero_output` is set.
    pub fn init(sizes: &[usize], seed: u64, zero_output: bool) -> Self {
        assert!(sizes.len() >= 2, "network needs at least an input and an output size");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
                let last = k + 1 == n;
                let limit = if last {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    (6.0 / fan_in.max(1) as f64).sqrt()
                };
                let weights = if last && zero_output {
                    Array2::zeros((fan_in, fan_out))
                } else {
                    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                    Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(&mut rng))
                };
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter vector length");
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
    }

    /// Output logit for each row of `x`.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut a = x.to_owned();
        let n = self.layers.len();
        for (k, l) in self.layers.iter().enumerate() {
            a = a.dot(&l.weights) + &l.bias;
            if k + 1 < n {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        a.column(0).to_owned()
    }

    /// Mean log-loss over the rows of `x` and its gradient, with the same
    /// layout as [`Network::params`].
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let (loss, grads) = self.backprop(x, y);
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in &grads {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
        (loss, flat)
    }

    fn backprop(&self, x: ArrayView2<f64>, y: &[f64]) -> (f64, Vec<LayerGradient>) {
        let rows = x.nrows() as f64;
        let n = self.layers.len();
        // activations[k] is the input to layer k.
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(n);
        let mut a = x.to_owned();
        for (k, l) in self.layers.iter().enumerate() {
            let z = a.dot(&l.weights) + &l.bias;
            activations.push(a);
            a = if k + 1 < n { z.mapv(|v| v.max(0.0)) } else { z };
        }
        let logits = a.column(0);
        let loss = logits.iter().zip(y).map(|(z, y)| softplus(*z) - y * z).sum::<f64>() / rows;

        let mut delta: Array2<f64> = Array2::from_shape_fn((x.nrows(), 1), |(r, _)| (sigmoid(logits[r]) - y[r]) / rows);
        let mut grads = Vec::with_capacity(n);
        for k in (0..n).rev() {
            let input = &activations[k];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weights.t());
                // ReLU derivative: the layer input is the previous activation.
                ndarray::Zip::from(&mut back).and(input).for_each(|d, &act| {
                    if act <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, grads)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub features: Vec<String>,
    pub prep: Preprocessor,
    pub network: Network,
    pub params: MlpParams,
    /// Mean mini-batch loss of each epoch.
    pub epoch_loss: Vec<f64>,
}

impl MlpModel {
    pub(crate) fn predict_mapped(&self, x: &FeatureMatrix, cols: &[usize]) -> Vec<f64> {
        let design = self.prep.transform(x, cols);
        self.network.logits(design.view()).iter().map(|&z| sigmoid(z)).collect()
    }
}

pub fn fit_mlp(x: &FeatureMatrix, params: &MlpParams) -> Result<MlpModel> {
    params.validate()?;
    check_classes(x)?;
    let prep = Preprocessor::fit(x);
    let cols: Vec<usize> = (0..x.n_cols()).collect();
    let design = prep.transform(x, &cols);
    let y: Vec<f64> = x.target().iter().map(|&v| f64::from(v)).collect();

    let mut sizes = vec![prep.width()];
    sizes.extend(&params.hidden);
    sizes.push(1);
    let mut net = Network::init(&sizes, params.seed, params.zero_output_init);
    let mut velocity: Vec<(Array2<f64>, Array1<f64>)> = net
        .layers
        .iter()
        .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
        .collect();

    let n = x.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut epoch_loss = Vec::with_capacity(params.epochs);
    let width = design.ncols();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(params.batch_size) {
            let mut xb = Array2::zeros((chunk.len(), width));
            let mut yb = Vec::with_capacity(chunk.len());
            for (i, &r) in chunk.iter().enumerate() {
                xb.slice_mut(s![i, ..]).assign(&design.row(r));
                yb.push(y[r]);
            }
            let (loss, grads) = net.backprop(xb.view(), &yb);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            total += loss * chunk.len() as f64;
            for ((layer, (vw, vb)), (gw, gb)) in net.layers.iter_mut().zip(&mut velocity).zip(grads) {
                vw.zip_mut_with(&gw, |v, g| *v = MOMENTUM * *v - params.step_size * g);
                vb.zip_mut_with(&gb, |v, g| *v = MOMENTUM * *v - params.step_size * g);
                layer.weights += &*vw;
                layer.bias += &*vb;
            }
        }
        let mean = total / n as f64;
        if !mean.is_finite() || net.layers.iter().any(|l| l.weights.iter().any(|w| !w.is_finite())) {
            return Err(Error::Diverged { epoch });
        }
        epoch_loss.push(mean);
    }
    log::debug!("mlp: {} epochs, final loss {:?}", params.epochs, epoch_loss.last());

    Ok(MlpModel {
        features: x.columns().to_vec(),
        prep,
        network: net,
        params: params.clone(),
        epoch_loss,
    })
}

/// Largest relative difference between the analytic gradient and central
/// finite differences with step `h`. Entries where both are below `floor`
/// in magnitude are compared against `floor`.
pub fn gradient_check(net: &Network, x: ArrayView2<f64>, y: &[f64], h: f64, floor: f64) -> f64 {
    let (_, analytic) = net.loss_and_gradient(x, y);
    let base = net.params();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (i, &g) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p);
        let (up, _) = probe.loss_and_gradient(x, y);
        p[i] = base[i] - h;
        probe.set_params(&p);
        let (down, _) = probe.loss_and_gradient(x, y);
        let numeric = (up - down) / (2.0 * h);
        let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::logistic::tests::matrix;

    fn fixture(seed: u64, rows: usize, d: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-1.0, 1.0).unwrap();
        let x = Array2::from_shape_simple_fn((rows, d), || dist.sample(&mut rng));
        let y = (0..rows).map(|r| f64::from(u8::from(x[[r, 0]] > 0.0))).collect();
        (x, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..3 {
            let (x, y) = fixture(seed, 5, 3);
            let net = Network::init(&[3, 6, 8, 1], seed, false);
            let err = gradient_check(&net, x.view(), &y, 1e-6, 1e-7);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_output_layer_predicts_half() {
        let (x, _) = fixture(1, 7, 4);
        let net = Network::init(&[4, 5, 1], 3, true);
        assert!(net.logits(x.view()).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn params_round_trip() {
        let mut net = Network::init(&[2, 3, 1], 9, false);
        let p = net.params();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 + 1);
        let copy = net.clone();
        net.set_params(&p);
        assert_eq!(net, copy);
    }

    #[test]
    fn separates_one_dimensional_data() {
        let rows: Vec<_> = (-20..20).filter(|&i| i != 0).map(|i| vec![Some(i as f64 / 4.0)]).collect();
        let y: Vec<u8> = (-20..20).filter(|&i| i != 0).map(|i| u8::from(i > 0)).collect();
        let x = matrix(&["a"], &rows, &y);
        let p = MlpParams {
            hidden: vec![8, 8],
            epochs: 300,
            batch_size: 8,
            step_size: 0.05,
            ..MlpParams::default()
        };
        let m = fit_mlp(&x, &p).unwrap();
        let pred = m.predict_mapped(&x, &[0]);
        for (p, y) in pred.iter().zip(&y) {
            assert_eq!(u8::from(*p >= 0.5), *y);
        }
    }

    #[test]
    fn huge_step_diverges() {
        let rows: Vec<_> = (0..40).map(|i| vec![Some(i as f64)]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let x = matrix(&["a"], &rows, &y);
        let p = MlpParams {
            hidden: vec![4],
            step_size: 1e150,
            epochs: 20,
            ..MlpParams::default()
        };
        assert!(matches!(fit_mlp(&x, &p), Err(Error::Diverged { .. })));
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let rows: Vec<_> = (0..30).map(|i| vec![Some(i as f64), None]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i > 12)).collect();
        let x = matrix(&["a", "b"], &rows, &y);
        let p = MlpParams { hidden: vec![5], epochs: 5, seed: 4, ..MlpParams::default() };
        assert_eq!(fit_mlp(&x, &p).unwrap(), fit_mlp(&x, &p).unwrap());
    }
}
