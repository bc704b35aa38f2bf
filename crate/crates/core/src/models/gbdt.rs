//! Gradient boosting on regression trees for the logistic loss.
//!
//! Each stage fits a depth-limited tree to the gradient/hessian statistics of
//! the current ensemble with Newton leaf values. Split search runs on
//! gradient histograms over at most 255 value bins per feature; features
//! with fewer distinct values are searched exactly. Rows with a missing value
//! follow a per-node default branch chosen to maximize the split gain.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::{check_classes, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub n_trees: usize,
    pub max_depth: usize,
    /// Share of features offered to each tree.
    pub subspace_share: f64,
    /// Share of rows used to grow each tree.
    pub subsample_rate: f64,
    pub min_leaf: usize,
    /// Scale minority-class loss terms by `n_majority / n_minority`.
    pub class_weighting: bool,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            n_trees: 100,
            max_depth: 3,
            subspace_share: 0.8,
            subsample_rate: 0.55,
            min_leaf: 20,
            class_weighting: false,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Params(m));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1".into());
        }
        if !(self.subspace_share > 0.0 && self.subspace_share <= 1.0) {
            return bad(format!("subspace_share must be in (0, 1], got {}", self.subspace_share));
        }
        if !(self.subsample_rate > 0.0 && self.subsample_rate <= 1.0) {
            return bad(format!("subsample_rate must be in (0, 1], got {}", self.subsample_rate));
        }
        if self.min_leaf == 0 {
            return bad("min_leaf must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// Branch taken when the feature is missing.
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Evaluate with `value(feature)` giving the (possibly missing) input.
    pub fn eval(&self, value: impl Fn(usize) -> Option<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let go_left = match value(feature) {
                        Some(v) => v <= threshold,
                        None => default_left,
                    };
                    i = if go_left { left } else { right };
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub features: Vec<String>,
    pub params: GbdtParams,
    /// Initial log-odds.
    pub init: f64,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn raw_score(&self, value: impl Fn(usize) -> Option<f64> + Copy) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.eval(value)).sum();
        self.init + self.params.learning_rate * sum
    }

    pub(crate) fn predict_mapped(&self, x: &FeatureMatrix, cols: &[usize]) -> Vec<f64> {
        (0..x.n_rows())
            .map(|r| {
                let row = x.row(r);
                sigmoid(self.raw_score(|f| row[cols[f]]))
            })
            .collect()
    }
}

pub fn fit_gbdt(x: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtModel> {
    boost(x, params, false).map(|(m, _)| m)
}

/// Largest number of value bins per feature; one more code marks missing.
const MAX_BINS: usize = 255;
const MISSING: u8 = u8::MAX;

/// Column-major training data with every value replaced by a bin code.
///
/// `cuts[f]` is ascending and a present value `v` gets the code
/// `#{c in cuts[f] : c < v}`, so `v <= cuts[f][b]` exactly when its code is
/// at most `b`. Features with at most [`MAX_BINS`] distinct values keep one
/// bin per value, which makes the split search exact for them.
struct Binned {
    values: Vec<Vec<Option<f64>>>,
    codes: Vec<Vec<u8>>,
    cuts: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: &FeatureMatrix) -> Self {
        let d = x.n_cols();
        let values: Vec<Vec<Option<f64>>> = (0..d).map(|c| x.column(c)).collect();
        let mut codes = Vec::with_capacity(d);
        let mut cuts = Vec::with_capacity(d);
        for col in &values {
            let c = cut_points(col);
            codes.push(
                col.iter()
                    .map(|v| match v {
                        Some(v) => c.partition_point(|cut| cut < v) as u8,
                        None => MISSING,
                    })
                    .collect(),
            );
            cuts.push(c);
        }
        Self { values, codes, cuts }
    }
}

fn cut_points(col: &[Option<f64>]) -> Vec<f64> {
    let mut sorted: Vec<f64> = col.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= MAX_BINS {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    // Quantile boundaries, each placed between two neighbouring distinct values.
    let mut cuts: Vec<f64> = Vec::with_capacity(MAX_BINS - 1);
    for k in 1..MAX_BINS {
        let v = sorted[k * sorted.len() / MAX_BINS];
        let next = distinct.partition_point(|&u| u <= v);
        if next < distinct.len() {
            let c = midpoint(v, distinct[next]);
            if cuts.last().is_none_or(|&last| c > last) {
                cuts.push(c);
            }
        }
    }
    cuts
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn plus(self, o: Stats) -> Stats {
        Stats { g: self.g + o.g, h: self.h + o.h, n: self.n + o.n }
    }

    fn minus(self, o: Stats) -> Stats {
        Stats { g: self.g - o.g, h: self.h - o.h, n: self.n - o.n }
    }

    fn score(&self) -> f64 {
        if self.h > 1e-12 { self.g * self.g / self.h } else { 0.0 }
    }

    fn leaf_value(&self) -> f64 {
        if self.h > 1e-12 { -self.g / self.h } else { 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: u8,
    default_left: bool,
}

struct Grower<'a> {
    data: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
}

impl Grower<'_> {
    /// Grow one tree over `rows` using only `features`.
    fn grow(&self, rows: &[u32], features: &[usize]) -> Tree {
        let mut root = Stats::default();
        for &r in rows {
            root.add(self.grad[r as usize], self.hess[r as usize]);
        }
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut stats = vec![root];
        // Rows of every open node, in ascending row order.
        let mut open: Vec<(usize, Vec<u32>)> = vec![(0, rows.to_vec())];

        for _ in 0..self.max_depth {
            let mut next = Vec::new();
            for (id, members) in open {
                let Some(c) = self.best_split(&members, features, stats[id]) else { continue };
                let codes = &self.data.codes[c.feature];
                let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                let (mut ls, mut rs) = (Stats::default(), Stats::default());
                for &r in &members {
                    let code = codes[r as usize];
                    let go_left = if code == MISSING { c.default_left } else { code <= c.bin };
                    let (g, h) = (self.grad[r as usize], self.hess[r as usize]);
                    if go_left {
                        left_rows.push(r);
                        ls.add(g, h);
                    } else {
                        right_rows.push(r);
                        rs.add(g, h);
                    }
                }
                let (l, r) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                stats.push(ls);
                stats.push(rs);
                nodes[id] = Node::Split {
                    feature: c.feature,
                    threshold: self.data.cuts[c.feature][c.bin as usize],
                    default_left: c.default_left,
                    left: l,
                    right: r,
                };
                next.push((l, left_rows));
                next.push((r, right_rows));
            }
            if next.is_empty() {
                break;
            }
            open = next;
        }

        for (i, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = node {
                *value = stats[i].leaf_value();
            }
        }
        Tree { nodes }
    }

    fn best_split(&self, members: &[u32], features: &[usize], total: Stats) -> Option<Candidate> {
        if members.len() < 2 * self.min_leaf {
            return None;
        }
        let mut best: Option<Candidate> = None;
        let mut hist = [Stats::default(); MAX_BINS + 1];
        for &f in features {
            let cuts = &self.data.cuts[f];
            if cuts.is_empty() {
                continue;
            }
            hist[..=cuts.len()].fill(Stats::default());
            hist[MAX_BINS] = Stats::default();
            let codes = &self.data.codes[f];
            for &r in members {
                hist[codes[r as usize] as usize].add(self.grad[r as usize], self.hess[r as usize]);
            }
            let miss = hist[MAX_BINS];
            let mut left = Stats::default();
            for (b, bin) in hist[..cuts.len()].iter().enumerate() {
                left = left.plus(*bin);
                if left.n == 0 {
                    continue;
                }
                if let Some(c) = self.evaluate(f, b as u8, left, miss, total) {
                    if best.is_none_or(|x| c.gain > x.gain) {
                        best = Some(c);
                    }
                }
            }
        }
        best
    }

    fn evaluate(&self, feature: usize, bin: u8, left: Stats, miss: Stats, total: Stats) -> Option<Candidate> {
        let right = total.minus(left).minus(miss);
        let parent = total.score();
        let option = |l: Stats, r: Stats| -> Option<f64> {
            (l.n >= self.min_leaf && r.n >= self.min_leaf).then(|| l.score() + r.score() - parent)
        };
        let as_left = option(left.plus(miss), right);
        let as_right = option(left, right.plus(miss));
        let (gain, default_left) = match (as_left, as_right) {
            (None, None) => return None,
            (Some(a), None) => (a, true),
            (None, Some(b)) => (b, false),
            (Some(a), Some(_)) if miss.n == 0 => (a, left.h >= right.h),
            (Some(a), Some(b)) => {
                if a >= b { (a, true) } else { (b, false) }
            }
        };
        // Zero-gain splits are kept: a split that only pays off one level
        // deeper (XOR-like interactions) has no first-level gain.
        (gain > -1e-12).then_some(Candidate {
            gain,
            feature,
            bin,
            default_left,
        })
    }
}

/// Threshold strictly between `a < b` so that `a` goes left and `b` right.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a { a } else { m }
}

/// Fit and also return the training loss after initialization and after
/// every stage (weighted mean log-loss on all rows).
pub fn fit_gbdt_traced(x: &FeatureMatrix, params: &GbdtParams) -> Result<(GbdtModel, Vec<f64>)> {
    boost(x, params, true)
}

fn boost(x: &FeatureMatrix, params: &GbdtParams, traced: bool) -> Result<(GbdtModel, Vec<f64>)> {
    params.validate()?;
    check_classes(x)?;
    let n = x.n_rows();
    let d = x.n_cols();
    let y: Vec<f64> = x.target().iter().map(|&v| f64::from(v)).collect();

    let n_pos = x.target().iter().filter(|&&v| v == 1).count();
    let n_neg = n - n_pos;
    let weight: Vec<f64> = if params.class_weighting {
        let (minority, ratio) = if n_pos <= n_neg {
            (1.0, n_neg as f64 / n_pos as f64)
        } else {
            (0.0, n_pos as f64 / n_neg as f64)
        };
        y.iter().map(|&v| if v == minority { ratio } else { 1.0 }).collect()
    } else {
        vec![1.0; n]
    };
    let wsum: f64 = weight.iter().sum();
    let prior = y.iter().zip(&weight).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let init = (prior / (1.0 - prior)).ln();

    let data = Binned::new(x);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut score = vec![init; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let loss = |score: &[f64]| -> f64 {
        score
            .iter()
            .zip(&y)
            .zip(&weight)
            .map(|((s, y), w)| w * (softplus(*s) - y * s))
            .sum::<f64>()
            / wsum
    };
    let mut trace = Vec::new();
    if traced {
        trace.push(loss(&score));
    }

    let n_rows_tree = ((params.subsample_rate * n as f64).ceil() as usize).clamp(1, n);
    let n_feat_tree = ((params.subspace_share * d as f64).ceil() as usize).clamp(usize::from(d > 0), d);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = sigmoid(score[i]);
            grad[i] = weight[i] * (p - y[i]);
            hess[i] = weight[i] * (p * (1.0 - p)).max(1e-16);
        }
        let mut rows: Vec<u32> = if n_rows_tree == n {
            (0..n as u32).collect()
        } else {
            sample(&mut rng, n, n_rows_tree).into_iter().map(|i| i as u32).collect()
        };
        rows.sort_unstable();
        let mut features: Vec<usize> = if n_feat_tree == d {
            (0..d).collect()
        } else {
            sample(&mut rng, d, n_feat_tree).into_vec()
        };
        features.sort_unstable();

        let grower = Grower {
            data: &data,
            grad: &grad,
            hess: &hess,
            min_leaf: params.min_leaf,
            max_depth: params.max_depth,
        };
        let tree = grower.grow(&rows, &features);
        for (i, s) in score.iter_mut().enumerate() {
            *s += params.learning_rate * tree.eval(|f| data.values[f][i]);
        }
        if traced {
            trace.push(loss(&score));
        }
        trees.push(tree);
    }

    Ok((
        GbdtModel {
            features: x.columns().to_vec(),
            params: params.clone(),
            init,
            trees,
        },
        trace,
    ))
}
