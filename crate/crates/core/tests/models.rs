use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rocktype::features::RowKey;
use rocktype::models::{fit, fit_gbdt_traced, GbdtParams, LogisticParams, ModelSpec, Node, TrainedModel};
use rocktype::FeatureMatrix;

fn random_table(n: usize, d: usize, seed: u64, missing: f64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut target = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for bin in 0..n {
        let xs: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z = xs[0] - 0.5 * xs[1 % d] * xs[0] + rng.random_range(-0.5..0.5);
        target.push(u8::from(z > 0.3));
        values.extend(xs.iter().map(|&v| if rng.random_bool(missing) { None } else { Some(v) }));
        rows.push(RowKey { well_id: "W".into(), hole_id: "H".into(), bin, depth: bin as f64 * 0.1 });
    }
    let cols = (0..d).map(|i| format!("x{i}")).collect();
    FeatureMatrix::new(cols, values, target, rows).unwrap()
}

#[test]
fn full_sample_boosting_never_raises_training_loss() {
    for (seed, missing) in [(0, 0.0), (1, 0.1), (2, 0.3)] {
        let x = random_table(400, 4, seed, missing);
        let params = GbdtParams { subsample_rate: 1.0, subspace_share: 1.0, n_trees: 60, ..GbdtParams::default() };
        let (_, trace) = fit_gbdt_traced(&x, &params).unwrap();
        assert_eq!(trace.len(), 61);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {w:?}");
        }
    }
}

#[test]
fn trees_respect_depth_limit() {
    let x = random_table(500, 5, 3, 0.05);
    for depth in 1..=4 {
        let params = GbdtParams { max_depth: depth, min_leaf: 2, n_trees: 10, ..GbdtParams::default() };
        let TrainedModel::Gbdt(m) = fit(&x, &ModelSpec::Gbdt(params)).unwrap() else { unreachable!() };
        assert!(m.trees.iter().all(|t| t.depth() <= depth));
        assert!(m.trees.iter().all(|t| t.nodes.iter().any(|n| matches!(n, Node::Leaf { .. }))));
    }
}

#[test]
fn predictions_follow_row_permutations() {
    let x = random_table(300, 3, 4, 0.1);
    for spec in [
        ModelSpec::Gbdt(GbdtParams { n_trees: 20, ..GbdtParams::default() }),
        ModelSpec::Logistic(LogisticParams::default()),
    ] {
        let model = fit(&x, &spec).unwrap();
        let p = model.predict_proba(&x).unwrap();
        let idx: Vec<usize> = (0..x.n_rows()).rev().collect();
        let q = model.predict_proba(&x.select_rows(&idx)).unwrap();
        let back: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        assert_eq!(q, back);
    }
}

#[test]
fn logistic_probabilities_ignore_column_scale() {
    let x = random_table(300, 3, 5, 0.0);
    let scaled: Vec<Option<f64>> = x.column(0).iter().map(|v| v.map(|v| v * 1000.0 + 7.0)).collect();
    let names: Vec<String> = x.columns().to_vec();
    let y = x
        .with_column("big", &scaled)
        .unwrap()
        .select_columns(&["big", "x1", "x2"])
        .unwrap();
    let spec = ModelSpec::Logistic(LogisticParams::default());
    let a = fit(&x, &spec).unwrap();
    let b = fit(&y, &spec).unwrap();
    let pa = a.predict_proba(&x).unwrap();
    let pb = b.predict_proba(&y).unwrap();
    assert_eq!(names.len(), 3);
    for (u, v) in pa.iter().zip(&pb) {
        assert!((u - v).abs() < 1e-6, "{u} vs {v}");
    }
}
