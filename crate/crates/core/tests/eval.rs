use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rocktype::eval::{evaluate_cv, greedy_select, grid_search, lowo_folds, FoldStatus, GbdtGrid};
use rocktype::features::RowKey;
use rocktype::models::{fit, GbdtParams, LogisticParams, ModelSpec};
use rocktype::{Error, FeatureMatrix};

/// `n` rows per (well, hole) with one noisy informative column and one
/// pure-noise column.
fn table(wells: &[(&str, &str)], n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut values, mut target, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (well, hole) in wells {
        let (w, h): (Arc<str>, Arc<str>) = ((*well).into(), (*hole).into());
        for bin in 0..n {
            let y = u8::from(rng.random_bool(0.3));
            values.push(Some(f64::from(y) + rng.random_range(-0.8..0.8)));
            values.push(Some(rng.random_range(-1.0..1.0)));
            target.push(y);
            rows.push(RowKey { well_id: w.clone(), hole_id: h.clone(), bin, depth: bin as f64 * 0.1 });
        }
    }
    FeatureMatrix::new(vec!["signal".into(), "noise".into()], values, target, rows).unwrap()
}

fn small_gbdt() -> ModelSpec {
    ModelSpec::Gbdt(GbdtParams { n_trees: 20, min_leaf: 5, ..GbdtParams::default() })
}

#[test]
fn laterals_share_their_well_fold() {
    let x = table(&[("A", "H1"), ("A", "H2"), ("B", "H1")], 10, 0);
    let folds = lowo_folds(&x).unwrap();
    assert_eq!(folds.len(), 2);
    assert_eq!(folds[0].test, "A");
    assert_eq!(folds[0].train, ["B"]);
    let one = table(&[("A", "H1"), ("A", "H2")], 10, 0);
    assert!(matches!(lowo_folds(&one), Err(Error::TooFewWells(1))));
}

#[test]
fn prior_model_is_uninformative_when_wells_match() {
    // Every well holds the same share, so every fold prior is identical.
    let mut values = Vec::new();
    let mut target = Vec::new();
    let mut rows = Vec::new();
    for well in ["A", "B", "C"] {
        for bin in 0..10 {
            values.push(Some(0.0));
            target.push(u8::from(bin < 3));
            rows.push(RowKey { well_id: well.into(), hole_id: "H1".into(), bin, depth: 0.0 });
        }
    }
    let x = FeatureMatrix::new(vec!["c".into()], values, target, rows).unwrap();
    let r = evaluate_cv(&x, &ModelSpec::Prior, &lowo_folds(&x).unwrap()).unwrap();
    assert_eq!(r.pooled.roc_auc, Some(0.5));
}

#[test]
fn oracle_column_scores_perfectly() {
    let x = table(&[("A", "H1"), ("B", "H1"), ("C", "H1")], 80, 1);
    let oracle: Vec<Option<f64>> = x.target().iter().map(|&y| Some(f64::from(y))).collect();
    let x = x.with_column("oracle", &oracle).unwrap().select_columns(&["oracle"]).unwrap();
    let r = evaluate_cv(&x, &small_gbdt(), &lowo_folds(&x).unwrap()).unwrap();
    assert_eq!(r.pooled.roc_auc, Some(1.0));
    assert_eq!(r.pooled.pr_auc, Some(1.0));
    assert_eq!(r.pooled.accuracy_l, Some(1.0));
}

#[test]
fn row_order_does_not_change_the_report() {
    let x = table(&[("A", "H1"), ("A", "H2"), ("B", "H1"), ("C", "H1")], 60, 2);
    let folds = lowo_folds(&x).unwrap();
    let mut idx: Vec<usize> = (0..x.n_rows()).collect();
    idx.reverse();
    idx.rotate_left(37);
    let shuffled = x.select_rows(&idx);
    for spec in [small_gbdt(), ModelSpec::Logistic(LogisticParams::default())] {
        let a = evaluate_cv(&x, &spec, &folds).unwrap();
        let b = evaluate_cv(&shuffled, &spec, &folds).unwrap();
        assert_eq!(a.pooled, b.pooled);
        assert_eq!(a.folds, b.folds);
    }
}

#[test]
fn single_class_training_fold_is_flagged() {
    let mut values = Vec::new();
    let mut target = Vec::new();
    let mut rows = Vec::new();
    for (well, ys) in [("A", [0u8, 0, 0, 0]), ("B", [0, 0, 0, 0]), ("C", [1, 0, 1, 0])] {
        for (bin, &y) in ys.iter().enumerate() {
            values.push(Some(f64::from(y)));
            target.push(y);
            rows.push(RowKey { well_id: well.into(), hole_id: "H1".into(), bin, depth: 0.0 });
        }
    }
    let x = FeatureMatrix::new(vec!["v".into()], values, target, rows).unwrap();
    let r = evaluate_cv(&x, &ModelSpec::Prior, &lowo_folds(&x).unwrap()).unwrap();
    let c = r.folds.iter().find(|f| f.test_well == "C").unwrap();
    assert_eq!(c.status, FoldStatus::SingleClassTrain);
    assert!(r.folds.iter().filter(|f| f.test_well != "C").all(|f| f.status == FoldStatus::Ok));
    assert_eq!(r.predictions.len(), 8);
}

#[test]
fn greedy_takes_the_oracle_first_and_stops() {
    let x = table(&[("A", "H1"), ("B", "H1"), ("C", "H1")], 80, 3);
    let oracle: Vec<Option<f64>> = x.target().iter().map(|&y| Some(f64::from(y))).collect();
    let x = x.with_column("oracle", &oracle).unwrap();
    let pool = x.columns().to_vec();
    let s = greedy_select(&x, &pool, &small_gbdt(), &lowo_folds(&x).unwrap()).unwrap();
    assert_eq!(s.features(), ["oracle"]);
    assert_eq!(s.roc_auc(), 1.0);
}

#[test]
fn duplicate_columns_are_picked_once() {
    let x = table(&[("A", "H1"), ("B", "H1"), ("C", "H1")], 80, 4);
    let copy = x.column(0);
    let x = x.with_column("signal_copy", &copy).unwrap().select_columns(&["signal", "signal_copy"]).unwrap();
    let pool = x.columns().to_vec();
    let s = greedy_select(&x, &pool, &small_gbdt(), &lowo_folds(&x).unwrap()).unwrap();
    assert_eq!(s.features(), ["signal"]);
}

#[test]
fn grid_ties_prefer_the_smaller_model() {
    let x = table(&[("A", "H1"), ("B", "H1"), ("C", "H1")], 80, 5);
    let oracle: Vec<Option<f64>> = x.target().iter().map(|&y| Some(f64::from(y))).collect();
    let x = x.with_column("oracle", &oracle).unwrap().select_columns(&["oracle"]).unwrap();
    let grid = GbdtGrid { n_trees: vec![30, 10], max_depth: vec![3, 2], ..GbdtGrid::default() };
    let specs = grid.expand(&GbdtParams { min_leaf: 5, ..GbdtParams::default() });
    assert_eq!(specs.len(), 4);
    let r = grid_search(&x, &specs, &lowo_folds(&x).unwrap()).unwrap();
    let ModelSpec::Gbdt(best) = r.best_spec() else { panic!("not gbdt") };
    assert_eq!((best.n_trees, best.max_depth), (10, 2));
}

#[test]
fn seeded_fits_are_reproducible() {
    let x = table(&[("A", "H1"), ("B", "H1")], 100, 6);
    let spec = small_gbdt().with_seed(11);
    let a = fit(&x, &spec).unwrap().predict_proba(&x).unwrap();
    let b = fit(&x, &spec).unwrap().predict_proba(&x).unwrap();
    assert_eq!(a, b);
}
