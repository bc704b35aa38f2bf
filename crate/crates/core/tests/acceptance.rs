//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each. A criterion also fails when it overruns its time
//! budget. Set `ACCEPTANCE_ONLY=4,5` to run a subset.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rocktype::eval::{accuracy_l, evaluate_cv, greedy_select, lowo_folds, pr_auc, roc_auc, roc_auc_pairwise};
use rocktype::experiment::{run_experiment, ExperimentConfig, REPORT_JSON};
use rocktype::features::{assemble_matrix, frame_columns, math_features, Family, FeatureSpec, RowKey};
use rocktype::ingest::{run_pipeline, PipelineConfig};
use rocktype::models::{
    fit, fit_gbdt_traced, gradient_check, GbdtParams, LogisticParams, ModelSpec, Network,
};
use rocktype::synth::{gen_benchmark, gen_lithology, gen_telemetry, write_benchmark, BenchmarkSpec, RockParams, SynthWellSpec};
use rocktype::{Error, FeatureMatrix, LabeledBins};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut fixtures = 0;
    while fixtures < 1000 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..=20);
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        let (fast, brute) = (roc_auc(&y, &s).unwrap(), roc_auc_pairwise(&y, &s).unwrap());
        if fast != brute {
            return Err(format!("fixture {fixtures}: {fast} vs pairwise {brute}"));
        }
        let share = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
        let constant = pr_auc(&y, &vec![0.42; n]).unwrap();
        if (constant - share).abs() > 1e-12 {
            return Err(format!("fixture {fixtures}: constant PR AUC {constant} vs share {share}"));
        }
        fixtures += 1;
    }
    let bins = LabeledBins::new(vec![2.0, 1.0, 1.0], vec![1, 0, 1], vec![0.9, 0.8, 0.7]).unwrap();
    let acc = accuracy_l(&bins, 0.5).unwrap();
    check(acc == 0.75, format!("1000 fixtures exact, hand Accuracy L {acc}"))
}

fn bit_rock_identification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut windows = 0;
    for draw in 0..100 {
        let f = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-0.5..0.5));
        let base = RockParams::SAND;
        let rock = RockParams {
            a1: base.a1 * f(&mut rng),
            a2: base.a2 * f(&mut rng),
            a3: base.a3 * f(&mut rng),
            a4: base.a4 * f(&mut rng),
            a5: base.a5 * f(&mut rng),
        };
        let spec = SynthWellSpec { n_bins: 40, rocks: [rock, RockParams::SHALE], seed: draw, ..SynthWellSpec::noiseless() };
        let (frame, _) = gen_telemetry(&[0; 40], &spec, "W", "H", &mut rng).map_err(|e| e.to_string())?;
        let m = math_features(&frame, 5, 1.0).map_err(|e| e.to_string())?;
        let want = [rock.a4 * rock.a1, rock.a4 * rock.a2, rock.a4 * rock.a3 + rock.a5];
        for (column, want) in m.b.iter().zip(want) {
            for v in &column[4..] {
                let Some(v) = v else { return Err(format!("draw {draw}: window without a fit")) };
                worst = worst.max((v - want).abs() / want.abs());
                windows += 1;
            }
        }
    }
    check(worst <= 1e-6, format!("{windows} coefficients, worst relative error {worst:.2e}"))
}

fn fixture(n: usize, d: usize, seed: u64, missing: f64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut values, mut target, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for bin in 0..n {
        let xs: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z = xs[0] * xs[1] + 0.5 * xs[0] + rng.random_range(-0.7..0.7);
        target.push(u8::from(z > 0.0));
        values.extend(xs.iter().map(|&v| if rng.random_bool(missing) { None } else { Some(v) }));
        rows.push(RowKey { well_id: "W".into(), hole_id: "H".into(), bin, depth: 0.0 });
    }
    FeatureMatrix::new((0..d).map(|i| format!("x{i}")).collect(), values, target, rows).unwrap()
}

fn model_sanity() -> Outcome {
    for (seed, missing) in [(0, 0.0), (1, 0.1), (2, 0.3)] {
        let x = fixture(500, 4, seed, missing);
        let params = GbdtParams { n_trees: 100, subsample_rate: 1.0, subspace_share: 1.0, ..GbdtParams::default() };
        let (_, trace) = fit_gbdt_traced(&x, &params).map_err(|e| e.to_string())?;
        if let Some(i) = (1..trace.len()).find(|&i| trace[i] > trace[i - 1] + 1e-12) {
            return Err(format!("fixture {seed}: loss rose at stage {i}: {} -> {}", trace[i - 1], trace[i]));
        }
    }
    let mut worst_fd = 0.0f64;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = Array2::from_shape_fn((16, 4), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..16).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        // Fresh networks have zero biases, so a row that silences every unit
        // of one layer puts the next layer exactly on the ReLU kink. Jitter
        // all parameters to keep the check on differentiable points.
        let mut net = Network::init(&[4, 7, 5, 1], seed, false);
        let jittered: Vec<f64> = net.params().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        net.set_params(&jittered);
        worst_fd = worst_fd.max(gradient_check(&net, x.view(), &y, 1e-5, 1e-7));
    }
    if worst_fd >= 1e-4 {
        return Err(format!("finite-difference relative error {worst_fd:.2e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut values, mut target, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for bin in 0..200 {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let z = a + 2.0 * b;
        if z.abs() < 0.1 {
            continue;
        }
        values.extend([Some(a), Some(b)]);
        target.push(u8::from(z > 0.0));
        rows.push(RowKey { well_id: "W".into(), hole_id: "H".into(), bin, depth: 0.0 });
    }
    let x = FeatureMatrix::new(vec!["a".into(), "b".into()], values, target, rows).unwrap();
    let p = fit(&x, &ModelSpec::Logistic(LogisticParams::default()))
        .and_then(|m| m.predict_proba(&x))
        .map_err(|e| e.to_string())?;
    let correct = p.iter().zip(x.target()).filter(|(p, &y)| u8::from(**p >= 0.5) == y).count();
    let acc = correct as f64 / x.n_rows() as f64;
    check(
        acc == 1.0,
        format!("GBDT loss monotone on 3 fixtures, MLP gradient error {worst_fd:.1e}, logistic training accuracy {acc}"),
    )
}

/// The default benchmark, written to CSV and read back through the
/// preprocessing pipeline exactly as the command-line tool would.
fn benchmark_matrix(families: &[Family]) -> Result<FeatureMatrix, String> {
    let bench = gen_benchmark(&BenchmarkSpec::default()).map_err(|e| e.to_string())?;
    if !(0.10..=0.17).contains(&bench.pooled_share) {
        return Err(format!("pooled shale share {} outside [0.10, 0.17]", bench.pooled_share));
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_benchmark(tmp.path(), &bench).map_err(|e| e.to_string())?;
    let frames = run_pipeline(&PipelineConfig::rooted(tmp.path())).map_err(|e| e.to_string())?.frames;
    assemble_matrix(&frames, &FeatureSpec::with_families(families)).map_err(|e| e.to_string())
}

const BDL: [Family; 3] = [Family::B, Family::D, Family::L];

fn end_to_end() -> Outcome {
    let x = benchmark_matrix(&BDL)?;
    let folds = lowo_folds(&x).map_err(|e| e.to_string())?;
    let gbdt = evaluate_cv(&x, &ModelSpec::Gbdt(GbdtParams::default()).with_seed(7), &folds).map_err(|e| e.to_string())?;
    let logit = evaluate_cv(&x, &ModelSpec::Logistic(LogisticParams::default()), &folds).map_err(|e| e.to_string())?;
    let (acc, major) = (gbdt.pooled.accuracy_l.unwrap_or(0.0), gbdt.pooled.accuracy_l_majority.unwrap_or(1.0));
    let (roc_g, roc_l) = (gbdt.pooled.roc_auc.unwrap_or(0.0), logit.pooled.roc_auc.unwrap_or(1.0));
    let improved = gbdt.wells_improved();
    let detail = format!(
        "Accuracy L {acc:.4} vs majority {major:.4}, {improved}/{} wells improved, ROC AUC gbdt {roc_g:.4} vs logistic {roc_l:.4}",
        folds.len()
    );
    check(acc - major >= 0.02 && improved >= 6 && roc_g >= roc_l - 0.01, detail)
}

fn feature_selection() -> Outcome {
    let x = benchmark_matrix(&BDL)?;
    let folds = lowo_folds(&x).map_err(|e| e.to_string())?;
    let spec = ModelSpec::Gbdt(GbdtParams::default()).with_seed(7);
    // Selection runs hundreds of cross-validations, so it uses a shorter
    // ensemble; the selected set and the full pool are then both scored
    // with the main model.
    let proxy = ModelSpec::Gbdt(GbdtParams { n_trees: 25, learning_rate: 0.2, ..GbdtParams::default() }).with_seed(7);
    let pool = x.columns().to_vec();

    let oracle: Vec<Option<f64>> = x.target().iter().map(|&y| Some(f64::from(y))).collect();
    let with_oracle = x.with_column("oracle", &oracle).map_err(|e| e.to_string())?;
    let mut oracle_pool = pool.clone();
    oracle_pool.push("oracle".into());
    let s = greedy_select(&with_oracle, &oracle_pool, &proxy, &folds).map_err(|e| e.to_string())?;
    let first = s.steps.first().ok_or("nothing selected with the oracle present")?;
    if first.feature != "oracle" || first.roc_auc != 1.0 {
        return Err(format!("first pick {} at ROC AUC {}", first.feature, first.roc_auc));
    }

    let s = greedy_select(&x, &pool, &proxy, &folds).map_err(|e| e.to_string())?;
    let picked = x.select_columns(&s.features()).map_err(|e| e.to_string())?;
    let selected = evaluate_cv(&picked, &spec, &folds).map_err(|e| e.to_string())?.pooled.roc_auc.unwrap_or(0.0);
    let full = evaluate_cv(&x, &spec, &folds).map_err(|e| e.to_string())?.pooled.roc_auc.unwrap_or(1.0);
    check(
        selected >= full - 0.01,
        format!(
            "oracle picked first at 1.0; {} of {} columns selected, ROC AUC {selected:.4} vs full pool {full:.4}",
            s.steps.len(),
            pool.len()
        ),
    )
}

fn anti_leakage() -> Outcome {
    let spec = FeatureSpec::with_families(&[
        Family::B,
        Family::D,
        Family::L,
        Family::F,
        Family::E,
        Family::M,
        Family::FM,
        Family::G,
    ]);
    let mut checked = 0usize;
    for seed in 0..20 {
        let well = SynthWellSpec { n_bins: 800, seed, ..SynthWellSpec::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let litho = gen_lithology(&well, &mut rng);
        let (frame, _) = gen_telemetry(&litho, &well, "W", "H", &mut rng).map_err(|e| e.to_string())?;
        let full = frame_columns(&frame, &spec).map_err(|e| e.to_string())?;
        let cut = rng.random_range(100..800);
        let short = frame.truncated(cut).and_then(|f| frame_columns(&f, &spec)).map_err(|e| e.to_string())?;
        for ((name, a), (_, b)) in full.iter().zip(&short) {
            if a[..cut] != b[..] {
                return Err(format!("well {seed}: `{name}` changed after truncation at bin {cut}"));
            }
            checked += cut;
        }
    }
    let frame = {
        let well = SynthWellSpec { n_bins: 300, ..SynthWellSpec::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let litho = gen_lithology(&well, &mut rng);
        gen_telemetry(&litho, &well, "W", "H", &mut rng).map_err(|e| e.to_string())?.0
    };
    let short_lag = FeatureSpec { families: vec![Family::E], extra_lags: vec![10.0], ..FeatureSpec::default() };
    match assemble_matrix(&[frame], &short_lag) {
        Err(Error::FeatureSpec(msg)) => Ok(format!("{checked} values unchanged on 20 wells; 10 m lag refused: {msg}")),
        Err(e) => Err(format!("10 m lag failed with an unexpected error: {e}")),
        Ok(_) => Err("10 m label lag was accepted".into()),
    }
}

fn strip_timestamp(path: &std::path::Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v.as_object_mut().ok_or("report is not an object")?.remove("timestamp");
    serde_json::to_string_pretty(&v).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let mut cfg = ExperimentConfig { data: PipelineConfig::rooted(&data), ..ExperimentConfig::default() };
    cfg.simulate.n_wells = 4;
    let bench = gen_benchmark(&cfg.resolved().simulate).map_err(|e| e.to_string())?;
    write_benchmark(&data, &bench).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        run_experiment(&cfg, &out).map_err(|e| e.to_string())?;
        reports.push(strip_timestamp(&out.join(REPORT_JSON))?);
    }
    check(reports[0] == reports[1], format!("two runs, {} bytes of report each, identical", reports[0].len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "metric oracles", limit: Duration::from_secs(10), run: metric_oracles },
        Criterion { id: 2, name: "bit-rock identification", limit: Duration::from_secs(5), run: bit_rock_identification },
        Criterion { id: 3, name: "model sanity", limit: Duration::from_secs(60), run: model_sanity },
        Criterion { id: 4, name: "end-to-end benchmark", limit: Duration::from_secs(600), run: end_to_end },
        Criterion { id: 5, name: "feature selection", limit: Duration::from_secs(600), run: feature_selection },
        Criterion { id: 6, name: "anti-leakage audit", limit: Duration::from_secs(60), run: anti_leakage },
        Criterion { id: 7, name: "determinism", limit: Duration::from_secs(600), run: determinism },
    ];
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.as_ref().is_none_or(|o| o.contains(&c.id))) {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if took <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {} ({}): {} [{:.1} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            took.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
