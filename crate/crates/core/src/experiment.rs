//! End-to-end runs: raw files to cached frames, feature matrix, optional
//! grid search and greedy selection, leave-one-well-out evaluation, and the
//! report files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::domain::WellFrame;
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_cv, greedy_select, grid_search, lowo_folds, write_curves, write_wells, EvaluationReport, GbdtGrid,
    GridResult, Selection,
};
use crate::features::{assemble_matrix, FeatureMatrix, FeatureSpec};
use crate::ingest::{run_pipeline, PipelineConfig};
use crate::models::{fit, save_model, GbdtParams, ModelSpec, TrainedModel};
use crate::synth::BenchmarkSpec;

pub const REPORT_JSON: &str = "report.json";
pub const RESOLVED_CONFIG: &str = "config.resolved.json";
pub const FEATURES_CSV: &str = "features.csv";

/// Greedy forward selection over the columns of `pool`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub pool: FeatureSpec,
    /// Model used while selecting; the main model when absent.
    pub model: Option<ModelSpec>,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            pool: FeatureSpec::with_families(&[
                crate::features::Family::B,
                crate::features::Family::D,
                crate::features::Family::L,
            ]),
            model: None,
        }
    }
}

/// Everything a run depends on. Every field has a default, so a config file
/// only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for the generator and every stochastic model.
    pub seed: u64,
    pub data: PipelineConfig,
    pub simulate: BenchmarkSpec,
    pub features: FeatureSpec,
    pub model: ModelSpec,
    pub select: Option<SelectConfig>,
    pub grid: Option<GbdtGrid>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            data: PipelineConfig::default(),
            simulate: BenchmarkSpec::default(),
            features: FeatureSpec::default(),
            model: ModelSpec::Gbdt(GbdtParams::default()),
            select: None,
            grid: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Read a JSON config. Relative data paths resolve against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.data.root.is_relative() {
            cfg.data.root = base.join(&cfg.data.root);
        }
        Ok(cfg)
    }

    /// Apply the master seed everywhere it matters.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.simulate.seed = self.seed;
        cfg.model = self.model.with_seed(self.seed);
        if let Some(sel) = &mut cfg.select {
            sel.model = Some(sel.model.as_ref().unwrap_or(&cfg.model).with_seed(self.seed));
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if let Some(sel) = &self.select {
            sel.pool.validate()?;
        }
        Ok(())
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(RESOLVED_CONFIG), self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Ingest every lateral (reusing cached stages) and return labeled frames.
pub fn preprocess(cfg: &ExperimentConfig) -> Result<Vec<WellFrame>> {
    let run = run_pipeline(&cfg.data)?;
    log::info!(
        "preprocess: {} laterals ({} stages run, {} reused)",
        run.frames.len(),
        run.executed.len(),
        run.reused.len()
    );
    Ok(run.frames)
}

pub fn featurize(frames: &[WellFrame], spec: &FeatureSpec) -> Result<FeatureMatrix> {
    assemble_matrix(frames, spec).map_err(|e| e.in_stage("featurize"))
}

/// Fit one model on every labeled row.
pub fn train(cfg: &ExperimentConfig, dir: &Path) -> Result<TrainedModel> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let x = featurize(&preprocess(&cfg)?, &cfg.features)?;
    let x = x.select_rows(&x.canonical_order());
    let model = fit(&x, &cfg.model).map_err(|e| e.in_stage("train"))?;
    save_model(&model, dir)?;
    cfg.write_resolved(dir)?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamp {
    pub unix_s: u64,
    pub runtime_s: f64,
}

/// Contents of `report.json`. Only `timestamp` varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub grid: Option<GridResult>,
    pub selection: Option<Selection>,
    pub evaluation: EvaluationReport,
    pub timestamp: Timestamp,
}

/// Full protocol on already ingested frames.
pub fn run_on_frames(cfg: &ExperimentConfig, frames: &[WellFrame]) -> Result<ExperimentReport> {
    let started = Instant::now();
    let cfg = cfg.resolved();
    cfg.validate()?;
    let mut model = cfg.model.clone();
    let mut x = featurize(frames, &cfg.features)?;
    let folds = lowo_folds(&x)?;

    let grid = match &cfg.grid {
        Some(g) => {
            let ModelSpec::Gbdt(base) = &model else {
                return Err(Error::Config("grid search needs a gbdt model".into()));
            };
            let result = grid_search(&x, &g.expand(base), &folds).map_err(|e| e.in_stage("grid-search"))?;
            model = result.best_spec().clone();
            Some(result)
        }
        None => None,
    };

    let selection = match &cfg.select {
        Some(sel) => {
            let pool = featurize(frames, &sel.pool)?;
            let names = pool.columns().to_vec();
            let sel_model = sel.model.clone().unwrap_or_else(|| model.clone());
            let s = greedy_select(&pool, &names, &sel_model, &folds).map_err(|e| e.in_stage("select-features"))?;
            x = pool.select_columns(&s.features())?;
            Some(s)
        }
        None => None,
    };

    let evaluation = evaluate_cv(&x, &model, &folds).map_err(|e| e.in_stage("evaluate"))?;
    Ok(ExperimentReport {
        config: cfg,
        grid,
        selection,
        evaluation,
        timestamp: Timestamp {
            unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            runtime_s: started.elapsed().as_secs_f64(),
        },
    })
}

/// Ingest, evaluate and write `report.json`, the curve files, `wells.csv`
/// and the resolved config into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    let frames = preprocess(&cfg.resolved())?;
    let report = run_on_frames(cfg, &frames)?;
    write_outputs(&report, out)?;
    Ok(report)
}

pub fn write_outputs(report: &ExperimentReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    report.config.write_resolved(out)?;
    write_json(&out.join(REPORT_JSON), report)?;
    write_curves(out, &report.evaluation)?;
    write_wells(out, &report.evaluation)
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

/// Plain-text tables: headline metrics, per-well Accuracy L, and the
/// selection and grid traces when present.
pub fn render_report(r: &ExperimentReport) -> String {
    use std::fmt::Write;
    let e = &r.evaluation;
    let mut s = String::new();
    let features = if e.features.is_empty() { "-".to_string() } else { e.features.join(", ") };
    writeln!(s, "model: {}    rows: {}    shale share: {:.3}", e.model.family(), e.n_rows, e.shale_share).unwrap();
    writeln!(s, "features ({}): {}", e.features.len(), features).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:<22}{:>10}{:>10}{:>12}{:>12}", "", "ROC AUC", "PR AUC", "Accuracy L", "Majority").unwrap();
    for (name, m) in [("pooled", &e.pooled), ("mean over folds", &e.fold_mean)] {
        writeln!(
            s,
            "{:<22}{:>10}{:>10}{:>12}{:>12}",
            name,
            fmt(m.roc_auc),
            fmt(m.pr_auc),
            fmt(m.accuracy_l),
            fmt(m.accuracy_l_majority)
        )
        .unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "{:<12}{:>8}{:>10}{:>10}{:>12}{:>10}", "well", "shale", "ROC AUC", "Acc L", "Majority", "gain").unwrap();
    for f in &e.folds {
        let gain = f.accuracy_l.zip(f.accuracy_l_majority).map(|(a, b)| a - b);
        writeln!(
            s,
            "{:<12}{:>8.3}{:>10}{:>10}{:>12}{:>10}",
            f.test_well,
            f.shale_share,
            fmt(f.roc_auc),
            fmt(f.accuracy_l),
            fmt(f.accuracy_l_majority),
            gain.map_or_else(|| "-".into(), |g| format!("{g:+.3}"))
        )
        .unwrap();
    }
    writeln!(s, "wells improved: {} of {}", e.wells_improved(), e.folds.len()).unwrap();
    if let Some(sel) = &r.selection {
        writeln!(s).unwrap();
        writeln!(s, "greedy selection (start {:.3}):", sel.baseline_roc_auc).unwrap();
        for (i, st) in sel.steps.iter().enumerate() {
            writeln!(s, "{:>3}. {:<24}{:>8.4}{:>+10.4}", i + 1, st.feature, st.roc_auc, st.gain).unwrap();
        }
    }
    if let Some(g) = &r.grid {
        writeln!(s).unwrap();
        writeln!(s, "grid search ({} points):", g.table.len()).unwrap();
        for (i, row) in g.table.iter().enumerate() {
            let mark = if i == g.best { "*" } else { " " };
            let params = serde_json::to_string(&row.spec).expect("serializable");
            writeln!(s, "{mark} {:>8}  {params}", fmt(row.roc_auc)).unwrap();
        }
    }
    s
}
