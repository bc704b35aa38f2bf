use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{Class, WellFrame, BIN_SIZE};
use crate::error::{Error, Result};

use super::bitrock::{math_features, MathColumns};
use super::derived::{apr_series, sed_series};
use super::window::{extra_feature, lag_feature, rolling_features};
use super::{Base, FeatureName, FeatureSpec, RollStat};

/// Identity of one matrix row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowKey {
    pub well_id: Arc<str>,
    pub hole_id: Arc<str>,
    pub bin: usize,
    pub depth: f64,
}

/// Row-major feature table with explicit missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    values: Vec<Option<f64>>,
    target: Vec<Class>,
    rows: Vec<RowKey>,
    lengths: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, values: Vec<Option<f64>>, target: Vec<Class>, rows: Vec<RowKey>) -> Result<Self> {
        let n = target.len();
        if rows.len() != n || values.len() != n * columns.len() {
            return Err(Error::Config("feature matrix dimensions disagree".into()));
        }
        let unique: BTreeSet<&String> = columns.iter().collect();
        if unique.len() != columns.len() {
            return Err(Error::Config("duplicate feature column".into()));
        }
        Ok(Self {
            columns,
            values,
            target,
            rows,
            lengths: vec![BIN_SIZE; n],
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row(&self, r: usize) -> &[Option<f64>] {
        let d = self.n_cols();
        &self.values[r * d..(r + 1) * d]
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.values[r * self.n_cols() + c]
    }

    pub fn column(&self, c: usize) -> Vec<Option<f64>> {
        (0..self.n_rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn target(&self) -> &[Class] {
        &self.target
    }

    pub fn rows(&self) -> &[RowKey] {
        &self.rows
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Distinct well ids in sorted order.
    pub fn wells(&self) -> Vec<Arc<str>> {
        let set: BTreeSet<&Arc<str>> = self.rows.iter().map(|r| &r.well_id).collect();
        set.into_iter().cloned().collect()
    }

    pub fn positive_share(&self) -> f64 {
        if self.target.is_empty() {
            return 0.0;
        }
        self.target.iter().filter(|&&y| y == 1).count() as f64 / self.n_rows() as f64
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(idx.len() * d);
        for &r in idx {
            values.extend_from_slice(self.row(r));
        }
        Self {
            columns: self.columns.clone(),
            values,
            target: idx.iter().map(|&r| self.target[r]).collect(),
            rows: idx.iter().map(|&r| self.rows[r].clone()).collect(),
            lengths: idx.iter().map(|&r| self.lengths[r]).collect(),
        }
    }

    /// Only the named columns, in the given order.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownFeature(n.as_ref().to_owned()))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(Self {
            columns: names.iter().map(|n| n.as_ref().to_owned()).collect(),
            values,
            ..self.clone()
        })
    }

    /// Append a column, e.g. an externally computed signal.
    pub fn with_column(&self, name: &str, column: &[Option<f64>]) -> Result<Self> {
        if column.len() != self.n_rows() {
            return Err(Error::Config(format!("column `{name}` has wrong length")));
        }
        if self.column_index(name).is_some() {
            return Err(Error::Config(format!("column `{name}` already exists")));
        }
        let d = self.n_cols();
        let mut values = Vec::with_capacity(self.n_rows() * (d + 1));
        for (r, v) in column.iter().enumerate() {
            values.extend_from_slice(self.row(r));
            values.push(*v);
        }
        let mut columns = self.columns.clone();
        columns.push(name.to_owned());
        Ok(Self {
            columns,
            values,
            ..self.clone()
        })
    }

    /// Row indices sorted by (well, hole, bin).
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.sort_by(|&a, &b| {
            let (x, y) = (&self.rows[a], &self.rows[b]);
            (&x.well_id, &x.hole_id, x.bin).cmp(&(&y.well_id, &y.hole_id, y.bin))
        });
        idx
    }

    /// Export as `well_id,hole_id,depth_m,target,<features...>`; missing cells are empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "well_id,hole_id,depth_m,target").map_err(io)?;
        for c in &self.columns {
            write!(w, ",{c}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for r in 0..self.n_rows() {
            let k = &self.rows[r];
            write!(w, "{},{},{},{}", k.well_id, k.hole_id, k.depth, self.target[r]).map_err(io)?;
            for v in self.row(r) {
                match v {
                    Some(v) => write!(w, ",{v}"),
                    None => write!(w, ","),
                }
                .map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Lazily computed per-frame series shared between columns.
struct FrameCache<'a> {
    frame: &'a WellFrame,
    spec: &'a FeatureSpec,
    apr: Option<Vec<Option<f64>>>,
    sed: Option<Vec<Option<f64>>>,
    math: Option<MathColumns>,
}

impl<'a> FrameCache<'a> {
    fn base(&mut self, base: Base) -> Result<Vec<Option<f64>>> {
        Ok(match base {
            Base::Channel(c) => self.frame.channel(c).to_vec(),
            Base::Apr => self.apr.get_or_insert_with(|| apr_series(self.frame)).clone(),
            Base::Sed => {
                if self.sed.is_none() {
                    self.sed = Some(sed_series(self.frame)?);
                }
                self.sed.clone().unwrap()
            }
        })
    }

    fn math(&mut self) -> Result<&MathColumns> {
        if self.math.is_none() {
            self.math = Some(math_features(self.frame, self.spec.math_window, self.spec.rolling_window)?);
        }
        Ok(self.math.as_ref().unwrap())
    }

    fn column(&mut self, name: &FeatureName) -> Result<Vec<Option<f64>>> {
        Ok(match *name {
            FeatureName::Basic(b) => self.base(b)?,
            FeatureName::Rolling { base, stat, window_m } => {
                let r = rolling_features(&self.base(base)?, window_m)?;
                match stat {
                    RollStat::Mean => r.mean,
                    RollStat::Std => r.std,
                    RollStat::Diff => r.border_diff,
                }
            }
            FeatureName::Lag { base, lag_m } => lag_feature(&self.base(base)?, lag_m)?,
            FeatureName::Fluctuation(c) => self.frame.std_of(c).to_vec(),
            FeatureName::Extra { lag_m } => extra_feature(&self.frame.labels, lag_m)?,
            FeatureName::Math(k) => self.math()?.b[k].clone(),
            FeatureName::MathFluctuation { coef, window_m } => {
                if (window_m - self.spec.rolling_window).abs() < 1e-9 {
                    self.math()?.fluctuation[coef].clone()
                } else {
                    rolling_features(&self.math()?.b[coef].clone(), window_m)?.std
                }
            }
        })
    }
}

/// All requested columns for one frame, every bin included.
pub fn frame_columns(frame: &WellFrame, spec: &FeatureSpec) -> Result<Vec<(String, Vec<Option<f64>>)>> {
    let names = spec.columns()?;
    let mut cache = FrameCache {
        frame,
        spec,
        apr: None,
        sed: None,
        math: None,
    };
    names
        .iter()
        .map(|n| Ok((n.to_string(), cache.column(n)?)))
        .collect()
}

/// Build the row-per-bin matrix over all frames, ordered by (well, hole, bin).
/// Bins without a label are dropped.
pub fn assemble_matrix(frames: &[WellFrame], spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let names: Vec<String> = spec.columns()?.iter().map(ToString::to_string).collect();
    let mut order: Vec<&WellFrame> = frames.iter().collect();
    order.sort_by(|a, b| (&a.well_id, &a.hole_id).cmp(&(&b.well_id, &b.hole_id)));

    let per_frame: Vec<Vec<(String, Vec<Option<f64>>)>> =
        order.par_iter().map(|f| frame_columns(f, spec)).collect::<Result<_>>()?;

    let mut ids: HashMap<String, Arc<str>> = HashMap::new();
    let mut intern = |s: &str| -> Arc<str> { ids.entry(s.to_owned()).or_insert_with(|| Arc::from(s)).clone() };
    let (mut values, mut target, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (frame, cols) in order.iter().zip(&per_frame) {
        let well = intern(&frame.well_id);
        let hole = intern(&frame.hole_id);
        for (i, label) in frame.labels.iter().enumerate() {
            let Some(y) = label else { continue };
            values.extend(cols.iter().map(|(_, c)| c[i]));
            target.push(*y);
            rows.push(RowKey {
                well_id: well.clone(),
                hole_id: hole.clone(),
                bin: i,
                depth: frame.grid.depth_of(i),
            });
        }
    }
    FeatureMatrix::new(names, values, target, rows)
}
