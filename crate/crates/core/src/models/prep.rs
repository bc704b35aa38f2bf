//! Mean imputation with missing-indicator columns, then standardization.
//! Used by the logistic and neural models; trees see raw missing values.

use ndarray::Array2;

use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    /// Training mean of each raw feature, used to impute missing values.
    pub impute: Vec<f64>,
    /// Raw features that had missing training values and get an indicator column.
    pub indicators: Vec<usize>,
    /// Per output column centering and scaling.
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Preprocessor {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let (n, d) = (x.n_rows(), x.n_cols());
        let mut sum = vec![0.0; d];
        let mut count = vec![0usize; d];
        for r in 0..n {
            for (c, v) in x.row(r).iter().enumerate() {
                if let Some(v) = v {
                    sum[c] += v;
                    count[c] += 1;
                }
            }
        }
        let impute: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(s, &k)| if k > 0 { s / k as f64 } else { 0.0 })
            .collect();
        let indicators: Vec<usize> = (0..d).filter(|&c| count[c] < n).collect();
        let mut prep = Self {
            impute,
            indicators,
            center: Vec::new(),
            scale: Vec::new(),
        };
        let width = prep.width();
        let raw = prep.raw_design(x);
        let mut center = vec![0.0; width];
        let mut scale = vec![1.0; width];
        if n > 0 {
            for j in 0..width {
                let col = raw.column(j);
                let m = col.sum() / n as f64;
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                center[j] = m;
                let s = var.sqrt();
                scale[j] = if s > 1e-12 { s } else { 1.0 };
            }
        }
        prep.center = center;
        prep.scale = scale;
        prep
    }

    /// Number of model inputs after adding indicator columns.
    pub fn width(&self) -> usize {
        self.impute.len() + self.indicators.len()
    }

    fn raw_design(&self, x: &FeatureMatrix) -> Array2<f64> {
        self.raw_design_cols(x, &(0..x.n_cols()).collect::<Vec<_>>())
    }

    /// Imputed design before standardization. `cols[i]` is the matrix column
    /// holding this model's i-th feature.
    fn raw_design_cols(&self, x: &FeatureMatrix, cols: &[usize]) -> Array2<f64> {
        let d = self.impute.len();
        let mut out = Array2::zeros((x.n_rows(), self.width()));
        for r in 0..x.n_rows() {
            let row = x.row(r);
            for (i, &c) in cols.iter().enumerate() {
                out[[r, i]] = row[c].unwrap_or(self.impute[i]);
            }
            for (k, &i) in self.indicators.iter().enumerate() {
                out[[r, d + k]] = if row[cols[i]].is_none() { 1.0 } else { 0.0 };
            }
        }
        out
    }

    /// Standardized design matrix for the given column mapping.
    pub fn transform(&self, x: &FeatureMatrix, cols: &[usize]) -> Array2<f64> {
        let mut out = self.raw_design_cols(x, cols);
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.center[j]) / self.scale[j];
            }
        }
        out
    }
}
