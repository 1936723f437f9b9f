//! Gaussian naive Bayes over numeric attributes.

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::aggregate::ExactSum;
use crate::dataset::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    /// Lower bound on every per-class variance.
    pub variance_floor: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self { variance_floor: 1e-9 }
    }
}

impl NaiveBayesParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(ClassifierError::InvalidParams(format!(
                "variance floor {} must be positive",
                self.variance_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    /// Laplace-smoothed class priors.
    pub priors: [f64; 2],
    /// Per class, per attribute.
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

impl NaiveBayes {
    pub fn fit(table: &FeatureTable, params: &NaiveBayesParams) -> Self {
        let counts = table.class_counts();
        let n = table.n_rows() as f64;
        let priors = [(counts[0] as f64 + 1.0) / (n + 2.0), (counts[1] as f64 + 1.0) / (n + 2.0)];
        let m = table.n_attributes();
        let mut means = [vec![0.0; m], vec![0.0; m]];
        let mut variances = [vec![params.variance_floor; m], vec![params.variance_floor; m]];
        for c in 0..2 {
            if counts[c] == 0 {
                continue;
            }
            let rows: Vec<&[f64]> =
                table.rows().iter().filter(|r| r.class.index() == c).map(|r| r.features.as_slice()).collect();
            let nc = rows.len() as f64;
            for a in 0..m {
                let mut s = ExactSum::default();
                rows.iter().for_each(|r| s.add(r[a]));
                let mean = s.value() / nc;
                let mut ss = ExactSum::default();
                rows.iter().for_each(|r| ss.add((r[a] - mean) * (r[a] - mean)));
                means[c][a] = mean;
                variances[c][a] = (ss.value() / nc).max(params.variance_floor);
            }
        }
        Self { priors, means, variances }
    }

    /// Log of prior times likelihood, per class.
    pub fn log_joint(&self, row: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = self.priors[c].ln();
            for ((&x, &mu), &var) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                let d = x - mu;
                s -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
            }
            *o = s;
        }
        out
    }

    pub fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let l = self.log_joint(row);
        let top = l[0].max(l[1]);
        let e = [(l[0] - top).exp(), (l[1] - top).exp()];
        let z = e[0] + e[1];
        [e[0] / z, e[1] / z]
    }
}
