//! Support-vector classifier: min-max scaling, SMO training and a logistic
//! fit on decision values for probabilities.

use serde::{Deserialize, Serialize};

use super::smo::{smo_solve, CachedKernel, Kernel};
use super::ClassifierError;
use crate::dataset::{Class, FeatureTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub kernel: Kernel,
    /// Memory budget for cached kernel columns, in MiB.
    pub cache_mib: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, kernel: Kernel::Linear, cache_mib: 256 }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ClassifierError::InvalidParams(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ClassifierError::InvalidParams(format!("tolerance must be positive, got {}", self.tol)));
        }
        if let Kernel::Polynomial { degree: 0 } = self.kernel {
            return Err(ClassifierError::InvalidParams("polynomial degree must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-attribute min-max scaling fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

impl MinMax {
    pub fn fit(table: &FeatureTable) -> Self {
        let m = table.n_attributes();
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for r in table.rows() {
            for (a, &v) in r.features.iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        let range = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
        Self { min: lo, range }
    }

    /// Constant training columns map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.range))
            .map(|(&v, (&lo, &r))| if r > 0.0 && r.is_finite() { (v - lo) / r } else { 0.0 })
            .collect()
    }
}

/// p(dead | f) = 1 / (1 + exp(a f + b)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub a: f64,
    pub b: f64,
}

impl Logistic {
    pub fn prob(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// Newton fit with backtracking on regularized targets.
    pub fn fit(decision: &[f64], positive: &[bool]) -> Self {
        let n_pos = positive.iter().filter(|&&p| p).count() as f64;
        let n_neg = positive.len() as f64 - n_pos;
        let hi = (n_pos + 1.0) / (n_pos + 2.0);
        let lo = 1.0 / (n_neg + 2.0);
        let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
        let loss = |a: f64, b: f64| -> f64 {
            decision
                .iter()
                .zip(&t)
                .map(|(&f, &t)| {
                    let z = f * a + b;
                    if z >= 0.0 {
                        t * z + (-z).exp().ln_1p()
                    } else {
                        (t - 1.0) * z + z.exp().ln_1p()
                    }
                })
                .sum()
        };
        let (mut a, mut b) = (0.0, ((n_neg + 1.0) / (n_pos + 1.0)).ln());
        let mut fval = loss(a, b);
        let sigma = 1e-12;
        for _ in 0..100 {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (&f, &t) in decision.iter().zip(&t) {
                let z = f * a + b;
                let (p, q) = if z >= 0.0 {
                    let e = (-z).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = z.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += f * f * d2;
                h22 += d2;
                h21 += f * d2;
                let d1 = t - p;
                g1 += f * d1;
                g2 += d1;
            }
            if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            while step >= 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = loss(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if step < 1e-10 {
                break;
            }
        }
        Self { a, b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub scaling: MinMax,
    /// Scaled support vectors and their coefficients a_i y_i.
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    /// Explicit weight vector for the linear kernel.
    pub weights: Option<Vec<f64>>,
    pub bias: f64,
    pub logistic: Logistic,
    pub iterations: usize,
}

impl SvmModel {
    /// Dead is the positive class.
    pub fn fit(table: &FeatureTable, params: &SvmParams) -> Result<Self, ClassifierError> {
        params.validate()?;
        let scaling = MinMax::fit(table);
        let points: Vec<Vec<f64>> = table.rows().iter().map(|r| scaling.apply(&r.features)).collect();
        let y: Vec<f64> = table.rows().iter().map(|r| if r.class == Class::Dead { 1.0 } else { -1.0 }).collect();
        let gram = CachedKernel::new(&points, params.kernel, params.cache_mib << 20);
        let state = smo_solve(&gram, &y, params.c, params.tol)?;
        let support = state.support();
        let coefficients: Vec<f64> = support.iter().map(|&i| state.alphas[i] * y[i]).collect();
        let support_vectors: Vec<Vec<f64>> = support.iter().map(|&i| points[i].clone()).collect();
        let weights = match params.kernel {
            Kernel::Linear => {
                let mut w = vec![0.0; table.n_attributes()];
                for (sv, &c) in support_vectors.iter().zip(&coefficients) {
                    for (wa, &x) in w.iter_mut().zip(sv) {
                        *wa += c * x;
                    }
                }
                Some(w)
            }
            Kernel::Polynomial { .. } => None,
        };
        let mut model = Self {
            kernel: params.kernel,
            scaling,
            support_vectors,
            coefficients,
            weights,
            bias: state.bias,
            logistic: Logistic { a: 0.0, b: 0.0 },
            iterations: state.iterations,
        };
        let decision: Vec<f64> = points.iter().map(|x| model.decision_scaled(x)).collect();
        let positive: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
        model.logistic = Logistic::fit(&decision, &positive);
        Ok(model)
    }

    fn decision_scaled(&self, x: &[f64]) -> f64 {
        match &self.weights {
            Some(w) => w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias,
            None => {
                self.support_vectors.iter().zip(&self.coefficients).map(|(sv, c)| c * self.kernel.eval(sv, x)).sum::<f64>()
                    + self.bias
            }
        }
    }

    /// Signed distance-like score; positive favours the dead class.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.decision_scaled(&self.scaling.apply(row))
    }

    pub fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let p = self.logistic.prob(self.decision(row));
        [1.0 - p, p]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AggregationMode, Row};

    fn separable() -> FeatureTable {
        let rows = (0..40)
            .map(|i| {
                let x = i as f64;
                Row { key: i, features: vec![x, 100.0 - x, 7.0], class: Class::from_died(i >= 20) }
            })
            .collect();
        FeatureTable::new(vec!["a".into(), "b".into(), "c".into()], rows, AggregationMode::Avg).unwrap()
    }

    #[test]
    fn scaling_maps_training_range_to_unit_interval() {
        let s = MinMax::fit(&separable());
        assert_eq!(s.apply(&[0.0, 100.0, 7.0]), vec![0.0, 1.0, 0.0]);
        assert_eq!(s.apply(&[39.0, 61.0, 3.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn separable_data_classified() {
        let t = separable();
        let m = SvmModel::fit(&t, &SvmParams::default()).unwrap();
        for r in t.rows() {
            let p = m.predict_proba(&r.features);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            assert_eq!(Class::argmax(p), r.class, "row {}", r.key);
        }
        assert!(m.logistic.a < 0.0);
    }

    #[test]
    fn polynomial_kernel_trains() {
        let t = separable();
        let p = SvmParams { kernel: Kernel::Polynomial { degree: 2 }, ..Default::default() };
        let m = SvmModel::fit(&t, &p).unwrap();
        assert!(m.weights.is_none());
        let ok = t.rows().iter().filter(|r| Class::argmax(m.predict_proba(&r.features)) == r.class).count();
        assert!(ok >= 36);
    }

    #[test]
    fn logistic_fit_is_monotone_in_decision() {
        let d: Vec<f64> = (-10..=10).map(|i| i as f64 / 5.0).collect();
        let pos: Vec<bool> = d.iter().map(|&v| v > 0.3).collect();
        let l = Logistic::fit(&d, &pos);
        assert!(l.prob(2.0) > 0.5 && l.prob(-2.0) < 0.5);
        assert!(l.prob(1.0) > l.prob(0.0));
    }
}
