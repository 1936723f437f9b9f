//! Sequential minimal optimization for the soft-margin SVM dual
//!
//!   min_a  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C,
//!
//! with Q_ij = y_i y_j K_ij. Working pairs are chosen by maximal violation
//! for the first index and second-order gain for the second.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::ClassifierError;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// (x . z)^degree
    Polynomial { degree: u32 },
}

impl Kernel {
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
        match self {
            Kernel::Linear => dot,
            Kernel::Polynomial { degree } => dot.powi(*degree as i32),
        }
    }
}

/// Read access to a kernel matrix.
pub trait KernelMatrix {
    fn order(&self) -> usize;
    fn diagonal(&self, i: usize) -> f64;
    /// Column `i` of K.
    fn column(&self, i: usize) -> Rc<[f64]>;
}

/// Fully materialized symmetric kernel matrix.
#[derive(Debug, Clone)]
pub struct DenseGram {
    columns: Vec<Rc<[f64]>>,
}

impl DenseGram {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self, ClassifierError> {
        let n = matrix.len();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(ClassifierError::InvalidParams(format!("kernel row {i} has length {}, expected {n}", row.len())));
            }
        }
        for (i, row) in matrix.iter().enumerate() {
            for (j, &a) in row.iter().enumerate().take(i) {
                let b = matrix[j][i];
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(ClassifierError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self { columns: matrix.into_iter().map(Rc::from).collect() })
    }

    pub fn from_points(points: &[Vec<f64>], kernel: Kernel) -> Self {
        let columns = points.iter().map(|x| points.iter().map(|z| kernel.eval(x, z)).collect::<Vec<_>>().into()).collect();
        Self { columns }
    }
}

impl KernelMatrix for DenseGram {
    fn order(&self) -> usize {
        self.columns.len()
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.columns[i][i]
    }

    fn column(&self, i: usize) -> Rc<[f64]> {
        self.columns[i].clone()
    }
}

type ColumnCache = (HashMap<usize, Rc<[f64]>>, VecDeque<usize>);

/// Kernel over points with columns computed on demand and kept in a
/// bounded first-in first-out cache.
pub struct CachedKernel<'a> {
    points: &'a [Vec<f64>],
    kernel: Kernel,
    diag: Vec<f64>,
    capacity: usize,
    cache: RefCell<ColumnCache>,
}

impl<'a> CachedKernel<'a> {
    /// `budget_bytes` bounds the memory held by cached columns.
    pub fn new(points: &'a [Vec<f64>], kernel: Kernel, budget_bytes: usize) -> Self {
        let n = points.len().max(1);
        let capacity = (budget_bytes / (8 * n)).max(2);
        let diag = points.iter().map(|x| kernel.eval(x, x)).collect();
        Self { points, kernel, diag, capacity, cache: RefCell::new((HashMap::new(), VecDeque::new())) }
    }
}

impl KernelMatrix for CachedKernel<'_> {
    fn order(&self) -> usize {
        self.points.len()
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn column(&self, i: usize) -> Rc<[f64]> {
        let mut cache = self.cache.borrow_mut();
        if let Some(c) = cache.0.get(&i) {
            return c.clone();
        }
        let x = &self.points[i];
        let col: Rc<[f64]> = self.points.iter().map(|z| self.kernel.eval(x, z)).collect::<Vec<_>>().into();
        if cache.1.len() >= self.capacity {
            if let Some(old) = cache.1.pop_front() {
                cache.0.remove(&old);
            }
        }
        cache.0.insert(i, col.clone());
        cache.1.push_back(i);
        col
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoState {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective e'a - 1/2 a'Qa after each iteration, starting at 0.
    pub objective_trace: Vec<f64>,
}

impl SmoState {
    pub fn support(&self) -> Vec<usize> {
        (0..self.alphas.len()).filter(|&i| self.alphas[i] > 0.0).collect()
    }

    pub fn dual_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }

    /// Decision value sum_i a_i y_i K(x_i, x) + b given kernel row `k_x`.
    pub fn decision(&self, y: &[f64], k_x: &[f64]) -> f64 {
        self.alphas.iter().zip(y).zip(k_x).map(|((a, y), k)| a * y * k).sum::<f64>() + self.bias
    }
}

fn check_labels(y: &[f64]) -> Result<(), ClassifierError> {
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(ClassifierError::InvalidLabels(format!("label {v} is not +1 or -1")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(ClassifierError::SingleClass);
    }
    Ok(())
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// max over I_up and min over I_low of -y_t G_t.
fn extremes(y: &[f64], alphas: &[f64], grad: &[f64], c: f64) -> (f64, f64) {
    let mut gmax = f64::NEG_INFINITY;
    let mut gmin = f64::INFINITY;
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if in_up(y[t], alphas[t], c) {
            gmax = gmax.max(v);
        }
        if in_low(y[t], alphas[t], c) {
            gmin = gmin.min(v);
        }
    }
    (gmax, gmin)
}

fn objective(alphas: &[f64], grad: &[f64]) -> f64 {
    // with G = Qa - e:  e'a - 1/2 a'Qa = -1/2 sum a_i (G_i - 1)
    -0.5 * alphas.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

/// Solves the dual until the maximal KKT violation falls below `tol`.
pub fn smo_solve(gram: &dyn KernelMatrix, y: &[f64], c: f64, tol: f64) -> Result<SmoState, ClassifierError> {
    let n = gram.order();
    if y.len() != n {
        return Err(ClassifierError::InvalidLabels(format!("{} labels for kernel of order {n}", y.len())));
    }
    if !(c > 0.0 && c.is_finite()) || tol.is_nan() || tol <= 0.0 {
        return Err(ClassifierError::InvalidParams(format!("need C > 0 and tol > 0, got C={c}, tol={tol}")));
    }
    check_labels(y)?;

    let mut alphas = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = vec![0.0];
    let max_iter = 10_000_000usize.max(100 * n);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // first index: maximal violator in I_up
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(y[t], alphas[t], c) && (i == usize::MAX || -y[t] * grad[t] > gmax) {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        let k_i = if i != usize::MAX { Some(gram.column(i)) } else { None };
        for t in 0..n {
            if !in_low(y[t], alphas[t], c) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if let Some(k_i) = &k_i {
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = gram.diagonal(i) + gram.diagonal(t) - 2.0 * k_i[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let score = -(b * b) / a;
                    if score < best {
                        best = score;
                        j = t;
                    }
                }
            }
        }
        if gmax - gmin < tol || i == usize::MAX || j == usize::MAX {
            converged = true;
            break;
        }
        let k_i = k_i.unwrap();
        let k_j = gram.column(j);
        let (ai_old, aj_old) = (alphas[i], alphas[j]);
        let q_ij = y[i] * y[j] * k_i[j];
        let (qd_i, qd_j) = (gram.diagonal(i), gram.diagonal(j));
        if y[i] != y[j] {
            let mut quad = qd_i + qd_j + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alphas[i] - alphas[j];
            alphas[i] += delta;
            alphas[j] += delta;
            if diff > 0.0 {
                if alphas[j] < 0.0 {
                    alphas[j] = 0.0;
                    alphas[i] = diff;
                }
            } else if alphas[i] < 0.0 {
                alphas[i] = 0.0;
                alphas[j] = -diff;
            }
            if diff > 0.0 {
                if alphas[i] > c {
                    alphas[i] = c;
                    alphas[j] = c - diff;
                }
            } else if alphas[j] > c {
                alphas[j] = c;
                alphas[i] = c + diff;
            }
        } else {
            let mut quad = qd_i + qd_j - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alphas[i] + alphas[j];
            alphas[i] -= delta;
            alphas[j] += delta;
            if sum > c {
                if alphas[i] > c {
                    alphas[i] = c;
                    alphas[j] = sum - c;
                }
            } else if alphas[j] < 0.0 {
                alphas[j] = 0.0;
                alphas[i] = sum;
            }
            if sum > c {
                if alphas[j] > c {
                    alphas[j] = c;
                    alphas[i] = sum - c;
                }
            } else if alphas[i] < 0.0 {
                alphas[i] = 0.0;
                alphas[j] = sum;
            }
        }
        let (dai, daj) = (alphas[i] - ai_old, alphas[j] - aj_old);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * dai + y[j] * k_j[t] * daj);
        }
        iterations += 1;
        trace.push(objective(&alphas, &grad));
    }

    let bias = -rho(y, &alphas, &grad, c);
    Ok(SmoState { alphas, bias, iterations, converged, objective_trace: trace })
}

fn rho(y: &[f64], alphas: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alphas[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alphas[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Maximal KKT violation of `state`, recomputing the gradient from scratch.
pub fn kkt_violation(gram: &dyn KernelMatrix, y: &[f64], c: f64, state: &SmoState) -> f64 {
    let n = gram.order();
    let mut grad = vec![-1.0; n];
    for (s, &a) in state.alphas.iter().enumerate() {
        if a != 0.0 {
            let k = gram.column(s);
            for t in 0..n {
                grad[t] += y[t] * y[s] * k[t] * a;
            }
        }
    }
    let (gmax, gmin) = extremes(y, &state.alphas, &grad, c);
    (gmax - gmin).max(0.0)
}
