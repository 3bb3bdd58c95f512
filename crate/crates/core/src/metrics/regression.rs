//! Logistic (Newton-Raphson) and ordinary least squares fits on small
//! dense designs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MetricError;

pub const MAX_ITERATIONS: u32 = 100;
pub const TOLERANCE: f64 = 1e-8;
/// Coefficients this large on a non-converged fit indicate separation.
const SEPARATION_BOUND: f64 = 15.0;
/// Smallest singular value, relative to the largest, of a column-scaled
/// design treated as full rank.
const RANK_TOLERANCE: f64 = 1e-10;

/// A design matrix with named columns. Include an explicit intercept column
/// when one is wanted.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Design {
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>], y: &[f64]) -> Result<Self, MetricError> {
        let p = names.len();
        if rows.len() != y.len() || rows.iter().any(|r| r.len() != p) {
            return Err(MetricError::Shape);
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(Design {
            names: names.iter().map(|s| s.to_string()).collect(),
            x: DMatrix::from_row_slice(rows.len(), p, &flat),
            y: DVector::from_column_slice(y),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Fails with `Singular` when the columns are (numerically) linearly
    /// dependent, e.g. a covariate constant alongside the intercept.
    fn check_rank(&self) -> Result<(), MetricError> {
        let mut x = self.x.clone();
        for mut col in x.column_iter_mut() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(MetricError::Singular);
            }
            col /= norm;
        }
        let sv = x.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        // NaN singular values count as rank deficient
        if lo.partial_cmp(&(RANK_TOLERANCE * hi)) != Some(std::cmp::Ordering::Greater) {
            return Err(MetricError::Singular);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    /// Absent when the information matrix gives no finite value, as under
    /// separation.
    pub standard_error: Option<f64>,
    pub z: Option<f64>,
}

fn coefficients(names: &[String], beta: &DVector<f64>, cov: &DMatrix<f64>) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let se = Some(cov[(i, i)].max(0.0).sqrt()).filter(|s| s.is_finite());
            Coefficient {
                name: name.clone(),
                estimate: beta[i],
                standard_error: se,
                z: se.filter(|s| *s > 0.0).map(|s| beta[i] / s),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<Coefficient>,
    pub log_likelihood: f64,
    pub iterations: u32,
    pub converged: bool,
    /// Set when the estimates diverge, as under (quasi-)complete separation.
    pub separation: bool,
    pub observations: usize,
}

impl LogisticFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| {
            // log(1 + e^e) computed stably
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            yi * e - softplus
        })
        .sum()
}

fn sigmoid(e: f64) -> f64 {
    if e >= 0.0 {
        1.0 / (1.0 + (-e).exp())
    } else {
        let z = e.exp();
        z / (1.0 + z)
    }
}

pub fn logistic_fit(design: &Design) -> Result<LogisticFit, MetricError> {
    let (x, y) = (&design.x, &design.y);
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || p == 0 {
        return Err(MetricError::Shape);
    }
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(MetricError::InvalidValue);
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(MetricError::Separation);
    }
    design.check_rank()?;
    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(x, y, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut info = DMatrix::zeros(p, p);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let eta = x * &beta;
        let prob = eta.map(sigmoid);
        let grad = x.transpose() * (y - &prob);
        let w = prob.map(|q| q * (1.0 - q));
        let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * w[i]);
        info = x.transpose() * xw;
        let Some(chol) = info.clone().cholesky() else {
            break;
        };
        let mut step = chol.solve(&grad);
        let mut next = &beta + &step;
        let mut next_ll = log_likelihood(x, y, &next);
        let mut halvings = 0;
        while (!next_ll.is_finite() || next_ll < ll) && halvings < 30 {
            step /= 2.0;
            next = &beta + &step;
            next_ll = log_likelihood(x, y, &next);
            halvings += 1;
        }
        beta = next;
        ll = next_ll;
        if step.amax() < TOLERANCE {
            converged = true;
            break;
        }
    }
    let separation = !converged && beta.amax() > SEPARATION_BOUND;
    let cov = match info.clone().try_inverse() {
        Some(c) => c,
        None if separation => DMatrix::from_element(p, p, f64::INFINITY),
        None => return Err(MetricError::Singular),
    };
    Ok(LogisticFit {
        coefficients: coefficients(&design.names, &beta, &cov),
        log_likelihood: ll,
        iterations,
        converged,
        separation,
        observations: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub residual_variance: f64,
    pub observations: usize,
}

impl LinearFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

pub fn linear_fit(design: &Design) -> Result<LinearFit, MetricError> {
    let (x, y) = (&design.x, &design.y);
    let (n, p) = (x.nrows(), x.ncols());
    if n <= p {
        return Err(MetricError::Shape);
    }
    design.check_rank()?;
    let xtx = x.transpose() * x;
    let inv = xtx.try_inverse().ok_or(MetricError::Singular)?;
    let beta = &inv * (x.transpose() * y);
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sigma2 = rss / (n - p) as f64;
    let cov = inv * sigma2;
    Ok(LinearFit {
        coefficients: coefficients(&design.names, &beta, &cov),
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 0.0 },
        residual_variance: sigma2,
        observations: n,
    })
}
