//! Single-covariate Cox proportional hazards with Breslow ties.

use serde::{Deserialize, Serialize};

use super::MetricError;

pub const MAX_ITERATIONS: u32 = 100;
pub const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxObservation {
    pub time: f64,
    pub event: bool,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta: f64,
    pub hazard_ratio: f64,
    pub standard_error: f64,
    pub z: f64,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    /// Likelihood-ratio (Cox-Snell) R^2 and its attainable maximum.
    pub r_squared: f64,
    pub max_r_squared: f64,
    pub iterations: u32,
    pub converged: bool,
    pub observations: usize,
    pub events: usize,
}

/// Risk-set sums at each distinct event time. Observations are sorted by
/// descending time so the risk set grows monotonically.
struct Prepared {
    /// (event count, covariate sum over events, index into the sorted order after
    /// which the risk set is complete)
    groups: Vec<(f64, f64, usize)>,
    xs: Vec<f64>,
}

fn prepare(obs: &[CoxObservation]) -> Prepared {
    let mean = obs.iter().map(|o| o.x).sum::<f64>() / obs.len().max(1) as f64;
    let mut sorted: Vec<&CoxObservation> = obs.iter().collect();
    sorted.sort_by(|a, b| b.time.total_cmp(&a.time));
    let xs: Vec<f64> = sorted.iter().map(|o| o.x - mean).collect();
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        let mut j = i;
        let (mut d, mut s) = (0.0, 0.0);
        while j < sorted.len() && sorted[j].time == t {
            if sorted[j].event {
                d += 1.0;
                s += xs[j];
            }
            j += 1;
        }
        if d > 0.0 {
            groups.push((d, s, j));
        }
        i = j;
    }
    Prepared { groups, xs }
}

/// Log partial likelihood, score and information at `beta`.
fn evaluate(p: &Prepared, beta: f64) -> (f64, f64, f64) {
    let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
    let mut filled = 0;
    let (mut ll, mut u, mut info) = (0.0, 0.0, 0.0);
    for &(d, s, upto) in &p.groups {
        while filled < upto {
            let x = p.xs[filled];
            let w = (beta * x).exp();
            a0 += w;
            a1 += w * x;
            a2 += w * x * x;
            filled += 1;
        }
        let m = a1 / a0;
        ll += beta * s - d * a0.ln();
        u += s - d * m;
        info += d * (a2 / a0 - m * m);
    }
    (ll, u, info)
}

/// Breslow log partial likelihood.
pub fn partial_log_likelihood(obs: &[CoxObservation], beta: f64) -> f64 {
    evaluate(&prepare(obs), beta).0
}

pub fn score_and_information(obs: &[CoxObservation], beta: f64) -> (f64, f64) {
    let (_, u, i) = evaluate(&prepare(obs), beta);
    (u, i)
}

/// Newton-Raphson with step halving from `beta = 0`.
pub fn cox_fit(obs: &[CoxObservation]) -> Result<CoxFit, MetricError> {
    if obs.iter().any(|o| !o.time.is_finite() || !o.x.is_finite()) {
        return Err(MetricError::InvalidValue);
    }
    let events = obs.iter().filter(|o| o.event).count();
    if events == 0 {
        return Err(MetricError::NoEvents);
    }
    let first = obs[0].x;
    if obs.iter().all(|o| o.x == first) {
        return Err(MetricError::NoVariation);
    }
    let p = prepare(obs);
    let (null_ll, mut u, mut info) = evaluate(&p, 0.0);
    let mut ll = null_ll;
    let mut beta = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if info <= 0.0 {
            break;
        }
        let mut step = u / info;
        let mut next = beta + step;
        let mut eval = evaluate(&p, next);
        let mut halvings = 0;
        while (!eval.0.is_finite() || eval.0 < ll) && halvings < 30 {
            step /= 2.0;
            next = beta + step;
            eval = evaluate(&p, next);
            halvings += 1;
        }
        beta = next;
        (ll, u, info) = eval;
        if step.abs() < TOLERANCE {
            converged = true;
            break;
        }
    }
    if !beta.is_finite() || info <= 0.0 {
        return Err(MetricError::Singular);
    }
    let n = obs.len() as f64;
    let se = 1.0 / info.sqrt();
    Ok(CoxFit {
        beta,
        hazard_ratio: beta.exp(),
        standard_error: se,
        z: beta / se,
        log_likelihood: ll,
        null_log_likelihood: null_ll,
        r_squared: 1.0 - (2.0 * (null_ll - ll) / n).exp(),
        max_r_squared: 1.0 - (2.0 * null_ll / n).exp(),
        iterations,
        converged,
        observations: obs.len(),
        events,
    })
}
