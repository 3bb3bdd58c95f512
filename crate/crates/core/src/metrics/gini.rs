use super::MetricError;

/// Gini coefficient of non-negative contributions, zeros included:
/// `G = sum_i sum_j |x_i - x_j| / (2 n^2 mean)`.
///
/// Evaluated in O(n log n) through the sorted-rank identity
/// `G = 2 * sum_i i * x_(i) / (n * sum x) - (n + 1) / n` (1-based ranks).
pub fn gini(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::NoContributions);
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(MetricError::InvalidValue);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(MetricError::NoContributions);
    }
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i as f64 + 1.0) * x)
        .sum();
    let g = 2.0 * weighted / (n * total) - (n + 1.0) / n;
    Ok(g.clamp(0.0, 1.0))
}

pub fn gini_counts(counts: &[u64]) -> Result<f64, MetricError> {
    let v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    gini(&v)
}
