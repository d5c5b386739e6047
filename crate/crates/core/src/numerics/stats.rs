use crate::error::{contract, Result};

/// Nearest-rank percentile: the `k`-th smallest value with
/// `k = ceil(δ/100 · n)` clamped to `[1, n]`.
pub fn percentile(values: &[f64], delta: f64) -> Result<f64> {
    let mut scratch = values.to_vec();
    percentile_in_place(&mut scratch, delta)
}

/// Same as [`percentile`] but reorders `values` instead of copying.
pub fn percentile_in_place(values: &mut [f64], delta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(contract("percentile of an empty sample"));
    }
    if !(0.0..=100.0).contains(&delta) {
        return Err(contract(format!("percentile level must be in [0, 100], got {delta}")));
    }
    let n = values.len();
    let k = nearest_rank(n, delta);
    let (_, kth, _) = values.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

pub(crate) fn nearest_rank(n: usize, delta: f64) -> usize {
    // δ·n/100 is exact for the integer and half-integer levels used in practice;
    // the slack absorbs representation error like 0.07·100.
    let pos = delta * n as f64 / 100.0;
    let k = (pos - 1e-9).ceil() as usize;
    k.clamp(1, n)
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
