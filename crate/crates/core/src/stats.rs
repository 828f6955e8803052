//! Least-squares fits and reproducible reductions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. Needs two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || !sxx.is_finite() || !syy.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // a perfect horizontal line is a perfect fit
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LinearFit { slope, intercept, r_squared })
}

/// Geometric rate estimate from a positive sequence: fit `log y_k` against `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const MIN_R_SQUARED: f64 = 0.9;

/// Fits `y_k ≈ C·rateᵏ` using all strictly positive entries. Returns `None`
/// on fewer than three usable points.
pub fn geometric_rate(values: &[f64]) -> Option<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        values.iter().enumerate().filter(|(_, y)| **y > 0.0 && y.is_finite()).map(|(k, y)| (k as f64, y.ln())).unzip();
    if xs.len() < 3 {
        return None;
    }
    let fit = linear_fit(&xs, &ys)?;
    Some(RateFit { rate: fit.slope.exp(), r_squared: fit.r_squared, points: xs.len() })
}

/// The rate only when the fit is trustworthy (R² ≥ 0.9).
pub fn gated_rate(values: &[f64]) -> Option<RateFit> {
    geometric_rate(values).filter(|f| f.r_squared >= MIN_R_SQUARED)
}

/// Bottom-up pairwise summation: adjacent pairs are combined level by level.
///
/// Duplicating every entry in place (`[a, a, b, b, ...]`) exactly doubles the
/// result, which makes empirical means invariant under particle duplication.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => return 0.0,
        1 => return values[0],
        _ => {}
    }
    let mut level: Vec<f64> = values.chunks(2).map(|c| c.iter().sum()).collect();
    while level.len() > 1 {
        level = level.chunks(2).map(|c| if c.len() == 2 { c[0] + c[1] } else { c[0] }).collect();
    }
    level[0]
}

/// Mean of values after sorting, so the result does not depend on input order.
pub fn symmetric_mean(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    pairwise_sum(values) / values.len() as f64
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
