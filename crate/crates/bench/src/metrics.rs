//! Monte Carlo error metrics.

use cecme::{Rotation, UnitBearing};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Mean of `‖R̂ - R°‖_F²`.
    pub mse_rotation: f64,
    /// Mean of `‖t̂ - t̄°‖²`.
    pub mse_bearing: f64,
    /// `Σ_ij |mean(R̂)_ij - R°_ij|`.
    pub bias_rotation: f64,
    /// `Σ_i |mean(t̂)_i - t̄°_i|`.
    pub bias_bearing: f64,
}

pub fn rotation_error_sq(estimate: &Rotation, truth: &Rotation) -> f64 {
    (estimate.matrix() - truth.matrix()).norm_squared()
}

pub fn bearing_error_sq(estimate: &UnitBearing, truth: &UnitBearing) -> f64 {
    (estimate.vector() - truth.vector()).norm_squared()
}

/// MSE and bias of `estimates` against one truth. Returns `None` for an
/// empty slice.
pub fn mse_bias_metrics(estimates: &[(Rotation, UnitBearing)], truth: (&Rotation, &UnitBearing)) -> Option<ErrorMetrics> {
    if estimates.is_empty() {
        return None;
    }
    let k = estimates.len() as f64;
    let mut mse_rotation = 0.0;
    let mut mse_bearing = 0.0;
    let mut sum_r = Matrix3::zeros();
    let mut sum_t = Vector3::zeros();
    for (r, t) in estimates {
        mse_rotation += rotation_error_sq(r, truth.0);
        mse_bearing += bearing_error_sq(t, truth.1);
        sum_r += r.matrix();
        sum_t += t.vector();
    }
    Some(ErrorMetrics {
        mse_rotation: mse_rotation / k,
        mse_bearing: mse_bearing / k,
        bias_rotation: (sum_r / k - truth.0.matrix()).abs().sum(),
        bias_bearing: (sum_t / k - truth.1.vector()).abs().sum(),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
