use serde::{Deserialize, Serialize};

use super::flow::Trajectory;
use crate::error::{Error, Result};
use crate::fit::loglog_slope_window;
use crate::lattice::symbols::velocity_vec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    /// Estimated limit momentum (unwrapped).
    pub xi_limit: Vec<f64>,
    /// Fitted slope of `|xi(t) - xi_lim|` (target `-mu`); `None` when it vanishes identically.
    pub xi_slope: Option<f64>,
    /// Fitted slope of `|x(t) - t v(xi_lim)|` (target `1 - mu`).
    pub x_slope: Option<f64>,
    pub fit_window: (f64, f64),
    pub xi_deviation: Vec<f64>,
    pub x_deviation: Vec<f64>,
}

/// Nearest sample index to `t`.
fn nearest(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, s) in times.iter().enumerate() {
        if (s - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

/// Estimate `xi_+-` and fit the convergence rates on `fit_window`.
///
/// The limit is a two-level Richardson extrapolation from the samples nearest
/// to `T/4`, `T/2` and `T`, eliminating `t^(-mu)` and `t^(-2 mu)` corrections.
pub fn asymptotic_momentum(traj: &Trajectory, mu: f64, fit_window: (f64, f64)) -> Result<AsymptoticReport> {
    if traj.len() < 8 || !(mu > 0.0) {
        return Err(Error::InsufficientRange("trajectory too short for a tail estimate".into()));
    }
    let times: Vec<f64> = traj.times.iter().map(|t| t.abs()).collect();
    let t_end = *times.last().unwrap();
    let (i1, i2, i4) = (nearest(&times, t_end / 4.0), nearest(&times, t_end / 2.0), times.len() - 1);
    let d = traj.xi[0].len();
    let q1 = 2f64.powf(-mu);
    let q2 = 2f64.powf(-2.0 * mu);
    let mut limit = vec![0.0; d];
    for j in 0..d {
        let (a, b, c) = (traj.xi[i1][j], traj.xi[i2][j], traj.xi[i4][j]);
        let r_lo = (b - q1 * a) / (1.0 - q1);
        let r_hi = (c - q1 * b) / (1.0 - q1);
        let est = (r_hi - q2 * r_lo) / (1.0 - q2);
        if !est.is_finite() || (est - c).abs() > 1.0 {
            return Err(Error::NonConvergent(format!(
                "momentum tail does not settle (component {j}: {a}, {b}, {c})"
            )));
        }
        limit[j] = est;
    }
    let v = velocity_vec(&limit);
    let xi_dev: Vec<f64> = traj
        .xi
        .iter()
        .map(|xi| xi.iter().zip(&limit).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let x_dev: Vec<f64> = traj
        .x
        .iter()
        .zip(&traj.times)
        .map(|(x, t)| {
            x.iter()
                .zip(&v)
                .map(|(a, b)| (a - t * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let slope = |ys: &[f64]| -> Result<Option<f64>> {
        if ys.iter().all(|y| *y == 0.0) {
            return Ok(None);
        }
        Ok(Some(loglog_slope_window(&times, ys, fit_window.0, fit_window.1)?.slope))
    };
    Ok(AsymptoticReport {
        xi_slope: slope(&xi_dev)?,
        x_slope: slope(&x_dev)?,
        xi_limit: limit,
        fit_window,
        xi_deviation: xi_dev,
        x_deviation: x_dev,
    })
}
