//! Least-squares line fits used by every rate diagnostic.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::SizeMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientRange(format!(
            "{} samples, need at least 2",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientRange("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Slope of `log y` against `log t`.
///
/// Needs at least three samples spanning a factor of two in `t`; zero or
/// negative values are rejected rather than silently dropped.
pub fn loglog_slope(ts: &[f64], ys: &[f64]) -> Result<LineFit> {
    if ts.len() != ys.len() {
        return Err(Error::SizeMismatch {
            expected: ts.len(),
            got: ys.len(),
        });
    }
    if ts.len() < 3 {
        return Err(Error::InsufficientRange(format!(
            "{} samples, need at least 3",
            ts.len()
        )));
    }
    let tmin = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let tmax = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(tmin > 0.0) || tmax / tmin < 2.0 {
        return Err(Error::InsufficientRange(format!(
            "abscissa range [{tmin}, {tmax}] spans less than a factor 2"
        )));
    }
    if let Some(bad) = ys.iter().find(|y| !(**y > 0.0) || !y.is_finite()) {
        return Err(Error::InsufficientRange(format!(
            "non-positive value {bad} in log-log fit"
        )));
    }
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Log-log slope restricted to samples with `lo <= t <= hi`.
pub fn loglog_slope_window(ts: &[f64], ys: &[f64], lo: f64, hi: f64) -> Result<LineFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(ys)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, y)| (*t, *y))
        .unzip();
    loglog_slope(&t, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let ts: Vec<f64> = (1..20).map(|k| 1.3f64.powi(k)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.6)).collect();
        let fit = loglog_slope(&ts, &ys).unwrap();
        assert!((fit.slope + 1.6).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn narrow_range_is_rejected() {
        let ts = [10.0, 12.0, 15.0];
        let ys = [1.0, 0.9, 0.8];
        assert!(matches!(
            loglog_slope(&ts, &ys),
            Err(Error::InsufficientRange(_))
        ));
    }

    #[test]
    fn zero_values_are_rejected() {
        let ts = [1.0, 2.0, 4.0];
        let ys = [1.0, 0.0, 0.5];
        assert!(loglog_slope(&ts, &ys).is_err());
    }
}
