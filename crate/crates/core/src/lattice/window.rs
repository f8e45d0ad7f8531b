use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::Multiplier;
use super::grid::MomentumGrid;
use super::symbols::{free_symbol, threshold_set};
use crate::error::{Error, Result};
use crate::smooth::smoothstep;

/// Energy interval `I = [a, b]` with margin `delta` to the thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    dim: usize,
    lower: f64,
    upper: f64,
    margin: f64,
    smoothing: f64,
    hessian_margin: f64,
}

impl EnergyWindow {
    pub const DEFAULT_HESSIAN_MARGIN: f64 = 0.2;

    /// Window with smoothing `margin / 2` and the default hessian margin.
    pub fn new(dim: usize, lower: f64, upper: f64, margin: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidInput(format!(
                "energy window needs a < b (got [{lower}, {upper}])"
            )));
        }
        if !(margin > 0.0) {
            return Err(Error::InvalidInput(format!("margin must be positive (got {margin})")));
        }
        let w = EnergyWindow {
            dim,
            lower,
            upper,
            margin,
            smoothing: 0.5 * margin,
            hessian_margin: Self::DEFAULT_HESSIAN_MARGIN,
        };
        let dist = w.distance_to_thresholds();
        if dist <= margin {
            return Err(Error::ThresholdOverlap(format!(
                "[{lower}, {upper}] +- {margin} reaches a threshold in {:?} (distance {dist})",
                threshold_set(dim)
            )));
        }
        Ok(w)
    }

    /// Window whose margin is half the distance to the thresholds.
    pub fn with_auto_margin(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        let probe = EnergyWindow {
            dim,
            lower,
            upper,
            margin: 0.0,
            smoothing: 0.0,
            hessian_margin: Self::DEFAULT_HESSIAN_MARGIN,
        };
        let dist = probe.distance_to_thresholds();
        if !(dist > 0.0) {
            return Err(Error::ThresholdOverlap(format!(
                "[{lower}, {upper}] contains a threshold"
            )));
        }
        Self::new(dim, lower, upper, 0.5 * dist)
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing <= self.margin) {
            return Err(Error::InvalidInput(format!(
                "smoothing {smoothing} must lie in (0, margin = {}]",
                self.margin
            )));
        }
        self.smoothing = smoothing;
        Ok(self)
    }

    pub fn with_hessian_margin(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidInput(format!("hessian margin {eta} outside (0, 1)")));
        }
        self.hessian_margin = eta;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn hessian_margin(&self) -> f64 {
        self.hessian_margin
    }

    /// `dist(I, T)`; zero when a threshold lies inside `I`.
    pub fn distance_to_thresholds(&self) -> f64 {
        threshold_set(self.dim)
            .into_iter()
            .map(|t| {
                if t < self.lower {
                    self.lower - t
                } else if t > self.upper {
                    t - self.upper
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, e: f64) -> bool {
        (self.lower..=self.upper).contains(&e)
    }

    pub fn contains_enlarged(&self, e: f64, pad: f64) -> bool {
        (self.lower - pad..=self.upper + pad).contains(&e)
    }

    /// Membership in `D(I)` sharpened by the hessian margin: `p0 in I` and `|cos xi_j| >= eta0`.
    pub fn in_core(&self, xi: &[f64]) -> bool {
        self.contains(free_symbol(xi)) && xi.iter().all(|x| x.cos().abs() >= self.hessian_margin)
    }

    /// Smoothed cutoff value at `xi`.
    pub fn smooth_value(&self, xi: &[f64]) -> f64 {
        let e = free_symbol(xi);
        let outside = (self.lower - e).max(e - self.upper).max(0.0);
        let energy = 1.0 - smoothstep(outside / self.smoothing);
        if energy == 0.0 {
            return 0.0;
        }
        let half = 0.5 * self.hessian_margin;
        let hess: f64 = xi
            .iter()
            .map(|x| smoothstep((x.cos().abs() - half) / half))
            .product();
        energy * hess
    }

    pub fn sharp_value(&self, xi: &[f64]) -> f64 {
        if self.contains(free_symbol(xi)) {
            1.0
        } else {
            0.0
        }
    }

    /// Energy range outside which the smoothed cutoff vanishes.
    pub fn smooth_support(&self) -> (f64, f64) {
        (self.lower - self.smoothing, self.upper + self.smoothing)
    }
}

/// `E_I(H0)` as a multiplier: sharp indicator of `{p0 in I}` or the smoothed cutoff.
///
/// The smoothed cutoff is 1 on `{p0 in I, |cos xi_j| >= eta0}`, vanishes once
/// `p0` leaves `I` by the smoothing width, and vanishes where `|cos xi_j| <= eta0 / 2`.
pub fn spectral_window(window: &EnergyWindow, grid: MomentumGrid, sharp: bool) -> Result<Multiplier> {
    if grid.dim() != window.dim() {
        return Err(Error::SizeMismatch {
            expected: window.dim(),
            got: grid.dim(),
        });
    }
    if window.distance_to_thresholds() <= window.margin() {
        return Err(Error::ThresholdOverlap("window margin reaches a threshold".into()));
    }
    Multiplier::from_fn(grid, |xi| {
        let v = if sharp {
            window.sharp_value(xi)
        } else {
            window.smooth_value(xi)
        };
        Complex64::new(v, 0.0)
    })
}

/// Grid check mirroring the escape-constant choice: `k(xi) >= 2 delta` on the enlarged shell.
pub fn min_speed_on_shell(window: &EnergyWindow, grid: MomentumGrid, pad: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut xi = vec![0.0; grid.dim()];
    for i in 0..grid.len() {
        grid.point(i, &mut xi);
        if window.contains_enlarged(free_symbol(&xi), pad) {
            best = best.min(super::symbols::speed_squared(&xi));
        }
    }
    best
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::grid::LatticeBox;

    #[test]
    fn validation() {
        assert!(EnergyWindow::new(1, 0.7, 0.3, 0.1).is_err());
        assert!(matches!(
            EnergyWindow::new(1, 0.3, 0.95, 0.1),
            Err(Error::ThresholdOverlap(_))
        ));
        let w = EnergyWindow::new(2, 0.4, 0.8, 0.3).unwrap();
        assert!((w.distance_to_thresholds() - 0.4).abs() < 1e-15);
        let a = EnergyWindow::with_auto_margin(1, 0.3, 0.7).unwrap();
        assert!((a.margin() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn empty_shell_gives_zero() {
        let g = MomentumGrid::new(LatticeBox::new(1, 40).unwrap());
        let w = EnergyWindow::new(1, 2.5, 3.5, 0.2).unwrap();
        for sharp in [true, false] {
            let m = spectral_window(&w, g, sharp).unwrap();
            assert!(m.values().iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn smooth_window_respects_hessian_margin() {
        let g = MomentumGrid::new(LatticeBox::new(2, 30).unwrap());
        let w = EnergyWindow::new(2, 0.4, 1.2, 0.3).unwrap();
        let m = spectral_window(&w, g, false).unwrap();
        let eta = w.hessian_margin();
        let mut seen_one = false;
        for (i, z) in m.values().iter().enumerate() {
            let xi = g.point_vec(i);
            if xi.iter().any(|x| x.cos().abs() < eta / 2.0) {
                assert_eq!(z.re, 0.0);
            }
            if w.in_core(&xi) {
                assert_eq!(z.re, 1.0);
                seen_one = true;
            }
            let e = free_symbol(&xi);
            if !w.contains_enlarged(e, w.margin()) {
                assert_eq!(z.re, 0.0);
            }
        }
        assert!(seen_one);
    }
}
