use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{LatticeField, MomentumField};
use super::fourier::Fourier;
use super::grid::MomentumGrid;
use super::symbols::free_symbol;
use super::window::EnergyWindow;
use crate::error::{Error, Result};
use crate::smooth::{bump, wrap_angle};

/// Wave packet with a compactly supported momentum bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub momentum: Vec<f64>,
    pub width: f64,
    /// Position the packet is centred on at `t = 0`; origin when empty.
    #[serde(default)]
    pub position: Vec<f64>,
}

impl PacketSpec {
    pub fn new(momentum: Vec<f64>, width: f64) -> Self {
        PacketSpec {
            momentum,
            width,
            position: Vec::new(),
        }
    }

    pub fn at(mut self, position: Vec<f64>) -> Self {
        self.position = position;
        self
    }

    /// Torus distance from `xi` to the centre, in units of the width.
    pub fn radius(&self, xi: &[f64]) -> f64 {
        xi.iter()
            .zip(&self.momentum)
            .map(|(a, b)| wrap_angle(a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            / self.width
    }

    /// Unnormalised momentum profile.
    pub fn profile(&self, xi: &[f64]) -> Complex64 {
        let amp = bump(self.radius(xi));
        if amp == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let phase: f64 = self
            .position
            .iter()
            .zip(xi)
            .map(|(x, k)| x * k)
            .sum();
        Complex64::from_polar(amp, -phase)
    }

    /// Grid indices where the profile is non-zero.
    pub fn support(&self, grid: MomentumGrid) -> Vec<usize> {
        let mut xi = vec![0.0; grid.dim()];
        (0..grid.len())
            .filter(|&i| {
                grid.point(i, &mut xi);
                self.radius(&xi) < 1.0
            })
            .collect()
    }

    /// Check that the closed support ball lies in the window's core of `D(I)`.
    pub fn check(&self, window: &EnergyWindow) -> Result<()> {
        let d = window.dim();
        if self.momentum.len() != d || !(self.position.is_empty() || self.position.len() == d) {
            return Err(Error::SizeMismatch {
                expected: d,
                got: self.momentum.len(),
            });
        }
        if !(self.width > 0.0) {
            return Err(Error::InvalidInput("packet width must be positive".into()));
        }
        let xi0 = &self.momentum;
        if !window.contains(free_symbol(xi0)) || xi0.iter().any(|x| x.cos() == 0.0) {
            return Err(Error::Precondition(format!(
                "packet centre {xi0:?} is not in D(I) (p0 = {})",
                free_symbol(xi0)
            )));
        }
        // sample the ball on a sub-grid of spacing width / 16
        let steps = 16i64;
        let mut offs = vec![-steps; d];
        let mut xi = vec![0.0; d];
        loop {
            let r2: i64 = offs.iter().map(|o| o * o).sum();
            if r2 <= steps * steps {
                for j in 0..d {
                    xi[j] = xi0[j] + self.width * offs[j] as f64 / steps as f64;
                }
                if !window.in_core(&xi) {
                    return Err(Error::InvalidInput(format!(
                        "packet width {} too large: support reaches {xi:?} outside the window core",
                        self.width
                    )));
                }
            }
            let mut j = 0;
            loop {
                if j == d {
                    return Ok(());
                }
                offs[j] += 1;
                if offs[j] <= steps {
                    break;
                }
                offs[j] = -steps;
                j += 1;
            }
        }
    }
}

/// Unit-norm lattice field whose momentum representation is a bump centred at `xi0`.
pub fn build_wavepacket(
    fourier: &Fourier,
    spec: &PacketSpec,
    window: &EnergyWindow,
) -> Result<LatticeField> {
    spec.check(window)?;
    let grid = fourier.grid();
    if grid.dim() != window.dim() {
        return Err(Error::SizeMismatch {
            expected: window.dim(),
            got: grid.dim(),
        });
    }
    let values = grid.evaluate(|xi| spec.profile(xi));
    if values.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::InvalidInput(
            "packet support contains no grid point; enlarge the box or the width".into(),
        ));
    }
    let u = fourier.inverse(&MomentumField::new(grid, values)?)?;
    u.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::grid::LatticeBox;
    use std::f64::consts::PI;

    #[test]
    fn unit_norm_and_support() {
        let b = LatticeBox::new(1, 256).unwrap();
        let f = Fourier::new(b);
        let w = EnergyWindow::new(1, 0.3, 0.7, 0.15).unwrap();
        let spec = PacketSpec::new(vec![PI / 3.0], 0.15);
        let u = build_wavepacket(&f, &spec, &w).unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-12);
        let uh = f.forward(&u).unwrap();
        let support = spec.support(f.grid());
        for (i, z) in uh.values().iter().enumerate() {
            if !support.contains(&i) {
                assert!(z.norm() < 1e-13);
            } else {
                assert!(w.in_core(&f.grid().point_vec(i)));
            }
        }
    }

    #[test]
    fn rejects_bad_centres() {
        let w = EnergyWindow::new(1, 0.3, 0.7, 0.15).unwrap();
        assert!(matches!(
            PacketSpec::new(vec![0.2], 0.1).check(&w),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            PacketSpec::new(vec![PI / 3.0], 0.5).check(&w),
            Err(Error::InvalidInput(_))
        ));
    }
}
