//! Modifier phases: Hamilton-Jacobi tables built along characteristics, the
//! Dollard phase, and their certification.

mod diagnostics;
mod dollard;
mod fan;
pub mod fd;
pub mod interp;
mod schedule;
mod table;

use std::sync::Arc;

pub use diagnostics::{phase_diagnostics, PhaseReport, SlopeEntry};
pub use dollard::DollardPhase;
pub use fan::{build_fan, select_r1, CharacteristicFan, FanConfig, FanReport, FanSample};
pub use schedule::Schedule;
pub use table::{build_phase_table, invert_and_assemble, HjConfig, PhaseTable, TableHeader};

use crate::error::Result;
use crate::lattice::{free_symbol, velocity, MomentumGrid};

/// Time-dependent Fourier multiplier phase `Phi(t, xi)` on a momentum grid.
pub trait Modifier: Send + Sync {
    fn label(&self) -> String;

    fn grid(&self) -> MomentumGrid;

    /// Times at which the modifier is defined (inclusive).
    fn time_range(&self) -> (f64, f64);

    /// `Phi(t, xi_k)` for every grid point.
    fn phase(&self, t: f64) -> Result<Vec<f64>>;

    /// `d_t Phi(t, xi_k) - p0(xi_k)`, the symbol subtracted from `V` in the Cook integrand.
    fn cook_symbol(&self, t: f64) -> Result<Vec<f64>>;

    /// `d_xi Phi(t, xi_k)`, `d` entries per grid point.
    fn position(&self, t: f64) -> Result<Vec<f64>>;
}

/// `Phi = t p0`: the unmodified free evolution.
#[derive(Clone, Copy, Debug)]
pub struct FreeModifier {
    grid: MomentumGrid,
}

impl FreeModifier {
    pub fn new(grid: MomentumGrid) -> Self {
        FreeModifier { grid }
    }
}

impl Modifier for FreeModifier {
    fn label(&self) -> String {
        "none".into()
    }

    fn grid(&self) -> MomentumGrid {
        self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn phase(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.grid.evaluate(|xi| t * free_symbol(xi)))
    }

    fn cook_symbol(&self, _t: f64) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.grid.len()])
    }

    fn position(&self, t: f64) -> Result<Vec<f64>> {
        Ok(free_position(self.grid, t))
    }
}

pub(crate) fn free_position(grid: MomentumGrid, t: f64) -> Vec<f64> {
    let d = grid.dim();
    let mut out = vec![0.0; grid.len() * d];
    let mut xi = vec![0.0; d];
    let mut v = vec![0.0; d];
    for i in 0..grid.len() {
        grid.point(i, &mut xi);
        velocity(&xi, &mut v);
        for j in 0..d {
            out[i * d + j] = t * v[j];
        }
    }
    out
}

/// `Phi + c`: a constant gauge shift of another modifier.
#[derive(Clone)]
pub struct ShiftedModifier {
    inner: Arc<dyn Modifier>,
    shift: f64,
}

impl ShiftedModifier {
    pub fn new(inner: Arc<dyn Modifier>, shift: f64) -> Self {
        ShiftedModifier { inner, shift }
    }
}

impl Modifier for ShiftedModifier {
    fn label(&self) -> String {
        format!("{}+{}", self.inner.label(), self.shift)
    }

    fn grid(&self) -> MomentumGrid {
        self.inner.grid()
    }

    fn time_range(&self) -> (f64, f64) {
        self.inner.time_range()
    }

    fn phase(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.inner.phase(t)?.into_iter().map(|p| p + self.shift).collect())
    }

    fn cook_symbol(&self, t: f64) -> Result<Vec<f64>> {
        self.inner.cook_symbol(t)
    }

    fn position(&self, t: f64) -> Result<Vec<f64>> {
        self.inner.position(t)
    }
}
