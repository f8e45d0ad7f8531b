use std::sync::Arc;

use rayon::prelude::*;

use super::schedule::Schedule;
use super::Modifier;
use crate::classical::Sign;
use crate::error::{Error, Result};
use crate::lattice::symbols::velocity_vec;
use crate::lattice::{free_symbol, ContinuumPotential, MomentumGrid};
use crate::quad;

/// `Phi^D(t, xi) = t p0(xi) + int_0^t V(s v(xi)) ds` on the full grid.
///
/// Values at the (signed) schedule times are cached; other times are integrated on demand.
#[derive(Clone)]
pub struct DollardPhase {
    grid: MomentumGrid,
    potential: Arc<dyn ContinuumPotential>,
    sign: Sign,
    times: Vec<f64>,
    cache: Vec<Vec<f64>>,
    tol: f64,
}

impl std::fmt::Debug for DollardPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DollardPhase")
            .field("sign", &self.sign)
            .field("times", &self.times)
            .finish()
    }
}

impl DollardPhase {
    /// Absolute quadrature tolerance per time increment.
    pub const DEFAULT_TOL: f64 = 1e-12;

    pub fn new(
        potential: Arc<dyn ContinuumPotential>,
        grid: MomentumGrid,
        schedule: &Schedule,
        sign: Sign,
    ) -> Result<Self> {
        if potential.dim() != grid.dim() {
            return Err(Error::SizeMismatch {
                expected: grid.dim(),
                got: potential.dim(),
            });
        }
        let times: Vec<f64> = schedule.times().iter().map(|t| sign.factor() * t).collect();
        let mut dp = DollardPhase {
            grid,
            potential,
            sign,
            times: times.clone(),
            cache: Vec::new(),
            tol: Self::DEFAULT_TOL,
        };
        // integral part, accumulated over consecutive schedule intervals
        let mut acc = vec![0.0; grid.len()];
        let mut prev = 0.0;
        let mut cache = Vec::with_capacity(times.len());
        for &t in &times {
            let inc: Vec<f64> = (0..grid.len())
                .into_par_iter()
                .map(|k| dp.integral(&grid.point_vec(k), prev, t))
                .collect::<Result<_>>()?;
            let mut row = Vec::with_capacity(grid.len());
            for k in 0..grid.len() {
                acc[k] += inc[k];
                row.push(t * free_symbol(&grid.point_vec(k)) + acc[k]);
            }
            cache.push(row);
            prev = t;
        }
        dp.cache = cache;
        Ok(dp)
    }

    /// `int_a^b V(s v(xi)) ds`.
    fn integral(&self, xi: &[f64], a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let v = velocity_vec(xi);
        let mut x = vec![0.0; v.len()];
        let mut err = None;
        let out = quad::integrate(
            |s| {
                for (xj, vj) in x.iter_mut().zip(&v) {
                    *xj = s * vj;
                }
                self.potential.value(&x).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    0.0
                })
            },
            a,
            b,
            self.tol,
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// Signed cached times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn check_sign(&self, t: f64) -> Result<()> {
        if self.sign.factor() * t < 0.0 {
            let (a, b) = self.time_range();
            return Err(Error::TimeOutOfRange { time: t, start: a, end: b });
        }
        Ok(())
    }

    /// `Phi^D` at one grid index and time, integrated afresh.
    pub fn value_at(&self, k: usize, t: f64) -> Result<f64> {
        let xi = self.grid.point_vec(k);
        Ok(t * free_symbol(&xi) + self.integral(&xi, 0.0, t)?)
    }
}

impl Modifier for DollardPhase {
    fn label(&self) -> String {
        "dollard".into()
    }

    fn grid(&self) -> MomentumGrid {
        self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        match self.sign {
            Sign::Plus => (0.0, f64::INFINITY),
            Sign::Minus => (f64::NEG_INFINITY, 0.0),
        }
    }

    fn phase(&self, t: f64) -> Result<Vec<f64>> {
        self.check_sign(t)?;
        if let Some(m) = self.times.iter().position(|s| *s == t) {
            return Ok(self.cache[m].clone());
        }
        // integrate from the nearest cached time below |t|
        let base = self
            .times
            .iter()
            .enumerate()
            .filter(|(_, s)| s.abs() <= t.abs())
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        let (start, init): (f64, Option<&Vec<f64>>) = match base {
            Some((m, s)) => (*s, Some(&self.cache[m])),
            None => (0.0, None),
        };
        (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let xi = self.grid.point_vec(k);
                let p0 = free_symbol(&xi);
                let from = init.map_or(0.0, |row| row[k] - start * p0);
                Ok(t * p0 + from + self.integral(&xi, start, t)?)
            })
            .collect()
    }

    fn cook_symbol(&self, t: f64) -> Result<Vec<f64>> {
        self.check_sign(t)?;
        let mut x = vec![0.0; self.grid.dim()];
        (0..self.grid.len())
            .map(|k| {
                let v = velocity_vec(&self.grid.point_vec(k));
                for (xj, vj) in x.iter_mut().zip(&v) {
                    *xj = t * vj;
                }
                self.potential.value(&x)
            })
            .collect()
    }

    /// `t v + int_0^t s Hess p0 grad V(s v) ds`.
    fn position(&self, t: f64) -> Result<Vec<f64>> {
        self.check_sign(t)?;
        let d = self.grid.dim();
        let rows: Vec<Vec<f64>> = (0..self.grid.len())
            .into_par_iter()
            .map(|k| -> Result<Vec<f64>> {
                let xi = self.grid.point_vec(k);
                let v = velocity_vec(&xi);
                let mut out = Vec::with_capacity(d);
                for j in 0..d {
                    let mut x = vec![0.0; d];
                    let mut g = vec![0.0; d];
                    let mut err = None;
                    let int = quad::integrate(
                        |s| {
                            for (xl, vl) in x.iter_mut().zip(&v) {
                                *xl = s * vl;
                            }
                            if let Err(e) = self.potential.gradient(&x, &mut g) {
                                err.get_or_insert(e);
                            }
                            s * g[j]
                        },
                        0.0,
                        t,
                        self.tol,
                    )?;
                    if let Some(e) = err {
                        return Err(e);
                    }
                    out.push(t * v[j] - xi[j].cos() * int);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(rows.concat())
    }
}
