//! Propagators on the periodic box: exact free evolution, Chebyshev evolution
//! under `H = H0 + V`, and modifier multipliers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hj::Modifier;
use crate::lattice::{free_symbol, Fourier, LatticeBox, LatticeField, Multiplier, PotentialSpec, SiteTable};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    /// Truncation tolerance for the Chebyshev coefficients.
    pub tolerance: f64,
    /// Longest time covered by one expansion.
    pub step: f64,
    /// Spectral half-width; `d + sup|V|` when absent.
    pub half_width: Option<f64>,
    pub boundary_threshold: f64,
    pub max_terms: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            tolerance: 1e-12,
            step: 10.0,
            half_width: None,
            boundary_threshold: 1e-8,
            max_terms: 100_000,
        }
    }
}

/// `e^{-i phi(xi)}` multiplier for `phi = t p0`.
pub fn free_multiplier(fourier: &Fourier, t: f64) -> Result<Multiplier> {
    let phase = fourier.grid().evaluate(|xi| t * free_symbol(xi));
    Multiplier::phase(fourier.grid(), &phase)
}

/// `e^{-it H0} u`.
pub fn free_propagate(fourier: &Fourier, u: &LatticeField, t: f64) -> Result<LatticeField> {
    if t == 0.0 {
        return Ok(u.clone());
    }
    fourier.apply_multiplier(&free_multiplier(fourier, t)?, u)
}

/// `e^{-i Phi(t, D)} u`.
pub fn apply_modifier(fourier: &Fourier, u: &LatticeField, modifier: &dyn Modifier, t: f64) -> Result<LatticeField> {
    if modifier.grid() != fourier.grid() {
        return Err(Error::SizeMismatch {
            expected: fourier.grid().len(),
            got: modifier.grid().len(),
        });
    }
    let (a, b) = modifier.time_range();
    if t < a || t > b {
        return Err(Error::TimeOutOfRange { time: t, start: a, end: b });
    }
    let phase = modifier.phase(t)?;
    fourier.apply_multiplier(&Multiplier::phase(fourier.grid(), &phase)?, u)
}

/// Mass on sites within `margin` of the box edge (edge distance `< margin`).
pub fn boundary_mass(u: &LatticeField, margin: usize) -> f64 {
    let bx = u.lattice_box();
    let mut site = vec![0; bx.dim()];
    u.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            bx.site(*i, &mut site);
            bx.edge_distance(&site) < margin
        })
        .map(|(_, z)| z.norm_sqr())
        .sum()
}

/// `H = H0 + V` on the periodic box; `H0` acts as nearest-neighbour averaging
/// `(H0 u)[n] = 1/2 sum_j (u[n + e_j] + u[n - e_j])`, which equals `p0(D)` exactly.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    lattice_box: LatticeBox,
    potential: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(lattice_box: LatticeBox, spec: &PotentialSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self::from_table(&spec.sample(lattice_box)))
    }

    pub fn from_table(table: &SiteTable) -> Self {
        Hamiltonian {
            lattice_box: table.lattice_box(),
            potential: table.values().to_vec(),
        }
    }

    pub fn lattice_box(&self) -> LatticeBox {
        self.lattice_box
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn sup_potential(&self) -> f64 {
        self.potential.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `out = (H - shift) u / scale`.
    fn apply_scaled(&self, u: &[Complex64], out: &mut [Complex64], scale: f64) {
        let n = self.lattice_box.side();
        let d = self.lattice_box.dim();
        let strides: Vec<usize> = (0..d).map(|j| n.pow((d - 1 - j) as u32)).collect();
        let inv = 1.0 / scale;
        out.par_iter_mut().enumerate().with_min_len(4096).for_each(|(i, o)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &s in &strides {
                let c = (i / s) % n;
                let up = if c + 1 < n { i + s } else { i + s - n * s };
                let down = if c > 0 { i - s } else { i + (n - 1) * s };
                acc += u[up] + u[down];
            }
            *o = (0.5 * acc + self.potential[i] * u[i]) * inv;
        });
    }

    pub fn apply(&self, u: &LatticeField) -> Result<LatticeField> {
        self.check(u)?;
        let mut out = vec![Complex64::new(0.0, 0.0); u.values().len()];
        self.apply_scaled(u.values(), &mut out, 1.0);
        LatticeField::new(self.lattice_box, out)
    }

    fn check(&self, u: &LatticeField) -> Result<()> {
        if u.lattice_box() != self.lattice_box {
            return Err(Error::SizeMismatch {
                expected: self.lattice_box.len(),
                got: u.values().len(),
            });
        }
        Ok(())
    }
}

/// `J_k(z)` for `k = 0..=kmax` by Miller's backward recurrence, `z > 0`.
pub fn bessel_j_sequence(z: f64, kmax: usize) -> Vec<f64> {
    if z == 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    let start = kmax.max(z as usize) + 40 + (2.0 * z.sqrt()) as usize;
    let start = start + (start % 2);
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / z * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j[k - 1..=start].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // J0 + 2 sum J_{2k} = 1
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.truncate(kmax + 1);
    j.iter_mut().for_each(|v| *v /= norm);
    j
}

/// Chebyshev coefficients of `e^{-i z x}` on `[-1, 1]`, truncated once the tail drops below `tol`.
fn chebyshev_coefficients(z: f64, tol: f64, max_terms: usize) -> Result<Vec<Complex64>> {
    let kmax = (z + 10.0 * z.cbrt() + 30.0) as usize;
    let j = bessel_j_sequence(z, kmax);
    let mut cut = kmax;
    for k in (z.ceil() as usize)..kmax {
        // beyond k > z the sequence decays faster than geometrically
        if 2.0 * (j[k].abs() + j[k + 1].abs()) < 0.25 * tol {
            cut = k;
            break;
        }
    }
    if cut + 1 > max_terms || cut == kmax {
        return Err(Error::Chebyshev(format!(
            "tolerance {tol:e} needs more than {} terms at z = {z}",
            max_terms.min(kmax)
        )));
    }
    let mi = Complex64::new(0.0, -1.0);
    Ok((0..cut)
        .map(|k| {
            let f = if k == 0 { 1.0 } else { 2.0 };
            f * mi.powu(k as u32) * j[k]
        })
        .collect())
}

/// `e^{-itH}` by Chebyshev expansion in chunks of at most `cfg.step`.
#[derive(Clone, Debug)]
pub struct Propagator {
    hamiltonian: Hamiltonian,
    config: PropagatorConfig,
    half_width: f64,
}

impl Propagator {
    pub fn new(hamiltonian: Hamiltonian, config: PropagatorConfig) -> Result<Self> {
        if !(config.tolerance > 0.0 && config.step > 0.0) {
            return Err(Error::InvalidInput("tolerance and step must be positive".into()));
        }
        let d = hamiltonian.lattice_box().dim() as f64;
        let bound = d + hamiltonian.sup_potential();
        let half_width = match config.half_width {
            Some(w) if w < bound => {
                return Err(Error::Chebyshev(format!(
                    "half-width {w} below the spectral bound d + sup|V| = {bound}"
                )))
            }
            Some(w) => w,
            None => bound,
        };
        Ok(Propagator {
            hamiltonian,
            config,
            half_width,
        })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `e^{-itH} u`.
    pub fn propagate(&self, u: &LatticeField, t: f64) -> Result<LatticeField> {
        self.hamiltonian.check(u)?;
        if t == 0.0 {
            return Ok(u.clone());
        }
        let chunks = (t.abs() / self.config.step).ceil().max(1.0) as usize;
        let dt = t / chunks as f64;
        let coef = chebyshev_coefficients(dt.abs() * self.half_width, self.config.tolerance, self.config.max_terms)?;
        // e^{-i dt H} with dt < 0 is the conjugate expansion
        let coef: Vec<Complex64> = if dt < 0.0 { coef.iter().map(|c| c.conj()).collect() } else { coef };
        let mut state = u.values().to_vec();
        for _ in 0..chunks {
            state = self.chunk(&state, &coef);
        }
        LatticeField::new(u.lattice_box(), state)
    }

    fn chunk(&self, u: &[Complex64], coef: &[Complex64]) -> Vec<Complex64> {
        let n = u.len();
        let mut prev = u.to_vec();
        let mut out: Vec<Complex64> = prev.iter().map(|z| coef[0] * z).collect();
        if coef.len() == 1 {
            return out;
        }
        let mut cur = vec![Complex64::new(0.0, 0.0); n];
        self.hamiltonian.apply_scaled(&prev, &mut cur, self.half_width);
        out.iter_mut().zip(&cur).for_each(|(o, c)| *o += coef[1] * c);
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        for a in &coef[2..] {
            self.hamiltonian.apply_scaled(&cur, &mut next, self.half_width);
            next.par_iter_mut()
                .zip(&prev)
                .zip(out.par_iter_mut())
                .with_min_len(4096)
                .for_each(|((x, p), o)| {
                    *x = 2.0 * *x - p;
                    *o += a * *x;
                });
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        out
    }

    /// Propagate and certify the boundary mass stays below the configured threshold.
    pub fn propagate_certified(&self, u: &LatticeField, t: f64, margin: usize) -> Result<(LatticeField, f64)> {
        let out = self.propagate(u, t)?;
        let mass = boundary_mass(&out, margin);
        if mass > self.config.boundary_threshold {
            return Err(Error::BoundaryBreach {
                mass,
                threshold: self.config.boundary_threshold,
                time: t,
            });
        }
        Ok((out, mass))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values() {
        // J0(1), J1(1), J5(10) reference values
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j_sequence(10.0, 8);
        assert!((j[5] - -0.234_061_528_186_793_6).abs() < 1e-14);
    }

    #[test]
    fn hopping_matches_fourier_multiplier() {
        let b = LatticeBox::new(2, 6).unwrap();
        let f = Fourier::new(b);
        let u = LatticeField::from_fn(b, |n| Complex64::new((n[0] as f64).sin(), (n[1] * n[0]) as f64 * 0.1));
        let h = Hamiltonian::new(b, &PotentialSpec::zero()).unwrap();
        let m = Multiplier::real(f.grid(), &f.grid().evaluate(free_symbol)).unwrap();
        let a = h.apply(&u).unwrap();
        let c = f.apply_multiplier(&m, &u).unwrap();
        assert!(a.distance(&c).unwrap() < 1e-12);
    }
}
