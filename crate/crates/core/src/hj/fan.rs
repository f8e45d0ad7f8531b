use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interp::lagrange4;
use super::schedule::Schedule;
use crate::classical::{integrate_flow, min_speed_on_energy_band, FlowParams, PhasePoint, Sign};
use crate::error::{Error, Result};
use crate::lattice::symbols::velocity_vec;
use crate::lattice::{free_symbol, ContinuumPotential, MomentumGrid};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanConfig {
    pub sign: Sign,
    pub r1: f64,
    /// Seed lattice points per momentum-grid spacing, per axis.
    pub density: usize,
    pub flow: FlowParams,
    /// Energy band `p0(eta)` the seeds must cover, usually `I + [-delta, delta]`.
    pub band: (f64, f64),
}

/// Augmented characteristics `(x, xi, u)` launched from `x(0) = +-R1 v(eta)`, `xi(0) = eta`,
/// `u(0) = +-R1 p0(eta)` for `eta` on a uniform torus lattice.
///
/// Seed lattice: `eta_a = (a - M/2) * 2 pi / M` per axis with `M = density * N`,
/// so every momentum-grid point is a seed node.
#[derive(Clone, Debug)]
pub struct CharacteristicFan {
    sign: Sign,
    r1: f64,
    dim: usize,
    per_axis: usize,
    spacing: f64,
    band: (f64, f64),
    slots: Vec<u32>,
    seeds: Vec<usize>,
    times: Vec<f64>,
    x: Vec<Vec<f64>>,
    disp: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

/// Interpolated fan data at one `eta` and time: displacement `D = xi - eta`,
/// position, action, and their `eta`-Jacobians (row-major, `[i * d + j] = d_j (.)_i`).
#[derive(Clone, Debug, PartialEq)]
pub struct FanSample {
    pub disp: Vec<f64>,
    pub x: Vec<f64>,
    pub u: f64,
    pub d_disp: Vec<f64>,
    pub d_x: Vec<f64>,
    pub du: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanReport {
    pub seeds: usize,
    /// `sup |d xi / d eta - id|` over core seeds and times.
    pub smallness: f64,
    pub min_jacobian_det: f64,
    pub max_condition: f64,
    /// `R1 inf |v(eta)|` over the core band.
    pub start_radius: f64,
    pub max_energy_drift: f64,
}

const MISSING: u32 = u32::MAX;

impl CharacteristicFan {
    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn seed_count(&self) -> usize {
        self.seeds.len()
    }

    pub fn band(&self) -> (f64, f64) {
        self.band
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn node_eta(&self, flat: usize) -> Vec<f64> {
        let m = self.per_axis;
        let mut rest = flat;
        let mut eta = vec![0.0; self.dim];
        for j in (0..self.dim).rev() {
            eta[j] = ((rest % m) as f64 - (m / 2) as f64) * self.spacing;
            rest /= m;
        }
        eta
    }

    /// Fan data at `eta` and schedule index `m` by tensor cubic Lagrange interpolation.
    pub fn sample(&self, m: usize, eta: &[f64]) -> Result<FanSample> {
        let d = self.dim;
        let mm = self.per_axis as i64;
        let mut base = vec![0i64; d];
        let mut w = Vec::with_capacity(d);
        for j in 0..d {
            let q = eta[j] / self.spacing;
            let f = q.floor();
            base[j] = f as i64 + mm / 2;
            w.push(lagrange4(q - f));
        }
        let mut out = FanSample {
            disp: vec![0.0; d],
            x: vec![0.0; d],
            u: 0.0,
            d_disp: vec![0.0; d * d],
            d_x: vec![0.0; d * d],
            du: vec![0.0; d],
        };
        let (xs, ds, us) = (&self.x[m], &self.disp[m], &self.u[m]);
        let total = 4usize.pow(d as u32);
        let mut grad_w = vec![0.0; d];
        for code in 0..total {
            let mut flat = 0usize;
            let mut weight = 1.0;
            let mut c = code;
            let mut offs = [0usize; 3];
            for j in 0..d {
                offs[j] = c % 4;
                c /= 4;
                let a = (base[j] + offs[j] as i64 - 1).rem_euclid(mm) as usize;
                flat = flat * self.per_axis + a;
                weight *= w[j].0[offs[j]];
            }
            for (k, g) in grad_w.iter_mut().enumerate() {
                let mut p = 1.0;
                for j in 0..d {
                    p *= if j == k { w[j].1[offs[j]] / self.spacing } else { w[j].0[offs[j]] };
                }
                *g = p;
            }
            let slot = self.slots[flat];
            if slot == MISSING {
                return Err(Error::FanCheck(format!(
                    "interpolation stencil at eta = {eta:?} leaves the seed set; widen the seed band"
                )));
            }
            let s = slot as usize;
            out.u += weight * us[s];
            for i in 0..d {
                out.disp[i] += weight * ds[s * d + i];
                out.x[i] += weight * xs[s * d + i];
                for k in 0..d {
                    out.d_disp[i * d + k] += grad_w[k] * ds[s * d + i];
                    out.d_x[i * d + k] += grad_w[k] * xs[s * d + i];
                }
            }
            for k in 0..d {
                out.du[k] += grad_w[k] * us[s];
            }
        }
        Ok(out)
    }

    /// Check the fan invariants on core seeds: smallness, non-singular differential.
    pub fn report(&self, drift: f64, condition_cap: f64) -> Result<FanReport> {
        let d = self.dim;
        let core: Vec<usize> = self
            .seeds
            .iter()
            .copied()
            .filter(|&f| {
                let e = free_symbol(&self.node_eta(f));
                e >= self.band.0 && e <= self.band.1
            })
            .collect();
        let per_time: Vec<(f64, f64, f64)> = (0..self.times.len())
            .into_par_iter()
            .map(|m| -> Result<(f64, f64, f64)> {
                let mut small: f64 = 0.0;
                let mut min_det = f64::INFINITY;
                let mut cond: f64 = 0.0;
                for &f in &core {
                    let s = self.sample(m, &self.node_eta(f))?;
                    small = small.max(linalg::max_abs(&s.d_disp));
                    let mut jac = s.d_disp.clone();
                    for i in 0..d {
                        jac[i * d + i] += 1.0;
                    }
                    min_det = min_det.min(linalg::det(&jac, d));
                    cond = cond.max(linalg::condition(&jac, d));
                }
                Ok((small, min_det, cond))
            })
            .collect::<Result<_>>()?;
        let smallness = per_time.iter().map(|p| p.0).fold(0.0, f64::max);
        let min_det = per_time.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_cond = per_time.iter().map(|p| p.2).fold(0.0, f64::max);
        if !(min_det > 0.0) || max_cond > condition_cap {
            return Err(Error::FanCheck(format!(
                "fan map differential is singular or ill-conditioned (min det {min_det:e}, condition {max_cond:e})"
            )));
        }
        let vmin = min_speed_on_energy_band(d, self.band.0, self.band.1).sqrt();
        Ok(FanReport {
            seeds: self.seeds.len(),
            smallness,
            min_jacobian_det: min_det,
            max_condition: max_cond,
            start_radius: self.r1 * vmin,
            max_energy_drift: drift,
        })
    }
}

fn launch(
    potential: &dyn ContinuumPotential,
    eta: &[f64],
    cfg: &FanConfig,
    times: &[f64],
) -> Result<crate::classical::Trajectory> {
    let s = cfg.sign.factor();
    let v = velocity_vec(eta);
    let x0: Vec<f64> = v.iter().map(|c| s * cfg.r1 * c).collect();
    let start = PhasePoint::new(x0, eta.to_vec())?;
    let signed: Vec<f64> = times.iter().map(|t| s * t).collect();
    let mut traj = integrate_flow(potential, &start, &cfg.flow, &signed, Some(s * cfg.r1 * free_symbol(eta)))?;
    // PhasePoint reduction may shift eta by 2 pi; keep xi continuous with the seed
    for row in traj.xi.iter_mut() {
        for j in 0..eta.len() {
            row[j] += eta[j] - start.xi()[j];
        }
    }
    Ok(traj)
}

/// Integrate the fan on `schedule` over seeds covering `cfg.band` plus a stencil pad.
pub fn build_fan(
    potential: &dyn ContinuumPotential,
    grid: MomentumGrid,
    schedule: &Schedule,
    cfg: &FanConfig,
) -> Result<(CharacteristicFan, f64)> {
    if cfg.density < 4 {
        return Err(Error::InvalidInput("seed density must be at least 4 per grid spacing".into()));
    }
    if !(cfg.r1 > 0.0) {
        return Err(Error::InvalidInput("R1 must be positive".into()));
    }
    let d = grid.dim();
    let per_axis = cfg.density * grid.lattice_box().side();
    let spacing = 2.0 * std::f64::consts::PI / per_axis as f64;
    let pad = 3.0 * spacing * (d as f64).sqrt();
    let total = per_axis
        .checked_pow(d as u32)
        .filter(|t| *t < u32::MAX as usize)
        .ok_or_else(|| Error::InvalidInput("seed lattice too large".into()))?;
    let mut fan = CharacteristicFan {
        sign: cfg.sign,
        r1: cfg.r1,
        dim: d,
        per_axis,
        spacing,
        band: cfg.band,
        slots: vec![MISSING; total],
        seeds: Vec::new(),
        times: schedule.times().to_vec(),
        x: Vec::new(),
        disp: Vec::new(),
        u: Vec::new(),
    };
    for flat in 0..total {
        let e = free_symbol(&fan.node_eta(flat));
        if e >= cfg.band.0 - pad && e <= cfg.band.1 + pad {
            fan.slots[flat] = fan.seeds.len() as u32;
            fan.seeds.push(flat);
        }
    }
    if fan.seeds.is_empty() {
        return Err(Error::FanCheck("no seed lies in the energy band".into()));
    }
    let trajs: Vec<crate::classical::Trajectory> = fan
        .seeds
        .par_iter()
        .map(|&f| launch(potential, &fan.node_eta(f), cfg, schedule.times()))
        .collect::<Result<_>>()?;
    let nt = schedule.len();
    let ns = fan.seeds.len();
    fan.x = vec![vec![0.0; ns * d]; nt];
    fan.disp = vec![vec![0.0; ns * d]; nt];
    fan.u = vec![vec![0.0; ns]; nt];
    let mut drift: f64 = 0.0;
    for (s, (traj, &flat)) in trajs.iter().zip(&fan.seeds).enumerate() {
        let eta = fan.node_eta(flat);
        drift = drift.max(traj.max_drift());
        for m in 0..nt {
            for j in 0..d {
                fan.x[m][s * d + j] = traj.x[m][j];
                fan.disp[m][s * d + j] = traj.xi[m][j] - eta[j];
            }
            fan.u[m][s] = traj.action.as_ref().unwrap()[m];
        }
    }
    Ok((fan, drift))
}

/// Smallest `R1 = R1_start * 2^k` whose probe fan has `sup |d xi/d eta - id| <= threshold`.
///
/// The probe uses a coarse seed set on `band` and central differences in `eta`.
/// Returns `(R1, measured smallness)`.
pub fn select_r1(
    potential: &dyn ContinuumPotential,
    band: (f64, f64),
    r0: f64,
    schedule: &Schedule,
    flow: &FlowParams,
    sign: Sign,
    threshold: f64,
    start: Option<f64>,
) -> Result<(f64, f64)> {
    let d = potential.dim();
    let vmin = min_speed_on_energy_band(d, band.0, band.1).sqrt();
    if !(vmin > 0.0) {
        return Err(Error::ThresholdOverlap("velocity vanishes on the seed band".into()));
    }
    let mut r1 = start.unwrap_or((r0 / vmin).max(1.0));
    let per_axis: usize = match d {
        1 => 256,
        2 => 48,
        _ => 20,
    };
    let step = 2.0 * std::f64::consts::PI / per_axis as f64;
    let mut seeds = Vec::new();
    for flat in 0..per_axis.pow(d as u32) {
        let mut rest = flat;
        let mut eta = vec![0.0; d];
        for c in eta.iter_mut() {
            *c = ((rest % per_axis) as f64 + 0.5) * step - std::f64::consts::PI;
            rest /= per_axis;
        }
        let e = free_symbol(&eta);
        if e >= band.0 && e <= band.1 {
            seeds.push(eta);
        }
    }
    if seeds.is_empty() {
        return Err(Error::FanCheck("probe fan has no seeds in the band".into()));
    }
    let times = schedule.main_times();
    let h = 1e-5;
    for _ in 0..16 {
        let cfg = FanConfig {
            sign,
            r1,
            density: 4,
            flow: *flow,
            band,
        };
        let worst: Vec<f64> = seeds
            .par_iter()
            .map(|eta| -> Result<f64> {
                let mut w: f64 = 0.0;
                for k in 0..d {
                    let mut ep = eta.clone();
                    let mut em = eta.clone();
                    ep[k] += h;
                    em[k] -= h;
                    let a = launch(potential, &ep, &cfg, &times)?;
                    let b = launch(potential, &em, &cfg, &times)?;
                    for m in 0..times.len() {
                        for i in 0..d {
                            let id = if i == k { 1.0 } else { 0.0 };
                            w = w.max(((a.xi[m][i] - b.xi[m][i]) / (2.0 * h) - id).abs());
                        }
                    }
                }
                Ok(w)
            })
            .collect::<Result<_>>()?;
        let small = worst.into_iter().fold(0.0, f64::max);
        if small <= threshold {
            return Ok((r1, small));
        }
        r1 *= 2.0;
    }
    Err(Error::FanCheck(format!(
        "no R1 up to {r1} passes the smallness check {threshold}"
    )))
}
