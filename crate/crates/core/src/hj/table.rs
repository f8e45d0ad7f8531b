use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fan::{build_fan, select_r1, CharacteristicFan, FanConfig, FanReport};
use super::interp::{monotone_hermite, Pchip};
use super::schedule::Schedule;
use super::Modifier;
use crate::classical::{EscapeConstants, FlowParams, Sign};
use crate::error::{Error, Result};
use crate::lattice::symbols::velocity_vec;
use crate::lattice::{free_symbol, ContinuumPotential, EnergyWindow, LatticeBox, MomentumGrid};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HjConfig {
    pub sign: Sign,
    /// Fixed `R1`; chosen by doubling when absent.
    pub r1: Option<f64>,
    pub density: usize,
    pub flow: FlowParams,
    pub smallness: f64,
    pub condition_cap: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Decay exponent, recorded in the header only.
    pub mu: Option<f64>,
}

impl Default for HjConfig {
    fn default() -> Self {
        HjConfig {
            sign: Sign::Plus,
            r1: None,
            density: 4,
            flow: FlowParams::default(),
            smallness: 0.1,
            condition_cap: 1e3,
            newton_tol: 1e-10,
            max_newton: 50,
            mu: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub dim: usize,
    pub half_width: usize,
    pub sign: Sign,
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
    pub smoothing: f64,
    pub mu: Option<f64>,
    pub r1: f64,
    pub schedule: Schedule,
    /// Grid indices carrying table values, ascending.
    pub points: Vec<usize>,
    pub max_newton_residual: f64,
    pub min_image_energy: f64,
    pub max_image_energy: f64,
}

/// `Phi(t, xi)`, `d_xi Phi` and `d_xi^2 Phi` on `{p0 in I}` (plus the smoothing
/// collar) at the schedule times; `t p0` elsewhere.
///
/// Queries use `t` with the table's sign: `t >= 0` for `+`, `t <= 0` for `-`.
#[derive(Clone)]
pub struct PhaseTable {
    header: TableHeader,
    grid: MomentumGrid,
    phi: Vec<Vec<f64>>,
    grad: Vec<Vec<f64>>,
    hess: Vec<Vec<f64>>,
    potential: Option<Arc<dyn ContinuumPotential>>,
}

impl std::fmt::Debug for PhaseTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhaseTable")
            .field("header", &self.header)
            .field("potential", &self.potential.is_some())
            .finish()
    }
}

struct Inverted {
    eta: Vec<f64>,
    residual: f64,
    sample: super::fan::FanSample,
}

fn newton(fan: &CharacteristicFan, m: usize, xi: &[f64], tol: f64, max_iter: usize) -> Result<Inverted> {
    let d = xi.len();
    let resid = |eta: &[f64]| -> Result<(f64, Vec<f64>, super::fan::FanSample)> {
        let s = fan.sample(m, eta)?;
        let f: Vec<f64> = (0..d).map(|j| eta[j] + s.disp[j] - xi[j]).collect();
        Ok((f.iter().fold(0.0f64, |a, b| a.max(b.abs())), f, s))
    };
    let mut eta = xi.to_vec();
    let s0 = fan.sample(m, &eta)?;
    for j in 0..d {
        eta[j] = xi[j] - s0.disp[j];
    }
    let (mut r, mut f, mut s) = resid(&eta)?;
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let mut jac = s.d_disp.clone();
        for j in 0..d {
            jac[j * d + j] += 1.0;
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let Some(step) = linalg::solve(&jac, &rhs) else {
            break;
        };
        let mut lam = 1.0;
        let mut accepted = None;
        while lam > 1e-6 {
            let cand: Vec<f64> = (0..d).map(|j| eta[j] + lam * step[j]).collect();
            let out = resid(&cand)?;
            if out.0 < r {
                accepted = Some((cand, out));
                break;
            }
            lam *= 0.5;
        }
        match accepted {
            Some((cand, (r2, f2, s2))) => {
                eta = cand;
                r = r2;
                f = f2;
                s = s2;
            }
            // no further decrease: converged to roundoff or stuck
            None => break,
        }
    }
    if !(r <= tol) {
        return Err(Error::NewtonFailure {
            time: fan.times()[m],
            point: 0,
            residual: r,
        });
    }
    Ok(Inverted {
        eta,
        residual: r,
        sample: s,
    })
}

/// Invert `Lambda_t` at every table point and time; assemble `Phi = u o Lambda_t^{-1}`.
///
/// The table covers `p0 in [a - s, b + s]` with `s = window.smoothing()`, i.e. the
/// support of the smoothed spectral cutoff.
pub fn invert_and_assemble(
    fan: &CharacteristicFan,
    grid: MomentumGrid,
    window: &EnergyWindow,
    delta: f64,
    cfg: &HjConfig,
    schedule: &Schedule,
) -> Result<PhaseTable> {
    let d = grid.dim();
    if fan.dim() != d || schedule.times() != fan.times() {
        return Err(Error::InvalidInput("fan and grid/schedule disagree".into()));
    }
    let s = window.smoothing();
    if !(s < delta) {
        return Err(Error::Precondition(format!(
            "smoothing {s} must stay below delta = {delta} so the table domain lies in the fan band"
        )));
    }
    let points: Vec<usize> = (0..grid.len())
        .filter(|&k| window.contains_enlarged(free_symbol(&grid.point_vec(k)), s))
        .collect();
    let (img_lo, img_hi) = (window.lower() - delta, window.upper() + delta);
    let nt = schedule.len();
    let np = points.len();
    let mut phi = vec![vec![0.0; np]; nt];
    let mut grad = vec![vec![0.0; np * d]; nt];
    let mut hess = vec![vec![0.0; np * d * d]; nt];
    let mut max_res: f64 = 0.0;
    let mut e_lo = f64::INFINITY;
    let mut e_hi = f64::NEG_INFINITY;
    for m in 0..nt {
        let rows: Vec<(f64, Vec<f64>, Vec<f64>, f64, f64)> = points
            .par_iter()
            .map(|&k| -> Result<(f64, Vec<f64>, Vec<f64>, f64, f64)> {
                let xi = grid.point_vec(k);
                let inv = newton(fan, m, &xi, cfg.newton_tol, cfg.max_newton).map_err(|e| match e {
                    Error::NewtonFailure { time, residual, .. } => Error::NewtonFailure {
                        time,
                        point: k,
                        residual,
                    },
                    other => other,
                })?;
                let energy = free_symbol(&inv.eta);
                if energy < img_lo || energy > img_hi {
                    return Err(Error::ImageContainment {
                        time: fan.times()[m],
                        point: k,
                        energy,
                    });
                }
                let mut jac = inv.sample.d_disp.clone();
                for j in 0..d {
                    jac[j * d + j] += 1.0;
                }
                let cond = linalg::condition(&jac, d);
                if !(linalg::det(&jac, d) > 0.0) || cond > cfg.condition_cap {
                    return Err(Error::FanCheck(format!(
                        "singular fan differential at t = {}, grid point {k} (condition {cond:e})",
                        fan.times()[m]
                    )));
                }
                let jinv = linalg::inverse(&jac, d).unwrap();
                let h = linalg::matmul(&inv.sample.d_x, &jinv, d);
                Ok((inv.sample.u, inv.sample.x, h, inv.residual, energy))
            })
            .collect::<Result<_>>()?;
        for (i, (u, x, h, r, e)) in rows.into_iter().enumerate() {
            phi[m][i] = u;
            grad[m][i * d..(i + 1) * d].copy_from_slice(&x);
            // symmetrize: the exact Hessian is symmetric, the interpolated one only nearly
            for a in 0..d {
                for b in 0..d {
                    hess[m][i * d * d + a * d + b] = 0.5 * (h[a * d + b] + h[b * d + a]);
                }
            }
            max_res = max_res.max(r);
            e_lo = e_lo.min(e);
            e_hi = e_hi.max(e);
        }
    }
    let header = TableHeader {
        dim: d,
        half_width: grid.lattice_box().half_width(),
        sign: fan.sign(),
        lower: window.lower(),
        upper: window.upper(),
        delta,
        smoothing: s,
        mu: cfg.mu,
        r1: fan.r1(),
        schedule: schedule.clone(),
        points,
        max_newton_residual: max_res,
        min_image_energy: e_lo,
        max_image_energy: e_hi,
    };
    Ok(PhaseTable {
        header,
        grid,
        phi,
        grad,
        hess,
        potential: None,
    })
}

/// Select `R1` (unless fixed), integrate the fan, check it, and assemble the table.
pub fn build_phase_table(
    potential: Arc<dyn ContinuumPotential>,
    grid: MomentumGrid,
    window: &EnergyWindow,
    constants: &EscapeConstants,
    schedule: &Schedule,
    cfg: &HjConfig,
) -> Result<(PhaseTable, FanReport)> {
    let delta = constants.delta;
    let band = (window.lower() - delta, window.upper() + delta);
    let r1 = match cfg.r1 {
        Some(r) => r,
        None => {
            select_r1(
                potential.as_ref(),
                band,
                constants.r0,
                schedule,
                &cfg.flow,
                cfg.sign,
                cfg.smallness,
                None,
            )?
            .0
        }
    };
    let fan_cfg = FanConfig {
        sign: cfg.sign,
        r1,
        density: cfg.density,
        flow: cfg.flow,
        band,
    };
    let (fan, drift) = build_fan(potential.as_ref(), grid, schedule, &fan_cfg)?;
    let report = fan.report(drift, cfg.condition_cap)?;
    if report.smallness > cfg.smallness {
        return Err(Error::FanCheck(format!(
            "sup |d xi/d eta - id| = {} exceeds {} for R1 = {r1}",
            report.smallness, cfg.smallness
        )));
    }
    let table = invert_and_assemble(&fan, grid, window, delta, cfg, schedule)?;
    Ok((table.with_potential(potential), report))
}

/// Four consecutive main-time nodes bracketing `tau` (fewer when the table is short).
fn local_nodes(main: &[f64], tau: f64) -> std::ops::Range<usize> {
    let n = main.len();
    if n <= 4 {
        return 0..n;
    }
    let i = main.partition_point(|t| *t <= tau).clamp(1, n - 1) - 1;
    let lo = i.saturating_sub(1).min(n - 4);
    lo..lo + 4
}

impl PhaseTable {
    pub fn header(&self) -> &TableHeader {
        &self.header
    }

    pub fn schedule(&self) -> &Schedule {
        &self.header.schedule
    }

    pub fn points(&self) -> &[usize] {
        &self.header.points
    }

    pub fn sign(&self) -> Sign {
        self.header.sign
    }

    /// Attach the evaluator used for the Cook symbol `V(d_xi Phi)`.
    pub fn with_potential(mut self, potential: Arc<dyn ContinuumPotential>) -> Self {
        self.potential = Some(potential);
        self
    }

    /// Values at schedule index `m`: `Phi`, `d_xi Phi` (`d` per point), Hessian (`d^2` per point).
    pub fn at_index(&self, m: usize) -> (&[f64], &[f64], &[f64]) {
        (&self.phi[m], &self.grad[m], &self.hess[m])
    }

    /// Schedule time `|t|` for a signed query time.
    fn magnitude(&self, t: f64) -> Result<f64> {
        let tau = self.header.sign.factor() * t;
        let (s, e) = (self.schedule().start(), self.schedule().end());
        if !(tau >= s - 1e-12 && tau <= e * (1.0 + 1e-12)) {
            let (a, b) = match self.header.sign {
                Sign::Plus => (s, e),
                Sign::Minus => (-e, -s),
            };
            return Err(Error::TimeOutOfRange { time: t, start: a, end: b });
        }
        Ok(tau.clamp(s, e))
    }

    /// Bracketing main schedule indices `(a, b)` for `tau`, or the exact index.
    fn bracket(&self, tau: f64) -> std::result::Result<usize, (usize, usize)> {
        let sched = self.schedule();
        if let Some(m) = sched.index_of(tau) {
            if sched.main_indices().contains(&m) {
                return Ok(m);
            }
        }
        let mains = sched.main_indices();
        let main_t = sched.main_times();
        let i = main_t.partition_point(|t| *t <= tau).clamp(1, main_t.len() - 1);
        Err((mains[i - 1], mains[i]))
    }

    /// `tau`-derivatives of `Phi - s tau p0` and `d_xi Phi - s tau v` at schedule index `m`,
    /// from the HJ equation: `s V(d_xi Phi)` and `s Hess(Phi) grad V(d_xi Phi)`.
    fn hj_slopes(&self, m: usize, potential: &dyn ContinuumPotential) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.header.dim;
        let s = self.header.sign.factor();
        let rows: Vec<(f64, Vec<f64>)> = (0..self.header.points.len())
            .into_par_iter()
            .map(|i| -> Result<(f64, Vec<f64>)> {
                let x = &self.grad[m][i * d..(i + 1) * d];
                let mut g = vec![0.0; d];
                potential.gradient(x, &mut g)?;
                let h = &self.hess[m][i * d * d..(i + 1) * d * d];
                let dx = (0..d)
                    .map(|a| s * (0..d).map(|b| h[a * d + b] * g[b]).sum::<f64>())
                    .collect();
                Ok((s * potential.value(x)?, dx))
            })
            .collect::<Result<_>>()?;
        let (a, b): (Vec<f64>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        Ok((a, b.concat()))
    }

    /// Interpolate `f(m, i) - tau g(i)` in `tau` between main nodes: monotone cubic
    /// Hermite with the HJ slopes when a potential is attached, local PCHIP otherwise.
    fn interpolate<F, G>(&self, tau: f64, count: usize, f: F, g: G, phase: bool) -> Result<Vec<f64>>
    where
        F: Fn(usize, usize) -> f64 + Sync,
        G: Fn(usize) -> f64 + Sync,
    {
        let (a, b) = match self.bracket(tau) {
            Ok(m) => return Ok((0..count).map(|i| f(m, i)).collect()),
            Err(pair) => pair,
        };
        let sched = self.schedule();
        let (ta, tb) = (sched.times()[a], sched.times()[b]);
        if let Some(p) = &self.potential {
            let sa = self.hj_slopes(a, p.as_ref())?;
            let sb = self.hj_slopes(b, p.as_ref())?;
            let (sa, sb) = if phase { (sa.0, sb.0) } else { (sa.1, sb.1) };
            return Ok((0..count)
                .into_par_iter()
                .map(|i| {
                    let gi = g(i);
                    let ya = f(a, i) - ta * gi;
                    let yb = f(b, i) - tb * gi;
                    monotone_hermite(ta, tb, ya, yb, sa[i], sb[i], tau) + tau * gi
                })
                .collect());
        }
        let mains = sched.main_indices();
        let main_t = sched.main_times();
        let range = local_nodes(&main_t, tau);
        let ts: Vec<f64> = main_t[range.clone()].to_vec();
        let ms: Vec<usize> = mains[range].to_vec();
        Ok((0..count)
            .into_par_iter()
            .map(|i| {
                let gi = g(i);
                let ys: Vec<f64> = ms.iter().zip(&ts).map(|(&m, &t)| f(m, i) - t * gi).collect();
                Pchip::new(&ts, &ys).eval(tau) + tau * gi
            })
            .collect())
    }

    fn point_xi(&self, i: usize) -> Vec<f64> {
        self.grid.point_vec(self.header.points[i])
    }

    /// `Phi` at the table points only.
    pub fn table_phase(&self, t: f64) -> Result<Vec<f64>> {
        let tau = self.magnitude(t)?;
        let s = self.header.sign.factor();
        let p0: Vec<f64> = (0..self.header.points.len()).map(|i| free_symbol(&self.point_xi(i))).collect();
        self.interpolate(tau, p0.len(), |m, i| self.phi[m][i], |i| s * p0[i], true)
    }

    /// `d_xi Phi` at the table points only.
    pub fn table_position(&self, t: f64) -> Result<Vec<f64>> {
        let tau = self.magnitude(t)?;
        let s = self.header.sign.factor();
        let v: Vec<f64> = (0..self.header.points.len())
            .flat_map(|i| velocity_vec(&self.point_xi(i)))
            .collect();
        self.interpolate(tau, v.len(), |m, j| self.grad[m][j], |j| s * v[j], false)
    }

    /// Leave-one-out error of the time interpolation of `Phi` over interior main
    /// times: each node is predicted from its neighbours at twice the spacing.
    pub fn interpolation_error(&self) -> Result<f64> {
        let sched = self.schedule();
        let mains = sched.main_indices();
        let s = self.header.sign.factor();
        let p0: Vec<f64> = (0..self.header.points.len()).map(|i| free_symbol(&self.point_xi(i))).collect();
        let mut worst: f64 = 0.0;
        for q in 1..mains.len().saturating_sub(1) {
            let (a, m, b) = (mains[q - 1], mains[q], mains[q + 1]);
            let (ta, tm, tb) = (sched.times()[a], sched.times()[m], sched.times()[b]);
            let err: Vec<f64> = match &self.potential {
                Some(p) => {
                    let sa = self.hj_slopes(a, p.as_ref())?.0;
                    let sb = self.hj_slopes(b, p.as_ref())?.0;
                    (0..p0.len())
                        .map(|i| {
                            let g = s * p0[i];
                            let pred = monotone_hermite(ta, tb, self.phi[a][i] - ta * g, self.phi[b][i] - tb * g, sa[i], sb[i], tm);
                            (pred - (self.phi[m][i] - tm * g)).abs()
                        })
                        .collect()
                }
                None => {
                    if q < 2 || q + 2 >= mains.len() {
                        continue;
                    }
                    let nodes = [mains[q - 2], a, b, mains[q + 2]];
                    let ts: Vec<f64> = nodes.iter().map(|&r| sched.times()[r]).collect();
                    (0..p0.len())
                        .map(|i| {
                            let g = s * p0[i];
                            let ys: Vec<f64> = nodes.iter().zip(&ts).map(|(&r, t)| self.phi[r][i] - t * g).collect();
                            (Pchip::new(&ts, &ys).eval(tm) - (self.phi[m][i] - tm * g)).abs()
                        })
                        .collect()
                }
            };
            worst = worst.max(err.into_iter().fold(0.0, f64::max));
        }
        Ok(worst)
    }

    /// Full-grid vector from table values, filling the rest with `fill(xi)`.
    fn scatter<F: Fn(&[f64], usize) -> f64>(&self, values: &[f64], width: usize, fill: F) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len() * width];
        let mut xi = vec![0.0; self.header.dim];
        for k in 0..self.grid.len() {
            self.grid.point(k, &mut xi);
            for j in 0..width {
                out[k * width + j] = fill(&xi, j);
            }
        }
        for (i, &k) in self.header.points.iter().enumerate() {
            out[k * width..(k + 1) * width].copy_from_slice(&values[i * width..(i + 1) * width]);
        }
        out
    }

    /// Write the header as JSON and the body as CSV (`{:.16e}`, bit-faithful on reload).
    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let header = serde_json::to_string_pretty(&self.header).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(json_path, header)?;
        std::fs::write(csv_path, self.to_csv())?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let d = self.header.dim;
        let mut out = String::from("t,xi_index,phi");
        for j in 0..d {
            let _ = write!(out, ",grad_{j}");
        }
        for a in 0..d {
            for b in 0..d {
                let _ = write!(out, ",hess_{a}{b}");
            }
        }
        out.push('\n');
        for (m, t) in self.schedule().times().iter().enumerate() {
            for (i, k) in self.header.points.iter().enumerate() {
                let _ = write!(out, "{t:.16e},{k},{:.16e}", self.phi[m][i]);
                for j in 0..d {
                    let _ = write!(out, ",{:.16e}", self.grad[m][i * d + j]);
                }
                for j in 0..d * d {
                    let _ = write!(out, ",{:.16e}", self.hess[m][i * d * d + j]);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn load(json_path: &Path, csv_path: &Path) -> Result<Self> {
        let header: TableHeader = serde_json::from_str(&std::fs::read_to_string(json_path)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", json_path.display())))?;
        let grid = MomentumGrid::new(LatticeBox::new(header.dim, header.half_width)?);
        let d = header.dim;
        let np = header.points.len();
        let nt = header.schedule.len();
        let mut phi = vec![vec![0.0; np]; nt];
        let mut grad = vec![vec![0.0; np * d]; nt];
        let mut hess = vec![vec![0.0; np * d * d]; nt];
        let text = std::fs::read_to_string(csv_path)?;
        let mut rows = 0usize;
        let bad = |line: usize, what: &str| Error::Parse(format!("{}:{line}: {what}", csv_path.display()));
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 + d + d * d {
                return Err(bad(ln + 1, "wrong column count"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(ln + 1, "bad number"));
            let m = rows / np.max(1);
            let i = rows % np.max(1);
            if m >= nt || num(fields[0])? != header.schedule.times()[m] {
                return Err(bad(ln + 1, "time does not match the header schedule"));
            }
            if fields[1].parse::<usize>().ok() != Some(header.points[i]) {
                return Err(bad(ln + 1, "grid index does not match the header"));
            }
            phi[m][i] = num(fields[2])?;
            for j in 0..d {
                grad[m][i * d + j] = num(fields[3 + j])?;
            }
            for j in 0..d * d {
                hess[m][i * d * d + j] = num(fields[3 + d + j])?;
            }
            rows += 1;
        }
        if rows != nt * np {
            return Err(Error::Parse(format!(
                "{}: expected {} rows, found {rows}",
                csv_path.display(),
                nt * np
            )));
        }
        Ok(PhaseTable {
            header,
            grid,
            phi,
            grad,
            hess,
            potential: None,
        })
    }

    /// Bitwise equality of all stored values.
    pub fn same_values(&self, other: &PhaseTable) -> bool {
        let eq = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| {
                    x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
                })
        };
        self.header == other.header && eq(&self.phi, &other.phi) && eq(&self.grad, &other.grad) && eq(&self.hess, &other.hess)
    }
}

impl Modifier for PhaseTable {
    fn label(&self) -> String {
        "hj".into()
    }

    fn grid(&self) -> MomentumGrid {
        self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        let (s, e) = (self.schedule().start(), self.schedule().end());
        match self.header.sign {
            Sign::Plus => (s, e),
            Sign::Minus => (-e, -s),
        }
    }

    fn phase(&self, t: f64) -> Result<Vec<f64>> {
        let vals = self.table_phase(t)?;
        Ok(self.scatter(&vals, 1, |xi, _| t * free_symbol(xi)))
    }

    fn cook_symbol(&self, t: f64) -> Result<Vec<f64>> {
        let potential = self
            .potential
            .as_ref()
            .ok_or_else(|| Error::Precondition("phase table has no potential attached for V(d_xi Phi)".into()))?;
        let d = self.header.dim;
        let pos = self.table_position(t)?;
        let vals: Vec<f64> = pos
            .par_chunks(d)
            .map(|x| potential.value(x))
            .collect::<Result<_>>()?;
        let mut out = vec![0.0; self.grid.len()];
        for (i, &k) in self.header.points.iter().enumerate() {
            out[k] = vals[i];
        }
        Ok(out)
    }

    fn position(&self, t: f64) -> Result<Vec<f64>> {
        let vals = self.table_position(t)?;
        let d = self.header.dim;
        Ok(self.scatter(&vals, d, |xi, j| -xi[j].sin() * t))
    }
}
