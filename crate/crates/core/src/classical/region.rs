use rand::Rng;
use serde::{Deserialize, Serialize};

use super::flow::{integrate_flow, FlowParams, PhasePoint};
use crate::error::{Error, Result};
use crate::extension::sphere_directions;
use crate::lattice::symbols::{speed_squared, velocity_vec};
use crate::lattice::{free_symbol, ContinuumPotential, EnergyWindow};

/// Outgoing (`+`, forward time) or incoming (`-`, backward time).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `Omega_+-(I, R) = {p(x, xi) in I, |x| >= R, +-x . v(xi) >= 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub window: EnergyWindow,
    pub radius: f64,
    pub sign: Sign,
}

impl Region {
    pub fn new(window: EnergyWindow, radius: f64, sign: Sign) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("region radius must be positive (got {radius})")));
        }
        Ok(Region {
            window,
            radius,
            sign,
        })
    }

    pub fn contains(&self, p: &PhasePoint, potential: &dyn ContinuumPotential) -> Result<bool> {
        let r = norm(p.x());
        let v = velocity_vec(p.xi());
        let xv: f64 = p.x().iter().zip(&v).map(|(a, b)| a * b).sum();
        Ok(self.window.contains(p.energy(potential)?)
            && r >= self.radius
            && self.sign.factor() * xv >= 0.0)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Constants of the escape estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeConstants {
    /// `dist(I, T) / 2`.
    pub delta0: f64,
    /// `min(inf{k : p0 in I + [-delta0, delta0]} / 2, delta0)`.
    pub delta: f64,
    /// Smallest radius with `|V|, |x . grad V| <= delta` beyond it.
    pub r0: f64,
    /// The grid infimum of `k` used for `delta`.
    pub min_speed_squared: f64,
}

fn sweep_points_per_axis(d: usize) -> usize {
    match d {
        1 => 20_001,
        2 => 1_201,
        _ => 161,
    }
}

/// Infimum of `k` over `{p0 in [lo, hi]}` by a uniform torus sweep.
pub fn min_speed_on_energy_band(d: usize, lo: f64, hi: f64) -> f64 {
    let m = sweep_points_per_axis(d);
    let total = m.pow(d as u32);
    let mut xi = vec![0.0; d];
    let mut best = f64::INFINITY;
    for flat in 0..total {
        let mut rest = flat;
        for c in xi.iter_mut() {
            *c = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (rest % m) as f64 / (m - 1) as f64;
            rest /= m;
        }
        let e = free_symbol(&xi);
        if e >= lo && e <= hi {
            best = best.min(speed_squared(&xi));
        }
    }
    best
}

/// `max(|V(x)|, |x . grad V(x)|)` maximised over the sphere `|x| = r`.
fn radial_profile(potential: &dyn ContinuumPotential, dirs: &[Vec<f64>], r: f64) -> Result<f64> {
    let d = potential.dim();
    let mut g = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut best: f64 = 0.0;
    for dir in dirs {
        for j in 0..d {
            x[j] = r * dir[j];
        }
        let v = potential.value(&x)?;
        potential.gradient(&x, &mut g)?;
        let xg: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
        best = best.max(v.abs()).max(xg.abs());
    }
    Ok(best)
}

/// Compute `delta0`, `delta` and `R0` for a window and potential.
///
/// `R0` comes from a logarithmic radial sweep up to `max_radius` (the tail
/// supremum is taken over the sweep) refined by bisection.
pub fn escape_constants(
    window: &EnergyWindow,
    potential: &dyn ContinuumPotential,
    max_radius: f64,
) -> Result<EscapeConstants> {
    let d = window.dim();
    let delta0 = 0.5 * window.distance_to_thresholds();
    let kmin = min_speed_on_energy_band(d, window.lower() - delta0, window.upper() + delta0);
    if !(kmin > 0.0) {
        return Err(Error::ThresholdOverlap("speed vanishes on the enlarged shell".into()));
    }
    let delta = (0.5 * kmin).min(delta0);
    let dirs = sphere_directions(d);
    let mut radii = vec![0.0];
    let mut r = 0.25;
    while r < max_radius {
        radii.push(r);
        r *= 2f64.powf(1.0 / 16.0);
    }
    radii.push(max_radius);
    let prof: Vec<f64> = radii
        .iter()
        .map(|r| radial_profile(potential, &dirs, *r))
        .collect::<Result<_>>()?;
    let mut tail = vec![0.0; prof.len()];
    let mut acc: f64 = 0.0;
    for i in (0..prof.len()).rev() {
        acc = acc.max(prof[i]);
        tail[i] = acc;
    }
    let i = tail.iter().position(|s| *s <= delta).ok_or_else(|| {
        Error::Precondition(format!(
            "|V| and |x . grad V| stay above delta = {delta} up to radius {max_radius}"
        ))
    })?;
    let r0 = if i == 0 {
        0.0
    } else {
        let (mut lo, mut hi) = (radii[i - 1], radii[i]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if radial_profile(potential, &dirs, mid)?.max(tail[i]) <= delta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(EscapeConstants {
        delta0,
        delta,
        r0,
        min_speed_squared: kmin,
    })
}

/// Result of the escape-bound probe along one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeReport {
    /// `|x(t)|^2 >= |x0|^2 + delta t^2` at every sample.
    pub bound_holds: bool,
    /// `min_t (|x(t)|^2 - |x0|^2 - delta t^2)`.
    pub min_margin: f64,
    /// Max deviation of the second difference of `|x|^2` from `2k - 2 x . Hess(p0) grad V`.
    pub identity_residual: f64,
    /// `+-d|x|^2/dt >= 0` at every sample.
    pub monotone: bool,
}

/// Integrate from `start` over `[0, +-horizon]` at spacing `sample` and test the escape bound.
pub fn region_escape_probe(
    potential: &dyn ContinuumPotential,
    start: &PhasePoint,
    region: &Region,
    constants: &EscapeConstants,
    params: &FlowParams,
    horizon: f64,
    sample: f64,
) -> Result<EscapeReport> {
    if region.radius < constants.r0 || !region.contains(start, potential)? {
        return Err(Error::Precondition(format!(
            "start {:?} is not in the region (R = {}, R0 = {})",
            start, region.radius, constants.r0
        )));
    }
    let s = region.sign.factor();
    let n = (horizon / sample).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| s * sample * i as f64).collect();
    let traj = integrate_flow(potential, start, params, &times, None)?;
    let d = start.dim();
    let r2: Vec<f64> = traj.x.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
    let mut min_margin = f64::INFINITY;
    let mut monotone = true;
    let mut residual: f64 = 0.0;
    let mut g = vec![0.0; d];
    for i in 0..traj.len() {
        let t = traj.times[i];
        min_margin = min_margin.min(r2[i] - r2[0] - constants.delta * t * t);
        let v = velocity_vec(&traj.xi[i]);
        let xv: f64 = traj.x[i].iter().zip(&v).map(|(a, b)| a * b).sum();
        if s * xv < -1e-12 {
            monotone = false;
        }
        if i > 0 && i + 1 < traj.len() {
            let fd = (r2[i + 1] - 2.0 * r2[i] + r2[i - 1]) / (sample * sample);
            potential.gradient(&traj.x[i], &mut g)?;
            let exact = 2.0 * speed_squared(&traj.xi[i])
                + 2.0
                    * (0..d)
                        .map(|j| traj.x[i][j] * traj.xi[i][j].cos() * g[j])
                        .sum::<f64>();
            residual = residual.max((fd - exact).abs());
        }
    }
    Ok(EscapeReport {
        // relative slack for roundoff in |x|^2
        bound_holds: min_margin >= -1e-9 * r2[0].max(1.0),
        min_margin,
        identity_residual: residual,
        monotone,
    })
}

/// Rejection-sample `count` starts in `Omega_+-(I, R)` with `R <= |x| <= 2R`.
pub fn sample_region<R: Rng>(
    rng: &mut R,
    region: &Region,
    potential: &dyn ContinuumPotential,
    count: usize,
) -> Result<Vec<PhasePoint>> {
    let d = region.window.dim();
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 10_000_000 {
            return Err(Error::Precondition("region sampling failed to find starts".into()));
        }
        let mut dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&dir);
        if !(n > 1e-3 && n <= 1.0) {
            continue;
        }
        let r = region.radius * rng.gen_range(1.0..2.0);
        dir.iter_mut().for_each(|c| *c *= r / n);
        let xi: Vec<f64> = (0..d)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let p = PhasePoint::new(dir, xi)?;
        if region.contains(&p, potential)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// Sup-norm estimates of first derivatives of the flow with respect to initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalReport {
    /// `sup_t max_{jk} |d xi_j(t) / d y_k|`.
    pub dxi_dy: f64,
    /// `sup_t max_{jk} |d xi_j(t) / d eta_k|`.
    pub dxi_deta: f64,
    /// `sup_t max_{jk} |d xi_j(t) / d eta_k - delta_jk|`.
    pub dxi_deta_deviation: f64,
    /// `sup_t |x(t) - y| / (1 + |t|)`.
    pub displacement_rate: f64,
}

/// Central-difference derivatives of the flow at `start` over `times`.
///
/// Positions are perturbed by `rel_step * max(1, |y|)`, momenta by `rel_step`.
pub fn variational_probe(
    potential: &dyn ContinuumPotential,
    start: &PhasePoint,
    region: &Region,
    params: &FlowParams,
    times: &[f64],
    rel_step: f64,
) -> Result<VariationalReport> {
    if !region.contains(start, potential)? {
        return Err(Error::Precondition("variational start is not in the region".into()));
    }
    let d = start.dim();
    let hy = rel_step * norm(start.x()).max(1.0);
    let he = rel_step;
    if !(hy > 1e-12 && he > 1e-12) {
        return Err(Error::NonConvergent(format!("perturbation step {rel_step} underflows")));
    }
    // the base run fixes the accepted step for all perturbed runs
    let base = integrate_flow(potential, start, params, times, None)?;
    let fixed = FlowParams {
        step: base.step,
        max_halvings: 0,
        ..*params
    };
    let run = |x: Vec<f64>, xi: Vec<f64>| -> Result<Vec<Vec<f64>>> {
        let p = PhasePoint::new(x, xi.clone())?;
        let mut t = integrate_flow(potential, &p, &fixed, times, None)?;
        // undo the torus reduction of the perturbed start so differences are continuous
        for row in t.xi.iter_mut() {
            for j in 0..d {
                row[j] += xi[j] - p.xi()[j];
            }
        }
        Ok(t.xi)
    };
    let mut dxi_dy: f64 = 0.0;
    let mut dxi_deta: f64 = 0.0;
    let mut dev: f64 = 0.0;
    for k in 0..d {
        let mut xp = start.x().to_vec();
        let mut xm = start.x().to_vec();
        xp[k] += hy;
        xm[k] -= hy;
        let a = run(xp, start.xi().to_vec())?;
        let b = run(xm, start.xi().to_vec())?;
        let mut ep = start.xi().to_vec();
        let mut em = start.xi().to_vec();
        ep[k] += he;
        em[k] -= he;
        let c = run(start.x().to_vec(), ep)?;
        let e = run(start.x().to_vec(), em)?;
        for i in 0..times.len() {
            for j in 0..d {
                let dy = (a[i][j] - b[i][j]) / (2.0 * hy);
                let de = (c[i][j] - e[i][j]) / (2.0 * he);
                let id = if j == k { 1.0 } else { 0.0 };
                dxi_dy = dxi_dy.max(dy.abs());
                dxi_deta = dxi_deta.max(de.abs());
                dev = dev.max((de - id).abs());
            }
        }
    }
    let mut rate: f64 = 0.0;
    for i in 0..base.len() {
        let disp: f64 = base.x[i]
            .iter()
            .zip(start.x())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        rate = rate.max(disp / (1.0 + base.times[i].abs()));
    }
    Ok(VariationalReport {
        dxi_dy,
        dxi_deta,
        dxi_deta_deviation: dev,
        displacement_rate: rate,
    })
}
