use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fd::fornberg;
use super::table::PhaseTable;
use super::Modifier;
use crate::error::{Error, Result};
use crate::fit::loglog_slope_window;
use crate::lattice::symbols::{hessian_diag, velocity_vec};
use crate::lattice::{free_symbol, ContinuumPotential};
use crate::linalg;

/// One fitted rate with its target. `slope` is `None` when the fit had too little range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    pub name: String,
    pub target: Option<f64>,
    pub tolerance: f64,
    pub slope: Option<f64>,
    pub note: Option<String>,
    /// One-sided check `slope <= target + tolerance` instead of `|slope - target| <= tolerance`.
    #[serde(default)]
    pub at_most: bool,
}

impl SlopeEntry {
    pub fn fit(name: &str, ts: &[f64], ys: &[f64], window: (f64, f64), target: Option<f64>, tolerance: f64) -> Self {
        let (slope, note) = match loglog_slope_window(ts, ys, window.0, window.1) {
            Ok(f) => (Some(f.slope), None),
            Err(Error::InsufficientRange(m)) => (None, Some(format!("insufficient range: {m}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        SlopeEntry {
            name: name.into(),
            target,
            tolerance,
            slope,
            note,
            at_most: false,
        }
    }

    pub fn one_sided(mut self) -> Self {
        self.at_most = true;
        self
    }

    /// `None` when there is nothing to judge.
    pub fn passes(&self) -> Option<bool> {
        let (s, t) = (self.slope?, self.target?);
        Some(if self.at_most { s <= t + self.tolerance } else { (s - t).abs() <= self.tolerance })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    /// Positive main times (signed as the table's queries).
    pub times: Vec<f64>,
    /// `sup_k |dPhi/dt - p(d_xi Phi, xi_k)|` at times with companions, `(t, residual)`.
    pub hj_residual: Vec<(f64, f64)>,
    pub max_hj_residual: f64,
    /// `sup |finite-difference d_xi Phi - stored fan position|` over interior points.
    pub construction_error: f64,
    pub max_newton_residual: f64,
    pub image_energy: (f64, f64),
    /// `sup |Phi - t p0|` over `{p0 in I}`.
    pub phase_growth: Vec<f64>,
    /// `sup |Phi - Phi(0) - t p0|`.
    pub phase_growth_normalized: Vec<f64>,
    pub position_growth: Vec<f64>,
    pub position_growth_normalized: Vec<f64>,
    /// `sup |det Hess(Phi / t) - prod(-cos xi_j)|`.
    pub hessian_deviation: Vec<f64>,
    /// Same with `Phi - Phi(0)`.
    pub hessian_deviation_normalized: Vec<f64>,
    /// Leave-one-out error of the time interpolation of `Phi` (twice the node spacing).
    pub interpolation_error: f64,
    pub slopes: Vec<SlopeEntry>,
}

/// Certify a phase table: HJ residual, construction identity, growth and Hessian rates.
///
/// Rates are fitted over main times in `fit_window`; targets follow from `mu` when given.
pub fn phase_diagnostics(
    table: &PhaseTable,
    potential: &dyn ContinuumPotential,
    mu: Option<f64>,
    fit_window: (f64, f64),
) -> Result<PhaseReport> {
    let h = table.header();
    let d = h.dim;
    let grid = table.grid();
    let sched = table.schedule();
    let s = h.sign.factor();
    let pts = table.points();
    let np = pts.len();
    let xis: Vec<Vec<f64>> = pts.iter().map(|&k| grid.point_vec(k)).collect();
    let core: Vec<usize> = (0..np).filter(|&i| (h.lower..=h.upper).contains(&free_symbol(&xis[i]))).collect();
    if core.is_empty() {
        return Err(Error::Precondition("phase table has no points in I".into()));
    }
    let mains = sched.main_indices().to_vec();
    let m0 = mains[0];
    if sched.times()[m0] != 0.0 {
        return Err(Error::Precondition("schedule must start at t = 0 for normalized rates".into()));
    }

    // HJ residual by central differences between companions
    let mut hj = Vec::new();
    for (pos, &m) in mains.iter().enumerate() {
        if !sched.has_companions(pos) {
            continue;
        }
        let (tm, tp) = (sched.times()[m - 1], sched.times()[m + 1]);
        let (phm, _, _) = table.at_index(m - 1);
        let (php, _, _) = table.at_index(m + 1);
        let (_, grad, _) = table.at_index(m);
        let r = core
            .par_iter()
            .map(|&i| -> Result<f64> {
                let dphi = s * (php[i] - phm[i]) / (tp - tm);
                let v = potential.value(&grad[i * d..(i + 1) * d])?;
                Ok((dphi - free_symbol(&xis[i]) - v).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        hj.push((s * sched.times()[m], r));
    }
    if hj.is_empty() {
        return Err(Error::Precondition("schedule has no companion times for the HJ residual".into()));
    }

    // construction identity: 7-point differences of Phi along each axis
    let bx = grid.lattice_box();
    let lookup: HashMap<usize, usize> = pts.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let hstep = grid.spacing();
    let w = fornberg(0.0, &[-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0], 1)[1].clone();
    let stencils: Vec<(usize, usize, [usize; 7])> = (0..np)
        .flat_map(|i| {
            let site = bx.site_vec(pts[i]);
            (0..d).filter_map({
                let lookup = &lookup;
                move |j| {
                    let mut idx = [0usize; 7];
                    for (q, off) in (-3i64..=3).enumerate() {
                        let mut n = site.clone();
                        n[j] += off;
                        idx[q] = *lookup.get(&bx.index(&n)?)?;
                    }
                    Some((i, j, idx))
                }
            })
            .collect::<Vec<_>>()
        })
        .collect();
    let mut construction: f64 = 0.0;
    for &m in &mains {
        let (phi, grad, _) = table.at_index(m);
        for (i, j, idx) in &stencils {
            let fd: f64 = idx.iter().zip(&w).map(|(q, c)| c * phi[*q]).sum::<f64>() / hstep;
            construction = construction.max((fd - grad[i * d + j]).abs());
        }
    }

    // growth and Hessian rates on main times t > 0
    let (phi0, grad0, hess0) = table.at_index(m0);
    let mut times = Vec::new();
    let mut pg = Vec::new();
    let mut pgn = Vec::new();
    let mut xg = Vec::new();
    let mut xgn = Vec::new();
    let mut hd = Vec::new();
    let mut hdn = Vec::new();
    for &m in mains.iter().skip(1) {
        let tau = sched.times()[m];
        let t = s * tau;
        let (phi, grad, hess) = table.at_index(m);
        let mut acc = [0.0f64; 6];
        for &i in &core {
            let xi = &xis[i];
            let p0 = free_symbol(xi);
            let v = velocity_vec(xi);
            acc[0] = acc[0].max((phi[i] - t * p0).abs());
            acc[1] = acc[1].max((phi[i] - phi0[i] - t * p0).abs());
            for j in 0..d {
                acc[2] = acc[2].max((grad[i * d + j] - t * v[j]).abs());
                acc[3] = acc[3].max((grad[i * d + j] - grad0[i * d + j] - t * v[j]).abs());
            }
            let target: f64 = hessian_diag(xi).iter().product();
            let hm = &hess[i * d * d..(i + 1) * d * d];
            let h0 = &hess0[i * d * d..(i + 1) * d * d];
            let raw: Vec<f64> = hm.iter().map(|x| x / t).collect();
            let nrm: Vec<f64> = hm.iter().zip(h0).map(|(x, y)| (x - y) / t).collect();
            acc[4] = acc[4].max((linalg::det(&raw, d) - target).abs());
            acc[5] = acc[5].max((linalg::det(&nrm, d) - target).abs());
        }
        times.push(tau);
        pg.push(acc[0]);
        pgn.push(acc[1]);
        xg.push(acc[2]);
        xgn.push(acc[3]);
        hd.push(acc[4]);
        hdn.push(acc[5]);
    }

    let interp = table.interpolation_error()?;

    let growth = mu.map(|m| 1.0 - m);
    let slopes = vec![
        SlopeEntry::fit("phase_growth", &times, &pg, fit_window, None, 0.15),
        SlopeEntry::fit("phase_growth_normalized", &times, &pgn, fit_window, growth, 0.15),
        SlopeEntry::fit("position_growth", &times, &xg, fit_window, None, 0.15),
        SlopeEntry::fit("position_growth_normalized", &times, &xgn, fit_window, growth, 0.15),
        SlopeEntry::fit("hessian_deviation", &times, &hd, fit_window, None, 0.3),
        SlopeEntry::fit("hessian_deviation_normalized", &times, &hdn, fit_window, mu.map(|m| -m), 0.3),
    ];
    Ok(PhaseReport {
        times: times.iter().map(|t| s * t).collect(),
        max_hj_residual: hj.iter().map(|p| p.1).fold(0.0, f64::max),
        hj_residual: hj,
        construction_error: construction,
        max_newton_residual: h.max_newton_residual,
        image_energy: (h.min_image_energy, h.max_image_energy),
        phase_growth: pg,
        phase_growth_normalized: pgn,
        position_growth: xg,
        position_growth_normalized: xgn,
        hessian_deviation: hd,
        hessian_deviation_normalized: hdn,
        interpolation_error: interp,
        slopes,
    })
}
