//! Modified wave-operator approximants `W(T) = e^{iTH} e^{-i Phi(T, D)} E_I(H0)` and
//! their convergence diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::Sign;
use crate::error::{Error, Result};
use crate::hj::{Modifier, SlopeEntry};
use crate::lattice::{spectral_window, EnergyWindow, Fourier, LatticeField, Multiplier};
use crate::quantum::{apply_modifier, boundary_mass, free_propagate, Propagator};

/// Shared numerical context: transform, full propagator, boundary-mass margin.
pub struct WaveOpContext {
    pub fourier: Fourier,
    pub propagator: Propagator,
    pub margin: usize,
}

impl WaveOpContext {
    pub fn new(propagator: Propagator, margin: usize) -> Result<Self> {
        let bx = propagator.hamiltonian().lattice_box();
        if margin == 0 || margin >= bx.half_width() {
            return Err(Error::InvalidInput(format!(
                "boundary margin {margin} must lie in 1..{}",
                bx.half_width()
            )));
        }
        Ok(WaveOpContext {
            fourier: Fourier::new(bx),
            propagator,
            margin,
        })
    }

    fn threshold(&self) -> f64 {
        self.propagator.config().boundary_threshold
    }

    fn certify(&self, u: &LatticeField, time: f64) -> Result<f64> {
        let mass = boundary_mass(u, self.margin);
        if mass > self.threshold() {
            return Err(Error::BoundaryBreach {
                mass,
                threshold: self.threshold(),
                time,
            });
        }
        Ok(mass)
    }

    /// `E_I(H0) phi` with the smoothed (or sharp) spectral cutoff.
    pub fn window(&self, window: &EnergyWindow, phi: &LatticeField, sharp: bool) -> Result<LatticeField> {
        let m = spectral_window(window, self.fourier.grid(), sharp)?;
        self.fourier.apply_multiplier(&m, phi)
    }

    /// `e^{-i Phi(t, D)} phi`, certified against the boundary.
    pub fn modified(&self, modifier: &dyn Modifier, phi: &LatticeField, t: f64) -> Result<(LatticeField, f64)> {
        let u = apply_modifier(&self.fourier, phi, modifier, t)?;
        let mass = self.certify(&u, t)?;
        Ok((u, mass))
    }

    /// `W(t) phi = e^{itH} e^{-i Phi(t, D)} phi` with the larger of the two boundary masses.
    pub fn apply_w(&self, modifier: &dyn Modifier, phi: &LatticeField, t: f64) -> Result<(LatticeField, f64)> {
        let (u, m1) = self.modified(modifier, phi, t)?;
        let w = self.propagator.propagate(&u, -t)?;
        let m2 = self.certify(&w, t)?;
        Ok((w, m1.max(m2)))
    }
}

/// Cached approximant states on a schedule.
#[derive(Clone, Debug)]
pub struct WaveOpApproximant {
    pub sign: Sign,
    pub modifier: String,
    /// Signed times `T_m`.
    pub times: Vec<f64>,
    pub states: Vec<LatticeField>,
    pub windowed_norm: f64,
    pub isometry_error: Vec<f64>,
    pub boundary_mass: Vec<f64>,
}

/// One Cauchy increment `||W(t2) phi - W(t1) phi||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyIncrement {
    pub t1: f64,
    pub t2: f64,
    pub increment: f64,
}

/// Build `W(T_m) phi` for the windowed state `phi = E_I phi0`. `times` are magnitudes.
pub fn approximant(
    ctx: &WaveOpContext,
    modifier: &dyn Modifier,
    windowed: &LatticeField,
    sign: Sign,
    times: &[f64],
) -> Result<WaveOpApproximant> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidInput("approximant times are magnitudes >= 0".into()));
    }
    let norm = windowed.norm();
    let mut out = WaveOpApproximant {
        sign,
        modifier: modifier.label(),
        times: Vec::new(),
        states: Vec::new(),
        windowed_norm: norm,
        isometry_error: Vec::new(),
        boundary_mass: Vec::new(),
    };
    for &tau in times {
        let t = sign.factor() * tau;
        let (w, mass) = ctx.apply_w(modifier, windowed, t)?;
        out.isometry_error.push((w.norm() - norm).abs());
        out.boundary_mass.push(mass);
        out.times.push(t);
        out.states.push(w);
    }
    Ok(out)
}

impl WaveOpApproximant {
    pub fn state_at(&self, t: f64) -> Option<&LatticeField> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|i| &self.states[i])
    }

    /// Increments between each time and its double, when both are cached.
    pub fn doubling_increments(&self) -> Result<Vec<CauchyIncrement>> {
        let mut out = Vec::new();
        for (i, &t) in self.times.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            if let Some(w2) = self.state_at(2.0 * t) {
                out.push(CauchyIncrement {
                    t1: t,
                    t2: 2.0 * t,
                    increment: self.states[i].distance(w2)?,
                });
            }
        }
        Ok(out)
    }

    /// Successive ratios `inc(2T, 4T) / inc(T, 2T)`.
    pub fn doubling_ratios(&self) -> Result<Vec<f64>> {
        let inc = self.doubling_increments()?;
        Ok(inc
            .windows(2)
            .filter(|w| (w[1].t1 - w[0].t2).abs() <= 1e-12 * w[0].t2.abs())
            .map(|w| w[1].increment / w[0].increment)
            .collect())
    }

    pub fn max_isometry_error(&self) -> f64 {
        self.isometry_error.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_boundary_mass(&self) -> f64 {
        self.boundary_mass.iter().cloned().fold(0.0, f64::max)
    }
}

/// Cook integrand series with its fitted decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CookDiagnostics {
    pub times: Vec<f64>,
    pub g: Vec<f64>,
    pub fit: SlopeEntry,
    /// Trapezoid integral of `g` over the schedule.
    pub integral: f64,
    /// `int_{T_end}^inf g` from the fitted power law; `None` unless the fit is integrable.
    pub tail: Option<f64>,
    pub boundary_mass: Vec<f64>,
}

/// `g(t) = ||(V(x) - V_Phi(t, D)) e^{-i Phi(t, D)} phi||` on `times` (magnitudes).
///
/// `V_Phi` is the modifier's Cook symbol, e.g. `V(d_xi Phi)` for HJ tables and
/// zero for the unmodified evolution.
pub fn cook_series(
    ctx: &WaveOpContext,
    modifier: &dyn Modifier,
    phi: &LatticeField,
    sign: Sign,
    times: &[f64],
    fit_window: (f64, f64),
    target: Option<f64>,
    tolerance: f64,
) -> Result<CookDiagnostics> {
    let v = ctx.propagator.hamiltonian().potential();
    let mut g = Vec::with_capacity(times.len());
    let mut masses = Vec::with_capacity(times.len());
    for &tau in times {
        let t = sign.factor() * tau;
        let (u, mass) = ctx.modified(modifier, phi, t)?;
        let symbol = modifier.cook_symbol(t)?;
        let b = if symbol.iter().all(|s| *s == 0.0) {
            None
        } else {
            Some(ctx.fourier.apply_multiplier(&Multiplier::real(ctx.fourier.grid(), &symbol)?, &u)?)
        };
        let s: f64 = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let a = v[i] * z;
                let diff = match &b {
                    Some(b) => a - b.values()[i],
                    None => a,
                };
                diff.norm_sqr()
            })
            .sum();
        g.push(s.sqrt());
        masses.push(mass);
    }
    let integral = times
        .windows(2)
        .zip(g.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum();
    let fit = SlopeEntry::fit("cook", times, &g, fit_window, target, tolerance);
    let tail = match (fit.slope, times.last(), g.last()) {
        (Some(p), Some(&t), Some(&gt)) if p < -1.0 => Some(gt * t / (-p - 1.0)),
        _ => None,
    };
    Ok(CookDiagnostics {
        times: times.to_vec(),
        g,
        fit,
        integral,
        tail,
        boundary_mass: masses,
    })
}

impl CookDiagnostics {
    /// Trapezoid `int_{t1}^{t2} g` over schedule nodes (both must be nodes).
    pub fn integral_between(&self, t1: f64, t2: f64) -> Option<f64> {
        let find = |t: f64| self.times.iter().position(|s| (s - t).abs() <= 1e-12 * t.max(1.0));
        let (a, b) = (find(t1)?, find(t2)?);
        Some(
            (a..b)
                .map(|i| 0.5 * (self.times[i + 1] - self.times[i]) * (self.g[i] + self.g[i + 1]))
                .sum(),
        )
    }

    /// Cook-Kuroda consistency: each increment is at most the integral of `g` plus `slack`.
    pub fn consistent_with(&self, increments: &[CauchyIncrement], slack: f64) -> Vec<(CauchyIncrement, Option<f64>, bool)> {
        increments
            .iter()
            .map(|inc| {
                let bound = self.integral_between(inc.t1.abs(), inc.t2.abs());
                let ok = bound.map_or(false, |b| inc.increment <= b + slack);
                (*inc, bound, ok)
            })
            .collect()
    }
}

/// `||e^{-isH} W(T) phi - W(T) e^{-isH0} phi||` at each `T`.
pub fn intertwining_defect(
    ctx: &WaveOpContext,
    modifier: &dyn Modifier,
    windowed: &LatticeField,
    sign: Sign,
    times: &[f64],
    s: f64,
) -> Result<Vec<(f64, f64)>> {
    let shifted = free_propagate(&ctx.fourier, windowed, s)?;
    let a = approximant(ctx, modifier, windowed, sign, times)?;
    let b = approximant(ctx, modifier, &shifted, sign, times)?;
    if a.times != b.times {
        return Err(Error::InvalidInput("schedule mismatch between the paired runs".into()));
    }
    a.states
        .iter()
        .zip(&b.states)
        .zip(&a.times)
        .map(|((wa, wb), t)| {
            let lhs = ctx.propagator.propagate(wa, s)?;
            Ok((*t, lhs.distance(wb)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveReport {
    pub times: Vec<f64>,
    /// Mass outside `G_t(D')` relative to the total.
    pub outside_mass: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub region_size: Vec<usize>,
    pub sup_fit: SlopeEntry,
    /// `c1` in `|G_t| ~ c1 t^d`, fitted at the reference time.
    pub c1: f64,
    /// `|G_t| / (c1 t^d)`.
    pub size_ratio: Vec<f64>,
}

/// Sites within distance `dilation` (Euclidean, ties inside) of the image of `support`
/// under `xi -> d_xi Phi(t, xi)`. Gaps between images of neighbouring grid points
/// are bridged by adding their half-spacing to the radius.
fn image_region(ctx: &WaveOpContext, position: &[f64], support: &[usize], dilation: f64) -> Vec<bool> {
    let bx = ctx.fourier.lattice_box();
    let d = bx.dim();
    let pts: Vec<&[f64]> = support.iter().map(|&k| &position[k * d..(k + 1) * d]).collect();
    // largest image spacing between grid neighbours in the support
    let set: std::collections::HashMap<usize, usize> = support.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut gap: f64 = 0.0;
    for (i, &k) in support.iter().enumerate() {
        let site = bx.site_vec(k);
        for j in 0..d {
            let mut n = site.clone();
            n[j] += 1;
            if let Some(q) = bx.index(&n).and_then(|q| set.get(&q)) {
                let dist: f64 = pts[i].iter().zip(pts[*q]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                gap = gap.max(dist);
            }
        }
    }
    let radius = dilation + 0.5 * gap;
    let l = bx.half_width() as i64;
    let mut inside = vec![false; bx.len()];
    let r = radius.ceil() as i64;
    for p in &pts {
        let lo: Vec<i64> = p.iter().map(|c| (c.floor() as i64 - r).max(-l)).collect();
        let hi: Vec<i64> = p.iter().map(|c| (c.ceil() as i64 + r).min(l)).collect();
        let mut n = lo.clone();
        'outer: loop {
            let dist2: f64 = n.iter().zip(p.iter()).map(|(a, b)| (*a as f64 - b).powi(2)).sum();
            if dist2 <= radius * radius + 1e-9 {
                if let Some(idx) = bx.index(&n) {
                    inside[idx] = true;
                }
            }
            for j in 0..d {
                if n[j] < hi[j] {
                    n[j] += 1;
                    continue 'outer;
                }
                n[j] = lo[j];
            }
            break;
        }
    }
    inside
}

/// Dispersive profile of `e^{-i Phi(t, D)} phi` on `times` (magnitudes > 0).
pub fn dispersive_profile(
    ctx: &WaveOpContext,
    modifier: &dyn Modifier,
    phi: &LatticeField,
    support: &[usize],
    sign: Sign,
    times: &[f64],
    dilation: f64,
    fit_window: (f64, f64),
    reference_time: f64,
) -> Result<DispersiveReport> {
    let d = ctx.fourier.lattice_box().dim();
    if support.is_empty() {
        return Err(Error::Precondition("packet support is empty".into()));
    }
    let total = phi.norm_sqr();
    let mut outside = Vec::new();
    let mut sup = Vec::new();
    let mut size = Vec::new();
    for &tau in times {
        let t = sign.factor() * tau;
        let (u, _) = ctx.modified(modifier, phi, t)?;
        let pos = modifier.position(t)?;
        let region = image_region(ctx, &pos, support, dilation);
        let out: f64 = u
            .values()
            .iter()
            .zip(&region)
            .filter(|(_, r)| !**r)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        outside.push(out / total);
        sup.push(u.sup_norm());
        size.push(region.iter().filter(|r| **r).count());
    }
    let r = times
        .iter()
        .position(|t| (t - reference_time).abs() <= 1e-12 * reference_time.max(1.0))
        .ok_or_else(|| Error::InvalidInput(format!("reference time {reference_time} not in the schedule")))?;
    let c1 = size[r] as f64 / reference_time.powi(d as i32);
    let ratio = times
        .iter()
        .zip(&size)
        .map(|(t, s)| *s as f64 / (c1 * t.powi(d as i32)))
        .collect();
    Ok(DispersiveReport {
        times: times.to_vec(),
        outside_mass: outside,
        sup_fit: SlopeEntry::fit("sup_norm", times, &sup, fit_window, Some(-0.5 * d as f64), 0.1),
        sup_norm: sup,
        region_size: size,
        c1,
        size_ratio: ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub times: Vec<f64>,
    /// `sup_{supp} |(Psi - Phi)(2T) - (Psi - Phi)(T)|` as `(T, value)`.
    pub phase_increments: Vec<(f64, f64)>,
    /// `(Psi - Phi)(T_max, xi)` on the support.
    pub stabilized_phase: Vec<f64>,
    /// `||W^Phi(T) phi - W^Psi(T) G_inf phi||` with `G_inf = e^{i (Psi - Phi)(T_max, D)}`.
    pub residual: Vec<f64>,
    /// Mean of the stabilized phase over the support.
    pub mean_phase: f64,
    /// Spread `max - min` of the stabilized phase over the support.
    pub phase_spread: f64,
}

/// Compare two modifiers on the same windowed packet.
pub fn modifier_gauge(
    ctx: &WaveOpContext,
    phi_mod: &dyn Modifier,
    psi_mod: &dyn Modifier,
    windowed: &LatticeField,
    support: &[usize],
    sign: Sign,
    times: &[f64],
) -> Result<GaugeReport> {
    let signed: Vec<f64> = times.iter().map(|t| sign.factor() * t).collect();
    let diffs: Vec<Vec<f64>> = signed
        .iter()
        .map(|&t| -> Result<Vec<f64>> {
            let a = phi_mod.phase(t)?;
            let b = psi_mod.phase(t)?;
            Ok(support.iter().map(|&k| b[k] - a[k]).collect())
        })
        .collect::<Result<_>>()?;
    let mut inc = Vec::new();
    for (i, &t) in signed.iter().enumerate() {
        if let Some(j) = signed.iter().position(|s| t != 0.0 && (s - 2.0 * t).abs() <= 1e-12 * t.abs()) {
            let v = diffs[i].iter().zip(&diffs[j]).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
            inc.push((t, v));
        }
    }
    let last = diffs.last().cloned().unwrap_or_default();
    let grid = ctx.fourier.grid();
    let mut full = vec![0.0; grid.len()];
    for (&k, p) in support.iter().zip(&last) {
        full[k] = *p;
    }
    // e^{+i (Psi - Phi)}: Multiplier::phase applies e^{-i phase}
    let neg: Vec<f64> = full.iter().map(|p| -p).collect();
    let twisted = ctx.fourier.apply_multiplier(&Multiplier::phase(grid, &neg)?, windowed)?;
    let mut residual = Vec::new();
    for &t in &signed {
        let (wa, _) = ctx.apply_w(phi_mod, windowed, t)?;
        let (wb, _) = ctx.apply_w(psi_mod, &twisted, t)?;
        residual.push(wa.distance(&wb)?);
    }
    let mean = last.iter().sum::<f64>() / last.len().max(1) as f64;
    let spread = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - last.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GaugeReport {
        times: signed,
        phase_increments: inc,
        stabilized_phase: last,
        residual,
        mean_phase: mean,
        phase_spread: spread,
    })
}

/// Global phase `c` minimising `||a - e^{ic} b||`, and the aligned distance.
pub fn phase_aligned_distance(a: &LatticeField, b: &LatticeField) -> Result<(f64, f64)> {
    let ip = b.inner(a)?;
    let c = ip.arg();
    let aligned = b.scaled(Complex64::from_polar(1.0, c));
    Ok((c, a.distance(&aligned)?))
}
