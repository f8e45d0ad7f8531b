use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{free_symbol, ContinuumPotential};
use crate::smooth::wrap_angle;

/// Point of `R^d x T^d`; `xi` is stored reduced to `[-pi, pi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    x: Vec<f64>,
    xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() || x.is_empty() {
            return Err(Error::SizeMismatch {
                expected: x.len(),
                got: xi.len(),
            });
        }
        if x.iter().chain(&xi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("phase point has non-finite entries".into()));
        }
        let xi = xi.into_iter().map(wrap_angle).collect();
        Ok(PhasePoint { x, xi })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `p(x, xi) = p0(xi) + V(x)`.
    pub fn energy(&self, potential: &dyn ContinuumPotential) -> Result<f64> {
        Ok(free_symbol(&self.xi) + potential.value(&self.x)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Kick-drift-kick leapfrog, order 2.
    Leapfrog,
    /// Triple-jump composition of leapfrog, order 4.
    #[default]
    Yoshida4,
}

/// Step growth `h(t) = min(max_step, h0 (1 + |t| / time_scale))` for long horizons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepGrowth {
    pub time_scale: f64,
    pub max_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub step: f64,
    pub integrator: Integrator,
    pub drift_tolerance: f64,
    pub max_halvings: u32,
    pub growth: Option<StepGrowth>,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            step: 1e-2,
            integrator: Integrator::Yoshida4,
            drift_tolerance: 1e-8,
            max_halvings: 6,
            growth: None,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.drift_tolerance > 0.0) {
            return Err(Error::InvalidInput(
                "flow step and drift tolerance must be positive".into(),
            ));
        }
        if let Some(g) = self.growth {
            if !(g.time_scale > 0.0 && g.max_step >= self.step) {
                return Err(Error::InvalidInput(format!("invalid step growth {g:?}")));
            }
        }
        Ok(())
    }

    fn step_at(&self, base: f64, t: f64) -> f64 {
        match self.growth {
            None => base,
            Some(g) => {
                let scale = g.max_step / self.step;
                (base * (1.0 + t.abs() / g.time_scale)).min(base * scale)
            }
        }
    }
}

/// Time-sampled solution of the Hamilton equations.
///
/// `xi` is recorded unwrapped (continuous in time); use [`Trajectory::point`]
/// for reduced phase points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub action: Option<Vec<f64>>,
    /// Base step actually accepted after any halvings.
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> PhasePoint {
        PhasePoint::new(self.x[i].clone(), self.xi[i].clone()).expect("finite trajectory sample")
    }

    pub fn max_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `t, x_1..x_d, xi_1..xi_d, energy` (reduced `xi`).
    pub fn to_csv(&self) -> String {
        let d = self.x.first().map_or(0, |v| v.len());
        let mut out = String::from("t");
        for j in 1..=d {
            out.push_str(&format!(",x_{j}"));
        }
        for j in 1..=d {
            out.push_str(&format!(",xi_{j}"));
        }
        out.push_str(",energy\n");
        for i in 0..self.len() {
            out.push_str(&format!("{:.16e}", self.times[i]));
            for v in &self.x[i] {
                out.push_str(&format!(",{v:.16e}"));
            }
            for v in &self.xi[i] {
                out.push_str(&format!(",{:.16e}", wrap_angle(*v)));
            }
            out.push_str(&format!(",{:.16e}\n", self.energy[i]));
        }
        out
    }
}

const YOSHIDA_W1: f64 = 1.351_207_191_959_657_6; // 1 / (2 - 2^(1/3))
const YOSHIDA_W0: f64 = -1.702_414_383_919_315_3; // 1 - 2 w1

struct State<'a> {
    potential: &'a dyn ContinuumPotential,
    x: Vec<f64>,
    xi: Vec<f64>,
    action: Option<f64>,
    grad: Vec<f64>,
    value: f64,
}

impl<'a> State<'a> {
    fn new(potential: &'a dyn ContinuumPotential, x: &[f64], xi: &[f64], action: Option<f64>) -> Result<Self> {
        let mut s = State {
            potential,
            x: x.to_vec(),
            xi: xi.to_vec(),
            action,
            grad: vec![0.0; x.len()],
            value: 0.0,
        };
        s.refresh()?;
        Ok(s)
    }

    fn refresh(&mut self) -> Result<()> {
        self.potential.gradient(&self.x, &mut self.grad)?;
        if self.action.is_some() {
            self.value = self.potential.value(&self.x)?;
        }
        Ok(())
    }

    /// `xi -= tau grad V(x)`; action gains `tau (V - x . grad V)`.
    fn kick(&mut self, tau: f64) {
        if let Some(u) = self.action.as_mut() {
            let xg: f64 = self.x.iter().zip(&self.grad).map(|(a, b)| a * b).sum();
            *u += tau * (self.value - xg);
        }
        for (k, g) in self.xi.iter_mut().zip(&self.grad) {
            *k -= tau * g;
        }
    }

    /// `x += tau v(xi)`; action gains `tau p0(xi)`.
    fn drift(&mut self, tau: f64) -> Result<()> {
        if let Some(u) = self.action.as_mut() {
            *u += tau * free_symbol(&self.xi);
        }
        for (x, k) in self.x.iter_mut().zip(&self.xi) {
            *x -= tau * k.sin();
        }
        self.refresh()
    }

    fn leapfrog(&mut self, tau: f64) -> Result<()> {
        self.kick(0.5 * tau);
        self.drift(tau)?;
        self.kick(0.5 * tau);
        Ok(())
    }

    fn step(&mut self, integrator: Integrator, tau: f64) -> Result<()> {
        match integrator {
            Integrator::Leapfrog => self.leapfrog(tau),
            Integrator::Yoshida4 => {
                self.kick(0.5 * YOSHIDA_W1 * tau);
                self.drift(YOSHIDA_W1 * tau)?;
                self.kick(0.5 * (YOSHIDA_W1 + YOSHIDA_W0) * tau);
                self.drift(YOSHIDA_W0 * tau)?;
                self.kick(0.5 * (YOSHIDA_W1 + YOSHIDA_W0) * tau);
                self.drift(YOSHIDA_W1 * tau)?;
                self.kick(0.5 * YOSHIDA_W1 * tau);
                Ok(())
            }
        }
    }

    fn energy(&self) -> Result<f64> {
        let v = if self.action.is_some() {
            self.value
        } else {
            self.potential.value(&self.x)?
        };
        Ok(free_symbol(&self.xi) + v)
    }
}

/// Integrate `x' = v(xi) = grad p0(xi)`, `xi' = -grad V(x)` from `t = 0` and sample at `times`.
///
/// `times` must be monotone and share one sign (backward integration for
/// negative times). When `action` is given, the augmented variable
/// `u' = p(x, xi) - x . grad V(x)` is carried along from that initial value.
/// On energy drift above tolerance the base step is halved and the whole
/// trajectory recomputed, up to `max_halvings` times.
pub fn integrate_flow(
    potential: &dyn ContinuumPotential,
    start: &PhasePoint,
    params: &FlowParams,
    times: &[f64],
    action: Option<f64>,
) -> Result<Trajectory> {
    params.validate()?;
    if start.dim() != potential.dim() {
        return Err(Error::SizeMismatch {
            expected: potential.dim(),
            got: start.dim(),
        });
    }
    check_times(times)?;
    let mut step = params.step;
    let mut last_drift = 0.0;
    for _ in 0..=params.max_halvings {
        match run(potential, start, params, times, action, step)? {
            Ok(traj) => return Ok(traj),
            Err(drift) => {
                last_drift = drift;
                step *= 0.5;
            }
        }
    }
    Err(Error::EnergyDrift {
        drift: last_drift,
        tolerance: params.drift_tolerance,
        halvings: params.max_halvings as usize,
    })
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("sample times must be finite and non-empty".into()));
    }
    let forward = times.iter().all(|t| *t >= 0.0);
    let backward = times.iter().all(|t| *t <= 0.0);
    if !(forward || backward) {
        return Err(Error::InvalidInput("sample times must share one sign".into()));
    }
    let monotone = times.windows(2).all(|w| {
        if forward {
            w[1] >= w[0]
        } else {
            w[1] <= w[0]
        }
    });
    if !monotone {
        return Err(Error::InvalidInput("sample times must be monotone".into()));
    }
    Ok(())
}

/// Inner result `Err(drift)` signals a drift violation at this step size.
fn run(
    potential: &dyn ContinuumPotential,
    start: &PhasePoint,
    params: &FlowParams,
    times: &[f64],
    action: Option<f64>,
    base: f64,
) -> Result<std::result::Result<Trajectory, f64>> {
    let mut s = State::new(potential, start.x(), start.xi(), action)?;
    let e0 = s.energy()?;
    let mut t = 0.0f64;
    let n = times.len();
    let mut traj = Trajectory {
        times: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        xi: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
        action: action.map(|_| Vec::with_capacity(n)),
        step: base,
    };
    for &target in times {
        let span = target - t;
        if span != 0.0 {
            let h = params.step_at(base, t.abs().min(target.abs()));
            let substeps = (span.abs() / h).ceil().max(1.0) as usize;
            let tau = span / substeps as f64;
            for _ in 0..substeps {
                s.step(params.integrator, tau)?;
            }
            t = target;
        }
        let e = s.energy()?;
        if (e - e0).abs() > params.drift_tolerance || !e.is_finite() {
            return Ok(Err((e - e0).abs()));
        }
        traj.times.push(target);
        traj.x.push(s.x.clone());
        traj.xi.push(s.xi.clone());
        traj.energy.push(e);
        if let (Some(a), Some(u)) = (traj.action.as_mut(), s.action) {
            a.push(u);
        }
    }
    Ok(Ok(traj))
}

/// `n + 1` equally spaced times from 0 to `t_end`.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Potential, PotentialSpec};

    #[test]
    fn yoshida_constants() {
        let c = 2f64.powf(1.0 / 3.0);
        assert!((YOSHIDA_W1 - 1.0 / (2.0 - c)).abs() < 1e-15);
        assert!((YOSHIDA_W0 - (1.0 - 2.0 * YOSHIDA_W1)).abs() < 1e-15);
    }

    #[test]
    fn free_flow_is_exact() {
        let v0 = Potential::new(PotentialSpec::zero(), 2).unwrap();
        let start = PhasePoint::new(vec![1.0, -2.0], vec![0.7, -2.1]).unwrap();
        let traj = integrate_flow(&v0, &start, &FlowParams::default(), &uniform_times(50.0, 10), Some(0.0)).unwrap();
        let v = crate::lattice::symbols::velocity_vec(start.xi());
        for i in 0..traj.len() {
            let t = traj.times[i];
            for j in 0..2 {
                // exact up to rounding, which accumulates over t / h drift substeps
                let exact = start.x()[j] + t * v[j];
                let tol = 4.0 * f64::EPSILON * (t / 1e-2 + 1.0) * (1.0 + exact.abs());
                let err = (traj.x[i][j] - exact).abs();
                assert!(err <= tol, "t = {t}, axis {j}: {err:e} > {tol:e}");
                assert_eq!(traj.xi[i][j], start.xi()[j]);
            }
            let a = traj.action.as_ref().unwrap()[i];
            let exact = t * free_symbol(start.xi());
            let tol = 4.0 * f64::EPSILON * (t / 1e-2 + 1.0) * (1.0 + exact.abs());
            assert!((a - exact).abs() <= tol, "action at t = {t}: {a} vs {exact}");
        }
    }

    #[test]
    fn drift_violation_is_reported() {
        let v = Potential::new(PotentialSpec::power(5.0, 1.0).unwrap(), 1).unwrap();
        let start = PhasePoint::new(vec![0.5], vec![1.0]).unwrap();
        let params = FlowParams {
            step: 2.0,
            drift_tolerance: 1e-14,
            max_halvings: 1,
            ..FlowParams::default()
        };
        let r = integrate_flow(&v, &start, &params, &uniform_times(20.0, 4), None);
        assert!(matches!(r, Err(Error::EnergyDrift { .. })));
    }

    #[test]
    fn rejects_mixed_sign_times() {
        let v = Potential::new(PotentialSpec::zero(), 1).unwrap();
        let start = PhasePoint::new(vec![0.0], vec![1.0]).unwrap();
        assert!(integrate_flow(&v, &start, &FlowParams::default(), &[0.0, 1.0, -1.0], None).is_err());
    }
}
