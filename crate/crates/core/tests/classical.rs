use std::f64::consts::PI;

use modwave::classical::{
    asymptotic_momentum, escape_constants, integrate_flow, region_escape_probe, sample_region,
    uniform_times, variational_probe, FlowParams, PhasePoint, Region, Sign, StepGrowth,
};
use modwave::fit::loglog_slope;
use modwave::lattice::{ContinuumPotential, EnergyWindow, Potential, PotentialSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn power(c: f64, mu: f64, d: usize) -> Potential {
    Potential::new(PotentialSpec::power(c, mu).unwrap(), d).unwrap()
}

/// Classical RK4 for the same vector field, written independently of the library.
fn rk4(pot: &dyn ContinuumPotential, x0: &[f64], xi0: &[f64], t_end: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let d = x0.len();
    let field = |y: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; d];
        pot.gradient(&y[..d], &mut g).unwrap();
        let mut out = vec![0.0; 2 * d];
        for j in 0..d {
            out[j] = -y[d + j].sin();
            out[d + j] = -g[j];
        }
        out
    };
    let mut y: Vec<f64> = x0.iter().chain(xi0).copied().collect();
    let n = (t_end / h).round() as usize;
    for _ in 0..n {
        let k1 = field(&y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
        let k2 = field(&y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
        let k3 = field(&y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
        let k4 = field(&y4);
        for i in 0..2 * d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (y[..d].to_vec(), y[d..].to_vec())
}

#[test]
fn matches_step_halved_reference() {
    let pot = power(0.2, 0.5, 1);
    let start = PhasePoint::new(vec![10.0], vec![PI / 2.0]).unwrap();
    let traj = integrate_flow(&pot, &start, &FlowParams::default(), &[0.0, 100.0], None).unwrap();
    let (xa, ka) = rk4(&pot, &[10.0], &[PI / 2.0], 100.0, 2e-3);
    let (xb, kb) = rk4(&pot, &[10.0], &[PI / 2.0], 100.0, 1e-3);
    // Richardson for an order-4 scheme
    let x_ref = xb[0] + (xb[0] - xa[0]) / 15.0;
    let k_ref = kb[0] + (kb[0] - ka[0]) / 15.0;
    let ex = (traj.x[1][0] - x_ref).abs();
    let ek = (traj.xi[1][0] - k_ref).abs();
    assert!(ex <= 1e-8 && ek <= 1e-8, "x err {ex:e}, xi err {ek:e}");
}

#[test]
fn time_reversal_recovers_start() {
    let pot = power(0.5, 0.6, 2);
    let start = PhasePoint::new(vec![3.0, -4.0], vec![-1.0, 2.0]).unwrap();
    let p = FlowParams::default();
    let fwd = integrate_flow(&pot, &start, &p, &[0.0, 200.0], None).unwrap();
    let end = PhasePoint::new(fwd.x[1].clone(), fwd.xi[1].clone()).unwrap();
    let back = integrate_flow(&pot, &end, &p, &[0.0, -200.0], None).unwrap();
    let back_pt = back.point(1);
    for j in 0..2 {
        assert!((back_pt.x()[j] - start.x()[j]).abs() <= 1e-9);
        let dk = modwave::smooth::wrap_angle(back_pt.xi()[j] - start.xi()[j]);
        assert!(dk.abs() <= 1e-9);
    }
}

#[test]
fn escape_bound_and_energy_drift() {
    for (d, lo, hi) in [(1usize, 0.3, 0.7), (2, 0.4, 0.8)] {
        let pot = power(0.5, 0.5, d);
        let w = EnergyWindow::with_auto_margin(d, lo, hi).unwrap();
        let k = escape_constants(&w, &pot, 1e7).unwrap();
        let region = Region::new(w, k.r0, Sign::Plus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17 + d as u64);
        let starts = sample_region(&mut rng, &region, &pot, 100).unwrap();
        let mut worst_res: f64 = 0.0;
        let mut worst_drift: f64 = 0.0;
        for s in &starts {
            let rep = region_escape_probe(&pot, s, &region, &k, &FlowParams::default(), 200.0, 1e-2).unwrap();
            assert!(rep.bound_holds, "escape bound fails: {rep:?}");
            assert!(rep.monotone);
            worst_res = worst_res.max(rep.identity_residual);
            let t = integrate_flow(&pot, s, &FlowParams::default(), &uniform_times(200.0, 20), None).unwrap();
            worst_drift = worst_drift.max(t.max_drift());
        }
        assert!(worst_res <= 1e-4, "identity residual {worst_res:e}");
        assert!(worst_drift <= 1e-8, "drift {worst_drift:e}");
    }
}

#[test]
fn free_escape_case() {
    let pot = power(0.0, 1.0, 1);
    let w = EnergyWindow::new(1, -0.5, 0.5, 0.2).unwrap();
    let k = escape_constants(&w, &pot, 1e3).unwrap();
    let region = Region::new(w, 5.0, Sign::Plus).unwrap();
    let start = PhasePoint::new(vec![5.0], vec![-PI / 2.0]).unwrap();
    let rep = region_escape_probe(&pot, &start, &region, &k, &FlowParams::default(), 50.0, 1e-2).unwrap();
    assert!(rep.bound_holds && rep.identity_residual < 1e-6, "{rep:?}");
}

#[test]
fn outside_region_is_rejected() {
    let pot = power(0.5, 0.5, 1);
    let w = EnergyWindow::with_auto_margin(1, 0.3, 0.7).unwrap();
    let k = escape_constants(&w, &pot, 1e7).unwrap();
    let region = Region::new(w, k.r0, Sign::Plus).unwrap();
    // moving inward
    let start = PhasePoint::new(vec![2.0 * k.r0], vec![PI / 3.0]).unwrap();
    let r = region_escape_probe(&pot, &start, &region, &k, &FlowParams::default(), 10.0, 1e-2);
    assert!(matches!(r, Err(modwave::Error::Precondition(_))));
}

fn long_params() -> FlowParams {
    FlowParams {
        step: 1e-2,
        growth: Some(StepGrowth {
            time_scale: 10.0,
            max_step: 1e4,
        }),
        ..FlowParams::default()
    }
}

fn geometric(t0: f64, t1: f64, per_octave: usize) -> Vec<f64> {
    let n = ((t1 / t0).log2() * per_octave as f64).round() as usize;
    let mut v = vec![0.0];
    v.extend((0..=n).map(|i| t0 * 2f64.powf(i as f64 / per_octave as f64)));
    v
}

#[test]
fn momentum_rates() {
    for (mu, d, c) in [(0.5, 1usize, 0.3), (0.8, 1, 0.3), (0.8, 2, 0.3)] {
        let pot = power(c, mu, d);
        let (lo, hi) = if d == 1 { (0.3, 0.7) } else { (0.4, 0.8) };
        let w = EnergyWindow::with_auto_margin(d, lo, hi).unwrap();
        let k = escape_constants(&w, &pot, 1e7).unwrap();
        let xi0: Vec<f64> = if d == 1 { vec![-1.2] } else { vec![-1.0, -1.4] };
        let dir = modwave::lattice::symbols::velocity_vec(&xi0);
        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x0: Vec<f64> = dir.iter().map(|v| k.r0.max(1.0) * v / n).collect();
        let start = PhasePoint::new(x0, xi0).unwrap();
        let t_end = 1.0e7;
        let traj = integrate_flow(&pot, &start, &long_params(), &geometric(1.0, t_end, 8), None).unwrap();
        let rep = asymptotic_momentum(&traj, mu, (t_end / 100.0, t_end / 8.0)).unwrap();
        eprintln!("mu {mu} d {d} R0 {:.3}: xi slope {:?} x slope {:?}", k.r0, rep.xi_slope, rep.x_slope);
        assert!((rep.xi_slope.unwrap() + mu).abs() <= 0.15);
        assert!((rep.x_slope.unwrap() - (1.0 - mu)).abs() <= 0.15);
    }
}

#[test]
fn derivative_scaling_in_r() {
    let mu = 0.5;
    let pot = power(1.0, mu, 1);
    let w = EnergyWindow::with_auto_margin(1, 0.3, 0.7).unwrap();
    let k = escape_constants(&w, &pot, 1e7).unwrap();
    let times = uniform_times(200.0, 200);
    let mut rs = Vec::new();
    let mut sups = Vec::new();
    for m in [1.0, 2.0, 4.0] {
        let r = m * k.r0;
        let region = Region::new(w, r, Sign::Plus).unwrap();
        let start = PhasePoint::new(vec![r], vec![-1.2]).unwrap();
        let rep = variational_probe(&pot, &start, &region, &FlowParams::default(), &times, 1e-5).unwrap();
        assert!(rep.displacement_rate <= 1.0);
        rs.push(r);
        sups.push(rep.dxi_dy);
    }
    let fit = loglog_slope(&rs, &sups).unwrap();
    eprintln!("R0 {} sups {sups:?} slope {}", k.r0, fit.slope);
    assert!((fit.slope + 1.0 + mu).abs() <= 0.3);
}

#[test]
fn free_variational_is_identity() {
    let pot = power(0.0, 1.0, 2);
    let w = EnergyWindow::new(2, 0.4, 0.8, 0.2).unwrap();
    let region = Region::new(w, 1.0, Sign::Plus).unwrap();
    let xi0 = vec![-1.0, -1.4];
    let start = PhasePoint::new(vec![3.0, 3.0], xi0).unwrap();
    let rep = variational_probe(&pot, &start, &region, &FlowParams::default(), &uniform_times(50.0, 10), 1e-5).unwrap();
    assert_eq!(rep.dxi_dy, 0.0);
    assert!(rep.dxi_deta_deviation < 1e-9);
}
