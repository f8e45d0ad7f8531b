use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use modwave::classical::Sign;
use modwave::hj::{DollardPhase, FreeModifier, Schedule};
use modwave::lattice::{build_wavepacket, EnergyWindow, LatticeBox, LatticeField, PacketSpec, Potential, PotentialSpec};
use modwave::quantum::{Hamiltonian, Propagator, PropagatorConfig};
use modwave::waveop::{
    approximant, cook_series, intertwining_defect, modifier_gauge, phase_aligned_distance, WaveOpContext,
};
use modwave::Error;

struct Setup {
    ctx: WaveOpContext,
    windowed: LatticeField,
    support: Vec<usize>,
    spec: PotentialSpec,
}

fn setup(spec: PotentialSpec, l: usize, margin: usize) -> Setup {
    let bx = LatticeBox::new(1, l).unwrap();
    let prop = Propagator::new(Hamiltonian::new(bx, &spec).unwrap(), PropagatorConfig::default()).unwrap();
    let ctx = WaveOpContext::new(prop, margin).unwrap();
    let window = EnergyWindow::with_auto_margin(1, 0.3, 0.7).unwrap();
    let packet = PacketSpec::new(vec![PI / 3.0], 0.15);
    let phi = build_wavepacket(&ctx.fourier, &packet, &window).unwrap();
    let windowed = ctx.window(&window, &phi, false).unwrap();
    let support = packet.support(ctx.fourier.grid());
    Setup { ctx, windowed, support, spec }
}

const TIMES: [f64; 4] = [6.25, 12.5, 25.0, 50.0];

#[test]
fn free_wave_operator_is_the_identity_without_potential() {
    let s = setup(PotentialSpec::zero(), 512, 64);
    let free = FreeModifier::new(s.ctx.fourier.grid());
    for sign in [Sign::Plus, Sign::Minus] {
        let w = approximant(&s.ctx, &free, &s.windowed, sign, &TIMES).unwrap();
        for st in &w.states {
            assert!(st.distance(&s.windowed).unwrap() < 1e-10);
        }
        assert!(w.max_isometry_error() < 1e-10);
        assert!(w.doubling_increments().unwrap().iter().all(|c| c.increment < 1e-10));
    }
}

#[test]
fn cook_integrand_vanishes_without_potential() {
    let s = setup(PotentialSpec::zero(), 512, 64);
    let free = FreeModifier::new(s.ctx.fourier.grid());
    let cook = cook_series(&s.ctx, &free, &s.windowed, Sign::Plus, &TIMES, (6.0, 50.0), Some(0.0), 0.15).unwrap();
    assert!(cook.g.iter().all(|g| *g == 0.0));
    assert_eq!(cook.integral, 0.0);
    assert!(cook.fit.slope.is_none());
}

#[test]
fn dollard_and_free_agree_without_potential() {
    let s = setup(PotentialSpec::zero(), 512, 64);
    let grid = s.ctx.fourier.grid();
    let zero = Arc::new(Potential::new(PotentialSpec::zero(), 1).unwrap());
    let sched = Schedule::geometric(25.0 / 16.0, 50.0, 4).unwrap();
    let dollard = DollardPhase::new(zero, grid, &sched, Sign::Plus).unwrap();
    let free = FreeModifier::new(grid);
    let g = modifier_gauge(&s.ctx, &free, &dollard, &s.windowed, &s.support, Sign::Plus, &[12.5, 25.0, 50.0]).unwrap();
    assert!(g.phase_increments.iter().all(|(_, v)| *v < 1e-12));
    assert!(g.phase_spread.abs() < 1e-12);
    assert!(g.residual.iter().all(|r| *r < 1e-10));
}

#[test]
fn cauchy_increments_respect_the_cook_bound() {
    // Short range (decay 2): the unmodified limit exists and each doubling
    // increment is bounded by the Cook integral over the same interval.
    let s = setup(PotentialSpec::power(0.05, 2.0).unwrap(), 512, 64);
    let free = FreeModifier::new(s.ctx.fourier.grid());
    let times: Vec<f64> = Schedule::geometric(25.0 / 16.0, 50.0, 4)
        .unwrap()
        .main_times()
        .into_iter()
        .filter(|t| *t > 0.0)
        .collect();
    let w = approximant(&s.ctx, &free, &s.windowed, Sign::Plus, &[12.5, 25.0, 50.0]).unwrap();
    let cook = cook_series(&s.ctx, &free, &s.windowed, Sign::Plus, &times, (6.0, 50.0), None, 0.15).unwrap();
    let inc = w.doubling_increments().unwrap();
    assert_eq!(inc.len(), 2);
    for (c, bound, ok) in cook.consistent_with(&inc, 1e-9) {
        assert!(ok, "increment {} on [{}, {}] above Cook bound {:?}", c.increment, c.t1, c.t2, bound);
    }
    assert!(inc[1].increment < inc[0].increment);
    assert!(w.max_isometry_error() < 1e-10);
    assert!(s.spec.decay() == Some(2.0));
}

#[test]
fn intertwining_defect_is_small_for_short_range() {
    let s = setup(PotentialSpec::power(0.05, 2.0).unwrap(), 512, 64);
    let free = FreeModifier::new(s.ctx.fourier.grid());
    let d = intertwining_defect(&s.ctx, &free, &s.windowed, Sign::Plus, &[12.5, 50.0], 1.0).unwrap();
    assert!(d[1].1 < d[0].1, "{d:?}");
    assert!(d[1].1 < 1e-2, "{d:?}");
}

#[test]
fn aligned_distance_removes_a_global_phase() {
    let s = setup(PotentialSpec::zero(), 64, 8);
    let a = &s.windowed;
    let b = a.scaled(Complex64::from_polar(1.0, 0.7));
    let (c, dist) = phase_aligned_distance(a, &b).unwrap();
    assert!(dist < 1e-12);
    assert!((Complex64::from_polar(1.0, c) * Complex64::from_polar(1.0, 0.7) - 1.0).norm() < 1e-12);
}

#[test]
fn too_small_box_is_refused_at_the_boundary() {
    let s = setup(PotentialSpec::zero(), 64, 8);
    let free = FreeModifier::new(s.ctx.fourier.grid());
    let e = approximant(&s.ctx, &free, &s.windowed, Sign::Plus, &[200.0]).unwrap_err();
    assert!(matches!(e, Error::BoundaryBreach { .. }), "{e}");
    assert!(approximant(&s.ctx, &free, &s.windowed, Sign::Plus, &[-1.0]).is_err());
}

#[test]
fn margin_must_fit_inside_the_box() {
    let bx = LatticeBox::new(1, 16).unwrap();
    let make = || Propagator::new(Hamiltonian::new(bx, &PotentialSpec::zero()).unwrap(), PropagatorConfig::default()).unwrap();
    assert!(WaveOpContext::new(make(), 0).is_err());
    assert!(WaveOpContext::new(make(), 16).is_err());
    assert!(WaveOpContext::new(make(), 15).is_ok());
}
