use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use modwave::hj::{FreeModifier, Modifier, ShiftedModifier};
use modwave::lattice::symbols::velocity_vec;
use modwave::lattice::*;
use modwave::quantum::*;
use modwave::Error;

fn packet(l: usize, xi0: f64, width: f64) -> (Fourier, LatticeField) {
    let f = Fourier::new(LatticeBox::new(1, l).unwrap());
    let w = EnergyWindow::with_auto_margin(1, 0.3, 0.7).unwrap();
    let u = build_wavepacket(&f, &PacketSpec::new(vec![xi0], width), &w).unwrap();
    (f, u)
}

fn random_field(b: LatticeBox, seed: u64) -> LatticeField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..b.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    LatticeField::new(b, vals).unwrap().normalized().unwrap()
}

#[test]
fn free_evolution_basics() {
    let b = LatticeBox::new(1, 40).unwrap();
    let f = Fourier::new(b);
    let u = random_field(b, 1);
    assert_eq!(free_propagate(&f, &u, 0.0).unwrap(), u);
    let a = free_propagate(&f, &free_propagate(&f, &u, 1.3).unwrap(), 2.1).unwrap();
    let c = free_propagate(&f, &u, 3.4).unwrap();
    assert!(a.distance(&c).unwrap() < 1e-13);
    assert!((c.norm() - 1.0).abs() < 1e-13);
    // a grid plane wave is an eigenvector
    let k = 7;
    let xi = f.grid().axis_value(k);
    let wave = LatticeField::from_fn(b, |n| Complex64::from_polar(1.0, n[0] as f64 * xi));
    let t = 2.7;
    let out = free_propagate(&f, &wave, t).unwrap();
    let expect = wave.scaled(Complex64::from_polar(1.0, -t * xi.cos()));
    assert!(out.distance(&expect).unwrap() < 1e-11);
}

#[test]
fn packet_centroid_drifts_at_group_velocity() {
    let (f, u) = packet(512, PI / 3.0, 0.15);
    let v = velocity_vec(&[PI / 3.0])[0];
    let ts: Vec<f64> = (0..=10).map(|i| 5.0 * i as f64).collect();
    let xs: Vec<f64> = ts.iter().map(|t| free_propagate(&f, &u, *t).unwrap().centroid()[0]).collect();
    let fit = modwave::fit::linear_fit(&ts, &xs).unwrap();
    assert!(((fit.slope - v) / v).abs() < 0.02, "{} vs {v}", fit.slope);
}

#[test]
fn chebyshev_reduces_to_free_evolution() {
    let b = LatticeBox::new(1, 64).unwrap();
    let f = Fourier::new(b);
    let u = random_field(b, 2);
    let p = Propagator::new(Hamiltonian::new(b, &PotentialSpec::zero()).unwrap(), PropagatorConfig::default()).unwrap();
    for t in [0.5, 10.0, 37.5, -12.0] {
        let a = p.propagate(&u, t).unwrap();
        let c = free_propagate(&f, &u, t).unwrap();
        assert!(a.distance(&c).unwrap() < 1e-10, "t = {t}");
    }
}

fn dense_exp(h: &Hamiltonian, t: f64) -> DMatrix<Complex64> {
    let b = h.lattice_box();
    let n = b.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[i] = Complex64::new(1.0, 0.0);
        let col = h.apply(&LatticeField::new(b, e).unwrap()).unwrap();
        for (r, z) in col.values().iter().enumerate() {
            m[(r, i)] = z.re;
        }
    }
    let eig = SymmetricEigen::new(m);
    let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -t * l)));
    &q * d * q.transpose()
}

#[test]
fn chebyshev_matches_dense_exponential() {
    let b = LatticeBox::new(1, 32).unwrap();
    let h = Hamiltonian::new(b, &PotentialSpec::power(1.0, 1.0).unwrap()).unwrap();
    let p = Propagator::new(h.clone(), PropagatorConfig::default()).unwrap();
    let u = random_field(b, 3);
    let exact = dense_exp(&h, 10.0) * nalgebra::DVector::from_vec(u.values().to_vec());
    let got = p.propagate(&u, 10.0).unwrap();
    let err = got
        .values()
        .iter()
        .zip(exact.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn chebyshev_unitarity_group_law_and_reversal() {
    let (_, u) = packet(2048, PI / 3.0, 0.15);
    let b = u.lattice_box();
    let p = Propagator::new(Hamiltonian::new(b, &PotentialSpec::power(0.02, 0.6).unwrap()).unwrap(), PropagatorConfig::default()).unwrap();
    let (w, mass) = p.propagate_certified(&u, 200.0, 512).unwrap();
    assert!((w.norm() - 1.0).abs() <= 1e-9);
    assert!(mass <= 1e-8);
    let small = random_field(LatticeBox::new(1, 50).unwrap(), 4);
    let q = Propagator::new(
        Hamiltonian::new(small.lattice_box(), &PotentialSpec::power(0.5, 0.6).unwrap()).unwrap(),
        PropagatorConfig::default(),
    )
    .unwrap();
    let a = q.propagate(&q.propagate(&small, 7.0).unwrap(), 5.5).unwrap();
    let c = q.propagate(&small, 12.5).unwrap();
    assert!(a.distance(&c).unwrap() < 1e-10);
    // conj(e^{-itH} conj u) = e^{itH} u
    let lhs = q.propagate(&small.conj(), 9.0).unwrap().conj();
    let rhs = q.propagate(&small, -9.0).unwrap();
    assert!(lhs.distance(&rhs).unwrap() < 1e-10);
}

#[test]
fn propagator_rejects_narrow_spectrum_bound() {
    let b = LatticeBox::new(1, 10).unwrap();
    let h = Hamiltonian::new(b, &PotentialSpec::power(1.0, 1.0).unwrap()).unwrap();
    let cfg = PropagatorConfig {
        half_width: Some(1.5),
        ..Default::default()
    };
    assert!(matches!(Propagator::new(h, cfg), Err(Error::Chebyshev(_))));
}

#[test]
fn boundary_mass_cases() {
    let (f, u) = packet(2048, PI / 3.0, 0.15);
    assert!(boundary_mass(&u, 512) <= 1e-12);
    // horizon L / (2 max|v|) with max|v| = 1
    let w = free_propagate(&f, &u, 1024.0).unwrap();
    assert!(boundary_mass(&w, 8) <= 1e-8, "{}", boundary_mass(&w, 8));
    let b = u.lattice_box();
    let edge = LatticeField::from_fn(b, |n| {
        if n[0].abs() == 2048 {
            Complex64::new(0.5, 0.5)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    assert!((boundary_mass(&edge, 1) - edge.norm_sqr()).abs() < 1e-15);
}

#[test]
fn modifier_application() {
    let (f, u) = packet(128, PI / 3.0, 0.15);
    let free: Arc<dyn Modifier> = Arc::new(FreeModifier::new(f.grid()));
    let a = apply_modifier(&f, &u, free.as_ref(), 6.0).unwrap();
    assert_eq!(a, free_propagate(&f, &u, 6.0).unwrap());
    assert!((a.norm() - 1.0).abs() < 1e-12);
    let c = 0.8;
    let shifted = ShiftedModifier::new(free, c);
    let s = apply_modifier(&f, &u, &shifted, 6.0).unwrap();
    let aligned = s.scaled(Complex64::from_polar(1.0, c));
    assert!(aligned.distance(&a).unwrap() <= 1e-12);
}
