use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{LatticeField, MomentumField};
use super::grid::{LatticeBox, MomentumGrid};
use crate::error::{Error, Result};

/// Fourier multiplier: a complex function sampled on a [`MomentumGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier {
    grid: MomentumGrid,
    values: Vec<Complex64>,
}

impl Multiplier {
    pub fn new(grid: MomentumGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFiniteMultiplier(k));
        }
        Ok(Multiplier { grid, values })
    }

    pub fn from_fn<F>(grid: MomentumGrid, f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        Self::new(grid, grid.evaluate(f))
    }

    pub fn real(grid: MomentumGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn identity(grid: MomentumGrid) -> Self {
        Multiplier {
            grid,
            values: vec![Complex64::new(1.0, 0.0); grid.len()],
        }
    }

    /// `exp(-i phase)` pointwise.
    pub fn phase(grid: MomentumGrid, phase: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            phase.iter().map(|&p| Complex64::from_polar(1.0, -p)).collect(),
        )
    }

    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn product(&self, other: &Multiplier) -> Result<Multiplier> {
        if self.grid != other.grid {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                got: other.grid.len(),
            });
        }
        Ok(Multiplier {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

/// Discrete Fourier transform on a [`LatticeBox`].
///
/// Forward: `u_hat(xi_k) = (2 pi)^(-d/2) sum_n exp(-i n . xi_k) u[n]`.
/// Inverse: `u[n] = (2 pi)^(d/2) N^(-d) sum_k exp(i n . xi_k) u_hat(xi_k)`.
/// With the momentum norm weighted by `(2 pi / N)^d` both maps are unitary.
///
/// Internally each axis is rotated so that site `-L` and momentum `-L` map to
/// FFT slot `L + 1`; then the phase `exp(-i n xi_k)` is exactly the FFT twiddle.
pub struct Fourier {
    grid: MomentumGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(lattice_box: LatticeBox) -> Self {
        let mut planner = FftPlanner::new();
        let n = lattice_box.side();
        Fourier {
            grid: MomentumGrid::new(lattice_box),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn lattice_box(&self) -> LatticeBox {
        self.grid.lattice_box()
    }

    pub fn forward(&self, u: &LatticeField) -> Result<MomentumField> {
        self.check_box(u.lattice_box())?;
        let mut data = u.values().to_vec();
        self.transform(&mut data, false);
        let d = self.grid.dim() as i32;
        let s = (2.0 * PI).powf(-0.5 * d as f64);
        data.iter_mut().for_each(|z| *z *= s);
        MomentumField::new(self.grid, data)
    }

    pub fn inverse(&self, u: &MomentumField) -> Result<LatticeField> {
        if u.grid() != self.grid {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                got: u.grid().len(),
            });
        }
        let mut data = u.values().to_vec();
        self.transform(&mut data, true);
        let d = self.grid.dim() as f64;
        let s = (2.0 * PI).powf(0.5 * d) / (self.grid.len() as f64);
        data.iter_mut().for_each(|z| *z *= s);
        LatticeField::new(self.lattice_box(), data)
    }

    /// `F* (f . F u)`.
    pub fn apply_multiplier(&self, f: &Multiplier, u: &LatticeField) -> Result<LatticeField> {
        if f.grid() != self.grid {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                got: f.grid().len(),
            });
        }
        self.check_box(u.lattice_box())?;
        if let Some(k) = f.values().iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFiniteMultiplier(k));
        }
        let mut data = u.values().to_vec();
        self.transform(&mut data, false);
        // the (2 pi)^(-+d/2) factors cancel; only 1/N^d is left
        let s = 1.0 / self.grid.len() as f64;
        for (z, m) in data.iter_mut().zip(f.values()) {
            *z *= m * s;
        }
        self.transform(&mut data, true);
        LatticeField::new(self.lattice_box(), data)
    }

    /// Unnormalised multi-axis transform in storage order.
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let lb = self.lattice_box();
        let n = lb.side();
        let l = lb.half_width();
        let d = lb.dim();
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut lane = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for m in 0..n {
                        lane[(m + l + 1) % n] = data[base + m * stride];
                    }
                    fft.process_with_scratch(&mut lane, &mut scratch);
                    for m in 0..n {
                        data[base + m * stride] = lane[(m + l + 1) % n];
                    }
                }
            }
        }
    }

    fn check_box(&self, b: LatticeBox) -> Result<()> {
        if b != self.lattice_box() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                got: b.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::symbols::free_symbol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(b: LatticeBox, rng: &mut ChaCha8Rng) -> LatticeField {
        LatticeField::from_fn(b, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn delta_maps_to_constant() {
        for d in 1..=3 {
            let b = LatticeBox::new(d, 3).unwrap();
            let f = Fourier::new(b);
            let u = LatticeField::delta(b, &vec![0; d]).unwrap();
            let c = (2.0 * PI).powf(-(d as f64) / 2.0);
            for z in f.forward(&u).unwrap().values() {
                assert!((z - c).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_direct_sum() {
        let b = LatticeBox::new(2, 3).unwrap();
        let f = Fourier::new(b);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(b, &mut rng);
        let uh = f.forward(&u).unwrap();
        let g = f.grid();
        for k in [0usize, 5, 17, 48] {
            let xi = g.point_vec(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, z) in u.values().iter().enumerate() {
                let n = b.site_vec(i);
                let ph: f64 = n.iter().zip(&xi).map(|(a, b)| *a as f64 * b).sum();
                acc += z * Complex64::from_polar(1.0, -ph);
            }
            acc /= 2.0 * PI;
            assert!((acc - uh.values()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_and_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let b = LatticeBox::new(1 + trial % 3, 2 + trial % 5).unwrap();
            let f = Fourier::new(b);
            let u = random_field(b, &mut rng);
            let uh = f.forward(&u).unwrap();
            assert!((uh.norm() - u.norm()).abs() <= 1e-12 * u.norm());
            let back = f.inverse(&uh).unwrap();
            assert!(back.distance(&u).unwrap() <= 1e-12 * u.norm());
        }
    }

    #[test]
    fn multiplier_algebra() {
        let b = LatticeBox::new(1, 20).unwrap();
        let f = Fourier::new(b);
        let g = f.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(b, &mut rng);
        let id = Multiplier::identity(g);
        assert!(f.apply_multiplier(&id, &u).unwrap().distance(&u).unwrap() < 1e-12);
        let p0 = Multiplier::from_fn(g, |xi| Complex64::new(free_symbol(xi), 0.0)).unwrap();
        let p0sq = p0.product(&p0).unwrap();
        let twice = f.apply_multiplier(&p0, &f.apply_multiplier(&p0, &u).unwrap()).unwrap();
        let once = f.apply_multiplier(&p0sq, &u).unwrap();
        assert!(twice.distance(&once).unwrap() < 1e-12 * u.norm());
        let ph: Vec<f64> = g.evaluate(|xi| 3.7 * free_symbol(xi));
        let e = Multiplier::phase(g, &ph).unwrap();
        let w = f.apply_multiplier(&e, &u).unwrap();
        assert!((w.norm() - u.norm()).abs() < 1e-12 * u.norm());
    }

    #[test]
    fn rejects_non_finite() {
        let g = MomentumGrid::new(LatticeBox::new(1, 2).unwrap());
        let mut v = vec![Complex64::new(1.0, 0.0); 5];
        v[2] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(Multiplier::new(g, v), Err(Error::NonFiniteMultiplier(2))));
    }
}
