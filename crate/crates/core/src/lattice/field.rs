use num_complex::Complex64;

use super::grid::{LatticeBox, MomentumGrid};
use crate::error::{Error, Result};

/// Complex amplitude per site of a [`LatticeBox`]; the desk-scale stand-in for `l^2(Z^d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    lattice_box: LatticeBox,
    values: Vec<Complex64>,
}

impl LatticeField {
    pub fn new(lattice_box: LatticeBox, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != lattice_box.len() {
            return Err(Error::SizeMismatch {
                expected: lattice_box.len(),
                got: values.len(),
            });
        }
        Ok(LatticeField {
            lattice_box,
            values,
        })
    }

    pub fn zeros(lattice_box: LatticeBox) -> Self {
        LatticeField {
            lattice_box,
            values: vec![Complex64::new(0.0, 0.0); lattice_box.len()],
        }
    }

    /// Unit mass at one site.
    pub fn delta(lattice_box: LatticeBox, site: &[i64]) -> Result<Self> {
        let idx = lattice_box
            .index(site)
            .ok_or_else(|| Error::InvalidInput(format!("site {site:?} outside the box")))?;
        let mut f = Self::zeros(lattice_box);
        f.values[idx] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    pub fn from_fn<F: FnMut(&[i64]) -> Complex64>(lattice_box: LatticeBox, mut f: F) -> Self {
        let mut site = vec![0; lattice_box.dim()];
        let values = (0..lattice_box.len())
            .map(|i| {
                lattice_box.site(i, &mut site);
                f(&site)
            })
            .collect();
        LatticeField {
            lattice_box,
            values,
        }
    }

    pub fn lattice_box(&self) -> LatticeBox {
        self.lattice_box
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidInput("cannot normalise a zero field".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        LatticeField {
            lattice_box: self.lattice_box,
            values: self.values.iter().map(|z| z * s).collect(),
        }
    }

    /// `<self, other>`, antilinear in `self`.
    pub fn inner(&self, other: &LatticeField) -> Result<Complex64> {
        self.check_same_box(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn distance(&self, other: &LatticeField) -> Result<f64> {
        self.check_same_box(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn conj(&self) -> Self {
        LatticeField {
            lattice_box: self.lattice_box,
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Pointwise product with a real lattice function (multiplication operator).
    pub fn multiply_real(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.values.len() {
            return Err(Error::SizeMismatch {
                expected: self.values.len(),
                got: weights.len(),
            });
        }
        Ok(LatticeField {
            lattice_box: self.lattice_box,
            values: self
                .values
                .iter()
                .zip(weights)
                .map(|(z, w)| z * w)
                .collect(),
        })
    }

    /// Mean position `sum_n n |u[n]|^2 / ||u||^2`.
    pub fn centroid(&self) -> Vec<f64> {
        let d = self.lattice_box.dim();
        let mut acc = vec![0.0; d];
        let mut site = vec![0; d];
        let mut mass = 0.0;
        for (i, z) in self.values.iter().enumerate() {
            let w = z.norm_sqr();
            if w == 0.0 {
                continue;
            }
            self.lattice_box.site(i, &mut site);
            for j in 0..d {
                acc[j] += w * site[j] as f64;
            }
            mass += w;
        }
        acc.iter().map(|a| a / mass).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn check_same_box(&self, other: &LatticeField) -> Result<()> {
        if self.lattice_box != other.lattice_box {
            return Err(Error::SizeMismatch {
                expected: self.lattice_box.len(),
                got: other.lattice_box.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Sub for &LatticeField {
    type Output = LatticeField;

    fn sub(self, rhs: &LatticeField) -> LatticeField {
        assert_eq!(self.lattice_box, rhs.lattice_box, "box mismatch");
        LatticeField {
            lattice_box: self.lattice_box,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Complex amplitude per point of a [`MomentumGrid`].
///
/// The norm is the Riemann sum `(2 pi / N)^d sum_k |u_k|^2`, which equals the
/// lattice norm exactly under the transform normalisation of [`super::Fourier`].
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumField {
    grid: MomentumGrid,
    values: Vec<Complex64>,
}

impl MomentumField {
    pub fn new(grid: MomentumGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(MomentumField { grid, values })
    }

    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}
