use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated periodic lattice `{-L, ..., L}^d`.
///
/// Sites are stored row-major with axis 0 slowest: the flat index of `n` is
/// `sum_j (n_j + L) * N^(d-1-j)` with `N = 2L + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    dim: usize,
    half_width: usize,
}

impl LatticeBox {
    /// Upper bound on `N^d`, about 1 GiB of complex amplitudes.
    pub const MAX_SITES: usize = 1 << 26;

    pub fn new(dim: usize, half_width: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "dimension {dim} outside the supported range 1..=3"
            )));
        }
        if half_width < 1 {
            return Err(Error::InvalidInput("half-width must be at least 1".into()));
        }
        let side = 2 * half_width + 1;
        let total = side
            .checked_pow(dim as u32)
            .filter(|n| *n <= Self::MAX_SITES)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{side}^{dim} sites exceed the memory budget of {} sites",
                    Self::MAX_SITES
                ))
            })?;
        debug_assert!(total > 0);
        Ok(LatticeBox { dim, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Points per axis, `N = 2L + 1`.
    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        let l = self.half_width as i64;
        site.len() == self.dim && site.iter().all(|n| (-l..=l).contains(n))
    }

    pub fn index(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let side = self.side();
        let l = self.half_width as i64;
        Some(
            site.iter()
                .fold(0usize, |acc, n| acc * side + (n + l) as usize),
        )
    }

    pub fn site(&self, index: usize, out: &mut [i64]) {
        let side = self.side();
        let l = self.half_width as i64;
        let mut rest = index;
        for j in (0..self.dim).rev() {
            out[j] = (rest % side) as i64 - l;
            rest /= side;
        }
    }

    pub fn site_vec(&self, index: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        self.site(index, &mut out);
        out
    }

    /// Distance (in sites) from `site` to the nearest box face.
    pub fn edge_distance(&self, site: &[i64]) -> usize {
        let l = self.half_width as i64;
        site.iter().map(|n| (l - n.abs()) as usize).min().unwrap_or(0)
    }
}

/// Discrete momenta `xi_k = 2 pi k / N`, `k in {-L, ..., L}` per axis, dual to a [`LatticeBox`].
///
/// Uses the same row-major ordering as the box, so momentum index `m` along an
/// axis is `k + L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentumGrid {
    lattice_box: LatticeBox,
}

impl MomentumGrid {
    pub fn new(lattice_box: LatticeBox) -> Self {
        MomentumGrid { lattice_box }
    }

    pub fn lattice_box(&self) -> LatticeBox {
        self.lattice_box
    }

    pub fn dim(&self) -> usize {
        self.lattice_box.dim()
    }

    pub fn len(&self) -> usize {
        self.lattice_box.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.lattice_box.side() as f64
    }

    /// Quadrature weight `(2 pi / N)^d` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Momentum coordinate of axis index `m in 0..N`.
    pub fn axis_value(&self, m: usize) -> f64 {
        (m as f64 - self.lattice_box.half_width() as f64) * self.spacing()
    }

    /// Axis index of the grid point nearest to `xi` (after torus reduction).
    pub fn nearest_axis_index(&self, xi: f64) -> usize {
        let side = self.lattice_box.side() as i64;
        let k = (crate::smooth::wrap_angle(xi) / self.spacing()).round() as i64;
        (k + self.lattice_box.half_width() as i64).rem_euclid(side) as usize
    }

    pub fn point(&self, index: usize, out: &mut [f64]) {
        let side = self.lattice_box.side();
        let mut rest = index;
        for j in (0..self.dim()).rev() {
            out[j] = self.axis_value(rest % side);
            rest /= side;
        }
    }

    pub fn point_vec(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.point(index, &mut out);
        out
    }

    /// Evaluate `f` at every grid point, in storage order.
    pub fn evaluate<T, F>(&self, mut f: F) -> Vec<T>
    where
        F: FnMut(&[f64]) -> T,
    {
        let mut xi = vec![0.0; self.dim()];
        (0..self.len())
            .map(|i| {
                self.point(i, &mut xi);
                f(&xi)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(LatticeBox::new(0, 4).is_err());
        assert!(LatticeBox::new(4, 4).is_err());
        assert!(LatticeBox::new(1, 0).is_err());
        assert!(LatticeBox::new(3, 5000).is_err());
    }

    #[test]
    fn indexing_is_row_major() {
        let b = LatticeBox::new(2, 2).unwrap();
        assert_eq!(b.index(&[-2, -2]), Some(0));
        assert_eq!(b.index(&[-2, -1]), Some(1));
        assert_eq!(b.index(&[-1, -2]), Some(5));
        assert_eq!(b.index(&[2, 2]), Some(24));
        assert_eq!(b.index(&[3, 0]), None);
    }

    #[test]
    fn momentum_grid_is_uniform_and_centered() {
        let g = MomentumGrid::new(LatticeBox::new(1, 3).unwrap());
        let xs: Vec<f64> = (0..7).map(|m| g.axis_value(m)).collect();
        assert_eq!(xs[3], 0.0);
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - 2.0 * PI / 7.0).abs() < 1e-15);
        }
        assert!(xs[0] > -PI && xs[6] < PI);
    }

    proptest! {
        #[test]
        fn index_site_bijection(dim in 1usize..=3, l in 1usize..6, raw in 0usize..100_000) {
            let b = LatticeBox::new(dim, l).unwrap();
            let i = raw % b.len();
            let s = b.site_vec(i);
            prop_assert_eq!(b.index(&s), Some(i));
        }
    }
}
