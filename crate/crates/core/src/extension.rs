//! Window-function extension of lattice potentials to smooth functions on `R^d`.
//!
//! `V~(x) = (2 pi)^(-d/2) sum_n chi0(x - n) V[n]` with `chi0 = prod_j kappa(x_j)` and
//! `kappa = F*[psi]`. The profile `psi` is 1 on `|xi| <= pi/2`, vanishes for
//! `|xi| >= 3 pi/2` and its `2 pi`-translates sum to one, so `kappa(k) = (2 pi)^(1/2) delta_k0`
//! at integers and `V~` interpolates `V`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::lattice::{ContinuumPotential, SiteTable};
use crate::smooth::smoothstep;

/// One-dimensional window profile `psi`.
pub fn window_profile(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 0.5 * PI {
        1.0
    } else if a >= 1.5 * PI {
        0.0
    } else {
        1.0 - smoothstep((a - 0.5 * PI) / PI)
    }
}

/// Tensor window `chi0_hat(xi) = prod_j psi(xi_j)`.
pub fn tensor_profile(xi: &[f64]) -> f64 {
    xi.iter().map(|x| window_profile(*x)).product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowParams {
    /// Kernel sum radius `rho` in sites.
    pub radius: usize,
    /// Quadrature nodes per `2 pi`; the step is `2 pi / nodes_per_period`.
    pub nodes_per_period: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            radius: 96,
            nodes_per_period: 1024,
        }
    }
}

/// Sampled window: trapezoid weights for the inverse transform of `psi`.
#[derive(Clone, Debug)]
pub struct WindowFunction {
    params: WindowParams,
    nodes: Vec<f64>,
    /// `(2 pi)^(-1/2) h psi(xi_i)`, doubled for `i > 0` (even integrand folded onto `[0, 3 pi / 2]`).
    weights: Vec<f64>,
    /// Same with the transferred-kernel factor `(xi / 2) / sin(xi / 2)`.
    transferred: Vec<f64>,
}

impl WindowFunction {
    pub const PARTITION_TOLERANCE: f64 = 1e-10;

    pub fn build(params: WindowParams) -> Result<Self> {
        if params.radius < 1 || params.nodes_per_period < 16 || params.nodes_per_period % 4 != 0 {
            return Err(Error::InvalidInput(format!("invalid window parameters {params:?}")));
        }
        let h = 2.0 * PI / params.nodes_per_period as f64;
        let count = 3 * params.nodes_per_period / 4;
        let norm = h / (2.0 * PI).sqrt();
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let mut transferred = Vec::with_capacity(count);
        for i in 0..count {
            let xi = i as f64 * h;
            let w = norm * if i == 0 { 1.0 } else { 2.0 } * window_profile(xi);
            let ratio = if i == 0 { 1.0 } else { (0.5 * xi) / (0.5 * xi).sin() };
            nodes.push(xi);
            weights.push(w);
            transferred.push(w * ratio);
        }
        let window = WindowFunction {
            params,
            nodes,
            weights,
            transferred,
        };
        let residual = window.partition_residual(4001);
        if residual > Self::PARTITION_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "window partition-of-unity residual {residual:e} above tolerance"
            )));
        }
        Ok(window)
    }

    pub fn params(&self) -> WindowParams {
        self.params
    }

    pub fn radius(&self) -> usize {
        self.params.radius
    }

    /// `max |sum_{|n| <= 2} psi(xi + 2 pi n) - 1|` over a uniform sweep of `[-pi, pi]`.
    pub fn partition_residual(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let xi = -PI + 2.0 * PI * i as f64 / (samples - 1) as f64;
                let s: f64 = (-2..=2)
                    .map(|n| window_profile(xi + 2.0 * PI * n as f64))
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `kappa^(m)(x)`, the `m`-th derivative of the one-dimensional kernel.
    pub fn kernel(&self, x: f64, order: u32) -> f64 {
        let shift = 0.5 * PI * order as f64;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * xi.powi(order as i32) * (x * xi + shift).cos())
            .sum()
    }

    /// Tensor kernel `chi0(x)`.
    pub fn kernel_nd(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| self.kernel(*v, 0)).product()
    }

    /// Order-one transferred kernel, paired with backward differences of `V`.
    pub fn transferred_kernel(&self, x: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.transferred)
            .map(|(xi, w)| w * ((x + 0.5) * xi).cos())
            .sum()
    }

    /// `[kappa^(m)(frac + rho - q) for q in 0..=2 rho]` by phase rotation.
    fn row(&self, frac: f64, order: u32, weights: &[f64], offset: f64) -> Vec<f64> {
        let rho = self.params.radius as i64;
        let len = (2 * rho + 1) as usize;
        let im = Complex64::i().powu(order);
        // z_i = w_i xi^m i^m exp(i (frac + offset + rho) xi), rotated by exp(-i xi) per q
        let mut z: Vec<Complex64> = self
            .nodes
            .iter()
            .zip(weights)
            .map(|(xi, w)| {
                im * w * xi.powi(order as i32)
                    * Complex64::from_polar(1.0, (frac + offset + rho as f64) * xi)
            })
            .collect();
        let rot: Vec<Complex64> = self
            .nodes
            .iter()
            .map(|xi| Complex64::from_polar(1.0, -xi))
            .collect();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(z.iter().map(|c| c.re).sum());
            for (c, r) in z.iter_mut().zip(&rot) {
                *c *= r;
            }
        }
        out
    }
}

type RowKey = (u64, u32, bool);

/// `V~` for a tabulated lattice potential.
pub struct ExtendedPotential {
    source: SiteTable,
    window: Arc<WindowFunction>,
    rows: Mutex<HashMap<RowKey, Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for ExtendedPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtendedPotential")
            .field("box", &self.source.lattice_box())
            .field("radius", &self.window.radius())
            .finish()
    }
}

const ROW_CACHE_LIMIT: usize = 1 << 14;

impl ExtendedPotential {
    pub fn new(source: SiteTable, window: Arc<WindowFunction>) -> Result<Self> {
        if source.lattice_box().half_width() <= window.radius() + 1 {
            return Err(Error::BoxTooSmall(format!(
                "half-width {} leaves no reliable region for kernel radius {}",
                source.lattice_box().half_width(),
                window.radius()
            )));
        }
        Ok(ExtendedPotential {
            source,
            window,
            rows: Mutex::new(HashMap::new()),
        })
    }

    pub fn source(&self) -> &SiteTable {
        &self.source
    }

    pub fn window(&self) -> &WindowFunction {
        &self.window
    }

    /// Largest `|x_j|` at which the kernel sum stays inside the source box.
    pub fn reliable_radius(&self) -> f64 {
        (self.source.lattice_box().half_width() - self.window.radius() - 1) as f64
    }

    fn cached_row(&self, frac: f64, order: u32, transferred: bool) -> Arc<Vec<f64>> {
        let key = (frac.to_bits(), order, transferred);
        if let Some(r) = self.rows.lock().unwrap().get(&key) {
            return Arc::clone(r);
        }
        let w = &self.window;
        let row = Arc::new(if transferred {
            w.row(frac, 0, &w.transferred, 0.5)
        } else {
            w.row(frac, order, &w.weights, 0.0)
        });
        let mut cache = self.rows.lock().unwrap();
        if cache.len() >= ROW_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&row));
        row
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let d = self.source.lattice_box().dim();
        if x.len() != d {
            return Err(Error::SizeMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let r = self.reliable_radius();
        if let Some(c) = x.iter().find(|c| !(c.abs() <= r)) {
            return Err(Error::OutsideReliableRadius {
                coordinate: *c,
                radius: r,
            });
        }
        Ok(())
    }

    /// `d^alpha V~(x)` through differentiated kernels.
    pub fn derivative(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        self.check_point(x)?;
        if alpha.len() != x.len() {
            return Err(Error::SizeMismatch {
                expected: x.len(),
                got: alpha.len(),
            });
        }
        let floors: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
        let rows: Vec<Arc<Vec<f64>>> = x
            .iter()
            .zip(&floors)
            .zip(alpha)
            .map(|((v, f), a)| self.cached_row(v - *f as f64, *a as u32, false))
            .collect();
        Ok(self.contract(&floors, &rows, None))
    }

    /// Order-one derivative along `axis` via the transferred kernel and backward differences.
    pub fn transferred_derivative(&self, x: &[f64], axis: usize) -> Result<f64> {
        self.check_point(x)?;
        let floors: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
        let rows: Vec<Arc<Vec<f64>>> = x
            .iter()
            .zip(&floors)
            .enumerate()
            .map(|(j, (v, f))| self.cached_row(v - *f as f64, 0, j == axis))
            .collect();
        Ok(self.contract(&floors, &rows, Some(axis)))
    }

    /// `(2 pi)^(-d/2) sum_n prod_j row_j[q_j] W[n]`, with `n_j = floor_j - rho + q_j` and
    /// `W = V` or its backward difference along `diff_axis`.
    fn contract(&self, floors: &[i64], rows: &[Arc<Vec<f64>>], diff_axis: Option<usize>) -> f64 {
        let b = self.source.lattice_box();
        let d = b.dim();
        let side = b.side();
        let l = b.half_width() as i64;
        let rho = self.window.radius() as i64;
        let values = self.source.values();
        let strides: Vec<usize> = (0..d).map(|j| side.pow((d - 1 - j) as u32)).collect();
        let base: usize = (0..d)
            .map(|j| (floors[j] - rho + l) as usize * strides[j])
            .sum();
        let diff_stride = diff_axis.map(|a| strides[a]);
        let sample = |idx: usize| -> f64 {
            match diff_stride {
                None => values[idx],
                Some(s) => values[idx] - values[idx - s],
            }
        };
        fn rec(
            axis: usize,
            offset: usize,
            rows: &[Arc<Vec<f64>>],
            strides: &[usize],
            sample: &dyn Fn(usize) -> f64,
        ) -> f64 {
            let row = &rows[axis];
            let stride = strides[axis];
            if axis + 1 == rows.len() {
                row.iter()
                    .enumerate()
                    .map(|(q, w)| w * sample(offset + q * stride))
                    .sum()
            } else {
                row.iter()
                    .enumerate()
                    .map(|(q, w)| {
                        if *w == 0.0 {
                            0.0
                        } else {
                            w * rec(axis + 1, offset + q * stride, rows, strides, sample)
                        }
                    })
                    .sum()
            }
        }
        (2.0 * PI).powf(-0.5 * d as f64) * rec(0, base, rows, &strides, &sample)
    }
}

impl ContinuumPotential for ExtendedPotential {
    fn dim(&self) -> usize {
        self.source.lattice_box().dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.derivative(x, &vec![0; x.len()])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut alpha = vec![0; x.len()];
        for j in 0..x.len() {
            alpha[j] = 1;
            out[j] = self.derivative(x, &alpha)?;
            alpha[j] = 0;
        }
        Ok(())
    }
}

pub fn build_window(params: WindowParams) -> Result<WindowFunction> {
    WindowFunction::build(params)
}

pub fn extend_potential(source: SiteTable, window: Arc<WindowFunction>) -> Result<ExtendedPotential> {
    ExtendedPotential::new(source, window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProbe {
    pub alpha: Vec<usize>,
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
    pub slope: f64,
}

/// Directions sampling the sphere `|x| = 1` in `d` dimensions.
pub(crate) fn sphere_directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..48)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 48.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for i in 0..8 {
                let th = PI * (i as f64 + 0.5) / 8.0;
                for k in 0..16 {
                    let ph = 2.0 * PI * k as f64 / 16.0;
                    out.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                }
            }
            out
        }
    }
}

/// Fit the log-log slope of `sup_{|x| = r} |d^alpha V~(x)|` over `radii`.
pub fn symbol_decay_probe(ext: &ExtendedPotential, alpha: &[usize], radii: &[f64]) -> Result<DecayProbe> {
    let d = ext.dim();
    let dirs = sphere_directions(d);
    let mut sups = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best: f64 = 0.0;
        for dir in &dirs {
            let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
            best = best.max(ext.derivative(&x, alpha)?.abs());
        }
        sups.push(best);
    }
    let fit = loglog_slope(radii, &sups)?;
    Ok(DecayProbe {
        alpha: alpha.to_vec(),
        radii: radii.to_vec(),
        sups,
        slope: fit.slope,
    })
}

/// Dyadic radii `r0, 2 r0, ...` up to the reliable radius.
pub fn dyadic_radii(ext: &ExtendedPotential, r0: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = r0;
    while r <= ext.reliable_radius() {
        out.push(r);
        r *= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;

    #[test]
    fn profile_properties() {
        for i in 0..=2000 {
            let xi = -5.0 + 10.0 * i as f64 / 2000.0;
            let p = window_profile(xi);
            assert!(p >= 0.0);
            assert_eq!(p, window_profile(-xi));
            if xi.abs() >= 1.5 * PI {
                assert_eq!(p, 0.0);
            }
        }
        assert_eq!(window_profile(1.6 * PI), 0.0);
        assert_eq!(tensor_profile(&[0.1, 1.6 * PI]), 0.0);
    }

    #[test]
    fn kronecker_at_integers() {
        let w = WindowFunction::build(WindowParams::default()).unwrap();
        let s = (2.0 * PI).sqrt();
        for k in -10i32..=10 {
            let want = if k == 0 { s } else { 0.0 };
            assert!((w.kernel(k as f64, 0) - want).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn rows_match_direct_kernel() {
        let w = Arc::new(WindowFunction::build(WindowParams { radius: 12, nodes_per_period: 1024 }).unwrap());
        let row = w.row(0.37, 1, &w.weights, 0.0);
        for q in [0usize, 5, 12, 24] {
            let x = 0.37 + 12.0 - q as f64;
            assert!((row[q] - w.kernel(x, 1)).abs() < 1e-12);
        }
        let t = w.row(0.37, 0, &w.transferred, 0.5);
        assert!((t[3] - w.transferred_kernel(0.37 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn reliable_radius_enforced() {
        let w = Arc::new(WindowFunction::build(WindowParams { radius: 8, nodes_per_period: 256 }).unwrap());
        let b = LatticeBox::new(1, 20).unwrap();
        let e = ExtendedPotential::new(SiteTable::from_fn(b, |_| 1.0), w).unwrap();
        assert!(e.value(&[11.0]).is_ok());
        assert!(matches!(e.value(&[11.5]), Err(Error::OutsideReliableRadius { .. })));
    }
}
