//! Free symbol `p0(xi) = sum_j cos xi_j` and the quantities derived from it.
//!
//! The velocity is the gradient of the symbol, `v_j = d p0 / d xi_j = -sin xi_j`,
//! so that classical characteristics and quantum group velocity agree.

/// `p0(xi) = sum_j cos xi_j`.
pub fn free_symbol(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x.cos()).sum()
}

/// `v(xi) = grad p0(xi)`.
pub fn velocity(xi: &[f64], out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(xi) {
        *o = -x.sin();
    }
}

pub fn velocity_vec(xi: &[f64]) -> Vec<f64> {
    xi.iter().map(|x| -x.sin()).collect()
}

/// `k(xi) = |v(xi)|^2`.
pub fn speed_squared(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x.sin().powi(2)).sum()
}

/// Diagonal of the Hessian of `p0`; the Hessian is diagonal.
pub fn hessian_diag(xi: &[f64]) -> Vec<f64> {
    xi.iter().map(|x| -x.cos()).collect()
}

pub fn hessian_det(xi: &[f64]) -> f64 {
    xi.iter().map(|x| -x.cos()).product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Symbols {
    pub p0: f64,
    pub v: Vec<f64>,
    pub k: f64,
}

pub fn evaluate_symbols(xi: &[f64]) -> Symbols {
    Symbols {
        p0: free_symbol(xi),
        v: velocity_vec(xi),
        k: speed_squared(xi),
    }
}

/// Threshold energies `{-d, -d+2, ..., d}`.
pub fn threshold_set(dim: usize) -> Vec<f64> {
    (0..=dim).map(|j| -(dim as f64) + 2.0 * j as f64).collect()
}

pub fn distance_to_thresholds(dim: usize, e: f64) -> f64 {
    threshold_set(dim)
        .into_iter()
        .map(|t| (e - t).abs())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn reference_points() {
        let s = evaluate_symbols(&[0.0, 0.0]);
        assert_eq!(s.p0, 2.0);
        assert_eq!(s.k, 0.0);
        assert!(s.v.iter().all(|v| *v == 0.0));
        let s = evaluate_symbols(&[PI / 2.0]);
        assert!(s.p0.abs() < 1e-15);
        assert!((s.v[0].abs() - 1.0).abs() < 1e-15);
        assert!((s.k - 1.0).abs() < 1e-15);
        assert_eq!(threshold_set(3), vec![-3.0, -1.0, 1.0, 3.0]);
    }

    proptest! {
        #[test]
        fn velocity_is_gradient(a in -PI..PI, b in -PI..PI) {
            let xi = [a, b];
            let v = velocity_vec(&xi);
            let h = 1e-6;
            for j in 0..2 {
                let mut p = xi; p[j] += h;
                let mut m = xi; m[j] -= h;
                let fd = (free_symbol(&p) - free_symbol(&m)) / (2.0 * h);
                prop_assert!((fd - v[j]).abs() < 1e-8);
            }
        }

        #[test]
        fn off_threshold_speed_positive(a in -PI..PI, b in -PI..PI, c in -PI..PI) {
            let xi = [a, b, c];
            if distance_to_thresholds(3, free_symbol(&xi)) > 1e-6 {
                prop_assert!(speed_squared(&xi) > 0.0);
            }
        }
    }
}
