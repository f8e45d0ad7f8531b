//! Adaptive Gauss-Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol` by interval bisection.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = kronrod(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total_err = e;
    let mut total = v;
    while total_err > tol {
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(total_err));
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, v, e) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod(&mut f, lo, mid);
        let (v2, e2) = kronrod(&mut f, mid, hi);
        total += v1 + v2 - v;
        total_err += e1 + e2 - e;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        if !total.is_finite() {
            return Err(Error::Quadrature(f64::NAN));
        }
    }
    // resum to avoid drift from the running updates
    Ok(parts.iter().map(|p| p.2).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_smooth_functions() {
        let v = integrate(|x| x.powi(5) - 3.0 * x, 0.0, 2.0, 1e-13).unwrap();
        assert!((v - (64.0 / 6.0 - 6.0)).abs() < 1e-12);
        let v = integrate(|x| 1.0 / (1.0 + x * x).sqrt(), 0.0, 50.0, 1e-12).unwrap();
        assert!((v - 50f64.asinh()).abs() < 1e-11);
        let v = integrate(|x| x.exp(), 1.0, 0.0, 1e-13).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-13);
    }
}
