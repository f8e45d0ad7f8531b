//! Local interpolation rules used by the phase construction.

/// Weights and first-derivative weights of cubic Lagrange interpolation on the
/// nodes `-1, 0, 1, 2` at offset `s in [0, 1)`.
pub fn lagrange4(s: f64) -> ([f64; 4], [f64; 4]) {
    let (a, b, c, d) = (s + 1.0, s, s - 1.0, s - 2.0);
    let w = [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ];
    let dw = [
        -(c * d + b * d + b * c) / 6.0,
        (c * d + a * d + a * c) / 2.0,
        -(b * d + a * d + a * b) / 2.0,
        (b * c + a * c + a * b) / 6.0,
    ];
    (w, dw)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Clone, Debug)]
pub struct Pchip {
    ts: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(ts: &[f64], ys: &[f64]) -> Self {
        let n = ts.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut m = vec![0.0; n];
        if n == 2 {
            m = vec![del[0]; 2];
        } else {
            for i in 1..n - 1 {
                if del[i - 1] * del[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    m[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
                }
            }
            m[0] = end_slope(h[0], h[1], del[0], del[1]);
            m[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Pchip {
            ts: ts.to_vec(),
            ys: ys.to_vec(),
            slopes: m,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.ts.len();
        let i = match self.ts.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return self.ys[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.ts[i + 1] - self.ts[i];
        let s = (t - self.ts[i]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s).powi(2),
            s * (1.0 - s).powi(2),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

/// Cubic Hermite on `[t0, t1]` with given end slopes, limited (Fritsch-Carlson)
/// so that monotone data stay monotone.
pub fn monotone_hermite(t0: f64, t1: f64, y0: f64, y1: f64, s0: f64, s1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let del = (y1 - y0) / h;
    let (mut m0, mut m1) = (s0, s1);
    if del == 0.0 {
        m0 = 0.0;
        m1 = 0.0;
    } else {
        if m0 * del < 0.0 {
            m0 = 0.0;
        }
        if m1 * del < 0.0 {
            m1 = 0.0;
        }
        let (a, b) = (m0 / del, m1 / del);
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m0 = tau * a * del;
            m1 = tau * b * del;
        }
    }
    let s = (t - t0) / h;
    let (h00, h10, h01, h11) = (
        (1.0 + 2.0 * s) * (1.0 - s).powi(2),
        s * (1.0 - s).powi(2),
        s * s * (3.0 - 2.0 * s),
        s * s * (s - 1.0),
    );
    h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_reproduces_cubics() {
        let f = |x: f64| 2.0 * x.powi(3) - x * x + 0.5 * x - 3.0;
        let df = |x: f64| 6.0 * x * x - 2.0 * x + 0.5;
        for s in [0.0, 0.25, 0.7, 0.999] {
            let (w, dw) = lagrange4(s);
            let v: f64 = (0..4).map(|k| w[k] * f(k as f64 - 1.0)).sum();
            let dv: f64 = (0..4).map(|k| dw[k] * f(k as f64 - 1.0)).sum();
            assert!((v - f(s)).abs() < 1e-12);
            assert!((dv - df(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn pchip_hits_nodes_and_stays_monotone() {
        let ts = [0.0, 1.0, 2.0, 4.0, 8.0];
        let ys = [0.0, 1.0, 1.5, 1.6, 3.0];
        let p = Pchip::new(&ts, &ys);
        for (t, y) in ts.iter().zip(&ys) {
            assert_eq!(p.eval(*t), *y);
        }
        let mut prev = -1.0;
        for i in 0..=800 {
            let v = p.eval(8.0 * i as f64 / 800.0);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }
}
