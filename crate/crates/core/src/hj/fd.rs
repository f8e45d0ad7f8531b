//! Finite-difference weights on arbitrary nodes.

/// Fornberg's recursion: `w[m][j]` is the weight of `nodes[j]` in the order-`m`
/// derivative at `x0`, for `m <= max_order`.
pub fn fornberg(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_stencils() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
        let w = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let want = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w[1].iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
