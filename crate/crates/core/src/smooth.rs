//! Infinitely differentiable cutoffs shared by the window profile, the
//! spectral windows and the wave-packet bump.

/// `exp(-1/t)` for `t > 0`, zero otherwise.
#[inline]
fn flat_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, and `s(t) + s(1 - t) = 1`.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = flat_exp(t);
        let b = flat_exp(1.0 - t);
        a / (a + b)
    }
}

/// Compactly supported bump `exp(1 - 1/(1 - r^2))` on `r < 1`, normalised to 1 at the origin.
#[inline]
pub fn bump(r: f64) -> f64 {
    let r2 = r * r;
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// Reduce an angle to `[-pi, pi)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2pi - eps rounding to pi
    if r >= PI {
        r - 2.0 * PI
    } else {
        r
    }
}
