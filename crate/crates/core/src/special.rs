//! Special functions used by the SDM kernels and the capacity theory.
//!
//! `ln_gamma` and `erfc` delegate to `libm`; the incomplete Beta function
//! and the principal Lambert W branch are evaluated here.

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Complete Beta function `Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta(a: f64, b: f64) -> f64 {
    ln_beta(a, b).exp()
}

/// `ln C(n, k)` via log-Gamma; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Continued fraction for the incomplete Beta function (modified Lentz).
fn beta_cf(z: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * z / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * z / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

fn check_beta_domain(z: f64, a: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&z) || z.is_nan() {
        return Err(Error::domain(format!("incomplete beta: z = {z} outside [0, 1]")));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!(
            "incomplete beta: shapes must be positive (a = {a}, b = {b})"
        )));
    }
    Ok(())
}

/// Lower incomplete Beta function `B[z; a, b] = ∫₀^z t^(a−1) (1−t)^(b−1) dt`.
pub fn incomplete_beta(z: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_domain(z, a, b)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == 1.0 {
        return Ok(beta(a, b));
    }
    if z < (a + 1.0) / (a + b + 2.0) {
        let front = (a * z.ln() + b * (1.0 - z).ln()).exp() / a;
        Ok(front * beta_cf(z, a, b))
    } else {
        let w = 1.0 - z;
        let front = (b * w.ln() + a * z.ln()).exp() / b;
        Ok(beta(a, b) - front * beta_cf(w, b, a))
    }
}

/// Regularized incomplete Beta function `I_z(a, b)`.
pub fn regularized_incomplete_beta(z: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_domain(z, a, b)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * z.ln() + b * (1.0 - z).ln() - ln_beta(a, b);
    if z < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(z, a, b) / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(1.0 - z, b, a) / b)
    }
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Principal branch `W₀` of the Lambert function, defined for `x ≥ −1/e`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch_point = -(-1.0f64).exp();
    if x.is_nan() || x < branch_point - 1e-15 {
        return Err(Error::domain(format!("lambert_w0: x = {x} below -1/e")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= branch_point {
        return Ok(-1.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }

    let mut w = if x < -0.25 {
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        (1.0 + x).ln() * 0.75
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    // Halley iteration
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}
