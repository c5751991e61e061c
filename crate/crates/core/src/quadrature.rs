//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Subdivision budget shared by one integration call.
pub const MAX_SUBDIVISIONS: usize = 1_000_000;
const MAX_DEPTH: u32 = 60;

struct Budget {
    used: usize,
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first split into `initial_panels` equal panels (a power of
/// two is customary), each of which is refined by recursive bisection with the
/// Richardson-corrected Simpson estimate until `|S₂ − S₁| ≤ 15·tol_panel`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, initial_panels: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let panels = initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut budget = Budget { used: 0 };
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + width * k as f64;
        let hi = if k + 1 == panels { b } else { lo + width };
        let flo = f(lo)?;
        let fhi = f(hi)?;
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid)?;
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += refine(&f, lo, hi, flo, fmid, fhi, whole, tol / panels as f64, 0, &mut budget)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut Budget,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    budget.used += 1;
    if budget.used > MAX_SUBDIVISIONS {
        return Err(Error::Quadrature(format!(
            "more than {MAX_SUBDIVISIONS} subdivisions on [{a}, {b}]"
        )));
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, budget)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, budget)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_trig() {
        let v = adaptive_simpson(|x| Ok(x * x * x), 0.0, 2.0, 1e-12, 1).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let v = adaptive_simpson(|x| Ok(x.sin().powi(10)), 0.0, std::f64::consts::PI, 1e-12, 4).unwrap();
        // ∫₀^π sin¹⁰ = π · 63/256
        assert!((v - std::f64::consts::PI * 63.0 / 256.0).abs() < 1e-11);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(adaptive_simpson(|_| Ok(1.0), 1.0, 1.0, 1e-10, 4).unwrap(), 0.0);
    }

    #[test]
    fn propagates_integrand_errors() {
        let r = adaptive_simpson(|_| Err(Error::domain("boom")), 0.0, 1.0, 1e-10, 2);
        assert!(r.is_err());
    }
}
