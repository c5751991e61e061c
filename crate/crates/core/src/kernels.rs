//! Kernel functions, including the sparse distributed memory (SDM) kernels.
//!
//! A [`KernelSpec`] is written on the command line and in network files as a
//! flat string:
//!
//! ```text
//! linear | poly:<p> | ipoly:<p> | exp | expbeta:<r>:<beta>
//!        | sdm-cube:<nin>:<r> | sdm-sphere:<nin>:<b>[:approx]
//! ```
//!
//! No positive-definiteness is claimed for `expbeta` with `beta > 2`; the
//! recall dynamics only rely on the kernel matrix being invertible.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::special::{incomplete_beta, ln_binomial};

/// Absolute tolerance of the hypersphere quadrature, applied to the integrand
/// rescaled by `sin^{N−2}(α_b)` so that it is meaningful at large `N`.
pub const SPHERE_QUAD_TOL: f64 = 1e-10;
const SPHERE_QUAD_PANELS: usize = 16;
const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `xᵀy`
    Linear,
    /// `(xᵀy)^p`
    PolyHomogeneous { p: u32 },
    /// `(xᵀy + 1)^p`
    PolyInhomogeneous { p: u32 },
    /// `exp(xᵀy)`
    Exponential,
    /// `exp[−(‖x − y‖/r)^β]`
    ExpBeta { r: f64, beta: f64 },
    /// Fraction of hypercube addresses within `r` bits of both inputs.
    SdmCube { n_in: usize, r: usize },
    /// Overlap of two hyperspherical caps with activation bias `b`, by quadrature.
    SdmSphereExact { n_in: usize, b: f64 },
    /// Sparse-regime closed-form approximation of [`KernelSpec::SdmSphereExact`].
    SdmSphereApprox { n_in: usize, b: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear | KernelSpec::Exponential => Ok(()),
            KernelSpec::PolyHomogeneous { p } | KernelSpec::PolyInhomogeneous { p } => {
                if p == 0 {
                    return Err(Error::domain("polynomial degree must be ≥ 1"));
                }
                Ok(())
            }
            KernelSpec::ExpBeta { r, beta } => {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::domain(format!("radius r = {r} must be positive")));
                }
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::domain(format!("β = {beta} must be positive")));
                }
                Ok(())
            }
            KernelSpec::SdmCube { n_in, r } => {
                if n_in == 0 {
                    return Err(Error::domain("SDM input dimension must be ≥ 1"));
                }
                if r > n_in {
                    return Err(Error::domain(format!("bit threshold r = {r} exceeds n_in = {n_in}")));
                }
                Ok(())
            }
            KernelSpec::SdmSphereExact { n_in, b } => {
                if n_in < 3 {
                    return Err(Error::domain("exact sphere kernel requires n_in ≥ 3"));
                }
                check_bias(b)
            }
            KernelSpec::SdmSphereApprox { n_in, b } => {
                if n_in < 2 {
                    return Err(Error::domain("approximate sphere kernel requires n_in ≥ 2"));
                }
                check_bias(b)
            }
        }
    }

    /// Input dimension fixed by the kernel parameters, if any.
    pub fn declared_dimension(&self) -> Option<usize> {
        match *self {
            KernelSpec::SdmCube { n_in, .. }
            | KernelSpec::SdmSphereExact { n_in, .. }
            | KernelSpec::SdmSphereApprox { n_in, .. } => Some(n_in),
            _ => None,
        }
    }

    /// Whether the kernel has the form `k(xᵀy)` for every input dimension.
    pub fn is_inner_product(&self) -> bool {
        matches!(
            self,
            KernelSpec::Linear
                | KernelSpec::PolyHomogeneous { .. }
                | KernelSpec::PolyInhomogeneous { .. }
                | KernelSpec::Exponential
        )
    }

    /// `k(t)` for inner-product kernels.
    pub fn of_dot(&self, t: f64) -> Result<f64> {
        match *self {
            KernelSpec::Linear => Ok(t),
            KernelSpec::PolyHomogeneous { p } => Ok(t.powi(p as i32)),
            KernelSpec::PolyInhomogeneous { p } => Ok((t + 1.0).powi(p as i32)),
            KernelSpec::Exponential => Ok(t.exp()),
            _ => Err(Error::domain(format!("kernel {self} is not of inner-product form"))),
        }
    }
}

fn check_bias(b: f64) -> Result<()> {
    if !(b > -1.0 && b < 1.0) {
        return Err(Error::domain(format!("bias b = {b} must lie in (−1, 1)")));
    }
    Ok(())
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::PolyHomogeneous { p } => write!(f, "poly:{p}"),
            KernelSpec::PolyInhomogeneous { p } => write!(f, "ipoly:{p}"),
            KernelSpec::Exponential => write!(f, "exp"),
            KernelSpec::ExpBeta { r, beta } => write!(f, "expbeta:{r}:{beta}"),
            KernelSpec::SdmCube { n_in, r } => write!(f, "sdm-cube:{n_in}:{r}"),
            KernelSpec::SdmSphereExact { n_in, b } => write!(f, "sdm-sphere:{n_in}:{b}"),
            KernelSpec::SdmSphereApprox { n_in, b } => write!(f, "sdm-sphere:{n_in}:{b}:approx"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::domain(format!("malformed kernel spec '{s}'"));
        fn num<T: FromStr>(v: &str, s: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::domain(format!("bad number '{v}' in kernel spec '{s}'")))
        }
        let spec = match parts.as_slice() {
            ["linear"] => KernelSpec::Linear,
            ["poly", p] => KernelSpec::PolyHomogeneous { p: num(p, s)? },
            ["ipoly", p] => KernelSpec::PolyInhomogeneous { p: num(p, s)? },
            ["exp"] => KernelSpec::Exponential,
            ["expbeta", r, beta] => KernelSpec::ExpBeta {
                r: num(r, s)?,
                beta: num(beta, s)?,
            },
            ["sdm-cube", n_in, r] => KernelSpec::SdmCube {
                n_in: num(n_in, s)?,
                r: num(r, s)?,
            },
            ["sdm-sphere", n_in, b] => KernelSpec::SdmSphereExact {
                n_in: num(n_in, s)?,
                b: num(b, s)?,
            },
            ["sdm-sphere", n_in, b, "approx"] => KernelSpec::SdmSphereApprox {
                n_in: num(n_in, s)?,
                b: num(b, s)?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn hamming(x: &[f64], y: &[f64]) -> Result<usize> {
    let mut d = 0;
    for (a, b) in x.iter().zip(y) {
        if (*a != 1.0 && *a != -1.0) || (*b != 1.0 && *b != -1.0) {
            return Err(Error::domain("hypercube SDM kernel requires ±1 inputs"));
        }
        if a != b {
            d += 1;
        }
    }
    Ok(d)
}

fn check_unit(x: &[f64]) -> Result<()> {
    let norm = dot(x, x).sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::domain(format!("sphere kernel input has norm {norm}, expected 1")));
    }
    Ok(())
}

/// `K(x, y)` for any kernel.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_dim(x.len(), y.len())?;
    if let Some(n) = spec.declared_dimension() {
        check_dim(n, x.len())?;
    }
    eval_checked(spec, x, y)
}

fn eval_checked(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    match *spec {
        KernelSpec::ExpBeta { r, beta } => Ok(expbeta_of_dist(sq_dist(x, y).sqrt(), r, beta)),
        KernelSpec::SdmCube { n_in, r } => sdm_cube_kernel(n_in, r, hamming(x, y)?),
        KernelSpec::SdmSphereExact { n_in, b } => {
            check_unit(x)?;
            check_unit(y)?;
            sdm_sphere_kernel_exact(n_in, b, dot(x, y))
        }
        KernelSpec::SdmSphereApprox { n_in, b } => {
            check_unit(x)?;
            check_unit(y)?;
            sdm_sphere_kernel_approx(n_in, b, 0.5 * sq_dist(x, y).sqrt())
        }
        _ => spec.of_dot(dot(x, y)),
    }
}

/// `exp[−(d/r)^β]`, written so that `d = r` gives `e⁻¹` exactly.
#[inline]
pub fn expbeta_of_dist(d: f64, r: f64, beta: f64) -> f64 {
    (-(d / r).powf(beta)).exp()
}

/// Fraction of the `2^{n_in}` hypercube addresses lying within `r` bits of two
/// points that differ in `delta` bits (addresses at exactly `r` bits count).
///
/// With `i` the number of the `n_in − Δ` agreeing coordinates on which the
/// address matches both points and `j` the number of the `Δ` differing
/// coordinates on which it matches the first point,
///
/// ```text
/// K = 2^{−N} Σ_i Σ_{j = [N−r−i]₊}^{Δ−(N−r−i)} C(N−Δ, i) C(Δ, j).
/// ```
///
/// Binomial coefficients come from Pascal rows in `f64` up to `n_in = 1024`
/// and from log-Gamma above that.
pub fn sdm_cube_kernel(n_in: usize, r: usize, delta: usize) -> Result<f64> {
    if delta > n_in {
        return Err(Error::domain(format!("Δ = {delta} exceeds n_in = {n_in}")));
    }
    if r > n_in {
        return Err(Error::domain(format!("r = {r} exceeds n_in = {n_in}")));
    }
    let n = n_in as i64;
    let (r, d) = (r as i64, delta as i64);
    let terms = |i: i64| -> Option<(i64, i64)> {
        let need = n - r - i;
        let lo = need.max(0);
        let hi = (d - need).min(d);
        (lo <= hi).then_some((lo, hi))
    };
    if n_in <= EXACT_BINOMIAL_MAX_N {
        // Binomial rows as f64 (exact while below 2^53), scaled by 2^{−N} in two halves.
        let row_a = binomial_row(n_in - delta);
        let row_b = binomial_row(delta);
        let half = 0.5f64.powi((n_in / 2) as i32);
        let rest = 0.5f64.powi((n_in - n_in / 2) as i32);
        let mut total = 0.0;
        for i in 0..=(n - d) {
            if let Some((lo, hi)) = terms(i) {
                let inner: f64 = (lo..=hi).map(|j| row_b[j as usize]).sum();
                total += row_a[i as usize] * inner * half * rest;
            }
        }
        return Ok(total);
    }
    let ln_norm = n_in as f64 * std::f64::consts::LN_2;
    let mut total = 0.0;
    for i in 0..=(n - d) {
        if let Some((lo, hi)) = terms(i) {
            let ln_a = ln_binomial((n - d) as u64, i as u64);
            for j in lo..=hi {
                total += (ln_a + ln_binomial(d as u64, j as u64) - ln_norm).exp();
            }
        }
    }
    Ok(total)
}

/// Largest `n_in` whose binomial coefficients all fit in an `f64`.
const EXACT_BINOMIAL_MAX_N: usize = 1024;

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = 0.0;
    }
    row[0] = 1.0;
    for m in 1..=n {
        for k in (1..m).rev() {
            row[k] += row[k - 1];
        }
        row[m] = 1.0;
    }
    row
}

/// Exact hypersphere SDM kernel as a function of `cos θ = xᵀy`:
///
/// ```text
/// K = (N−2)/(2π) ∫_{α_x}^{α_b} sin^{N−2}φ · B[1 − tan²α_x / tan²φ; (N−2)/2, ½] dφ
/// ```
///
/// with `α_x = ½ arccos(xᵀy)` and `α_b = arccos b`; zero once `α_x ≥ α_b`.
pub fn sdm_sphere_kernel_exact(n_in: usize, b: f64, cos_angle: f64) -> Result<f64> {
    KernelSpec::SdmSphereExact { n_in, b }.validate()?;
    if !(-1.0..=1.0).contains(&cos_angle) {
        return Err(Error::domain(format!("cos angle {cos_angle} outside [−1, 1]")));
    }
    let ax = 0.5 * cos_angle.acos();
    let ab = b.acos();
    if ax >= ab {
        return Ok(0.0);
    }
    let a = (n_in as f64 - 2.0) / 2.0;
    let pow = n_in as f64 - 2.0;
    let s_b = ab.sin();
    let tan_ax_sq = ax.tan().powi(2);
    let integrand = |phi: f64| -> Result<f64> {
        let t = phi.tan();
        let z = if ax == 0.0 { 1.0 } else { (1.0 - tan_ax_sq / (t * t)).clamp(0.0, 1.0) };
        let scaled = (phi.sin() / s_b).powf(pow);
        Ok(scaled * incomplete_beta(z, a, 0.5)?)
    };
    let integral = adaptive_simpson(integrand, ax, ab, SPHERE_QUAD_TOL, SPHERE_QUAD_PANELS)?;
    Ok(pow / (2.0 * PI) * s_b.powf(pow) * integral)
}

/// Sparse-regime approximation of the hypersphere SDM kernel as a function of
/// the half distance `Δ = ½‖x − y‖`, with `b̂ = sin(arccos b)`:
///
/// ```text
/// K ≈ (b̂^{N−1} / 2π) · B[1 − (Δ/b̂)²; N/2, ½]
/// ```
///
/// and zero once `Δ ≥ b̂`. Intended for `0.9 ≲ b < 1`.
pub fn sdm_sphere_kernel_approx(n_in: usize, b: f64, delta: f64) -> Result<f64> {
    KernelSpec::SdmSphereApprox { n_in, b }.validate()?;
    if !(delta >= 0.0) {
        return Err(Error::domain(format!("half distance Δ = {delta} must be ≥ 0")));
    }
    let b_hat = b.acos().sin();
    if delta >= b_hat {
        return Ok(0.0);
    }
    let z = 1.0 - (delta / b_hat).powi(2);
    let ib = incomplete_beta(z, n_in as f64 / 2.0, 0.5)?;
    Ok(((n_in as f64 - 1.0) * b_hat.ln()).exp() / (2.0 * PI) * ib)
}

/// Kernel matrix `K[μ][ν] = K(ξ^μ, ξ^ν)` over the columns of `x`.
///
/// Each entry is evaluated independently (rows in parallel), and the lower
/// triangle mirrors the upper, so the result is exactly symmetric and does
/// not depend on scheduling.
pub fn kernel_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if let KernelSpec::SdmCube { n_in, r } = *spec {
        let table = (0..=n_in)
            .map(|d| sdm_cube_kernel(n_in, r, d))
            .collect::<Result<Vec<f64>>>()?;
        return kernel_matrix_with(x, Some(n_in), |a, b| Ok(table[hamming(a, b)?]));
    }
    kernel_matrix_with(x, spec.declared_dimension(), |a, b| eval_checked(spec, a, b))
}

/// Kernel matrix for an arbitrary symmetric pairwise function.
pub(crate) fn kernel_matrix_with<F>(x: &DMatrix<f64>, declared: Option<usize>, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
{
    if let Some(n) = declared {
        check_dim(n, x.nrows())?;
    }
    let m = x.ncols();
    let cols: Vec<&[f64]> = (0..m).map(|j| column_slice(x, j)).collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| (a..m).map(|b| f(cols[a], cols[b])).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let mut k = DMatrix::zeros(m, m);
    for (a, row) in rows.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            k[(a, a + off)] = *v;
            k[(a + off, a)] = *v;
        }
    }
    Ok(k)
}

/// `K(X, s)`: kernel between every column of `x` and the query `s`.
pub fn kernel_column(spec: &KernelSpec, x: &DMatrix<f64>, s: &[f64]) -> Result<DVector<f64>> {
    spec.validate()?;
    check_dim(x.nrows(), s.len())?;
    if let Some(n) = spec.declared_dimension() {
        check_dim(n, s.len())?;
    }
    let mut out = DVector::zeros(x.ncols());
    for j in 0..x.ncols() {
        out[j] = eval_checked(spec, column_slice(x, j), s)?;
    }
    Ok(out)
}

/// Contiguous slice of column `j` of a column-major matrix.
#[inline]
pub(crate) fn column_slice(x: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = x.nrows();
    &x.as_slice()[j * n..(j + 1) * n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{gen_patterns, Geometry};
    use crate::special::beta;

    #[test]
    fn grammar_round_trip() {
        for s in [
            "linear",
            "poly:2",
            "ipoly:3",
            "exp",
            "expbeta:0.5:1000",
            "sdm-cube:12:3",
            "sdm-sphere:50:0.95",
            "sdm-sphere:50:0.9:approx",
        ] {
            let k: KernelSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        for bad in ["poly", "poly:0", "expbeta:1", "expbeta:-1:2", "sdm-cube:4:5", "sdm-sphere:2:0.5", "rbf"] {
            assert!(bad.parse::<KernelSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn elementary_kernels() {
        let x = [1.0, 1.0];
        let y = [1.0, -1.0];
        assert_eq!(kernel_eval(&KernelSpec::PolyHomogeneous { p: 2 }, &x, &y).unwrap(), 0.0);
        assert_eq!(kernel_eval(&KernelSpec::PolyInhomogeneous { p: 2 }, &x, &x).unwrap(), 9.0);
        assert_eq!(kernel_eval(&KernelSpec::Exponential, &x, &y).unwrap(), 1.0);
        let eb = KernelSpec::ExpBeta { r: 2.0, beta: 7.0 };
        assert_eq!(kernel_eval(&eb, &x, &x).unwrap(), 1.0);
        // ‖x − y‖ = 2 = r
        for beta in [0.5, 1.0, 2.0, 10.0, 1000.0] {
            let v = kernel_eval(&KernelSpec::ExpBeta { r: 2.0, beta }, &x, &y).unwrap();
            assert_eq!(v, (-1.0f64).exp());
        }
        assert!(kernel_eval(&KernelSpec::Linear, &x, &[1.0]).is_err());
    }

    #[test]
    fn cube_kernel_small_cases() {
        assert!((sdm_cube_kernel(4, 1, 0).unwrap() - 5.0 / 16.0).abs() < 1e-15);
        for delta in 0..=9 {
            assert!((sdm_cube_kernel(9, 9, delta).unwrap() - 1.0).abs() < 1e-13);
        }
        assert!(sdm_cube_kernel(4, 1, 5).is_err());
        assert!(sdm_cube_kernel(4, 5, 1).is_err());
    }

    #[test]
    fn cube_kernel_is_finite_at_large_dimension() {
        let v = sdm_cube_kernel(1024, 480, 10).unwrap();
        assert!(v.is_finite() && v > 0.0 && v < 1.0);
    }

    #[test]
    fn sphere_kernels_vanish_outside_support() {
        let b: f64 = 0.9;
        let ab = b.acos();
        let cos_far = (2.0 * ab + 1e-6).cos();
        assert_eq!(sdm_sphere_kernel_exact(50, b, cos_far).unwrap(), 0.0);
        let b_hat = ab.sin();
        assert_eq!(sdm_sphere_kernel_approx(50, b, b_hat).unwrap(), 0.0);
        assert_eq!(sdm_sphere_kernel_approx(50, b, b_hat + 0.1).unwrap(), 0.0);
    }

    #[test]
    fn sphere_exact_at_coincidence_is_cap_fraction() {
        // Cap fraction = ½ I_{sin²α_b}((N−1)/2, ½) for α_b < π/2.
        for (n, b) in [(5usize, 0.5), (20, 0.8), (50, 0.95)] {
            let ab = f64::acos(b);
            let a = (n as f64 - 1.0) / 2.0;
            let frac = 0.5 * incomplete_beta(ab.sin().powi(2), a, 0.5).unwrap() / beta(a, 0.5);
            let k = sdm_sphere_kernel_exact(n, b, 1.0).unwrap();
            assert!((k - frac).abs() <= 1e-9 * frac, "n={n} b={b}: {k} vs {frac}");
        }
    }

    #[test]
    fn sphere_approx_at_coincidence_is_complete_beta() {
        let (n, b) = (50usize, 0.95f64);
        let b_hat = b.acos().sin();
        let expect = b_hat.powi(n as i32 - 1) / (2.0 * PI) * beta(n as f64 / 2.0, 0.5);
        let v = sdm_sphere_kernel_approx(n, b, 0.0).unwrap();
        assert!((v - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn sphere_kernels_are_monotone() {
        let b: f64 = 0.9;
        let mut prev_e = f64::INFINITY;
        let mut prev_a = f64::INFINITY;
        for k in 0..=40 {
            let theta = 2.0 * b.acos() * k as f64 / 40.0;
            let e = sdm_sphere_kernel_exact(20, b, theta.cos()).unwrap();
            let a = sdm_sphere_kernel_approx(20, b, (0.5 * theta).sin()).unwrap();
            assert!(e <= prev_e * (1.0 + 1e-9) && a <= prev_a * (1.0 + 1e-12));
            prev_e = e;
            prev_a = a;
        }
        for r in 0..=10 {
            for d in 1..=10 {
                assert!(sdm_cube_kernel(10, r, d).unwrap() <= sdm_cube_kernel(10, r, d - 1).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn kernel_matrix_properties() {
        let x = gen_patterns(Geometry::Gaussian, 8, 12, 5).unwrap();
        for spec in [
            KernelSpec::Linear,
            KernelSpec::PolyHomogeneous { p: 2 },
            KernelSpec::PolyInhomogeneous { p: 3 },
            KernelSpec::Exponential,
        ] {
            let k = kernel_matrix(&spec, x.data()).unwrap();
            assert_eq!(k, k.transpose());
            let eig = k.clone().symmetric_eigen().eigenvalues;
            let max = eig.max();
            assert!(eig.min() >= -1e-9 * max, "{spec}: {}", eig.min());
        }
        let basis = DMatrix::from_column_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
        let k = kernel_matrix(&KernelSpec::Linear, &basis).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]));
    }

    #[test]
    fn expbeta_matrix_is_invertible() {
        let x = gen_patterns(Geometry::Gaussian, 10, 50, 9).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let k = kernel_matrix(&KernelSpec::ExpBeta { r: 3.0, beta }, x.data()).unwrap();
            let sv = k.singular_values();
            assert!(sv.min() > 1e-12 * sv.max(), "β={beta}");
        }
    }

    #[test]
    fn kernel_column_matches_eval() {
        let x = gen_patterns(Geometry::Hypersphere, 6, 4, 1).unwrap();
        let s = x.column(2);
        let spec = KernelSpec::SdmSphereExact { n_in: 6, b: 0.3 };
        let col = kernel_column(&spec, x.data(), s.as_slice()).unwrap();
        let k = kernel_matrix(&spec, x.data()).unwrap();
        for j in 0..4 {
            assert_eq!(col[j], k[(j, 2)]);
        }
        let bad = [1.0, 0.0, 0.0, 0.0, 0.0, 0.5];
        assert!(kernel_column(&spec, x.data(), &bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (prop::collection::vec(-2.0f64..2.0, n), prop::collection::vec(-2.0f64..2.0, n))
        }

        proptest! {
            #[test]
            fn kernels_are_symmetric((x, y) in vec_pair(5), r in 0.1f64..4.0, beta in 0.1f64..20.0) {
                for spec in [
                    KernelSpec::Linear,
                    KernelSpec::PolyHomogeneous { p: 3 },
                    KernelSpec::PolyInhomogeneous { p: 2 },
                    KernelSpec::Exponential,
                    KernelSpec::ExpBeta { r, beta },
                ] {
                    prop_assert_eq!(kernel_eval(&spec, &x, &y).unwrap(), kernel_eval(&spec, &y, &x).unwrap());
                }
            }

            #[test]
            fn sphere_kernels_are_symmetric(seed in any::<u64>()) {
                let p = gen_patterns(Geometry::Hypersphere, 7, 2, seed).unwrap();
                let (x, y) = (p.column(0), p.column(1));
                for spec in [
                    KernelSpec::SdmSphereExact { n_in: 7, b: 0.2 },
                    KernelSpec::SdmSphereApprox { n_in: 7, b: 0.2 },
                ] {
                    prop_assert_eq!(
                        kernel_eval(&spec, x.as_slice(), y.as_slice()).unwrap(),
                        kernel_eval(&spec, y.as_slice(), x.as_slice()).unwrap()
                    );
                }
            }
        }
    }
}
