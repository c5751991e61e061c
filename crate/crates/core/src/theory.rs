//! Closed-form noise tolerances and capacity lower bounds of the `Exp_β`
//! network at zero temperature, and the support-vector-proliferation
//! capacity of the linear network.
//!
//! Capacities are returned as natural logarithms because they grow like
//! `exp(cN)` and overflow `f64` for a few thousand dimensions.
//!
//! Every bound follows the same chain: pairwise squared distances are
//! approximately normal, the probability that a pair lies closer than `2r` is
//! `½ erfc(x)`, sampling until the first collision gives
//! `M_max = 2 erfc(x)^{−1/2}`, and `erfc(x)⁻¹ ≥ √π x e^{x²}` turns that into
//! the closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{erfc, lambert_w0};

/// Below this dimension the normal approximations behind the bounds are poor.
pub const SMALL_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityModel {
    GaussianExpBeta,
    SphereExpBeta,
    BipolarExpBeta,
    SvpLinear,
}

/// Validity warnings attached to a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeFlag {
    /// `n` below [`SMALL_N`].
    SmallN,
    /// The noise level is zero; the bound is loose in this limit.
    ZeroNoise,
    /// The erfc argument is below ½, where `erfc(x)⁻¹ ≥ √π x e^{x²}` is loose.
    SmallErfcArgument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityPrediction {
    pub model: CapacityModel,
    pub n: usize,
    /// Model parameters in order: `σ²_max`, `r`, `(f, ρ_max)` or nothing.
    pub params: Vec<f64>,
    /// `ln M_max`.
    pub ln_value: f64,
    pub flags: Vec<RegimeFlag>,
}

impl CapacityPrediction {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    pub fn log10(&self) -> f64 {
        self.ln_value / std::f64::consts::LN_10
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("dimension n must be ≥ 1"));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("radius r = {r} must be ≥ 0")));
    }
    Ok(())
}

/// Largest Gaussian noise variance recovered in half the trials: `r²/N`.
pub fn sigma_max_sq(r: f64, n: usize) -> Result<f64> {
    check_radius(r)?;
    check_n(n)?;
    Ok(r * r / n as f64)
}

/// Largest bit-flip probability recovered in half the trials: `r²/(4N)`.
pub fn rho_max(r: f64, n: usize) -> Result<f64> {
    check_radius(r)?;
    check_n(n)?;
    Ok(r * r / (4.0 * n as f64))
}

/// `ln[2 (√π x e^{x²})^{1/2}] = ln 2 + ½ ln(√π x) + x²/2`.
fn ln_bound_from_erfc_argument(x: f64) -> f64 {
    std::f64::consts::LN_2 + 0.5 * (std::f64::consts::PI.sqrt() * x).ln() + 0.5 * x * x
}

fn flags(n: usize, noise: f64, x: f64) -> Vec<RegimeFlag> {
    let mut flags = Vec::new();
    if n < SMALL_N {
        flags.push(RegimeFlag::SmallN);
    }
    if noise == 0.0 {
        flags.push(RegimeFlag::ZeroNoise);
    }
    if x < 0.5 {
        flags.push(RegimeFlag::SmallErfcArgument);
    }
    flags
}

/// Gaussian patterns: `M_max ≥ √(2√(πN)(1 − 2σ²)) exp[N(1 − 2σ²)²/8]`.
pub fn capacity_bound_gaussian(n: usize, sigma_max_sq: f64) -> Result<CapacityPrediction> {
    check_n(n)?;
    if !(0.0..0.5).contains(&sigma_max_sq) {
        return Err(Error::domain(format!("σ²_max = {sigma_max_sq} must lie in [0, ½)")));
    }
    let nf = n as f64;
    let c = 1.0 - 2.0 * sigma_max_sq;
    let ln_value = 0.5 * (2.0 * (std::f64::consts::PI * nf).sqrt() * c).ln() + nf * c * c / 8.0;
    Ok(CapacityPrediction {
        model: CapacityModel::GaussianExpBeta,
        n,
        params: vec![sigma_max_sq],
        ln_value,
        flags: flags(n, sigma_max_sq, nf.sqrt() * c / 2.0),
    })
}

/// The Gaussian bound written in terms of the radius, through the erfc
/// argument `x = (N − 2r²) / (2√N)`.
pub fn capacity_bound_gaussian_from_radius(n: usize, r: f64) -> Result<CapacityPrediction> {
    check_radius(r)?;
    check_n(n)?;
    let nf = n as f64;
    let x = (nf - 2.0 * r * r) / (2.0 * nf.sqrt());
    if x <= 0.0 {
        return Err(Error::domain(format!("r = {r} gives σ²_max ≥ ½ at n = {n}")));
    }
    Ok(CapacityPrediction {
        model: CapacityModel::GaussianExpBeta,
        n,
        params: vec![r * r / nf],
        ln_value: ln_bound_from_erfc_argument(x),
        flags: flags(n, r, x),
    })
}

/// Capacity before the erfc bound is applied: `ln[2 erfc(x)^{−1/2}]` with
/// `x = √N(1 − 2σ²)/2`.
pub fn capacity_erfc_gaussian(n: usize, sigma_max_sq: f64) -> Result<f64> {
    check_n(n)?;
    if !(0.0..0.5).contains(&sigma_max_sq) {
        return Err(Error::domain(format!("σ²_max = {sigma_max_sq} must lie in [0, ½)")));
    }
    let x = (n as f64).sqrt() * (1.0 - 2.0 * sigma_max_sq) / 2.0;
    Ok(std::f64::consts::LN_2 - 0.5 * erfc(x).ln())
}

/// Patterns on the unit sphere: `M_max ≥ √(√(8πN)(1 − 2r²)) exp[N(1 − 2r²)²/4]`.
pub fn capacity_bound_sphere(n: usize, r: f64) -> Result<CapacityPrediction> {
    check_n(n)?;
    check_radius(r)?;
    if r * r >= 0.5 {
        return Err(Error::domain(format!("r² = {} must be below ½", r * r)));
    }
    let nf = n as f64;
    let c = 1.0 - 2.0 * r * r;
    let ln_value = 0.5 * ((8.0 * std::f64::consts::PI * nf).sqrt() * c).ln() + nf * c * c / 4.0;
    Ok(CapacityPrediction {
        model: CapacityModel::SphereExpBeta,
        n,
        params: vec![r],
        ln_value,
        flags: flags(n, r, nf.sqrt() * c / std::f64::consts::SQRT_2),
    })
}

/// Bipolar patterns with sparseness `f` and `f̃ = 2f(1 − f)`:
///
/// ```text
/// M_max ≥ 2 (πN / (2f̃(1 − f̃)))^{1/4} (f̃ − 4ρ)^{1/2} exp[N(f̃ − 4ρ)² / (4f̃(1 − f̃))]
/// ```
pub fn capacity_bound_bipolar(n: usize, f: f64, rho_max: f64) -> Result<CapacityPrediction> {
    check_n(n)?;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::domain(format!("sparseness f = {f} must lie in (0, 1)")));
    }
    let ft = 2.0 * f * (1.0 - f);
    if !(rho_max >= 0.0 && 4.0 * rho_max < ft) {
        return Err(Error::domain(format!("ρ_max = {rho_max} must lie in [0, f̃/4) with f̃ = {ft}")));
    }
    let nf = n as f64;
    let v = ft * (1.0 - ft);
    let c = ft - 4.0 * rho_max;
    let ln_value = std::f64::consts::LN_2
        + 0.25 * (std::f64::consts::PI * nf / (2.0 * v)).ln()
        + 0.5 * c.ln()
        + nf * c * c / (4.0 * v);
    Ok(CapacityPrediction {
        model: CapacityModel::BipolarExpBeta,
        n,
        params: vec![f, rho_max],
        ln_value,
        flags: flags(n, rho_max, nf.sqrt() * c / (2.0 * v).sqrt()),
    })
}

/// Largest load at which every pattern is still a support vector of a linear
/// classifier: `N / (2 W₀(N/2))`.
pub fn svp_capacity(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("svp capacity needs n ≥ 2"));
    }
    let nf = n as f64;
    Ok(nf / (2.0 * lambert_w0(nf / 2.0)?))
}

/// Both sides of `erfc(x)⁻¹ ≥ √π x e^{x²}`: returns `(exact, bound)`.
pub fn erfc_inverse_bound_check(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.5) {
        return Err(Error::domain(format!("bound regime requires x > ½, got {x}")));
    }
    Ok((1.0 / erfc(x), std::f64::consts::PI.sqrt() * x * (x * x).exp()))
}
