//! Explicit feature maps and feature-space dimension counts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelSpec;
use crate::rng;
use crate::special::{ln_binomial, regularized_incomplete_beta};

/// Explicit map `φ: ℝ^{n_in} → ℝ^{n_phi}`.
///
/// * `Pairs` lists `x_i x_j` for `i < j` in lexicographic order, unscaled.
/// * `Poly2` lists `1`, then `√2 x_i`, then `√2 x_i x_j` for `i < j`, then
///   `x_i²`, so that `φ(x)ᵀφ(y) = (xᵀy + 1)²`.
/// * `Sdm` is `Θ(Z x − b)` elementwise with `Θ(0) = 1`; the rows of `Z` are
///   the addresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    Identity { n_in: usize },
    Pairs { n_in: usize },
    Poly2 { n_in: usize },
    Sdm { addresses: DMatrix<f64>, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddressSpace {
    Cube,
    Sphere,
}

impl FeatureMap {
    /// Hypercube SDM map whose neurons fire for addresses within `r` bits.
    pub fn sdm_cube(addresses: DMatrix<f64>, r: usize) -> Result<Self> {
        let n_in = addresses.ncols();
        if r > n_in {
            return Err(Error::domain(format!("bit threshold r = {r} exceeds n_in = {n_in}")));
        }
        if addresses.iter().any(|v| *v != 1.0 && *v != -1.0) {
            return Err(Error::domain("hypercube addresses must be ±1"));
        }
        Ok(FeatureMap::Sdm {
            addresses,
            b: n_in as f64 - 2.0 * r as f64,
        })
    }

    pub fn n_in(&self) -> usize {
        match self {
            FeatureMap::Identity { n_in } | FeatureMap::Pairs { n_in } | FeatureMap::Poly2 { n_in } => *n_in,
            FeatureMap::Sdm { addresses, .. } => addresses.ncols(),
        }
    }

    pub fn n_phi(&self) -> usize {
        match self {
            FeatureMap::Identity { n_in } => *n_in,
            FeatureMap::Pairs { n_in } => n_in * n_in.saturating_sub(1) / 2,
            FeatureMap::Poly2 { n_in } => 1 + 2 * n_in + n_in * n_in.saturating_sub(1) / 2,
            FeatureMap::Sdm { addresses, .. } => addresses.nrows(),
        }
    }

    /// Kernel realized exactly by this map, where one exists.
    pub fn equivalent_kernel(&self) -> Option<KernelSpec> {
        match self {
            FeatureMap::Identity { .. } => Some(KernelSpec::Linear),
            FeatureMap::Poly2 { .. } => Some(KernelSpec::PolyInhomogeneous { p: 2 }),
            _ => None,
        }
    }

    /// `φ(x)ᵀφ(y)` without materializing the features.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.n_in(), x.len())?;
        check_dim(self.n_in(), y.len())?;
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        Ok(match self {
            FeatureMap::Identity { .. } => xy,
            FeatureMap::Pairs { .. } => {
                let diag: f64 = x.iter().zip(y).map(|(a, b)| (a * b) * (a * b)).sum();
                0.5 * (xy * xy - diag)
            }
            FeatureMap::Poly2 { .. } => (xy + 1.0) * (xy + 1.0),
            FeatureMap::Sdm { .. } => {
                let px = phi_apply(self, x)?;
                let py = phi_apply(self, y)?;
                px.dot(&py)
            }
        })
    }
}

/// `φ(x)`.
pub fn phi_apply(map: &FeatureMap, x: &[f64]) -> Result<DVector<f64>> {
    check_dim(map.n_in(), x.len())?;
    let n = x.len();
    let mut out = Vec::with_capacity(map.n_phi());
    match map {
        FeatureMap::Identity { .. } => out.extend_from_slice(x),
        FeatureMap::Pairs { .. } => {
            for i in 0..n {
                for j in i + 1..n {
                    out.push(x[i] * x[j]);
                }
            }
        }
        FeatureMap::Poly2 { .. } => {
            let s2 = std::f64::consts::SQRT_2;
            out.push(1.0);
            out.extend(x.iter().map(|v| s2 * v));
            for i in 0..n {
                for j in i + 1..n {
                    out.push(s2 * x[i] * x[j]);
                }
            }
            out.extend(x.iter().map(|v| v * v));
        }
        FeatureMap::Sdm { addresses, b } => {
            let act = addresses * DVector::from_column_slice(x);
            out.extend(act.iter().map(|a| heaviside(a - b)));
        }
    }
    Ok(DVector::from_vec(out))
}

/// Feature matrix `φ(X)` (`n_phi × M`) over the columns of `x`.
pub fn phi_matrix(map: &FeatureMap, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(map.n_in(), x.nrows())?;
    let cols = (0..x.ncols())
        .map(|j| phi_apply(map, x.column(j).as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Heaviside step with `Θ(0) = 1`.
#[inline]
pub fn heaviside(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Size of the feature space of a kernel, stored as a natural logarithm so
/// that exponential counts do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureDimension {
    pub ln_count: f64,
}

impl FeatureDimension {
    pub fn count(&self) -> f64 {
        let v = self.ln_count.exp();
        if v < 9.007_199_254_740_992e15 {
            v.round()
        } else {
            v
        }
    }

    pub fn log10(&self) -> f64 {
        self.ln_count / std::f64::consts::LN_10
    }
}

/// Number of monomial features spanned by a kernel on `n`-dimensional bipolar
/// inputs.
///
/// Homogeneous degree `p` counts the `C(n, p)` multilinear monomials of degree
/// exactly `p` (lower-order terms produced by `x_i² = 1` are not counted);
/// inhomogeneous degree `p` counts every degree up to `p`; the exponential
/// kernel spans all `2^n` multilinear monomials. Infinite-dimensional kernels
/// report `+∞`.
pub fn feature_dimension(spec: &KernelSpec, n: usize) -> Result<FeatureDimension> {
    if n == 0 {
        return Err(Error::domain("feature dimension requires n ≥ 1"));
    }
    spec.validate()?;
    let ln_count = match *spec {
        KernelSpec::Linear => (n as f64).ln(),
        KernelSpec::PolyHomogeneous { p } => {
            if p as usize > n {
                return Err(Error::domain(format!("degree {p} exceeds dimension {n}")));
            }
            ln_binomial(n as u64, p as u64)
        }
        KernelSpec::PolyInhomogeneous { p } => {
            let terms: Vec<f64> = (0..=(p as u64).min(n as u64)).map(|q| ln_binomial(n as u64, q)).collect();
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
        }
        KernelSpec::Exponential => n as f64 * std::f64::consts::LN_2,
        _ => f64::INFINITY,
    };
    Ok(FeatureDimension { ln_count })
}

fn address_row(variant: AddressSpace, n_in: usize, rng: &mut rng::StreamRng, out: &mut [f64]) {
    debug_assert_eq!(out.len(), n_in);
    match variant {
        AddressSpace::Cube => {
            for v in out.iter_mut() {
                *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
        }
        AddressSpace::Sphere => loop {
            for v in out.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        },
    }
}

/// Random address matrix `Z` (`n_phi × n_in`): uniform ±1 entries for the
/// cube, uniformly distributed unit rows for the sphere.
pub fn gen_sdm_addresses(variant: AddressSpace, n_phi: usize, n_in: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n_phi == 0 || n_in == 0 {
        return Err(Error::domain("address matrix requires n_phi ≥ 1 and n_in ≥ 1"));
    }
    let mut rng = rng::stream(seed, &[]);
    let mut z = DMatrix::zeros(n_phi, n_in);
    let mut row = vec![0.0; n_in];
    for k in 0..n_phi {
        address_row(variant, n_in, &mut rng, &mut row);
        for (j, v) in row.iter().enumerate() {
            z[(k, j)] = *v;
        }
    }
    Ok(z)
}

/// Monte Carlo estimate of `φ_SDM(x)ᵀφ_SDM(y) / n_phi` with `n_phi` fresh
/// addresses, streamed so that no address matrix is stored. Returns the
/// estimate and its standard error.
pub fn sdm_overlap_mc(variant: AddressSpace, b: f64, x: &[f64], y: &[f64], n_phi: usize, seed: u64) -> Result<(f64, f64)> {
    check_dim(x.len(), y.len())?;
    if n_phi < 2 {
        return Err(Error::domain("Monte Carlo overlap needs at least two addresses"));
    }
    let n_in = x.len();
    let mut rng = rng::stream(seed, &[]);
    let mut row = vec![0.0; n_in];
    let mut hits = 0usize;
    for _ in 0..n_phi {
        address_row(variant, n_in, &mut rng, &mut row);
        let zx: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        let zy: f64 = row.iter().zip(y).map(|(a, b)| a * b).sum();
        if zx - b >= 0.0 && zy - b >= 0.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / n_phi as f64;
    let se = (p * (1.0 - p) / (n_phi as f64 - 1.0)).sqrt();
    Ok((p, se))
}

/// Fraction of the unit sphere `S^{N−1}` inside a cap `{z : xᵀz ≥ b}`.
pub fn sphere_cap_fraction(n_in: usize, b: f64) -> Result<f64> {
    if n_in < 2 || !(-1.0..=1.0).contains(&b) {
        return Err(Error::domain(format!("cap needs n_in ≥ 2 and b ∈ [−1, 1], got {n_in}, {b}")));
    }
    let a = (n_in as f64 - 1.0) / 2.0;
    let half = 0.5 * regularized_incomplete_beta(1.0 - b * b, a, 0.5)?;
    Ok(if b >= 0.0 { half } else { 1.0 - half })
}

/// Sphere SDM overlap `P(xᵀz ≥ b, yᵀz ≥ b)` for a uniform address `z`,
/// estimated from `n_samples` addresses drawn inside the cap of `x` and
/// rescaled by the cap fraction. Usable when the caps are far too small for
/// plain sampling. Returns the estimate and its standard error.
///
/// The height `t = xᵀz` has density `∝ (1 − t²)^k` with `k = (N − 3)/2`;
/// with `u = 1 − t` it is drawn from the proposal `∝ u^k` and accepted with
/// probability `(1 − u/2)^k`.
pub fn sdm_sphere_overlap_conditional_mc(b: f64, x: &[f64], y: &[f64], n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_dim(x.len(), y.len())?;
    let n_in = x.len();
    if n_in < 3 || !(0.0..1.0).contains(&b) {
        return Err(Error::domain("conditional sampling needs n_in ≥ 3 and b ∈ [0, 1)"));
    }
    if n_samples < 2 {
        return Err(Error::domain("Monte Carlo overlap needs at least two addresses"));
    }
    for v in [x, y] {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("vector norm {norm} is not 1")));
        }
    }
    let cap = sphere_cap_fraction(n_in, b)?;
    let k = (n_in as f64 - 3.0) / 2.0;
    let width = 1.0 - b;
    let mut rng = rng::stream(seed, &[]);
    let mut w = vec![0.0; n_in];
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let u = loop {
            let u = width * rng.random::<f64>().powf(1.0 / (k + 1.0));
            if rng.random::<f64>() < (1.0 - 0.5 * u).powf(k) {
                break u;
            }
        };
        let t = 1.0 - u;
        let proj = loop {
            for v in w.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let along: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(x).for_each(|(a, b)| *a -= along * b);
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break norm;
            }
        };
        let s = (1.0 - t * t).max(0.0).sqrt() / proj;
        let yz: f64 = t * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
            + s * w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        if yz - b >= 0.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    let se = (p * (1.0 - p) / (n_samples as f64 - 1.0)).sqrt();
    Ok((cap * p, cap * se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_eval, sdm_cube_kernel};
    use crate::patterns::{gen_patterns, Geometry};

    #[test]
    fn dimensions() {
        assert_eq!(FeatureMap::Pairs { n_in: 5 }.n_phi(), 10);
        assert_eq!(FeatureMap::Poly2 { n_in: 20 }.n_phi(), 231);
        let x: Vec<f64> = (1..=4).map(|v| v as f64).collect();
        for map in [
            FeatureMap::Identity { n_in: 4 },
            FeatureMap::Pairs { n_in: 4 },
            FeatureMap::Poly2 { n_in: 4 },
        ] {
            assert_eq!(phi_apply(&map, &x).unwrap().len(), map.n_phi());
        }
        assert!(phi_apply(&FeatureMap::Pairs { n_in: 3 }, &x).is_err());
    }

    #[test]
    fn pairs_ordering_is_lexicographic() {
        let phi = phi_apply(&FeatureMap::Pairs { n_in: 4 }, &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(phi.as_slice(), &[2.0, 3.0, 5.0, 6.0, 10.0, 15.0]);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(phi_apply(&FeatureMap::Identity { n_in: 3 }, &x).unwrap().as_slice(), &x);
    }

    #[test]
    fn poly2_gram_matches_inhomogeneous_kernel() {
        let p = gen_patterns(Geometry::Gaussian, 6, 10, 2).unwrap();
        let map = FeatureMap::Poly2 { n_in: 6 };
        let phi = phi_matrix(&map, p.data()).unwrap();
        let spec = KernelSpec::PolyInhomogeneous { p: 2 };
        for a in 0..10 {
            for b in 0..10 {
                let k = kernel_eval(&spec, p.column(a).as_slice(), p.column(b).as_slice()).unwrap();
                let g = phi.column(a).dot(&phi.column(b));
                assert!((k - g).abs() <= 1e-9 * k.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pairs_gram_relates_to_homogeneous_kernel() {
        let p = gen_patterns(Geometry::bipolar(), 9, 5, 4).unwrap();
        let map = FeatureMap::Pairs { n_in: 9 };
        for a in 0..5 {
            for b in 0..5 {
                let (x, y) = (p.column(a), p.column(b));
                let g = phi_apply(&map, x.as_slice()).unwrap().dot(&phi_apply(&map, y.as_slice()).unwrap());
                let k = kernel_eval(&KernelSpec::PolyHomogeneous { p: 2 }, x.as_slice(), y.as_slice()).unwrap();
                assert_eq!(g, (k - 9.0) / 2.0);
                assert_eq!(map.inner(x.as_slice(), y.as_slice()).unwrap(), g);
            }
        }
    }

    #[test]
    fn sdm_threshold_is_inclusive() {
        let x = [1.0, -1.0, 1.0];
        let map = FeatureMap::Sdm {
            addresses: DMatrix::from_row_slice(1, 3, &x),
            b: 3.0,
        };
        assert_eq!(phi_apply(&map, &x).unwrap().as_slice(), &[1.0]);
        let map = FeatureMap::sdm_cube(DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, -1.0, -1.0, -1.0]), 1).unwrap();
        // b = 1: first address is 1 bit from x (fires), second is 2 bits (silent).
        assert_eq!(phi_apply(&map, &x).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn feature_dimension_counts() {
        assert_eq!(feature_dimension(&KernelSpec::Linear, 100).unwrap().count(), 100.0);
        assert_eq!(feature_dimension(&KernelSpec::PolyHomogeneous { p: 2 }, 100).unwrap().count(), 4950.0);
        assert_eq!(feature_dimension(&KernelSpec::Exponential, 30).unwrap().count(), 1_073_741_824.0);
        assert_eq!(feature_dimension(&KernelSpec::PolyInhomogeneous { p: 2 }, 10).unwrap().count(), 56.0);
        let big = feature_dimension(&KernelSpec::Exponential, 5000).unwrap();
        assert!(big.ln_count.is_finite() && big.count().is_infinite());
        assert!(feature_dimension(&KernelSpec::ExpBeta { r: 1.0, beta: 2.0 }, 3).unwrap().ln_count.is_infinite());
    }

    #[test]
    fn addresses() {
        let a = gen_sdm_addresses(AddressSpace::Cube, 4, 3, 8).unwrap();
        assert_eq!(a, gen_sdm_addresses(AddressSpace::Cube, 4, 3, 8).unwrap());
        assert!(a.iter().all(|v| *v == 1.0 || *v == -1.0));
        let s = gen_sdm_addresses(AddressSpace::Sphere, 100, 50, 8).unwrap();
        for row in s.row_iter() {
            assert!((row.norm() - 1.0).abs() <= 1e-12);
        }
        let big = gen_sdm_addresses(AddressSpace::Cube, 100_000, 20, 1).unwrap();
        assert!(big.mean().abs() < 0.01);
    }

    #[test]
    fn cube_overlap_converges_to_kernel() {
        let p = gen_patterns(Geometry::bipolar(), 12, 2, 3).unwrap();
        let (x, y) = (p.column(0), p.column(1));
        let delta = x.iter().zip(y.iter()).filter(|(a, b)| a != b).count();
        let exact = sdm_cube_kernel(12, 4, delta).unwrap();
        let mut errs = Vec::new();
        for n_phi in [1_000, 10_000, 100_000, 1_000_000] {
            let (est, se) = sdm_overlap_mc(AddressSpace::Cube, 12.0 - 8.0, x.as_slice(), y.as_slice(), n_phi, 5).unwrap();
            errs.push((est - exact).abs());
            if n_phi == 1_000_000 {
                assert!((est - exact).abs() <= 3.0 * se, "{est} vs {exact} ± {se}");
            }
        }
        assert!(errs[3] < errs[0].max(1e-3));
    }

    #[test]
    fn conditional_sphere_mc_agrees_with_plain_sampling() {
        let p = gen_patterns(Geometry::Hypersphere, 6, 2, 11).unwrap();
        let (x, y) = (p.column(0), p.column(1));
        let b = 0.3;
        let (plain, se_plain) = sdm_overlap_mc(AddressSpace::Sphere, b, x.as_slice(), x.as_slice(), 200_000, 1).unwrap();
        let cap = sphere_cap_fraction(6, b).unwrap();
        assert!((plain - cap).abs() < 4.0 * se_plain);
        let (a, se_a) = sdm_overlap_mc(AddressSpace::Sphere, b, x.as_slice(), y.as_slice(), 200_000, 2).unwrap();
        let (c, se_c) = sdm_sphere_overlap_conditional_mc(b, x.as_slice(), y.as_slice(), 200_000, 3).unwrap();
        assert!((a - c).abs() < 4.0 * (se_a * se_a + se_c * se_c).sqrt(), "{a} vs {c}");
        let (same, se_same) = sdm_sphere_overlap_conditional_mc(b, x.as_slice(), x.as_slice(), 1000, 4).unwrap();
        assert_eq!((same, se_same), (cap, 0.0));
    }
}
