//! Learning rules producing the Lagrange (or interpolation) coefficients of a
//! kernel memory network.
//!
//! Every output neuron `i` is an independent classifier with decision function
//!
//! ```text
//! f_i(x) = Σ_μ α_i^μ y_i^μ K(ξ^μ, x) − θ_i
//! ```
//!
//! where `y_i^μ` is entry `i` of the target pattern `μ`. Interpolating
//! networks (pseudoinverse rules) instead store unconstrained coefficients
//! `C = K† Yᵀ` and evaluate `f_i(x) = Σ_μ C_{μi} K(ξ^μ, x)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::features::{phi_matrix, FeatureMap};
use crate::kernels::{self, column_slice, dot, KernelSpec};
use crate::linalg::pinv;
use crate::rng;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Default sweep budget per pattern: `max_sweeps = 10⁴ · M`.
pub const DEFAULT_SWEEPS_PER_PATTERN: usize = 10_000;
pub const DEFAULT_SBP_BATCH: usize = 64;
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkMode {
    /// Feed-forward map from `X_in` to `X_out`.
    Hetero,
    /// Recurrent bipolar network; neurons see the full state.
    AutoWithSelf,
    /// Recurrent bipolar network; neuron `i` ignores its own state.
    AutoNoSelf,
    /// Recurrent continuous network trained by minimum-norm interpolation.
    ContinuousInterp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    /// `θ = 0`, no equality constraint in the dual.
    FixedZero,
    /// `θ` optimized together with `α` (constraint `Σ α y = 0`).
    Trained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LearningRule {
    HardMarginDual,
    /// Learning rate defaults to `1 / max_μ K_μμ`.
    KernelAdatron { lr: Option<f64> },
    StochasticBatchPerceptron { lr: f64, iters: usize, batch: usize },
    HebbianOneShot,
    Pseudoinverse,
    GeneralizedPseudoinverse,
}

impl LearningRule {
    pub fn is_interpolating(&self) -> bool {
        matches!(self, LearningRule::Pseudoinverse | LearningRule::GeneralizedPseudoinverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rule: LearningRule,
    pub bias_mode: BiasMode,
    pub tolerance: f64,
    /// Sweep budget; `None` means `10⁴ · M`.
    pub max_sweeps: Option<usize>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(rule: LearningRule) -> Self {
        SolverConfig {
            rule,
            bias_mode: BiasMode::FixedZero,
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: None,
            seed: 0,
        }
    }

    pub fn hard_margin() -> Self {
        SolverConfig::new(LearningRule::HardMarginDual)
    }

    pub fn with_bias(mut self, bias_mode: BiasMode) -> Self {
        self.bias_mode = bias_mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_sweeps(mut self, max_sweeps: usize) -> Self {
        self.max_sweeps = Some(max_sweeps);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::domain(format!("tolerance {} must be positive", self.tolerance)));
        }
        match self.rule {
            LearningRule::KernelAdatron { lr: Some(lr) } if !(lr > 0.0) => {
                Err(Error::domain(format!("learning rate {lr} must be positive")))
            }
            LearningRule::StochasticBatchPerceptron { lr, batch, .. } => {
                if !(lr > 0.0) {
                    return Err(Error::domain(format!("learning rate {lr} must be positive")));
                }
                if batch == 0 {
                    return Err(Error::domain("SBP batch size must be ≥ 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Kernel or explicit feature map through which the network compares states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Similarity {
    Kernel(KernelSpec),
    Feature(FeatureMap),
}

impl From<KernelSpec> for Similarity {
    fn from(spec: KernelSpec) -> Self {
        Similarity::Kernel(spec)
    }
}

impl From<FeatureMap> for Similarity {
    fn from(map: FeatureMap) -> Self {
        Similarity::Feature(map)
    }
}

impl Similarity {
    /// `K(X, X)`; for feature maps, `φ(X)ᵀφ(X)`.
    pub fn gram(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Similarity::Kernel(spec) => kernels::kernel_matrix(spec, x),
            Similarity::Feature(map @ FeatureMap::Sdm { .. }) => {
                let phi = phi_matrix(map, x)?;
                kernels::kernel_matrix_with(&phi, None, |a, b| Ok(dot(a, b)))
            }
            Similarity::Feature(map) => kernels::kernel_matrix_with(x, Some(map.n_in()), |a, b| map.inner(a, b)),
        }
    }

    /// `K(X, s)`; for feature maps, `φ(X)ᵀφ(s)`.
    pub fn column(&self, x: &DMatrix<f64>, s: &[f64]) -> Result<DVector<f64>> {
        match self {
            Similarity::Kernel(spec) => kernels::kernel_column(spec, x, s),
            Similarity::Feature(map @ FeatureMap::Sdm { .. }) => {
                check_dim(x.nrows(), s.len())?;
                let phi_x = phi_matrix(map, x)?;
                let phi_s = crate::features::phi_apply(map, s)?;
                Ok(phi_x.tr_mul(&phi_s))
            }
            Similarity::Feature(map) => {
                check_dim(x.nrows(), s.len())?;
                let mut out = DVector::zeros(x.ncols());
                for j in 0..x.ncols() {
                    out[j] = map.inner(column_slice(x, j), s)?;
                }
                Ok(out)
            }
        }
    }

    /// `k(t)` when the similarity is a function of the inner product alone.
    pub fn dot_kernel(&self, t: f64) -> Result<f64> {
        match self {
            Similarity::Kernel(spec) => spec.of_dot(t),
            Similarity::Feature(FeatureMap::Identity { .. }) => Ok(t),
            Similarity::Feature(_) => Err(Error::domain("feature map is not of inner-product form")),
        }
    }

    pub fn is_inner_product(&self) -> bool {
        match self {
            Similarity::Kernel(spec) => spec.is_inner_product(),
            Similarity::Feature(map) => matches!(map, FeatureMap::Identity { .. }),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            Similarity::Kernel(KernelSpec::Linear) | Similarity::Feature(FeatureMap::Identity { .. })
        )
    }

    pub fn label(&self) -> String {
        match self {
            Similarity::Kernel(spec) => spec.to_string(),
            Similarity::Feature(FeatureMap::Identity { .. }) => "feature:identity".into(),
            Similarity::Feature(FeatureMap::Pairs { .. }) => "feature:pairs".into(),
            Similarity::Feature(FeatureMap::Poly2 { .. }) => "feature:poly2".into(),
            Similarity::Feature(FeatureMap::Sdm { .. }) => "feature:sdm".into(),
        }
    }
}

/// Result of training one output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronSolution {
    pub alpha: DVector<f64>,
    pub theta: f64,
    /// Minimum signed distance to the decision boundary; `+∞` when the
    /// constraints are met with a zero weight vector.
    pub margin: f64,
    pub converged: bool,
    /// Full passes over the patterns (or iterations for SBP).
    pub sweeps: usize,
    /// Some constraint is still violated with the wrong sign after the budget.
    pub infeasible_suspected: bool,
}

fn check_targets(k: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::domain("kernel matrix must be square"));
    }
    check_dim(k.nrows(), y.len())?;
    if y.iter().any(|v| *v != 1.0 && *v != -1.0) {
        return Err(Error::domain("classifier targets must be ±1"));
    }
    Ok(())
}

/// `g_μ = y_μ Σ_ν α_ν y_ν K_νμ` (signed output before the threshold).
fn signed_outputs(k: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> Vec<f64> {
    let m = y.len();
    let mut g = vec![0.0; m];
    for nu in 0..m {
        let c = alpha[nu] * y[nu];
        if c == 0.0 {
            continue;
        }
        let col = column_slice(k, nu);
        for mu in 0..m {
            g[mu] += c * col[mu];
        }
    }
    for mu in 0..m {
        g[mu] *= y[mu];
    }
    g
}

/// Minimum margin of the kernel-form classifier `(α, θ)`.
///
/// `‖w‖² = αᵀ(yyᵀ ⊙ K)α`. Errors when `‖w‖ = 0` unless every constraint is
/// satisfied by the threshold alone, in which case the margin is `+∞`.
pub fn margin_dual(k: &DMatrix<f64>, y: &[f64], alpha: &[f64], theta: f64) -> Result<f64> {
    check_targets(k, y)?;
    check_dim(y.len(), alpha.len())?;
    let g = signed_outputs(k, y, alpha);
    let w2: f64 = alpha.iter().zip(&g).map(|(a, g)| a * g).sum();
    let min_out = (0..y.len()).map(|mu| g[mu] - y[mu] * theta).fold(f64::INFINITY, f64::min);
    if w2 <= 0.0 {
        if min_out > 0.0 {
            return Ok(f64::INFINITY);
        }
        return Err(Error::domain("margin undefined for a zero weight vector"));
    }
    Ok(min_out / w2.sqrt())
}

/// Minimum margin `min_μ y_μ (wᵀφ_μ − θ) / ‖w‖` of explicit weights; `phi`
/// holds one feature vector per column.
pub fn margin_weights(w: &DVector<f64>, theta: f64, phi: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    check_dim(phi.nrows(), w.len())?;
    check_dim(phi.ncols(), y.len())?;
    let norm = w.norm();
    if norm == 0.0 {
        return Err(Error::domain("margin undefined for a zero weight vector"));
    }
    let out = phi.tr_mul(w);
    Ok((0..y.len()).map(|mu| y[mu] * (out[mu] - theta)).fold(f64::INFINITY, f64::min) / norm)
}

/// Explicit weights `w = Σ_μ α_μ y_μ φ_μ`.
pub fn weights_from_dual(phi: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> Result<DVector<f64>> {
    check_dim(phi.ncols(), y.len())?;
    check_dim(y.len(), alpha.len())?;
    let c = DVector::from_iterator(y.len(), y.iter().zip(alpha).map(|(y, a)| y * a));
    Ok(phi * c)
}

fn kkt_holds(g: &[f64], alpha: &[f64], tol: f64) -> bool {
    g.iter()
        .zip(alpha)
        .all(|(g, a)| *g >= 1.0 - tol && a * (g - 1.0).abs() <= tol)
}

/// Optimal hard-margin classifier for one neuron.
///
/// With `BiasMode::FixedZero` the dual is solved by exact coordinate ascent
/// (`α_μ ← max(0, α_μ + (1 − y_μ f_μ)/K_μμ)`) over a seeded random
/// permutation per sweep, stopping once `y_μ f_μ ≥ 1 − tol` and
/// `α_μ |y_μ f_μ − 1| ≤ tol` for all `μ`. With `BiasMode::Trained` the dual
/// gains the constraint `Σ α y = 0` and is solved by SMO with second-order
/// working-set selection.
pub fn train_neuron_hard_margin(k: &DMatrix<f64>, y: &[f64], cfg: &SolverConfig) -> Result<NeuronSolution> {
    cfg.validate()?;
    check_targets(k, y)?;
    match cfg.bias_mode {
        BiasMode::FixedZero => coordinate_ascent(k, y, cfg, None),
        BiasMode::Trained => smo(k, y, cfg),
    }
}

/// Kernel-Adatron: `α_μ ← max(0, α_μ + η (1 − y_μ f_μ))` with `θ = 0`.
pub fn train_neuron_adatron(k: &DMatrix<f64>, y: &[f64], lr: Option<f64>, cfg: &SolverConfig) -> Result<NeuronSolution> {
    cfg.validate()?;
    check_targets(k, y)?;
    if cfg.bias_mode == BiasMode::Trained {
        return Err(Error::domain("the Kernel-Adatron trains without a threshold; use bias mode fixed-zero"));
    }
    let max_diag = (0..k.nrows()).map(|i| k[(i, i)]).fold(0.0, f64::max);
    let lr = lr.unwrap_or(1.0 / max_diag);
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::domain("Adatron learning rate must be positive"));
    }
    coordinate_ascent(k, y, cfg, Some(lr))
}

fn coordinate_ascent(k: &DMatrix<f64>, y: &[f64], cfg: &SolverConfig, lr: Option<f64>) -> Result<NeuronSolution> {
    let m = y.len();
    for mu in 0..m {
        if !(k[(mu, mu)] > 0.0) {
            return Err(Error::domain(format!("kernel diagonal K[{mu}][{mu}] must be positive")));
        }
    }
    let max_sweeps = cfg.max_sweeps.unwrap_or(DEFAULT_SWEEPS_PER_PATTERN * m).max(1);
    let mut rng = rng::stream(cfg.seed, &[rng::tag("coordinate-ascent")]);
    let mut alpha = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        order.shuffle(&mut rng);
        for &mu in &order {
            let step = lr.unwrap_or(1.0 / k[(mu, mu)]);
            let new = (alpha[mu] + step * (1.0 - g[mu])).max(0.0);
            let delta = new - alpha[mu];
            if delta == 0.0 {
                continue;
            }
            alpha[mu] = new;
            let c = delta * y[mu];
            let col = column_slice(k, mu);
            for nu in 0..m {
                g[nu] += c * y[nu] * col[nu];
            }
        }
        if sweeps % REFRESH_EVERY == 0 {
            g = signed_outputs(k, y, &alpha);
        }
        if kkt_holds(&g, &alpha, cfg.tolerance) {
            g = signed_outputs(k, y, &alpha);
            if kkt_holds(&g, &alpha, cfg.tolerance) {
                converged = true;
                break;
            }
        }
    }
    let g = signed_outputs(k, y, &alpha);
    let infeasible_suspected = !converged && g.iter().any(|v| *v < 0.0);
    let margin = margin_dual(k, y, &alpha, 0.0)?;
    Ok(NeuronSolution {
        alpha: DVector::from_vec(alpha),
        theta: 0.0,
        margin,
        converged,
        sweeps,
        infeasible_suspected,
    })
}

fn smo(k: &DMatrix<f64>, y: &[f64], cfg: &SolverConfig) -> Result<NeuronSolution> {
    let m = y.len();
    if y.iter().all(|v| *v == y[0]) {
        // Σ α y = 0 forces α = 0; the threshold alone separates the data.
        return Ok(NeuronSolution {
            alpha: DVector::zeros(m),
            theta: -y[0],
            margin: f64::INFINITY,
            converged: true,
            sweeps: 0,
            infeasible_suspected: false,
        });
    }
    let max_iter = cfg.max_sweeps.unwrap_or(DEFAULT_SWEEPS_PER_PATTERN * m).max(1).saturating_mul(m);
    let tau = 1e-12;
    let mut alpha = vec![0.0; m];
    // Gradient of ½αᵀQα − Σα with Q = yyᵀ ⊙ K.
    let mut grad = vec![-1.0; m];
    let mut converged = false;
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..m {
            let v = -y[t] * grad[t];
            let up = y[t] > 0.0 || alpha[t] > 0.0;
            let low = y[t] < 0.0 || alpha[t] > 0.0;
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
            }
        }
        if gmax - gmin < cfg.tolerance {
            converged = true;
            break;
        }
        let ki = column_slice(k, i);
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..m {
            let low = y[t] < 0.0 || alpha[t] > 0.0;
            if !low {
                continue;
            }
            let v = -y[t] * grad[t];
            let b = gmax - v;
            if b > 0.0 {
                let mut a = ki[i] + k[(t, t)] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = tau;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            converged = true;
            break;
        }
        let kj = column_slice(k, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let mut quad = ki[i] + kj[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
        } else {
            let mut quad = ki[i] + kj[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }
    let g = signed_outputs(k, y, &alpha);
    let free: Vec<usize> = (0..m).filter(|&t| alpha[t] > 0.0).collect();
    let theta = if free.is_empty() {
        0.0
    } else {
        free.iter().map(|&t| y[t] * (g[t] - 1.0)).sum::<f64>() / free.len() as f64
    };
    let infeasible_suspected = !converged && (0..m).any(|t| g[t] - y[t] * theta < 0.0);
    let margin = margin_dual(k, y, &alpha, theta)?;
    Ok(NeuronSolution {
        alpha: DVector::from_vec(alpha),
        theta,
        margin,
        converged,
        sweeps: iter.div_ceil(m),
        infeasible_suspected,
    })
}

/// Stochastic batch perceptron on a precomputed kernel matrix.
///
/// The weight vector `v = Σ_μ β_μ y_μ φ_μ` is kept at unit norm. Each
/// iteration draws `batch` indices uniformly with replacement, picks the one
/// with the smallest margin `y_μ vᵀφ_μ` (lowest index on ties), applies
/// `v ← v + lr·y_μ φ_μ` and renormalizes. Returns `β ≥ 0`.
pub fn train_sbp_kernel(k: &DMatrix<f64>, y: &[f64], lr: f64, iters: usize, batch: usize, seed: u64) -> Result<DVector<f64>> {
    check_targets(k, y)?;
    if !(lr > 0.0) || batch == 0 {
        return Err(Error::domain("SBP requires lr > 0 and batch ≥ 1"));
    }
    let m = y.len();
    let mut rng = rng::stream(seed, &[rng::tag("sbp")]);
    // β = scale · b and margins = scale · h, so renormalization is O(1).
    let mut b = vec![0.0; m];
    let mut h = vec![0.0; m];
    let mut scale = 1.0;
    let mut norm_sq = 0.0;
    let q = DMatrix::from_fn(m, m, |a, c| y[a] * y[c] * k[(a, c)]);
    for _ in 0..iters {
        let mut star = rng.random_range(0..m);
        for _ in 1..batch {
            let t = rng.random_range(0..m);
            if h[t] < h[star] || (h[t] == h[star] && t < star) {
                star = t;
            }
        }
        let step = lr / scale;
        b[star] += step;
        let col = column_slice(&q, star);
        for (hv, qv) in h.iter_mut().zip(col) {
            *hv += step * qv;
        }
        // ‖v + lr y*φ*‖² with ‖v‖² = norm_sq and y* vᵀφ* = scale · h*_old.
        let m_old = scale * (h[star] - step * col[star]);
        norm_sq = norm_sq + 2.0 * lr * m_old + lr * lr * col[star];
        let norm = norm_sq.sqrt();
        scale /= norm;
        norm_sq = 1.0;
        if scale < 1e-150 || scale > 1e150 {
            b.iter_mut().for_each(|v| *v *= scale);
            h.iter_mut().for_each(|v| *v *= scale);
            scale = 1.0;
        }
    }
    Ok(DVector::from_iterator(m, b.into_iter().map(|v| v * scale)))
}

/// Stochastic batch perceptron in feature form: returns `w` with `‖w‖ = 1`.
pub fn train_sbp(phi: &DMatrix<f64>, y: &[f64], lr: f64, iters: usize, seed: u64) -> Result<DVector<f64>> {
    let k = kernels::kernel_matrix_with(phi, None, |a, b| Ok(dot(a, b)))?;
    let beta = train_sbp_kernel(&k, y, lr, iters, DEFAULT_SBP_BATCH, seed)?;
    weights_from_dual(phi, y, beta.as_slice())
}

/// Train one neuron with any margin-based rule.
pub fn train_neuron(k: &DMatrix<f64>, y: &[f64], cfg: &SolverConfig) -> Result<NeuronSolution> {
    cfg.validate()?;
    check_targets(k, y)?;
    match cfg.rule {
        LearningRule::HardMarginDual => train_neuron_hard_margin(k, y, cfg),
        LearningRule::KernelAdatron { lr } => train_neuron_adatron(k, y, lr, cfg),
        LearningRule::StochasticBatchPerceptron { lr, iters, batch } => {
            let alpha = train_sbp_kernel(k, y, lr, iters, batch, cfg.seed)?;
            let margin = margin_dual(k, y, alpha.as_slice(), 0.0)?;
            Ok(NeuronSolution {
                alpha,
                theta: 0.0,
                margin,
                converged: margin > 0.0,
                sweeps: iters,
                infeasible_suspected: false,
            })
        }
        LearningRule::HebbianOneShot => {
            let alpha = vec![1.0; y.len()];
            let margin = margin_dual(k, y, &alpha, 0.0)?;
            Ok(NeuronSolution {
                alpha: DVector::from_vec(alpha),
                theta: 0.0,
                margin,
                converged: true,
                sweeps: 0,
                infeasible_suspected: false,
            })
        }
        LearningRule::Pseudoinverse | LearningRule::GeneralizedPseudoinverse => Err(Error::domain(
            "pseudoinverse rules train whole networks; use train_network",
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientKind {
    /// Non-negative `α`, combined with the target signs at recall.
    Lagrange,
    /// Unconstrained `C = K† Yᵀ`, already carrying the targets.
    Interpolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMetadata {
    pub rule: LearningRule,
    pub bias_mode: BiasMode,
    pub tol: f64,
    pub seed: u64,
    pub converged_per_row: Vec<bool>,
    pub sweeps: Vec<usize>,
    pub infeasible_per_row: Vec<bool>,
    pub margins: Vec<f64>,
}

/// A trained hetero- or auto-associative network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNetwork {
    pub mode: NetworkMode,
    pub similarity: Similarity,
    pub coefficient_kind: CoefficientKind,
    /// `M × N_out`: column `i` holds neuron `i`'s coefficients.
    pub alphas: DMatrix<f64>,
    pub thetas: DVector<f64>,
    /// Stored inputs, one pattern per column.
    pub x_in: DMatrix<f64>,
    /// Stored targets, one pattern per column (equal to `x_in` for recurrent modes).
    pub x_out: DMatrix<f64>,
    pub solver: SolverMetadata,
}

impl TrainedNetwork {
    pub fn n_in(&self) -> usize {
        self.x_in.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.x_out.nrows()
    }

    pub fn m(&self) -> usize {
        self.x_in.ncols()
    }

    /// `M × N_out` matrix `A ⊙ X_outᵀ` (Lagrange) or `C` (interpolation), so
    /// that pre-activations are `signedᵀ K(X, s) − θ`.
    pub fn signed_coefficients(&self) -> DMatrix<f64> {
        match self.coefficient_kind {
            CoefficientKind::Interpolation => self.alphas.clone(),
            CoefficientKind::Lagrange => self.alphas.component_mul(&self.x_out.transpose()),
        }
    }

    pub fn all_converged(&self) -> bool {
        self.solver.converged_per_row.iter().all(|c| *c)
    }

    pub fn is_recurrent(&self) -> bool {
        self.mode != NetworkMode::Hetero
    }
}

/// Kernel matrix seen by neuron `i` of a network without self-connections:
/// `K_i[μ][ν] = k(ξ^μ·ξ^ν − ξ_i^μ ξ_i^ν)`.
pub fn reduced_gram(similarity: &Similarity, x: &DMatrix<f64>, inner: &DMatrix<f64>, i: usize) -> Result<DMatrix<f64>> {
    let m = x.ncols();
    let mut k = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = similarity.dot_kernel(inner[(a, b)] - x[(i, a)] * x[(i, b)])?;
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    Ok(k)
}

fn inner_products(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    kernels::kernel_matrix_with(x, None, |a, b| Ok(dot(a, b)))
}

/// Train every output neuron independently (in parallel, aggregated by index).
///
/// `x_out` must equal `x_in` for the recurrent modes. Neurons of an
/// `AutoNoSelf` network are trained on their reduced kernel matrices, which
/// requires an inner-product kernel.
pub fn train_network(
    x_in: &DMatrix<f64>,
    x_out: &DMatrix<f64>,
    mode: NetworkMode,
    similarity: Similarity,
    cfg: &SolverConfig,
) -> Result<TrainedNetwork> {
    cfg.validate()?;
    let m = x_in.ncols();
    if m == 0 || x_in.nrows() == 0 {
        return Err(Error::domain("training requires at least one pattern"));
    }
    check_dim(m, x_out.ncols())?;
    if mode != NetworkMode::Hetero && x_in != x_out {
        return Err(Error::domain("recurrent modes require X_out = X_in"));
    }
    if mode == NetworkMode::AutoNoSelf && !similarity.is_inner_product() {
        return Err(Error::domain("networks without self-connections need an inner-product kernel"));
    }
    if mode == NetworkMode::ContinuousInterp && !cfg.rule.is_interpolating() {
        return Err(Error::domain("continuous networks are trained with a pseudoinverse rule"));
    }
    if cfg.rule == LearningRule::Pseudoinverse && !similarity.is_linear() {
        return Err(Error::domain("the plain pseudoinverse rule uses the linear kernel; use the generalized rule"));
    }
    if cfg.rule.is_interpolating() && mode == NetworkMode::AutoNoSelf {
        return Err(Error::domain("pseudoinverse rules are defined with self-connections"));
    }
    if mode != NetworkMode::ContinuousInterp && !cfg.rule.is_interpolating() {
        if x_out.iter().any(|v| *v != 1.0 && *v != -1.0) {
            return Err(Error::domain("margin-trained networks need bipolar targets"));
        }
    }
    let n_out = x_out.nrows();

    if cfg.rule.is_interpolating() {
        let k = similarity.gram(x_in)?;
        let c = pinv(&k)? * x_out.transpose();
        let residual = (&k * &c - x_out.transpose()).abs().max();
        log::debug!("interpolation residual {residual:e}");
        return Ok(TrainedNetwork {
            mode,
            similarity,
            coefficient_kind: CoefficientKind::Interpolation,
            alphas: c,
            thetas: DVector::zeros(n_out),
            x_in: x_in.clone(),
            x_out: x_out.clone(),
            solver: SolverMetadata {
                rule: cfg.rule,
                bias_mode: cfg.bias_mode,
                tol: cfg.tolerance,
                seed: cfg.seed,
                converged_per_row: vec![true; n_out],
                sweeps: vec![0; n_out],
                infeasible_per_row: vec![false; n_out],
                margins: vec![f64::NAN; n_out],
            },
        });
    }

    let shared = if mode == NetworkMode::AutoNoSelf {
        None
    } else {
        Some(similarity.gram(x_in)?)
    };
    let inner = if mode == NetworkMode::AutoNoSelf {
        Some(inner_products(x_in)?)
    } else {
        None
    };
    let solutions: Vec<NeuronSolution> = (0..n_out)
        .into_par_iter()
        .map(|i| {
            let y: Vec<f64> = x_out.row(i).iter().copied().collect();
            let neuron_cfg = SolverConfig {
                seed: rng::derive_seed(cfg.seed, &[i as u64]),
                ..*cfg
            };
            match (&shared, &inner) {
                (Some(k), _) => train_neuron(k, &y, &neuron_cfg),
                (None, Some(g)) => {
                    let k = reduced_gram(&similarity, x_in, g, i)?;
                    train_neuron(&k, &y, &neuron_cfg)
                }
                _ => unreachable!(),
            }
        })
        .collect::<Result<_>>()?;

    let mut alphas = DMatrix::zeros(m, n_out);
    let mut thetas = DVector::zeros(n_out);
    for (i, s) in solutions.iter().enumerate() {
        alphas.set_column(i, &s.alpha);
        thetas[i] = s.theta;
    }
    Ok(TrainedNetwork {
        mode,
        similarity,
        coefficient_kind: CoefficientKind::Lagrange,
        alphas,
        thetas,
        x_in: x_in.clone(),
        x_out: x_out.clone(),
        solver: SolverMetadata {
            rule: cfg.rule,
            bias_mode: cfg.bias_mode,
            tol: cfg.tolerance,
            seed: cfg.seed,
            converged_per_row: solutions.iter().map(|s| s.converged).collect(),
            sweeps: solutions.iter().map(|s| s.sweeps).collect(),
            infeasible_per_row: solutions.iter().map(|s| s.infeasible_suspected).collect(),
            margins: solutions.iter().map(|s| s.margin).collect(),
        },
    })
}

/// Auto-associative convenience wrapper around [`train_network`].
pub fn train_auto(x: &DMatrix<f64>, mode: NetworkMode, similarity: impl Into<Similarity>, cfg: &SolverConfig) -> Result<TrainedNetwork> {
    train_network(x, x, mode, similarity.into(), cfg)
}

/// Minimum-norm interpolating network (`C = K† Xᵀ`) with the given kernel or
/// feature map. Uses the plain rule for linear similarity.
pub fn pseudoinverse_train(x: &DMatrix<f64>, similarity: impl Into<Similarity>, mode: NetworkMode) -> Result<TrainedNetwork> {
    let similarity = similarity.into();
    let rule = if similarity.is_linear() {
        LearningRule::Pseudoinverse
    } else {
        LearningRule::GeneralizedPseudoinverse
    };
    train_network(x, x, mode, similarity, &SolverConfig::new(rule))
}
