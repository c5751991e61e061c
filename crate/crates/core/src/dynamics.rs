//! Recall dynamics: feed-forward read-out, recurrent bipolar updates,
//! continuous interpolation updates, zero-temperature `Exp_β` and softmax
//! updates, fixed-point iteration and attractor certification.
//!
//! Bipolar updates use `sgn(0) = +1`. The zero-temperature `Exp_β` step uses
//! `Θ(0) = e⁻¹` exactly, with no tolerance band around the radius.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{column_slice, dot, sq_dist};
use crate::linalg::spectral_norm;
use crate::patterns::min_pairwise_distance_matrix;
use crate::rng;
use crate::sgn;
use crate::training::{NetworkMode, TrainedNetwork};

/// Continuous updates count as converged when no coordinate moves more than this.
pub const CONTINUOUS_TOL: f64 = 1e-12;
/// Residual below which a point is reported as fixed.
pub const FIXED_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub enum UpdateRule<'a> {
    /// One-shot read-out of a hetero-associative network.
    HeteroKernel(&'a TrainedNetwork),
    /// All neurons updated simultaneously.
    AutoSync(&'a TrainedNetwork),
    /// Neurons updated one at a time in a fresh seeded permutation per sweep.
    AutoAsync { net: &'a TrainedNetwork, seed: u64 },
    /// `s ← X C K(X, s)` for an interpolating network.
    InterpSync(&'a TrainedNetwork),
    /// `s ← X Θ(r − ‖X − s‖)`.
    ExpBetaZeroTemp { x: &'a DMatrix<f64>, r: f64 },
    /// `s ← X softmax(β Xᵀ s)`.
    SoftmaxFinite { x: &'a DMatrix<f64>, beta: f64 },
    /// `s ← X argmax(Xᵀ s)`, ties to the lowest index.
    SoftmaxZeroTemp { x: &'a DMatrix<f64> },
}

impl UpdateRule<'_> {
    fn is_bipolar(&self) -> bool {
        matches!(self, UpdateRule::AutoSync(_) | UpdateRule::AutoAsync { .. })
    }

    fn is_differentiable(&self) -> bool {
        matches!(self, UpdateRule::InterpSync(_) | UpdateRule::SoftmaxFinite { .. })
    }

    fn state_dim(&self) -> usize {
        match self {
            UpdateRule::HeteroKernel(net) => net.n_in(),
            UpdateRule::AutoSync(net) | UpdateRule::AutoAsync { net, .. } | UpdateRule::InterpSync(net) => net.n_in(),
            UpdateRule::ExpBetaZeroTemp { x, .. } | UpdateRule::SoftmaxFinite { x, .. } | UpdateRule::SoftmaxZeroTemp { x } => {
                x.nrows()
            }
        }
    }
}

/// Trajectory of a recall run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallTrace {
    /// Initial state followed by every state-changing update.
    pub states: Vec<Vec<f64>>,
    pub converged: bool,
    /// The synchronous bipolar dynamics entered a 2-cycle.
    pub cycle: bool,
    /// Number of state-changing updates.
    pub steps: usize,
    pub terminal: Vec<f64>,
    /// Zero-temperature softmax updates that had to break an argmax tie.
    pub ties: usize,
}

/// Pre-activations `signedᵀ K(X, s) − θ` of every output neuron.
pub fn preactivations(net: &TrainedNetwork, s: &[f64]) -> Result<DVector<f64>> {
    check_dim(net.n_in(), s.len())?;
    let k = net.similarity.column(&net.x_in, s)?;
    Ok(net.signed_coefficients().tr_mul(&k) - &net.thetas)
}

/// `sgn[(A ⊙ X_out) K(X_in, s) − θ]`.
pub fn hetero_recall(net: &TrainedNetwork, s_in: &[f64]) -> Result<DVector<f64>> {
    Ok(preactivations(net, s_in)?.map(sgn))
}

fn require_recurrent(net: &TrainedNetwork) -> Result<()> {
    match net.mode {
        NetworkMode::Hetero => Err(Error::domain("recurrent update requested on a hetero-associative network")),
        _ => Ok(()),
    }
}

/// Overlaps `o_μ = ξ^μ·s`.
fn overlaps(x: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
    (0..x.ncols()).map(|mu| dot(column_slice(x, mu), s)).collect()
}

/// Field of neuron `i` without its self-connection, from the overlaps.
fn field_no_self(net: &TrainedNetwork, signed: &DMatrix<f64>, o: &[f64], s: &[f64], i: usize) -> Result<f64> {
    let mut h = -net.thetas[i];
    for mu in 0..net.m() {
        let xi = net.x_in[(i, mu)];
        h += signed[(mu, i)] * net.similarity.dot_kernel(o[mu] - xi * s[i])?;
    }
    Ok(h)
}

/// Synchronous bipolar update of every neuron.
pub fn auto_step_sync(net: &TrainedNetwork, s: &[f64]) -> Result<DVector<f64>> {
    require_recurrent(net)?;
    check_dim(net.n_in(), s.len())?;
    if net.mode != NetworkMode::AutoNoSelf {
        return Ok(preactivations(net, s)?.map(sgn));
    }
    let signed = net.signed_coefficients();
    let o = overlaps(&net.x_in, s);
    let mut out = DVector::zeros(s.len());
    for i in 0..s.len() {
        out[i] = sgn(field_no_self(net, &signed, &o, s, i)?);
    }
    Ok(out)
}

/// One asynchronous sweep: every neuron is updated once, in a random order
/// drawn from `order_seed`, each seeing the freshest state.
pub fn auto_sweep_async(net: &TrainedNetwork, s: &[f64], order_seed: u64) -> Result<DVector<f64>> {
    require_recurrent(net)?;
    check_dim(net.n_in(), s.len())?;
    let n = s.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(order_seed, &[]));
    let signed = net.signed_coefficients();
    let mut state = s.to_vec();
    let inner = net.similarity.is_inner_product();
    let mut o = overlaps(&net.x_in, &state);
    let mut k = if inner { None } else { Some(net.similarity.column(&net.x_in, &state)?) };
    for &i in &order {
        let h = if net.mode == NetworkMode::AutoNoSelf {
            field_no_self(net, &signed, &o, &state, i)?
        } else if let Some(k) = &k {
            signed.column(i).dot(k) - net.thetas[i]
        } else {
            let mut h = -net.thetas[i];
            for mu in 0..net.m() {
                h += signed[(mu, i)] * net.similarity.dot_kernel(o[mu])?;
            }
            h
        };
        let new = sgn(h);
        if new != state[i] {
            let delta = new - state[i];
            state[i] = new;
            for (mu, om) in o.iter_mut().enumerate() {
                *om += net.x_in[(i, mu)] * delta;
            }
            if k.is_some() {
                k = Some(net.similarity.column(&net.x_in, &state)?);
            }
        }
    }
    Ok(DVector::from_vec(state))
}

/// `s ← X C K(X, s)` for a network trained by interpolation.
pub fn interp_step(net: &TrainedNetwork, s: &[f64]) -> Result<DVector<f64>> {
    if net.coefficient_kind != crate::training::CoefficientKind::Interpolation {
        return Err(Error::domain("interpolation update needs a pseudoinverse-trained network"));
    }
    preactivations(net, s)
}

/// `Θ(r − d)` with `Θ(0) = e⁻¹`.
#[inline]
fn zero_temp_weight(d: f64, r: f64) -> f64 {
    if d < r {
        1.0
    } else if d == r {
        (-1.0f64).exp()
    } else {
        0.0
    }
}

/// `s ← X Θ(r − ‖X − s‖)`: the zero-temperature limit of the `Exp_β` network.
/// Returns the zero vector when no pattern lies within `r`.
pub fn expbeta_zero_temp_step(x: &DMatrix<f64>, r: f64, s: &[f64]) -> Result<DVector<f64>> {
    check_dim(x.nrows(), s.len())?;
    if !(r > 0.0) {
        return Err(Error::domain(format!("radius r = {r} must be positive")));
    }
    let mut out = DVector::zeros(s.len());
    for mu in 0..x.ncols() {
        let col = column_slice(x, mu);
        let w = zero_temp_weight(sq_dist(col, s).sqrt(), r);
        if w != 0.0 {
            for (o, c) in out.iter_mut().zip(col) {
                *o += w * c;
            }
        }
    }
    Ok(out)
}

/// Whether the patterns satisfy `min ‖ξ^μ − ξ^ν‖ > r`, the premise under
/// which every ball of radius `r` around a pattern is a one-step basin.
pub fn expbeta_premise_holds(x: &DMatrix<f64>, r: f64) -> Result<bool> {
    if x.ncols() < 2 {
        return Ok(true);
    }
    Ok(min_pairwise_distance_matrix(x)? > r)
}

/// Softmax update. `beta = None` is the zero-temperature limit, which returns
/// the pattern with the largest overlap (lowest index on ties) and reports
/// whether a tie occurred.
pub fn softmax_step(x: &DMatrix<f64>, beta: Option<f64>, s: &[f64]) -> Result<(DVector<f64>, bool)> {
    check_dim(x.nrows(), s.len())?;
    if x.ncols() == 0 {
        return Err(Error::domain("softmax update needs at least one pattern"));
    }
    let o = overlaps(x, s);
    match beta {
        None => {
            let mut best = 0;
            let mut tie = false;
            for mu in 1..o.len() {
                if o[mu] > o[best] {
                    best = mu;
                    tie = false;
                } else if o[mu] == o[best] {
                    tie = true;
                }
            }
            Ok((x.column(best).into_owned(), tie))
        }
        Some(beta) => {
            if !(beta >= 0.0) || !beta.is_finite() {
                return Err(Error::domain(format!("inverse temperature β = {beta} must be finite and ≥ 0")));
            }
            let max = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = o.iter().map(|v| (beta * (v - max)).exp()).collect();
            let z: f64 = w.iter().sum();
            let p = DVector::from_iterator(w.len(), w.into_iter().map(|v| v / z));
            Ok((x * p, false))
        }
    }
}

/// Apply one update of `rule`; for asynchronous rules `sweep` selects the
/// permutation stream. Returns the new state and whether a tie was broken.
pub fn apply_rule(rule: &UpdateRule<'_>, s: &[f64], sweep: u64) -> Result<(DVector<f64>, bool)> {
    match *rule {
        UpdateRule::HeteroKernel(net) => Ok((hetero_recall(net, s)?, false)),
        UpdateRule::AutoSync(net) => Ok((auto_step_sync(net, s)?, false)),
        UpdateRule::AutoAsync { net, seed } => Ok((auto_sweep_async(net, s, rng::derive_seed(seed, &[sweep]))?, false)),
        UpdateRule::InterpSync(net) => Ok((interp_step(net, s)?, false)),
        UpdateRule::ExpBetaZeroTemp { x, r } => Ok((expbeta_zero_temp_step(x, r, s)?, false)),
        UpdateRule::SoftmaxFinite { x, beta } => softmax_step(x, Some(beta), s),
        UpdateRule::SoftmaxZeroTemp { x } => softmax_step(x, None, s),
    }
}

fn same_state(a: &[f64], b: &[f64], bipolar: bool) -> bool {
    if bipolar {
        a == b
    } else {
        a.iter().zip(b).all(|(p, q)| (p - q).abs() <= CONTINUOUS_TOL)
    }
}

/// Patterns whose norm equals `r / (1 − e⁻¹)`, for which the zero-temperature
/// update from the origin can stall on a boundary chain.
pub fn expbeta_degenerate_patterns(x: &DMatrix<f64>, r: f64) -> Vec<usize> {
    let special = r / (1.0 - (-1.0f64).exp());
    (0..x.ncols())
        .filter(|&mu| (x.column(mu).norm() - special).abs() <= 1e-12 * special)
        .collect()
}

/// A hetero-associative read-out as a one-step trace holding only the output.
pub fn hetero_trace(net: &TrainedNetwork, s_in: &[f64]) -> Result<RecallTrace> {
    let out: Vec<f64> = hetero_recall(net, s_in)?.iter().copied().collect();
    Ok(RecallTrace {
        states: vec![out.clone()],
        converged: true,
        cycle: false,
        steps: 1,
        terminal: out,
        ties: 0,
    })
}

/// Iterate `rule` from `s0` until the state stops changing or `max_steps`
/// updates have been applied. Synchronous bipolar runs that alternate between
/// two states are reported as a cycle rather than converged.
pub fn run_to_fixed_point(rule: &UpdateRule<'_>, s0: &[f64], max_steps: usize) -> Result<RecallTrace> {
    if max_steps == 0 {
        return Err(Error::domain("max_steps must be ≥ 1"));
    }
    if let UpdateRule::HeteroKernel(_) = rule {
        return Err(Error::domain("hetero-associative recall is a single read-out, not a recurrent run"));
    }
    check_dim(rule.state_dim(), s0.len())?;
    if let UpdateRule::ExpBetaZeroTemp { x, r } = rule {
        let degenerate = expbeta_degenerate_patterns(x, *r);
        if !degenerate.is_empty() {
            log::warn!("patterns {degenerate:?} have norm r/(1 − e⁻¹); recall from the origin may stall");
        }
    }
    let bipolar = rule.is_bipolar();
    let sync_bipolar = matches!(rule, UpdateRule::AutoSync(_));
    let mut states = vec![s0.to_vec()];
    let mut converged = false;
    let mut cycle = false;
    let mut ties = 0;
    for t in 0..max_steps {
        let current = states.last().unwrap();
        let (next, tie) = apply_rule(rule, current, t as u64)?;
        ties += tie as usize;
        if same_state(next.as_slice(), current, bipolar) {
            converged = true;
            break;
        }
        if sync_bipolar && states.len() >= 2 && states[states.len() - 2].as_slice() == next.as_slice() {
            states.push(next.as_slice().to_vec());
            cycle = true;
            break;
        }
        states.push(next.as_slice().to_vec());
    }
    let terminal = states.last().unwrap().clone();
    Ok(RecallTrace {
        steps: states.len() - 1,
        states,
        converged,
        cycle,
        terminal,
        ties,
    })
}

/// Fixed-point status and Jacobian norms of a continuous update at `point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorCertificate {
    pub is_fixed: bool,
    pub residual: f64,
    pub frobenius_norm: f64,
    pub spectral_norm: f64,
}

impl AttractorCertificate {
    /// Locally attracting: fixed with a contracting Jacobian.
    pub fn is_attracting(&self) -> bool {
        self.is_fixed && self.spectral_norm < 1.0
    }
}

/// Numerical Jacobian by central differences with step `10⁻⁶ (1 + ‖p‖)`.
pub fn certify_attractor(rule: &UpdateRule<'_>, point: &[f64]) -> Result<AttractorCertificate> {
    if !rule.is_differentiable() {
        return Err(Error::domain("attractor certification needs a differentiable update rule"));
    }
    check_dim(rule.state_dim(), point.len())?;
    let n = point.len();
    let (image, _) = apply_rule(rule, point, 0)?;
    let residual = image
        .iter()
        .zip(point)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let h = 1e-6 * (1.0 + dot(point, point).sqrt());
    let mut jac = DMatrix::zeros(image.len(), n);
    let mut probe = point.to_vec();
    for j in 0..n {
        probe[j] = point[j] + h;
        let (plus, _) = apply_rule(rule, &probe, 0)?;
        probe[j] = point[j] - h;
        let (minus, _) = apply_rule(rule, &probe, 0)?;
        probe[j] = point[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Ok(AttractorCertificate {
        is_fixed: residual < FIXED_POINT_TOL,
        residual,
        frobenius_norm: jac.norm(),
        spectral_norm: spectral_norm(&jac),
    })
}
