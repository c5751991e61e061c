//! Pattern ensembles and noise models.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Number of times a colliding column is redrawn before giving up.
pub const MAX_RESAMPLES: usize = 100;

const CONTINUOUS_DUP_TOL: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Entries in {−1, +1} with `P(ξ = +1) = f`.
    Bipolar { f: f64 },
    /// Entries drawn from N(0, 1).
    Gaussian,
    /// Columns uniformly distributed on the unit sphere S^{N−1}.
    Hypersphere,
}

impl Geometry {
    pub fn bipolar() -> Self {
        Geometry::Bipolar { f: 0.5 }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Geometry::Bipolar { .. } => "bipolar",
            Geometry::Gaussian => "gaussian",
            Geometry::Hypersphere => "sphere",
        }
    }

    pub fn is_bipolar(&self) -> bool {
        matches!(self, Geometry::Bipolar { .. })
    }

    fn validate(&self) -> Result<()> {
        if let Geometry::Bipolar { f } = self {
            if !(*f > 0.0 && *f < 1.0) {
                return Err(Error::domain(format!("sparseness f = {f} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// `M` patterns of dimension `N`, stored as the columns of an `N × M` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    data: DMatrix<f64>,
    geometry: Geometry,
}

impl PatternSet {
    /// Wrap a matrix, checking the geometry invariants and column distinctness.
    pub fn new(data: DMatrix<f64>, geometry: Geometry) -> Result<Self> {
        geometry.validate()?;
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::domain("pattern set must have n ≥ 1 and m ≥ 1"));
        }
        match geometry {
            Geometry::Bipolar { .. } => {
                if let Some((k, v)) = data.iter().enumerate().find(|(_, v)| **v != 1.0 && **v != -1.0) {
                    return Err(Error::domain(format!(
                        "bipolar pattern entry ({}, {}) = {v} is not ±1",
                        k % data.nrows(),
                        k / data.nrows()
                    )));
                }
            }
            Geometry::Hypersphere => {
                for (j, col) in data.column_iter().enumerate() {
                    let norm = col.norm();
                    if (norm - 1.0).abs() > UNIT_NORM_TOL {
                        return Err(Error::domain(format!("sphere pattern {j} has norm {norm}")));
                    }
                }
            }
            Geometry::Gaussian => {}
        }
        if let Some((a, b)) = first_duplicate(&data, geometry.is_bipolar()) {
            return Err(Error::domain(format!("patterns {a} and {b} coincide")));
        }
        Ok(PatternSet { data, geometry })
    }

    pub fn from_columns(columns: &[DVector<f64>], geometry: Geometry) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::domain("pattern set must have m ≥ 1"));
        }
        PatternSet::new(DMatrix::from_columns(columns), geometry)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Dimension `N`.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of patterns `M`.
    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, mu: usize) -> DVector<f64> {
        self.data.column(mu).into_owned()
    }
}

fn draw_column(geometry: Geometry, n: usize, seed: u64, col: usize, attempt: usize) -> DVector<f64> {
    let mut rng = rng::stream(seed, &[col as u64, attempt as u64]);
    match geometry {
        Geometry::Bipolar { f } => {
            DVector::from_fn(n, |_, _| if rng.random::<f64>() < f { 1.0 } else { -1.0 })
        }
        Geometry::Gaussian => DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)),
        Geometry::Hypersphere => loop {
            let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = v.norm();
            if norm > 0.0 {
                break v / norm;
            }
        },
    }
}

/// Columns that duplicate an earlier column (the later index of each pair).
fn duplicate_columns(data: &DMatrix<f64>, exact: bool) -> Vec<usize> {
    let mut dups = Vec::new();
    if exact {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(data.ncols());
        for (j, col) in data.column_iter().enumerate() {
            let key: Vec<u64> = col.iter().map(|v| v.to_bits()).collect();
            if seen.contains_key(&key) {
                dups.push(j);
            } else {
                seen.insert(key, j);
            }
        }
    } else {
        // Sort by the first coordinate; only columns within the tolerance on
        // that coordinate can be within the tolerance on every coordinate.
        let mut order: Vec<usize> = (0..data.ncols()).collect();
        order.sort_by(|&a, &b| data[(0, a)].total_cmp(&data[(0, b)]));
        let mut flagged = vec![false; data.ncols()];
        for (k, &a) in order.iter().enumerate() {
            for &b in &order[k + 1..] {
                if data[(0, b)] - data[(0, a)] > CONTINUOUS_DUP_TOL {
                    break;
                }
                let close = data
                    .column(a)
                    .iter()
                    .zip(data.column(b).iter())
                    .all(|(x, y)| (x - y).abs() <= CONTINUOUS_DUP_TOL);
                if close {
                    flagged[a.max(b)] = true;
                }
            }
        }
        dups.extend((0..data.ncols()).filter(|&j| flagged[j]));
    }
    dups
}

fn first_duplicate(data: &DMatrix<f64>, exact: bool) -> Option<(usize, usize)> {
    let later = *duplicate_columns(data, exact).first()?;
    let tol = if exact { 0.0 } else { CONTINUOUS_DUP_TOL };
    let earlier = (0..data.ncols()).find(|&a| {
        a != later
            && data
                .column(a)
                .iter()
                .zip(data.column(later).iter())
                .all(|(x, y)| (x - y).abs() <= tol)
    })?;
    Some((earlier.min(later), earlier.max(later)))
}

/// Draw `m` distinct patterns of dimension `n`.
///
/// Column `j` is drawn from its own sub-stream `(seed, j, attempt)`, so the
/// result does not depend on generation order. A column that collides with an
/// earlier one is redrawn with the next attempt index, at most
/// [`MAX_RESAMPLES`] times.
pub fn gen_patterns(geometry: Geometry, n: usize, m: usize, seed: u64) -> Result<PatternSet> {
    geometry.validate()?;
    if n == 0 || m == 0 {
        return Err(Error::domain("gen_patterns requires n ≥ 1 and m ≥ 1"));
    }
    let mut data = DMatrix::zeros(n, m);
    for j in 0..m {
        data.set_column(j, &draw_column(geometry, n, seed, j, 0));
    }
    let mut attempts = vec![0usize; m];
    loop {
        let dups = duplicate_columns(&data, geometry.is_bipolar());
        if dups.is_empty() {
            break;
        }
        for j in dups {
            attempts[j] += 1;
            if attempts[j] > MAX_RESAMPLES {
                return Err(Error::DuplicateColumns {
                    column: j,
                    count: m,
                    attempts: MAX_RESAMPLES,
                });
            }
            data.set_column(j, &draw_column(geometry, n, seed, j, attempts[j]));
        }
    }
    Ok(PatternSet { data, geometry })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// `ξ + ε` with `ε ~ N(0, σ² I)`.
    GaussianAdditive { sigma: f64 },
    /// `ξ ⊙ ε` with `P(ε_i = −1) = ρ`.
    BitFlip { rho: f64 },
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("noise σ = {sigma} must be ≥ 0")));
        }
        Ok(NoiseSpec::GaussianAdditive { sigma })
    }

    pub fn bit_flip(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::domain(format!("flip probability ρ = {rho} outside [0, 1]")));
        }
        Ok(NoiseSpec::BitFlip { rho })
    }
}

/// Distort a single pattern.
pub fn apply_noise(pattern: &DVector<f64>, spec: NoiseSpec, seed: u64) -> Result<DVector<f64>> {
    let mut rng = rng::stream(seed, &[]);
    match spec {
        NoiseSpec::GaussianAdditive { sigma } => {
            NoiseSpec::gaussian(sigma)?;
            Ok(DVector::from_fn(pattern.len(), |i, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                pattern[i] + sigma * z
            }))
        }
        NoiseSpec::BitFlip { rho } => {
            NoiseSpec::bit_flip(rho)?;
            if pattern.iter().any(|v| *v != 1.0 && *v != -1.0) {
                return Err(Error::domain("bit-flip noise requires a bipolar pattern"));
            }
            Ok(DVector::from_fn(pattern.len(), |i, _| {
                if rng.random::<f64>() < rho {
                    -pattern[i]
                } else {
                    pattern[i]
                }
            }))
        }
    }
}

/// Flip exactly `count` distinct coordinates chosen uniformly at random.
pub fn flip_bits(pattern: &DVector<f64>, count: usize, seed: u64) -> Result<DVector<f64>> {
    if count > pattern.len() {
        return Err(Error::domain(format!(
            "cannot flip {count} of {} coordinates",
            pattern.len()
        )));
    }
    let mut rng = rng::stream(seed, &[]);
    let idx = rand::seq::index::sample(&mut rng, pattern.len(), count);
    let mut out = pattern.clone();
    for i in idx.iter() {
        out[i] = -out[i];
    }
    Ok(out)
}

/// Smallest Euclidean distance over unordered pairs of columns.
pub fn min_pairwise_distance(set: &PatternSet) -> Result<f64> {
    min_pairwise_distance_matrix(set.data())
}

pub fn min_pairwise_distance_matrix(x: &DMatrix<f64>) -> Result<f64> {
    if x.ncols() < 2 {
        return Err(Error::domain("minimum pairwise distance needs at least two patterns"));
    }
    let mut best = f64::INFINITY;
    for a in 0..x.ncols() {
        for b in a + 1..x.ncols() {
            let d2: f64 = x
                .column(a)
                .iter()
                .zip(x.column(b).iter())
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            best = best.min(d2);
        }
    }
    Ok(best.sqrt())
}
