//! Seeded Monte Carlo experiments producing tabular reports.
//!
//! Every trial draws its randomness from `rng::derive_seed(seed, path)` where
//! `path` identifies the grid cell and trial index, and results are
//! aggregated in trial order. Reports are therefore identical for any number
//! of worker threads.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{expbeta_zero_temp_step, run_to_fixed_point, UpdateRule};
use crate::error::{Error, Result};
use crate::features::{sdm_sphere_overlap_conditional_mc, FeatureMap};
use crate::kernels::{sdm_sphere_kernel_approx, sdm_sphere_kernel_exact, KernelSpec};
use crate::patterns::{apply_noise, flip_bits, gen_patterns, min_pairwise_distance_matrix, Geometry, NoiseSpec, MAX_RESAMPLES};
use crate::rng::{self, derive_seed};
use crate::theory;
use crate::training::{
    margin_dual, train_auto, train_neuron_hard_margin, train_sbp_kernel, LearningRule, NetworkMode, Similarity,
    SolverConfig, DEFAULT_SBP_BATCH,
};

/// One grid cell of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub series: String,
    pub x: f64,
    pub mean: f64,
    pub sem: f64,
    pub n_trials: usize,
    #[serde(default)]
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    /// Every parameter needed to regenerate the rows.
    pub config: serde_json::Value,
    pub rows: Vec<ReportRow>,
    pub runtime_secs: f64,
}

impl ExperimentReport {
    pub fn series(&self, name: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.series == name).collect()
    }

    /// Equality of everything except the runtime.
    pub fn same_results(&self, other: &ExperimentReport) -> bool {
        self.name == other.name && self.seed == other.seed && self.config == other.config && self.rows == other.rows
    }
}

/// `(mean, sample std / √n)`; the error is zero for a single value.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

fn row(series: impl Into<String>, x: f64, values: &[f64], extras: BTreeMap<String, f64>) -> ReportRow {
    let (mean, sem) = mean_sem(values);
    ReportRow {
        series: series.into(),
        x,
        mean,
        sem,
        n_trials: values.len(),
        extras,
    }
}

/// Runs `f(0..count)` on a pool of `jobs` threads (all cores when `None`)
/// and returns the results in index order.
pub fn run_trials<T, F>(jobs: Option<usize>, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::domain("jobs must be ≥ 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::domain(format!("could not start worker pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

fn finish<C: Serialize>(name: &str, seed: u64, config: &C, rows: Vec<ReportRow>, start: Instant) -> Result<ExperimentReport> {
    Ok(ExperimentReport {
        name: name.to_string(),
        seed,
        config: serde_json::to_value(config)?,
        rows,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn random_signs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, &[]);
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginRule {
    /// Stochastic batch perceptron on the pairs feature map.
    Sbp,
    HebbianPairs,
    HebbianPoly2,
    HardMargin,
}

impl MarginRule {
    pub fn label(&self) -> &'static str {
        match self {
            MarginRule::Sbp => "sbp",
            MarginRule::HebbianPairs => "hebbian-pairs",
            MarginRule::HebbianPoly2 => "hebbian-poly2",
            MarginRule::HardMargin => "hard-margin",
        }
    }
}

impl std::str::FromStr for MarginRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sbp" => MarginRule::Sbp,
            "hebbian-pairs" => MarginRule::HebbianPairs,
            "hebbian-poly2" => MarginRule::HebbianPoly2,
            "hard-margin" => MarginRule::HardMargin,
            other => return Err(Error::domain(format!("unknown margin rule '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginConfig {
    pub n: usize,
    /// Loads `M / N²`.
    pub loads: Vec<f64>,
    pub rules: Vec<MarginRule>,
    pub trials: usize,
    pub seed: u64,
    pub sbp_lr: f64,
    pub sbp_iters: usize,
    pub sbp_batch: usize,
    /// Sweep budget of the hard-margin solver.
    pub hard_margin_max_sweeps: usize,
}

impl MarginConfig {
    pub fn new(n: usize, loads: Vec<f64>, trials: usize, seed: u64) -> Self {
        MarginConfig {
            n,
            loads,
            rules: vec![MarginRule::Sbp, MarginRule::HebbianPairs, MarginRule::HebbianPoly2, MarginRule::HardMargin],
            trials,
            seed,
            sbp_lr: 1e-5,
            sbp_iters: 2_000_000,
            sbp_batch: DEFAULT_SBP_BATCH,
            hard_margin_max_sweeps: 2_000,
        }
    }
}

/// Patterns for `M = load·N²` at a given load.
pub fn load_to_count(n: usize, load: f64) -> usize {
    ((load * (n * n) as f64).round() as usize).max(1)
}

/// Margin of a single output neuron with random ±1 targets, as a function of
/// the load `M/N²`, for each learning rule. Negative margins are reported
/// unchanged.
pub fn exp_margin_vs_load(cfg: &MarginConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.n < 2 || cfg.trials == 0 {
        return Err(Error::domain("margin experiment needs n ≥ 2 and trials ≥ 1"));
    }
    if let Some(l) = cfg.loads.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::domain(format!("load {l} must be positive")));
    }
    let n = cfg.n;
    let cells = cfg.loads.len() * cfg.trials;
    let results = run_trials(jobs, cells, |c| -> Result<Vec<f64>> {
        let (l, t) = (c / cfg.trials, c % cfg.trials);
        let m = load_to_count(n, cfg.loads[l]);
        let path = [l as u64, t as u64];
        let x = gen_patterns(Geometry::bipolar(), n, m, derive_seed(cfg.seed, &[path[0], path[1], 0]))?.into_data();
        let y = random_signs(m, derive_seed(cfg.seed, &[path[0], path[1], 1]));
        let pairs = Similarity::Feature(FeatureMap::Pairs { n_in: n }).gram(&x)?;
        let mut out = Vec::with_capacity(cfg.rules.len());
        for rule in &cfg.rules {
            let margin = match rule {
                MarginRule::HebbianPairs => margin_dual(&pairs, &y, &vec![1.0; m], 0.0)?,
                MarginRule::HebbianPoly2 => {
                    let k = Similarity::Feature(FeatureMap::Poly2 { n_in: n }).gram(&x)?;
                    margin_dual(&k, &y, &vec![1.0; m], 0.0)?
                }
                MarginRule::Sbp => {
                    let seed = derive_seed(cfg.seed, &[path[0], path[1], 2]);
                    let beta = train_sbp_kernel(&pairs, &y, cfg.sbp_lr, cfg.sbp_iters, cfg.sbp_batch, seed)?;
                    margin_dual(&pairs, &y, beta.as_slice(), 0.0)?
                }
                MarginRule::HardMargin => {
                    let solver = SolverConfig::hard_margin()
                        .with_seed(derive_seed(cfg.seed, &[path[0], path[1], 3]))
                        .with_max_sweeps(cfg.hard_margin_max_sweeps);
                    train_neuron_hard_margin(&pairs, &y, &solver)?.margin
                }
            };
            out.push(margin);
        }
        Ok(out)
    })?;
    let mut rows = Vec::new();
    for (r, rule) in cfg.rules.iter().enumerate() {
        for (l, &load) in cfg.loads.iter().enumerate() {
            let values: Vec<f64> = (0..cfg.trials).map(|t| results[l * cfg.trials + t][r]).collect();
            let positive = values.iter().filter(|v| **v > 0.0).count() as f64 / values.len() as f64;
            let extras = BTreeMap::from([
                ("m".to_string(), load_to_count(n, load) as f64),
                ("positive_fraction".to_string(), positive),
            ]);
            rows.push(row(rule.label(), load, &values, extras));
        }
    }
    finish("margin", cfg.seed, cfg, rows, start)
}

/// Load at which a mean-margin curve first crosses zero, linearly
/// interpolated between grid points. `None` if it never does.
pub fn zero_crossing(rows: &[&ReportRow]) -> Option<f64> {
    let mut sorted: Vec<&&ReportRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.mean > 0.0 && b.mean <= 0.0 {
            return Some(a.x + (b.x - a.x) * a.mean / (a.mean - b.mean));
        }
    }
    None
}

/// How the collision radius depends on the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiusSpec {
    /// The same `r` at every `n`.
    Fixed { r: f64 },
    /// `r = √(σ²_max · n)`, i.e. a fixed noise tolerance.
    NoiseVariance { sigma_sq: f64 },
}

impl RadiusSpec {
    pub fn radius(&self, n: usize) -> f64 {
        match *self {
            RadiusSpec::Fixed { r } => r,
            RadiusSpec::NoiseVariance { sigma_sq } => (sigma_sq * n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityConfig {
    pub n_values: Vec<usize>,
    pub radius: RadiusSpec,
    pub trials: usize,
    pub seed: u64,
    pub max_samples: usize,
}

impl CapacityConfig {
    pub fn new(n_values: Vec<usize>, radius: RadiusSpec, trials: usize, seed: u64) -> Self {
        CapacityConfig {
            n_values,
            radius,
            trials,
            seed,
            max_samples: 10_000_000,
        }
    }
}

/// Draws Gaussian patterns until one lies closer than `2r` to an earlier one
/// and returns the number drawn before it.
pub fn sample_until_collision(n: usize, r: f64, max_samples: usize, seed: u64) -> Result<usize> {
    let mut rng = rng::stream(seed, &[]);
    let limit = 4.0 * r * r;
    let mut stored: Vec<f64> = Vec::new();
    let mut next = vec![0.0; n];
    for count in 0..max_samples {
        for v in next.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let collides = stored
            .chunks_exact(n)
            .any(|p| p.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < limit);
        if collides {
            return Ok(count);
        }
        stored.extend_from_slice(&next);
    }
    Err(Error::domain(format!("no collision within {max_samples} samples")))
}

/// Sample-until-collision capacity of Gaussian patterns against the
/// closed-form lower bound.
pub fn exp_capacity_gaussian(cfg: &CapacityConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let radius_ok = match cfg.radius {
        RadiusSpec::Fixed { r } => r > 0.0,
        RadiusSpec::NoiseVariance { sigma_sq } => sigma_sq > 0.0,
    };
    if !radius_ok || cfg.trials == 0 || cfg.n_values.is_empty() {
        return Err(Error::domain("capacity experiment needs r > 0, trials ≥ 1 and at least one n"));
    }
    let cells = cfg.n_values.len() * cfg.trials;
    let counts = run_trials(jobs, cells, |c| {
        let (i, t) = (c / cfg.trials, c % cfg.trials);
        let n = cfg.n_values[i];
        sample_until_collision(n, cfg.radius.radius(n), cfg.max_samples, derive_seed(cfg.seed, &[i as u64, t as u64]))
    })?;
    let mut rows = Vec::new();
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let values: Vec<f64> = counts[i * cfg.trials..(i + 1) * cfg.trials].iter().map(|c| *c as f64).collect();
        let r = cfg.radius.radius(n);
        let mut extras = BTreeMap::from([("r".to_string(), r)]);
        if let Ok(bound) = theory::capacity_bound_gaussian_from_radius(n, r) {
            extras.insert("bound".to_string(), bound.value());
            extras.insert("ln_bound".to_string(), bound.ln_value);
        }
        rows.push(row("empirical", n as f64, &values, extras));
    }
    finish("capacity-gaussian", cfg.seed, cfg, rows, start)
}

/// Least-squares fit of `y = a + b·x`; returns `(a, b, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope, sxy * sxy / (sxx * syy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub n: usize,
    pub m: usize,
    pub r: f64,
    /// Noise variances `σ²` (Gaussian) or flip probabilities `ρ` (bipolar).
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub geometry: Geometry,
}

/// Noise levels around the predicted threshold `r²/N` (Gaussian) or
/// `r²/4N` (bipolar).
pub fn auto_noise_grid(n: usize, r: f64, geometry: Geometry) -> Vec<f64> {
    let threshold = if geometry.is_bipolar() {
        r * r / (4.0 * n as f64)
    } else {
        r * r / n as f64
    };
    [0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0]
        .iter()
        .map(|k| k * threshold)
        .collect()
}

/// Patterns whose pairwise distances all exceed `2r`.
pub fn screened_patterns(geometry: Geometry, n: usize, m: usize, r: f64, seed: u64) -> Result<DMatrix<f64>> {
    for attempt in 0..MAX_RESAMPLES {
        let x = gen_patterns(geometry, n, m, derive_seed(seed, &[attempt as u64]))?.into_data();
        if m < 2 || min_pairwise_distance_matrix(&x)? > 2.0 * r {
            return Ok(x);
        }
    }
    Err(Error::domain(format!(
        "no {m} patterns with pairwise distances above 2r = {} after {MAX_RESAMPLES} draws",
        2.0 * r
    )))
}

/// Fraction of noisy cues that one zero-temperature `Exp_β` update returns
/// exactly to the stored pattern.
pub fn exp_noise_recovery(cfg: &NoiseConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.m == 0 || cfg.trials == 0 || !(cfg.r > 0.0) {
        return Err(Error::domain("noise experiment needs m ≥ 1, trials ≥ 1 and r > 0"));
    }
    if cfg.geometry == Geometry::Hypersphere {
        return Err(Error::domain("noise experiment supports gaussian and bipolar patterns"));
    }
    let bipolar = cfg.geometry.is_bipolar();
    let noise_of = |level: f64| {
        if bipolar {
            NoiseSpec::bit_flip(level)
        } else {
            NoiseSpec::gaussian(level.sqrt())
        }
    };
    for level in &cfg.grid {
        noise_of(*level)?;
    }
    let cells = cfg.grid.len() * cfg.trials;
    let hits = run_trials(jobs, cells, |c| -> Result<f64> {
        let (g, t) = (c / cfg.trials, c % cfg.trials);
        let path = |k: u64| derive_seed(cfg.seed, &[g as u64, t as u64, k]);
        let x = screened_patterns(cfg.geometry, cfg.n, cfg.m, cfg.r, path(0))?;
        let mu = rng::stream(path(1), &[]).random_range(0..cfg.m);
        let target = x.column(mu).into_owned();
        let cue = apply_noise(&target, noise_of(cfg.grid[g])?, path(2))?;
        let out = expbeta_zero_temp_step(&x, cfg.r, cue.as_slice())?;
        Ok(if out == target { 1.0 } else { 0.0 })
    })?;
    let threshold = if bipolar {
        theory::rho_max(cfg.r, cfg.n)?
    } else {
        theory::sigma_max_sq(cfg.r, cfg.n)?
    };
    let rows = cfg
        .grid
        .iter()
        .enumerate()
        .map(|(g, &level)| {
            let extras = BTreeMap::from([("threshold".to_string(), threshold)]);
            row("recovery", level, &hits[g * cfg.trials..(g + 1) * cfg.trials], extras)
        })
        .collect();
    finish("noise", cfg.seed, cfg, rows, start)
}

/// Angles of a kernel scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum AngleGrid {
    Radians(Vec<f64>),
    /// Fractions of the support width `2 arccos b` of each `b`.
    SupportFractions(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdmKernelConfig {
    pub n_in: usize,
    pub b_values: Vec<f64>,
    pub angles: AngleGrid,
    /// Addresses per Monte Carlo point; zero disables the reference.
    pub mc_samples: usize,
    pub seed: u64,
}

/// Exact and approximate hypersphere SDM kernels over an angle grid, with a
/// Monte Carlo reference at every point when `mc_samples > 0`. Series are
/// `exact`, `approx` and `monte-carlo`, each carrying `b` as an extra.
pub fn exp_sdm_kernel_scan(cfg: &SdmKernelConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.n_in < 3 {
        return Err(Error::domain("sdm kernel scan needs n_in ≥ 3"));
    }
    let mut points = Vec::new();
    for (bi, &b) in cfg.b_values.iter().enumerate() {
        KernelSpec::SdmSphereExact { n_in: cfg.n_in, b }.validate()?;
        let angles = match &cfg.angles {
            AngleGrid::Radians(v) => v.clone(),
            AngleGrid::SupportFractions(v) => v.iter().map(|f| f * 2.0 * b.acos()).collect(),
        };
        for (ai, theta) in angles.into_iter().enumerate() {
            if !(0.0..=std::f64::consts::PI).contains(&theta) {
                return Err(Error::domain(format!("angle {theta} outside [0, π]")));
            }
            points.push((bi, ai, b, theta));
        }
    }
    let values = run_trials(jobs, points.len(), |p| -> Result<[f64; 4]> {
        let (bi, ai, b, theta) = points[p];
        let exact = sdm_sphere_kernel_exact(cfg.n_in, b, theta.cos())?;
        let approx = sdm_sphere_kernel_approx(cfg.n_in, b, (0.5 * theta).sin())?;
        let (mc, se) = if cfg.mc_samples > 0 {
            let mut x = vec![0.0; cfg.n_in];
            let mut y = vec![0.0; cfg.n_in];
            x[0] = 1.0;
            y[0] = theta.cos();
            y[1] = theta.sin();
            sdm_sphere_overlap_conditional_mc(b, &x, &y, cfg.mc_samples, derive_seed(cfg.seed, &[bi as u64, ai as u64]))?
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok([exact, approx, mc, se])
    })?;
    let mut rows = Vec::new();
    for (p, &(_, _, b, theta)) in points.iter().enumerate() {
        let [exact, approx, mc, se] = values[p];
        let extras = |more: &[(&str, f64)]| {
            let mut e = BTreeMap::from([("b".to_string(), b)]);
            e.extend(more.iter().map(|(k, v)| (k.to_string(), *v)));
            e
        };
        let single = |series: &str, mean: f64, sem: f64, n_trials: usize, extras| ReportRow {
            series: series.into(),
            x: theta,
            mean,
            sem,
            n_trials,
            extras,
        };
        rows.push(single("exact", exact, 0.0, 1, extras(&[])));
        let rel = if exact > 0.0 { (approx - exact).abs() / exact } else { f64::NAN };
        rows.push(single("approx", approx, 0.0, 1, extras(&[("relative_error", rel)])));
        if cfg.mc_samples > 0 {
            let z = if se > 0.0 { (mc - exact) / se } else { f64::NAN };
            rows.push(single("monte-carlo", mc, se, cfg.mc_samples, extras(&[("z_score", z)])));
        }
    }
    finish("sdm-kernel", cfg.seed, cfg, rows, start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopfieldRule {
    /// One-shot Hebbian weights, no self-coupling.
    Hebbian,
    /// Maximum-margin weights, no self-coupling.
    HardMargin,
    /// Pseudoinverse weights including self-coupling.
    Pseudoinverse,
}

impl std::str::FromStr for HopfieldRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hebbian" => HopfieldRule::Hebbian,
            "hard-margin" => HopfieldRule::HardMargin,
            "pseudoinverse" => HopfieldRule::Pseudoinverse,
            other => return Err(Error::domain(format!("unknown Hopfield rule '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfieldConfig {
    pub n: usize,
    pub m_grid: Vec<usize>,
    pub rule: HopfieldRule,
    pub flip_count: usize,
    pub trials: usize,
    pub seed: u64,
    /// Asynchronous sweeps allowed per recall.
    pub max_sweeps: usize,
}

/// Recurrent bipolar networks with the linear kernel: per `M`, the fraction
/// of stored patterns recovered exactly from `flip_count` flipped bits under
/// asynchronous dynamics. Extras report the fraction of stored patterns that
/// are fixed points, the fraction of networks meeting every storage
/// constraint, and the solver convergence rate.
pub fn exp_hopfield_capacity(cfg: &HopfieldConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    let start = Instant::now();
    if 2 * cfg.flip_count >= cfg.n || cfg.trials == 0 || cfg.m_grid.iter().any(|m| *m == 0) {
        return Err(Error::domain("hopfield experiment needs flip_count < n/2, trials ≥ 1 and M ≥ 1"));
    }
    let cells = cfg.m_grid.len() * cfg.trials;
    let results = run_trials(jobs, cells, |c| -> Result<[f64; 4]> {
        let (g, t) = (c / cfg.trials, c % cfg.trials);
        let m = cfg.m_grid[g];
        let path = |k: u64| derive_seed(cfg.seed, &[g as u64, t as u64, k]);
        let x = gen_patterns(Geometry::bipolar(), cfg.n, m, path(0))?.into_data();
        let (rule, mode) = match cfg.rule {
            HopfieldRule::Hebbian => (LearningRule::HebbianOneShot, NetworkMode::AutoNoSelf),
            HopfieldRule::HardMargin => (LearningRule::HardMarginDual, NetworkMode::AutoNoSelf),
            HopfieldRule::Pseudoinverse => (LearningRule::Pseudoinverse, NetworkMode::AutoWithSelf),
        };
        let solver = SolverConfig::new(rule).with_seed(path(1));
        let net = train_auto(&x, mode, KernelSpec::Linear, &solver)?;
        let constraints = if net.solver.margins.iter().all(|g| *g > 0.0) { 1.0 } else { 0.0 };
        let converged = if net.all_converged() { 1.0 } else { 0.0 };
        let mut recovered = 0usize;
        let mut fixed = 0usize;
        for mu in 0..m {
            let xi = x.column(mu).into_owned();
            let rule = UpdateRule::AutoAsync {
                net: &net,
                seed: derive_seed(path(2), &[mu as u64]),
            };
            let still = run_to_fixed_point(&rule, xi.as_slice(), 1)?;
            if still.steps == 0 && still.converged {
                fixed += 1;
            }
            let cue = flip_bits(&xi, cfg.flip_count, derive_seed(path(3), &[mu as u64]))?;
            let trace = run_to_fixed_point(&rule, cue.as_slice(), cfg.max_sweeps)?;
            if trace.converged && DVector::from_column_slice(&trace.terminal) == xi {
                recovered += 1;
            }
        }
        Ok([recovered as f64 / m as f64, fixed as f64 / m as f64, constraints, converged])
    })?;
    let mut rows = Vec::new();
    for (g, &m) in cfg.m_grid.iter().enumerate() {
        let cell = &results[g * cfg.trials..(g + 1) * cfg.trials];
        let column = |k: usize| cell.iter().map(|v| v[k]).collect::<Vec<f64>>();
        let extras = BTreeMap::from([
            ("fixed_point_fraction".to_string(), mean_sem(&column(1)).0),
            ("constraints_met_fraction".to_string(), mean_sem(&column(2)).0),
            ("converged_fraction".to_string(), mean_sem(&column(3)).0),
            ("load".to_string(), m as f64 / cfg.n as f64),
        ]);
        let label = match cfg.rule {
            HopfieldRule::Hebbian => "hebbian",
            HopfieldRule::HardMargin => "hard-margin",
            HopfieldRule::Pseudoinverse => "pseudoinverse",
        };
        rows.push(row(label, m as f64, &column(0), extras));
    }
    finish("hopfield", cfg.seed, cfg, rows, start)
}

/// First `M` whose mean recovery drops below `threshold`.
pub fn collapse_point(rows: &[&ReportRow], threshold: f64) -> Option<f64> {
    let mut sorted: Vec<&&ReportRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    sorted.into_iter().find(|r| r.mean < threshold).map(|r| r.x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvpConfig {
    pub n: usize,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// `α_μ` counts as a support vector when it exceeds `tol · max_ν α_ν`.
    pub tol: f64,
}

/// Fraction of maximum-margin linear neurons (random bipolar inputs, random
/// targets, no bias) in which every pattern is a support vector.
pub fn exp_svp_fraction(cfg: &SvpConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.n == 0 || cfg.trials == 0 || cfg.m_grid.iter().any(|m| *m == 0) {
        return Err(Error::domain("svp experiment needs n ≥ 1, trials ≥ 1 and M ≥ 1"));
    }
    let cells = cfg.m_grid.len() * cfg.trials;
    let results = run_trials(jobs, cells, |c| -> Result<[f64; 2]> {
        let (g, t) = (c / cfg.trials, c % cfg.trials);
        let m = cfg.m_grid[g];
        let path = |k: u64| derive_seed(cfg.seed, &[g as u64, t as u64, k]);
        let x = gen_patterns(Geometry::bipolar(), cfg.n, m, path(0))?.into_data();
        let y = random_signs(m, path(1));
        let k = x.transpose() * &x;
        let sol = train_neuron_hard_margin(&k, &y, &SolverConfig::hard_margin().with_seed(path(2)))?;
        let max = sol.alpha.max();
        let all = max > 0.0 && sol.alpha.iter().all(|a| *a > cfg.tol * max);
        let fraction = sol.alpha.iter().filter(|a| **a > cfg.tol * max).count() as f64 / m as f64;
        Ok([if all { 1.0 } else { 0.0 }, fraction])
    })?;
    let capacity = theory::svp_capacity(cfg.n.max(2))?;
    let mut rows = Vec::new();
    for (g, &m) in cfg.m_grid.iter().enumerate() {
        let cell = &results[g * cfg.trials..(g + 1) * cfg.trials];
        let all: Vec<f64> = cell.iter().map(|v| v[0]).collect();
        let sv: Vec<f64> = cell.iter().map(|v| v[1]).collect();
        let extras = BTreeMap::from([
            ("support_vector_fraction".to_string(), mean_sem(&sv).0),
            ("svp_capacity".to_string(), capacity),
        ]);
        rows.push(row("all-support-vectors", m as f64, &all, extras));
    }
    finish("svp", cfg.seed, cfg, rows, start)
}
