use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kernmem::dynamics::{hetero_trace, run_to_fixed_point, UpdateRule};
use kernmem::experiments::*;
use kernmem::io::{read_network, read_patterns, report_csv, write_network, write_patterns, write_report, write_trace, PatternRefs};
use kernmem::kernels::{kernel_eval, kernel_matrix, sdm_cube_kernel, sdm_sphere_kernel_approx, sdm_sphere_kernel_exact, expbeta_of_dist};
use kernmem::patterns::gen_patterns;
use kernmem::training::{train_network, BiasMode, LearningRule, NetworkMode, SolverConfig, DEFAULT_SBP_BATCH, DEFAULT_TOLERANCE};
use kernmem::{Geometry, KernelSpec};
use serde::Serialize;
use serde_json::json;

/// Kernel memory networks: generate patterns, train, recall, evaluate kernels
/// and run seeded experiments.
#[derive(Debug, Parser)]
#[command(name = "kernmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random pattern set and write it as CSV.
    Gen(GenArgs),
    /// Train a network on a pattern file and write it as JSON.
    Train(TrainArgs),
    /// Run recall dynamics from a query and write the trace as CSV.
    Recall(RecallArgs),
    /// Evaluate a kernel on a pair of vectors, a pattern file or a separation grid.
    Kernel(KernelArgs),
    /// Run a named experiment and write its report.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GeometryArg {
    Bipolar,
    Gaussian,
    Sphere,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Hetero,
    AutoWithSelf,
    AutoNoself,
    Continuous,
}

impl From<ModeArg> for NetworkMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Hetero => NetworkMode::Hetero,
            ModeArg::AutoWithSelf => NetworkMode::AutoWithSelf,
            ModeArg::AutoNoself => NetworkMode::AutoNoSelf,
            ModeArg::Continuous => NetworkMode::ContinuousInterp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RuleArg {
    HardMargin,
    Adatron,
    Sbp,
    Hebbian,
    Pinv,
    Gpinv,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BiasArg {
    Zero,
    Trained,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum UpdateArg {
    /// One-shot for hetero maps, synchronous for bipolar networks, interpolating for continuous ones.
    Default,
    Sync,
    Async,
    /// Zero-temperature `Exp_β` update over the stored patterns (needs --radius).
    Expbeta,
    /// Softmax update over the stored patterns (zero temperature without --beta).
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long, value_enum)]
    geometry: GeometryArg,
    /// Pattern dimension.
    #[arg(long, value_name = "INT")]
    n: usize,
    /// Number of patterns.
    #[arg(long, value_name = "INT")]
    m: usize,
    /// Probability of +1 for bipolar patterns.
    #[arg(long, value_name = "FLOAT", default_value_t = 0.5)]
    f: f64,
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// Input pattern file.
    #[arg(long, value_name = "PATH")]
    patterns: PathBuf,
    /// Target pattern file (hetero mode only).
    #[arg(long, value_name = "PATH")]
    targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::AutoNoself)]
    mode: ModeArg,
    /// linear | poly:<p> | ipoly:<p> | exp | expbeta:<r>:<beta> | sdm-cube:<nin>:<r> | sdm-sphere:<nin>:<b>[:approx]
    #[arg(long, value_name = "KERNEL", default_value = "linear", value_parser = parse_kernel)]
    #[serde(serialize_with = "display")]
    kernel: KernelSpec,
    #[arg(long, value_enum, default_value_t = RuleArg::HardMargin)]
    rule: RuleArg,
    #[arg(long, value_enum, default_value_t = BiasArg::Zero)]
    bias: BiasArg,
    /// Solver tolerance.
    #[arg(long, value_name = "FLOAT", default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Sweep budget [default: 10⁴·M].
    #[arg(long, value_name = "INT")]
    max_sweeps: Option<usize>,
    /// Learning rate for adatron [default: 1/max K_μμ] and sbp [default: 1e-3].
    #[arg(long, value_name = "FLOAT")]
    lr: Option<f64>,
    /// SBP iterations.
    #[arg(long, value_name = "INT", default_value_t = 100_000)]
    sbp_iters: usize,
    /// SBP batch size.
    #[arg(long, value_name = "INT", default_value_t = DEFAULT_SBP_BATCH)]
    sbp_batch: usize,
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH", default_value = "network.json")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct RecallArgs {
    #[arg(long, value_name = "PATH", default_value = "network.json")]
    network: PathBuf,
    /// Query as comma-separated values.
    #[arg(long, value_name = "FLOAT,...", value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "query_file", conflicts_with = "query_file")]
    query: Option<Vec<f64>>,
    /// Pattern file holding the query.
    #[arg(long, value_name = "PATH")]
    query_file: Option<PathBuf>,
    /// Column of --query-file to use.
    #[arg(long, value_name = "INT", default_value_t = 0)]
    column: usize,
    #[arg(long, value_enum, default_value_t = UpdateArg::Default)]
    update: UpdateArg,
    /// Radius of the zero-temperature Exp_β update.
    #[arg(long, value_name = "FLOAT")]
    radius: Option<f64>,
    /// Inverse temperature of the softmax update.
    #[arg(long, value_name = "FLOAT")]
    beta: Option<f64>,
    #[arg(long, value_name = "INT", default_value_t = 100)]
    max_steps: usize,
    /// Seed of the asynchronous update order.
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH", default_value = "trace.csv")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct KernelArgs {
    #[arg(long, value_name = "KERNEL", value_parser = parse_kernel)]
    #[serde(serialize_with = "display")]
    kernel: KernelSpec,
    /// First vector, comma-separated.
    #[arg(long, value_name = "FLOAT,...", value_delimiter = ',', allow_hyphen_values = true, requires = "y")]
    x: Option<Vec<f64>>,
    /// Second vector, comma-separated.
    #[arg(long, value_name = "FLOAT,...", value_delimiter = ',', allow_hyphen_values = true, requires = "x")]
    y: Option<Vec<f64>>,
    /// Pattern file whose Gram matrix is evaluated.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["x", "grid"])]
    patterns: Option<PathBuf>,
    /// `lo:hi:count` over the kernel's natural separation: inner product,
    /// Euclidean distance (expbeta), Hamming distance (sdm-cube) or angle (sdm-sphere).
    #[arg(long, value_name = "LO:HI:COUNT", conflicts_with = "x")]
    grid: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file [default: standard output].
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(subcommand)]
    which: Experiment,
}

#[derive(Debug, Args, Serialize)]
struct Common {
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: all cores].
    #[arg(long, value_name = "INT", env = "KERNMEM_JOBS")]
    jobs: Option<usize>,
    /// Directory receiving `<experiment>-<seed>.csv` and `.json`.
    #[arg(long, value_name = "PATH", default_value = ".")]
    out_dir: PathBuf,
    /// Report format echoed to standard output.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Experiment {
    /// Margin of one neuron against load M/N² for several learning rules.
    Margin {
        #[arg(long, value_name = "INT", default_value_t = 40)]
        n: usize,
        #[arg(long, value_name = "FLOAT,...", value_delimiter = ',', default_value = "0.01,0.02,0.03,0.05,0.075,0.1,0.3,0.5,0.7,1.0")]
        loads: Vec<f64>,
        /// Rules among sbp, hebbian-pairs, hebbian-poly2, hard-margin.
        #[arg(long, value_name = "RULE,...", value_delimiter = ',', default_value = "sbp,hebbian-pairs,hebbian-poly2,hard-margin")]
        rules: Vec<MarginRule>,
        #[arg(long, value_name = "INT", default_value_t = 20)]
        trials: usize,
        #[arg(long, value_name = "FLOAT", default_value_t = 1e-5)]
        sbp_lr: f64,
        #[arg(long, value_name = "INT", default_value_t = 2_000_000)]
        sbp_iters: usize,
        #[arg(long, value_name = "INT", default_value_t = DEFAULT_SBP_BATCH)]
        sbp_batch: usize,
        #[arg(long, value_name = "INT", default_value_t = 2_000)]
        hard_margin_max_sweeps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Patterns drawn before two fall within 2r of each other.
    CapacityGaussian {
        #[arg(long, value_name = "INT,...", value_delimiter = ',', default_value = "25,50,75,100")]
        n_values: Vec<usize>,
        /// Fixed radius at every N.
        #[arg(long, value_name = "FLOAT", conflicts_with = "sigma_sq")]
        r: Option<f64>,
        /// Radius √(σ²N) for a fixed noise variance [default: 0.25].
        #[arg(long, value_name = "FLOAT")]
        sigma_sq: Option<f64>,
        #[arg(long, value_name = "INT", default_value_t = 200)]
        trials: usize,
        #[arg(long, value_name = "INT", default_value_t = 10_000_000)]
        max_samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// One-step recovery of the zero-temperature Exp_β network against noise.
    Noise {
        #[arg(long, value_name = "INT", default_value_t = 100)]
        n: usize,
        /// Stored patterns [default: 10 Gaussian, 3 bipolar].
        #[arg(long, value_name = "INT")]
        m: Option<usize>,
        #[arg(long, value_name = "FLOAT", default_value_t = 5.0)]
        r: f64,
        #[arg(long, value_enum, default_value_t = GeometryArg::Gaussian)]
        geometry: GeometryArg,
        /// `auto` or comma-separated noise variances (flip probabilities for bipolar).
        #[arg(long, value_name = "auto|FLOAT,...", default_value = "auto")]
        sigma_grid: String,
        #[arg(long, value_name = "INT", default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Exact, approximate and sampled hypersphere SDM kernels over an angle grid.
    SdmKernel {
        #[arg(long, value_name = "INT", default_value_t = 50)]
        n_in: usize,
        #[arg(long, value_name = "FLOAT,...", value_delimiter = ',', default_value = "0.9,0.95")]
        b: Vec<f64>,
        /// Angles in radians.
        #[arg(long, value_name = "FLOAT,...", value_delimiter = ',', conflicts_with = "support_fractions")]
        angles: Option<Vec<f64>>,
        /// Fractions of the support width 2·arccos(b) [default: 0.05,0.10,…,0.50].
        #[arg(long, value_name = "FLOAT,...", value_delimiter = ',')]
        support_fractions: Option<Vec<f64>>,
        /// Monte Carlo addresses per point; 0 disables the reference.
        #[arg(long, value_name = "INT", default_value_t = 1_000_000)]
        mc_samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Recovery of stored patterns in recurrent bipolar networks against load.
    Hopfield {
        #[arg(long, value_name = "INT", default_value_t = 100)]
        n: usize,
        #[arg(long, value_name = "INT,...", value_delimiter = ',', default_value = "5,8,10,11,12,13,14,15,16,18,20")]
        m_grid: Vec<usize>,
        /// hebbian | hard-margin | pseudoinverse
        #[arg(long, value_name = "RULE", default_value = "hebbian")]
        rule: HopfieldRule,
        /// Bits flipped in each cue.
        #[arg(long, value_name = "INT", default_value_t = 10)]
        flips: usize,
        #[arg(long, value_name = "INT", default_value_t = 50)]
        trials: usize,
        #[arg(long, value_name = "INT", default_value_t = 100)]
        max_sweeps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fraction of max-margin neurons in which every pattern is a support vector.
    Svp {
        #[arg(long, value_name = "INT", default_value_t = 200)]
        n: usize,
        #[arg(long, value_name = "INT,...", value_delimiter = ',', default_value = "10,20,30,40,60,100,300")]
        m_grid: Vec<usize>,
        #[arg(long, value_name = "INT", default_value_t = 50)]
        trials: usize,
        /// Support-vector threshold relative to the largest coefficient.
        #[arg(long, value_name = "FLOAT", default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_kernel(s: &str) -> Result<KernelSpec, String> {
    s.parse().map_err(|e: kernmem::Error| e.to_string())
}

fn display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn emit_config(command: &str, config: &impl Serialize) -> anyhow::Result<()> {
    let line = json!({ "command": command, "config": config });
    eprintln!("resolved config: {line}");
    Ok(())
}

fn geometry(arg: GeometryArg, f: f64) -> Geometry {
    match arg {
        GeometryArg::Bipolar => Geometry::Bipolar { f },
        GeometryArg::Gaussian => Geometry::Gaussian,
        GeometryArg::Sphere => Geometry::Hypersphere,
    }
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    emit_config("gen", args)?;
    let set = gen_patterns(geometry(args.geometry, args.f), args.n, args.m, args.seed)?;
    write_patterns(&args.out, &set)?;
    log::info!("wrote {} patterns to {}", args.m, args.out.display());
    Ok(())
}

/// Path of `target` as seen from the directory of `from`, falling back to
/// the absolute path when no relative form exists.
fn relative_to(target: &Path, from: &Path) -> anyhow::Result<PathBuf> {
    let target = std::fs::canonicalize(target).with_context(|| format!("resolving {}", target.display()))?;
    let dir = from.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let dir = std::fs::canonicalize(dir).with_context(|| format!("resolving {}", dir.display()))?;
    Ok(target.strip_prefix(&dir).map(Path::to_path_buf).unwrap_or(target))
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    emit_config("train", args)?;
    let mode = NetworkMode::from(args.mode);
    let inputs = read_patterns(&args.patterns).with_context(|| format!("reading {}", args.patterns.display()))?;
    let targets = match (&args.targets, mode) {
        (Some(path), NetworkMode::Hetero) => read_patterns(path).with_context(|| format!("reading {}", path.display()))?,
        (None, NetworkMode::Hetero) => bail!("hetero mode needs --targets"),
        (Some(_), _) => bail!("--targets is only used in hetero mode"),
        (None, _) => inputs.clone(),
    };
    let rule = match args.rule {
        RuleArg::HardMargin => LearningRule::HardMarginDual,
        RuleArg::Adatron => LearningRule::KernelAdatron { lr: args.lr },
        RuleArg::Sbp => LearningRule::StochasticBatchPerceptron {
            lr: args.lr.unwrap_or(1e-3),
            iters: args.sbp_iters,
            batch: args.sbp_batch,
        },
        RuleArg::Hebbian => LearningRule::HebbianOneShot,
        RuleArg::Pinv => LearningRule::Pseudoinverse,
        RuleArg::Gpinv => LearningRule::GeneralizedPseudoinverse,
    };
    let bias = match args.bias {
        BiasArg::Zero => BiasMode::FixedZero,
        BiasArg::Trained => BiasMode::Trained,
    };
    let mut cfg = SolverConfig::new(rule).with_bias(bias).with_tolerance(args.tol).with_seed(args.seed);
    cfg.max_sweeps = args.max_sweeps;
    let net = train_network(inputs.data(), targets.data(), mode, args.kernel.into(), &cfg)?;
    if !net.all_converged() {
        log::warn!("solver did not converge for every neuron");
    }
    let refs = PatternRefs {
        inputs: relative_to(&args.patterns, &args.out)?,
        targets: args.targets.as_deref().map(|t| relative_to(t, &args.out)).transpose()?,
    };
    write_network(&args.out, &net, &refs)?;
    log::info!("wrote network to {}", args.out.display());
    Ok(())
}

fn cmd_recall(args: &RecallArgs) -> anyhow::Result<()> {
    emit_config("recall", args)?;
    let net = read_network(&args.network).with_context(|| format!("reading {}", args.network.display()))?;
    let query = match (&args.query, &args.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(path)) => {
            let set = read_patterns(path).with_context(|| format!("reading {}", path.display()))?;
            if args.column >= set.data().ncols() {
                bail!("column {} out of range for {} patterns", args.column, set.data().ncols());
            }
            set.data().column(args.column).iter().copied().collect()
        }
        (None, None) => unreachable!("clap requires a query"),
    };
    if net.mode == NetworkMode::Hetero && matches!(args.update, UpdateArg::Default) {
        let trace = hetero_trace(&net, &query)?;
        write_trace(&args.out, &trace)?;
        println!("read-out of {} neurons", trace.terminal.len());
        return Ok(());
    }
    let rule = match args.update {
        UpdateArg::Default => match net.mode {
            NetworkMode::Hetero => unreachable!("handled above"),
            NetworkMode::AutoWithSelf | NetworkMode::AutoNoSelf => UpdateRule::AutoSync(&net),
            NetworkMode::ContinuousInterp => UpdateRule::InterpSync(&net),
        },
        UpdateArg::Sync => UpdateRule::AutoSync(&net),
        UpdateArg::Async => UpdateRule::AutoAsync { net: &net, seed: args.seed },
        UpdateArg::Expbeta => {
            let Some(r) = args.radius else { bail!("--update expbeta needs --radius") };
            UpdateRule::ExpBetaZeroTemp { x: &net.x_in, r }
        }
        UpdateArg::Softmax => match args.beta {
            Some(beta) => UpdateRule::SoftmaxFinite { x: &net.x_in, beta },
            None => UpdateRule::SoftmaxZeroTemp { x: &net.x_in },
        },
    };
    let trace = run_to_fixed_point(&rule, &query, args.max_steps)?;
    write_trace(&args.out, &trace)?;
    println!("converged={} steps={} cycle={}", trace.converged, trace.steps, trace.cycle);
    Ok(())
}

fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else { bail!("grid '{s}' is not lo:hi:count") };
    let (lo, hi): (f64, f64) = (lo.parse()?, hi.parse()?);
    let count: usize = count.parse()?;
    if count == 0 {
        bail!("grid needs at least one point");
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

fn kernel_of_separation(spec: &KernelSpec, v: f64) -> anyhow::Result<f64> {
    Ok(match *spec {
        KernelSpec::ExpBeta { r, beta } => expbeta_of_dist(v, r, beta),
        KernelSpec::SdmCube { n_in, r } => {
            if v < 0.0 || v.fract() != 0.0 {
                bail!("Hamming distance {v} is not a non-negative integer");
            }
            sdm_cube_kernel(n_in, r, v as usize)?
        }
        KernelSpec::SdmSphereExact { n_in, b } => sdm_sphere_kernel_exact(n_in, b, v.cos())?,
        KernelSpec::SdmSphereApprox { n_in, b } => sdm_sphere_kernel_approx(n_in, b, (0.5 * v).sin())?,
        _ => spec.of_dot(v)?,
    })
}

fn cmd_kernel(args: &KernelArgs) -> anyhow::Result<()> {
    emit_config("kernel", args)?;
    let mut out: Vec<u8> = Vec::new();
    if let (Some(x), Some(y)) = (&args.x, &args.y) {
        let k = kernel_eval(&args.kernel, x, y)?;
        match args.format {
            Format::Csv => writeln!(out, "{k:?}")?,
            Format::Json => writeln!(out, "{}", json!({ "kernel": args.kernel.to_string(), "value": k }))?,
        }
    } else if let Some(path) = &args.patterns {
        let set = read_patterns(path).with_context(|| format!("reading {}", path.display()))?;
        let k = kernel_matrix(&args.kernel, set.data())?;
        match args.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                for row in k.row_iter() {
                    w.write_record(row.iter().map(|v| format!("{v:?}")))?;
                }
                w.flush()?;
            }
            Format::Json => {
                let rows: Vec<Vec<f64>> = k.row_iter().map(|r| r.iter().copied().collect()).collect();
                writeln!(out, "{}", json!({ "kernel": args.kernel.to_string(), "gram": rows }))?;
            }
        }
    } else if let Some(grid) = &args.grid {
        let points = parse_grid(grid)?;
        let values = points.iter().map(|v| kernel_of_separation(&args.kernel, *v)).collect::<anyhow::Result<Vec<f64>>>()?;
        match args.format {
            Format::Csv => {
                writeln!(out, "separation,value")?;
                for (p, v) in points.iter().zip(&values) {
                    writeln!(out, "{p:?},{v:?}")?;
                }
            }
            Format::Json => writeln!(out, "{}", json!({ "kernel": args.kernel.to_string(), "separation": points, "value": values }))?,
        }
    } else {
        bail!("give --x and --y, --patterns or --grid");
    }
    match &args.out {
        Some(path) => kernmem::io::write_atomic(path, &out)?,
        None => std::io::stdout().write_all(&out)?,
    }
    Ok(())
}

fn finish_report(report: ExperimentReport, common: &Common) -> anyhow::Result<()> {
    emit_config(
        &format!("experiment {}", report.name),
        &json!({ "experiment": report.config, "jobs": common.jobs, "out_dir": common.out_dir, "format": common.format }),
    )?;
    std::fs::create_dir_all(&common.out_dir).with_context(|| format!("creating {}", common.out_dir.display()))?;
    let (csv_path, json_path) = write_report(&common.out_dir, &report)?;
    log::info!("wrote {} and {} in {:.1}s", csv_path.display(), json_path.display(), report.runtime_secs);
    match common.format {
        Format::Csv => std::io::stdout().write_all(&report_csv(&report)?)?,
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn cmd_experiment(which: &Experiment) -> anyhow::Result<()> {
    match which {
        Experiment::Margin {
            n,
            loads,
            rules,
            trials,
            sbp_lr,
            sbp_iters,
            sbp_batch,
            hard_margin_max_sweeps,
            common,
        } => {
            let cfg = MarginConfig {
                rules: rules.clone(),
                sbp_lr: *sbp_lr,
                sbp_iters: *sbp_iters,
                sbp_batch: *sbp_batch,
                hard_margin_max_sweeps: *hard_margin_max_sweeps,
                ..MarginConfig::new(*n, loads.clone(), *trials, common.seed)
            };
            finish_report(exp_margin_vs_load(&cfg, common.jobs)?, common)
        }
        Experiment::CapacityGaussian {
            n_values,
            r,
            sigma_sq,
            trials,
            max_samples,
            common,
        } => {
            let radius = match r {
                Some(r) => RadiusSpec::Fixed { r: *r },
                None => RadiusSpec::NoiseVariance { sigma_sq: sigma_sq.unwrap_or(0.25) },
            };
            let cfg = CapacityConfig {
                max_samples: *max_samples,
                ..CapacityConfig::new(n_values.clone(), radius, *trials, common.seed)
            };
            finish_report(exp_capacity_gaussian(&cfg, common.jobs)?, common)
        }
        Experiment::Noise {
            n,
            m,
            r,
            geometry: geo,
            sigma_grid,
            trials,
            common,
        } => {
            let geometry = geometry(*geo, 0.5);
            let grid = if sigma_grid == "auto" {
                auto_noise_grid(*n, *r, geometry)
            } else {
                sigma_grid
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad noise level '{v}'")))
                    .collect::<anyhow::Result<_>>()?
            };
            let cfg = NoiseConfig {
                n: *n,
                m: m.unwrap_or(if geometry.is_bipolar() { 3 } else { 10 }),
                r: *r,
                grid,
                trials: *trials,
                seed: common.seed,
                geometry,
            };
            finish_report(exp_noise_recovery(&cfg, common.jobs)?, common)
        }
        Experiment::SdmKernel {
            n_in,
            b,
            angles,
            support_fractions,
            mc_samples,
            common,
        } => {
            let angles = match (angles, support_fractions) {
                (Some(a), _) => AngleGrid::Radians(a.clone()),
                (None, Some(f)) => AngleGrid::SupportFractions(f.clone()),
                (None, None) => AngleGrid::SupportFractions((1..=10).map(|k| k as f64 * 0.05).collect()),
            };
            let cfg = SdmKernelConfig {
                n_in: *n_in,
                b_values: b.clone(),
                angles,
                mc_samples: *mc_samples,
                seed: common.seed,
            };
            finish_report(exp_sdm_kernel_scan(&cfg, common.jobs)?, common)
        }
        Experiment::Hopfield {
            n,
            m_grid,
            rule,
            flips,
            trials,
            max_sweeps,
            common,
        } => {
            let cfg = HopfieldConfig {
                n: *n,
                m_grid: m_grid.clone(),
                rule: *rule,
                flip_count: *flips,
                trials: *trials,
                seed: common.seed,
                max_sweeps: *max_sweeps,
            };
            finish_report(exp_hopfield_capacity(&cfg, common.jobs)?, common)
        }
        Experiment::Svp {
            n,
            m_grid,
            trials,
            tol,
            common,
        } => {
            let cfg = SvpConfig {
                n: *n,
                m_grid: m_grid.clone(),
                trials: *trials,
                seed: common.seed,
                tol: *tol,
            };
            finish_report(exp_svp_fraction(&cfg, common.jobs)?, common)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Recall(args) => cmd_recall(args),
        Command::Kernel(args) => cmd_kernel(args),
        Command::Experiment(args) => cmd_experiment(&args.which),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
