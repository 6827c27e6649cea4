use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use demine::bench::{
    run_benchmark, run_experiment, BenchOptions, DatasetSpec, ExperimentConfig, Method, Suite, Training,
};
use demine::confidence::{
    demine_epsilon, demine_sample_complexity, mine_sample_complexity, MineComplexityInput, ScoreBounds,
};
use demine::demine::{hyperparameter_search, predictive_split, Objective, SearchCriterion, TrainConfig};
use demine::meta::{MetaConfig, MetaOptimizer};
use demine::synthetic::{gaussian_ground_truth, sine_ground_truth, GaussianSpec, SineSpec};
use demine::{Error, Result};

#[derive(Parser)]
#[command(name = "demine", version, about = "Mutual information estimation with confidence intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV with a JSON sidecar.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Estimate mutual information.
    Estimate(EstimateArgs),
    /// Sample-complexity and confidence-width calculators.
    Complexity {
        #[command(subcommand)]
        which: ComplexityKind,
    },
    /// Random hyperparameter search on the training split.
    Search(SearchArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum GenKind {
    Gaussian {
        #[arg(long)]
        k: usize,
        #[arg(long, allow_negative_numbers = true)]
        rho: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path; stdout when omitted (no sidecar then).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Sine {
        #[arg(long, default_value_t = 8.0 * std::f64::consts::PI)]
        a: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2, allow_negative_numbers = true)]
        phase: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compute the KSG oracle ground truth for the sidecar.
        #[arg(long)]
        with_truth: bool,
        #[arg(long)]
        sine_cache: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ComplexityKind {
    /// Samples needed by the parametric MINE bound.
    Mine {
        #[arg(long)]
        d: f64,
        #[arg(long = "M")]
        m: f64,
        #[arg(long = "K")]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        lip: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Validation samples needed for half-width `eps`.
    Demine {
        #[arg(long = "L", allow_negative_numbers = true)]
        l: f64,
        #[arg(long = "U", allow_negative_numbers = true)]
        u: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Half-width achievable with `n` validation samples.
    Epsilon {
        #[arg(long = "L", allow_negative_numbers = true)]
        l: f64,
        #[arg(long = "U", allow_negative_numbers = true)]
        u: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        delta: f64,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file with columns x0.., z0...
    #[arg(long, conflicts_with_all = ["k", "sine"])]
    data: Option<PathBuf>,
    /// Gaussian dimension.
    #[arg(long, requires = "rho")]
    k: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Standard sine-wave data.
    #[arg(long, conflicts_with = "k")]
    sine: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl DataArgs {
    fn spec(&self) -> Result<DatasetSpec> {
        if let Some(path) = &self.data {
            return Ok(DatasetSpec::Csv { path: path.clone() });
        }
        let n = self
            .n
            .ok_or_else(|| Error::InvalidInput("--n is required for generated data".into()))?;
        if self.sine {
            return Ok(DatasetSpec::Sine(SineSpec::standard(n, self.data_seed)));
        }
        match (self.k, self.rho) {
            (Some(k), Some(rho)) => Ok(DatasetSpec::Gaussian(GaussianSpec { k, rho, n, seed: self.data_seed })),
            _ => Err(Error::InvalidInput("give --data, --sine or --k with --rho".into())),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Demine,
    MetaDemine,
    MineFEs,
    Ksg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Vr,
    Sig,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Vr => Objective::Vr,
            ObjectiveArg::Sig => Objective::Sig,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Pepg,
    Bptt,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 1e-2)]
    eta: f64,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 512)]
    batch: usize,
    /// Score scale M.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Score shift t.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    shift: f64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            layers: self.layers,
            hidden: self.hidden,
            eta: self.eta,
            iterations: self.iterations,
            batch: self.batch,
            scale: self.scale,
            shift: self.shift,
            seed: 0,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// JSON experiment config; replaces all other estimation flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "demine")]
    method: MethodArg,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Select the critic by random search instead of the fixed flags.
    #[arg(long, value_enum)]
    search: Option<ObjectiveArg>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Estimator seed; repeat for several runs.
    #[arg(long = "seed", default_values_t = [0u64])]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    ksg_k: usize,
    /// Outer meta iterations N_M.
    #[arg(long, default_value_t = 3000)]
    n_meta: usize,
    /// Tasks per outer iteration N_T.
    #[arg(long, default_value_t = 1)]
    tasks: usize,
    #[arg(long, default_value_t = 0.8)]
    meta_fraction: f64,
    #[arg(long)]
    eta_meta: Option<f64>,
    #[arg(long)]
    inner: Option<usize>,
    #[arg(long, value_enum, default_value = "pepg")]
    optimizer: OptimizerArg,
    #[arg(long, default_value = "m(P(O(·)))")]
    augmentation: String,
    #[arg(long, default_value_t = 32)]
    population: usize,
    #[arg(long, default_value_t = 0.02)]
    sigma_init: f64,
    /// Record wall-clock time in the reports (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl EstimateArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return ExperimentConfig::from_json_file(path);
        }
        let method = match self.method {
            MethodArg::Demine => Method::Demine,
            MethodArg::MetaDemine => Method::MetaDemine,
            MethodArg::MineFEs => Method::MineFEs,
            MethodArg::Ksg => Method::Ksg,
        };
        let training = match self.search {
            Some(obj) => Training::Search {
                objective: obj.into(),
                trials: self.trials,
                folds: self.folds,
            },
            None => Training::Fixed {
                config: self.train.config(),
            },
        };
        let meta = (method == Method::MetaDemine).then(|| MetaConfig {
            outer_iterations: self.n_meta,
            tasks_per_iteration: self.tasks,
            meta_train_fraction: self.meta_fraction,
            eta_meta: self.eta_meta,
            inner_iterations: self.inner,
            optimizer: match self.optimizer {
                OptimizerArg::Pepg => MetaOptimizer::Pepg,
                OptimizerArg::Bptt => MetaOptimizer::BpttFirstOrder,
            },
            augmentation: self.augmentation.clone(),
            population: self.population,
            sigma_init: self.sigma_init,
            ..MetaConfig::default()
        });
        let cfg = ExperimentConfig {
            dataset: self.data.spec()?,
            method,
            training,
            meta,
            ksg_k: self.ksg_k,
            delta: self.delta,
            seeds: self.seeds.clone(),
            output: self.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "sig")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Winning configuration as JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Use the full search and meta-learning budgets.
    #[arg(long)]
    full_scale: bool,
    /// Comma-separated sample sizes overriding the suite grid.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Comma-separated correlations for rho-sweep-20d.
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,
    /// Comma-separated method labels to run.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    sine_cache: Option<PathBuf>,
    /// Worker threads (default: $DEMINE_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn sidecar(csv: &Path, spec: &DatasetSpec, truth: Option<f64>) -> Result<()> {
    let json = serde_json::json!({ "dataset": spec, "ground_truth_nats": truth });
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    std::fs::write(PathBuf::from(name), serde_json::to_string_pretty(&json)? + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { kind } => {
            let (spec, out, truth) = match kind {
                GenKind::Gaussian { k, rho, n, seed, out } => {
                    let spec = GaussianSpec { k, rho, n, seed };
                    spec.validate()?;
                    (DatasetSpec::Gaussian(spec), out, Some(gaussian_ground_truth(k, rho)?))
                }
                GenKind::Sine { a, phase, noise, n, seed, out, with_truth, sine_cache } => {
                    let spec = SineSpec { a, phase, noise_sigma: noise, n, seed };
                    spec.validate()?;
                    let truth = if with_truth {
                        Some(sine_ground_truth(&spec, sine_cache.as_deref())?)
                    } else {
                        None
                    };
                    (DatasetSpec::Sine(spec), out, truth)
                }
            };
            let ds = spec.load()?;
            match out {
                Some(path) => {
                    ds.save_csv(&path)?;
                    sidecar(&path, &spec, truth)?;
                }
                None => ds.write_csv(std::io::stdout().lock())?,
            }
        }
        Command::Estimate(args) => {
            let cfg = args.experiment()?;
            let start = Instant::now();
            let mut reports = run_experiment(&cfg)?;
            if args.timing {
                let secs = start.elapsed().as_secs_f64() / reports.len() as f64;
                reports.iter_mut().for_each(|r| r.wall_time_secs = Some(secs));
            }
            let text = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])?
            } else {
                serde_json::to_string_pretty(&reports)?
            };
            let out = args.out.clone().or(cfg.output.clone());
            emit(&(text + "\n"), out.as_deref())?;
        }
        Command::Complexity { which } => {
            let line = match which {
                ComplexityKind::Mine { d, m, k, lip, eps, delta } => mine_sample_complexity(&MineComplexityInput {
                    d,
                    score_bound: m,
                    param_bound: k,
                    lipschitz: lip,
                    eps,
                    delta,
                })?
                .to_string(),
                ComplexityKind::Demine { l, u, eps, delta } => {
                    demine_sample_complexity(ScoreBounds::new(l, u)?, eps, delta)?.to_string()
                }
                ComplexityKind::Epsilon { l, u, n, delta } => {
                    demine_epsilon(ScoreBounds::new(l, u)?, n, delta)?.to_string()
                }
            };
            println!("{line}");
        }
        Command::Search(args) => {
            let ds = args.data.spec()?;
            let data = ds.load()?;
            let (train, _) = predictive_split(&data, args.seed)?;
            let criterion = SearchCriterion {
                folds: args.folds,
                delta: args.delta,
                ..SearchCriterion::new(args.objective.into(), args.trials)
            };
            let outcome = hyperparameter_search(
                &train,
                &criterion,
                &ds.search_space(),
                demine::seed::derive(args.seed, &["search"]),
            )?;
            if let Some(path) = &args.trace {
                outcome.write_trace_csv(std::fs::File::create(path)?)?;
            }
            let best = TrainConfig { seed: args.seed, ..outcome.best };
            emit(&(serde_json::to_string_pretty(&best)? + "\n"), args.out.as_deref())?;
        }
        Command::Bench(args) => {
            let mut opts = BenchOptions::new(args.suite.parse::<Suite>()?, args.scale, args.out);
            opts.seeds = args.seeds;
            opts.master_seed = args.master_seed;
            opts.full_scale = args.full_scale;
            opts.n_grid = args.n_grid;
            opts.rho_grid = args.rho_grid;
            opts.methods = args.methods;
            opts.sine_cache = args.sine_cache;
            opts.workers = args.workers;
            let result = run_benchmark(&opts)?;
            log::info!("{} rows, {} summary rows written to {}", result.rows.len(), result.summary.len(), opts.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::from(1)
        }
    }
}
