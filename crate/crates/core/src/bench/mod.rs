//! Benchmark suites over synthetic data, written as per-cell CSV files plus a
//! merged row file and a summary table.

mod experiment;

pub use experiment::{run_experiment, DatasetSpec, ExperimentConfig, Method, Training};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ksg_report, mine_f_es, EarlyStopPolicy, KsgConfig};
use crate::demine::{demine_search_estimate, EstimateReport, Objective, SearchCriterion, TrainConfig};
use crate::error::{invalid, Error, Result};
use crate::meta::{meta_demine_estimate, MetaConfig};
use crate::seed;
use crate::synthetic::{GaussianSpec, SineSpec};

/// Environment variable holding the worker count for suites.
pub const WORKERS_ENV: &str = "DEMINE_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    RhoSweep20d,
    NSweep1d,
    NSweep20d,
    NSweepSine,
    TaskAugmentation,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::RhoSweep20d,
        Suite::NSweep1d,
        Suite::NSweep20d,
        Suite::NSweepSine,
        Suite::TaskAugmentation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::RhoSweep20d => "rho-sweep-20d",
            Suite::NSweep1d => "n-sweep-1d",
            Suite::NSweep20d => "n-sweep-20d",
            Suite::NSweepSine => "n-sweep-sine",
            Suite::TaskAugmentation => "task-augmentation",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite {s:?}")))
    }
}

/// Method labels emitted by the sweep suites.
pub const SWEEP_METHODS: [&str; 6] = ["demine-vr", "demine-sig", "meta-demine-vr", "meta-demine-sig", "mine-f-es", "ksg"];

pub const AUGMENTATION_MODES: [&str; 6] = ["·", "m", "P", "O", "m(P(·))", "m(P(O(·)))"];
pub const ADAPTATION_STEPS: [usize; 3] = [0, 10, 20];
pub const DEFAULT_N_GRID: [usize; 5] = [30, 100, 300, 1000, 3000];
pub const DEFAULT_RHO_GRID: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub suite: Suite,
    /// Multiplies the desk-scale search budget (50 trials) and meta budget
    /// (`N_M` = 300, 32 PEPG pairs).
    pub scale: f64,
    /// Replace the budgets with 1000 search trials and `N_M` = 3000.
    pub full_scale: bool,
    pub seeds: usize,
    pub master_seed: u64,
    pub n_grid: Option<Vec<usize>>,
    pub rho_grid: Option<Vec<f64>>,
    /// Restrict the sweep suites to these method labels.
    pub methods: Option<Vec<String>>,
    pub out_dir: PathBuf,
    pub sine_cache: Option<PathBuf>,
    /// Worker threads; falls back to `DEMINE_WORKERS`, then to rayon's default.
    pub workers: Option<usize>,
}

impl BenchOptions {
    pub fn new(suite: Suite, scale: f64, out_dir: impl Into<PathBuf>) -> Self {
        BenchOptions {
            suite,
            scale,
            full_scale: false,
            seeds: 5,
            master_seed: 0,
            n_grid: None,
            rho_grid: None,
            methods: None,
            out_dir: out_dir.into(),
            sine_cache: None,
            workers: None,
        }
    }

    fn scaled(&self, desk: usize, full: usize) -> usize {
        if self.full_scale {
            full
        } else {
            ((desk as f64 * self.scale).round() as usize).max(1)
        }
    }

    pub fn search_trials(&self) -> usize {
        self.scaled(50, 1000)
    }

    pub fn meta_iterations(&self) -> usize {
        self.scaled(300, 3000)
    }

    pub fn population(&self) -> usize {
        self.scaled(32, 32).max(2)
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return invalid(format!("scale must be positive, got {}", self.scale));
        }
        if self.seeds == 0 {
            return invalid("at least one seed is required");
        }
        if let Some(m) = &self.methods {
            if let Some(bad) = m.iter().find(|m| !SWEEP_METHODS.contains(&m.as_str())) {
                return invalid(format!("unknown method label {bad:?}"));
            }
        }
        Ok(())
    }
}

/// One point of a suite's grid.
#[derive(Clone, Debug, PartialEq)]
struct Cell {
    id: String,
    dataset: CellData,
    n: usize,
    mode: Option<String>,
    n_o: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum CellData {
    Gaussian { k: usize, rho: f64 },
    Sine,
}

impl CellData {
    fn label(&self) -> String {
        match self {
            CellData::Gaussian { k, .. } => format!("gaussian-{k}d"),
            CellData::Sine => "sine".into(),
        }
    }

    fn spec(&self, n: usize, data_seed: u64) -> DatasetSpec {
        match *self {
            CellData::Gaussian { k, rho } => DatasetSpec::Gaussian(GaussianSpec { k, rho, n, seed: data_seed }),
            CellData::Sine => DatasetSpec::Sine(SineSpec::standard(n, data_seed)),
        }
    }
}

fn cells(opts: &BenchOptions) -> Vec<Cell> {
    let ns = opts.n_grid.clone().unwrap_or_else(|| DEFAULT_N_GRID.to_vec());
    let n_cells = |data: CellData| -> Vec<Cell> {
        ns.iter()
            .map(|&n| Cell {
                id: format!("{}-n{n}", data.label()),
                dataset: data,
                n,
                mode: None,
                n_o: None,
            })
            .collect()
    };
    match opts.suite {
        Suite::RhoSweep20d => {
            let n = opts.n_grid.as_ref().and_then(|g| g.first().copied()).unwrap_or(300);
            opts.rho_grid
                .clone()
                .unwrap_or_else(|| DEFAULT_RHO_GRID.to_vec())
                .into_iter()
                .map(|rho| Cell {
                    id: format!("gaussian-20d-rho{rho}"),
                    dataset: CellData::Gaussian { k: 20, rho },
                    n,
                    mode: None,
                    n_o: None,
                })
                .collect()
        }
        Suite::NSweep1d => n_cells(CellData::Gaussian { k: 1, rho: 0.8 }),
        Suite::NSweep20d => n_cells(CellData::Gaussian { k: 20, rho: 0.3 }),
        Suite::NSweepSine => n_cells(CellData::Sine),
        Suite::TaskAugmentation => {
            let n = opts.n_grid.as_ref().and_then(|g| g.first().copied()).unwrap_or(300);
            let mut out = Vec::new();
            for &n_o in &ADAPTATION_STEPS {
                for (i, mode) in AUGMENTATION_MODES.iter().enumerate() {
                    out.push(Cell {
                        id: format!("gaussian-20d-mode{i}-no{n_o}"),
                        dataset: CellData::Gaussian { k: 20, rho: 0.3 },
                        n,
                        mode: Some(mode.to_string()),
                        n_o: Some(n_o),
                    });
                }
            }
            out
        }
    }
}

/// One estimator run within a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub suite: String,
    pub cell: String,
    pub dataset: String,
    pub rho: Option<f64>,
    pub n: usize,
    pub mode: Option<String>,
    pub n_o: Option<usize>,
    pub seed_index: usize,
    pub seed: u64,
    pub method: String,
    pub ground_truth: Option<f64>,
    pub point_estimate: f64,
    pub epsilon: Option<f64>,
    pub lower_bound: Option<f64>,
    pub dependent: Option<bool>,
    pub n_train: usize,
    pub n_val: usize,
    pub iterations: Option<usize>,
}

/// Aggregate over seeds for one (cell, method).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: String,
    pub cell: String,
    pub dataset: String,
    pub rho: Option<f64>,
    pub n: usize,
    pub mode: Option<String>,
    pub n_o: Option<usize>,
    pub method: String,
    pub ground_truth: Option<f64>,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub mean_epsilon: Option<f64>,
    pub dependent_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<SummaryRow>,
}

/// Group rows by (cell, method) in order of first appearance.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let k = (r.cell.as_str(), r.method.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(cell, method)| {
            let group: Vec<&BenchRow> = rows.iter().filter(|r| r.cell == cell && r.method == method).collect();
            let first = group[0];
            let est: Vec<f64> = group.iter().map(|r| r.point_estimate).collect();
            let k = est.len() as f64;
            let mean = est.iter().sum::<f64>() / k;
            let std = if est.len() > 1 {
                (est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            let eps: Vec<f64> = group.iter().filter_map(|r| r.epsilon).collect();
            let dep: Vec<bool> = group.iter().filter_map(|r| r.dependent).collect();
            SummaryRow {
                suite: first.suite.clone(),
                cell: cell.to_string(),
                dataset: first.dataset.clone(),
                rho: first.rho,
                n: first.n,
                mode: first.mode.clone(),
                n_o: first.n_o,
                method: method.to_string(),
                ground_truth: first.ground_truth,
                runs: group.len(),
                mean,
                std,
                min: est.iter().copied().fold(f64::INFINITY, f64::min),
                max: est.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_epsilon: (!eps.is_empty()).then(|| eps.iter().sum::<f64>() / eps.len() as f64),
                dependent_rate: (!dep.is_empty())
                    .then(|| dep.iter().filter(|d| **d).count() as f64 / dep.len() as f64),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn workers(opts: &BenchOptions) -> Option<usize> {
    opts.workers.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&w: &usize| w > 0)
    })
}

/// Run every cell of the suite for `opts.seeds` seeds. Each (cell, seed) job
/// writes `cells/<cell>-seed<k>.csv` as soon as it finishes; `rows.csv` and
/// `summary.csv` are written once all jobs are done.
pub fn run_benchmark(opts: &BenchOptions) -> Result<BenchResult> {
    opts.validate()?;
    let cells = cells(opts);
    let cell_dir = opts.out_dir.join("cells");
    std::fs::create_dir_all(&cell_dir)?;

    let truths: Vec<Option<f64>> = cells
        .iter()
        .map(|c| c.dataset.spec(c.n, 0).ground_truth(opts.sine_cache.as_deref()))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..opts.seeds).map(move |s| (c, s)))
        .collect();

    let run = || -> Result<Vec<Vec<BenchRow>>> {
        jobs.par_iter()
            .map(|&(c, s)| {
                let rows = run_job(opts, &cells[c], truths[c], s)?;
                let path = cell_dir.join(format!("{}-seed{s}.csv", cells[c].id));
                write_csv(&rows, std::fs::File::create(path)?)?;
                Ok(rows)
            })
            .collect()
    };
    let per_job = match workers(opts) {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let rows: Vec<BenchRow> = per_job.into_iter().flatten().collect();
    let summary = summarize(&rows);
    write_csv(&rows, std::fs::File::create(opts.out_dir.join("rows.csv"))?)?;
    write_csv(&summary, std::fs::File::create(opts.out_dir.join("summary.csv"))?)?;
    Ok(BenchResult { rows, summary })
}

fn wants(opts: &BenchOptions, method: &str) -> bool {
    opts.methods.as_ref().is_none_or(|m| m.iter().any(|x| x == method))
}

fn run_job(opts: &BenchOptions, cell: &Cell, truth: Option<f64>, seed_index: usize) -> Result<Vec<BenchRow>> {
    let run_seed = seed::derive_indexed(
        seed::derive(opts.master_seed, &[opts.suite.name(), &cell.id]),
        "seed",
        seed_index,
    );
    let ds = cell.dataset.spec(cell.n, seed::derive(run_seed, &["data"])).load()?;
    let row = |report: &EstimateReport, label: &str| -> Result<BenchRow> {
        report.validate()?;
        Ok(BenchRow {
            suite: opts.suite.name().into(),
            cell: cell.id.clone(),
            dataset: cell.dataset.label(),
            rho: match cell.dataset {
                CellData::Gaussian { rho, .. } => Some(rho),
                CellData::Sine => None,
            },
            n: cell.n,
            mode: cell.mode.clone(),
            n_o: cell.n_o,
            seed_index,
            seed: run_seed,
            method: label.into(),
            ground_truth: truth,
            point_estimate: report.point_estimate,
            epsilon: report.epsilon,
            lower_bound: report.confident_lower_bound(),
            dependent: report.significance.map(|_| report.is_dependent()),
            n_train: report.n_train,
            n_val: report.n_val,
            iterations: report.config.as_ref().map(|c| c.iterations),
        })
    };
    let space = cell.dataset.spec(cell.n, 0).search_space();
    let meta_cfg = |n_o: Option<usize>, mode: Option<&str>| MetaConfig {
        outer_iterations: opts.meta_iterations(),
        population: opts.population(),
        inner_iterations: n_o,
        augmentation: mode.unwrap_or("m(P(O(·)))").to_string(),
        ..MetaConfig::default()
    };
    let search = |objective: Objective| -> Result<(EstimateReport, TrainConfig)> {
        let criterion = SearchCriterion::new(objective, opts.search_trials());
        let (report, outcome) = demine_search_estimate(&ds, &criterion, &space, 0.05, run_seed)?;
        Ok((report, TrainConfig { seed: run_seed, ..outcome.best }))
    };
    let meta = |base: &TrainConfig, mc: &MetaConfig, label: &str| -> Result<BenchRow> {
        let mut r = meta_demine_estimate(&ds, base, mc, 0.05)?;
        r.method = label.into();
        row(&r, label)
    };

    let mut rows = Vec::new();
    if opts.suite == Suite::TaskAugmentation {
        let (_, base) = search(Objective::Vr)?;
        rows.push(meta(&base, &meta_cfg(cell.n_o, cell.mode.as_deref()), "meta-demine-vr")?);
        return Ok(rows);
    }
    let mut vr_iterations = None;
    for objective in [Objective::Vr, Objective::Sig] {
        let demine_label = format!("demine-{}", objective.suffix());
        let meta_label = format!("meta-demine-{}", objective.suffix());
        let need_meta = wants(opts, &meta_label);
        let need_es = objective == Objective::Vr && wants(opts, "mine-f-es");
        if !(wants(opts, &demine_label) || need_meta || need_es) {
            continue;
        }
        let (report, base) = search(objective)?;
        if objective == Objective::Vr {
            vr_iterations = Some(base.iterations);
        }
        if wants(opts, &demine_label) {
            rows.push(row(&report, &demine_label)?);
        }
        if need_meta {
            rows.push(meta(&base, &meta_cfg(None, None), &meta_label)?);
        }
        if need_es {
            let stop = EarlyStopPolicy {
                max_iterations: vr_iterations.unwrap_or(base.iterations),
            };
            rows.push(row(&mine_f_es(&ds, &base, &stop, run_seed, 0.05)?, "mine-f-es")?);
        }
    }
    if wants(opts, "ksg") {
        rows.push(row(&ksg_report(&ds, &KsgConfig::default(), run_seed)?, "ksg")?);
    }
    Ok(rows)
}
