use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{ksg_report, mine_f_es, EarlyStopPolicy, KsgConfig};
use crate::dataset::PairedDataset;
use crate::demine::{
    demine_estimate, demine_search_estimate, EstimateReport, Objective, SearchCriterion, SearchSpace,
    TrainConfig,
};
use crate::error::{invalid, Result};
use crate::meta::{meta_demine_estimate, MetaConfig};
use crate::synthetic::{gaussian_ground_truth, gen_gaussian, gen_sine, sine_ground_truth, GaussianSpec, SineSpec};

/// Where the samples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Gaussian(GaussianSpec),
    Sine(SineSpec),
    Csv { path: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<PairedDataset> {
        match self {
            DatasetSpec::Gaussian(g) => gen_gaussian(g),
            DatasetSpec::Sine(s) => gen_sine(s),
            DatasetSpec::Csv { path } => PairedDataset::load_csv(path),
        }
    }

    /// Closed form for Gaussians, the cached KSG oracle for sine data, nothing
    /// for files.
    pub fn ground_truth(&self, sine_cache: Option<&Path>) -> Result<Option<f64>> {
        match self {
            DatasetSpec::Gaussian(g) => gaussian_ground_truth(g.k, g.rho).map(Some),
            DatasetSpec::Sine(s) => sine_ground_truth(s, sine_cache).map(Some),
            DatasetSpec::Csv { .. } => Ok(None),
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        match self {
            DatasetSpec::Sine(_) => SearchSpace::sine(),
            _ => SearchSpace::gaussian(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Demine,
    MetaDemine,
    MineFEs,
    Ksg,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Demine => "demine",
            Method::MetaDemine => "meta-demine",
            Method::MineFEs => "mine-f-es",
            Method::Ksg => "ksg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "demine" => Ok(Method::Demine),
            "meta-demine" => Ok(Method::MetaDemine),
            "mine-f-es" => Ok(Method::MineFEs),
            "ksg" => Ok(Method::Ksg),
            other => invalid(format!("unknown method {other:?}")),
        }
    }
}

/// Fixed critic settings, or a random search that picks them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Training {
    Fixed { config: TrainConfig },
    Search { objective: Objective, trials: usize, folds: usize },
}

impl Default for Training {
    fn default() -> Self {
        Training::Fixed {
            config: TrainConfig::default(),
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_ksg_k() -> usize {
    3
}

/// One complete run description; serialised as the `--config` JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub method: Method,
    #[serde(default)]
    pub training: Training,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaConfig>,
    #[serde(default = "default_ksg_k")]
    pub ksg_k: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Estimator seeds; the dataset keeps its own seed.
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        match &self.dataset {
            DatasetSpec::Gaussian(g) => g.validate()?,
            DatasetSpec::Sine(s) => s.validate()?,
            DatasetSpec::Csv { .. } => {}
        }
        match &self.training {
            Training::Fixed { config } => config.validate()?,
            Training::Search { trials, folds, .. } => {
                if *trials == 0 || *folds < 2 {
                    return invalid("search needs at least 1 trial and 2 folds");
                }
            }
        }
        if let Some(m) = &self.meta {
            m.validate()?;
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The critic settings for `seed`: either the fixed config or the winner of a
/// search on that seed's training split. Returns the DEMINE report as well
/// when a search ran, since it is produced on the way.
fn resolve_config(
    cfg: &ExperimentConfig,
    ds: &PairedDataset,
    seed: u64,
) -> Result<(TrainConfig, Option<EstimateReport>)> {
    match &cfg.training {
        Training::Fixed { config } => Ok((TrainConfig { seed, ..config.clone() }, None)),
        Training::Search { objective, trials, folds } => {
            let criterion = SearchCriterion {
                folds: *folds,
                delta: cfg.delta,
                ..SearchCriterion::new(*objective, *trials)
            };
            let (report, outcome) =
                demine_search_estimate(ds, &criterion, &cfg.dataset.search_space(), cfg.delta, seed)?;
            Ok((TrainConfig { seed, ..outcome.best }, Some(report)))
        }
    }
}

/// Run `cfg.method` once per seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    cfg.validate()?;
    let ds = cfg.dataset.load()?;
    cfg.seeds
        .iter()
        .map(|&seed| match cfg.method {
            Method::Ksg => ksg_report(&ds, &KsgConfig { k_neighbors: cfg.ksg_k }, seed),
            Method::Demine => match resolve_config(cfg, &ds, seed)? {
                (_, Some(report)) => Ok(report),
                (train, None) => demine_estimate(&ds, &train, cfg.delta),
            },
            Method::MetaDemine => {
                let (train, _) = resolve_config(cfg, &ds, seed)?;
                meta_demine_estimate(&ds, &train, &cfg.meta.clone().unwrap_or_default(), cfg.delta)
            }
            Method::MineFEs => {
                let (train, _) = resolve_config(cfg, &ds, seed)?;
                let stop = EarlyStopPolicy {
                    max_iterations: train.iterations,
                };
                mine_f_es(&ds, &train, &stop, seed, cfg.delta)
            }
        })
        .collect()
}
