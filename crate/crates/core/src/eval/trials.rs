use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use super::baseline::{build_mlp_baseline, predict_mlp, train_mlp};
use super::metrics::{metrics, Metrics};
use crate::data::{prepare_split, random_partition, Dataset, ScalerFit, DEFAULT_RATIOS};
use crate::model::ModalityPartition;
use crate::train::{train, StopReason, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    Consensus,
    Mlp,
}

/// How the retained natural modalities are regrouped before training.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Grouping {
    Natural,
    /// Each entry lists retained-group positions forming one modality.
    Merged(Vec<Vec<usize>>),
    /// Seeded near-equal random split of the retained features.
    Random(usize),
}

/// One experimental condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cell {
    pub id: String,
    pub family: ModelFamily,
    /// Natural modality positions whose features are used; `None` keeps all.
    pub modalities: Option<Vec<usize>>,
    pub grouping: Grouping,
    pub noise: bool,
    pub cooperative: bool,
}

impl Cell {
    /// A consensus network on every feature with natural modalities, noise,
    /// and cooperative optimization.
    pub fn consensus(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            family: ModelFamily::Consensus,
            modalities: None,
            grouping: Grouping::Natural,
            noise: true,
            cooperative: true,
        }
    }

    pub fn mlp(id: impl Into<String>) -> Self {
        Self {
            family: ModelFamily::Mlp,
            ..Self::consensus(id)
        }
    }
}

/// A complete (imputed) dataset and its natural modality partition.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub dataset: Dataset,
    pub partition: ModalityPartition,
}

impl ExperimentData {
    pub fn new(dataset: Dataset, partition: ModalityPartition) -> Result<Self> {
        if dataset.num_features() != partition.total_dims() {
            return Err(Error::dim("partition features", dataset.num_features(), partition.total_dims()));
        }
        if dataset.missing_count() > 0 {
            return Err(Error::Imputation(format!(
                "{} missing values; impute before running trials",
                dataset.missing_count()
            )));
        }
        Ok(Self { dataset, partition })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSettings {
    /// Its `seed` is the master seed; trial `t` uses `seed + t` for both the
    /// split and initialization.
    pub train: TrainConfig,
    pub trials: usize,
    pub ratios: (f64, f64, f64),
    /// Worker threads; 1 runs trials sequentially.
    pub jobs: usize,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            trials: 10,
            ratios: DEFAULT_RATIOS,
            jobs: 1,
        }
    }
}

impl TrialSettings {
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.train.seed.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub split_hash: u64,
    /// Identifies the cell and its training hyperparameters, independent of seed.
    pub config_fingerprint: u64,
    pub metrics: Metrics,
    pub stop_reason: StopReason,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; NaN with fewer than two values.
    pub std: f64,
    pub n: usize,
}

/// Mean and sample (n - 1) standard deviation. Values are summed in sorted
/// order so the result does not depend on trial order.
pub fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    if n == 0 {
        return MetricSummary {
            mean: f64::NAN,
            std: f64::NAN,
            n,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        f64::NAN
    } else {
        let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mean).powi(2)).collect();
        dev.sort_by(f64::total_cmp);
        (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MetricSummary { mean, std, n }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub reports: Vec<TrialReport>,
    /// Trials that aborted at runtime; excluded from the summaries.
    pub failures: Vec<TrialFailure>,
}

impl CellResult {
    /// Summaries in [`Metrics::NAMES`] order over completed trials.
    pub fn summaries(&self) -> [MetricSummary; 3] {
        let column = |i: usize| {
            let v: Vec<f64> = self.reports.iter().map(|r| r.metrics.values()[i]).collect();
            summarize(&v)
        };
        [column(0), column(1), column(2)]
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.metrics.accuracy).collect()
    }
}

fn config_fingerprint(cell: &Cell, config: &TrainConfig) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    cell.hash(&mut h);
    format!("{:?}", TrainConfig { seed: 0, ..config.clone() }).hash(&mut h);
    h.finish()
}

/// Trains and scores one trial of `cell` on the test split.
pub fn run_trial(data: &ExperimentData, settings: &TrialSettings, cell: &Cell, trial: usize) -> Result<TrialReport> {
    let seed = settings.trial_seed(trial);
    let config = TrainConfig {
        seed,
        noise_enabled: cell.noise,
        cooperative: cell.cooperative,
        ..settings.train.clone()
    };
    let prepared = prepare_split(&data.dataset, settings.ratios, seed, ScalerFit::TrainOnly)?;
    if prepared.test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let all: Vec<usize> = (0..data.partition.num_modalities()).collect();
    let keep = cell.modalities.as_deref().unwrap_or(&all);
    if keep.is_empty() {
        return Err(Error::Config(format!("cell '{}' keeps no modalities", cell.id)));
    }
    let mut columns = Vec::new();
    for &k in keep {
        let group = data
            .partition
            .groups()
            .get(k)
            .ok_or_else(|| Error::Config(format!("cell '{}': no modality at position {k}", cell.id)))?;
        columns.extend_from_slice(&group.indices);
    }
    let train_set = prepared.train.select_features(&columns);
    let val_set = prepared.val.select_features(&columns);
    let test_set = prepared.test.select_features(&columns);
    let num_classes = data.dataset.num_classes();

    let (pred, history) = match cell.family {
        ModelFamily::Consensus => {
            let (restricted, _) = data.partition.restrict(keep)?;
            let partition = match &cell.grouping {
                Grouping::Natural => restricted,
                Grouping::Merged(sets) => restricted.merge(sets)?,
                Grouping::Random(k) => random_partition(columns.len(), *k, seed)?,
            };
            let (model, history) = train(&config, partition, num_classes, &train_set, &val_set)?;
            (model.predict(&test_set.x)?, history)
        }
        ModelFamily::Mlp => {
            let modalities = match &cell.grouping {
                Grouping::Natural => keep.len(),
                Grouping::Merged(sets) => sets.len(),
                Grouping::Random(k) => *k,
            };
            let mut mlp = build_mlp_baseline(columns.len(), modalities, num_classes, &config.model, seed)?;
            let history = train_mlp(&mut mlp, &config, &train_set, &val_set)?;
            (predict_mlp(&mlp, &test_set.x)?, history)
        }
    };
    Ok(TrialReport {
        trial,
        seed,
        split_hash: prepared.indices.fingerprint(),
        config_fingerprint: config_fingerprint(cell, &config),
        metrics: metrics(&test_set.y, &pred, num_classes)?,
        stop_reason: history.stop_reason,
        steps: history.records.len(),
    })
}

/// Runs `settings.trials` trials of one cell. Configuration errors abort the
/// run; any other trial error is logged and the trial excluded.
pub fn run_trials(data: &ExperimentData, settings: &TrialSettings, cell: &Cell) -> Result<CellResult> {
    if settings.trials < 2 {
        return Err(Error::Config("at least 2 trials are required".into()));
    }
    if settings.jobs == 0 {
        return Err(Error::Config("jobs must be >= 1".into()));
    }
    settings.train.validate()?;
    let outcomes: Vec<Result<TrialReport>> = if settings.jobs == 1 {
        (0..settings.trials).map(|t| run_trial(data, settings, cell, t)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            (0..settings.trials)
                .into_par_iter()
                .map(|t| run_trial(data, settings, cell, t))
                .collect()
        })
    };
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => reports.push(r),
            Err(e) if e.is_config() => return Err(e),
            Err(e) => {
                log::warn!("cell '{}' trial {trial} aborted: {e}", cell.id);
                failures.push(TrialFailure {
                    trial,
                    seed: settings.trial_seed(trial),
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(CellResult {
        cell: cell.clone(),
        reports,
        failures,
    })
}
