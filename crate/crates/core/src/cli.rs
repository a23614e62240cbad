//! Command-line entry points.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on runtime
//! failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    generate_synthetic, knn_impute, load_csv, load_csv_with_classes, load_modality_map, natural_partition,
    prepare_split, random_partition, write_csv, write_modality_map, Dataset, ScalerFit, SyntheticSpec,
    DEFAULT_KNN_K, DEFAULT_RATIOS,
};
use crate::eval::{metrics, run_ablation, suite_cells, Cell, ExperimentData, Metrics, Suite, TrialSettings};
use crate::model::{read_checkpoint, write_checkpoint, Checkpoint, ModalityPartition, ModelConfig};
use crate::train::{Trainer, TrainConfig};
use crate::viz::{export_snapshots, DEFAULT_SNAPSHOT_STEPS};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "consensus", version, about = "Consensus networks for multi-modal tabular classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model and write its checkpoint, training history, and test metrics.
    Train(TrainCmd),
    /// Score a labelled CSV with a saved checkpoint.
    Evaluate(EvaluateCmd),
    /// Repeat training over trial-indexed seeds and report mean and std.
    Trials(TrialsCmd),
    /// Run ablation suites with paired splits.
    Ablate(AblateCmd),
    /// Write a synthetic multi-modal dataset.
    Synth(SynthCmd),
    /// Train while exporting PCA views of the representations.
    Snapshots(SnapshotsCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Groups {
    Natural,
    Random(usize),
}

fn parse_groups(s: &str) -> std::result::Result<Groups, String> {
    if s == "natural" {
        return Ok(Groups::Natural);
    }
    let k = s
        .strip_prefix("random:")
        .and_then(|k| k.parse::<usize>().ok())
        .ok_or_else(|| format!("expected 'natural' or 'random:K', got '{s}'"))?;
    if k < 2 {
        return Err("random grouping needs K >= 2".into());
    }
    Ok(Groups::Random(k))
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Feature CSV with header id,label,<features...>.
    #[arg(long)]
    data: PathBuf,
    /// CSV with header feature_name,group_name.
    #[arg(long)]
    modality_map: Option<PathBuf>,
    /// Modality division: `natural` (from the map) or `random:K`.
    #[arg(long, default_value = "natural", value_parser = parse_groups)]
    groups: Groups,
    /// Neighbors used to impute missing values.
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    knn_k: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Include the Gaussian noise modality (default).
    #[arg(long, overrides_with = "no_noise")]
    noise: bool,
    #[arg(long)]
    no_noise: bool,
    /// Let the classification loss update the ePhysicians (default).
    #[arg(long, overrides_with = "no_coop")]
    coop: bool,
    #[arg(long)]
    no_coop: bool,
    /// Maximum outer steps.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Discriminator updates per minibatch.
    #[arg(long, default_value_t = 1)]
    k_disc: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Learning rate of all three optimizers.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    lr_ephysician: Option<f64>,
    #[arg(long)]
    lr_discriminator: Option<f64>,
    #[arg(long)]
    lr_classifier: Option<f64>,
    /// Stop when successive training losses differ by less than this.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 10)]
    hidden: usize,
    #[arg(long, default_value_t = 10)]
    rep_dim: usize,
    /// Hidden width of the classifier; 0 for none.
    #[arg(long, default_value_t = 0)]
    classifier_hidden: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            max_steps: self.steps,
            disc_steps: self.k_disc,
            batch_size: self.batch,
            lr_ephysician: self.lr_ephysician.unwrap_or(self.lr),
            lr_discriminator: self.lr_discriminator.unwrap_or(self.lr),
            lr_classifier: self.lr_classifier.unwrap_or(self.lr),
            noise_enabled: !self.no_noise,
            cooperative: !self.no_coop,
            convergence_tol: self.tol,
            seed: self.seed,
            model: ModelConfig {
                hidden_dim: self.hidden,
                representation_dim: self.rep_dim,
                classifier_hidden: self.classifier_hidden,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Output directory for model.ckpt, history.csv, and metrics.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateCmd {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    knn_k: usize,
    /// Predictions CSV: id,label,predicted,p0..p{L-1}.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Family {
    Cn,
    Mlp,
}

#[derive(Debug, Args)]
struct TrialsCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, value_enum, default_value_t = Family::Cn)]
    family: Family,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory for summary.csv and trials.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AblateCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Suites to run (noise, coop, modalities, grouping); all when omitted.
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory; writes <suite>_summary.csv and <suite>_trials.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthCmd {
    /// TOML file with generator parameters; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    modalities: Option<usize>,
    #[arg(long)]
    signal_dims: Option<usize>,
    #[arg(long)]
    distractor_dims: Option<usize>,
    #[arg(long)]
    strength: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the feature-to-modality map.
    #[arg(long)]
    map_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SnapshotsCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Comma-separated outer steps to snapshot.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SNAPSHOT_STEPS)]
    at: Vec<usize>,
    /// Snapshot CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(c) => train_cmd(c),
        Command::Evaluate(c) => evaluate_cmd(c),
        Command::Trials(c) => trials_cmd(c),
        Command::Ablate(c) => ablate_cmd(c),
        Command::Synth(c) => synth_cmd(c),
        Command::Snapshots(c) => snapshots_cmd(c),
    }
}

/// Loads, imputes, and partitions the dataset named by `args`.
fn load_experiment(args: &DataArgs, seed: u64) -> Result<(Dataset, ModalityPartition)> {
    let raw = load_csv(&args.data)?;
    let dataset = if raw.missing_count() > 0 {
        log::info!("imputing {} missing values", raw.missing_count());
        knn_impute(&raw, args.knn_k)?
    } else {
        raw
    };
    let partition = match args.groups {
        Groups::Natural => {
            let map_path = args
                .modality_map
                .as_ref()
                .ok_or_else(|| Error::Config("natural grouping needs --modality-map".into()))?;
            natural_partition(&dataset.feature_names, &load_modality_map(map_path)?)?
        }
        Groups::Random(k) => random_partition(dataset.num_features(), k, seed)?,
    };
    Ok((dataset, partition))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn metrics_csv(m: &Metrics) -> String {
    let mut out = String::from("metric,value\n");
    for (name, v) in Metrics::NAMES.iter().zip(m.values()) {
        out.push_str(&format!("{name},{v}\n"));
    }
    out
}

fn print_metrics(m: &Metrics) {
    println!(
        "accuracy {:.4}  micro_f1 {:.4}  macro_f1 {:.4}",
        m.accuracy, m.micro_f1, m.macro_f1
    );
}

fn train_cmd(c: TrainCmd) -> Result<()> {
    let config = c.train.config();
    config.validate()?;
    let (dataset, partition) = load_experiment(&c.data, config.seed)?;
    let prepared = prepare_split(&dataset, DEFAULT_RATIOS, config.seed, ScalerFit::TrainOnly)?;
    let mut trainer = Trainer::new(config)?;
    let mut model = trainer.init_model(partition, dataset.num_classes())?;
    let history = trainer.fit(&mut model, &prepared.train, &prepared.val)?;

    create_dir(&c.out)?;
    history.write_csv(c.out.join("history.csv"))?;
    let scores = if prepared.test.is_empty() {
        None
    } else {
        let pred = model.predict(&prepared.test.x)?;
        Some(metrics(&prepared.test.y, &pred, model.num_classes())?)
    };
    write_checkpoint(
        c.out.join("model.ckpt"),
        &Checkpoint {
            model,
            scaler: Some(prepared.scaler),
        },
    )?;
    println!(
        "stopped after {} steps ({})",
        history.records.len(),
        history.stop_reason.as_str()
    );
    if let Some(m) = scores {
        write_file(&c.out.join("metrics.csv"), &metrics_csv(&m))?;
        print_metrics(&m);
    }
    Ok(())
}

fn evaluate_cmd(c: EvaluateCmd) -> Result<()> {
    let checkpoint = read_checkpoint(&c.model)?;
    let model = &checkpoint.model;
    let raw = load_csv_with_classes(&c.data, model.num_classes())?;
    let dataset = if raw.missing_count() > 0 {
        knn_impute(&raw, c.knn_k)?
    } else {
        raw
    };
    let samples = dataset.to_samples()?;
    let x = match &checkpoint.scaler {
        Some(s) => s.apply(&samples.x)?,
        None => samples.x.clone(),
    };
    let proba = model.predict_proba(&x)?;
    let pred = model.predict(&x)?;
    let m = metrics(&samples.y, &pred, model.num_classes())?;

    let mut out = String::from("id,label,predicted");
    for k in 0..model.num_classes() {
        out.push_str(&format!(",p{k}"));
    }
    out.push('\n');
    for (i, id) in samples.ids.iter().enumerate() {
        out.push_str(&format!("{id},{},{}", samples.y[i], pred[i]));
        for p in proba.row(i) {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    write_file(&c.out, &out)?;
    print_metrics(&m);
    Ok(())
}

fn trial_settings(train: &TrainArgs, trials: usize, jobs: usize) -> TrialSettings {
    TrialSettings {
        train: train.config(),
        trials,
        jobs,
        ..TrialSettings::default()
    }
}

fn trials_cmd(c: TrialsCmd) -> Result<()> {
    let settings = trial_settings(&c.train, c.trials, c.jobs);
    settings.train.validate()?;
    let (dataset, partition) = load_experiment(&c.data, settings.train.seed)?;
    let data = ExperimentData::new(dataset, partition)?;
    let cell = match c.family {
        Family::Cn => Cell::consensus("cn"),
        Family::Mlp => Cell::mlp("mlp"),
    };
    let cell = Cell {
        noise: settings.train.noise_enabled,
        cooperative: settings.train.cooperative,
        ..cell
    };
    let result = run_ablation(&data, &settings, &[cell])?;
    create_dir(&c.out)?;
    result.write(c.out.join("summary.csv"), c.out.join("trials.csv"))?;
    report(&result);
    Ok(())
}

fn report(result: &crate::eval::AblationResult) {
    for c in &result.cells {
        let [acc, micro, macro_] = c.summaries();
        println!(
            "{:<28} n={:<3} accuracy {:.4} ± {:.4}  micro_f1 {:.4} ± {:.4}  macro_f1 {:.4} ± {:.4}",
            c.cell.id, acc.n, acc.mean, acc.std, micro.mean, micro.std, macro_.mean, macro_.std
        );
        if !c.failures.is_empty() {
            println!("{:<28} {} trial(s) aborted and excluded", "", c.failures.len());
        }
    }
}

fn ablate_cmd(c: AblateCmd) -> Result<()> {
    let suites: Vec<Suite> = if c.suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        c.suites.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    let settings = trial_settings(&c.train, c.trials, c.jobs);
    settings.train.validate()?;
    let (dataset, partition) = load_experiment(&c.data, settings.train.seed)?;
    let data = ExperimentData::new(dataset, partition)?;
    create_dir(&c.out)?;
    for suite in suites {
        let cells: Vec<Cell> = suite_cells(suite, &data.partition)
            .into_iter()
            .map(|cell| Cell {
                noise: cell.noise && settings.train.noise_enabled,
                cooperative: cell.cooperative && settings.train.cooperative,
                ..cell
            })
            .collect();
        let result = run_ablation(&data, &settings, &cells)?;
        result.write(
            c.out.join(format!("{}_summary.csv", suite.name())),
            c.out.join(format!("{}_trials.csv", suite.name())),
        )?;
        println!("[{}]", suite.name());
        report(&result);
    }
    Ok(())
}

fn synth_cmd(c: SynthCmd) -> Result<()> {
    let mut spec = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<SyntheticSpec>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(v) = c.samples {
        spec.samples = v;
    }
    if let Some(v) = c.modalities {
        spec.modalities = v;
    }
    if let Some(v) = c.signal_dims {
        spec.signal_dims = v;
    }
    if let Some(v) = c.distractor_dims {
        spec.distractor_dims = v;
    }
    if let Some(v) = c.strength {
        spec.strength = v;
    }
    let data = generate_synthetic(&spec, c.seed)?;
    write_csv(&data.dataset, &c.out)?;
    if let Some(map) = &c.map_out {
        write_modality_map(&data.modality_map, map)?;
    }
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "wrote {} samples x {} features; Bayes accuracy ≈ {:.4}",
        data.dataset.len(),
        data.dataset.num_features(),
        data.truth.bayes_accuracy_mc(200_000, c.seed)
    );
    Ok(())
}

fn snapshots_cmd(c: SnapshotsCmd) -> Result<()> {
    let config = c.train.config();
    config.validate()?;
    let (dataset, partition) = load_experiment(&c.data, config.seed)?;
    let prepared = prepare_split(&dataset, DEFAULT_RATIOS, config.seed, ScalerFit::TrainOnly)?;
    let run = export_snapshots(
        &config,
        partition,
        dataset.num_classes(),
        &prepared.train,
        &prepared.val,
        &c.at,
        &c.out,
    )?;
    println!(
        "wrote {} snapshot rows; stopped after {} steps ({})",
        run.rows.len(),
        run.history.records.len(),
        run.history.stop_reason.as_str()
    );
    Ok(())
}
