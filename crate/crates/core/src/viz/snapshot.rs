use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::pca::pca_top2;
use crate::data::Samples;
use crate::model::{sample_noise, ConsensusModel, ModalityPartition, NOISE_CLASS};
use crate::nn::Matrix;
use crate::train::{StepRecord, TrainConfig, TrainHistory, Trainer};
use crate::{Error, Result};

pub const DEFAULT_SNAPSHOT_STEPS: [usize; 5] = [5, 10, 20, 30, 40];

/// Separates the snapshot noise stream from the training stream, so exporting
/// snapshots does not change the trained model.
const SNAPSHOT_STREAM: u64 = 0x736e_6170_7368_6f74;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub step: usize,
    /// 0 for the noise modality, `m + 1` for real modality `m`.
    pub modality: usize,
    pub sample_id: String,
    pub pc1: f64,
    pub pc2: f64,
    pub explained_frac: f64,
    pub loss_d: f64,
    pub val_acc: Option<f64>,
}

/// Projects every training-set representation (plus one noise row per sample
/// when the model has a noise modality) onto a PCA fitted jointly to them.
/// Representations use running batch-normalization statistics.
pub fn snapshot_rows(
    model: &ConsensusModel,
    train: &Samples,
    record: &StepRecord,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SnapshotRecord>> {
    let reps = model.encode_all_infer(&train.x)?;
    let mut blocks: Vec<(usize, Matrix)> = Vec::with_capacity(reps.len() + 1);
    if model.noise_enabled() {
        blocks.push((NOISE_CLASS, sample_noise(&reps, rng)?));
    }
    blocks.extend(reps.into_iter().enumerate().map(|(m, r)| (m + 1, r)));
    let stacked = Matrix::vstack(&blocks.iter().map(|(_, b)| b).collect::<Vec<_>>())?;
    let pca = pca_top2(&stacked)?;
    let mut rows = Vec::with_capacity(stacked.rows());
    let mut r = 0;
    for (modality, block) in &blocks {
        for i in 0..block.rows() {
            let sample_id = if *modality == NOISE_CLASS {
                format!("noise{i}")
            } else {
                train.ids[i].clone()
            };
            rows.push(SnapshotRecord {
                step: record.step,
                modality: *modality,
                sample_id,
                pc1: pca.coords.get(r, 0),
                pc2: pca.coords.get(r, 1),
                explained_frac: pca.explained_fraction,
                loss_d: record.loss_d,
                val_acc: record.val_accuracy,
            });
            r += 1;
        }
    }
    Ok(rows)
}

pub fn snapshots_csv(rows: &[SnapshotRecord]) -> String {
    let mut out = String::from("step,modality,sample_id,pc1,pc2,explained_frac,loss_d,val_acc\n");
    for s in rows {
        let val = s.val_acc.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.step, s.modality, s.sample_id, s.pc1, s.pc2, s.explained_frac, s.loss_d, val
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SnapshotRun {
    pub model: ConsensusModel,
    pub history: TrainHistory,
    pub rows: Vec<SnapshotRecord>,
}

/// Trains a fresh model and records snapshots at the listed outer steps.
/// Steps after an early convergence stop produce no rows.
pub fn run_with_snapshots(
    config: &TrainConfig,
    partition: ModalityPartition,
    num_classes: usize,
    train: &Samples,
    val: &Samples,
    steps: &[usize],
) -> Result<SnapshotRun> {
    if let Some(bad) = steps.iter().find(|&&s| s == 0 || s > config.max_steps) {
        return Err(Error::Config(format!(
            "snapshot step {bad} outside 1..={}",
            config.max_steps
        )));
    }
    let mut trainer = Trainer::new(config.clone())?;
    let mut model = trainer.init_model(partition, num_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SNAPSHOT_STREAM);
    let mut rows = Vec::new();
    let history = trainer.fit_with(&mut model, train, val, |record, model| {
        if steps.contains(&record.step) {
            rows.extend(snapshot_rows(model, train, record, &mut rng)?);
        }
        Ok(())
    })?;
    Ok(SnapshotRun { model, history, rows })
}

/// As [`run_with_snapshots`], writing the rows to `out_path`.
pub fn export_snapshots(
    config: &TrainConfig,
    partition: ModalityPartition,
    num_classes: usize,
    train: &Samples,
    val: &Samples,
    steps: &[usize],
    out_path: impl AsRef<Path>,
) -> Result<SnapshotRun> {
    let run = run_with_snapshots(config, partition, num_classes, train, val, steps)?;
    let path = out_path.as_ref();
    std::fs::write(path, snapshots_csv(&run.rows)).map_err(|e| Error::io(path, e))?;
    Ok(run)
}
