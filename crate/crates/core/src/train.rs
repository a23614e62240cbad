//! The iterative min-max schedule.
//!
//! For every outer step the training set is reshuffled and, per minibatch:
//!
//! 1. classifier step: minimize `L_C` over the classifier, and over the
//!    ePhysicians too when cooperative;
//! 2. adversarial step: maximize `L_D` over the ePhysicians (gradient ascent);
//! 3. `K` discriminator steps: minimize `L_D` over the discriminator.
//!
//! Each objective owns one Adam state: the classifier state covers the
//! ePhysician parameters as well when cooperative, the ePhysician state only
//! ever sees the adversarial objective, and the discriminator state its own.
//!
//! All randomness comes from one ChaCha stream per trainer, consumed in this
//! order: model initialization (if [`Trainer::init_model`] is used), then per
//! outer step the shuffle, per batch one noise draw for the adversarial step
//! and one per discriminator step, and at the end of the step one noise draw
//! for the training-set `L_D` record.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Samples;
use crate::model::{sample_noise, ConsensusModel, ModalityPartition, ModelConfig};
use crate::nn::{AdamConfig, AdamState, Matrix, Mode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Maximum number of outer steps (passes over the training set).
    pub max_steps: usize,
    /// Discriminator updates per minibatch.
    pub disc_steps: usize,
    pub batch_size: usize,
    pub lr_ephysician: f64,
    pub lr_discriminator: f64,
    pub lr_classifier: f64,
    pub noise_enabled: bool,
    pub cooperative: bool,
    pub convergence_tol: f64,
    pub seed: u64,
    pub model: ModelConfig,
    /// Moment decay rates and epsilon shared by all three optimizers.
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_steps: 100,
            disc_steps: 1,
            batch_size: 32,
            lr_ephysician: 1e-3,
            lr_discriminator: 1e-3,
            lr_classifier: 1e-3,
            noise_enabled: true,
            cooperative: true,
            convergence_tol: 1e-4,
            seed: 0,
            model: ModelConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::Config("max steps must be >= 1".into()));
        }
        if self.disc_steps < 1 {
            return Err(Error::Config("discriminator steps per batch must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be >= 2".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::Config("convergence tolerance must be > 0".into()));
        }
        for (name, lr) in [
            ("ePhysician", self.lr_ephysician),
            ("discriminator", self.lr_discriminator),
            ("classifier", self.lr_classifier),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} learning rate must be > 0")));
            }
        }
        Ok(())
    }

    /// Sets all three learning rates.
    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr_ephysician = lr;
        self.lr_discriminator = lr;
        self.lr_classifier = lr;
        self
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig { lr, ..self.adam }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxSteps,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxSteps => "max-steps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Classification loss over the whole training set at the end of the step.
    pub loss_c: f64,
    /// Discriminator loss over the whole training set at the end of the step.
    pub loss_d: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn loss_c(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss_c).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,L_C_train,L_D_train,val_accuracy,stop_reason\n");
        let last = self.records.len().saturating_sub(1);
        for (i, r) in self.records.iter().enumerate() {
            let val = r.val_accuracy.map(|v| v.to_string()).unwrap_or_default();
            let reason = if i == last { self.stop_reason.as_str() } else { "" };
            out.push_str(&format!("{},{},{},{},{}\n", r.step, r.loss_c, r.loss_d, val, reason));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// True iff the last two recorded training losses differ by less than `tol`.
pub fn convergence_check(losses: &[f64], tol: f64) -> bool {
    match losses {
        [.., prev, last] => (last - prev).abs() < tol,
        _ => false,
    }
}

/// Number of parameter updates performed by each part of the schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounters {
    pub classifier: u64,
    pub adversarial: u64,
    pub discriminator: u64,
    pub batches: u64,
}

/// Splits a shuffled index list into minibatches. A trailing batch of one
/// sample is merged into the previous batch so batch normalization always sees
/// at least two rows.
pub(crate) fn minibatches(order: &[usize], batch_size: usize) -> Result<Vec<Vec<usize>>> {
    if order.len() < 2 {
        return Err(Error::BatchTooSmall(order.len()));
    }
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().unwrap();
        batches.last_mut().unwrap().extend(tail);
    }
    Ok(batches)
}

pub(crate) fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

pub(crate) fn check_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub struct Trainer {
    config: TrainConfig,
    rng: ChaCha8Rng,
    adam_ephysician: AdamState,
    adam_discriminator: AdamState,
    adam_classifier: AdamState,
    counters: StepCounters,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            adam_ephysician: AdamState::new(config.adam(config.lr_ephysician)),
            adam_discriminator: AdamState::new(config.adam(config.lr_discriminator)),
            adam_classifier: AdamState::new(config.adam(config.lr_classifier)),
            counters: StepCounters::default(),
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn counters(&self) -> StepCounters {
        self.counters
    }

    pub fn optimizer_steps(&self) -> (u64, u64, u64) {
        (
            self.adam_ephysician.step_count(),
            self.adam_discriminator.step_count(),
            self.adam_classifier.step_count(),
        )
    }

    /// Builds a freshly initialized model from the trainer's random stream.
    pub fn init_model(&mut self, partition: ModalityPartition, num_classes: usize) -> Result<ConsensusModel> {
        ConsensusModel::new(
            partition,
            self.config.model,
            num_classes,
            self.config.noise_enabled,
            &mut self.rng,
        )
    }

    fn check_model(&self, model: &ConsensusModel) -> Result<()> {
        if model.noise_enabled() != self.config.noise_enabled {
            return Err(Error::Config(
                "model noise modality setting differs from the training config".into(),
            ));
        }
        Ok(())
    }

    /// Step (a): one classifier update; ePhysicians move too when cooperative.
    pub fn classifier_step(&mut self, model: &mut ConsensusModel, x: &Matrix, y: &[usize]) -> Result<f64> {
        model.set_mode(Mode::Train);
        let loss = model.classifier_loss(x, y, self.config.cooperative)?;
        check_finite(loss, "classification loss")?;
        let mut params = model.classification_params_mut(self.config.cooperative);
        self.adam_classifier.step(&mut params)?;
        self.counters.classifier += 1;
        Ok(loss)
    }

    /// Step (b): one gradient-ascent update of the ePhysicians on `L_D`.
    pub fn adversarial_step(&mut self, model: &mut ConsensusModel, x: &Matrix) -> Result<f64> {
        model.set_mode(Mode::Train);
        model.zero_grad();
        let reps = model.encode_all(x)?;
        let noise = self.draw_noise(model, &reps)?;
        let pass = model.discriminator_pass(&reps, noise.as_ref())?;
        check_finite(pass.loss, "discriminator loss")?;
        model.backward_ephysicians(&pass.d_reps)?;
        let mut params = model.ephysician_params_mut();
        for p in params.iter_mut() {
            p.grad.iter_mut().for_each(|g| *g = -*g);
        }
        self.adam_ephysician.step(&mut params)?;
        self.counters.adversarial += 1;
        Ok(pass.loss)
    }

    /// Step (c): `K` discriminator updates on the current representations,
    /// each with a fresh noise draw. Returns the last loss.
    pub fn discriminator_steps(&mut self, model: &mut ConsensusModel, x: &Matrix) -> Result<f64> {
        model.set_mode(Mode::Train);
        let reps = model.encode_all(x)?;
        let mut loss = f64::NAN;
        for _ in 0..self.config.disc_steps {
            let noise = self.draw_noise(model, &reps)?;
            model.discriminator_mut().zero_grad();
            let pass = model.discriminator_pass(&reps, noise.as_ref())?;
            loss = check_finite(pass.loss, "discriminator loss")?;
            let mut params = model.discriminator_mut().params_mut();
            self.adam_discriminator.step(&mut params)?;
            self.counters.discriminator += 1;
        }
        Ok(loss)
    }

    fn draw_noise(&mut self, model: &ConsensusModel, reps: &[Matrix]) -> Result<Option<Matrix>> {
        if model.noise_enabled() {
            Ok(Some(sample_noise(reps, &mut self.rng)?))
        } else {
            Ok(None)
        }
    }

    /// Runs (a), (b), and (c) on one minibatch.
    pub fn train_batch(&mut self, model: &mut ConsensusModel, x: &Matrix, y: &[usize]) -> Result<()> {
        self.classifier_step(model, x, y)?;
        self.adversarial_step(model, x)?;
        self.discriminator_steps(model, x)?;
        self.counters.batches += 1;
        Ok(())
    }

    /// One pass over the reshuffled training set.
    pub fn run_outer_step(&mut self, model: &mut ConsensusModel, train: &Samples) -> Result<()> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        for batch in minibatches(&order, self.config.batch_size)? {
            let x = train.x.select_rows(&batch);
            let y: Vec<usize> = batch.iter().map(|&i| train.y[i]).collect();
            self.train_batch(model, &x, &y)?;
        }
        Ok(())
    }

    /// `(L_C, L_D)` over the whole training set, normalizing with that set's
    /// own batch statistics and without touching running statistics.
    pub fn dataset_losses(&mut self, model: &mut ConsensusModel, train: &Samples) -> Result<(f64, f64)> {
        model.set_mode(Mode::BatchStats);
        let reps = model.encode_all(&train.x)?;
        let loss_c = model.classifier_pass(&reps, &train.y)?.loss;
        let noise = self.draw_noise(model, &reps)?;
        let loss_d = model.discriminator_pass(&reps, noise.as_ref())?.loss;
        model.zero_grad();
        model.set_mode(Mode::Train);
        Ok((
            check_finite(loss_c, "training-set classification loss")?,
            check_finite(loss_d, "training-set discriminator loss")?,
        ))
    }

    pub fn fit(
        &mut self,
        model: &mut ConsensusModel,
        train: &Samples,
        val: &Samples,
    ) -> Result<TrainHistory> {
        self.fit_with(model, train, val, |_, _| Ok(()))
    }

    /// Trains until convergence or `max_steps`, calling `observer` after each
    /// outer step has been recorded.
    pub fn fit_with(
        &mut self,
        model: &mut ConsensusModel,
        train: &Samples,
        val: &Samples,
        mut observer: impl FnMut(&StepRecord, &ConsensusModel) -> Result<()>,
    ) -> Result<TrainHistory> {
        self.check_model(model)?;
        let mut records: Vec<StepRecord> = Vec::new();
        let mut stop_reason = StopReason::MaxSteps;
        for step in 1..=self.config.max_steps {
            self.run_outer_step(model, train)?;
            let (loss_c, loss_d) = self.dataset_losses(model, train)?;
            let val_accuracy = if val.is_empty() {
                None
            } else {
                Some(accuracy(&model.predict(&val.x)?, &val.y))
            };
            let record = StepRecord {
                step,
                loss_c,
                loss_d,
                val_accuracy,
            };
            records.push(record);
            observer(&record, model)?;
            let losses: Vec<f64> = records.iter().map(|r| r.loss_c).collect();
            if convergence_check(&losses, self.config.convergence_tol) {
                stop_reason = StopReason::Converged;
                break;
            }
        }
        model.set_mode(Mode::Inference);
        Ok(TrainHistory {
            records,
            stop_reason,
        })
    }
}

/// Initializes a model from the config seed and trains it.
pub fn train(
    config: &TrainConfig,
    partition: ModalityPartition,
    num_classes: usize,
    train: &Samples,
    val: &Samples,
) -> Result<(ConsensusModel, TrainHistory)> {
    let mut trainer = Trainer::new(config.clone())?;
    let mut model = trainer.init_model(partition, num_classes)?;
    let history = trainer.fit(&mut model, train, val)?;
    Ok((model, history))
}
