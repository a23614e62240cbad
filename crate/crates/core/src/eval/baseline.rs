use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Samples;
use crate::model::ModelConfig;
use crate::nn::{softmax_cross_entropy, AdamState, Mlp, Mode};
use crate::train::{accuracy, check_finite, convergence_check, minibatches, StepRecord, StopReason, TrainConfig, TrainHistory};
use crate::Result;

/// Hidden widths of a fully connected net with as many hidden neurons as
/// `modalities` ePhysicians plus the classifier: `[h*M, r*M]`, then `c` if the
/// classifier has a hidden layer.
pub fn baseline_hidden_sizes(modalities: usize, config: &ModelConfig) -> Vec<usize> {
    let mut sizes = vec![config.hidden_dim * modalities, config.representation_dim * modalities];
    if config.classifier_hidden > 0 {
        sizes.push(config.classifier_hidden);
    }
    sizes
}

/// Size-matched MLP over all `in_dim` features.
pub fn build_mlp_baseline(
    in_dim: usize,
    modalities: usize,
    num_classes: usize,
    config: &ModelConfig,
    seed: u64,
) -> Result<Mlp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mlp::feedforward(
        in_dim,
        &baseline_hidden_sizes(modalities, config),
        num_classes,
        config.layers,
        &mut rng,
    )
}

/// Fits an MLP on cross-entropy with the classifier learning rate, the same
/// batching, and the same convergence rule as the consensus trainer.
/// `loss_d` in the returned history is NaN.
pub fn train_mlp(mlp: &mut Mlp, config: &TrainConfig, train: &Samples, val: &Samples) -> Result<TrainHistory> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(crate::nn::AdamConfig {
        lr: config.lr_classifier,
        ..config.adam
    });
    let mut records: Vec<StepRecord> = Vec::new();
    let mut stop_reason = StopReason::MaxSteps;
    for step in 1..=config.max_steps {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        mlp.set_mode(Mode::Train);
        for batch in minibatches(&order, config.batch_size)? {
            let x = train.x.select_rows(&batch);
            let y: Vec<usize> = batch.iter().map(|&i| train.y[i]).collect();
            mlp.zero_grad();
            let logits = mlp.forward(&x)?;
            let (loss, d_logits) = softmax_cross_entropy(&logits, &y)?;
            check_finite(loss, "baseline loss")?;
            mlp.backward(&d_logits)?;
            adam.step(&mut mlp.params_mut())?;
        }
        mlp.set_mode(Mode::BatchStats);
        let logits = mlp.forward(&train.x)?;
        let loss_c = check_finite(softmax_cross_entropy(&logits, &train.y)?.0, "baseline loss")?;
        mlp.clear_caches();
        let val_accuracy = if val.is_empty() {
            None
        } else {
            Some(accuracy(&predict_mlp(mlp, &val.x)?, &val.y))
        };
        records.push(StepRecord {
            step,
            loss_c,
            loss_d: f64::NAN,
            val_accuracy,
        });
        let losses: Vec<f64> = records.iter().map(|r| r.loss_c).collect();
        if convergence_check(&losses, config.convergence_tol) {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    mlp.set_mode(Mode::Inference);
    Ok(TrainHistory { records, stop_reason })
}

/// Argmax class per row using running batch-normalization statistics.
pub fn predict_mlp(mlp: &Mlp, x: &crate::nn::Matrix) -> Result<Vec<usize>> {
    let logits = mlp.infer(x)?;
    Ok(logits.iter_rows().map(crate::nn::argmax).collect())
}
