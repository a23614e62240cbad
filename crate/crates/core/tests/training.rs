mod common;

use common::*;
use consensus::data::SyntheticSpec;
use consensus::model::sample_noise;
use consensus::nn::{Matrix, Mode};
use consensus::train::{train, StopReason, TrainConfig, Trainer};
use consensus::viz::{run_with_snapshots, snapshots_csv};
use consensus::Error;

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        samples: 150,
        ..SyntheticSpec::default()
    }
}

#[test]
fn update_ownership_cooperative() {
    check_update_ownership(true, 1, 10).unwrap();
}

#[test]
fn update_ownership_classifier_only_with_three_discriminator_steps() {
    check_update_ownership(false, 3, 10).unwrap();
}

#[test]
fn each_step_moves_its_objective_the_right_way() {
    let (prepared, partition, classes) = synthetic_split(&small_spec(), 3);
    let config = TrainConfig::default().with_lr(1e-5);
    let mut trainer = Trainer::new(config).unwrap();
    let mut model = trainer.init_model(partition, classes).unwrap();
    let x = prepared.train.x.select_rows(&(0..32).collect::<Vec<_>>());
    let y = prepared.train.y[..32].to_vec();

    model.set_mode(Mode::BatchStats);
    let reps = model.encode_all(&x).unwrap();
    let noise: Matrix = sample_noise(&reps, &mut rng(0)).unwrap();
    let l_d = |m: &mut consensus::model::ConsensusModel| {
        m.set_mode(Mode::BatchStats);
        m.discriminator_loss(&x, Some(&noise)).unwrap()
    };
    let l_c = |m: &mut consensus::model::ConsensusModel| {
        m.set_mode(Mode::BatchStats);
        m.classifier_loss(&x, &y, true).unwrap()
    };

    let before = l_c(&mut model);
    trainer.classifier_step(&mut model, &x, &y).unwrap();
    assert!(l_c(&mut model) < before);

    let before = l_d(&mut model);
    trainer.adversarial_step(&mut model, &x).unwrap();
    assert!(l_d(&mut model) > before, "gradient ascent must increase L_D");

    let before = l_d(&mut model);
    trainer.discriminator_steps(&mut model, &x).unwrap();
    assert!(l_d(&mut model) < before);
}

#[test]
fn same_seed_same_model() {
    let (prepared, partition, classes) = synthetic_split(&small_spec(), 4);
    let config = TrainConfig {
        max_steps: 5,
        seed: 9,
        ..TrainConfig::default()
    };
    let (a, ha) = train(&config, partition.clone(), classes, &prepared.train, &prepared.val).unwrap();
    let (b, hb) = train(&config, partition.clone(), classes, &prepared.train, &prepared.val).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a.ephysician_fingerprint(), b.ephysician_fingerprint());
    assert_eq!(a.classifier_fingerprint(), b.classifier_fingerprint());
    let other = TrainConfig { seed: 10, ..config };
    let (c, _) = train(&other, partition, classes, &prepared.train, &prepared.val).unwrap();
    assert_ne!(a.classifier_fingerprint(), c.classifier_fingerprint());
}

#[test]
fn non_finite_input_aborts_training() {
    let (mut prepared, partition, classes) = synthetic_split(&small_spec(), 5);
    prepared.train.x.set(0, 0, f64::INFINITY);
    let config = TrainConfig {
        max_steps: 3,
        ..TrainConfig::default()
    };
    let err = train(&config, partition, classes, &prepared.train, &prepared.val).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
}

#[test]
fn plateau_stops_early_and_is_recorded() {
    let spec = SyntheticSpec {
        strength: 8.0,
        ..small_spec()
    };
    let (prepared, partition, classes) = synthetic_split(&spec, 6);
    let config = TrainConfig {
        lr_classifier: 1e-2,
        ..TrainConfig::default()
    };
    let (_, history) = train(&config, partition, classes, &prepared.train, &prepared.val).unwrap();
    assert_eq!(history.stop_reason, StopReason::Converged);
    assert!(history.records.len() < config.max_steps);
    let losses = history.loss_c();
    let n = losses.len();
    assert!((losses[n - 1] - losses[n - 2]).abs() < config.convergence_tol);
    assert!(history.to_csv().trim_end().ends_with(",converged"));
}

#[test]
fn no_plateau_runs_to_the_step_limit() {
    let (prepared, partition, classes) = synthetic_split(&small_spec(), 7);
    let config = TrainConfig {
        max_steps: 3,
        convergence_tol: 1e-12,
        ..TrainConfig::default()
    };
    let (_, history) = train(&config, partition, classes, &prepared.train, &prepared.val).unwrap();
    assert_eq!(history.stop_reason, StopReason::MaxSteps);
    assert_eq!(history.records.len(), 3);
}

#[test]
fn snapshots_do_not_change_training() {
    let (prepared, partition, classes) = synthetic_split(&small_spec(), 8);
    let config = TrainConfig {
        max_steps: 6,
        convergence_tol: 1e-12,
        ..TrainConfig::default()
    };
    let (plain, _) = train(&config, partition.clone(), classes, &prepared.train, &prepared.val).unwrap();
    let run = run_with_snapshots(&config, partition, classes, &prepared.train, &prepared.val, &[2, 5]).unwrap();
    assert_eq!(plain.ephysician_fingerprint(), run.model.ephysician_fingerprint());
    assert_eq!(plain.discriminator_fingerprint(), run.model.discriminator_fingerprint());
    let m = plain.num_modalities();
    assert_eq!(run.rows.len(), 2 * (m + 1) * prepared.train.len());
    assert!(run.rows.iter().all(|r| (0.0..=1.0).contains(&r.explained_frac)));
    assert!(run.rows.iter().all(|r| r.pc1.is_finite() && r.pc2.is_finite()));
}

#[test]
fn snapshots_without_noise_have_no_noise_rows() {
    let (prepared, partition, classes) = synthetic_split(&small_spec(), 9);
    let config = TrainConfig {
        max_steps: 2,
        noise_enabled: false,
        convergence_tol: 1e-12,
        ..TrainConfig::default()
    };
    let run = run_with_snapshots(&config, partition, classes, &prepared.train, &prepared.val, &[1]).unwrap();
    assert!(run.rows.iter().all(|r| r.modality != 0));
    assert_eq!(run.rows.len(), 3 * prepared.train.len());
    assert!(snapshots_csv(&run.rows).starts_with("step,modality,sample_id,pc1,pc2,explained_frac,loss_d,val_acc\n"));
}

#[test]
fn snapshot_steps_must_be_in_range() {
    let (prepared, partition, classes) = synthetic_split(&small_spec(), 10);
    let config = TrainConfig {
        max_steps: 4,
        ..TrainConfig::default()
    };
    let err = run_with_snapshots(&config, partition, classes, &prepared.train, &prepared.val, &[5]).unwrap_err();
    assert!(err.is_config());
}
