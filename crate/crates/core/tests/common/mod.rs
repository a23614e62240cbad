#![allow(dead_code)]

use consensus::data::{generate_synthetic, natural_partition, prepare_split, PreparedSplit, ScalerFit, SyntheticSpec};
use consensus::eval::ExperimentData;
use consensus::model::{ConsensusModel, ModalityGroup, ModalityPartition, ModelConfig};
use consensus::nn::{
    softmax_cross_entropy, BatchNormLayer, DenseLayer, LayerHyper, LeakyRelu, Matrix, Mlp, Mode, Param,
};
use consensus::train::{TrainConfig, Trainer};
use consensus::viz::Pca;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const H: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const CONFIGS: u64 = 100;
/// Relative errors use `max(|analytic|, |numeric|, REL_FLOOR * scale)` as
/// denominator, where `scale >= 1` bounds the magnitude of the terms summed
/// into the loss. Central differences carry roundoff of about
/// `eps * scale / H` (roughly 2e-11 * scale), so gradients far below the
/// floor, such as the exactly-zero gradient of a bias feeding batch
/// normalization, are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn param_slot(params: Vec<&mut Param>, mut k: usize) -> &mut f64 {
    for p in params {
        if k < p.value.len() {
            return &mut p.value[k];
        }
        k -= p.value.len();
    }
    panic!("parameter index out of range");
}

/// Worst relative error between `analytic` and central differences of `loss`
/// over every scalar reachable through `slot`.
pub fn compare<T>(
    target: &mut T,
    analytic: &[f64],
    scale: f64,
    mut loss: impl FnMut(&mut T) -> f64,
    slot: impl Fn(&mut T, usize) -> &mut f64,
) -> f64 {
    let floor = REL_FLOOR * scale.max(1.0);
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *slot(target, k);
        *slot(target, k) = orig + H;
        let plus = loss(target);
        *slot(target, k) = orig - H;
        let minus = loss(target);
        *slot(target, k) = orig;
        worst = worst.max(rel_err(a, (plus - minus) / (2.0 * H), floor));
    }
    worst
}

fn flat_grads(params: Vec<&Param>) -> Vec<f64> {
    params.into_iter().flat_map(|p| p.grad.iter().copied()).collect()
}

fn weighted_sum(y: &Matrix, g: &Matrix) -> f64 {
    y.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
}

fn weighted_abs_sum(y: &Matrix, g: &Matrix) -> f64 {
    y.as_slice().iter().zip(g.as_slice()).map(|(a, b)| (a * b).abs()).sum()
}

/// A layer under test with a fixed input and the fixed upstream gradient `g`
/// of the scalar loss `sum(g * layer(x))`.
struct Probe<L> {
    layer: L,
    x: Matrix,
    g: Matrix,
}

fn probe_errors<L>(
    probe: &mut Probe<L>,
    forward: fn(&mut L, &Matrix) -> Matrix,
    backward: fn(&mut L, &Matrix) -> Matrix,
    params: fn(&mut L) -> Vec<&mut Param>,
) -> f64 {
    for p in params(&mut probe.layer) {
        p.zero_grad();
    }
    let y = forward(&mut probe.layer, &probe.x);
    let scale = weighted_abs_sum(&y, &probe.g);
    let dx = backward(&mut probe.layer, &probe.g);
    let param_grads: Vec<f64> = params(&mut probe.layer)
        .into_iter()
        .flat_map(|p| p.grad.clone())
        .collect();
    let loss = |p: &mut Probe<L>| {
        let y = forward(&mut p.layer, &p.x);
        weighted_sum(&y, &p.g)
    };
    let e_params = compare(probe, &param_grads, scale, loss, |p, k| param_slot(params(&mut p.layer), k));
    let e_input = compare(probe, dx.as_slice(), scale, loss, |p, k| &mut p.x.as_mut_slice()[k]);
    e_params.max(e_input)
}

pub fn dense_sweep(base_seed: u64) -> f64 {
    (0..CONFIGS)
        .map(|c| {
            let mut r = rng(base_seed + c);
            let (i, o, b) = (r.random_range(1..6), r.random_range(1..6), r.random_range(1..8));
            let mut probe = Probe {
                layer: DenseLayer::glorot(i, o, &mut r),
                x: normal_matrix(b, i, &mut r),
                g: normal_matrix(b, o, &mut r),
            };
            probe_errors(
                &mut probe,
                |l, x| l.forward(x).unwrap(),
                |l, g| l.backward(g).unwrap(),
                |l| l.params_mut(),
            )
        })
        .fold(0.0, f64::max)
}

pub fn batchnorm_sweep(base_seed: u64) -> f64 {
    (0..CONFIGS)
        .map(|c| {
            let mut r = rng(base_seed + c);
            let (d, b) = (r.random_range(1..6), r.random_range(2..9));
            let mut layer = BatchNormLayer::with_defaults(d);
            for p in layer.params_mut() {
                p.value.iter_mut().for_each(|v| *v = r.random_range(0.5..1.5) * *v + r.random_range(-0.5..0.5));
            }
            let mut probe = Probe {
                layer,
                x: normal_matrix(b, d, &mut r),
                g: normal_matrix(b, d, &mut r),
            };
            probe_errors(
                &mut probe,
                |l, x| l.forward(x).unwrap(),
                |l, g| l.backward(g).unwrap(),
                |l| l.params_mut(),
            )
        })
        .fold(0.0, f64::max)
}

pub fn leaky_relu_sweep(base_seed: u64) -> f64 {
    (0..CONFIGS)
        .map(|c| {
            let mut r = rng(base_seed + c);
            let (d, b) = (r.random_range(1..6), r.random_range(1..8));
            let mut probe = Probe {
                layer: LeakyRelu::new(r.random_range(0.01..0.5)).unwrap(),
                x: normal_matrix(b, d, &mut r),
                g: normal_matrix(b, d, &mut r),
            };
            probe_errors(
                &mut probe,
                |l, x| l.forward(x),
                |l, g| l.backward(g).unwrap(),
                |_| Vec::new(),
            )
        })
        .fold(0.0, f64::max)
}

pub fn softmax_ce_sweep(base_seed: u64) -> f64 {
    (0..CONFIGS)
        .map(|c| {
            let mut r = rng(base_seed + c);
            let (l, b) = (r.random_range(2..6), r.random_range(1..8));
            let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..l)).collect();
            let mut logits = normal_matrix(b, l, &mut r).scale(2.0);
            let (l0, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
            compare(
                &mut logits,
                grad.as_slice(),
                l0.abs(),
                |z| softmax_cross_entropy(z, &labels).unwrap().0,
                |z, k| &mut z.as_mut_slice()[k],
            )
        })
        .fold(0.0, f64::max)
}

pub fn mlp_sweep(base_seed: u64) -> f64 {
    (0..CONFIGS).map(|c| mlp_sweep_one(base_seed + c)).fold(0.0, f64::max)
}

pub fn mlp_sweep_one(seed: u64) -> f64 {
    {
        {
            let mut r = rng(seed);
            let (i, o, b) = (r.random_range(1..5), r.random_range(1..4), r.random_range(2..8));
            let hidden: Vec<usize> = (0..r.random_range(0..3)).map(|_| r.random_range(1..5)).collect();
            let hyper = LayerHyper {
                leaky_slope: r.random_range(0.01..0.3),
                ..LayerHyper::default()
            };
            let mut probe = Probe {
                layer: Mlp::feedforward(i, &hidden, o, hyper, &mut r).unwrap(),
                x: normal_matrix(b, i, &mut r),
                g: normal_matrix(b, o, &mut r),
            };
            probe_errors(
                &mut probe,
                |l, x| l.forward(x).unwrap(),
                |l, g| l.backward(g).unwrap(),
                |l| l.params_mut(),
            )
        }
    }
}

/// A small random consensus network with a batch of inputs and labels.
pub struct CnCase {
    pub model: ConsensusModel,
    pub x: Matrix,
    pub y: Vec<usize>,
    pub noise: Option<Matrix>,
}

pub fn contiguous_partition(sizes: &[usize]) -> ModalityPartition {
    let mut start = 0;
    let groups = sizes
        .iter()
        .enumerate()
        .map(|(m, &s)| {
            let g = ModalityGroup {
                name: format!("m{m}"),
                indices: (start..start + s).collect(),
            };
            start += s;
            g
        })
        .collect();
    ModalityPartition::new(groups, start).unwrap()
}

pub fn random_cn_case(seed: u64) -> CnCase {
    let mut r = rng(seed);
    let m = r.random_range(2..5);
    let sizes: Vec<usize> = (0..m).map(|_| r.random_range(1..5)).collect();
    let config = ModelConfig {
        hidden_dim: r.random_range(2..6),
        representation_dim: r.random_range(2..5),
        classifier_hidden: if r.random_bool(0.5) { 0 } else { r.random_range(2..5) },
        ..ModelConfig::default()
    };
    let classes = r.random_range(2..5);
    let noise_enabled = r.random_bool(0.5);
    let b = r.random_range(3..9);
    let partition = contiguous_partition(&sizes);
    let total = partition.total_dims();
    let mut model = ConsensusModel::new(partition, config, classes, noise_enabled, &mut r).unwrap();
    model.set_mode(Mode::Train);
    let x = normal_matrix(b, total, &mut r);
    let y = (0..b).map(|_| r.random_range(0..classes)).collect();
    let noise = noise_enabled.then(|| normal_matrix(b, config.representation_dim, &mut r));
    CnCase { model, x, y, noise }
}

fn cn_grads(model: &ConsensusModel) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        flat_grads(model.ephysician_params()),
        flat_grads(model.discriminator().params()),
        flat_grads(model.classifier().params()),
    )
}

/// `L_C` gradients. When not cooperative the ePhysician gradients must be
/// exactly zero; the error is infinite otherwise.
pub fn cn_classifier_sweep(base_seed: u64, cooperative: bool) -> f64 {
    (0..CONFIGS)
        .map(|c| {
            let mut case = random_cn_case(base_seed + c);
            let l0 = case.model.classifier_loss(&case.x, &case.y, cooperative).unwrap();
            let (e, d, cl) = cn_grads(&case.model);
            if d.iter().any(|&g| g != 0.0) || (!cooperative && e.iter().any(|&g| g != 0.0)) {
                return f64::INFINITY;
            }
            let y = case.y.clone();
            let x = case.x.clone();
            let loss = |model: &mut ConsensusModel| model.classifier_loss(&x, &y, cooperative).unwrap();
            let mut worst = 0.0f64;
            if cooperative {
                let mut all = e.clone();
                all.extend(&d);
                all.extend(&cl);
                worst = worst.max(compare(&mut case.model, &all, l0.abs(), loss, |m, k| param_slot(m.params_mut(), k)));
            } else {
                worst = worst.max(compare(&mut case.model, &cl, l0.abs(), loss, |m, k| {
                    param_slot(m.classifier_mut().params_mut(), k)
                }));
            }
            worst
        })
        .fold(0.0, f64::max)
}

/// `L_D` gradients through the discriminator and the ePhysicians, with a
/// fixed noise batch; classifier gradients must stay zero.
pub fn cn_discriminator_sweep(base_seed: u64) -> f64 {
    (0..CONFIGS)
        .map(|c| {
            let mut case = random_cn_case(base_seed + c);
            let noise = case.noise.clone();
            let l0 = case.model.discriminator_loss(&case.x, noise.as_ref()).unwrap();
            let (e, d, cl) = cn_grads(&case.model);
            if cl.iter().any(|&g| g != 0.0) {
                return f64::INFINITY;
            }
            let mut all = e;
            all.extend(&d);
            all.extend(&cl);
            let x = case.x.clone();
            compare(
                &mut case.model,
                &all,
                l0.abs(),
                |model| model.discriminator_loss(&x, noise.as_ref()).unwrap(),
                |m, k| param_slot(m.params_mut(), k),
            )
        })
        .fold(0.0, f64::max)
}

/// Top-2 PCA from a dense symmetric eigen-decomposition, with the same sign
/// convention as the library.
pub struct OraclePca {
    pub components: [Vec<f64>; 2],
    pub variances: [f64; 2],
    pub coords: Vec<[f64; 2]>,
    pub explained_fraction: f64,
}

pub fn oracle_pca(x: &Matrix) -> OraclePca {
    let (n, d) = x.shape();
    let data = DMatrix::from_row_slice(n, d, x.as_slice());
    let mean = data.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let component = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        let big = (0..d).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        if v[big] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let (c1, c2) = (component(0), component(1));
    let coords = (0..n)
        .map(|i| {
            let row = centered.row(i);
            [
                row.iter().zip(&c1).map(|(a, b)| a * b).sum(),
                row.iter().zip(&c2).map(|(a, b)| a * b).sum(),
            ]
        })
        .collect();
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    OraclePca {
        components: [c1, c2],
        variances: [l1, l2],
        coords,
        explained_fraction: (l1 + l2) / cov.trace(),
    }
}

/// Largest absolute difference between the library PCA and the oracle over
/// components, variances, coordinates, and explained fraction.
pub fn pca_discrepancy(p: &Pca, o: &OraclePca) -> f64 {
    let mut worst: f64 = (p.explained_fraction - o.explained_fraction).abs();
    for k in 0..2 {
        worst = worst.max((p.variances[k] - o.variances[k]).abs());
        for (a, b) in p.components[k].iter().zip(&o.components[k]) {
            worst = worst.max((a - b).abs());
        }
        for (i, c) in o.coords.iter().enumerate() {
            worst = worst.max((p.coords.get(i, k) - c[k]).abs());
        }
    }
    worst
}

pub fn random_pca_input(seed: u64) -> Matrix {
    let mut r = rng(seed);
    normal_matrix(50, 10, &mut r)
}

/// Synthetic data with its natural partition, split and standardized.
pub fn synthetic_split(spec: &SyntheticSpec, seed: u64) -> (PreparedSplit, ModalityPartition, usize) {
    let data = generate_synthetic(spec, seed).unwrap();
    let partition = natural_partition(&data.dataset.feature_names, &data.modality_map).unwrap();
    let prepared = prepare_split(&data.dataset, (0.6, 0.2, 0.2), seed, ScalerFit::TrainOnly).unwrap();
    (prepared, partition, data.dataset.num_classes())
}

pub fn synthetic_experiment(spec: &SyntheticSpec, seed: u64) -> ExperimentData {
    let data = generate_synthetic(spec, seed).unwrap();
    let partition = natural_partition(&data.dataset.feature_names, &data.modality_map).unwrap();
    ExperimentData::new(data.dataset, partition).unwrap()
}

/// Drives `steps` outer steps batch by batch and checks after every update
/// which components' parameters changed. Returns a description of the first
/// violation.
pub fn check_update_ownership(cooperative: bool, disc_steps: usize, steps: usize) -> Result<(), String> {
    let spec = SyntheticSpec {
        samples: 120,
        ..SyntheticSpec::default()
    };
    let (prepared, partition, classes) = synthetic_split(&spec, 11);
    let config = TrainConfig {
        cooperative,
        disc_steps,
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config).unwrap();
    let mut model = trainer.init_model(partition, classes).unwrap();
    let train = &prepared.train;
    let fp = |m: &ConsensusModel| {
        (
            m.ephysician_fingerprint(),
            m.discriminator_fingerprint(),
            m.classifier_fingerprint(),
        )
    };
    let mut batches = 0u64;
    for step in 0..steps {
        let order: Vec<usize> = {
            use rand::seq::SliceRandom;
            let mut o: Vec<usize> = (0..train.len()).collect();
            o.shuffle(&mut rng(step as u64));
            o
        };
        for chunk in order.chunks(16).filter(|c| c.len() >= 2) {
            let x = train.x.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train.y[i]).collect();
            let before = fp(&model);
            trainer.classifier_step(&mut model, &x, &y).unwrap();
            let after = fp(&model);
            if after.2 == before.2 || after.1 != before.1 || (after.0 != before.0) != cooperative {
                return Err(format!("classifier step at outer step {step} touched the wrong parameters"));
            }
            let before = after;
            trainer.adversarial_step(&mut model, &x).unwrap();
            let after = fp(&model);
            if after.0 == before.0 || after.1 != before.1 || after.2 != before.2 {
                return Err(format!("adversarial step at outer step {step} touched the wrong parameters"));
            }
            let before = after;
            trainer.discriminator_steps(&mut model, &x).unwrap();
            let after = fp(&model);
            if after.1 == before.1 || after.0 != before.0 || after.2 != before.2 {
                return Err(format!("discriminator steps at outer step {step} touched the wrong parameters"));
            }
            batches += 1;
        }
    }
    let c = trainer.counters();
    let k = disc_steps as u64;
    if (c.classifier, c.adversarial, c.discriminator) != (batches, batches, k * batches) {
        return Err(format!("step counters {c:?} for {batches} batches and K = {k}"));
    }
    if trainer.optimizer_steps() != (batches, k * batches, batches) {
        return Err(format!("optimizer step counts {:?}", trainer.optimizer_steps()));
    }
    Ok(())
}

pub fn run_cli(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_consensus"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// synth -> train -> evaluate -> snapshots in `dir` with a fixed seed.
/// Returns every produced file with its bytes, or the failing command.
pub fn run_pipeline(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let steps: &[&[&str]] = &[
        &["synth", "--seed", "7", "--samples", "240", "--out", &p("data.csv"), "--map-out", &p("map.csv")],
        &[
            "train", "--data", &p("data.csv"), "--modality-map", &p("map.csv"), "--steps", "8", "--seed", "3",
            "--out", &p("run"),
        ],
        &["evaluate", "--model", &p("run/model.ckpt"), "--data", &p("data.csv"), "--out", &p("pred.csv")],
        &[
            "snapshots", "--data", &p("data.csv"), "--modality-map", &p("map.csv"), "--steps", "8", "--seed", "3",
            "--at", "1,4,8", "--out", &p("snap.csv"),
        ],
    ];
    for args in steps {
        let out = run_cli(args);
        if !out.status.success() {
            return Err(format!(
                "{args:?} exited with {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    let files = [
        "data.csv",
        "map.csv",
        "run/model.ckpt",
        "run/history.csv",
        "run/metrics.csv",
        "pred.csv",
        "snap.csv",
    ];
    files
        .iter()
        .map(|f| {
            std::fs::read(dir.join(f))
                .map(|b| (f.to_string(), b))
                .map_err(|e| format!("{f}: {e}"))
        })
        .collect()
}
