mod common;

use common::*;
use pqdvqc::features::{FeatureSet, FeatureVector};
use pqdvqc::qnn::{predict_proba, ParameterSet};
use pqdvqc::qsim::run_circuit;
use pqdvqc::training::{
    batch_gradient, expectation_jacobian_shift, grad_adjoint, grad_parameter_shift, sample_gradient,
};
use pqdvqc::{train, Circuit, GateOp, GradientMethod, LossKind, ModelConfig, QnnModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

fn toy_model() -> QnnModel {
    QnnModel::new(ModelConfig::new(2, 2, 1, 0)).unwrap()
}

#[test]
fn forward_matches_dense_oracle() {
    let model = toy_model();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let xs: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let theta: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let circuit = model.full_circuit(&xs).unwrap();
        let dense = matvec(&circuit_unitary(&circuit, &theta), &basis_zero(4));
        let e = model.forward_standardized(&xs, &theta).unwrap();
        for k in 0..2 {
            assert!((e[k] - expect_z_dense(&dense, 2 + k)).abs() < 1e-12);
        }
    }
}

#[test]
fn shift_rule_on_single_rotation_gives_minus_sine() {
    let mut c = Circuit::new(1);
    c.push(GateOp::ry_param(0, 0));
    let e = |t: f64| run_circuit(&c, &[t]).unwrap().expect_z(0).unwrap();
    let theta = FRAC_PI_4;
    let d = (e(theta + FRAC_PI_2) - e(theta - FRAC_PI_2)) / 2.0;
    assert!((d + theta.sin()).abs() < 1e-12);
    assert!((d + 0.7071).abs() < 1e-4);
}

#[test]
fn gate_outside_the_light_cone_has_zero_gradient() {
    // qubit 1 is read out; the last rotation acts on qubit 0 after every interaction
    let mut c = Circuit::new(2);
    c.push(GateOp::h(0))
        .push(GateOp::cry_param(0, 1, 0))
        .push(GateOp::ry_param(1, 1))
        .push(GateOp::ry_param(0, 2));
    let theta = [0.4, -0.8, 1.3];
    let e = |t: &[f64]| run_circuit(&c, t).unwrap().expect_z(1).unwrap();
    let mut plus = theta;
    let mut minus = theta;
    plus[2] += FRAC_PI_2;
    minus[2] -= FRAC_PI_2;
    assert!(((e(&plus) - e(&minus)) / 2.0).abs() < 1e-10);
    plus[0] += FRAC_PI_2;
    assert!((e(&plus) - e(&theta)).abs() > 1e-3, "control gate does matter");
}

#[test]
fn symmetric_inputs_give_symmetric_entangler_gradients() {
    // two data qubits feeding one ancilla; with the ring at zero angle the
    // circuit is symmetric under swapping the data qubits
    let config = ModelConfig::new(2, 1, 1, 0);
    let model = QnnModel::new(config).unwrap();
    let block = &config.layer_map()[0];
    let mut theta = vec![0.0; model.n_params()];
    theta[block.oeo_rotation.start + 2] = 0.7;
    let xs = [0.35, 0.35];
    let jac = expectation_jacobian_shift(&model, &xs, &theta).unwrap();
    let a = block.dea_entangle.start;
    assert!((jac[a][0] - jac[a + 1][0]).abs() < 1e-12);
    assert!(jac[a][0].abs() > 1e-3);
    let r = block.dea_rotation.start;
    assert!((jac[r][0] - jac[r + 1][0]).abs() < 1e-12);
}

#[test]
fn adjoint_is_much_cheaper_than_parameter_shift() {
    // informational: P = 57 here, and the adjoint sweep should be a small
    // fraction of the 2P-circuit shift rule
    let model = QnnModel::new(ModelConfig::new(9, 7, 1, 0)).unwrap();
    let theta = ParameterSet::init(model.config()).values;
    let xs = [0.1, -0.2, 0.3, 0.0, 0.5, -0.6, 0.7, -0.8, 0.9];
    let t0 = std::time::Instant::now();
    let a = grad_adjoint(&model, &xs, 3, &theta, LossKind::Cce).unwrap();
    let t_adj = t0.elapsed();
    let t0 = std::time::Instant::now();
    let s = grad_parameter_shift(&model, &xs, 3, &theta, LossKind::Cce).unwrap();
    let t_shift = t0.elapsed();
    let worst = a.grad.iter().zip(&s.grad).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8);
    eprintln!("adjoint {t_adj:?}, shift {t_shift:?}, ratio {:.3}", t_adj.as_secs_f64() / t_shift.as_secs_f64());
}

#[test]
fn batch_gradient_is_the_mean_of_sample_gradients() {
    let model = toy_model();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let theta: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..7).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<usize> = (0..7).map(|i| i % 2).collect();
    let inputs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let (mean, per) = batch_gradient(&model, &inputs, &labels, &theta, LossKind::Cce, GradientMethod::Adjoint).unwrap();
    for (i, m) in mean.iter().enumerate() {
        let direct: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(x, &y)| sample_gradient(&model, x, y, &theta, LossKind::Cce, GradientMethod::Adjoint).unwrap().grad[i])
            .sum::<f64>()
            / 7.0;
        assert!((m - direct).abs() < 1e-12);
        assert_eq!(per[0].grad.len(), theta.len());
    }
}

fn separable_sets(seed: u64) -> (FeatureSet, FeatureSet) {
    // label decided by the sign of feature 4, with a gap of 0.5 around zero
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |n: usize| {
        let mut set = FeatureSet::default();
        for i in 0..n {
            let y = i % 2;
            let mut f = [0.0; 9];
            for v in f.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let mag = rng.random_range(0.25..1.0);
            f[4] = if y == 1 { mag } else { -mag };
            set.push(y, FeatureVector(f));
        }
        set
    };
    (make(64), make(32))
}

fn toy_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        lr: 0.1,
        loss_kind: LossKind::Bce,
        gradient_method: GradientMethod::Adjoint,
        seed: 3,
        shuffle: true,
    }
}

#[test]
fn separable_toy_problem_is_learned() {
    let (tr, te) = separable_sets(1);
    let out = train(&tr, &te, &ModelConfig::new(9, 2, 1, 2), &toy_config(30)).unwrap();
    let best_train = out.report.epochs.iter().map(|r| r.train_acc).fold(0.0, f64::max);
    assert_eq!(best_train, 1.0, "{:?}", out.report.epochs.last());
    assert_eq!(out.report.epochs.len(), 30);
}

#[test]
fn training_is_deterministic() {
    let (tr, te) = separable_sets(2);
    let cfg = toy_config(3);
    let m = ModelConfig::new(9, 2, 1, 5);
    let a = train(&tr, &te, &m, &cfg).unwrap();
    let b = train(&tr, &te, &m, &cfg).unwrap();
    assert_eq!(a.report.final_params, b.report.final_params);
    for (x, y) in a.report.epochs.iter().zip(&b.report.epochs) {
        assert_eq!((x.train_loss, x.train_acc, x.test_acc), (y.train_loss, y.train_acc, y.test_acc));
    }
    assert_eq!(a.checkpoint.theta, b.checkpoint.theta);
}

#[test]
fn zero_learning_rate_freezes_the_model() {
    let (tr, te) = separable_sets(3);
    let cfg = TrainConfig { lr: 0.0, ..toy_config(3) };
    let m = ModelConfig::new(9, 2, 1, 5);
    let out = train(&tr, &te, &m, &cfg).unwrap();
    assert_eq!(out.report.final_params, ParameterSet::init(&m).values);
    let losses: Vec<f64> = out.report.epochs.iter().map(|r| r.train_loss).collect();
    assert!(losses.iter().all(|&l| (l - losses[0]).abs() < 1e-12), "{losses:?}");
}

#[test]
fn shift_and_adjoint_training_agree() {
    let (tr, te) = separable_sets(4);
    let m = ModelConfig::new(9, 2, 1, 1);
    let a = train(&tr, &te, &m, &toy_config(2)).unwrap();
    let cfg = TrainConfig { gradient_method: GradientMethod::ParameterShift, ..toy_config(2) };
    let b = train(&tr, &te, &m, &cfg).unwrap();
    for (x, y) in a.report.final_params.iter().zip(&b.report.final_params) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn softmax_of_opposite_expectations() {
    let p = predict_proba(&[1.0, -1.0]);
    let e = std::f64::consts::E;
    assert!((p[0] - e / (e + 1.0 / e)).abs() < 1e-15);
    assert!((p[0] - 0.8808).abs() < 1e-4 && (p[1] - 0.1192).abs() < 1e-4);
}
