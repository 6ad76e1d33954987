//! Losses, exact circuit gradients, Adam and the mini-batch training loop.
//!
//! Two gradient routes are provided. [`grad_parameter_shift`] re-runs the
//! circuit at shifted angles: a plain `Ry` uses the two-term rule
//! `(E(t + pi/2) - E(t - pi/2)) / 2`, while a `CRy`, whose generator has the
//! three eigenvalues `{0, +-1/2}`, needs the four-term rule
//! `c+ [E(t + pi/2) - E(t - pi/2)] - c- [E(t + 3pi/2) - E(t - 3pi/2)]` with
//! `c+- = (sqrt 2 +- 1) / (4 sqrt 2)`. [`grad_adjoint`] gets the same numbers
//! from one forward pass and one reverse sweep over the statevector.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::qnn::{argmax, fit_standardizer, predict_proba, standardize, Checkpoint, ModelConfig, ParameterSet, QnnModel};
use crate::qsim::{cry_derivative_overlap, real, ry_derivative_overlap, GateKind, StateVector};
use crate::signal::sample_rng;

/// Lower bound applied to probabilities inside a logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Binary cross-entropy on the softmax probability of class 1. Two classes only.
    Bce,
    /// Categorical cross-entropy.
    Cce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    ParameterShift,
    Adjoint,
}

fn check_label(probs_len: usize, y: usize, kind: LossKind) -> Result<()> {
    if y >= probs_len {
        return Err(Error::Argument(format!("label {y} out of range for {probs_len} classes")));
    }
    if kind == LossKind::Bce && probs_len != 2 {
        return Err(Error::Argument(format!("BCE needs exactly 2 classes, got {probs_len}")));
    }
    Ok(())
}

/// Per-sample loss of a probability vector against label `y`.
pub fn loss(probs: &[f64], y: usize, kind: LossKind) -> Result<f64> {
    check_label(probs.len(), y, kind)?;
    Ok(match kind {
        LossKind::Cce => -probs[y].max(LOG_FLOOR).ln(),
        LossKind::Bce => {
            let p1 = probs[1];
            let yf = y as f64;
            -(yf * p1.max(LOG_FLOOR).ln() + (1.0 - yf) * (1.0 - p1).max(LOG_FLOOR).ln())
        }
    })
}

/// Loss, its gradient with respect to the expectations, and the probabilities.
pub fn loss_and_grad_expectations(
    expectations: &[f64],
    y: usize,
    kind: LossKind,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let probs = predict_proba(expectations);
    let l = loss(&probs, y, kind)?;
    let k = probs.len();
    // dL/dp, then through the softmax Jacobian dp_i/dE_j = p_i (delta_ij - p_j)
    let mut dl_dp = vec![0.0; k];
    match kind {
        LossKind::Cce => {
            if probs[y] >= LOG_FLOOR {
                dl_dp[y] = -1.0 / probs[y];
            }
        }
        LossKind::Bce => {
            let p1 = probs[1];
            let yf = y as f64;
            let mut d = 0.0;
            if p1 >= LOG_FLOOR {
                d -= yf / p1;
            }
            if 1.0 - p1 >= LOG_FLOOR {
                d += (1.0 - yf) / (1.0 - p1);
            }
            dl_dp[1] = d;
        }
    }
    let weighted: f64 = dl_dp.iter().zip(&probs).map(|(d, p)| d * p).sum();
    let grad = (0..k).map(|j| probs[j] * (dl_dp[j] - weighted)).collect();
    Ok((l, grad, probs))
}

/// Gradient and bookkeeping for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub expectations: Vec<f64>,
    pub predicted: usize,
}

fn param_kinds(model: &QnnModel) -> Vec<GateKind> {
    let mut kinds = vec![GateKind::Ry; model.n_params()];
    for g in &model.variational().ops {
        if let Some(id) = g.param_id {
            kinds[id] = g.kind;
        }
    }
    kinds
}

/// `dE_k / dtheta_i` for every parameter `i` and ancilla `k`, by parameter shift.
pub fn expectation_jacobian_shift(model: &QnnModel, xs: &[f64], theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    let kinds = param_kinds(model);
    let mut shifted = theta.to_vec();
    let mut eval = |i: usize, delta: f64| -> Result<Vec<f64>> {
        shifted[i] = theta[i] + delta;
        let e = model.forward_standardized(xs, &shifted);
        shifted[i] = theta[i];
        e
    };
    let c_plus = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
    let c_minus = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
    (0..theta.len())
        .map(|i| {
            let plus = eval(i, FRAC_PI_2)?;
            let minus = eval(i, -FRAC_PI_2)?;
            match kinds[i] {
                GateKind::CRy => {
                    let plus3 = eval(i, 3.0 * FRAC_PI_2)?;
                    let minus3 = eval(i, -3.0 * FRAC_PI_2)?;
                    Ok((0..plus.len())
                        .map(|k| c_plus * (plus[k] - minus[k]) - c_minus * (plus3[k] - minus3[k]))
                        .collect())
                }
                _ => Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / 2.0).collect()),
            }
        })
        .collect()
}

/// Loss gradient through the parameter-shift Jacobian. `xs` is the standardized input.
pub fn grad_parameter_shift(
    model: &QnnModel,
    xs: &[f64],
    y: usize,
    theta: &[f64],
    kind: LossKind,
) -> Result<SampleGradient> {
    let e = model.forward_standardized(xs, theta)?;
    let (l, dl_de, probs) = loss_and_grad_expectations(&e, y, kind)?;
    let jac = expectation_jacobian_shift(model, xs, theta)?;
    let grad = jac
        .iter()
        .map(|row| row.iter().zip(&dl_de).map(|(a, b)| a * b).sum())
        .collect();
    Ok(SampleGradient { loss: l, grad, predicted: argmax(&probs), expectations: e })
}

/// Loss gradient by reverse-mode sweep through the statevector.
///
/// With `w = dL/dE`, the loss gradient is the derivative of `<psi| O |psi>` for
/// the diagonal observable `O = sum_k w_k Z_{ancilla k}`, so one co-state suffices.
pub fn grad_adjoint(
    model: &QnnModel,
    xs: &[f64],
    y: usize,
    theta: &[f64],
    kind: LossKind,
) -> Result<SampleGradient> {
    let mut psi = model.state_real(xs, theta)?;
    let e = model.readout_real(&psi);
    let (l, w, probs) = loss_and_grad_expectations(&e, y, kind)?;

    let anc_shift = model.config().n_data;
    // O is diagonal and depends only on the ancilla bits
    let diag: Vec<f64> = (0..1usize << w.len())
        .map(|bits| {
            w.iter()
                .enumerate()
                .map(|(k, wk)| if bits >> k & 1 == 0 { *wk } else { -*wk })
                .sum()
        })
        .collect();
    let mut lambda: Vec<f64> = psi.iter().enumerate().map(|(b, a)| a * diag[b >> anc_shift]).collect();

    let mut grad = vec![0.0; theta.len()];
    real::adjoint(model.variational(), &mut psi, &mut lambda, theta, &mut grad)?;
    Ok(SampleGradient { loss: l, grad, predicted: argmax(&probs), expectations: e })
}

/// Reference adjoint sweep on complex amplitudes, one pass per kernel.
pub fn grad_adjoint_complex(
    model: &QnnModel,
    xs: &[f64],
    y: usize,
    theta: &[f64],
    kind: LossKind,
) -> Result<SampleGradient> {
    let mut psi = model.state(xs, theta)?;
    let e = model.readout(&psi);
    let (l, w, probs) = loss_and_grad_expectations(&e, y, kind)?;

    let anc_shift = model.config().n_data;
    let lambda_amps: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(b, &a)| {
            let bits = b >> anc_shift;
            let weight: f64 = w
                .iter()
                .enumerate()
                .map(|(k, wk)| if bits >> k & 1 == 0 { *wk } else { -*wk })
                .sum();
            a * weight
        })
        .collect();
    let mut lambda = StateVector::from_amplitudes(lambda_amps)?;

    let mut grad = vec![0.0; theta.len()];
    for g in model.variational().ops.iter().rev() {
        let angle = g.angle(theta)?;
        psi.apply_inverse(g, angle)?;
        if let Some(id) = g.param_id {
            let overlap = match g.kind {
                GateKind::Ry => ry_derivative_overlap(lambda.amplitudes(), psi.amplitudes(), g.target, angle),
                GateKind::CRy => cry_derivative_overlap(
                    lambda.amplitudes(),
                    psi.amplitudes(),
                    g.control.unwrap_or_default(),
                    g.target,
                    angle,
                ),
                GateKind::H => 0.0,
            };
            grad[id] = 2.0 * overlap;
        }
        lambda.apply_inverse(g, angle)?;
    }
    Ok(SampleGradient { loss: l, grad, predicted: argmax(&probs), expectations: e })
}

pub fn sample_gradient(
    model: &QnnModel,
    xs: &[f64],
    y: usize,
    theta: &[f64],
    kind: LossKind,
    method: GradientMethod,
) -> Result<SampleGradient> {
    match method {
        GradientMethod::ParameterShift => grad_parameter_shift(model, xs, y, theta, kind),
        GradientMethod::Adjoint => grad_adjoint(model, xs, y, theta, kind),
    }
}

/// Mean gradient over a batch; per-sample results are reduced in input order.
pub fn batch_gradient(
    model: &QnnModel,
    inputs: &[&[f64]],
    labels: &[usize],
    theta: &[f64],
    kind: LossKind,
    method: GradientMethod,
) -> Result<(Vec<f64>, Vec<SampleGradient>)> {
    let per_sample = inputs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(xs, &y)| sample_gradient(model, xs, y, theta, kind, method))
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![0.0; theta.len()];
    for s in &per_sample {
        for (m, g) in mean.iter_mut().zip(&s.grad) {
            *m += g;
        }
    }
    let n = per_sample.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok((mean, per_sample))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments and step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub hyper: AdamConfig,
}

impl OptimizerState {
    pub fn new(n_params: usize, hyper: AdamConfig) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0, hyper }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if grad.len() != params.len() || grad.len() != self.m.len() {
            return Err(Error::Argument(format!(
                "gradient of length {} for {} parameters",
                grad.len(),
                params.len()
            )));
        }
        if let Some((i, g)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite gradient component {i} = {g} at step {}",
                self.t + 1
            )));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.hyper;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

pub fn adam_step(state: &mut OptimizerState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    state.step(params, grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub loss_kind: LossKind,
    pub gradient_method: GradientMethod,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 32,
            lr: 0.01,
            loss_kind: LossKind::Cce,
            gradient_method: GradientMethod::Adjoint,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("learning rate {} is not a non-negative number", self.lr)));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub final_params: Vec<f64>,
    pub best_test_acc: f64,
    /// 1-based epoch with the best test accuracy (earliest on ties).
    pub best_epoch: usize,
    pub final_test_acc: f64,
    pub wall_seconds: f64,
}

impl TrainReport {
    /// JSON lines, one `{epoch, train_loss, train_acc, test_acc, seconds}` per epoch.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.epochs {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub checkpoint: Checkpoint,
}

/// Fraction of rows whose prediction matches the label.
pub fn accuracy(model: &QnnModel, inputs: &[Vec<f64>], labels: &[usize], theta: &[f64]) -> Result<f64> {
    if inputs.is_empty() {
        return Ok(0.0);
    }
    let correct = inputs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(xs, &y)| Ok(usize::from(argmax(&model.forward_standardized(xs, theta)?) == y)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / inputs.len() as f64)
}

pub fn train(
    train_set: &FeatureSet,
    test_set: &FeatureSet,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(train_set, test_set, model_cfg, cfg, |_| {})
}

/// Mini-batch training. The standardizer is fitted on `train_set` only.
pub fn train_with_progress(
    train_set: &FeatureSet,
    test_set: &FeatureSet,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::Config(format!(
            "empty split ({} train rows, {} test rows)",
            train_set.len(),
            test_set.len()
        )));
    }
    let k = model_cfg.n_ancilla;
    if let Some(bad) = train_set.labels.iter().chain(&test_set.labels).find(|&&l| l >= k) {
        return Err(Error::Config(format!("label {bad} does not fit a {k}-class model")));
    }
    if cfg.loss_kind == LossKind::Bce && k != 2 {
        return Err(Error::Config(format!("BCE loss needs a 2-class model, got {k} classes")));
    }
    let dim = train_set.features[0].as_slice().len();
    if dim != model_cfg.n_data {
        return Err(Error::Config(format!(
            "{dim} features per row but the model has {} data qubits",
            model_cfg.n_data
        )));
    }

    let rows: Vec<&[f64]> = train_set.features.iter().map(|f| f.as_slice()).collect();
    let stats = fit_standardizer(&rows)?;
    let std_rows = |set: &FeatureSet| -> Result<Vec<Vec<f64>>> {
        set.features.iter().map(|f| standardize(f.as_slice(), &stats)).collect()
    };
    let x_train = std_rows(train_set)?;
    let x_test = std_rows(test_set)?;

    let model = QnnModel::new(*model_cfg)?;
    let mut theta = ParameterSet::init(model_cfg).values;
    let mut opt = OptimizerState::new(theta.len(), AdamConfig { lr: cfg.lr, ..AdamConfig::default() });

    let n = x_train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut sample_loss = vec![0.0; n];
    let mut records = Vec::with_capacity(cfg.epochs);
    let start = Instant::now();
    for epoch in 1..=cfg.epochs {
        let epoch_start = Instant::now();
        if cfg.shuffle {
            order.shuffle(&mut sample_rng(cfg.seed, epoch as u64));
        }
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| x_train[i].as_slice()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train_set.labels[i]).collect();
            let (grad, per_sample) =
                batch_gradient(&model, &inputs, &labels, &theta, cfg.loss_kind, cfg.gradient_method)?;
            for (&i, s) in batch.iter().zip(&per_sample) {
                sample_loss[i] = s.loss;
                correct += usize::from(s.predicted == train_set.labels[i]);
            }
            opt.step(&mut theta, &grad)?;
        }
        // summed in index order so the value does not depend on the shuffle
        let train_loss = sample_loss.iter().sum::<f64>() / n as f64;
        let test_acc = accuracy(&model, &x_test, &test_set.labels, &theta)?;
        let rec = EpochRecord {
            epoch,
            train_loss,
            train_acc: correct as f64 / n as f64,
            test_acc,
            seconds: epoch_start.elapsed().as_secs_f64(),
        };
        progress(&rec);
        records.push(rec);
    }
    let (best_idx, best) = records
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r.test_acc > acc.1 { (i, r.test_acc) } else { acc });
    let report = TrainReport {
        final_test_acc: records.last().map_or(0.0, |r| r.test_acc),
        best_test_acc: best,
        best_epoch: best_idx + 1,
        epochs: records,
        final_params: theta.clone(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { report, checkpoint: Checkpoint::new(*model_cfg, stats, theta) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    #[test]
    fn loss_cases() {
        assert_eq!(loss(&[0.0, 1.0, 0.0], 1, LossKind::Cce).unwrap(), 0.0);
        let ln2 = std::f64::consts::LN_2;
        for y in 0..2 {
            assert!((loss(&[0.5, 0.5], y, LossKind::Bce).unwrap() - ln2).abs() < 1e-15);
            assert!((loss(&[0.5, 0.5], y, LossKind::Cce).unwrap() - ln2).abs() < 1e-15);
        }
        let p = [0.2, 0.7, 0.1];
        assert!((loss(&p, 2, LossKind::Cce).unwrap() - 10f64.ln()).abs() < 1e-15);
        assert!((loss(&p, 0, LossKind::Cce).unwrap() - 5f64.ln()).abs() < 1e-15);
        assert!(loss(&p, 3, LossKind::Cce).is_err());
        assert!(loss(&p, 0, LossKind::Bce).is_err());
        assert!((loss(&[1.0, 0.0], 1, LossKind::Cce).unwrap() + LOG_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_finite_difference() {
        let e = [0.3, -0.2, 0.9];
        for kind in [LossKind::Cce] {
            let (_, g, _) = loss_and_grad_expectations(&e, 1, kind).unwrap();
            for j in 0..3 {
                let mut p = e;
                p[j] += 1e-6;
                let mut m = e;
                m[j] -= 1e-6;
                let fd = (loss(&predict_proba(&p), 1, kind).unwrap() - loss(&predict_proba(&m), 1, kind).unwrap()) / 2e-6;
                assert!((fd - g[j]).abs() < 1e-8);
            }
        }
        let e2 = [0.4, -0.7];
        for y in 0..2 {
            let (_, g, _) = loss_and_grad_expectations(&e2, y, LossKind::Bce).unwrap();
            let (_, gc, _) = loss_and_grad_expectations(&e2, y, LossKind::Cce).unwrap();
            for j in 0..2 {
                assert!((g[j] - gc[j]).abs() < 1e-12, "BCE and CCE coincide for two classes");
            }
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut st = OptimizerState::new(3, AdamConfig::default());
        let mut p = vec![0.1, -0.2, 0.3];
        for _ in 0..5 {
            st.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![0.1, -0.2, 0.3]);
        assert_eq!(st.t, 5);
    }

    #[test]
    fn adam_first_step_moves_against_gradient() {
        let mut st = OptimizerState::new(2, AdamConfig::default());
        let mut p = vec![0.0, 0.0];
        st.step(&mut p, &[3.0, -0.5]).unwrap();
        // bias correction makes the first step exactly lr * g / (|g| + eps)
        assert!((p[0] + 0.01 * 3.0 / (3.0 + 1e-8)).abs() < 1e-15);
        assert!(p[1] > 0.0);
    }

    #[test]
    fn adam_steady_state_step_is_lr() {
        let mut st = OptimizerState::new(1, AdamConfig::default());
        let mut p = vec![0.0];
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p[0];
            st.step(&mut p, &[0.37]).unwrap();
            last = p[0] - before;
        }
        assert!((last + 0.01).abs() < 1e-6, "{last}");
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut st = OptimizerState::new(2, AdamConfig::default());
        let mut p = vec![0.0, 0.0];
        assert!(matches!(st.step(&mut p, &[0.0, f64::NAN]), Err(Error::Training(_))));
        assert!(st.step(&mut p, &[0.0]).is_err());
    }

    #[test]
    fn empty_split_is_a_configuration_error() {
        let mut set = FeatureSet::default();
        set.push(0, FeatureVector([0.0; 9]));
        let cfg = ModelConfig::new(9, 2, 1, 0);
        let r = train(&set, &FeatureSet::default(), &cfg, &TrainConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    fn small_model() -> (QnnModel, Vec<f64>, Vec<f64>) {
        let cfg = ModelConfig::new(3, 3, 2, 11);
        let model = QnnModel::new(cfg).unwrap();
        let mut rng = sample_rng(4, 0);
        use rand::Rng;
        let theta = (0..model.n_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
        (model, vec![0.4, -0.9, 0.1], theta)
    }

    #[test]
    fn shift_and_adjoint_agree_with_finite_difference() {
        let (model, xs, theta) = small_model();
        let a = grad_adjoint(&model, &xs, 2, &theta, LossKind::Cce).unwrap();
        let s = grad_parameter_shift(&model, &xs, 2, &theta, LossKind::Cce).unwrap();
        let c = grad_adjoint_complex(&model, &xs, 2, &theta, LossKind::Cce).unwrap();
        assert!((a.loss - s.loss).abs() < 1e-14);
        for i in 0..theta.len() {
            assert!((a.grad[i] - c.grad[i]).abs() < 1e-12);
        }
        let h = 1e-5;
        for i in 0..theta.len() {
            let f = |d: f64| {
                let mut t = theta.clone();
                t[i] += d;
                let e = model.forward_standardized(&xs, &t).unwrap();
                loss(&predict_proba(&e), 2, LossKind::Cce).unwrap()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((a.grad[i] - s.grad[i]).abs() < 1e-10, "param {i}: {} vs {}", a.grad[i], s.grad[i]);
            assert!((a.grad[i] - fd).abs() < 1e-7, "param {i}: {} vs fd {fd}", a.grad[i]);
        }
    }

    #[test]
    fn two_term_rule_is_wrong_for_controlled_rotations() {
        let (model, xs, theta) = small_model();
        let jac = expectation_jacobian_shift(&model, &xs, &theta).unwrap();
        let kinds = param_kinds(&model);
        let mut worst: f64 = 0.0;
        for (i, kind) in kinds.iter().enumerate() {
            if *kind != GateKind::CRy {
                continue;
            }
            let mut p = theta.clone();
            p[i] += FRAC_PI_2;
            let mut m = theta.clone();
            m[i] -= FRAC_PI_2;
            let ep = model.forward_standardized(&xs, &p).unwrap();
            let em = model.forward_standardized(&xs, &m).unwrap();
            for k in 0..ep.len() {
                worst = worst.max(((ep[k] - em[k]) / 2.0 - jac[i][k]).abs());
            }
        }
        assert!(worst > 1e-3, "{worst}");
    }

    #[test]
    fn real_path_matches_complex_reference() {
        let cfg = ModelConfig::new(9, 5, 1, 2);
        let model = QnnModel::new(cfg).unwrap();
        let theta = ParameterSet::init(&cfg).values.iter().map(|t| t * 20.0).collect::<Vec<_>>();
        let xs = [0.3, -0.2, 0.9, -1.0, 0.0, 0.45, 0.1, -0.6, 0.8];
        let e_real = model.forward_standardized(&xs, &theta).unwrap();
        let e_cplx = model.readout(&model.state(&xs, &theta).unwrap());
        for (a, b) in e_real.iter().zip(&e_cplx) {
            assert!((a - b).abs() < 1e-12);
        }
        let a = grad_adjoint(&model, &xs, 1, &theta, LossKind::Cce).unwrap();
        let c = grad_adjoint_complex(&model, &xs, 1, &theta, LossKind::Cce).unwrap();
        for (x, y) in a.grad.iter().zip(&c.grad) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }
}
