//! Quantum neural network classifier.
//!
//! Qubits `0..n_data` hold one standardized feature each, encoded as
//! `Ry(asin x) H |0>`. Qubits `n_data..n_data + K` are ancillas, one per class,
//! left in `|0>` by the encoding. Each of the `L` variational layers is
//!
//! * OEO: `Ry(theta)` on every qubit, then a ring `CRy(q_i -> q_{i+1})`
//!   closed by `CRy(q_{N-1} -> q_0)`;
//! * DEA: `Ry(theta)` on every qubit, then `CRy(data_i -> ancilla_{i mod K})`.
//!
//! Every angle is its own parameter, so `P = L (3N + n_data)`. The class
//! scores are the ancilla `<Z>` values, turned into probabilities by a softmax.

use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::qsim::{expect_z_unchecked, real, Circuit, GateOp, StateVector, MAX_QUBITS};
use crate::signal::sample_rng;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Half-width of the uniform interval used for initial angles.
pub const INIT_ANGLE_RANGE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_data: usize,
    pub n_ancilla: usize,
    pub n_layers: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n_data: usize, n_ancilla: usize, n_layers: usize, seed: u64) -> Self {
        Self { n_data, n_ancilla, n_layers, seed }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_data + self.n_ancilla
    }

    /// `L (3N + n_data)`.
    pub fn n_params(&self) -> usize {
        self.n_layers * self.params_per_layer()
    }

    pub fn params_per_layer(&self) -> usize {
        3 * self.n_qubits() + self.n_data
    }

    pub fn ancilla_qubit(&self, k: usize) -> usize {
        self.n_data + k
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_data == 0 || self.n_ancilla == 0 || self.n_layers == 0 {
            return Err(Error::Config(format!(
                "model needs at least one data qubit, ancilla and layer (got {self:?})"
            )));
        }
        if self.n_qubits() > MAX_QUBITS {
            return Err(Error::Config(format!(
                "{} qubits exceed the simulator limit of {MAX_QUBITS}",
                self.n_qubits()
            )));
        }
        Ok(())
    }

    pub fn layer_map(&self) -> Vec<LayerBlock> {
        let n = self.n_qubits();
        (0..self.n_layers)
            .map(|l| {
                let base = l * self.params_per_layer();
                LayerBlock {
                    layer: l,
                    oeo_rotation: base..base + n,
                    oeo_ring: base + n..base + 2 * n,
                    dea_rotation: base + 2 * n..base + 3 * n,
                    dea_entangle: base + 3 * n..base + 3 * n + self.n_data,
                }
            })
            .collect()
    }
}

/// Parameter index ranges of one variational layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerBlock {
    pub layer: usize,
    pub oeo_rotation: Range<usize>,
    pub oeo_ring: Range<usize>,
    pub dea_rotation: Range<usize>,
    pub dea_entangle: Range<usize>,
}

/// Flat trainable angles in [`ModelConfig::layer_map`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub values: Vec<f64>,
}

impl ParameterSet {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self { values: vec![0.0; config.n_params()] }
    }

    /// Independent uniform draws from `[-0.1, 0.1]`, seeded by `config.seed`.
    pub fn init(config: &ModelConfig) -> Self {
        let mut rng = sample_rng(config.seed, u64::MAX);
        Self {
            values: (0..config.n_params())
                .map(|_| rng.random_range(-INIT_ANGLE_RANGE..=INIT_ANGLE_RANGE))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-feature z-score statistics plus the post-z-score divisor that keeps
/// training rows inside the `asin` domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// Columns that were constant in training; their stddev and divisor are forced to 1.
    pub degenerate: Vec<bool>,
}

impl StandardizationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits mean, population standard deviation and max |z| on training rows only.
pub fn fit_standardizer<R: AsRef<[f64]>>(rows: &[R]) -> Result<StandardizationStats> {
    if rows.len() < 2 {
        return Err(Error::Argument(format!(
            "standardizer needs at least 2 training rows, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != dim) {
        return Err(Error::Argument("training rows have differing lengths".into()));
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
            *v += (x - m).powi(2);
        }
    }
    let mut stddev: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    let degenerate: Vec<bool> = stddev
        .iter()
        .zip(&mean)
        .map(|(&s, &m)| s <= 1e-12 * m.abs().max(1.0))
        .collect();
    for (s, &d) in stddev.iter_mut().zip(&degenerate) {
        if d {
            *s = 1.0;
        }
    }
    let mut max_abs = vec![0.0f64; dim];
    for r in rows {
        for (j, x) in r.as_ref().iter().enumerate() {
            max_abs[j] = max_abs[j].max(((x - mean[j]) / stddev[j]).abs());
        }
    }
    for (a, &d) in max_abs.iter_mut().zip(&degenerate) {
        *a = if d { 1.0 } else { a.max(1e-12) };
    }
    Ok(StandardizationStats { mean, stddev, max_abs, degenerate })
}

/// `clamp(((x - mean) / stddev) / max_abs, -1, 1)`.
pub fn standardize(x: &[f64], stats: &StandardizationStats) -> Result<Vec<f64>> {
    if x.len() != stats.dim() {
        return Err(Error::Argument(format!(
            "feature vector of length {} for a {}-feature standardizer",
            x.len(),
            stats.dim()
        )));
    }
    Ok(x.iter()
        .enumerate()
        .map(|(j, v)| (((v - stats.mean[j]) / stats.stddev[j]) / stats.max_abs[j]).clamp(-1.0, 1.0))
        .collect())
}

fn check_encodable(xs: &[f64]) -> Result<()> {
    if let Some(bad) = xs.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Argument(format!("encoded value {bad} outside [-1, 1]")));
    }
    Ok(())
}

/// `H` then `Ry(asin x_i)` on data qubit `i`; ancillas untouched.
pub fn build_encoding(xs: &[f64], n_qubits: usize) -> Result<Circuit> {
    check_encodable(xs)?;
    if xs.len() > n_qubits {
        return Err(Error::Argument(format!("{} values for {n_qubits} qubits", xs.len())));
    }
    let mut c = Circuit::new(n_qubits);
    for (i, &x) in xs.iter().enumerate() {
        c.push(GateOp::h(i)).push(GateOp::ry(i, x.asin()));
    }
    Ok(c)
}

/// The `L`-layer trainable circuit with parameter ids in layer-map order.
pub fn build_variational(config: &ModelConfig) -> Result<Circuit> {
    config.validate()?;
    let n = config.n_qubits();
    let mut c = Circuit::new(n);
    for block in config.layer_map() {
        let mut id = block.oeo_rotation.start;
        for q in 0..n {
            c.push(GateOp::ry_param(q, id));
            id += 1;
        }
        for q in 0..n {
            c.push(GateOp::cry_param(q, (q + 1) % n, id));
            id += 1;
        }
        for q in 0..n {
            c.push(GateOp::ry_param(q, id));
            id += 1;
        }
        for i in 0..config.n_data {
            c.push(GateOp::cry_param(i, config.ancilla_qubit(i % config.n_ancilla), id));
            id += 1;
        }
        debug_assert_eq!(id, block.dea_entangle.end);
    }
    Ok(c)
}

/// Softmax over class scores, shifted by the maximum for stability.
pub fn predict_proba(expectations: &[f64]) -> Vec<f64> {
    let max = expectations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = expectations.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A configured circuit: the variational part is built once, the encoding per input.
#[derive(Clone, Debug)]
pub struct QnnModel {
    config: ModelConfig,
    variational: Circuit,
}

impl QnnModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let variational = build_variational(&config)?;
        Ok(Self { config, variational })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variational(&self) -> &Circuit {
        &self.variational
    }

    pub fn n_params(&self) -> usize {
        self.config.n_params()
    }

    fn check_input(&self, xs: &[f64]) -> Result<()> {
        if xs.len() != self.config.n_data {
            return Err(Error::Argument(format!(
                "model expects {} features, got {}",
                self.config.n_data,
                xs.len()
            )));
        }
        Ok(())
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::Argument(format!(
                "model has {} parameters, {} supplied",
                self.n_params(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// Encoding followed by the variational circuit, as one gate list.
    pub fn full_circuit(&self, xs: &[f64]) -> Result<Circuit> {
        self.check_input(xs)?;
        let mut c = build_encoding(xs, self.config.n_qubits())?;
        c.extend(&self.variational);
        Ok(c)
    }

    fn encoding_factors(&self, xs: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.check_input(xs)?;
        check_encodable(xs)?;
        // Ry(phi) H |0> = Ry(pi/2 + phi) |0>
        let mut factors: Vec<(f64, f64)> = xs
            .iter()
            .map(|x| {
                let half = (std::f64::consts::FRAC_PI_2 + x.asin()) / 2.0;
                (half.cos(), half.sin())
            })
            .collect();
        factors.extend(std::iter::repeat_n((1.0, 0.0), self.config.n_ancilla));
        Ok(factors)
    }

    /// Encoded input state, built directly as the tensor product the encoding gates produce.
    pub fn encode(&self, xs: &[f64]) -> Result<StateVector> {
        StateVector::product(&self.encoding_factors(xs)?)
    }

    /// Final state for standardized input `xs`.
    pub fn state(&self, xs: &[f64], theta: &[f64]) -> Result<StateVector> {
        self.check_params(theta)?;
        let mut s = self.encode(xs)?;
        self.variational.apply_to(&mut s, theta)?;
        Ok(s)
    }

    /// [`state`](Self::state) with real amplitudes; every gate of the model is real.
    pub fn state_real(&self, xs: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        let mut amps = real::product(&self.encoding_factors(xs)?);
        real::apply(&self.variational, &mut amps, theta)?;
        Ok(amps)
    }

    /// Ancilla `<Z>` values of a final state.
    pub fn readout(&self, state: &StateVector) -> Vec<f64> {
        (0..self.config.n_ancilla)
            .map(|k| expect_z_unchecked(state.amplitudes(), self.config.ancilla_qubit(k)))
            .collect()
    }

    pub fn readout_real(&self, amps: &[f64]) -> Vec<f64> {
        (0..self.config.n_ancilla)
            .map(|k| real::expect_z(amps, self.config.ancilla_qubit(k)))
            .collect()
    }

    /// Ancilla expectations for an already standardized input.
    pub fn forward_standardized(&self, xs: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.readout_real(&self.state_real(xs, theta)?))
    }

    /// Ancilla expectations for a raw feature vector.
    pub fn forward(&self, x: &[f64], theta: &[f64], stats: &StandardizationStats) -> Result<Vec<f64>> {
        self.forward_standardized(&standardize(x, stats)?, theta)
    }

    pub fn predict(&self, x: &[f64], theta: &[f64], stats: &StandardizationStats) -> Result<usize> {
        Ok(argmax(&predict_proba(&self.forward(x, theta, stats)?)))
    }
}

/// Everything needed to rebuild a trained classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub stats: StandardizationStats,
    pub theta: Vec<f64>,
    pub layer_map: Vec<LayerBlock>,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, stats: StandardizationStats, theta: Vec<f64>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            layer_map: config.layer_map(),
            config,
            stats,
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let load_err = |message: String| Error::Load { what: "checkpoint".into(), message };
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(load_err(format!(
                "format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.config.validate().map_err(|e| load_err(e.to_string()))?;
        if self.theta.len() != self.config.n_params() {
            return Err(load_err(format!(
                "{} angles stored, config implies P = {}",
                self.theta.len(),
                self.config.n_params()
            )));
        }
        if self.layer_map != self.config.layer_map() {
            return Err(load_err("layer map does not match config".into()));
        }
        let s = &self.stats;
        let d = self.config.n_data;
        if s.mean.len() != d || s.stddev.len() != d || s.max_abs.len() != d || s.degenerate.len() != d {
            return Err(load_err(format!("standardizer dimension differs from {d} data qubits")));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = read_json(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn model(&self) -> Result<QnnModel> {
        QnnModel::new(self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::run_circuit;

    #[test]
    fn parameter_count_small_example() {
        let cfg = ModelConfig::new(2, 1, 1, 0);
        let c = build_variational(&cfg).unwrap();
        let kinds: Vec<_> = c.ops.iter().map(|g| g.kind).collect();
        use crate::qsim::GateKind::*;
        assert_eq!(kinds, vec![Ry, Ry, Ry, CRy, CRy, CRy, Ry, Ry, Ry, CRy, CRy]);
        assert_eq!(cfg.n_params(), 11);
        assert_eq!(c.n_params(), 11);
        c.validate().unwrap();
        // ring closes on qubit 0, DEA drives the single ancilla from both data qubits
        assert_eq!((c.ops[5].control, c.ops[5].target), (Some(2), 0));
        assert_eq!((c.ops[9].control, c.ops[9].target), (Some(0), 2));
        assert_eq!((c.ops[10].control, c.ops[10].target), (Some(1), 2));
    }

    #[test]
    fn layers_stack() {
        let one = build_variational(&ModelConfig::new(2, 1, 1, 0)).unwrap();
        let two = build_variational(&ModelConfig::new(2, 1, 2, 0)).unwrap();
        assert_eq!(two.ops.len(), 2 * one.ops.len());
        assert_eq!(two.n_params(), 22);
    }

    #[test]
    fn seven_class_parameter_counts() {
        assert_eq!(ModelConfig::new(9, 7, 1, 0).n_params(), 57);
        let cfg = ModelConfig::new(9, 7, 2, 0);
        assert_eq!(cfg.n_params(), 114);
        assert_eq!(build_variational(&cfg).unwrap().trainable_gate_count(), 114);
    }

    #[test]
    fn dea_wiring_wraps_over_ancillas() {
        let cfg = ModelConfig::new(9, 7, 1, 0);
        let c = build_variational(&cfg).unwrap();
        let dea: Vec<_> = c.ops[c.ops.len() - 9..].iter().map(|g| (g.control.unwrap(), g.target)).collect();
        assert_eq!(dea[0], (0, 9));
        assert_eq!(dea[6], (6, 15));
        assert_eq!(dea[7], (7, 9));
        assert_eq!(dea[8], (8, 10));
    }

    #[test]
    fn standardizer_fit() {
        let rows = vec![vec![0.0, 5.0, 1.0], vec![2.0, 5.0, -1.0]];
        let s = fit_standardizer(&rows).unwrap();
        assert_eq!(s.mean, vec![1.0, 5.0, 0.0]);
        assert_eq!(s.stddev, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.degenerate, vec![false, true, false]);
        assert!(fit_standardizer(&rows[..1]).is_err());

        let z: Vec<Vec<f64>> = [-1.5, -0.5, 0.5, 1.5]
            .iter()
            .map(|v| vec![v / 1.118_033_988_749_895])
            .collect();
        let s = fit_standardizer(&z).unwrap();
        assert!(s.mean[0].abs() < 1e-12);
        assert!((s.stddev[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_contract() {
        let rows = vec![vec![0.0, 10.0], vec![1.0, 30.0], vec![5.0, 20.0]];
        let s = fit_standardizer(&rows).unwrap();
        let hi = standardize(&rows[2], &s).unwrap();
        assert!((hi[0] - 1.0).abs() < 1e-15);
        let mean = standardize(&s.mean.clone(), &s).unwrap();
        assert_eq!(mean, vec![0.0, 0.0]);
        let out = standardize(&[1e9, -1e9], &s).unwrap();
        assert_eq!(out, vec![1.0, -1.0]);
        for r in &rows {
            assert!(standardize(r, &s).unwrap().iter().all(|v| v.abs() <= 1.0));
        }
        assert!(standardize(&[1.0], &s).is_err());
    }

    #[test]
    fn zero_input_encodes_equal_superposition() {
        let model = QnnModel::new(ModelConfig::new(3, 2, 1, 0)).unwrap();
        let s = model.encode(&[0.0; 3]).unwrap();
        for q in 0..3 {
            assert!(s.expect_z(q).unwrap().abs() < 1e-12);
        }
        for q in 3..5 {
            assert!((s.expect_z(q).unwrap() - 1.0).abs() < 1e-12);
        }
        let c = build_encoding(&[1.0], 1).unwrap();
        assert!((c.ops[1].theta.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(build_encoding(&[1.5], 1).is_err());
        assert!(model.encode(&[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn product_encoding_matches_gate_encoding() {
        let model = QnnModel::new(ModelConfig::new(3, 2, 1, 0)).unwrap();
        let xs = [0.3, -0.9, 1.0];
        let direct = model.encode(&xs).unwrap();
        let gates = run_circuit(&build_encoding(&xs, 5).unwrap(), &[]).unwrap();
        for (a, b) in direct.amplitudes().iter().zip(gates.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_feature_encoding_matches_two_by_two_product() {
        for x in [-1.0, -0.4, 0.0, 0.25, 0.8] {
            let phi: f64 = f64::asin(x);
            let (s, c) = (phi / 2.0).sin_cos();
            let r = std::f64::consts::FRAC_1_SQRT_2;
            // Ry(phi) * H * |0> = Ry(phi) * (r, r)
            let expected = (c * r - s * r, s * r + c * r);
            let state = run_circuit(&build_encoding(&[x], 1).unwrap(), &[]).unwrap();
            assert!((state.amplitudes()[0].re - expected.0).abs() < 1e-12);
            assert!((state.amplitudes()[1].re - expected.1).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_angles_leave_ancillas_at_plus_one() {
        let cfg = ModelConfig::new(4, 3, 2, 0);
        let model = QnnModel::new(cfg).unwrap();
        let theta = ParameterSet::zeros(&cfg);
        for xs in [[0.1, -0.5, 0.9, 0.0], [1.0, 1.0, -1.0, 0.3]] {
            let e = model.forward_standardized(&xs, &theta.values).unwrap();
            assert!(e.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn softmax_cases() {
        let p = predict_proba(&[0.2; 5]);
        assert!(p.iter().all(|v| (v - 0.2).abs() < 1e-15));
        let p = predict_proba(&[1.0, -1.0]);
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0 / e)).abs() < 1e-15);
        assert!((p[0] - 0.8808).abs() < 1e-4 && (p[1] - 0.1192).abs() < 1e-4);
        let shifted = predict_proba(&[4.0, 2.0]);
        assert!((shifted[0] - p[0]).abs() < 1e-12);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
    }

    #[test]
    fn init_params_are_small_and_seeded() {
        let cfg = ModelConfig::new(9, 7, 2, 42);
        let a = ParameterSet::init(&cfg);
        assert_eq!(a.len(), 114);
        assert!(a.values.iter().all(|v| v.abs() <= INIT_ANGLE_RANGE));
        assert_eq!(a, ParameterSet::init(&cfg));
        assert_ne!(a, ParameterSet::init(&ModelConfig { seed: 43, ..cfg }));
    }

    #[test]
    fn config_limits() {
        assert!(ModelConfig::new(9, 16, 1, 0).validate().is_err());
        assert!(ModelConfig::new(9, 7, 0, 0).validate().is_err());
        assert!(ModelConfig::new(9, 10, 2, 0).validate().is_ok());
    }

    #[test]
    fn checkpoint_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let cfg = ModelConfig::new(2, 2, 1, 0);
        let stats = fit_standardizer(&[vec![0.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let ck = Checkpoint::new(cfg, stats, ParameterSet::init(&cfg).values);
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);

        let mut bad = ck.clone();
        bad.format_version = 99;
        bad.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Load { .. })));

        let mut bad = ck.clone();
        bad.theta.pop();
        assert!(bad.validate().is_err());
    }
}
