//! Dense statevector simulator for the `{H, Ry, CRy}` gate set.
//!
//! Qubit 0 is the least-significant bit of the basis index. `Ry(theta)` is
//! `[[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]]`, and
//! `CRy(theta)` applies it to the target on basis states whose control bit is 1.

pub mod real;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    Ry,
    CRy,
}

/// One gate. Rotations carry either a fixed `theta` or a `param_id` resolved at run time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_id: Option<usize>,
}

impl GateOp {
    pub fn h(target: usize) -> Self {
        Self { kind: GateKind::H, target, control: None, theta: None, param_id: None }
    }

    pub fn ry(target: usize, theta: f64) -> Self {
        Self { kind: GateKind::Ry, target, control: None, theta: Some(theta), param_id: None }
    }

    pub fn cry(control: usize, target: usize, theta: f64) -> Self {
        Self { kind: GateKind::CRy, target, control: Some(control), theta: Some(theta), param_id: None }
    }

    pub fn ry_param(target: usize, param_id: usize) -> Self {
        Self { kind: GateKind::Ry, target, control: None, theta: None, param_id: Some(param_id) }
    }

    pub fn cry_param(control: usize, target: usize, param_id: usize) -> Self {
        Self { kind: GateKind::CRy, target, control: Some(control), theta: None, param_id: Some(param_id) }
    }

    pub fn is_trainable(&self) -> bool {
        self.param_id.is_some()
    }

    /// Angle of the gate, looking trainable ones up in `thetas`.
    pub fn angle(&self, thetas: &[f64]) -> Result<f64> {
        match (self.param_id, self.theta) {
            (Some(id), _) => thetas.get(id).copied().ok_or_else(|| {
                Error::Argument(format!("no value for parameter {id} ({} supplied)", thetas.len()))
            }),
            (None, Some(t)) => Ok(t),
            (None, None) if self.kind == GateKind::H => Ok(0.0),
            (None, None) => Err(Error::Argument(format!("{:?} gate without an angle", self.kind))),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::Argument(format!(
                "target qubit {} out of range for {n_qubits} qubits",
                self.target
            )));
        }
        match (self.kind, self.control) {
            (GateKind::CRy, Some(c)) if c >= n_qubits => Err(Error::Argument(format!(
                "control qubit {c} out of range for {n_qubits} qubits"
            ))),
            (GateKind::CRy, Some(c)) if c == self.target => {
                Err(Error::Argument(format!("control and target are both qubit {c}")))
            }
            (GateKind::CRy, None) => Err(Error::Argument("CRy without a control qubit".into())),
            (GateKind::H | GateKind::Ry, Some(_)) => {
                Err(Error::Argument(format!("{:?} does not take a control qubit", self.kind)))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_capacity(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "{n} qubits requested; supported range is 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn init_zero(n: usize) -> Result<Self> {
        check_capacity(n)?;
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::Argument(format!("{len} amplitudes is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        check_capacity(n)?;
        Ok(Self { n_qubits: n, amps })
    }

    /// Tensor product of single-qubit states, `factors[q] = (amp of |0>, amp of |1>)` for qubit `q`.
    pub fn product(factors: &[(f64, f64)]) -> Result<Self> {
        check_capacity(factors.len())?;
        let mut amps = Vec::with_capacity(1 << factors.len());
        amps.push(Complex64::new(1.0, 0.0));
        for &(a0, a1) in factors {
            let len = amps.len();
            amps.extend_from_within(..len);
            for (lo, hi) in (0..len).zip(len..2 * len) {
                amps[hi] = amps[lo] * a1;
                amps[lo] *= a0;
            }
        }
        Ok(Self { n_qubits: factors.len(), amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Argument(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    fn check_pair(&self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Argument(format!("control and target are both qubit {control}")));
        }
        Ok(())
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for_each_pair(&mut self.amps, q, |a, b| {
            let (x, y) = (*a, *b);
            *a = (x + y) * r;
            *b = (x - y) * r;
        });
        Ok(())
    }

    pub fn apply_ry(&mut self, q: usize, theta: f64) -> Result<()> {
        self.check_qubit(q)?;
        ry_kernel(&mut self.amps, q, theta);
        Ok(())
    }

    pub fn apply_cry(&mut self, control: usize, target: usize, theta: f64) -> Result<()> {
        self.check_pair(control, target)?;
        cry_kernel(&mut self.amps, control, target, theta);
        Ok(())
    }

    /// Applies a gate with a resolved angle. Trainable gates must carry `theta`.
    pub fn apply_gate(&mut self, g: &GateOp) -> Result<()> {
        let theta = g.angle(&[])?;
        self.apply_with_angle(g, theta)
    }

    pub(crate) fn apply_with_angle(&mut self, g: &GateOp, theta: f64) -> Result<()> {
        g.validate(self.n_qubits)?;
        match g.kind {
            GateKind::H => self.apply_h(g.target),
            GateKind::Ry => self.apply_ry(g.target, theta),
            GateKind::CRy => self.apply_cry(g.control.unwrap_or(usize::MAX), g.target, theta),
        }
    }

    /// Applies the inverse of a gate (`H` is self-inverse, rotations negate the angle).
    pub(crate) fn apply_inverse(&mut self, g: &GateOp, theta: f64) -> Result<()> {
        self.apply_with_angle(g, -theta)
    }

    /// `<Z_q> = sum_b (+1 if bit q of b is 0 else -1) |amp_b|^2`.
    pub fn expect_z(&self, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        Ok(expect_z_unchecked(&self.amps, q))
    }

    /// Probability of reading 1 on qubit `q`.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        Ok((1.0 - self.expect_z(q)?) / 2.0)
    }

    /// Estimates `<Z_q>` from `shots` projective measurements.
    pub fn sample_expect_z<R: Rng + ?Sized>(&self, q: usize, shots: u64, rng: &mut R) -> Result<f64> {
        if shots == 0 {
            return Err(Error::Argument("shot count must be positive".into()));
        }
        let p1 = self.prob_one(q)?.clamp(0.0, 1.0);
        let ones = Binomial::new(shots, p1)
            .map_err(|e| Error::Argument(e.to_string()))?
            .sample(rng);
        Ok((shots as f64 - 2.0 * ones as f64) / shots as f64)
    }
}

pub(crate) fn expect_z_unchecked(amps: &[Complex64], q: usize) -> f64 {
    let stride = 1usize << q;
    let mut acc = 0.0;
    for chunk in amps.chunks_exact(2 * stride) {
        let (lo, hi) = chunk.split_at(stride);
        acc += lo.iter().map(|a| a.norm_sqr()).sum::<f64>();
        acc -= hi.iter().map(|a| a.norm_sqr()).sum::<f64>();
    }
    acc
}

#[inline]
fn for_each_pair(amps: &mut [Complex64], q: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
    let stride = 1usize << q;
    for chunk in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = chunk.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            f(a, b);
        }
    }
}

/// Visits the target pairs `(bit t = 0, bit t = 1)` restricted to control bit `c` = 1.
#[inline]
fn for_each_controlled_pair(
    amps: &mut [Complex64],
    c: usize,
    t: usize,
    mut f: impl FnMut(&mut Complex64, &mut Complex64),
) {
    let ts = 1usize << t;
    let cs = 1usize << c;
    if c > t {
        // bit c is constant across each 2^(t+1) chunk
        for (k, chunk) in amps.chunks_exact_mut(2 * ts).enumerate() {
            if (k * 2 * ts) & cs == 0 {
                continue;
            }
            let (lo, hi) = chunk.split_at_mut(ts);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    } else {
        for chunk in amps.chunks_exact_mut(2 * ts) {
            let (lo, hi) = chunk.split_at_mut(ts);
            for (l, h) in lo.chunks_exact_mut(2 * cs).zip(hi.chunks_exact_mut(2 * cs)) {
                for (a, b) in l[cs..].iter_mut().zip(h[cs..].iter_mut()) {
                    f(a, b);
                }
            }
        }
    }
}

#[inline]
fn rotate(a: &mut Complex64, b: &mut Complex64, c: f64, s: f64) {
    let (x, y) = (*a, *b);
    *a = x * c - y * s;
    *b = x * s + y * c;
}

pub(crate) fn ry_kernel(amps: &mut [Complex64], q: usize, theta: f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    for_each_pair(amps, q, |a, b| rotate(a, b, c, s));
}

pub(crate) fn cry_kernel(amps: &mut [Complex64], control: usize, target: usize, theta: f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    for_each_controlled_pair(amps, control, target, |a, b| rotate(a, b, c, s));
}

#[inline]
fn re_dot(l: Complex64, x: Complex64) -> f64 {
    l.re * x.re + l.im * x.im
}

/// `Re <lambda| dRy(theta)/dtheta |psi>` on qubit `q`.
pub(crate) fn ry_derivative_overlap(lambda: &[Complex64], psi: &[Complex64], q: usize, theta: f64) -> f64 {
    let (s, c) = (theta / 2.0).sin_cos();
    let stride = 1usize << q;
    let mut acc = 0.0;
    for (lc, pc) in lambda.chunks_exact(2 * stride).zip(psi.chunks_exact(2 * stride)) {
        let (l0, l1) = lc.split_at(stride);
        let (p0, p1) = pc.split_at(stride);
        for i in 0..stride {
            let (a, b) = (p0[i], p1[i]);
            acc += re_dot(l0[i], -(a * s) - b * c) + re_dot(l1[i], a * c - b * s);
        }
    }
    0.5 * acc
}

/// `Re <lambda| dCRy(theta)/dtheta |psi>`; the derivative vanishes on the control-0 block.
pub(crate) fn cry_derivative_overlap(
    lambda: &[Complex64],
    psi: &[Complex64],
    control: usize,
    target: usize,
    theta: f64,
) -> f64 {
    let (s, c) = (theta / 2.0).sin_cos();
    let ts = 1usize << target;
    let cs = 1usize << control;
    let mut acc = 0.0;
    let mut term = |l0: Complex64, l1: Complex64, a: Complex64, b: Complex64| {
        acc += re_dot(l0, -(a * s) - b * c) + re_dot(l1, a * c - b * s);
    };
    if control > target {
        for (k, (lc, pc)) in lambda.chunks_exact(2 * ts).zip(psi.chunks_exact(2 * ts)).enumerate() {
            if (k * 2 * ts) & cs == 0 {
                continue;
            }
            let (l0, l1) = lc.split_at(ts);
            let (p0, p1) = pc.split_at(ts);
            for i in 0..ts {
                term(l0[i], l1[i], p0[i], p1[i]);
            }
        }
    } else {
        for (lc, pc) in lambda.chunks_exact(2 * ts).zip(psi.chunks_exact(2 * ts)) {
            let (l0, l1) = lc.split_at(ts);
            let (p0, p1) = pc.split_at(ts);
            let mut base = 0;
            while base < ts {
                for i in base + cs..base + 2 * cs {
                    term(l0[i], l1[i], p0[i], p1[i]);
                }
                base += 2 * cs;
            }
        }
    }
    0.5 * acc
}

/// An ordered gate list over `n_qubits`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, ops: Vec::new() }
    }

    pub fn push(&mut self, op: GateOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn extend(&mut self, other: &Circuit) -> &mut Self {
        self.ops.extend(other.ops.iter().cloned());
        self
    }

    /// Number of distinct trainable parameters (`max param_id + 1`).
    pub fn n_params(&self) -> usize {
        self.ops.iter().filter_map(|g| g.param_id).max().map_or(0, |m| m + 1)
    }

    pub fn trainable_gate_count(&self) -> usize {
        self.ops.iter().filter(|g| g.is_trainable()).count()
    }

    /// Checks qubit indices and that parameter ids are unique and contiguous from 0.
    pub fn validate(&self) -> Result<()> {
        check_capacity(self.n_qubits)?;
        let mut seen = vec![false; self.n_params()];
        for g in &self.ops {
            g.validate(self.n_qubits)?;
            if let Some(id) = g.param_id {
                if seen[id] {
                    return Err(Error::Argument(format!("parameter {id} used by more than one gate")));
                }
                seen[id] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Argument(format!("parameter ids skip {missing}")));
        }
        Ok(())
    }

    /// Applies every op to `state` in order.
    pub fn apply_to(&self, state: &mut StateVector, thetas: &[f64]) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Argument(format!(
                "circuit on {} qubits applied to a {}-qubit state",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        if thetas.len() < self.n_params() {
            return Err(Error::Argument(format!(
                "circuit has {} parameters, {} supplied",
                self.n_params(),
                thetas.len()
            )));
        }
        for g in &self.ops {
            state.apply_with_angle(g, g.angle(thetas)?)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.ops)?)
    }

    pub fn from_json(n_qubits: usize, json: &str) -> Result<Self> {
        let ops: Vec<GateOp> = serde_json::from_str(json)?;
        let c = Circuit { n_qubits, ops };
        c.validate()?;
        Ok(c)
    }
}

/// Runs `c` from `|0...0>`.
pub fn run_circuit(c: &Circuit, thetas: &[f64]) -> Result<StateVector> {
    let mut state = StateVector::init_zero(c.n_qubits)?;
    c.apply_to(&mut state, thetas)?;
    Ok(state)
}
