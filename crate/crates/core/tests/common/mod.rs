//! Dense-matrix reference simulator built from Kronecker products.
//!
//! Qubit 0 is the least-significant bit, so the operator for a gate on qubit `q`
//! of an `n`-qubit register is `M_{n-1} ⊗ … ⊗ M_1 ⊗ M_0` with `M_q` the gate.

#![allow(dead_code)]

use num_complex::Complex64;
use pqdvqc::qsim::GateKind;
use pqdvqc::{Circuit, GateOp};
use rand::Rng;

pub type Mat = Vec<Vec<Complex64>>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity2() -> [[Complex64; 2]; 2] {
    [[c(1.0), c(0.0)], [c(0.0), c(1.0)]]
}

pub fn ry2(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co), c(-s)], [c(s), c(co)]]
}

pub fn h2() -> [[Complex64; 2]; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [[c(r), c(r)], [c(r), c(-r)]]
}

fn proj(bit: usize) -> [[Complex64; 2]; 2] {
    let mut m = [[c(0.0); 2]; 2];
    m[bit][bit] = c(1.0);
    m
}

fn kron(a: &Mat, b: &[[Complex64; 2]; 2]) -> Mat {
    let n = a.len();
    let mut out = vec![vec![c(0.0); 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            for (k, row) in b.iter().enumerate() {
                for (l, &v) in row.iter().enumerate() {
                    out[2 * i + k][2 * j + l] = a[i][j] * v;
                }
            }
        }
    }
    out
}

/// `factors[q]` acts on qubit `q`.
pub fn kron_all(factors: &[[[Complex64; 2]; 2]]) -> Mat {
    let mut m: Mat = vec![vec![c(1.0)]];
    for f in factors.iter().rev() {
        m = kron(&m, f);
    }
    m
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn gate_matrix(op: &GateOp, n: usize, thetas: &[f64]) -> Mat {
    let theta = match op.kind {
        GateKind::H => 0.0,
        _ => op.angle(thetas).unwrap(),
    };
    let mut factors = vec![identity2(); n];
    match op.kind {
        GateKind::H => {
            factors[op.target] = h2();
            kron_all(&factors)
        }
        GateKind::Ry => {
            factors[op.target] = ry2(theta);
            kron_all(&factors)
        }
        GateKind::CRy => {
            let ctl = op.control.unwrap();
            factors[ctl] = proj(0);
            let off = kron_all(&factors);
            factors[ctl] = proj(1);
            factors[op.target] = ry2(theta);
            add(&off, &kron_all(&factors))
        }
    }
}

pub fn matvec(m: &Mat, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Whole-circuit unitary, assembled gate by gate.
pub fn circuit_unitary(circuit: &Circuit, thetas: &[f64]) -> Mat {
    let dim = 1usize << circuit.n_qubits;
    let mut u: Mat = (0..dim)
        .map(|i| (0..dim).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for op in &circuit.ops {
        u = matmul(&gate_matrix(op, circuit.n_qubits, thetas), &u);
    }
    u
}

pub fn basis_zero(n: usize) -> Vec<Complex64> {
    let mut v = vec![c(0.0); 1 << n];
    v[0] = c(1.0);
    v
}

pub fn expect_z_dense(v: &[Complex64], q: usize) -> f64 {
    v.iter()
        .enumerate()
        .map(|(i, a)| if i >> q & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Random H / Ry / CRy sequence with fixed angles.
pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, n_gates: usize) -> Circuit {
    let mut circuit = Circuit::new(n);
    for _ in 0..n_gates {
        let target = rng.random_range(0..n);
        let theta = rng.random_range(-std::f64::consts::TAU..std::f64::consts::TAU);
        let pick = if n == 1 { rng.random_range(0..2) } else { rng.random_range(0..3) };
        let op = match pick {
            0 => GateOp::h(target),
            1 => GateOp::ry(target, theta),
            _ => {
                let mut control = rng.random_range(0..n - 1);
                if control >= target {
                    control += 1;
                }
                GateOp::cry(control, target, theta)
            }
        };
        circuit.push(op);
    }
    circuit
}
