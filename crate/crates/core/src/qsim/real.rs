//! Real-amplitude kernels.
//!
//! H, Ry and CRy have real matrices, so a circuit built from them maps a real
//! input state to a real output state. The model uses these kernels for
//! training and inference; they mirror the complex ones in the parent module.

#[inline(always)]
fn rot(a: &mut f64, b: &mut f64, c: f64, s: f64) {
    let (x, y) = (*a, *b);
    *a = c * x - s * y;
    *b = s * x + c * y;
}

#[inline(always)]
fn rot_run(lo: &mut [f64], hi: &mut [f64], c: f64, s: f64) {
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        rot(a, b, c, s);
    }
}

/// Rotates every `(bit q = 0, bit q = 1)` pair by `[[c, -s], [s, c]]`.
fn rotate(amps: &mut [f64], q: usize, c: f64, s: f64) {
    match q {
        0 => {
            let (quads, rest) = amps.as_chunks_mut::<4>();
            for [a0, b0, a1, b1] in quads {
                rot(a0, b0, c, s);
                rot(a1, b1, c, s);
            }
            if let [a, b] = rest {
                rot(a, b, c, s);
            }
        }
        1 => {
            for p in amps.as_chunks_mut::<4>().0 {
                let (lo, hi) = p.split_at_mut(2);
                rot_run(lo, hi, c, s);
            }
        }
        _ => {
            let stride = 1usize << q;
            for chunk in amps.chunks_exact_mut(2 * stride) {
                let (lo, hi) = chunk.split_at_mut(stride);
                rot_run(lo, hi, c, s);
            }
        }
    }
}

/// [`rotate`] restricted to basis states whose `control` bit is 1.
fn rotate_controlled(amps: &mut [f64], control: usize, target: usize, c: f64, s: f64) {
    let cs = 1usize << control;
    if control > target {
        for blk in amps.chunks_exact_mut(2 * cs) {
            rotate(&mut blk[cs..], target, c, s);
        }
        return;
    }
    let ts = 1usize << target;
    for chunk in amps.chunks_exact_mut(2 * ts) {
        let (lo, hi) = chunk.split_at_mut(ts);
        match cs {
            1 => {
                for (l, h) in lo.as_chunks_mut::<2>().0.iter_mut().zip(hi.as_chunks_mut::<2>().0) {
                    rot(&mut l[1], &mut h[1], c, s);
                }
            }
            _ => {
                for (l, h) in lo.chunks_exact_mut(2 * cs).zip(hi.chunks_exact_mut(2 * cs)) {
                    rot_run(&mut l[cs..], &mut h[cs..], c, s);
                }
            }
        }
    }
}

// Reverse-sweep kernels. For each pair, psi and lambda are rotated back by the
// gate and the derivative overlap is accumulated from the rewound values:
// <lambda| dRy/dtheta |psi_before> = 1/2 <lambda_before| Ry(pi) |psi_before>.

#[inline(always)]
fn unstep(a: &mut f64, b: &mut f64, u: &mut f64, v: &mut f64, c: f64, s: f64) -> f64 {
    let x = c * *a + s * *b;
    let y = c * *b - s * *a;
    let l0 = c * *u + s * *v;
    let l1 = c * *v - s * *u;
    *a = x;
    *b = y;
    *u = l0;
    *v = l1;
    l1 * x - l0 * y
}

#[inline(always)]
fn unstep_run(p0: &mut [f64], p1: &mut [f64], l0: &mut [f64], l1: &mut [f64], c: f64, s: f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let n = p0.len().min(p1.len()).min(l0.len()).min(l1.len());
    let (p0, p1, l0, l1) = (&mut p0[..n], &mut p1[..n], &mut l0[..n], &mut l1[..n]);
    let (a4, ar) = p0.as_chunks_mut::<4>();
    let (b4, br) = p1.as_chunks_mut::<4>();
    let (u4, ur) = l0.as_chunks_mut::<4>();
    let (v4, vr) = l1.as_chunks_mut::<4>();
    for (((a, b), u), v) in a4.iter_mut().zip(b4.iter_mut()).zip(u4.iter_mut()).zip(v4.iter_mut()) {
        for k in 0..4 {
            acc[k] += unstep(&mut a[k], &mut b[k], &mut u[k], &mut v[k], c, s);
        }
    }
    for (((a, b), u), v) in ar.iter_mut().zip(br.iter_mut()).zip(ur.iter_mut()).zip(vr.iter_mut()) {
        acc[0] += unstep(a, b, u, v, c, s);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

fn unrotate_pair(psi: &mut [f64], lambda: &mut [f64], q: usize, c: f64, s: f64) -> f64 {
    let mut acc = 0.0;
    match q {
        0 => {
            let mut acc2 = [0.0f64; 2];
            let (pq, pr) = psi.as_chunks_mut::<4>();
            let (lq, lr) = lambda.as_chunks_mut::<4>();
            for ([a0, b0, a1, b1], [u0, v0, u1, v1]) in pq.iter_mut().zip(lq) {
                acc2[0] += unstep(a0, b0, u0, v0, c, s);
                acc2[1] += unstep(a1, b1, u1, v1, c, s);
            }
            if let ([a, b], [u, v]) = (pr, lr) {
                acc2[0] += unstep(a, b, u, v, c, s);
            }
            acc += acc2[0] + acc2[1];
        }
        1 => {
            let mut acc2 = [0.0f64; 2];
            for (p, l) in psi.as_chunks_mut::<4>().0.iter_mut().zip(lambda.as_chunks_mut::<4>().0) {
                let [a0, a1, b0, b1] = p;
                let [u0, u1, v0, v1] = l;
                acc2[0] += unstep(a0, b0, u0, v0, c, s);
                acc2[1] += unstep(a1, b1, u1, v1, c, s);
            }
            acc += acc2[0] + acc2[1];
        }
        _ => {
            let stride = 1usize << q;
            for (pc, lc) in psi.chunks_exact_mut(2 * stride).zip(lambda.chunks_exact_mut(2 * stride)) {
                let (p0, p1) = pc.split_at_mut(stride);
                let (l0, l1) = lc.split_at_mut(stride);
                acc += unstep_run(p0, p1, l0, l1, c, s);
            }
        }
    }
    acc
}

fn unrotate_pair_controlled(psi: &mut [f64], lambda: &mut [f64], control: usize, target: usize, c: f64, s: f64) -> f64 {
    let cs = 1usize << control;
    let mut acc = 0.0;
    if control > target {
        for (pb, lb) in psi.chunks_exact_mut(2 * cs).zip(lambda.chunks_exact_mut(2 * cs)) {
            acc += unrotate_pair(&mut pb[cs..], &mut lb[cs..], target, c, s);
        }
        return acc;
    }
    let ts = 1usize << target;
    for (pc, lc) in psi.chunks_exact_mut(2 * ts).zip(lambda.chunks_exact_mut(2 * ts)) {
        let (p0, p1) = pc.split_at_mut(ts);
        let (l0, l1) = lc.split_at_mut(ts);
        match cs {
            1 => {
                let it = p0.as_chunks_mut::<2>().0.iter_mut().zip(p1.as_chunks_mut::<2>().0);
                for ((a, b), (u, v)) in it.zip(l0.as_chunks_mut::<2>().0.iter_mut().zip(l1.as_chunks_mut::<2>().0)) {
                    acc += unstep(&mut a[1], &mut b[1], &mut u[1], &mut v[1], c, s);
                }
            }
            _ => {
                let it = p0.chunks_exact_mut(2 * cs).zip(p1.chunks_exact_mut(2 * cs));
                for ((a, b), (u, v)) in it.zip(l0.chunks_exact_mut(2 * cs).zip(l1.chunks_exact_mut(2 * cs))) {
                    acc += unstep_run(&mut a[cs..], &mut b[cs..], &mut u[cs..], &mut v[cs..], c, s);
                }
            }
        }
    }
    acc
}

/// Tensor product of single-qubit real states `(amp0, amp1)`, qubit 0 first.
pub fn product(factors: &[(f64, f64)]) -> Vec<f64> {
    let mut amps = Vec::with_capacity(1 << factors.len());
    amps.push(1.0);
    for &(a0, a1) in factors {
        let n = amps.len();
        amps.extend_from_within(..);
        amps[..n].iter_mut().for_each(|x| *x *= a0);
        amps[n..].iter_mut().for_each(|x| *x *= a1);
    }
    amps
}

pub fn ry(amps: &mut [f64], q: usize, theta: f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    rotate(amps, q, c, s);
}

pub fn cry(amps: &mut [f64], control: usize, target: usize, theta: f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    rotate_controlled(amps, control, target, c, s);
}

pub fn h(amps: &mut [f64], q: usize) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let stride = 1usize << q;
    for chunk in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = chunk.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = r * (x + y);
            *b = r * (x - y);
        }
    }
}

pub fn expect_z(amps: &[f64], q: usize) -> f64 {
    let stride = 1usize << q;
    let mut acc = 0.0;
    for chunk in amps.chunks_exact(2 * stride) {
        let (lo, hi) = chunk.split_at(stride);
        acc += lo.iter().map(|a| a * a).sum::<f64>() - hi.iter().map(|a| a * a).sum::<f64>();
    }
    acc
}

/// One step of the reverse sweep for an `Ry(theta)` gate, in a single pass.
///
/// `psi` holds the state after the gate and `lambda` the back-propagated
/// co-state. Both are rotated back through the gate; the return value is
/// `<lambda| dRy/dtheta |psi_before>`.
pub fn ry_adjoint_step(psi: &mut [f64], lambda: &mut [f64], q: usize, theta: f64) -> f64 {
    let (s, c) = (theta / 2.0).sin_cos();
    0.5 * unrotate_pair(psi, lambda, q, c, s)
}

/// [`ry_adjoint_step`] for `CRy`; the control-0 block is untouched and contributes nothing.
pub fn cry_adjoint_step(psi: &mut [f64], lambda: &mut [f64], control: usize, target: usize, theta: f64) -> f64 {
    let (s, c) = (theta / 2.0).sin_cos();
    0.5 * unrotate_pair_controlled(psi, lambda, control, target, c, s)
}

/// Applies the gates of `circuit` to real amplitudes.
pub fn apply(circuit: &super::Circuit, amps: &mut [f64], theta: &[f64]) -> super::Result<()> {
    check_len(circuit, amps)?;
    for g in &circuit.ops {
        let (s, c) = (g.angle(theta)? / 2.0).sin_cos();
        match g.kind {
            super::GateKind::H => h(amps, g.target),
            super::GateKind::Ry => rotate(amps, g.target, c, s),
            super::GateKind::CRy => rotate_controlled(amps, g.control.unwrap_or_default(), g.target, c, s),
        }
    }
    Ok(())
}

/// Reverse sweep: `psi` is the output state and `lambda` the co-state at the
/// output. On return both are rewound to the input and `grad[param_id]`
/// holds `2 <lambda| dG/dtheta |psi>` for every trainable gate.
pub fn adjoint(
    circuit: &super::Circuit,
    psi: &mut [f64],
    lambda: &mut [f64],
    theta: &[f64],
    grad: &mut [f64],
) -> super::Result<()> {
    check_len(circuit, psi)?;
    check_len(circuit, lambda)?;
    for g in circuit.ops.iter().rev() {
        let (s, c) = (g.angle(theta)? / 2.0).sin_cos();
        let d = match g.kind {
            super::GateKind::H => {
                h(psi, g.target);
                h(lambda, g.target);
                0.0
            }
            super::GateKind::Ry => unrotate_pair(psi, lambda, g.target, c, s),
            super::GateKind::CRy => unrotate_pair_controlled(psi, lambda, g.control.unwrap_or_default(), g.target, c, s),
        };
        if let Some(id) = g.param_id {
            grad[id] = d;
        }
    }
    Ok(())
}

fn check_len(circuit: &super::Circuit, amps: &[f64]) -> super::Result<()> {
    if amps.len() != 1usize << circuit.n_qubits {
        return Err(super::Error::Argument(format!(
            "{} amplitudes for a {}-qubit circuit",
            amps.len(),
            circuit.n_qubits
        )));
    }
    Ok(())
}
