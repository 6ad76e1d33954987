//! Parameter-shift and adjoint gradients of the classification loss, checked
//! against central finite differences, with timings.
//!
//! `cargo run --example gradients -- [classes] [layers]`

use std::time::Instant;

use pqdvqc::qnn::{predict_proba, ParameterSet};
use pqdvqc::training::{grad_adjoint, grad_parameter_shift, loss, LossKind};
use pqdvqc::{ModelConfig, QnnModel};

fn main() -> pqdvqc::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let layers: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let model = QnnModel::new(ModelConfig::new(9, k, layers, 3))?;
    let theta = ParameterSet::init(model.config()).values;
    let xs = [0.3, -0.1, 0.8, 0.0, -0.5, 0.2, 0.9, -0.7, 0.4];
    let y = 1;
    println!("{} qubits, P = {}", model.config().n_qubits(), model.n_params());

    let t = Instant::now();
    let adj = grad_adjoint(&model, &xs, y, &theta, LossKind::Cce)?;
    let t_adj = t.elapsed();
    let t = Instant::now();
    let shift = grad_parameter_shift(&model, &xs, y, &theta, LossKind::Cce)?;
    let t_shift = t.elapsed();

    let f = |th: &[f64]| -> pqdvqc::Result<f64> {
        loss(&predict_proba(&model.forward_standardized(&xs, th)?), y, LossKind::Cce)
    };
    let h = 1e-5;
    let mut worst_fd = 0.0f64;
    for i in 0..theta.len().min(20) {
        let mut p = theta.clone();
        let mut m = theta.clone();
        p[i] += h;
        m[i] -= h;
        let fd = (f(&p)? - f(&m)?) / (2.0 * h);
        worst_fd = worst_fd.max((fd - shift.grad[i]).abs());
    }
    let worst_adj = adj.grad.iter().zip(&shift.grad).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    println!("loss {:.6}, expectations {:?}", adj.loss, adj.expectations.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>());
    println!("adjoint          {t_adj:>10.2?}");
    println!("parameter shift  {t_shift:>10.2?}  ({} circuit runs)", 2 * model.n_params());
    println!("max |shift - adjoint|          {worst_adj:.2e}");
    println!("max |shift - finite diff| (20) {worst_fd:.2e}");
    Ok(())
}
