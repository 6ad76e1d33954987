//! Normal vs disturbed detection: 11 qubits, one layer, binary cross-entropy.
//!
//! `cargo run --example detect_disturbances -- [per_class] [epochs] [seed]`
//! The full experiment is 1000 per class and 25 epochs.

use pqdvqc::experiment::{run_in_memory, ExperimentId, ExperimentSpec};

fn main() -> pqdvqc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).and_then(|s| s.parse::<u64>().ok());
    let mut spec = ExperimentSpec::preset(ExperimentId::Detect2, arg(2).unwrap_or(0));
    spec.per_class = arg(0).map_or(250, |n| n as usize);
    spec.train.epochs = arg(1).map_or(10, |n| n as usize);
    println!("P = {}, {} rows", spec.model.n_params(), 2 * spec.per_class);
    let run = run_in_memory(&spec, None, |r| {
        println!("epoch {:>3}  loss {:.4}  train {:.4}  test {:.4}", r.epoch, r.train_loss, r.train_acc, r.test_acc)
    })?;
    let e = &run.eval;
    println!("\nconfusion (rows true, columns predicted; 0 normal, 1 disturbed)");
    for row in &e.confusion {
        println!("  {row:?}");
    }
    println!("best test accuracy {:.4}, final {:.4}", run.outcome.report.best_test_acc, e.accuracy);
    Ok(())
}
