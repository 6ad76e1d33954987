//! Multi-class training on single (D1-D7) or single plus mixed (D1-D10) disturbances.
//!
//! `cargo run --example classify_disturbances -- [single7|mixed10] [per_class] [epochs] [lr]`
//! Expect roughly 12 s per epoch for single7 at 200 per class on one core.
//! The short default run uses a larger step than the preset's 0.01.

use pqdvqc::experiment::{run_in_memory, ExperimentId, ExperimentSpec};

fn main() -> pqdvqc::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: ExperimentId = args.next().unwrap_or_else(|| "single7".into()).parse()?;
    let mut spec = ExperimentSpec::preset(id, 0);
    spec.per_class = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    spec.train.epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(12);
    spec.train.lr = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);
    println!("{id}: {} qubits, P = {}, {} rows", spec.model.n_qubits(), spec.model.n_params(), spec.per_class * spec.classes.len());
    let run = run_in_memory(&spec, None, |r| {
        println!("epoch {:>3}  loss {:.4}  train {:.4}  test {:.4}  {:.1}s", r.epoch, r.train_loss, r.train_acc, r.test_acc, r.seconds)
    })?;
    println!("\nper-class test accuracy");
    for (name, acc) in spec.class_names().iter().zip(&run.eval.per_class_accuracy) {
        println!("  {name:<4} {acc:.3}");
    }
    println!("confusion:");
    for row in &run.eval.confusion {
        println!("  {row:?}");
    }
    Ok(())
}
