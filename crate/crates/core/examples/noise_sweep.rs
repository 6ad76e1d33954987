//! Retrains and tests the seven-class model with the waveforms corrupted at each SNR.
//!
//! `cargo run --example noise_sweep -- [per_class] [epochs] [lr]`

use pqdvqc::experiment::{run_sweep, snr_label, sweep_table_csv, ExperimentId, ExperimentSpec};

fn main() -> pqdvqc::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut spec = ExperimentSpec::preset(ExperimentId::NoiseSweep, 0);
    spec.per_class = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    spec.train.epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    spec.train.lr = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let points = run_sweep(&spec, |p, _| {
        println!("{:>6}: best {:.4}  final {:.4}", snr_label(p.snr_db), p.best_test_acc, p.final_test_acc)
    })?;
    println!("\n{}", String::from_utf8_lossy(&sweep_table_csv(&points, &spec.class_names())?));
    Ok(())
}
