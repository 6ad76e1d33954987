//! One waveform of every disturbance class, with its drawn parameters.
//!
//! `cargo run --example synthesize_waveforms -- [seed] [snr_db]`

use pqdvqc::signal::{add_awgn, mean_power, sample_rng, synthesize, DisturbanceClass, SignalSpec};

fn main() -> pqdvqc::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let snr: Option<f64> = args.next().and_then(|s| s.parse().ok());
    let spec = SignalSpec::with_seed(seed);
    println!(
        "{} samples at {} Hz, {} s, snr {}",
        spec.n_samples(),
        spec.sample_rate_hz,
        spec.duration_s,
        snr.map_or("none".into(), |s| format!("{s} dB"))
    );
    for (i, class) in DisturbanceClass::ALL.into_iter().enumerate() {
        let clean = synthesize(class, &spec, &mut sample_rng(seed, i as u64))?;
        let w = add_awgn(&clean, snr, &mut sample_rng(seed ^ 0x5eed, i as u64))?;
        let peak = w.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!(
            "{:<4} {:<22} peak {:6.3}  rms {:5.3}  {}",
            class.to_string(),
            class.name(),
            peak,
            mean_power(&w.samples).sqrt(),
            serde_json::to_string(&w.params).unwrap_or_default()
        );
    }
    Ok(())
}
