//! S-transform of a voltage sag: the fundamental track dips inside the event
//! window, and the nine features summarise the whole record.
//!
//! `cargo run --example stransform_features -- [class code 0-10] [seed]`

use pqdvqc::features::{extract_features, harmonic_tracks, ExtractionSettings};
use pqdvqc::signal::{sample_rng, synthesize, DisturbanceClass, SignalSpec};
use pqdvqc::stransform::stransform;

fn main() -> pqdvqc::Result<()> {
    let mut args = std::env::args().skip(1);
    let code: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let class = DisturbanceClass::from_code(code).unwrap_or(DisturbanceClass::Sag);
    let spec = SignalSpec::with_seed(seed);
    let w = synthesize(class, &spec, &mut sample_rng(seed, 0))?;
    println!("{} ({}) params {}", class, class.name(), serde_json::to_string(&w.params).unwrap_or_default());

    let s = stransform(&w.samples, spec.sample_rate_hz)?;
    println!("S-matrix {} rows x {} columns, row spacing {} Hz", s.n_rows(), s.n_cols(), s.row_freq_hz(1));

    let settings = ExtractionSettings::default();
    let tracks = harmonic_tracks(&w.samples, spec.sample_rate_hz, &settings, 7)?;
    println!("\n   t (s)   A1 (p.u.)   A3      A5      A7");
    for m in (0..spec.n_samples()).step_by(32) {
        println!(
            "  {:6.3}   {:7.4}   {:6.4}  {:6.4}  {:6.4}",
            spec.time(m),
            tracks[0].amplitudes[m],
            tracks[2].amplitudes[m],
            tracks[4].amplitudes[m],
            tracks[6].amplitudes[m]
        );
    }

    let f = extract_features(&w, &settings)?;
    println!();
    for (i, v) in f.as_slice().iter().enumerate() {
        println!("  F{} = {v:.6}", i + 1);
    }
    Ok(())
}
