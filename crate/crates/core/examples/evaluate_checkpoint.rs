//! Trains a small detector, saves the checkpoint, reloads it and evaluates it on
//! freshly generated data with a different seed.

use pqdvqc::experiment::{evaluate, run_in_memory, ExperimentId, ExperimentSpec};
use pqdvqc::features::extract_all;
use pqdvqc::Checkpoint;

fn main() -> pqdvqc::Result<()> {
    let dir = std::env::temp_dir().join("pqdvqc-example");
    std::fs::create_dir_all(&dir).map_err(|e| pqdvqc::Error::io(&dir, e))?;

    let mut spec = ExperimentSpec::preset(ExperimentId::Detect2, 7);
    spec.per_class = 250;
    spec.train.epochs = 10;
    let run = run_in_memory(&spec, None, |_| {})?;
    let path = dir.join("checkpoint.json");
    run.outcome.checkpoint.save(&path)?;
    println!("saved {} (P = {})", path.display(), run.outcome.checkpoint.theta.len());

    let ckpt = Checkpoint::load(&path)?;
    let mut fresh = ExperimentSpec::preset(ExperimentId::Detect2, 8);
    fresh.per_class = 150;
    let data = fresh.dataset(Some(40.0))?;
    let features = extract_all(&data.waveforms, &data.labels, &fresh.extraction)?;
    let report = evaluate(&ckpt, &features)?;
    println!("accuracy on unseen noisy data: {:.4}", report.accuracy);
    println!("{}", String::from_utf8_lossy(&report.confusion_csv()?));
    report.write(&dir)?;
    Ok(())
}
