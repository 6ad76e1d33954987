//! Experiment presets and the file-level commands behind the `pqdvqc` binary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_all, read_metadata, write_metadata, ExtractionMetadata, ExtractionSettings, FeatureSet};
use crate::io::{read_dataset, write_atomic, write_dataset, write_json};
use crate::qnn::{Checkpoint, ModelConfig};
use crate::signal::{generate_from_plan, sample_rng, Dataset, DisturbanceClass, SignalSpec};
use crate::training::{train_with_progress, EpochRecord, GradientMethod, LossKind, TrainConfig, TrainOutcome};

/// Share of every class held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

/// Noise levels of the robustness sweep; `None` is the clean run.
pub const SWEEP_SNRS_DB: [Option<f64>; 4] = [None, Some(40.0), Some(30.0), Some(20.0)];

const DETECT_DRAW_STREAM: u64 = 0xD37EC7;
const SPLIT_STREAM: u64 = 0x5B117;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Detect2,
    Single7,
    Mixed10,
    NoiseSweep,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [Self::Detect2, Self::Single7, Self::Mixed10, Self::NoiseSweep];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Detect2 => "detect2",
            Self::Single7 => "single7",
            Self::Mixed10 => "mixed10",
            Self::NoiseSweep => "noise_sweep",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    /// Classes drawn for the dataset. For `detect2` these are the disturbed pool.
    pub classes: Vec<DisturbanceClass>,
    pub per_class: usize,
    pub snr_db: Vec<Option<f64>>,
    pub signal: SignalSpec,
    pub extraction: ExtractionSettings,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    /// Full-size settings for an experiment, everything seeded from `seed`.
    pub fn preset(id: ExperimentId, seed: u64) -> Self {
        let (classes, k, layers, batch, epochs) = match id {
            ExperimentId::Detect2 => (DisturbanceClass::ALL[1..].to_vec(), 2, 1, 32, 25),
            ExperimentId::Single7 | ExperimentId::NoiseSweep => (DisturbanceClass::ALL[1..8].to_vec(), 7, 2, 16, 105),
            ExperimentId::Mixed10 => (DisturbanceClass::ALL[1..].to_vec(), 10, 2, 10, 160),
        };
        let loss_kind = if k == 2 { LossKind::Bce } else { LossKind::Cce };
        Self {
            id,
            classes,
            per_class: 1000,
            snr_db: if id == ExperimentId::NoiseSweep { SWEEP_SNRS_DB.to_vec() } else { vec![None] },
            signal: SignalSpec::with_seed(seed),
            extraction: ExtractionSettings::default(),
            model: ModelConfig::new(crate::features::N_FEATURES, k, layers, seed),
            train: TrainConfig {
                epochs,
                batch_size: batch,
                lr: 0.01,
                loss_kind,
                gradient_method: GradientMethod::Adjoint,
                seed,
                shuffle: true,
            },
            out_dir: PathBuf::from("out").join(id.as_str()),
        }
    }

    /// Switches waveform synthesis and feature extraction to the 1280 Hz rate.
    pub fn with_paper_rate(mut self) -> Self {
        self.signal = SignalSpec::paper_rate(self.signal.rng_seed);
        self.extraction = ExtractionSettings::paper_rate();
        self
    }

    pub fn n_classes(&self) -> usize {
        self.model.n_ancilla
    }

    /// Human-readable class names indexed by label.
    pub fn class_names(&self) -> Vec<String> {
        match self.id {
            ExperimentId::Detect2 => vec!["normal".into(), "disturbed".into()],
            _ => self.classes.iter().map(|c| c.to_string()).collect(),
        }
    }

    /// `(class, label)` for every waveform, class-major.
    pub fn plan(&self) -> Result<Vec<(DisturbanceClass, usize)>> {
        if self.per_class == 0 {
            return Err(Error::Config("per-class count must be at least 1".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("no disturbance classes selected".into()));
        }
        Ok(match self.id {
            ExperimentId::Detect2 => {
                let mut rng = sample_rng(self.signal.rng_seed, DETECT_DRAW_STREAM);
                let mut plan = vec![(DisturbanceClass::Normal, 0); self.per_class];
                plan.extend(
                    (0..self.per_class).map(|_| (self.classes[rng.random_range(0..self.classes.len())], 1)),
                );
                plan
            }
            _ => {
                if self.classes.len() != self.n_classes() {
                    return Err(Error::Config(format!(
                        "{} classes selected for a {}-class model",
                        self.classes.len(),
                        self.n_classes()
                    )));
                }
                self.classes
                    .iter()
                    .enumerate()
                    .flat_map(|(label, &c)| std::iter::repeat_n((c, label), self.per_class))
                    .collect()
            }
        })
    }

    pub fn dataset(&self, snr_db: Option<f64>) -> Result<Dataset> {
        generate_from_plan(&self.plan()?, &self.signal, snr_db)
    }
}

/// Stratified split: `round(TEST_FRACTION * n_c)` rows of each class go to the test side.
pub fn stratified_split(labels: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..k {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut sample_rng(seed, SPLIT_STREAM + c as u64));
        let n_test = (TEST_FRACTION * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub per_class_count: Vec<usize>,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub n_params: usize,
}

impl EvalReport {
    pub fn from_predictions(labels: &[usize], predicted: &[usize], n_classes: usize, n_params: usize) -> Result<Self> {
        if labels.len() != predicted.len() {
            return Err(Error::Argument(format!(
                "{} labels but {} predictions",
                labels.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&y, &p) in labels.iter().zip(predicted) {
            if y >= n_classes || p >= n_classes {
                return Err(Error::Argument(format!("label pair ({y}, {p}) outside {n_classes} classes")));
            }
            confusion[y][p] += 1;
        }
        let per_class_count: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
        let per_class_accuracy = (0..n_classes)
            .map(|c| if per_class_count[c] == 0 { 0.0 } else { confusion[c][c] as f64 / per_class_count[c] as f64 })
            .collect();
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        Ok(Self {
            accuracy: if labels.is_empty() { 0.0 } else { correct as f64 / labels.len() as f64 },
            per_class_accuracy,
            per_class_count,
            confusion,
            n_params,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.per_class_count.iter().sum()
    }

    /// Misclassified test rows whose true label is in `labels`, as a share of all errors.
    pub fn error_share(&self, labels: &[usize]) -> f64 {
        let errors = |c: usize| self.per_class_count[c] - self.confusion[c][c];
        let total: usize = (0..self.confusion.len()).map(errors).sum();
        if total == 0 {
            return 0.0;
        }
        labels.iter().map(|&c| errors(c)).sum::<usize>() as f64 / total as f64
    }

    pub fn confusion_csv(&self) -> Result<Vec<u8>> {
        let k = self.confusion.len();
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true".to_string()];
        header.extend((0..k).map(|c| format!("pred_{c}")));
        wtr.write_record(&header)?;
        for (c, row) in self.confusion.iter().enumerate() {
            let mut rec = vec![c.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.into_inner().map_err(|e| Error::io("confusion.csv", e.into_error()))
    }

    /// Writes `eval.json` and `confusion.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("eval.json"), self)?;
        write_atomic(&dir.join("confusion.csv"), &self.confusion_csv()?)
    }
}

/// Classifies every row of `features` with a trained checkpoint.
pub fn evaluate(checkpoint: &Checkpoint, features: &FeatureSet) -> Result<EvalReport> {
    use rayon::prelude::*;
    let model = checkpoint.model()?;
    let k = checkpoint.config.n_ancilla;
    if let Some(bad) = features.labels.iter().find(|&&l| l >= k) {
        return Err(Error::Config(format!("label {bad} does not fit a {k}-class checkpoint")));
    }
    let predicted = features
        .features
        .par_iter()
        .map(|f| model.predict(f.as_slice(), &checkpoint.theta, &checkpoint.stats))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(&features.labels, &predicted, k, model.n_params())
}

/// Everything one train-and-test run produces.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    pub eval: EvalReport,
    pub train_set: FeatureSet,
    pub test_set: FeatureSet,
}

/// Splits, trains and evaluates on the held-out rows.
pub fn train_and_evaluate(
    features: &FeatureSet,
    spec: &ExperimentSpec,
    progress: impl FnMut(&EpochRecord),
) -> Result<RunResult> {
    let (train_idx, test_idx) = stratified_split(&features.labels, spec.train.seed);
    let train_set = features.subset(&train_idx);
    let test_set = features.subset(&test_idx);
    let outcome = train_with_progress(&train_set, &test_set, &spec.model, &spec.train, progress)?;
    let eval = evaluate(&outcome.checkpoint, &test_set)?;
    Ok(RunResult { outcome, eval, train_set, test_set })
}

/// Generates the dataset at `snr_db`, extracts features and runs [`train_and_evaluate`].
pub fn run_in_memory(
    spec: &ExperimentSpec,
    snr_db: Option<f64>,
    progress: impl FnMut(&EpochRecord),
) -> Result<RunResult> {
    let data = spec.dataset(snr_db)?;
    let features = extract_all(&data.waveforms, &data.labels, &spec.extraction)?;
    train_and_evaluate(&features, spec, progress)
}

fn log_epoch(r: &EpochRecord) {
    eprintln!(
        "epoch {:>4}  loss {:.5}  train {:.4}  test {:.4}  ({:.1}s)",
        r.epoch, r.train_loss, r.train_acc, r.test_acc, r.seconds
    );
}

/// Writes `dataset.csv` and its sidecar into the output directory.
pub fn cmd_generate(spec: &ExperimentSpec, snr_db: Option<f64>) -> Result<PathBuf> {
    let data = spec.dataset(snr_db)?;
    let path = spec.out_dir.join("dataset.csv");
    write_dataset(&path, &data)?;
    let names = spec.class_names();
    for (label, n) in data.label_counts().iter().enumerate() {
        println!("{label} {:<12} {n}", names.get(label).map_or("?", String::as_str));
    }
    Ok(path)
}

/// Reads a waveform CSV and writes `features.csv` plus `features.json` next to `out`.
pub fn cmd_features(dataset: &Path, settings: &ExtractionSettings, out: &Path) -> Result<FeatureSet> {
    let data = read_dataset(dataset)?;
    let features = extract_all(&data.waveforms, &data.labels, settings)?;
    let meta = ExtractionMetadata::new(settings, data.spec.sample_rate_hz)?;
    features.write_csv(out)?;
    write_metadata(&out.with_extension("json"), &meta)?;
    println!("{} feature rows -> {}", features.len(), out.display());
    Ok(features)
}

/// Summary written next to a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub experiment: ExperimentId,
    pub n_params: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub best_test_acc: f64,
    pub best_epoch: usize,
    pub final_test_acc: f64,
    pub wall_seconds: f64,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

fn curve_csv(records: &[EpochRecord]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["epoch", "train_loss", "train_acc", "test_acc", "seconds"])?;
    for r in records {
        wtr.write_record(&[
            r.epoch.to_string(),
            format!("{:?}", r.train_loss),
            format!("{:?}", r.train_acc),
            format!("{:?}", r.test_acc),
            format!("{:.3}", r.seconds),
        ])?;
    }
    wtr.into_inner().map_err(|e| Error::io("curve.csv", e.into_error()))
}

/// Writes the artefacts of a finished run into `dir`.
pub fn write_run(dir: &Path, spec: &ExperimentSpec, run: &RunResult) -> Result<()> {
    let report = &run.outcome.report;
    run.outcome.checkpoint.save(&dir.join("checkpoint.json"))?;
    write_atomic(&dir.join("train_report.jsonl"), report.to_json_lines()?.as_bytes())?;
    write_atomic(&dir.join("curve.csv"), &curve_csv(&report.epochs)?)?;
    run.test_set.write_csv(&dir.join("test_features.csv"))?;
    run.eval.write(dir)?;
    write_json(
        &dir.join("summary.json"),
        &TrainSummary {
            experiment: spec.id,
            n_params: run.eval.n_params,
            n_train: run.train_set.len(),
            n_test: run.test_set.len(),
            best_test_acc: report.best_test_acc,
            best_epoch: report.best_epoch,
            final_test_acc: report.final_test_acc,
            wall_seconds: report.wall_seconds,
            train: spec.train,
            model: spec.model,
        },
    )
}

/// Trains on a feature CSV and writes checkpoint, report, curve and evaluation.
pub fn cmd_train(features_path: &Path, spec: &ExperimentSpec) -> Result<RunResult> {
    let features = FeatureSet::read_csv(features_path)?;
    let run = train_and_evaluate(&features, spec, log_epoch)?;
    write_run(&spec.out_dir, spec, &run)?;
    let r = &run.outcome.report;
    println!(
        "P = {}  best test acc {:.4} (epoch {})  final {:.4}  {:.1}s",
        run.eval.n_params, r.best_test_acc, r.best_epoch, r.final_test_acc, r.wall_seconds
    );
    Ok(run)
}

/// Evaluates a checkpoint on a feature CSV; writes `eval.json` and `confusion.csv` into `out_dir`.
pub fn cmd_eval(checkpoint: &Path, features_path: &Path, out_dir: &Path) -> Result<EvalReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let features = FeatureSet::read_csv(features_path)?;
    let report = evaluate(&ckpt, &features)?;
    report.write(out_dir)?;
    println!("accuracy {:.4} on {} rows", report.accuracy, report.n_samples());
    for (c, (a, n)) in report.per_class_accuracy.iter().zip(&report.per_class_count).enumerate() {
        println!("  class {c}: {a:.4} ({n} rows)");
    }
    Ok(report)
}

/// Result of one noise level of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: Option<f64>,
    pub best_test_acc: f64,
    pub final_test_acc: f64,
    pub eval: EvalReport,
}

pub fn snr_label(snr: Option<f64>) -> String {
    snr.map_or_else(|| "clean".to_string(), |s| format!("{s}dB"))
}

/// Per-class accuracy table, one column per noise level, plus an average row.
pub fn sweep_table_csv(points: &[SweepPoint], class_names: &[String]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend(points.iter().map(|p| snr_label(p.snr_db)));
    wtr.write_record(&header)?;
    for (c, name) in class_names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(points.iter().map(|p| format!("{:.4}", p.eval.per_class_accuracy[c])));
        wtr.write_record(&rec)?;
    }
    let mut avg = vec!["average".to_string()];
    avg.extend(points.iter().map(|p| format!("{:.4}", p.eval.accuracy)));
    wtr.write_record(&avg)?;
    wtr.into_inner().map_err(|e| Error::io("sweep.csv", e.into_error()))
}

/// For each noise level: regenerate with noise, extract, retrain and test.
pub fn run_sweep(spec: &ExperimentSpec, mut on_point: impl FnMut(&SweepPoint, &RunResult)) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(spec.snr_db.len());
    for &snr in &spec.snr_db {
        let run = run_in_memory(spec, snr, |_| {})?;
        let point = SweepPoint {
            snr_db: snr,
            best_test_acc: run.outcome.report.best_test_acc,
            final_test_acc: run.outcome.report.final_test_acc,
            eval: run.eval.clone(),
        };
        on_point(&point, &run);
        points.push(point);
    }
    Ok(points)
}

pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepPoint>> {
    let points = run_sweep(spec, |p, run| {
        println!(
            "{:>6}: test acc {:.4} (best {:.4}, final {:.4})",
            snr_label(p.snr_db),
            p.eval.accuracy,
            p.best_test_acc,
            p.final_test_acc
        );
        let dir = spec.out_dir.join(snr_label(p.snr_db));
        if let Err(e) = write_run(&dir, spec, run) {
            eprintln!("warning: {e}");
        }
    })?;
    write_atomic(&spec.out_dir.join("sweep.csv"), &sweep_table_csv(&points, &spec.class_names())?)?;
    write_json(&spec.out_dir.join("sweep.json"), &points)?;
    Ok(points)
}

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "PQDVQC_THREADS";

/// Sizes the global rayon pool from `PQDVQC_THREADS`, if set. Returns the cap applied.
pub fn init_threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(Some(n))
}

/// Reads the extraction settings recorded next to a feature CSV, if present.
pub fn feature_metadata(features_path: &Path) -> Option<ExtractionMetadata> {
    read_metadata(&features_path.with_extension("json")).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_published_settings() {
        let d = ExperimentSpec::preset(ExperimentId::Detect2, 1);
        assert_eq!((d.train.batch_size, d.train.epochs, d.model.n_layers), (32, 25, 1));
        assert_eq!(d.model.n_qubits(), 11);
        assert_eq!(d.train.loss_kind, LossKind::Bce);
        let s = ExperimentSpec::preset(ExperimentId::Single7, 1);
        assert_eq!((s.train.batch_size, s.train.epochs), (16, 105));
        assert_eq!(s.model.n_qubits(), 16);
        assert!(s.model.n_params() <= 150);
        let m = ExperimentSpec::preset(ExperimentId::Mixed10, 1);
        assert_eq!((m.train.batch_size, m.train.epochs), (10, 160));
        assert_eq!(ExperimentSpec::preset(ExperimentId::NoiseSweep, 1).snr_db.len(), 4);
        assert_eq!("noise_sweep".parse::<ExperimentId>().unwrap(), ExperimentId::NoiseSweep);
        assert!("nope".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn detect_plan_has_two_balanced_labels() {
        let mut d = ExperimentSpec::preset(ExperimentId::Detect2, 9);
        d.per_class = 50;
        let plan = d.plan().unwrap();
        assert_eq!(plan.len(), 100);
        assert!(plan[..50].iter().all(|&(c, l)| c == DisturbanceClass::Normal && l == 0));
        assert!(plan[50..].iter().all(|&(c, l)| c != DisturbanceClass::Normal && l == 1));
        assert_eq!(plan, d.plan().unwrap());
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..3).flat_map(|c| std::iter::repeat_n(c, 10)).collect();
        let (tr, te) = stratified_split(&labels, 4);
        assert_eq!(te.len(), 6);
        assert_eq!(tr.len(), 24);
        for c in 0..3 {
            assert_eq!(te.iter().filter(|&&i| labels[i] == c).count(), 2);
        }
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert_eq!(stratified_split(&labels, 4), (tr, te));
    }

    #[test]
    fn confusion_arithmetic() {
        let r = EvalReport::from_predictions(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 0], 3, 7).unwrap();
        assert_eq!(r.confusion, vec![vec![1, 1, 0], vec![0, 2, 0], vec![1, 0, 0]]);
        assert_eq!(r.per_class_count, vec![2, 2, 1]);
        assert!((r.accuracy - 0.6).abs() < 1e-15);
        assert_eq!(r.per_class_accuracy, vec![0.5, 1.0, 0.0]);
        assert!((r.error_share(&[2]) - 0.5).abs() < 1e-15);
        let csv = String::from_utf8(r.confusion_csv().unwrap()).unwrap();
        assert!(csv.starts_with("true,pred_0,pred_1,pred_2\n0,1,1,0\n"));
        assert!(EvalReport::from_predictions(&[0], &[3], 3, 0).is_err());
    }
}
