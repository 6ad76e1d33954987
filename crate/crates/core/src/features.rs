//! Nine S-transform features per waveform.
//!
//! | feature | definition |
//! |---|---|
//! | F1 | fraction of interior columns with fundamental amplitude > 1.02 p.u. |
//! | F2 | fraction with fundamental amplitude < 0.98 p.u. |
//! | F3 | fraction with fundamental amplitude < 0.15 p.u. |
//! | F4 | sum of skewness over harmonic tracks 2–7 |
//! | F5 | sum of kurtosis over tracks 8–18 |
//! | F6 | sum of standard deviations over tracks 8–18 |
//! | F7 | sum of kurtosis over tracks 19–30 |
//! | F8 | sum of standard deviations over tracks 19–30 |
//! | F9 | mean THD over interior columns |

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_atomic, write_json};
use crate::signal::{SignalSpec, Waveform};
use crate::stats::{kurtosis, skewness, stddev};
use crate::stransform::{nearest_bin, HarmonicTrack, StransformRows};

pub const N_FEATURES: usize = 9;

/// Columns whose fundamental amplitude falls below this are left out of the THD average.
pub const THD_MIN_FUNDAMENTAL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Feature `Fi`, 1-based.
    pub fn f(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSettings {
    pub fundamental_hz: f64,
    /// Highest harmonic used by F7/F8 and the THD sum.
    pub harmonic_ceiling: usize,
    /// Columns within this many fundamental periods of either record edge are
    /// excluded from F1–F3 and F9.
    pub edge_periods: f64,
    /// Read per-unit amplitude as `2|S|` (one-sided spectrum) instead of `|S|`.
    pub single_sided: bool,
    /// Drop harmonics at or above Nyquist instead of failing.
    pub truncate_above_nyquist: bool,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self {
            fundamental_hz: 50.0,
            harmonic_ceiling: 30,
            edge_periods: 1.0,
            single_sided: true,
            truncate_above_nyquist: false,
        }
    }
}

impl ExtractionSettings {
    pub fn paper_rate() -> Self {
        Self {
            truncate_above_nyquist: true,
            ..Self::default()
        }
    }

    /// Highest harmonic usable at `sample_rate_hz` under these settings.
    pub fn max_harmonic(&self, sample_rate_hz: f64) -> Result<usize> {
        let nyquist = sample_rate_hz / 2.0;
        let resolvable = (1..=self.harmonic_ceiling)
            .take_while(|&h| (h as f64) * self.fundamental_hz < nyquist)
            .last()
            .unwrap_or(0);
        if resolvable == 0 {
            return Err(Error::Config(format!(
                "fundamental {} Hz is not below Nyquist {nyquist} Hz",
                self.fundamental_hz
            )));
        }
        if resolvable < self.harmonic_ceiling && !self.truncate_above_nyquist {
            return Err(Error::Config(format!(
                "harmonic {} ({} Hz) is not below Nyquist {nyquist} Hz; raise the sample rate or enable truncation",
                resolvable + 1,
                (resolvable + 1) as f64 * self.fundamental_hz
            )));
        }
        Ok(resolvable)
    }
}

/// Settings and resolved harmonic range recorded next to a feature file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionMetadata {
    pub settings: ExtractionSettings,
    pub sample_rate_hz: f64,
    pub max_harmonic: usize,
    pub truncated: bool,
}

impl ExtractionMetadata {
    pub fn new(settings: &ExtractionSettings, sample_rate_hz: f64) -> Result<Self> {
        let max_harmonic = settings.max_harmonic(sample_rate_hz)?;
        Ok(Self {
            settings: *settings,
            sample_rate_hz,
            max_harmonic,
            truncated: max_harmonic < settings.harmonic_ceiling,
        })
    }
}

fn amplitude(z: Complex64, row: usize, n: usize, single_sided: bool) -> f64 {
    if single_sided && row > 0 && 2 * row < n {
        2.0 * z.norm()
    } else {
        z.norm()
    }
}

/// Per-unit amplitude tracks for harmonics `1..=max_harmonic`.
pub fn harmonic_tracks(
    samples: &[f64],
    sample_rate_hz: f64,
    settings: &ExtractionSettings,
    max_harmonic: usize,
) -> Result<Vec<HarmonicTrack>> {
    let st = StransformRows::new(samples)?;
    let n = st.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    (1..=max_harmonic)
        .map(|h| {
            let row = nearest_bin(h as f64 * settings.fundamental_hz, n, sample_rate_hz);
            if row == 0 || row > n / 2 {
                return Err(Error::Config(format!(
                    "harmonic {h} does not map to a resolvable S-transform row"
                )));
            }
            st.row_into(row, &mut buf);
            Ok(HarmonicTrack {
                harmonic_index: h,
                row,
                amplitudes: buf.iter().map(|&z| amplitude(z, row, n, settings.single_sided)).collect(),
            })
        })
        .collect()
}

fn sum_over(tracks: &[HarmonicTrack], lo: usize, hi: usize, stat: fn(&[f64]) -> f64) -> f64 {
    tracks
        .iter()
        .filter(|t| t.harmonic_index >= lo && t.harmonic_index <= hi)
        .map(|t| stat(&t.amplitudes))
        .sum()
}

/// Computes F1–F9 for one waveform.
pub fn extract_features(w: &Waveform, settings: &ExtractionSettings) -> Result<FeatureVector> {
    features_from_samples(&w.samples, &w.spec, settings)
}

pub fn features_from_samples(
    samples: &[f64],
    spec: &SignalSpec,
    settings: &ExtractionSettings,
) -> Result<FeatureVector> {
    let max_h = settings.max_harmonic(spec.sample_rate_hz)?;
    let tracks = harmonic_tracks(samples, spec.sample_rate_hz, settings, max_h)?;
    let n = samples.len();
    let edge = (settings.edge_periods * spec.sample_rate_hz / settings.fundamental_hz).round() as usize;
    if 2 * edge >= n {
        return Err(Error::Config(format!(
            "edge exclusion of {edge} columns per side leaves nothing of a {n}-sample record"
        )));
    }
    let interior = edge..n - edge;
    let fundamental = &tracks[0].amplitudes[interior.clone()];
    let frac = |pred: &dyn Fn(f64) -> bool| {
        fundamental.iter().filter(|&&a| pred(a)).count() as f64 / fundamental.len() as f64
    };
    let f1 = frac(&|a| a > 1.02);
    let f2 = frac(&|a| a < 0.98);
    let f3 = frac(&|a| a < 0.15);

    let f4 = sum_over(&tracks, 2, 7, skewness);
    let f5 = sum_over(&tracks, 8, 18, kurtosis);
    let f6 = sum_over(&tracks, 8, 18, stddev);
    let f7 = sum_over(&tracks, 19, 30, kurtosis);
    let f8 = sum_over(&tracks, 19, 30, stddev);

    let (mut thd_sum, mut thd_count) = (0.0, 0usize);
    for m in interior {
        let a1 = tracks[0].amplitudes[m];
        if a1 < THD_MIN_FUNDAMENTAL {
            continue;
        }
        let harm: f64 = tracks[1..].iter().map(|t| t.amplitudes[m].powi(2)).sum();
        thd_sum += harm.sqrt() / a1;
        thd_count += 1;
    }
    let f9 = if thd_count == 0 { 0.0 } else { thd_sum / thd_count as f64 };

    let fv = FeatureVector([f1, f2, f3, f4, f5, f6, f7, f8, f9]);
    if !fv.is_finite() {
        return Err(Error::Argument(format!("non-finite feature vector {:?}", fv.0)));
    }
    Ok(fv)
}

/// Labelled feature rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSet {
    pub labels: Vec<usize>,
    pub features: Vec<FeatureVector>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureSet {
        FeatureSet {
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            features: idx.iter().map(|&i| self.features[i]).collect(),
        }
    }

    pub fn push(&mut self, label: usize, fv: FeatureVector) {
        self.labels.push(label);
        self.features.push(fv);
    }

    /// `label,f1,...,f9` with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["label".to_string()];
        header.extend((1..=N_FEATURES).map(|i| format!("f{i}")));
        wtr.write_record(&header)?;
        for (l, f) in self.labels.iter().zip(&self.features) {
            let mut rec = vec![l.to_string()];
            rec.extend(f.0.iter().map(|x| format!("{x:?}")));
            wtr.write_record(&rec)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        write_atomic(path, &bytes)
    }

    pub fn read_csv(path: &Path) -> Result<FeatureSet> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Load {
            what: path.display().to_string(),
            message: e.to_string(),
        })?;
        let headers = rdr.headers()?.clone();
        if headers.len() != N_FEATURES + 1 || &headers[0] != "label" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header label,f1..f{N_FEATURES}, got {} columns", headers.len()),
            });
        }
        let mut set = FeatureSet::default();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            if rec.len() != N_FEATURES + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, got {}", N_FEATURES + 1, rec.len()),
                });
            }
            let label = rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse { line, message: format!("label: {e}") })?;
            let mut f = [0.0; N_FEATURES];
            for (j, slot) in f.iter_mut().enumerate() {
                *slot = rec[j + 1]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line, message: format!("f{}: {e}", j + 1) })?;
            }
            set.push(label, FeatureVector(f));
        }
        Ok(set)
    }
}

/// Extracts features for every waveform; the error names the first failing row.
pub fn extract_all(
    waveforms: &[Waveform],
    labels: &[usize],
    settings: &ExtractionSettings,
) -> Result<FeatureSet> {
    let features = waveforms
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            extract_features(w, settings).map_err(|e| Error::Argument(format!("row {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureSet {
        labels: labels.to_vec(),
        features,
    })
}

pub fn write_metadata(path: &Path, meta: &ExtractionMetadata) -> Result<()> {
    write_json(path, meta)
}

pub fn read_metadata(path: &Path) -> Result<ExtractionMetadata> {
    read_json(path)
}
