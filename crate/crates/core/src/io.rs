//! File formats shared by the command-line harness.
//!
//! Every writer goes through [`write_atomic`]: the bytes land in a sibling
//! temporary file which is then renamed over the target.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Dataset, DisturbanceParams, SignalSpec, Waveform};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Load {
        what: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Sidecar written next to a waveform CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub spec: SignalSpec,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub n_samples: usize,
    pub n_waveforms: usize,
    pub label_counts: Vec<usize>,
}

/// `dataset.csv` -> `dataset.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `label,param_json,s0..s{N-1}` plus the JSON sidecar.
pub fn write_dataset(csv_path: &Path, data: &Dataset) -> Result<()> {
    let n = data.spec.n_samples();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string(), "param_json".to_string()];
    header.extend((0..n).map(|i| format!("s{i}")));
    wtr.write_record(&header)?;
    for (w, &label) in data.waveforms.iter().zip(&data.labels) {
        let mut rec = Vec::with_capacity(n + 2);
        rec.push(label.to_string());
        rec.push(serde_json::to_string(&w.params)?);
        rec.extend(w.samples.iter().map(|x| format!("{x:?}")));
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::io(csv_path, e.into_error()))?;
    write_atomic(csv_path, &bytes)?;
    let sidecar = DatasetSidecar {
        spec: data.spec,
        seed: data.spec.rng_seed,
        snr_db: data.snr_db,
        n_samples: n,
        n_waveforms: data.len(),
        label_counts: data.label_counts(),
    };
    write_json(&sidecar_path(csv_path), &sidecar)
}

pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let sidecar: DatasetSidecar = read_json(&sidecar_path(csv_path))?;
    let spec = sidecar.spec;
    let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| Error::Load {
        what: csv_path.display().to_string(),
        message: e.to_string(),
    })?;
    let width = rdr.headers()?.len();
    if width != sidecar.n_samples + 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected {} columns, header has {width}", sidecar.n_samples + 2),
        });
    }
    let mut waveforms = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, got {}", rec.len()),
            });
        }
        let label = rec[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse { line, message: format!("label: {e}") })?;
        let params: DisturbanceParams = serde_json::from_str(&rec[1])
            .map_err(|e| Error::Parse { line, message: format!("param_json: {e}") })?;
        let samples = rec
            .iter()
            .skip(2)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line, message: format!("sample: {e}") })?;
        labels.push(label);
        waveforms.push(Waveform {
            samples,
            spec,
            label: params.class,
            params,
        });
    }
    Ok(Dataset {
        spec,
        snr_db: sidecar.snr_db,
        waveforms,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_dataset, DisturbanceClass};

    #[test]
    fn dataset_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data/dataset.csv");
        let spec = SignalSpec::with_seed(3);
        let data = generate_dataset(
            &[DisturbanceClass::Sag, DisturbanceClass::OscillatoryTransient],
            2,
            &spec,
            Some(30.0),
        )
        .unwrap();
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, data);
        let side: DatasetSidecar = read_json(&sidecar_path(&path)).unwrap();
        assert_eq!(side.seed, 3);
        assert_eq!(side.n_samples, 640);
        let header = fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("label,param_json,s0,s1,"));
    }

    #[test]
    fn malformed_sample_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let spec = SignalSpec {
            sample_rate_hz: 400.0,
            duration_s: 0.01,
            ..SignalSpec::with_seed(1)
        };
        let data = generate_dataset(&[DisturbanceClass::Normal], 2, &spec, None).unwrap();
        write_dataset(&path, &data).unwrap();
        let text = fs::read_to_string(&path).unwrap().replacen("0.0,", "oops,", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 2, .. })));
    }
}
