//! Discrete Stockwell transform.
//!
//! The forward DFT carries a `1/N` factor, so a unit sine puts `0.5` in each
//! of its two bins and `S[m, n]` for a sinusoid on bin `n` has magnitude `0.5`.
//! Row `n` is `IDFT(H[k + n] * exp(-2 pi^2 k^2 / n^2))` over the circular
//! index range `k in (-N/2, N/2]`, left unnormalized.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Forward DFT with the `1/N` normalization: `H[k] = (1/N) sum_m h[m] exp(-j 2 pi k m / N)`.
pub fn dft(h: &[f64]) -> Result<Vec<Complex64>> {
    if h.is_empty() {
        return Err(Error::Argument("DFT of an empty sequence".into()));
    }
    let n = h.len();
    let mut buf: Vec<Complex64> = h.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    Ok(buf)
}

/// Complex S-matrix: `rows = N/2 + 1` frequency rows by `N` time columns, row-major.
#[derive(Clone, Debug)]
pub struct SpectralMatrix {
    values: Vec<Complex64>,
    n_rows: usize,
    n_cols: usize,
    sample_rate_hz: f64,
}

impl SpectralMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn row(&self, n: usize) -> &[Complex64] {
        &self.values[n * self.n_cols..(n + 1) * self.n_cols]
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.values[n * self.n_cols + m]
    }

    /// `n / (N T)` with `T = 1 / sample_rate_hz`.
    pub fn row_freq_hz(&self, n: usize) -> f64 {
        n as f64 * self.sample_rate_hz / self.n_cols as f64
    }

    pub fn row_freqs_hz(&self) -> Vec<f64> {
        (0..self.n_rows).map(|n| self.row_freq_hz(n)).collect()
    }

    /// Row index whose frequency is closest to `freq_hz`.
    pub fn nearest_row(&self, freq_hz: f64) -> usize {
        nearest_bin(freq_hz, self.n_cols, self.sample_rate_hz).min(self.n_rows - 1)
    }
}

pub(crate) fn nearest_bin(freq_hz: f64, n: usize, sample_rate_hz: f64) -> usize {
    (freq_hz * n as f64 / sample_rate_hz).round().max(0.0) as usize
}

/// Amplitude time series of one harmonic, one value per time column.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTrack {
    pub harmonic_index: usize,
    pub row: usize,
    pub amplitudes: Vec<f64>,
}

/// Evaluates selected rows of the S-transform, reusing one spectrum and one FFT plan.
pub struct StransformRows {
    spectrum: Vec<Complex64>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
    mean: f64,
}

impl StransformRows {
    pub fn new(h: &[f64]) -> Result<Self> {
        let n = h.len();
        if n < 4 || n % 2 != 0 {
            return Err(Error::Argument(format!(
                "S-transform needs an even length of at least 4, got {n}"
            )));
        }
        let spectrum = dft(h)?;
        let inverse = FftPlanner::new().plan_fft_inverse(n);
        let mean = h.iter().sum::<f64>() / n as f64;
        Ok(Self {
            spectrum,
            inverse,
            n,
            mean,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Writes row `row` (`0 ..= N/2`) into `out`, which must have length `N`.
    pub fn row_into(&self, row: usize, out: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(out.len(), n);
        assert!(row <= n / 2, "row {row} beyond N/2");
        if row == 0 {
            out.iter_mut().for_each(|z| *z = Complex64::new(self.mean, 0.0));
            return;
        }
        let scale = -2.0 * PI * PI / (row as f64 * row as f64);
        let half = n / 2;
        for (i, slot) in out.iter_mut().enumerate() {
            // circular frequency offset k in (-N/2, N/2]
            let k = if i <= half { i as f64 } else { i as f64 - n as f64 };
            let g = (scale * k * k).exp();
            *slot = self.spectrum[(i + row) % n] * g;
        }
        self.inverse.process(out);
    }

    pub fn row(&self, row: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.row_into(row, &mut out);
        out
    }
}

/// Full S-transform, rows `0 ..= N/2`.
pub fn stransform(h: &[f64], sample_rate_hz: f64) -> Result<SpectralMatrix> {
    let rows = StransformRows::new(h)?;
    let n = rows.len();
    let n_rows = n / 2 + 1;
    let mut values = vec![Complex64::new(0.0, 0.0); n_rows * n];
    for (r, chunk) in values.chunks_mut(n).enumerate() {
        rows.row_into(r, chunk);
    }
    Ok(SpectralMatrix {
        values,
        n_rows,
        n_cols: n,
        sample_rate_hz,
    })
}
