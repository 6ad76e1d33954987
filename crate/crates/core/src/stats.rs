//! Moment statistics over harmonic amplitude sequences.
//!
//! Skewness and kurtosis use the population standard deviation; the standard
//! deviation itself uses the `n - 1` sample normalization. Degenerate inputs
//! (spread below [`DEGENERATE_SPREAD`], a single element, empty) yield `0`.

/// Population spread under which a sequence counts as constant. Amplitudes are
/// per-unit, so this sits far below any physical variation but above FFT rounding.
pub const DEGENERATE_SPREAD: f64 = 1e-12;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

fn population_sd(x: &[f64], mu: f64) -> f64 {
    (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

fn standardized_moment(x: &[f64], order: i32) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mu = mean(x);
    let sigma = population_sd(x, mu);
    if sigma < DEGENERATE_SPREAD {
        return 0.0;
    }
    x.iter().map(|v| ((v - mu) / sigma).powi(order)).sum::<f64>() / x.len() as f64
}

/// `(1/n) sum ((x - mu) / sigma)^3`.
pub fn skewness(x: &[f64]) -> f64 {
    standardized_moment(x, 3)
}

/// `(1/n) sum ((x - mu) / sigma)^4`, without the excess `-3`.
pub fn kurtosis(x: &[f64]) -> f64 {
    standardized_moment(x, 4)
}

/// `sqrt(sum (x - mu)^2 / (n - 1))`.
pub fn stddev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mu = mean(x);
    (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}
