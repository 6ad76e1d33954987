//! Closed-form power-quality disturbance waveforms.
//!
//! Every class evaluates a per-unit voltage model on the sample grid
//! `t = k / sample_rate_hz`, with the free parameters drawn uniformly from
//! their allowed ranges. The fundamental phase is fixed at zero and the unit
//! step is closed on the left, so `u(0) = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sample rate. High enough that harmonics up to the 30th sit below Nyquist.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 3200.0;
/// Sample rate of the reference dataset; only harmonics below 640 Hz are resolvable.
pub const PAPER_SAMPLE_RATE_HZ: f64 = 1280.0;

const NOISE_STREAM_SALT: u64 = 0x6e6f_6973_655f_7631;

/// The eleven disturbance classes `D0`–`D10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DisturbanceClass {
    #[serde(rename = "D0")]
    Normal,
    #[serde(rename = "D1")]
    Harmonic,
    #[serde(rename = "D2")]
    Sag,
    #[serde(rename = "D3")]
    Swell,
    #[serde(rename = "D4")]
    Interruption,
    #[serde(rename = "D5")]
    Flicker,
    #[serde(rename = "D6")]
    OscillatoryTransient,
    #[serde(rename = "D7")]
    ImpulsiveTransient,
    #[serde(rename = "D8")]
    SagHarmonic,
    #[serde(rename = "D9")]
    SwellHarmonic,
    #[serde(rename = "D10")]
    InterruptionHarmonic,
}

impl DisturbanceClass {
    pub const ALL: [DisturbanceClass; 11] = [
        DisturbanceClass::Normal,
        DisturbanceClass::Harmonic,
        DisturbanceClass::Sag,
        DisturbanceClass::Swell,
        DisturbanceClass::Interruption,
        DisturbanceClass::Flicker,
        DisturbanceClass::OscillatoryTransient,
        DisturbanceClass::ImpulsiveTransient,
        DisturbanceClass::SagHarmonic,
        DisturbanceClass::SwellHarmonic,
        DisturbanceClass::InterruptionHarmonic,
    ];

    /// Integer code `k` of label `Dk`.
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DisturbanceClass::Normal => "normal",
            DisturbanceClass::Harmonic => "harmonic",
            DisturbanceClass::Sag => "sag",
            DisturbanceClass::Swell => "swell",
            DisturbanceClass::Interruption => "interruption",
            DisturbanceClass::Flicker => "flicker",
            DisturbanceClass::OscillatoryTransient => "oscillatory transient",
            DisturbanceClass::ImpulsiveTransient => "impulsive transient",
            DisturbanceClass::SagHarmonic => "sag+harmonic",
            DisturbanceClass::SwellHarmonic => "swell+harmonic",
            DisturbanceClass::InterruptionHarmonic => "interruption+harmonic",
        }
    }

    fn has_harmonics(self) -> bool {
        matches!(
            self,
            DisturbanceClass::Harmonic
                | DisturbanceClass::SagHarmonic
                | DisturbanceClass::SwellHarmonic
                | DisturbanceClass::InterruptionHarmonic
        )
    }

    /// Depth range and sign of the rectangular envelope event, if the class has one.
    fn envelope_event(self) -> Option<(f64, f64, f64)> {
        match self {
            DisturbanceClass::Sag | DisturbanceClass::SagHarmonic => Some((0.1, 0.9, -1.0)),
            DisturbanceClass::Swell | DisturbanceClass::SwellHarmonic => Some((0.1, 0.9, 1.0)),
            DisturbanceClass::Interruption | DisturbanceClass::InterruptionHarmonic => {
                Some((0.9, 1.0, -1.0))
            }
            _ => None,
        }
    }
}

impl fmt::Display for DisturbanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}", self.code())
    }
}

impl FromStr for DisturbanceClass {
    type Err = Error;

    /// Accepts `D3`, `3` or the class name.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix('D').or_else(|| t.strip_prefix('d')).unwrap_or(t);
        if let Ok(code) = digits.parse::<usize>() {
            return Self::from_code(code)
                .ok_or_else(|| Error::Argument(format!("no disturbance class with code {code}")));
        }
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Argument(format!("unknown disturbance class '{s}'")))
    }
}

/// Sampling grid and seed for waveform synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub sample_rate_hz: f64,
    pub fundamental_hz: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            fundamental_hz: 50.0,
            duration_s: 0.2,
            rng_seed: 0,
        }
    }
}

impl SignalSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn paper_rate(seed: u64) -> Self {
        Self {
            sample_rate_hz: PAPER_SAMPLE_RATE_HZ,
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.sample_rate_hz.is_finite()
            && self.fundamental_hz.is_finite()
            && self.duration_s.is_finite();
        if !finite || self.sample_rate_hz <= 0.0 || self.duration_s <= 0.0 || self.fundamental_hz <= 0.0
        {
            return Err(Error::Config(format!(
                "sample rate, fundamental and duration must be positive and finite (got {} Hz, {} Hz, {} s)",
                self.sample_rate_hz, self.fundamental_hz, self.duration_s
            )));
        }
        if self.sample_rate_hz <= 2.0 * self.fundamental_hz {
            return Err(Error::Config(format!(
                "sample rate {} Hz does not exceed twice the fundamental {} Hz",
                self.sample_rate_hz, self.fundamental_hz
            )));
        }
        if self.n_samples() == 0 {
            return Err(Error::Config("record holds no samples".into()));
        }
        Ok(())
    }

    /// `N = round(sample_rate_hz * duration_s)`.
    pub fn n_samples(&self) -> usize {
        (self.sample_rate_hz * self.duration_s).round() as usize
    }

    /// Fundamental period `T`.
    pub fn period(&self) -> f64 {
        1.0 / self.fundamental_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.fundamental_hz
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate_hz
    }
}

/// Sampled model parameters of one waveform. Absent fields do not apply to the class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceParams {
    pub class: DisturbanceClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha5: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha7: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi5: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi7: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t4: Option<f64>,
}

impl DisturbanceParams {
    fn empty(class: DisturbanceClass) -> Self {
        Self {
            class,
            alpha: None,
            alpha3: None,
            alpha5: None,
            alpha7: None,
            phi3: None,
            phi5: None,
            phi7: None,
            alpha_f: None,
            beta: None,
            tau: None,
            f_n: None,
            t1: None,
            t2: None,
            t3: None,
            t4: None,
        }
    }

    /// Checks every present parameter against its allowed range for the class.
    pub fn check_ranges(&self, spec: &SignalSpec) -> Result<()> {
        let period = spec.period();
        let tol = 1e-12;
        let within = |name: &str, v: Option<f64>, lo: f64, hi: f64| -> Result<()> {
            match v {
                Some(x) if x >= lo - tol && x <= hi + tol => Ok(()),
                Some(x) => Err(Error::Argument(format!(
                    "{} parameter {name} = {x} outside [{lo}, {hi}]",
                    self.class
                ))),
                None => Err(Error::Argument(format!(
                    "{} parameter {name} missing",
                    self.class
                ))),
            }
        };
        let class = self.class;
        if class.has_harmonics() {
            for (name, a) in [("alpha3", self.alpha3), ("alpha5", self.alpha5), ("alpha7", self.alpha7)] {
                within(name, a, 0.0, 0.15)?;
            }
            for (name, p) in [("phi3", self.phi3), ("phi5", self.phi5), ("phi7", self.phi7)] {
                within(name, p, 0.0, 2.0 * PI)?;
            }
        }
        if let Some((lo, hi, _)) = class.envelope_event() {
            within("alpha", self.alpha, lo, hi)?;
            let (t1, t2) = (self.t1.unwrap_or(f64::NAN), self.t2.unwrap_or(f64::NAN));
            within("t2-t1", Some(t2 - t1), 4.0 * period, 9.0 * period)?;
            within("t1", Some(t1), 0.0, spec.duration_s)?;
            within("t2", Some(t2), 0.0, spec.duration_s)?;
        }
        match class {
            DisturbanceClass::Flicker => {
                within("alpha_f", self.alpha_f, 0.3, 0.5)?;
                within("beta", self.beta, 0.1, 0.4)?;
            }
            DisturbanceClass::OscillatoryTransient | DisturbanceClass::ImpulsiveTransient => {
                if class == DisturbanceClass::OscillatoryTransient {
                    within("alpha", self.alpha, 0.1, 0.8)?;
                    within("f_n", self.f_n, 300.0, 900.0_f64.min(spec.nyquist_hz()))?;
                } else {
                    within("alpha", self.alpha, 1.0, 10.0)?;
                }
                within("tau", self.tau, 0.008, 0.04)?;
                let (t3, t4) = (self.t3.unwrap_or(f64::NAN), self.t4.unwrap_or(f64::NAN));
                within("t4-t3", Some(t4 - t3), 0.05 * period, 3.0 * period)?;
                within("t3", Some(t3), 0.0, spec.duration_s)?;
                within("t4", Some(t4), 0.0, spec.duration_s)?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// A sampled per-unit voltage record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub spec: SignalSpec,
    pub label: DisturbanceClass,
    pub params: DisturbanceParams,
}

#[inline]
fn step(t: f64, a: f64) -> f64 {
    if t >= a {
        1.0
    } else {
        0.0
    }
}

/// Draws an event window `[start, start + d]` with `d` uniform in `[min_d, max_d]`
/// and the start placed so the whole window fits inside the record.
fn draw_window<R: Rng + ?Sized>(rng: &mut R, min_d: f64, max_d: f64, duration: f64) -> Result<(f64, f64)> {
    if duration < max_d {
        return Err(Error::Config(format!(
            "record of {duration} s cannot hold an event window of up to {max_d} s"
        )));
    }
    let d = rng.random_range(min_d..=max_d);
    let start = rng.random_range(0.0..=(duration - d));
    Ok((start, start + d))
}

fn draw_params<R: Rng + ?Sized>(
    class: DisturbanceClass,
    spec: &SignalSpec,
    rng: &mut R,
) -> Result<DisturbanceParams> {
    let period = spec.period();
    let mut p = DisturbanceParams::empty(class);
    if let Some((lo, hi, _)) = class.envelope_event() {
        p.alpha = Some(rng.random_range(lo..=hi));
        let (t1, t2) = draw_window(rng, 4.0 * period, 9.0 * period, spec.duration_s)?;
        p.t1 = Some(t1);
        p.t2 = Some(t2);
    }
    if class.has_harmonics() {
        p.alpha3 = Some(rng.random_range(0.0..=0.15));
        p.alpha5 = Some(rng.random_range(0.0..=0.15));
        p.alpha7 = Some(rng.random_range(0.0..=0.15));
        p.phi3 = Some(rng.random_range(0.0..=2.0 * PI));
        p.phi5 = Some(rng.random_range(0.0..=2.0 * PI));
        p.phi7 = Some(rng.random_range(0.0..=2.0 * PI));
    }
    match class {
        DisturbanceClass::Flicker => {
            p.alpha_f = Some(rng.random_range(0.3..=0.5));
            p.beta = Some(rng.random_range(0.1..=0.4));
        }
        DisturbanceClass::OscillatoryTransient => {
            p.alpha = Some(rng.random_range(0.1..=0.8));
            p.tau = Some(rng.random_range(0.008..=0.04));
            let nyquist = spec.nyquist_hz();
            if nyquist <= 300.0 {
                return Err(Error::Config(format!(
                    "oscillatory transients need a Nyquist limit above 300 Hz (have {nyquist} Hz)"
                )));
            }
            // rejection sampling keeps the draw uniform over the resolvable part of the range
            let f_n = loop {
                let f = rng.random_range(300.0..=900.0);
                if f < nyquist {
                    break f;
                }
            };
            p.f_n = Some(f_n);
            let (t3, t4) = draw_window(rng, 0.05 * period, 3.0 * period, spec.duration_s)?;
            p.t3 = Some(t3);
            p.t4 = Some(t4);
        }
        DisturbanceClass::ImpulsiveTransient => {
            p.alpha = Some(rng.random_range(1.0..=10.0));
            p.tau = Some(rng.random_range(0.008..=0.04));
            let (t3, t4) = draw_window(rng, 0.05 * period, 3.0 * period, spec.duration_s)?;
            p.t3 = Some(t3);
            p.t4 = Some(t4);
        }
        _ => {}
    }
    Ok(p)
}

/// Evaluates the voltage model of `params.class` at time `t`.
pub fn evaluate(params: &DisturbanceParams, spec: &SignalSpec, t: f64) -> f64 {
    let w = spec.omega();
    let fundamental = (w * t).sin();
    let class = params.class;
    let mut v = match class.envelope_event() {
        Some((_, _, sign)) => {
            let alpha = params.alpha.unwrap_or(0.0);
            let window = step(t, params.t1.unwrap_or(0.0)) - step(t, params.t2.unwrap_or(0.0));
            (1.0 + sign * alpha * window) * fundamental
        }
        None => fundamental,
    };
    if class.has_harmonics() {
        v += params.alpha3.unwrap_or(0.0) * (3.0 * w * t + params.phi3.unwrap_or(0.0)).sin()
            + params.alpha5.unwrap_or(0.0) * (5.0 * w * t + params.phi5.unwrap_or(0.0)).sin()
            + params.alpha7.unwrap_or(0.0) * (7.0 * w * t + params.phi7.unwrap_or(0.0)).sin();
    }
    match class {
        DisturbanceClass::Flicker => {
            let af = params.alpha_f.unwrap_or(0.0);
            let beta = params.beta.unwrap_or(0.0);
            v = (1.0 + af * (beta * w * t).sin()) * fundamental;
        }
        DisturbanceClass::OscillatoryTransient | DisturbanceClass::ImpulsiveTransient => {
            let t3 = params.t3.unwrap_or(0.0);
            let t4 = params.t4.unwrap_or(0.0);
            let window = step(t, t3) - step(t, t4);
            if window != 0.0 {
                let decay = params.alpha.unwrap_or(0.0) * (-(t - t3) / params.tau.unwrap_or(1.0)).exp();
                let carrier = if class == DisturbanceClass::OscillatoryTransient {
                    (2.0 * PI * params.f_n.unwrap_or(0.0) * (t - t3)).sin()
                } else {
                    1.0
                };
                v += decay * carrier * window;
            }
        }
        _ => {}
    }
    v
}

/// Synthesizes one waveform of `class` with parameters drawn from `rng`.
pub fn synthesize<R: Rng + ?Sized>(
    class: DisturbanceClass,
    spec: &SignalSpec,
    rng: &mut R,
) -> Result<Waveform> {
    spec.validate()?;
    let params = draw_params(class, spec, rng)?;
    debug_assert!(params.check_ranges(spec).is_ok());
    let samples = (0..spec.n_samples())
        .map(|k| evaluate(&params, spec, spec.time(k)))
        .collect();
    Ok(Waveform {
        samples,
        spec: *spec,
        label: class,
        params,
    })
}

pub fn mean_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64
}

/// Adds zero-mean white Gaussian noise at `snr_db`.
///
/// `None` and `+inf` mean "no noise". A waveform with zero power is returned
/// unchanged since no noise level satisfies the ratio.
pub fn add_awgn<R: Rng + ?Sized>(w: &Waveform, snr_db: Option<f64>, rng: &mut R) -> Result<Waveform> {
    let snr = match snr_db {
        None => return Ok(w.clone()),
        Some(s) if s == f64::INFINITY => return Ok(w.clone()),
        Some(s) if !s.is_finite() => {
            return Err(Error::Argument(format!("SNR must be finite or +inf, got {s}")))
        }
        Some(s) => s,
    };
    let power = mean_power(&w.samples);
    if power == 0.0 {
        return Ok(w.clone());
    }
    let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
    let mut out = w.clone();
    for x in &mut out.samples {
        let z: f64 = StandardNormal.sample(rng);
        *x += sigma * z;
    }
    Ok(out)
}

/// Random stream for sample `index` of a dataset seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn noise_rng(seed: u64, index: u64) -> ChaCha8Rng {
    sample_rng(seed ^ NOISE_STREAM_SALT, index)
}

/// A labelled collection of waveforms sharing one [`SignalSpec`].
///
/// `labels` holds the task label of each waveform; for a plain dataset it is
/// the class code.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: SignalSpec,
    pub snr_db: Option<f64>,
    pub waveforms: Vec<Waveform>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.waveforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveforms.is_empty()
    }

    /// Number of waveforms per task label, indexed by label.
    pub fn label_counts(&self) -> Vec<usize> {
        let k = self.labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut counts = vec![0; k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Synthesizes one waveform per entry of `plan`, sample `i` drawing from stream `i`.
pub fn generate_from_plan(
    plan: &[(DisturbanceClass, usize)],
    spec: &SignalSpec,
    snr_db: Option<f64>,
) -> Result<Dataset> {
    spec.validate()?;
    if plan.is_empty() {
        return Err(Error::Config("dataset plan is empty".into()));
    }
    let seed = spec.rng_seed;
    let waveforms = plan
        .par_iter()
        .enumerate()
        .map(|(i, &(class, _))| {
            let w = synthesize(class, spec, &mut sample_rng(seed, i as u64))?;
            add_awgn(&w, snr_db, &mut noise_rng(seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        spec: *spec,
        snr_db,
        waveforms,
        labels: plan.iter().map(|&(_, l)| l).collect(),
    })
}

/// `per_class` waveforms of each class in `classes`, class-major, labelled by class code.
pub fn generate_dataset(
    classes: &[DisturbanceClass],
    per_class: usize,
    spec: &SignalSpec,
    snr_db: Option<f64>,
) -> Result<Dataset> {
    if classes.is_empty() {
        return Err(Error::Config("no disturbance classes selected".into()));
    }
    if per_class == 0 {
        return Err(Error::Config("per-class count must be at least 1".into()));
    }
    let plan: Vec<_> = classes
        .iter()
        .flat_map(|&c| std::iter::repeat((c, c.code())).take(per_class))
        .collect();
    generate_from_plan(&plan, spec, snr_db)
}
