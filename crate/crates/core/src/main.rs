use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pqdvqc::experiment::{self, ExperimentId, ExperimentSpec};
use pqdvqc::{GradientMethod, Result, SignalSpec};

#[derive(Parser)]
#[command(name = "pqdvqc", version, about = "Power-quality disturbance classification with a simulated quantum circuit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the experiment's waveforms into OUT/dataset.csv.
    Generate,
    /// S-transform features for a waveform CSV.
    Features {
        #[arg(long, help = "waveform CSV [default: OUT/dataset.csv]")]
        dataset: Option<PathBuf>,
    },
    /// Split, train, and write checkpoint, report, curve and evaluation into OUT.
    Train {
        #[arg(long, help = "feature CSV [default: OUT/features.csv]")]
        features: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a feature CSV.
    Eval {
        #[arg(long, help = "[default: OUT/checkpoint.json]")]
        checkpoint: Option<PathBuf>,
        #[arg(long, help = "[default: OUT/test_features.csv]")]
        features: Option<PathBuf>,
    },
    /// Retrain and test at every noise level of the experiment.
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grad {
    Shift,
    Adjoint,
}

#[derive(Args)]
struct Opts {
    #[arg(long, global = true, default_value = "single7",
          value_parser = ["detect2", "single7", "mixed10", "noise_sweep"])]
    experiment: String,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sampling rate in Hz.
    #[arg(long, global = true, conflicts_with = "paper_rate")]
    rate: Option<f64>,
    /// Use the 1280 Hz rate, keeping harmonics below Nyquist only.
    #[arg(long, global = true)]
    paper_rate: bool,
    /// SNR in dB ("clean" for none). Repeat or comma-separate for `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    snr: Vec<String>,
    #[arg(long, global = true)]
    per_class: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    layers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    grad: Option<Grad>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn parse_snr(s: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("clean") || s.eq_ignore_ascii_case("inf") {
        return Ok(None);
    }
    s.trim_end_matches("dB")
        .parse()
        .map(Some)
        .map_err(|_| pqdvqc::Error::Argument(format!("bad SNR {s:?}")))
}

fn build_spec(o: &Opts) -> Result<ExperimentSpec> {
    let id: ExperimentId = o.experiment.parse()?;
    let mut spec = ExperimentSpec::preset(id, o.seed);
    if o.paper_rate {
        spec = spec.with_paper_rate();
    }
    if let Some(rate) = o.rate {
        spec.signal = SignalSpec { sample_rate_hz: rate, ..spec.signal };
        spec.extraction.truncate_above_nyquist = rate < pqdvqc::signal::DEFAULT_SAMPLE_RATE_HZ;
    }
    if !o.snr.is_empty() {
        spec.snr_db = o.snr.iter().map(|s| parse_snr(s)).collect::<Result<_>>()?;
    }
    if let Some(n) = o.per_class {
        spec.per_class = n;
    }
    if let Some(e) = o.epochs {
        spec.train.epochs = e;
    }
    if let Some(b) = o.batch {
        spec.train.batch_size = b;
    }
    if let Some(lr) = o.lr {
        spec.train.lr = lr;
    }
    if let Some(l) = o.layers {
        spec.model.n_layers = l;
    }
    if let Some(g) = o.grad {
        spec.train.gradient_method = match g {
            Grad::Shift => GradientMethod::ParameterShift,
            Grad::Adjoint => GradientMethod::Adjoint,
        };
    }
    if let Some(out) = &o.out {
        spec.out_dir = out.clone();
    }
    spec.signal.validate()?;
    spec.model.validate()?;
    spec.train.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    experiment::init_threads_from_env()?;
    let spec = build_spec(&cli.opts)?;
    let out = spec.out_dir.clone();
    match cli.command {
        Command::Generate => {
            let path = experiment::cmd_generate(&spec, spec.snr_db.first().copied().flatten())?;
            println!("wrote {}", path.display());
        }
        Command::Features { dataset } => {
            let dataset = dataset.unwrap_or_else(|| out.join("dataset.csv"));
            experiment::cmd_features(&dataset, &spec.extraction, &out.join("features.csv"))?;
        }
        Command::Train { features } => {
            experiment::cmd_train(&features.unwrap_or_else(|| out.join("features.csv")), &spec)?;
        }
        Command::Eval { checkpoint, features } => {
            experiment::cmd_eval(
                &checkpoint.unwrap_or_else(|| out.join("checkpoint.json")),
                &features.unwrap_or_else(|| out.join("test_features.csv")),
                &out,
            )?;
        }
        Command::Sweep => {
            experiment::cmd_sweep(&spec)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
