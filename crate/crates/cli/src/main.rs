//! `ampnet` command line driver.
//!
//! Numbers go to stdout as `key=value` lines (or CSV where noted); progress
//! and prose go to stderr. Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ampnet::amp::AmpParams;
use ampnet::dataset::{
    build_dataset, export_dataset, generate_excitation, import_dataset, read_wav, split_dataset, write_wav,
    AudioSignal, Dataset, Split, DEFAULT_SPLIT_RATIOS,
};
use ampnet::hypersearch::{
    hidden_rmse_correlation, plot_data_to_csv, plot_points, results_from_csv, results_to_csv, search, summary_line,
    LogRange, SearchSpace, TrialSettings,
};
use ampnet::model::{load_model, save_model, LstmParams, ModelConfig};
use ampnet::realtime::{benchmark_throughput, feature_rows, StreamMode, StreamState, ThroughputReport};
use ampnet::tensor::{Real, Rng};
use ampnet::train::{
    evaluate_split, init_params, per_gain_rmse, relative_rmse_percent, train, InitScheme, OptimizerKind, TrainConfig,
};
use ampnet::Error;

#[derive(Parser, Debug)]
#[command(name = "ampnet", version, about = "LSTM guitar amplifier emulator")]
struct Cli {
    /// Seed for every random draw (excitation, init, shuffling, dropout).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 16_000)]
    sample_rate: u32,
    /// Arithmetic used for inference.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Windowed,
    Stateful,
}

impl From<Mode> for StreamMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Windowed => StreamMode::Windowed,
            Mode::Stateful => StreamMode::Stateful,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    Validation,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
            SplitArg::Validation => Split::Validation,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize an excitation, run it through the reference amp and write
    /// x.wav, target.wav and gains.txt.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Excitation length in seconds (repeated once per gain).
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Gain knob settings in [0, 10].
        #[arg(long, value_delimiter = ',', default_value = "5")]
        gains: Vec<f64>,
    },
    /// Fit an LSTM to a generated dataset.
    Train(TrainArgs),
    /// Print the relative RMSE (%) of a model on one split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Validation)]
        split: SplitArg,
        /// Also print one line per gain segment.
        #[arg(long)]
        per_gain: bool,
    },
    /// Process a WAV file block by block.
    Stream {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
        block: u64,
        #[arg(long, value_enum, default_value_t = Mode::Windowed)]
        mode: Mode,
        /// Gain knob fed to two-feature models.
        #[arg(long, default_value_t = 5.0)]
        gain: f64,
    },
    /// Measure streaming throughput; prints a CSV row.
    Bench {
        /// Model to benchmark; without it a randomly initialized one is used.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 24)]
        num_hidden: usize,
        #[arg(long, default_value_t = 100)]
        num_step: usize,
        #[arg(long, default_value_t = 1)]
        num_layer: usize,
        #[arg(long, value_enum, default_value_t = Mode::Windowed)]
        mode: Mode,
        #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
        block: u64,
        /// Seconds of audio to process.
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
    },
    /// Time-budgeted random search; writes the results CSV.
    Hpsearch {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Per-trial budget in seconds.
        #[arg(long, default_value_t = 180.0)]
        budget: f64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        max_epochs: u64,
        /// Early-stopping patience; by default trials run to their budget.
        #[arg(long, default_value_t = 1_000_000)]
        patience: usize,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        stride: u64,
        #[arg(long)]
        gain_feature: bool,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [64, 2048])]
        batch_range: Vec<usize>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [25, 400])]
        step_range: Vec<usize>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [8, 256])]
        hidden_range: Vec<usize>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1, 2])]
        layer_range: Vec<usize>,
    },
    /// Reduce a hypersearch CSV to (batch_size, num_step, num_hidden, rmse)
    /// tuples.
    PlotData {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Per-epoch losses as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    num_step: usize,
    #[arg(long, default_value_t = 24)]
    num_hidden: usize,
    #[arg(long, default_value_t = 1)]
    num_layer: usize,
    /// Append the gain knob as a second input feature.
    #[arg(long)]
    gain_feature: bool,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: u64,
    #[arg(long, default_value = "adam")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 1.0)]
    dropout_keep: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Xavier)]
    init: InitArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    /// Stop after the first epoch that ends past this many seconds.
    #[arg(long)]
    time_budget: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Xavier,
    He,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            _ if e.is_numeric() => 4,
            Error::Io { .. } | Error::Wav(_) | Error::ModelFile(_) | Error::Parse { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Generate { ref out, duration, ref gains } => generate(&cli, out, duration, gains),
        Command::Train(ref args) => train_cmd(&cli, args),
        Command::Eval {
            ref data,
            ref model,
            split,
            per_gain,
        } => eval(&cli, data, model, split.into(), per_gain),
        Command::Stream {
            ref model,
            ref input,
            ref output,
            block,
            mode,
            gain,
        } => stream(&cli, model, input, output, block as usize, mode.into(), gain),
        Command::Bench {
            ref model,
            num_hidden,
            num_step,
            num_layer,
            mode,
            block,
            duration,
        } => {
            let params = match model {
                Some(path) => load_model(path)?,
                None => {
                    let cfg = ModelConfig {
                        num_step,
                        num_hidden,
                        num_layer,
                        num_feature: 1,
                        sample_rate: cli.sample_rate,
                    };
                    init_params(&cfg, InitScheme::Xavier, &mut Rng::new(cli.seed))?
                }
            };
            let report = match cli.precision {
                Precision::F64 => benchmark_throughput(Arc::new(params), mode.into(), block as usize, duration)?,
                Precision::F32 => benchmark_throughput(Arc::new(params.cast::<f32>()), mode.into(), block as usize, duration)?,
            };
            print_bench(&report);
            Ok(())
        }
        Command::Hpsearch { .. } => hpsearch(&cli),
        Command::PlotData { ref input, ref output } => {
            let text = std::fs::read_to_string(input).map_err(|e| io_failure(input, e))?;
            let csv = plot_data_to_csv(&plot_points(&results_from_csv(&text)?));
            match output {
                Some(path) => std::fs::write(path, csv).map_err(|e| io_failure(path, e))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn generate(cli: &Cli, out: &Path, duration: f64, gains: &[f64]) -> CliResult {
    let mut rng = Rng::new(cli.seed);
    let excitation = generate_excitation(duration, cli.sample_rate, &mut rng)?;
    let ds = build_dataset(&excitation, gains, &AmpParams::default())?;
    export_dataset(out, &ds)?;
    eprintln!(
        "wrote {} samples ({} gain segment(s)) to {}",
        ds.len(),
        ds.segments.len(),
        out.display()
    );
    println!("samples={}", ds.len());
    println!("segments={}", ds.segments.len());
    Ok(())
}

fn load_split(dir: &Path, num_step: usize) -> Result<Dataset, Failure> {
    let ds = import_dataset(dir)?;
    Ok(split_dataset(ds, DEFAULT_SPLIT_RATIOS, num_step)?)
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> CliResult {
    let ds = load_split(&a.data, a.num_step)?;
    let cfg = ModelConfig {
        num_step: a.num_step,
        num_hidden: a.num_hidden,
        num_layer: a.num_layer,
        num_feature: if a.gain_feature { 2 } else { 1 },
        sample_rate: ds.sample_rate(),
    };
    cfg.validate()?;
    let time_budget = match a.time_budget {
        Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
        Some(_) => return Err(usage("--time-budget must be positive")),
        None => None,
    };
    let tc = TrainConfig {
        batch_size: a.batch_size as usize,
        learning_rate: a.lr,
        optimizer: a.optimizer,
        init_scheme: match a.init {
            InitArg::Xavier => InitScheme::Xavier,
            InitArg::He => InitScheme::He,
        },
        dropout_keep_prob: a.dropout_keep,
        max_epochs: a.epochs as usize,
        patience: a.patience,
        seed: cli.seed,
        stride: a.stride as usize,
        time_budget,
    };
    eprintln!("training {cfg:?} on {} samples", ds.len());
    let result = train(&cfg, &tc, &ds);
    let (params, history) = match result {
        Ok(r) => r,
        Err(Error::Diverged { epoch, reason, history }) => {
            if let Some(path) = &a.history {
                std::fs::write(path, history.to_csv()).map_err(|e| io_failure(path, e))?;
            }
            return Err(Failure {
                code: 4,
                message: format!("training diverged at epoch {epoch}: {reason}"),
            });
        }
        Err(e) => return Err(e.into()),
    };
    for e in &history.epochs {
        eprintln!(
            "epoch {:>4}  train_mse {:.4e}  test_mse {:.4e}  {:>8.1}s",
            e.epoch, e.train_mse, e.test_mse, e.wall_seconds
        );
    }
    save_model(&a.model, &params)?;
    if let Some(path) = &a.history {
        std::fs::write(path, history.to_csv()).map_err(|e| io_failure(path, e))?;
    }
    let rmse = evaluate_split(&params, &ds, Split::Validation)?;
    let last = history.epochs.last().expect("at least one epoch");
    println!("epochs={}", history.len());
    println!("best_test_mse={}", history.best_test_mse().unwrap_or(f64::NAN));
    println!("wall_seconds={}", last.wall_seconds);
    println!("rmse_percent={rmse:.6}");
    Ok(())
}

fn eval(cli: &Cli, data: &Path, model: &Path, split: Split, per_gain: bool) -> CliResult {
    let params = load_model(model)?;
    let ds = load_split(data, params.config().num_step)?;
    let rmse = match cli.precision {
        Precision::F64 => evaluate_split(&params, &ds, split)?,
        Precision::F32 => split_rmse_streamed(&params.cast::<f32>(), &ds, split)?,
    };
    println!("rmse_percent={rmse:.6}");
    if per_gain {
        for (gain, r) in per_gain_rmse(&params, &ds, split)? {
            println!("gain={gain} rmse_percent={r:.6}");
        }
    }
    Ok(())
}

/// Split RMSE computed by streaming each gain segment through a windowed
/// stream, for precisions other than the training one.
fn split_rmse_streamed<T: Real>(params: &LstmParams<T>, ds: &Dataset, split: Split) -> Result<f64, Failure> {
    let f = params.config().num_feature;
    let model = Arc::new(params.clone());
    let mut preds = Vec::new();
    let mut targets = Vec::new();
    for r in ds.split_ranges(split)? {
        let start = ds.segment_start(r.start);
        let rows: Vec<T> = (start..r.end)
            .flat_map(|n| [ds.x.samples[n], ds.g[n]].into_iter().take(f))
            .map(T::of)
            .collect();
        let out = StreamState::new(model.clone(), StreamMode::Windowed).process(&rows)?;
        preds.extend(out[r.start - start..].iter().map(|&v| Real::to_f64(v)));
        targets.extend_from_slice(&ds.target.samples[r.clone()]);
    }
    Ok(relative_rmse_percent(&preds, &targets)?)
}

fn stream(cli: &Cli, model: &Path, input: &Path, output: &Path, block: usize, mode: StreamMode, gain: f64) -> CliResult {
    let params = load_model(model)?;
    let audio = read_wav(input)?;
    let f = params.config().num_feature;
    let rows = feature_rows(&audio.samples, f, gain / ampnet::amp::MAX_GAIN_KNOB);
    let out = match cli.precision {
        Precision::F64 => stream_blocks(Arc::new(params), mode, &rows, f, block)?,
        Precision::F32 => {
            let rows32: Vec<f32> = rows.iter().map(|&v| v as f32).collect();
            stream_blocks(Arc::new(params.cast::<f32>()), mode, &rows32, f, block)?
        }
    };
    write_wav(output, &AudioSignal::new(out, audio.sample_rate)?)?;
    eprintln!("wrote {} samples to {}", audio.len(), output.display());
    println!("samples={}", audio.len());
    Ok(())
}

fn stream_blocks<T: Real>(
    model: Arc<LstmParams<T>>,
    mode: StreamMode,
    rows: &[T],
    f: usize,
    block: usize,
) -> Result<Vec<f64>, Failure> {
    let mut s = StreamState::new(model, mode);
    s.reserve(block);
    let mut out = Vec::with_capacity(rows.len() / f);
    let mut buf = vec![T::zero(); block];
    for chunk in rows.chunks(block * f) {
        let n = chunk.len() / f;
        s.process_block(chunk, &mut buf[..n])?;
        out.extend(buf[..n].iter().map(|&v| Real::to_f64(v)));
    }
    Ok(out)
}

fn print_bench(r: &ThroughputReport) {
    eprintln!(
        "{} mode: {:.0} samples/s, real-time factor {:.3}",
        r.mode.name(),
        r.samples_per_second,
        r.real_time_factor
    );
    println!("{}", ThroughputReport::CSV_HEADER);
    println!("{}", r.csv_row());
}

fn hpsearch(cli: &Cli) -> CliResult {
    let Command::Hpsearch {
        ref data,
        ref out,
        trials,
        budget,
        workers,
        max_epochs,
        patience,
        stride,
        gain_feature,
        ref batch_range,
        ref step_range,
        ref hidden_range,
        ref layer_range,
    } = cli.command
    else {
        unreachable!()
    };
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(usage("--budget must be positive"));
    }
    let space = SearchSpace {
        batch_size: LogRange::new(batch_range[0], batch_range[1]),
        num_step: LogRange::new(step_range[0], step_range[1]),
        num_hidden: LogRange::new(hidden_range[0], hidden_range[1]),
        num_layer: (layer_range[0], layer_range[1]),
    };
    space.validate()?;
    let ds = load_split(data, space.num_step.hi)?;
    let mut settings = TrialSettings::new(Duration::from_secs_f64(budget));
    settings.num_feature = if gain_feature { 2 } else { 1 };
    settings.train.max_epochs = max_epochs as usize;
    settings.train.patience = patience;
    settings.train.stride = stride as usize;
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    eprintln!("running {trials} trial(s) of {budget} s on {workers} worker(s)");
    let results = search(&space, &ds, trials as usize, &settings, workers, cli.seed)?;
    std::fs::write(out, results_to_csv(&results)).map_err(|e| io_failure(out, e))?;
    eprintln!("{}", summary_line(&results));
    println!("trials={}", results.len());
    println!("best_rmse_percent={}", results[0].rmse_percent);
    if results.len() >= 2 {
        match hidden_rmse_correlation(&results) {
            Ok(rho) => println!("spearman_hidden_rmse={rho}"),
            Err(e) => eprintln!("rank correlation unavailable: {e}"),
        }
    }
    Ok(())
}
