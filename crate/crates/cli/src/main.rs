//! `astft`: synthesis, transforms, window optimisation, metrics and the
//! cross-domain training demo.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical
//! divergence.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adaptive_stft::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "astft", version, about = "Adaptive-window STFT toolkit")]
struct Cli {
    /// `key=value` config file applied on top of the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key; repeatable. Applied after `--config`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic two-domain dataset and its manifests.
    Synth(SynthArgs),
    /// Transform one signal file and report its quality.
    Transform(TransformArgs),
    /// Minimise BSQ over the window lengths of one signal.
    OptimizeWindow(OptimizeArgs),
    /// Train on the two-domain task and evaluate on the target domain.
    Transfer(TransferArgs),
    /// Quality report for spectrogram CSV files.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    sample_len: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    /// Signal file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// stft, dstft or mdstft.
    #[arg(long)]
    mode: Option<String>,
    /// Window-length file (mdstft) or single shared length (dstft).
    #[arg(long)]
    lengths: Option<PathBuf>,
    #[arg(long)]
    support: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Spectrogram CSV to write.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write interleaved complex coefficients instead of magnitudes.
    #[arg(long)]
    complex: bool,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// mdstft (one length per frame) or dstft (one shared length).
    #[arg(long)]
    mode: Option<String>,
    /// Initial lengths; defaults to the full support.
    #[arg(long)]
    lengths: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    soft_width: Option<f64>,
    #[arg(long)]
    support: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Window-length file to write.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Trajectory CSV; defaults to `<output>.trajectory.csv`.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TransferArgs {
    /// Directory written by `synth`; generated in memory when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for history, checkpoint and report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_epoch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `off` zeroes the domain term.
    #[arg(long)]
    lambda0: Option<String>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Spectrogram CSV files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Print a table ranked by ascending BSQ.
    #[arg(long)]
    compare: bool,
    #[arg(long)]
    alpha: Option<f64>,
    /// Also write `<file>.cv.csv` with the per-row and per-column
    /// coefficient vectors.
    #[arg(long)]
    cv: bool,
}

fn put(cfg: &mut RunConfig, key: &str, v: Option<impl ToString>) -> Result<(), commands::Failure> {
    if let Some(v) = v {
        cfg.set(key, &v.to_string()).map_err(|e| commands::Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn resolve(cli: &Cli) -> Result<RunConfig, commands::Failure> {
    use commands::Failure;
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        put(&mut cfg, k.trim(), Some(v))?;
    }
    let c = &mut cfg;
    match &cli.command {
        Command::Synth(a) => {
            put(c, "classes", a.classes)?;
            put(c, "per_class", a.per_class)?;
            put(c, "seed", a.seed)?;
            put(c, "sample_rate", a.sample_rate)?;
            put(c, "sample_len", a.sample_len)?;
            put(c, "output", path_str(&a.out))?;
        }
        Command::Transform(a) => {
            put(c, "input", path_str(&a.input))?;
            put(c, "mode", a.mode.as_ref())?;
            put(c, "lengths", path_str(&a.lengths))?;
            put(c, "support", a.support)?;
            put(c, "hop", a.hop)?;
            put(c, "beta", a.beta)?;
            put(c, "output", path_str(&a.output))?;
            if a.complex {
                put(c, "complex", Some("on"))?;
            }
        }
        Command::OptimizeWindow(a) => {
            put(c, "input", path_str(&a.input))?;
            put(c, "mode", a.mode.as_ref())?;
            put(c, "lengths", path_str(&a.lengths))?;
            put(c, "iterations", a.iterations)?;
            put(c, "lr_window", a.lr)?;
            put(c, "soft_width", a.soft_width)?;
            put(c, "support", a.support)?;
            put(c, "hop", a.hop)?;
            put(c, "beta", a.beta)?;
            put(c, "output", path_str(&a.output))?;
        }
        Command::Transfer(a) => {
            put(c, "data_dir", path_str(&a.data))?;
            put(c, "output", path_str(&a.out))?;
            put(c, "max_epoch", a.max_epoch)?;
            put(c, "seed", a.seed)?;
            put(c, "lambda0", a.lambda0.as_ref())?;
            put(c, "lambda1", a.lambda1)?;
            put(c, "lambda2", a.lambda2)?;
            put(c, "per_class", a.per_class)?;
            put(c, "batch_size", a.batch_size)?;
        }
        Command::Metrics(a) => {
            put(c, "alpha", a.alpha)?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), commands::Failure> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::Transform(_) => commands::transform(&cfg),
        Command::OptimizeWindow(a) => commands::optimize_window(&cfg, a.trajectory),
        Command::Transfer(a) => commands::transfer(&cfg, a.quiet),
        Command::Metrics(a) => commands::metrics(&cfg, &a.files, a.compare, a.cv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
