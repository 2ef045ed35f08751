//! The `corrgan` command line: one binary whose subcommands cover the
//! whole pipeline, from elliptope sampling to the guessing-game server.
//!
//! Every run writes a `run-manifest` into its output directory. Errors are
//! reported as a single `error: code=.. kind=.. msg=".."` line on stderr
//! with exit status 2 (usage), 3 (configuration), 4 (file access or
//! format) or 1 (anything else).

mod commands;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use error::{error_line, CliError, EXIT_CONFIG, EXIT_FAILURE, EXIT_IO, EXIT_OK, EXIT_USAGE};
pub use manifest::{manifest_argv, RunManifest, RUN_MANIFEST_FILE};

/// Environment variable holding the log filter (`warn` by default).
pub const LOG_ENV: &str = "CORRGAN_LOG";

#[derive(Debug, Parser)]
#[command(name = "corrgan", version, about = "Correlation-matrix GAN workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw correlation matrices uniformly from the elliptope.
    SampleElliptope(SampleArgs),
    /// Estimate rolling-window correlation matrices from a return panel.
    BuildDataset(BuildArgs),
    /// Reorder matrices into their canonical hierarchical order.
    Canonicalize(CanonicalizeArgs),
    /// Train a GAN on a directory of canonical correlation matrices.
    Train(TrainArgs),
    /// Sample raw matrices from a trained generator.
    Generate(GenerateArgs),
    /// Project matrices onto the nearest correlation matrix.
    Repair(RepairArgs),
    /// Compare two matrix sets on the stylized facts.
    Evaluate(EvaluateArgs),
    /// Run the real-or-fake guessing game over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMethod {
    Onion,
    Rejection,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SampleMethod::Onion)]
    pub method: SampleMethod,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKindArg {
    Simple,
    Log,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[arg(long, value_enum)]
    pub source: Source,
    /// Wide return CSV (`date,<ticker>...`); required with `--source real`.
    #[arg(long)]
    pub returns: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReturnKindArg::Simple)]
    pub return_kind: ReturnKindArg,
    /// Synthetic market: number of assets.
    #[arg(long, default_value_t = 100)]
    pub assets: usize,
    /// Synthetic market: number of trading days.
    #[arg(long, default_value_t = 2520)]
    pub days: usize,
    #[arg(long, default_value_t = 4)]
    pub sectors: usize,
    #[arg(long, default_value_t = 0.013)]
    pub market_vol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta_low: f64,
    #[arg(long, default_value_t = 1.5)]
    pub beta_high: f64,
    #[arg(long, default_value_t = 0.010)]
    pub sector_loading: f64,
    #[arg(long, default_value_t = 0.015)]
    pub idio_vol: f64,
    #[arg(long, default_value_t = 252)]
    pub window: usize,
    #[arg(long, default_value_t = 21)]
    pub stride: usize,
    #[arg(long, default_value_t = 20)]
    pub universe_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CanonicalizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Dense,
    Conv,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Directory of canonical corrmat-csv files.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Dense)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 32)]
    pub latent_dim: usize,
    /// Comma-separated widths; defaults depend on the variant.
    #[arg(long, value_delimiter = ',')]
    pub generator_widths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub discriminator_widths: Option<Vec<usize>>,
    /// `relu`, `tanh`, `sigmoid` or `leaky_relu:<slope>`.
    #[arg(long)]
    pub generator_activation: Option<String>,
    #[arg(long)]
    pub discriminator_activation: Option<String>,
    #[arg(long)]
    pub batch_norm: Option<bool>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub generator_lr: f64,
    #[arg(long, default_value_t = 2e-4)]
    pub discriminator_lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long)]
    pub label_smoothing: bool,
    /// Write `checkpoints/step_XXXXXXXX.ckpt` every this many steps.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RepairArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.0)]
    pub psd_floor: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    /// Observations behind each matrix (sets the Marchenko–Pastur ratio).
    #[arg(long, default_value_t = 252)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub mean_diff_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub std_diff_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub lambda1_ks_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub pf_rate_diff_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub hierarchy_ks_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub degree_chi2_per_obs_max: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub real_dir: PathBuf,
    #[arg(long)]
    pub fake_dir: PathBuf,
    /// Append-only JSONL guess log, replayed on start.
    #[arg(long)]
    pub log_file: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Seed for challenge draws; entropy when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3600)]
    pub ttl_secs: u64,
    /// Directory served at `/` (the web client build).
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Where to write the run-manifest; none is written when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SampleElliptope(_) => "sample-elliptope",
            Command::BuildDataset(_) => "build-dataset",
            Command::Canonicalize(_) => "canonicalize",
            Command::Train(_) => "train",
            Command::Generate(_) => "generate",
            Command::Repair(_) => "repair",
            Command::Evaluate(_) => "evaluate",
            Command::Serve(_) => "serve",
        }
    }

    fn config(&self) -> serde_json::Value {
        let v = match self {
            Command::SampleElliptope(a) => serde_json::to_value(a),
            Command::BuildDataset(a) => serde_json::to_value(a),
            Command::Canonicalize(a) => serde_json::to_value(a),
            Command::Train(a) => serde_json::to_value(a),
            Command::Generate(a) => serde_json::to_value(a),
            Command::Repair(a) => serde_json::to_value(a),
            Command::Evaluate(a) => serde_json::to_value(a),
            Command::Serve(a) => serde_json::to_value(a),
        };
        v.expect("argument structs serialize")
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::SampleElliptope(a) => Some(a.seed),
            Command::BuildDataset(a) => Some(a.seed),
            Command::Train(a) => Some(a.seed),
            Command::Generate(a) => Some(a.seed),
            Command::Serve(a) => a.seed,
            Command::Canonicalize(_) | Command::Repair(_) | Command::Evaluate(_) => None,
        }
    }

    fn out(&self) -> Option<&Path> {
        match self {
            Command::SampleElliptope(a) => Some(&a.out),
            Command::BuildDataset(a) => Some(&a.out),
            Command::Canonicalize(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Generate(a) => Some(&a.out),
            Command::Repair(a) => Some(&a.out),
            Command::Evaluate(a) => Some(&a.out),
            Command::Serve(a) => a.out.as_deref(),
        }
    }

    fn inputs(&self) -> Vec<&Path> {
        match self {
            Command::SampleElliptope(_) => vec![],
            Command::BuildDataset(a) => a.returns.iter().map(|p| p.as_path()).collect(),
            Command::Canonicalize(a) => vec![&a.input],
            Command::Train(a) => vec![&a.data],
            Command::Generate(a) => vec![&a.model],
            Command::Repair(a) => vec![&a.input],
            Command::Evaluate(a) => vec![&a.reference, &a.candidate],
            Command::Serve(a) => {
                let mut v = vec![a.real_dir.as_path(), a.fake_dir.as_path(), a.log_file.as_path()];
                v.extend(a.static_dir.as_deref());
                v
            }
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

fn same_path(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Refuses an output directory that coincides with, or contains, an input.
fn check_out(cmd: &Command) -> Result<(), CliError> {
    let Some(out) = cmd.out() else { return Ok(()) };
    for input in cmd.inputs() {
        let clash = same_path(out, input)
            || input.parent().is_some_and(|p| !p.as_os_str().is_empty() && same_path(out, p) && input.is_file());
        if clash {
            return Err(CliError::Config(format!(
                "--out {} would overwrite input {}",
                out.display(),
                input.display()
            )));
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_line(EXIT_USAGE, "usage", first));
            eprint!("{}", e.render());
            return EXIT_USAGE;
        }
    };
    let cmd = cli.command;
    if let Err(e) = check_out(&cmd) {
        return report(&e);
    }
    let mut manifest = RunManifest {
        subcommand: cmd.name(),
        argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        config: cmd.config(),
        seed: cmd.seed(),
        started: chrono::Utc::now().to_rfc3339(),
        results: Vec::new(),
    };
    let out = cmd.out().map(Path::to_path_buf);
    if let Some(dir) = &out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return report(&CliError::io(dir, e));
        }
    }
    let outcome = commands::execute(&cmd, &mut manifest.results);
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error code={} kind={}", e.exit_code(), e.kind()),
    };
    if let Some(dir) = &out {
        if let Err(e) = manifest.write(dir, &status) {
            return report(&e);
        }
    }
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> i32 {
    let code = e.exit_code();
    eprintln!("{}", error_line(code, e.kind(), &e.to_string()));
    code
}
