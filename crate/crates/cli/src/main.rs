//! `benchaudit` — contamination auditing for text-completion endpoints.

mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use benchaudit_core::perturb::{MaskStrategy, PermutationMode, PermutationSampling};
use benchaudit_core::probes::ProbeKind;

/// Exit codes are a CI contract: 0 success, 1 data/config error, 2 endpoint
/// failure after retries.
pub const EXIT_DATA: u8 = 1;
pub const EXIT_ENDPOINT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "benchaudit",
    version,
    about = "Audit benchmark contamination signals of a text-completion endpoint",
    long_about = "Runs TS-Guessing, Min-K likelihood, and translation-aware (TACD) probes \
                  against any endpoint speaking the completions wire contract, and verifies \
                  every signal offline against a deterministic mock model."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate dataset files and (for multi-language MCQ) their alignment
    Validate(ValidateArgs),
    /// Print descriptive corpus statistics
    Stats(StatsArgs),
    /// Run one probe against an endpoint and write a report
    Audit(AuditArgs),
    /// Sweep contamination levels against the in-process mock model
    Sweep(SweepArgs),
    /// Serve the deterministic mock model over HTTP
    MockServe(MockServeArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset files (JSON Lines); repeat per language
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    /// Write the statistics as JSON here as well
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProbeArg {
    TsMcq,
    TsQa,
    Mink,
    Tacd,
}

impl From<ProbeArg> for ProbeKind {
    fn from(value: ProbeArg) -> Self {
        match value {
            ProbeArg::TsMcq => ProbeKind::TsMcq,
            ProbeArg::TsQa => ProbeKind::TsQa,
            ProbeArg::Mink => ProbeKind::Mink,
            ProbeArg::Tacd => ProbeKind::Tacd,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PermutationModeArg {
    Shared,
    PerLanguage,
}

impl From<PermutationModeArg> for PermutationMode {
    fn from(value: PermutationModeArg) -> Self {
        match value {
            PermutationModeArg::Shared => PermutationMode::Shared,
            PermutationModeArg::PerLanguage => PermutationMode::PerLanguage,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskStrategyArg {
    LongestContentWord,
    RarestByCorpusFrequency,
}

impl From<MaskStrategyArg> for MaskStrategy {
    fn from(value: MaskStrategyArg) -> Self {
        match value {
            MaskStrategyArg::LongestContentWord => MaskStrategy::LongestContentWord,
            MaskStrategyArg::RarestByCorpusFrequency => MaskStrategy::RarestByCorpusFrequency,
        }
    }
}

#[derive(Args)]
struct AuditArgs {
    /// Which probe to run
    #[arg(value_enum)]
    probe: ProbeArg,
    /// Dataset files; tacd takes one per language
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    /// Held-out (non-member) dataset, mink only
    #[arg(long)]
    heldout: Option<PathBuf>,
    /// Endpoint base URL (POST {endpoint}/v1/complete)
    #[arg(long)]
    endpoint: String,
    /// Top-level seed; every derived random stream is keyed from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Condition label recorded in the report (the p the endpoint is believed
    /// to have been exposed to)
    #[arg(long, default_value_t = 0)]
    p: u32,
    /// Languages for tacd, comma-separated; defaults to the dataset languages
    #[arg(long, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    /// Min-K percentage in (0, 100]
    #[arg(long, default_value_t = 20.0)]
    k_percent: f64,
    #[arg(long, value_enum, default_value_t = PermutationModeArg::Shared)]
    permutation_mode: PermutationModeArg,
    #[arg(long, value_enum, default_value_t = MaskStrategyArg::LongestContentWord)]
    mask_strategy: MaskStrategyArg,
    /// Sample only permutations that move the gold choice (deviation from the
    /// unrestricted default; shifts the IDR chance floor)
    #[arg(long)]
    displace_gold: bool,
    /// Maximum requests in flight
    #[arg(long, default_value_t = 4)]
    max_parallel: usize,
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    /// Attempts per request (retries transient failures only)
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, default_value_t = 64)]
    max_output_tokens: u32,
    /// Environment variable holding the bearer token
    #[arg(long)]
    auth_env: Option<String>,
    /// Report path; the per-record table lands next to it
    #[arg(long)]
    out: PathBuf,
}

impl AuditArgs {
    fn sampling(&self) -> PermutationSampling {
        if self.displace_gold {
            PermutationSampling::DisplaceGold
        } else {
            PermutationSampling::Unrestricted
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// MCQ dataset files, one per language
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    /// Contamination levels to sweep
    #[arg(long = "p-list", value_delimiter = ',', default_value = "0,10,50,100")]
    p_list: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Languages, comma-separated; defaults to the dataset languages
    #[arg(long, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    /// Mock: probability a memorized item replays its original gold letter
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Mock: probability a memorized item answers language-independently
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    base_accuracy: f64,
    #[arg(long)]
    surface_memory: bool,
    /// Collapse the beta branch onto one global letter (e.g. A)
    #[arg(long)]
    collapse_letter: Option<char>,
    #[arg(long, value_enum, default_value_t = PermutationModeArg::Shared)]
    permutation_mode: PermutationModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MockServeArgs {
    /// Dataset files the mock is allowed to "remember"
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8071")]
    addr: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Contamination level: percentage of instances marked memorized
    #[arg(long, default_value_t = 0)]
    p: u32,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    base_accuracy: f64,
    #[arg(long)]
    surface_memory: bool,
    #[arg(long)]
    collapse_letter: Option<char>,
    /// Member/non-member logprob profile
    #[arg(long, default_value_t = -0.5)]
    member_mean: f64,
    #[arg(long, default_value_t = 0.2)]
    member_std: f64,
    #[arg(long, default_value_t = -2.5)]
    nonmember_mean: f64,
    #[arg(long, default_value_t = 0.8)]
    nonmember_std: f64,
    #[arg(long, default_value = "xyzzy")]
    dummy_token: String,
    /// Random response delay range in ms, as lo:hi
    #[arg(long)]
    delay_ms: Option<String>,
    /// Respond 429 to the first N hits of each prompt (fault injection)
    #[arg(long, default_value_t = 0)]
    fault_429: u32,
}

/// A failure with its CI exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn data(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, message: message.into() }
    }

    pub fn endpoint(message: impl Into<String>) -> Self {
        Failure { code: EXIT_ENDPOINT, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version are not errors
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(EXIT_DATA);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Validate(args) => commands::validate(args),
        Command::Stats(args) => commands::stats(args),
        Command::Audit(args) => commands::audit(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::MockServe(args) => commands::mock_serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
