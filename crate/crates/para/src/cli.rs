//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "para",
    version,
    about = "Spectral compression for low-rank adapters",
    long_about = "Decomposes trained low-rank adapter pairs in their rank-r subspace, pools \
singular values across the whole checkpoint, prunes them under a global threshold and writes \
heterogeneous-rank adapters plus analysis reports. Set PARA_LOG=info|debug for progress output."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    /// Keep a fixed fraction of the total rank budget.
    Gamma,
    /// Keep the smallest prefix holding a fraction of the spectral energy.
    Epsilon,
    /// Ablation: uniform per-layer rank.
    Local,
    /// Ablation: drop the k globally largest values.
    Topk,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Gamma => "gamma",
            PolicyKind::Epsilon => "epsilon",
            PolicyKind::Local => "local",
            PolicyKind::Topk => "topk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormatArg {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Threshold policy.
    #[arg(long, value_enum)]
    pub policy: PolicyKind,
    /// Policy parameter: gamma/epsilon in (0, 1], integer for local/topk.
    #[arg(long)]
    pub value: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose an adapter and write spectrum.json, histogram.csv and
    /// energy_curve.csv.
    Analyze {
        /// Adapter checkpoint directory.
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Histogram bin count.
        #[arg(long, default_value_t = 64)]
        bins: usize,
        /// Worker threads for the decomposition phase (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compress an adapter under a threshold policy.
    Compress {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Also write report.csv next to report.json.
        #[arg(long, value_enum, default_value_t = ReportFormatArg::Json)]
        report_format: ReportFormatArg,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Derive one compressed child per value from a single decomposition
    /// pass.
    Family {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Strictly monotone list, e.g. --values 0.5,0.25,0.1
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ReportFormatArg::Json)]
        report_format: ReportFormatArg,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a compressed child against its parent with brute-force
    /// materialization.
    Verify {
        parent: PathBuf,
        child: PathBuf,
        /// Write the verification report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic adapter with a planted spectrum.
    Synth {
        #[arg(long)]
        layers: usize,
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        rank: usize,
        /// flat | power_law:<decay> | bimodal:<big_count>,<big_val>,<small_val>
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}
