use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use abundanza::ha::ScanOptions;
use abundanza::realball::{DEFAULT_PRECISION, MAX_PRECISION};
use abundanza::verifiers::Criterion;
use abundanza::PrecisionPolicy;

mod commands;
mod output;
mod points;

use output::Format;

/// Colossally abundant numbers, highest abundant numbers and certified
/// Robin / Lagarias audits.
#[derive(Parser)]
#[command(name = "abundanza", version)]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct RunConfig {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Write results here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Starting working precision in bits.
    #[arg(long, default_value_t = DEFAULT_PRECISION, global = true)]
    pub precision: u32,
    /// Last rung of the precision retry ladder, in bits.
    #[arg(long, env = "ABUNDANZA_MAX_PRECISION", default_value_t = MAX_PRECISION, global = true)]
    pub max_precision: u32,
    /// Largest n any sieve-backed command may touch.
    #[arg(long, default_value_t = abundanza::ha::DEFAULT_SIEVE_BUDGET, global = true)]
    pub sieve_budget: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Keep going when critical epsilons cannot be separated.
    #[arg(long, global = true)]
    pub allow_ties: bool,
}

impl RunConfig {
    pub fn policy(&self) -> abundanza::Result<PrecisionPolicy> {
        PrecisionPolicy::new(self.precision, self.max_precision)
    }

    pub fn scan_options(&self) -> abundanza::Result<ScanOptions> {
        Ok(ScanOptions {
            policy: self.policy()?,
            budget: self.sieve_budget,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Colossally abundant numbers.
    #[command(subcommand)]
    Ca(CaCommand),
    /// Superabundant numbers.
    #[command(subcommand)]
    Sa(SaCommand),
    /// Highest abundant numbers of R_s.
    #[command(subcommand)]
    Ha(HaCommand),
    /// Certified inequality scan over a range.
    Verify(VerifyArgs),
    /// Lower convex envelope of points read from CSV (x,y_midpoint,y_radius).
    Envelope {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum CaCommand {
    /// The first COUNT CA numbers with their epsilon intervals and T(n).
    List {
        #[arg(long)]
        count: usize,
    },
}

#[derive(Subcommand)]
enum SaCommand {
    /// Every SA number up to LIMIT.
    List {
        #[arg(long)]
        limit: u64,
    },
}

#[derive(Subcommand)]
enum HaCommand {
    /// Envelope vertices of R_s over lo..=hi.
    Compute {
        #[arg(long)]
        lo: u64,
        #[arg(long)]
        hi: u64,
        /// Weight exponent: integer, decimal or fraction such as 1/2.
        #[arg(long, default_value = "1")]
        s: String,
        /// Also emit every point with envelope values for plotting.
        #[arg(long)]
        figure: bool,
        /// Where the CSV figure table goes (default: after the report).
        #[arg(long, requires = "figure")]
        figure_output: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, ValueEnum)]
pub enum Which {
    Robin,
    Lagarias,
    Sandwich,
    RobinLower,
}

impl From<Which> for Criterion {
    fn from(w: Which) -> Self {
        match w {
            Which::Robin => Criterion::Robin,
            Which::Lagarias => Criterion::Lagarias,
            Which::Sandwich => Criterion::Sandwich,
            Which::RobinLower => Criterion::RobinLower,
        }
    }
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub which: Which,
    #[arg(long)]
    pub lo: u64,
    #[arg(long)]
    pub hi: u64,
    /// Resume from and update this frontier file ("last_certified=<n>").
    #[arg(long)]
    pub frontier: Option<PathBuf>,
    /// Emit a record for every n, not only violations.
    #[arg(long)]
    pub all_records: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot configure {k} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = &cli.config;
    let result = match cli.command {
        Command::Ca(CaCommand::List { count }) => commands::ca_list(cfg, count),
        Command::Sa(SaCommand::List { limit }) => commands::sa_list(cfg, limit),
        Command::Ha(HaCommand::Compute {
            lo,
            hi,
            s,
            figure,
            figure_output,
        }) => commands::ha_compute(cfg, lo, hi, &s, figure, figure_output.as_deref()),
        Command::Verify(args) => commands::verify(cfg, &args),
        Command::Envelope { input } => commands::envelope(cfg, &input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
