//! `fairval` — command-line surface of the valuation engine.
//!
//! Subcommands mirror the engine stages: `validate` checks the registry and
//! data files, `history` renders historical earnings tables, `dcf` the
//! intrinsic valuations, `multiples` the comparable-analysis series, and
//! `report` the full document. Exit status is 0 iff there were no
//! file-level errors and every requested asset produced output.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fairval_core::report::{self, CommandKind, OutputFormat, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "fairval",
    version,
    about = "Fundamentals valuation: DCF fair prices, growth history, and valuation multiples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Asset registry file (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    registry: Option<PathBuf>,

    /// Data directory with one CSV per asset; defaults to $FAIRVAL_DATA
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Markdown)]
    format: FormatArg,

    /// Write the document here instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Override the annual revenue growth assumption (fraction)
    #[arg(long, global = true, value_name = "F")]
    growth: Option<f64>,

    /// Override the perpetual growth rate (fraction)
    #[arg(long = "perpetual-growth", global = true, value_name = "F")]
    perpetual_growth: Option<f64>,

    /// Override the projection horizon (years)
    #[arg(long, global = true, value_name = "N")]
    horizon: Option<u32>,

    /// Override the fair-verdict band (fraction, default 0.10)
    #[arg(long, global = true, value_name = "F")]
    band: Option<f64>,

    /// Restrict the run to these tickers
    #[arg(long, global = true, value_name = "T1,T2,...", value_delimiter = ',')]
    assets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse registry and data files, reporting per-file diagnostics
    Validate,
    /// Historical quarterly earnings with growth and compound growth rate
    History,
    /// Discounted cash-flow valuation tables with fair prices and verdicts
    Dcf,
    /// Market-cap multiples, sector comparisons, and plot data
    Multiples,
    /// Full document: assumptions, histories, valuations, multiples, errata,
    /// deviations vs reference tables
    Report,
}

impl From<&Command> for CommandKind {
    fn from(c: &Command) -> CommandKind {
        match c {
            Command::Validate => CommandKind::Validate,
            Command::History => CommandKind::History,
            Command::Dcf => CommandKind::Dcf,
            Command::Multiples => CommandKind::Multiples,
            Command::Report => CommandKind::Report,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> OutputFormat {
        match f {
            FormatArg::Markdown => OutputFormat::Markdown,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let Some(registry_path) = cli.registry else {
        bail!("--registry PATH is required");
    };
    let data_dir = match cli.data {
        Some(d) => d,
        None => match std::env::var_os("FAIRVAL_DATA") {
            Some(d) => PathBuf::from(d),
            None => bail!("no data directory: pass --data DIR or set FAIRVAL_DATA"),
        },
    };

    let cfg = RunConfig {
        registry_path,
        data_dir,
        command: (&cli.command).into(),
        format: cli.format.into(),
        assets: cli.assets,
        overrides: Overrides {
            growth: cli.growth,
            perpetual_growth: cli.perpetual_growth,
            horizon: cli.horizon,
            band: cli.band,
        },
    };
    let outcome = report::run(&cfg)?;

    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    for error in &outcome.errors {
        eprintln!("error: {error}");
    }
    for ticker in &outcome.failed_assets {
        eprintln!("error: {ticker}: produced no output");
    }

    match &cli.out {
        Some(path) => std::fs::write(path, &outcome.body)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", outcome.body),
    }
    Ok(outcome.success())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
