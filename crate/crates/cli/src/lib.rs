// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for `fragility-core`.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fragility_core::{Candidate, StochasticThreshold, Table2x2};

pub mod commands;
pub mod report;
pub mod repro;

pub use report::AnalysisReport;

/// Exit status for bad input: unreadable files, malformed flags, schema errors.
pub const EXIT_INPUT: i32 = 2;
/// Exit status when a computation could not produce an answer.
pub const EXIT_DIAGNOSTIC: i32 = 3;
/// Exit status of `repro` when any check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "fragility",
    version,
    about = "Fragility indices for tests and decisions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for Monte Carlo; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Write the JSON report to PATH ("-" for stdout).
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact fragility index of a 2x2 table.
    Fi(FiArgs),
    /// Greedy generalized fragility index with a likelihood threshold.
    Gfi(GfiArgs),
    /// Stochastic generalized fragility index.
    Sgfi(SgfiArgs),
    /// Election fragility from state tallies or a closed-form triple.
    Election(ElectionArgs),
    /// Run the bundled reference checks and print a pass/fail table.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestChoice {
    Fisher,
    Logistic,
}

impl fmt::Display for TestChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestChoice::Fisher => "fisher",
            TestChoice::Logistic => "logistic",
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Aggregated counts a,b,c,d: arm 1 events, arm 1 nonevents, arm 2 events, arm 2 nonevents.
    #[arg(long, value_parser = parse_table, conflicts_with = "csv")]
    pub table: Option<Table2x2>,

    /// Case-level CSV with a header row.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,

    /// Column holding the arm.
    #[arg(long, requires = "csv")]
    pub arm: Option<String>,

    /// Column holding the outcome.
    #[arg(long, requires = "csv")]
    pub outcome: Option<String>,

    /// Numeric covariate columns for the outcome model.
    #[arg(long, value_delimiter = ',', requires = "csv")]
    pub covariates: Vec<String>,

    /// Arm level listed first; the greatest value when absent.
    #[arg(long, requires = "csv")]
    pub treated: Option<String>,

    /// Outcome level counted as the event; the greatest value when absent.
    #[arg(long, requires = "csv")]
    pub event: Option<String>,

    /// Column of case identifiers; row order when absent.
    #[arg(long, requires = "csv")]
    pub id: Option<String>,

    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FiArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GfiArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Sufficiently likely threshold on modified outcomes.
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,

    #[arg(long, value_enum, default_value_t = TestChoice::Fisher)]
    pub test: TestChoice,

    /// Write the covariate histogram bins as CSV.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SgfiArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 0.0)]
    pub q: f64,

    /// Stochastic threshold in [0, 1), or "1-" for the worst case.
    #[arg(long, default_value = "0.5")]
    pub r: StochasticThreshold,

    #[arg(long, value_enum, default_value_t = TestChoice::Fisher)]
    pub test: TestChoice,

    /// Monte Carlo trials per iteration.
    #[arg(short = 'B', long = "trials", default_value_t = 200)]
    pub trials: usize,

    /// Root-finder iterations.
    #[arg(short = 'T', long = "iterations", default_value_t = 60)]
    pub iterations: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Sweep "r1,r2,.. x q1,q2,.." instead of a single (r, q).
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,

    /// Write the trajectory, or the grid table, as CSV.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ElectionArgs {
    /// State tally CSV (state, votes_a, votes_b, nonvoters, electors); the
    /// bundled 2000 tally when neither this nor --eq1 is given.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,

    /// Closed-form inputs N,K,g: eligible voters, target pool, switches needed.
    #[arg(long, value_parser = parse_triple)]
    pub eq1: Option<(u64, u64, u64)>,

    /// Candidate the switches benefit; the current loser when absent.
    #[arg(long = "for", value_parser = parse_candidate)]
    pub beneficiary: Option<Candidate>,

    /// Electors needed to win; a strict majority when absent.
    #[arg(long)]
    pub electors_to_win: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct ReproArgs {
    /// Case-level smoking cohort extract with qsmk, death and smokeyrs columns.
    #[arg(long, value_name = "PATH")]
    pub nhefs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub r: Vec<StochasticThreshold>,
    pub q: Vec<f64>,
}

fn split_numbers<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| format!("invalid {what} {:?}", v.trim()))
        })
        .collect()
}

pub fn parse_table(s: &str) -> Result<Table2x2, String> {
    match split_numbers::<u64>(s, "count")?.as_slice() {
        &[a, b, c, d] => Table2x2::new(a, b, c, d).map_err(|e| e.to_string()),
        v => Err(format!("expected 4 counts, got {}", v.len())),
    }
}

pub fn parse_triple(s: &str) -> Result<(u64, u64, u64), String> {
    match split_numbers::<u64>(s, "integer")?.as_slice() {
        &[n, k, g] => Ok((n, k, g)),
        v => Err(format!("expected N,K,g, got {} values", v.len())),
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let (r, q) = s
        .split_once('x')
        .ok_or_else(|| "expected \"r1,r2,.. x q1,q2,..\"".to_string())?;
    let grid = Grid {
        r: r.split(',')
            .map(|v| {
                v.trim()
                    .parse::<StochasticThreshold>()
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?,
        q: split_numbers(q, "q")?,
    };
    Ok(grid)
}

pub fn parse_candidate(s: &str) -> Result<Candidate, String> {
    match s.to_ascii_lowercase().as_str() {
        "a" => Ok(Candidate::A),
        "b" => Ok(Candidate::B),
        _ => Err(format!("candidate must be a or b, got {s:?}")),
    }
}

/// Runs a parsed command line and returns the process exit status.
/// `argv` excludes the program name and is echoed into reports.
pub fn run(cli: &Cli, argv: &[String]) -> Result<i32> {
    let work = || -> Result<i32> {
        match &cli.command {
            Command::Repro(args) => run_repro(args, cli.json.as_deref()),
            command => {
                let report = commands::execute(command, argv, cli.threads)?;
                emit(&report, command, cli.json.as_deref())?;
                Ok(0)
            }
        }
    };
    match cli.threads {
        Some(0) => anyhow::bail!("--threads must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(work),
        None => work(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        print!("{text}");
        Ok(())
    } else {
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}

fn emit(report: &AnalysisReport, command: &Command, json: Option<&Path>) -> Result<()> {
    let text = commands::summary(report);
    // With the report on stdout, the summary moves to stderr.
    if json == Some(Path::new("-")) {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
    if let Some(path) = json {
        write_text(path, &report::to_json(report)?)?;
    }
    let data = match command {
        Command::Gfi(args) => args.data.as_deref(),
        Command::Sgfi(args) => args.data.as_deref(),
        _ => None,
    };
    if let Some(path) = data {
        report::write_plot_data(report, path)?;
    }
    Ok(())
}

fn run_repro(args: &ReproArgs, json: Option<&Path>) -> Result<i32> {
    let mut rows = repro::bundled_checks()?;
    match &args.nhefs {
        Some(path) => rows.extend(repro::cohort_checks(path)?),
        None => println!("cohort checks skipped: pass --nhefs PATH to run them"),
    }
    print!("{}", repro::render(&rows));
    if let Some(path) = json {
        write_text(path, &report::to_json(&rows)?)?;
    }
    Ok(if rows.iter().all(|r| r.pass) {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

/// Maps an error to its exit status: core input errors and anything raised
/// before computing are input errors, the rest are diagnostics.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<fragility_core::Error>() {
        Some(core) if !core.is_input_error() => EXIT_DIAGNOSTIC,
        _ => EXIT_INPUT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tables_and_triples() {
        assert_eq!(
            parse_table("102, 326,216,985").unwrap().cells(),
            [102, 326, 216, 985]
        );
        assert!(parse_table("1,2,3").is_err());
        assert!(parse_table("1,2,x,4").is_err());
        assert_eq!(parse_triple("100,100,7").unwrap(), (100, 100, 7));
        assert!(parse_triple("1,2").is_err());
    }

    #[test]
    fn parses_grid() {
        let g = parse_grid("0.25,0.5,1- x 0,0.9").unwrap();
        assert_eq!(g.r.len(), 3);
        assert_eq!(g.r[2], StochasticThreshold::OneMinus);
        assert_eq!(g.q, vec![0.0, 0.9]);
        assert!(parse_grid("0.5").is_err());
        assert!(parse_grid("1.5 x 0").is_err());
    }

    #[test]
    fn classifies_errors() {
        let input = anyhow::Error::new(fragility_core::Error::InvalidParameter("x".into()));
        let diag = anyhow::Error::new(fragility_core::Error::UnconvergedFit);
        assert_eq!(exit_code(&input), EXIT_INPUT);
        assert_eq!(exit_code(&diag), EXIT_DIAGNOSTIC);
        assert_eq!(exit_code(&anyhow::anyhow!("missing --arm")), EXIT_INPUT);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
