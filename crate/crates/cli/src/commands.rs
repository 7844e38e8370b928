// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! One function per analysis subcommand, each returning a report.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fragility_core::{
    election_gfi, empirical_modifier, fi_2x2_exact_frame, frame_from_table, gfi_greedy, load_csv,
    load_tally_csv, read_tally_csv, sgfi, sgfi_half_closed_form, Candidate, CaseFrame, CaseSubset,
    CsvSchema, FragilityIndex, FragilityResult, Race, SgfiConfig, TestSpec,
};

use crate::report::{
    AnalysisReport, ElectionDetail, GridPoint, InputDigest, Parameters, PlanSummary,
};
use crate::{Command, ElectionArgs, FiArgs, GfiArgs, InputArgs, SgfiArgs, TestChoice};

/// State tallies for the 2000 presidential election shipped with the core crate.
pub const BUNDLED_TALLY: &str = include_str!("../../core/fixtures/election_2000.csv");

/// Runs an analysis subcommand. `argv` is echoed into the report.
pub fn execute(
    command: &Command,
    argv: &[String],
    threads: Option<usize>,
) -> Result<AnalysisReport> {
    let mut report = match command {
        Command::Fi(args) => cmd_fi(args)?,
        Command::Gfi(args) => cmd_gfi(args)?,
        Command::Sgfi(args) => cmd_sgfi(args)?,
        Command::Election(args) => cmd_election(args)?,
        Command::Repro(_) => bail!("repro does not produce an analysis report"),
    };
    report.command = argv.to_vec();
    report.parameters.threads = threads;
    Ok(report)
}

/// Loads the analysis input and describes where it came from.
pub fn load_input(input: &InputArgs) -> Result<(CaseFrame, String)> {
    if let Some(table) = &input.table {
        let [a, b, c, d] = table.cells();
        return Ok((frame_from_table(table)?, format!("table {a},{b},{c},{d}")));
    }
    let Some(path) = &input.csv else {
        bail!("give either --table a,b,c,d or --csv PATH");
    };
    let (Some(arm), Some(outcome)) = (&input.arm, &input.outcome) else {
        bail!("--csv needs --arm and --outcome");
    };
    let schema = CsvSchema {
        arm: arm.clone(),
        outcome: outcome.clone(),
        covariates: input.covariates.clone(),
        treated: input.treated.clone(),
        event: input.event.clone(),
        id: input.id.clone(),
    };
    Ok((load_csv(path, &schema)?, path.display().to_string()))
}

pub fn test_spec(choice: TestChoice, alpha: f64) -> Result<TestSpec> {
    Ok(match choice {
        TestChoice::Fisher => TestSpec::fisher(alpha)?,
        TestChoice::Logistic => TestSpec::logistic(alpha)?,
    })
}

fn base_report(
    measure: &str,
    input: Option<InputDigest>,
    parameters: Parameters,
) -> AnalysisReport {
    AnalysisReport {
        command: Vec::new(),
        measure: measure.into(),
        input,
        parameters,
        result: None,
        p_before: None,
        p_after: None,
        plan: None,
        sgfi: None,
        grid: Vec::new(),
        election: None,
        timing_seconds: 0.0,
    }
}

fn fragility_report(
    measure: &str,
    frame: &CaseFrame,
    source: String,
    parameters: Parameters,
    res: &FragilityResult,
) -> AnalysisReport {
    let mut report = base_report(measure, Some(InputDigest::of(frame, source)), parameters);
    report.result = Some(res.index);
    report.p_before = Some(res.p_before);
    report.p_after = res.p_after;
    report.plan = Some(PlanSummary::of(frame, &res.plan));
    report
}

pub fn cmd_fi(args: &FiArgs) -> Result<AnalysisReport> {
    let started = Instant::now();
    let (frame, source) = load_input(&args.input)?;
    let test = TestSpec::fisher(args.input.alpha)?;
    let res = fi_2x2_exact_frame(&frame, &test)?;
    let parameters = Parameters {
        test: Some(test.name().into()),
        alpha: Some(test.alpha()),
        ..Default::default()
    };
    let mut report = fragility_report("fi", &frame, source, parameters, &res);
    report.timing_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

pub fn cmd_gfi(args: &GfiArgs) -> Result<AnalysisReport> {
    let started = Instant::now();
    let (frame, source) = load_input(&args.input)?;
    let test = test_spec(args.test, args.input.alpha)?;
    let modifier = empirical_modifier(&frame, args.q)?;
    let res = gfi_greedy(&frame, &modifier, &test, &CaseSubset::all(&frame))?;
    let parameters = Parameters {
        test: Some(test.name().into()),
        alpha: Some(test.alpha()),
        q: Some(args.q),
        ..Default::default()
    };
    let mut report = fragility_report("gfi", &frame, source, parameters, &res);
    report.timing_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

pub fn cmd_sgfi(args: &SgfiArgs) -> Result<AnalysisReport> {
    let started = Instant::now();
    let (frame, source) = load_input(&args.input)?;
    let test = test_spec(args.test, args.input.alpha)?;
    // The configured q re-thresholds this model, so one fit serves every q.
    let modifier = empirical_modifier(&frame, 0.0)?;
    let config = |r, q| SgfiConfig {
        r,
        q,
        trials: args.trials,
        iterations: args.iterations,
        seed: args.seed,
        ..Default::default()
    };
    let mut parameters = Parameters {
        test: Some(test.name().into()),
        alpha: Some(test.alpha()),
        trials: Some(args.trials),
        iterations: Some(args.iterations),
        seed: Some(args.seed),
        ..Default::default()
    };
    let p_before = test.p_value(&frame)?;
    let digest = InputDigest::of(&frame, source);
    let mut report = if let Some(grid) = &args.grid {
        let mut report = base_report("sgfi_grid", Some(digest), parameters);
        for &r in &grid.r {
            for &q in &grid.q {
                let res = sgfi(&frame, &modifier, &test, &config(r, q))?;
                report.grid.push(GridPoint {
                    r,
                    q,
                    index: res.index,
                    method: res.method,
                    k_average: res.k_average,
                });
            }
        }
        report
    } else {
        parameters.q = Some(args.q);
        parameters.r = Some(args.r);
        let res = sgfi(&frame, &modifier, &test, &config(args.r, args.q))?;
        let mut report = base_report("sgfi", Some(digest), parameters);
        report.result = Some(res.index);
        report.sgfi = Some(res);
        report
    };
    report.p_before = Some(p_before);
    report.timing_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

fn current_loser(race: &Race) -> Candidate {
    if race.electors_won(Candidate::A) < race.electors_won(Candidate::B) {
        Candidate::A
    } else {
        Candidate::B
    }
}

pub fn cmd_election(args: &ElectionArgs) -> Result<AnalysisReport> {
    let started = Instant::now();
    let race = match (&args.csv, args.eq1) {
        (Some(path), _) => Some(load_tally_csv(path, args.electors_to_win)?),
        (None, None) => Some(
            read_tally_csv(BUNDLED_TALLY.as_bytes(), args.electors_to_win)
                .context("bundled tally is malformed")?,
        ),
        (None, Some(_)) => None,
    };
    let gfi = match &race {
        Some(race) => Some(election_gfi(
            race,
            args.beneficiary.unwrap_or_else(|| current_loser(race)),
        )?),
        None => None,
    };
    let triple = args.eq1.or_else(|| {
        let (race, gfi) = (race.as_ref()?, gfi.as_ref()?);
        match gfi.index.value() {
            Some(g) if g > 0 => Some((race.eligible_total(), gfi.target_pool(), g as u64)),
            _ => None,
        }
    });
    let closed_form = triple
        .map(|(n, k, g)| sgfi_half_closed_form(n, k, g))
        .transpose()?;
    let mut report = base_report("election", None, Parameters::default());
    report.result = match (&gfi, &closed_form) {
        (Some(gfi), _) => Some(gfi.index),
        (None, Some(cf)) => Some(FragilityIndex::Finite(cf.exact as i64)),
        (None, None) => None,
    };
    report.election = Some(ElectionDetail { gfi, closed_form });
    report.timing_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Plain-text rendering of a report for the terminal.
pub fn summary(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let num = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    if let Some(input) = &report.input {
        let levels = |l: &[crate::report::LevelCount]| {
            l.iter()
                .map(|c| format!("{}={}", c.level, c.count))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(
            out,
            "input: {} ({} cases; arms {}; outcomes {})",
            input.source,
            input.rows,
            levels(&input.arms),
            levels(&input.outcomes)
        );
    }
    if let Some(result) = &report.result {
        let _ = writeln!(out, "{}: {}", report.measure, result);
    }
    if report.p_before.is_some() {
        let _ = writeln!(out, "p before: {}", num(report.p_before));
    }
    if report.p_after.is_some() {
        let _ = writeln!(out, "p after: {}", num(report.p_after));
    }
    if let Some(plan) = &report.plan {
        for cell in &plan.cells {
            let _ = writeln!(
                out,
                "  {} {} -> {}: {}",
                cell.arm, cell.from, cell.to, cell.count
            );
        }
    }
    if let Some(res) = &report.sgfi {
        let _ = writeln!(
            out,
            "method: {}",
            serde_json::to_string(&res.method)
                .unwrap_or_default()
                .trim_matches('"')
        );
        if let Some(k) = res.k_average {
            let _ = writeln!(out, "mean iterate: {k:.3}");
        }
        if let Some(check) = &res.final_check {
            let _ = writeln!(
                out,
                "check: p({}) = {:.4}, p({}) = {:.4}",
                check.at.k, check.at.p_hat, check.below.k, check.below.p_hat
            );
        }
    }
    for g in &report.grid {
        let _ = writeln!(out, "r={} q={}: {}", g.r, g.q, g.index);
    }
    if let Some(election) = &report.election {
        if let Some(gfi) = &election.gfi {
            let states: Vec<&str> = gfi.flips.iter().map(|f| f.state.as_str()).collect();
            let _ = writeln!(
                out,
                "electors for {}: {} -> {} via [{}]",
                gfi.beneficiary,
                gfi.electors_before,
                gfi.electors_after,
                states.join(", ")
            );
        }
        if let Some(cf) = &election.closed_form {
            let _ = writeln!(
                out,
                "half-probability draw (N={}, K={}, g={}): exact {}, approximation {:.2} (ceil {})",
                cf.eligible_total,
                cf.target_pool,
                cf.switch_requirement,
                cf.exact,
                cf.approximation,
                cf.approximation_ceil
            );
        }
    }
    let _ = writeln!(out, "time: {:.3}s", report.timing_seconds);
    out
}
