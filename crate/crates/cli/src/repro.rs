// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Reference checks on the bundled worked examples.

use std::path::Path;

use anyhow::Result;
use fragility_core::{
    election_gfi, empirical_modifier, exact_sfi_2x2, fi_2x2_exact, fisher_exact_two_sided,
    frame_from_table, gfi_greedy, load_csv, logistic_fit, read_tally_csv, sgfi,
    sgfi_half_closed_form, wald_p, Candidate, CaseSubset, CsvSchema, FragilityIndex, SgfiConfig,
    StochasticThreshold, Table2x2, TestSpec,
};
use serde::{Deserialize, Serialize};

use crate::commands::BUNDLED_TALLY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

fn row(name: &str, expected: impl ToString, observed: impl ToString, pass: bool) -> CheckRow {
    CheckRow {
        name: name.into(),
        expected: expected.to_string(),
        observed: observed.to_string(),
        pass,
    }
}

fn within(x: i64, target: i64, tol: i64) -> bool {
    (x - target).abs() <= tol
}

/// Checks that need only bundled data.
pub fn bundled_checks() -> Result<Vec<CheckRow>> {
    let fisher = TestSpec::fisher(0.05)?;
    let smoking = Table2x2::new(102, 326, 216, 985)?;
    let frame = frame_from_table(&smoking)?;
    let modifier = empirical_modifier(&frame, 0.0)?;
    let all = CaseSubset::all(&frame);
    let mut rows = Vec::new();

    let p = fisher_exact_two_sided(&smoking)?;
    rows.push(row(
        "smoking table Fisher p",
        "0.01 +/- 0.005",
        format!("{p:.5}"),
        (p - 0.01).abs() <= 0.005,
    ));
    let or = smoking.odds_ratio();
    rows.push(row(
        "smoking table odds ratio",
        "1.43 +/- 0.005",
        format!("{or:.4}"),
        (or - 1.43).abs() <= 0.005,
    ));

    let fi = fi_2x2_exact(&smoking, &fisher)?.index;
    rows.push(row(
        "smoking table exact index",
        "+6",
        fi,
        fi == FragilityIndex::Finite(6),
    ));

    let greedy_at = |q: f64| -> Result<FragilityIndex> {
        Ok(gfi_greedy(&frame, &modifier.with_q(q)?, &fisher, &all)?.index)
    };
    let sweep = [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|&q| greedy_at(q))
        .collect::<Result<Vec<_>>>()?;
    let sweep_text: Vec<String> = sweep.iter().map(ToString::to_string).collect();
    rows.push(row(
        "greedy index for q in {0, .25, .5, .75}",
        "+6 each",
        sweep_text.join(" "),
        sweep.iter().all(|&i| i == FragilityIndex::Finite(6)),
    ));
    let above = greedy_at(0.8)?;
    rows.push(row(
        "greedy index for q = 0.8",
        "not +6",
        above,
        above != FragilityIndex::Finite(6),
    ));

    let config = SgfiConfig {
        r: StochasticThreshold::Value(0.5),
        seed: 2024,
        ..Default::default()
    };
    let s = sgfi(&frame, &modifier, &fisher, &config)?.index;
    rows.push(row(
        "smoking table SGFI r=1/2",
        "22 +/- 1",
        s,
        s.value().is_some_and(|v| within(v, 22, 1)),
    ));
    let exact = exact_sfi_2x2(&smoking, &modifier, &fisher, 0.5)?;
    rows.push(row(
        "smoking table exact SFI r=1/2",
        "22",
        exact,
        exact == FragilityIndex::Finite(22),
    ));
    let zero = sgfi(
        &frame,
        &modifier,
        &fisher,
        &SgfiConfig {
            r: StochasticThreshold::Value(0.0),
            ..config
        },
    )?
    .index;
    rows.push(row("SGFI at r = 0", fi, zero, zero == fi));

    let trial = fi_2x2_exact(&Table2x2::new(20, 380, 15, 385)?, &fisher)?;
    let reached = frame_from_table(&Table2x2::new(20, 380, 15, 385)?)?
        .apply(&trial.plan)?
        .table()?;
    rows.push(row(
        "simulated trial index magnitude",
        "7",
        format!(
            "{} (p {:.4} -> {:.4})",
            trial.index,
            trial.p_before,
            trial.p_after.unwrap_or(f64::NAN)
        ),
        trial.index.magnitude() == Some(7),
    ));
    rows.push(row(
        "simulated trial modified table",
        "(20, 380, 8, 392)",
        reached,
        reached.cells() == [20, 380, 8, 392],
    ));

    let race = read_tally_csv(BUNDLED_TALLY.as_bytes(), None)?;
    let g = election_gfi(&race, Candidate::A)?;
    let states: Vec<&str> = g.flips.iter().map(|f| f.state.as_str()).collect();
    rows.push(row(
        "2000 election index",
        "538 via Florida",
        format!("{} via {}", g.index, states.join(", ")),
        g.index == FragilityIndex::Finite(538) && states == ["Florida"],
    ));
    let cf = sgfi_half_closed_form(194_331_526, 2_693_686, 538)?;
    rows.push(row(
        "2000 election exact half-probability draw",
        "38814 +/- 5",
        cf.exact,
        cf.exact.abs_diff(38814) <= 5,
    ));
    rows.push(row(
        "2000 election approximation",
        "38814",
        cf.approximation_ceil,
        cf.approximation_ceil == 38814,
    ));
    let k_eq_n = sgfi_half_closed_form(100, 100, 7)?.exact;
    rows.push(row("closed form with K = N", "7", k_eq_n, k_eq_n == 7));
    Ok(rows)
}

/// Checks on the case-level smoking cohort extract.
pub fn cohort_checks(path: &Path) -> Result<Vec<CheckRow>> {
    let mut schema = CsvSchema::new("qsmk", "death");
    schema.covariates = vec!["smokeyrs".into()];
    let frame = load_csv(path, &schema)?;
    let logistic = TestSpec::logistic(0.05)?;
    let fit = logistic_fit(&frame.design_matrix()?, &frame.event_indicator()?)?;
    let mut rows = Vec::new();
    let or = fit.odds_ratio(1);
    rows.push(row(
        "cohort adjusted odds ratio",
        "1.13 +/- 0.02",
        format!("{or:.4}"),
        (or - 1.13).abs() <= 0.02,
    ));
    let p = wald_p(&fit, 1)?;
    rows.push(row(
        "cohort Wald p",
        "0.41 +/- 0.02",
        format!("{p:.4}"),
        (p - 0.41).abs() <= 0.02,
    ));
    let modifier = empirical_modifier(&frame, 0.0)?;
    let all = CaseSubset::all(&frame);
    for (q, target) in [(0.0, -10), (0.9, -30)] {
        let idx = gfi_greedy(&frame, &modifier.with_q(q)?, &logistic, &all)?.index;
        rows.push(row(
            &format!("cohort greedy index q={q}"),
            format!("{target} +/- 1"),
            idx,
            idx.value().is_some_and(|v| within(v, target, 1)),
        ));
    }
    for (r, target) in [(0.25, -1458.0), (0.5, -1517.0), (0.75, -1569.0)] {
        let config = SgfiConfig {
            r: StochasticThreshold::Value(r),
            q: 0.9,
            ..Default::default()
        };
        let idx = sgfi(&frame, &modifier, &logistic, &config)?.index;
        rows.push(row(
            &format!("cohort SGFI q=0.9 r={r}"),
            format!("{target} +/- 2%"),
            idx,
            idx.value()
                .is_some_and(|v| ((v as f64 - target) / target).abs() <= 0.02),
        ));
    }
    Ok(rows)
}

pub fn render(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{:<4}  {:<width$}  expected {}, observed {}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.expected,
            r.observed,
        ));
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    out.push_str(&format!("{passed}/{} checks passed\n", rows.len()));
    out
}
