// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks. Each criterion prints one PASS/FAIL line listing its
//! sub-checks; the process exits nonzero if any criterion fails.
//!
//! The case-level smoking cessation extract is read from the path in the
//! `NHEFS_CSV` environment variable (columns `qsmk`, `death`, `smokeyrs`);
//! without it the dataset checks report SKIP.

use std::time::{Duration, Instant};

use fragility_core::stochastic::exact_sfi_2x2_with_limit;
use fragility_core::{
    election_gfi, empirical_modifier, exact_reversal_probability, exact_sfi_2x2, fi_2x2_exact,
    fisher_exact_two_sided, frame_from_table, gfi_greedy, hypergeom_sf, load_csv, load_tally_csv,
    logistic_fit, probability_reversal, sgfi, sgfi_half_closed_form, wald_p, Candidate, CaseFrame,
    CaseSubset, CsvSchema, FragilityIndex, Modifier, SgfiConfig, StochasticThreshold, Table2x2,
    TestSpec,
};

struct Check {
    label: String,
    ok: bool,
}

fn check(label: impl Into<String>, ok: bool) -> Check {
    Check {
        label: label.into(),
        ok,
    }
}

/// Print the criterion line and fail the test if any sub-check failed.
fn report(id: u32, title: &str, started: Instant, budget: Duration, mut checks: Vec<Check>) {
    let elapsed = started.elapsed();
    checks.push(check(
        format!(
            "runtime {:.2}s < {}s",
            elapsed.as_secs_f64(),
            budget.as_secs()
        ),
        elapsed < budget,
    ));
    let ok = checks.iter().all(|c| c.ok);
    let detail: Vec<String> = checks
        .iter()
        .map(|c| format!("[{}] {}", if c.ok { "ok" } else { "FAIL" }, c.label))
        .collect();
    println!(
        "criterion {id}: {} | {title} | {}",
        if ok { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.ok)
        .map(|c| c.label.as_str())
        .collect();
    assert!(failed.is_empty(), "criterion {id} failed: {failed:?}");
}

fn fisher() -> TestSpec {
    TestSpec::fisher(0.05).unwrap()
}

fn smoking() -> Table2x2 {
    Table2x2::new(102, 326, 216, 985).unwrap()
}

fn smoking_frame() -> (CaseFrame, Modifier) {
    let frame = frame_from_table(&smoking()).unwrap();
    let modifier = empirical_modifier(&frame, 0.0).unwrap();
    (frame, modifier)
}

fn criterion_1_fisher_p_value() {
    let started = Instant::now();
    let t = smoking();
    let p = fisher_exact_two_sided(&t).unwrap();
    let or: f64 = (102.0 * 985.0) / (326.0 * 216.0);
    report(
        1,
        "Fisher p and odds ratio on the smoking table",
        started,
        Duration::from_secs(1),
        vec![
            check(
                format!("p = {p:.6} within 0.01 +/- 0.005"),
                (p - 0.01).abs() <= 0.005,
            ),
            check(
                format!("odds ratio = {or:.4} within 1.43 +/- 0.005"),
                (or - 1.43).abs() <= 0.005,
            ),
            check(
                "table odds ratio matches",
                (t.odds_ratio() - or).abs() < 1e-12,
            ),
        ],
    );
}

fn criterion_2_fragility_index() {
    let started = Instant::now();
    let exact = fi_2x2_exact(&smoking(), &fisher()).unwrap();
    let (frame, m) = smoking_frame();
    let greedy = gfi_greedy(&frame, &m, &fisher(), &CaseSubset::all(&frame)).unwrap();
    report(
        2,
        "fragility index of the smoking table",
        started,
        Duration::from_secs(5),
        vec![
            check(
                format!("exact = {}", exact.index),
                exact.index == FragilityIndex::Finite(6),
            ),
            check(
                format!("greedy q=0 = {}", greedy.index),
                greedy.index == FragilityIndex::Finite(6),
            ),
        ],
    );
}

fn criterion_3_incidence_boundary() {
    let started = Instant::now();
    let (frame, m) = smoking_frame();
    let all = CaseSubset::all(&frame);
    let at = |q: f64| {
        gfi_greedy(&frame, &m.with_q(q).unwrap(), &fisher(), &all)
            .unwrap()
            .index
    };
    let boundary = 326.0 / 428.0;
    let mut checks: Vec<Check> = [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|&q| {
            let idx = at(q);
            check(format!("q={q}: {idx}"), idx == FragilityIndex::Finite(6))
        })
        .collect();
    let on = at(boundary);
    checks.push(check(
        format!("q=326/428: {on}"),
        on == FragilityIndex::Finite(6),
    ));
    let above = at(boundary + 1e-9);
    checks.push(check(
        format!("q just above 326/428: {above}"),
        above != FragilityIndex::Finite(6),
    ));
    report(
        3,
        "greedy index across q",
        started,
        Duration::from_secs(30),
        checks,
    );
}

fn criterion_4_stochastic_fragility() {
    let started = Instant::now();
    let (frame, m) = smoking_frame();
    let config = SgfiConfig {
        r: StochasticThreshold::Value(0.5),
        q: 0.0,
        seed: 2024,
        ..Default::default()
    };
    let res = sgfi(&frame, &m, &fisher(), &config).unwrap();
    let sgfi_time = started.elapsed();
    let exact_started = Instant::now();
    let exact = exact_sfi_2x2(&smoking(), &m, &fisher(), 0.5).unwrap();
    let exact_time = exact_started.elapsed();
    let got = res.index.value().unwrap_or(i64::MIN);
    report(
        4,
        "stochastic fragility index at r = 1/2",
        started,
        Duration::from_secs(180),
        vec![
            check(
                format!("sgfi = {got} within 22 +/- 1"),
                (got - 22).abs() <= 1,
            ),
            check(
                format!("sgfi runtime {:.1}s < 120s", sgfi_time.as_secs_f64()),
                sgfi_time.as_secs() < 120,
            ),
            check(
                format!("exact = {exact}, expected 22"),
                exact == FragilityIndex::Finite(22),
            ),
            check(
                format!("exact runtime {:.1}s < 60s", exact_time.as_secs_f64()),
                exact_time.as_secs() < 60,
            ),
        ],
    );
}

fn criterion_5_monte_carlo_vs_oracle() {
    let started = Instant::now();
    let (frame, m) = smoking_frame();
    let trials = 2000;
    let checks = [15u64, 22, 30]
        .iter()
        .map(|&k| {
            let exact = exact_reversal_probability(&smoking(), &m, &fisher(), k).unwrap();
            let est =
                probability_reversal(k as usize, &frame, &m, &fisher(), trials, 500 + k).unwrap();
            let tol = 3.0 * (exact * (1.0 - exact) / trials as f64).sqrt();
            check(
                format!(
                    "k={k}: mc {:.4} vs exact {exact:.4} (tol {tol:.4})",
                    est.p_hat
                ),
                (est.p_hat - exact).abs() <= tol,
            )
        })
        .collect();
    report(
        5,
        "Monte Carlo reversal probability",
        started,
        Duration::from_secs(120),
        checks,
    );
}

fn criterion_6_election() {
    let started = Instant::now();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/election_2000.csv");
    let race = load_tally_csv(path, None).unwrap();
    let gfi = election_gfi(&race, Candidate::A).unwrap();
    let flips: Vec<&str> = gfi.flips.iter().map(|f| f.state.as_str()).collect();
    let (n, k, g) = (194_331_526, 2_693_686, 538);
    let cf = sgfi_half_closed_form(n, k, g).unwrap();
    let sf_at = hypergeom_sf(n, k, cf.exact, g).unwrap();
    let sf_below = hypergeom_sf(n, k, cf.exact - 1, g).unwrap();
    report(
        6,
        "election fragility",
        started,
        Duration::from_secs(1),
        vec![
            check(
                format!("gfi = {}", gfi.index),
                gfi.index == FragilityIndex::Finite(538),
            ),
            check(format!("flip set {flips:?}"), flips == ["Florida"]),
            check(
                format!("exact SGFI_1/2 = {} within 38814 +/- 5", cf.exact),
                cf.exact.abs_diff(38814) <= 5,
            ),
            check(
                format!(
                    "inequality pair sf({}) = {sf_at:.5} > 1/2 >= sf(m-1) = {sf_below:.5}",
                    cf.exact
                ),
                sf_at > 0.5 && sf_below <= 0.5,
            ),
            check(
                format!(
                    "approximation {:.2} rounds up to {}",
                    cf.approximation, cf.approximation_ceil
                ),
                cf.approximation_ceil == 38814,
            ),
        ],
    );
}

fn criterion_7_simulated_trial() {
    let started = Instant::now();
    let t = Table2x2::new(20, 380, 15, 385).unwrap();
    let res = fi_2x2_exact(&t, &fisher()).unwrap();
    let modified = frame_from_table(&t)
        .unwrap()
        .apply(&res.plan)
        .unwrap()
        .table()
        .unwrap();
    println!(
        "criterion 7 note: index {} with p_before {:.6} and p_after {:.6}. Fisher's test finds \
         these counts nonsignificant, so the index is negative. A reading of them as \
         significant at p < 0.01 is not supported by the counts.",
        res.index,
        res.p_before,
        res.p_after.unwrap_or(f64::NAN)
    );
    report(
        7,
        "simulated trial table",
        started,
        Duration::from_secs(5),
        vec![
            check(
                format!("magnitude of {} is 7", res.index),
                res.index.magnitude() == Some(7),
            ),
            check(
                format!("modified table {modified}"),
                modified
                    == Table2x2 {
                        a: 20,
                        b: 380,
                        c: 8,
                        d: 392,
                    },
            ),
            check("p_after reported", res.p_after.is_some()),
        ],
    );
}

fn criterion_8_smoking_cohort() {
    let Ok(path) = std::env::var("NHEFS_CSV") else {
        println!("criterion 8: SKIP | cohort extract not supplied (set NHEFS_CSV)");
        return;
    };
    let started = Instant::now();
    let mut schema = CsvSchema::new("qsmk", "death");
    schema.covariates = vec!["smokeyrs".into()];
    let frame = load_csv(&path, &schema).unwrap();
    let logistic = TestSpec::logistic(0.05).unwrap();
    let fit = logistic_fit(
        &frame.design_matrix().unwrap(),
        &frame.event_indicator().unwrap(),
    )
    .unwrap();
    let or = fit.odds_ratio(1);
    let p = wald_p(&fit, 1).unwrap();
    let m = empirical_modifier(&frame, 0.0).unwrap();
    let all = CaseSubset::all(&frame);
    let g0 = gfi_greedy(&frame, &m, &logistic, &all)
        .unwrap()
        .index
        .value()
        .unwrap_or(i64::MIN);
    let g9 = gfi_greedy(&frame, &m.with_q(0.9).unwrap(), &logistic, &all)
        .unwrap()
        .index
        .value()
        .unwrap_or(i64::MIN);
    let mut checks = vec![
        check(format!("cases = {}", frame.len()), frame.len() == 1629),
        check(
            format!("adjusted OR {or:.4} within 1.13 +/- 0.02"),
            (or - 1.13).abs() <= 0.02,
        ),
        check(
            format!("Wald p {p:.4} within 0.41 +/- 0.02"),
            (p - 0.41).abs() <= 0.02,
        ),
        check(
            format!("gfi q=0 = {g0} within -10 +/- 1"),
            (g0 + 10).abs() <= 1,
        ),
        check(
            format!("gfi q=0.9 = {g9} within -30 +/- 1"),
            (g9 + 30).abs() <= 1,
        ),
    ];
    for (r, want) in [(0.25, -1458.0), (0.5, -1517.0), (0.75, -1569.0)] {
        let config = SgfiConfig {
            r: StochasticThreshold::Value(r),
            q: 0.9,
            seed: 8,
            ..Default::default()
        };
        let got = sgfi(&frame, &m, &logistic, &config)
            .unwrap()
            .index
            .value()
            .unwrap_or(0) as f64;
        checks.push(check(
            format!("sgfi q=0.9 r={r} = {got} within 2% of {want}"),
            ((got - want) / want).abs() <= 0.02,
        ));
    }
    report(
        8,
        "smoking cohort with years smoked",
        started,
        Duration::from_secs(3600),
        checks,
    );
}

fn criterion_9_properties() {
    let started = Instant::now();
    let mut checks = Vec::new();
    let (frame, m) = smoking_frame();

    // Permitted sets shrink as q grows.
    let grid = [0.0, 0.1, 0.2, 0.5, 0.7617, 0.762, 0.8, 0.9, 1.0];
    let shrink = grid.windows(2).all(|w| {
        let (lo, hi) = (m.with_q(w[0]).unwrap(), m.with_q(w[1]).unwrap());
        (0..frame.len()).all(|r| hi.permitted(&frame, r).all(|c| lo.permits(&frame, r, c)))
    });
    checks.push(check("permitted sets shrink in q", shrink));

    // Exact reversal probability is nondecreasing in k.
    let probs: Vec<f64> = (0..=40)
        .map(|k| exact_reversal_probability(&smoking(), &m, &fisher(), k).unwrap())
        .collect();
    checks.push(check(
        "exact P[E_k] nondecreasing for k <= 40",
        probs.windows(2).all(|w| w[1] >= w[0] - 1e-12),
    ));

    // Sign convention and plan application on a sweep of small tables.
    let mut sign_ok = true;
    let mut flip_ok = true;
    for a in (0..14).step_by(3) {
        for b in (1..20).step_by(4) {
            for c in (0..14).step_by(3) {
                for d in (1..20).step_by(4) {
                    let t = Table2x2::new(a, b, c, d).unwrap();
                    let f = frame_from_table(&t).unwrap();
                    let mq = empirical_modifier(&f, 0.0).unwrap();
                    for res in [
                        fi_2x2_exact(&t, &fisher()).unwrap(),
                        gfi_greedy(&f, &mq, &fisher(), &CaseSubset::all(&f)).unwrap(),
                    ] {
                        sign_ok &= res.initial_significant == fisher().rejects(res.p_before);
                        if let Some(v) = res.index.value() {
                            sign_ok &= (v > 0) == res.initial_significant;
                            let after = fisher().p_value(&f.apply(&res.plan).unwrap()).unwrap();
                            flip_ok &= fisher().rejects(after) != res.initial_significant;
                            flip_ok &= res.plan.len() as u64 == v.unsigned_abs();
                        }
                    }
                }
            }
        }
    }
    checks.push(check("sign convention", sign_ok));
    checks.push(check("plans flip significance", flip_ok));

    // SGFI magnitude grows with r and with q on a fixed seeded instance.
    let t = Table2x2::new(12, 30, 4, 41).unwrap();
    let f = frame_from_table(&t).unwrap();
    let mq = empirical_modifier(&f, 0.0).unwrap();
    let run = |r: f64, q: f64| {
        let config = SgfiConfig {
            r: StochasticThreshold::Value(r),
            q,
            seed: 99,
            ..Default::default()
        };
        sgfi(&f, &mq, &fisher(), &config)
            .unwrap()
            .index
            .magnitude()
            .unwrap_or(u64::MAX)
    };
    let by_r: Vec<u64> = [0.25, 0.5, 0.75].iter().map(|&r| run(r, 0.0)).collect();
    let by_q: Vec<u64> = [0.0, 0.3, 0.6].iter().map(|&q| run(0.5, q)).collect();
    checks.push(check(
        format!("|sgfi| nondecreasing in r {by_r:?}"),
        by_r.windows(2).all(|w| w[0] <= w[1]),
    ));
    checks.push(check(
        format!("|sgfi| nondecreasing in q {by_q:?}"),
        by_q.windows(2).all(|w| w[0] <= w[1]),
    ));
    let worst =
        exact_sfi_2x2_with_limit(&t, &mq, &fisher(), StochasticThreshold::OneMinus, 1 << 24)
            .unwrap();
    checks.push(check(
        format!("worst case {worst} bounds r = 0.75"),
        worst.magnitude().unwrap_or(u64::MAX) >= by_r[2],
    ));

    // Identical results with one and four workers.
    let with_threads = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                sgfi(
                    &f,
                    &mq,
                    &fisher(),
                    &SgfiConfig {
                        seed: 5,
                        ..Default::default()
                    },
                )
                .unwrap()
            })
    };
    checks.push(check(
        "sgfi identical with 1 and 4 threads",
        with_threads(1) == with_threads(4),
    ));

    report(
        9,
        "property suites",
        started,
        Duration::from_secs(600),
        checks,
    );
}

fn main() {
    std::panic::set_hook(Box::new(|info| eprintln!("{info}")));
    let criteria: [fn(); 9] = [
        criterion_1_fisher_p_value,
        criterion_2_fragility_index,
        criterion_3_incidence_boundary,
        criterion_4_stochastic_fragility,
        criterion_5_monte_carlo_vs_oracle,
        criterion_6_election,
        criterion_7_simulated_trial,
        criterion_8_smoking_cohort,
        criterion_9_properties,
    ];
    let failed = criteria
        .iter()
        .filter(|criterion| std::panic::catch_unwind(criterion).is_err())
        .count();
    println!(
        "acceptance: {} of {} criteria failed",
        failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
