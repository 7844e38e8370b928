// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! End-to-end paths through the public API: CSV in, indices out.

use std::io::Write;

use fragility_core::{
    election_gfi, empirical_modifier, fi_2x2_exact, fi_2x2_exact_frame, gfi_greedy, load_csv,
    load_tally_csv, reversible, sgfi, table_from_frame, Candidate, CaseId, CaseSubset, CsvSchema,
    Error, FragilityIndex, SgfiConfig, Table2x2, TestSpec,
};

fn fisher() -> TestSpec {
    TestSpec::fisher(0.05).unwrap()
}

/// Writes a case-level file for `cells`, shuffled by a fixed stride, with
/// a covariate and a few comment lines.
fn write_cases(cells: [u64; 4]) -> tempfile::NamedTempFile {
    let mut rows = Vec::new();
    for (cell, &count) in cells.iter().enumerate() {
        for _ in 0..count {
            rows.push((
                if cell < 2 { "quit" } else { "kept" },
                if cell % 2 == 0 { 1 } else { 0 },
            ));
        }
    }
    let n = rows.len();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "# synthetic cohort").unwrap();
    writeln!(file, "case,group,dead,years").unwrap();
    for i in 0..n {
        // 7 is coprime with every size used here, so this visits each row once.
        let (group, dead) = rows[(i * 7) % n];
        writeln!(file, "{},{group},{dead},{}", 1000 + i, 5 + (i * 13) % 40).unwrap();
    }
    file.flush().unwrap();
    file
}

fn schema() -> CsvSchema {
    CsvSchema {
        arm: "group".into(),
        outcome: "dead".into(),
        covariates: vec!["years".into()],
        treated: Some("quit".into()),
        event: Some("1".into()),
        id: Some("case".into()),
    }
}

#[test]
fn csv_table_matches_counts_and_index() {
    let cells = [12, 30, 4, 41];
    let file = write_cases(cells);
    let frame = load_csv(file.path(), &schema()).unwrap();
    assert_eq!(frame.len(), 87);
    assert_eq!(frame.covariate_names(), ["years"]);
    let table = table_from_frame(&frame).unwrap();
    assert_eq!(table.cells(), cells);
    let from_frame = fi_2x2_exact_frame(&frame, &fisher()).unwrap();
    let from_table = fi_2x2_exact(&table, &fisher()).unwrap();
    assert_eq!(from_frame.index, from_table.index);
    for entry in &from_frame.plan.entries {
        assert!(entry.case_id.0 >= 1000);
    }
    let flipped = frame.apply(&from_frame.plan).unwrap();
    assert!(fisher().rejects(from_frame.p_before));
    assert!(!fisher().rejects(fisher().p_value(&flipped).unwrap()));
}

#[test]
fn greedy_with_covariate_model_bounds_exact() {
    let file = write_cases([12, 30, 4, 41]);
    let frame = load_csv(file.path(), &schema()).unwrap();
    let exact = fi_2x2_exact_frame(&frame, &fisher())
        .unwrap()
        .index
        .magnitude()
        .unwrap();
    for q in [0.0, 0.1, 0.3] {
        let m = empirical_modifier(&frame, q).unwrap();
        match gfi_greedy(&frame, &m, &fisher(), &CaseSubset::all(&frame))
            .unwrap()
            .index
        {
            FragilityIndex::Finite(v) => assert!(v.unsigned_abs() >= exact, "q {q}"),
            FragilityIndex::Unbounded => {}
        }
    }
}

#[test]
fn restricted_reversal_uses_only_the_subset() {
    let file = write_cases([12, 30, 4, 41]);
    let frame = load_csv(file.path(), &schema()).unwrap();
    let m = empirical_modifier(&frame, 0.0).unwrap();
    let all = CaseSubset::all(&frame);
    let res = gfi_greedy(&frame, &m, &fisher(), &all).unwrap();
    let chosen = CaseSubset::from_ids(&frame, res.plan.entries.iter().map(|e| e.case_id)).unwrap();
    assert!(reversible(&frame, &m, &fisher(), &chosen).unwrap());
    assert!(!reversible(&frame, &m, &fisher(), &CaseSubset::empty()).unwrap());
    assert!(CaseSubset::from_ids(&frame, [CaseId(5)]).is_err());
}

#[test]
fn sgfi_from_csv_is_reproducible() {
    let file = write_cases([12, 30, 4, 41]);
    let frame = load_csv(file.path(), &schema()).unwrap();
    let m = empirical_modifier(&frame, 0.0).unwrap();
    let config = SgfiConfig {
        seed: 17,
        trials: 100,
        iterations: 30,
        ..Default::default()
    };
    let a = sgfi(&frame, &m, &fisher(), &config).unwrap();
    let b = sgfi(&frame, &m, &fisher(), &config).unwrap();
    assert_eq!(a, b);
    assert!(a.index.value().unwrap() > 0);
}

#[test]
fn malformed_csv_reports_the_line() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "case,group,dead,years\n1,quit,1,3\n2,kept,0,oops").unwrap();
    match load_csv(file.path(), &schema()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(
        load_csv("/nonexistent.csv", &schema()),
        Err(Error::Io { .. })
    ));
}

#[test]
fn bundled_tally_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/election_2000.csv");
    let race = load_tally_csv(path, None).unwrap();
    assert_eq!(race.total_electors(), 538);
    assert_eq!(race.electors_to_win, 270);
    assert_eq!(race.eligible_total(), 194_331_436);
    assert_eq!(race.electors_won(Candidate::B), 271);
    let b = election_gfi(&race, Candidate::B).unwrap();
    assert_eq!(b.index, FragilityIndex::Finite(0));
    assert_eq!(Table2x2::new(1, 2, 3, 4).unwrap().total(), 10);
}
