// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Deterministic fragility solvers.
//!
//! [`fi_2x2_exact`] searches per-arm event-count shifts of a 2×2 table.
//! [`gfi_greedy`] is the general greedy search over single-case outcome
//! changes permitted by a [`Modifier`]. [`reversible`] asks whether that
//! search finishes with a finite index when only a subset of cases may move.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::data::{
    frame_from_table, CaseFrame, CaseId, CaseSubset, ModificationPlan, Modifier, PlanEntry,
};
use crate::error::{Error, Result};
use crate::stats::{Table2x2, TestSpec};

/// A signed fragility index or the unbounded sentinel.
///
/// Positive values belong to initially significant tests, negative values
/// to initially nonsignificant ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FragilityIndex {
    Finite(i64),
    Unbounded,
}

impl FragilityIndex {
    fn signed(magnitude: usize, initial_significant: bool) -> Self {
        let m = magnitude as i64;
        FragilityIndex::Finite(if initial_significant { m } else { -m })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, FragilityIndex::Finite(_))
    }

    pub fn value(&self) -> Option<i64> {
        match *self {
            FragilityIndex::Finite(v) => Some(v),
            FragilityIndex::Unbounded => None,
        }
    }

    pub fn magnitude(&self) -> Option<u64> {
        self.value().map(i64::unsigned_abs)
    }
}

impl fmt::Display for FragilityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FragilityIndex::Finite(v) if *v > 0 => write!(f, "+{v}"),
            FragilityIndex::Finite(v) => write!(f, "{v}"),
            FragilityIndex::Unbounded => f.write_str("UNBOUNDED"),
        }
    }
}

impl Serialize for FragilityIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            FragilityIndex::Finite(v) => serializer.serialize_i64(v),
            FragilityIndex::Unbounded => serializer.serialize_str("UNBOUNDED"),
        }
    }
}

impl<'de> Deserialize<'de> for FragilityIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct IndexVisitor;
        impl Visitor<'_> for IndexVisitor {
            type Value = FragilityIndex;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or \"UNBOUNDED\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(FragilityIndex::Finite(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                i64::try_from(v)
                    .map(FragilityIndex::Finite)
                    .map_err(|_| E::custom("fragility index out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v == "UNBOUNDED" {
                    Ok(FragilityIndex::Unbounded)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        deserializer.deserialize_any(IndexVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragilityResult {
    pub index: FragilityIndex,
    /// Empty when the index is unbounded.
    pub plan: ModificationPlan,
    pub initial_significant: bool,
    pub p_before: f64,
    /// Absent when the index is unbounded.
    pub p_after: Option<f64>,
}

impl FragilityResult {
    fn unbounded(initial_significant: bool, p_before: f64) -> Self {
        FragilityResult {
            index: FragilityIndex::Unbounded,
            plan: ModificationPlan::default(),
            initial_significant,
            p_before,
            p_after: None,
        }
    }
}

/// Whether `candidate` is a better post-change p-value than `incumbent`.
/// Initially significant tests push p up; the others push it down.
fn more_decisive(candidate: f64, incumbent: f64, initial_significant: bool) -> Ordering {
    if initial_significant {
        candidate.total_cmp(&incumbent)
    } else {
        incumbent.total_cmp(&candidate)
    }
}

/// Exact signed fragility index of a 2×2 table.
///
/// The plan refers to the rows of [`frame_from_table`]`(table)`.
pub fn fi_2x2_exact(table: &Table2x2, test: &TestSpec) -> Result<FragilityResult> {
    fi_2x2_exact_frame(&frame_from_table(table)?, test)
}

/// [`fi_2x2_exact`] on a two-arm, binary-outcome frame. Within each cell the
/// plan modifies the cases with the lowest ids.
pub fn fi_2x2_exact_frame(frame: &CaseFrame, test: &TestSpec) -> Result<FragilityResult> {
    let table = frame.table()?;
    let p_before = test.table_p_value(&table)?;
    let sig0 = test.rejects(p_before);
    let (a, b, c, d) = (
        table.a as i64,
        table.b as i64,
        table.c as i64,
        table.d as i64,
    );
    let max_cost = a.max(b) + c.max(d);

    for cost in 1..=max_cost {
        let mut best: Option<(f64, (i64, i64))> = None;
        for i in -a.min(cost)..=b.min(cost) {
            let rest = cost - i.abs();
            let js: &[i64] = if rest == 0 { &[0] } else { &[-rest, rest] };
            for &j in js {
                let Some(shifted) = table.shifted(i, j) else {
                    continue;
                };
                let p = test.table_p_value(&shifted)?;
                if test.rejects(p) == sig0 {
                    continue;
                }
                let key = |(i, j): (i64, i64)| (i.abs(), i, j.abs(), j);
                let better = match best {
                    None => true,
                    Some((bp, bs)) => match more_decisive(p, bp, sig0) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => key((i, j)) < key(bs),
                    },
                };
                if better {
                    best = Some((p, (i, j)));
                }
            }
        }
        if let Some((p_after, (i, j))) = best {
            return Ok(FragilityResult {
                index: FragilityIndex::signed(cost as usize, sig0),
                plan: shift_plan(frame, i, j),
                initial_significant: sig0,
                p_before,
                p_after: Some(p_after),
            });
        }
    }
    Ok(FragilityResult::unbounded(sig0, p_before))
}

/// Plan moving `i` arm-1 and `j` arm-2 cases towards the event column
/// (negative values move events away), taking the lowest ids in each cell.
fn shift_plan(frame: &CaseFrame, i: i64, j: i64) -> ModificationPlan {
    let mut cells: [Vec<usize>; 4] = Default::default();
    for row in 0..frame.len() {
        cells[(frame.arm(row) * 2 + frame.outcome(row)) as usize].push(row);
    }
    for cell in &mut cells {
        cell.sort_unstable_by_key(|&r| frame.id(r));
    }
    let mut entries = Vec::new();
    for (arm, shift) in [(0usize, i), (1, j)] {
        let (cell, new_outcome) = if shift < 0 {
            (arm * 2, 1)
        } else {
            (arm * 2 + 1, 0)
        };
        entries.extend(
            cells[cell]
                .iter()
                .take(shift.unsigned_abs() as usize)
                .map(|&r| PlanEntry {
                    case_id: frame.id(r),
                    new_outcome,
                }),
        );
    }
    entries.sort_by_key(|e| e.case_id);
    ModificationPlan { entries }
}

/// Outcome of one greedy run.
pub(crate) struct GreedyOutcome {
    pub reversed: bool,
    pub entries: Vec<PlanEntry>,
    pub p_after: Option<f64>,
}

/// Greedy search state that does not depend on the restriction set.
pub(crate) struct PreparedGreedy<'a> {
    frame: &'a CaseFrame,
    modifier: &'a Modifier,
    test: &'a TestSpec,
    pub p_before: f64,
    pub initial_significant: bool,
    /// Present for 2×2 frames, which take the table fast path.
    table: Option<Table2x2>,
}

impl<'a> PreparedGreedy<'a> {
    pub fn new(frame: &'a CaseFrame, modifier: &'a Modifier, test: &'a TestSpec) -> Result<Self> {
        modifier.check_frame(frame)?;
        let p_before = test.p_value(frame)?;
        let table = if frame.is_two_by_two() {
            Some(frame.table()?)
        } else {
            None
        };
        Ok(PreparedGreedy {
            frame,
            modifier,
            test,
            p_before,
            initial_significant: test.rejects(p_before),
            table,
        })
    }

    pub fn frame(&self) -> &CaseFrame {
        self.frame
    }

    /// Run the greedy search with `rows` (sorted by case id) as the restriction.
    pub fn run(&self, rows: &[usize]) -> Result<GreedyOutcome> {
        match self.table {
            Some(table) => self.run_table(table, rows),
            None => self.run_general(rows),
        }
    }

    /// Rows in one cell are interchangeable, so each step compares at most
    /// four moves: the lowest-id permitted case left in each cell.
    fn run_table(&self, table: Table2x2, rows: &[usize]) -> Result<GreedyOutcome> {
        let frame = self.frame;
        let mut cells: [Vec<usize>; 4] = Default::default();
        for &row in rows {
            let outcome = frame.outcome(row);
            if self.modifier.permits(frame, row, 1 - outcome) {
                cells[(frame.arm(row) * 2 + outcome) as usize].push(row);
            }
        }
        let mut next = [0usize; 4];
        let mut current = table;
        let mut entries = Vec::new();
        loop {
            let mut best: Option<(f64, CaseId, usize, Table2x2)> = None;
            for cell in 0..4 {
                let Some(&row) = cells[cell].get(next[cell]) else {
                    continue;
                };
                let step = if cell % 2 == 0 { -1 } else { 1 };
                let (i, j) = if cell < 2 { (step, 0) } else { (0, step) };
                let shifted = current.shifted(i, j).expect("cell is non-empty");
                let p = self.test.table_p_value(&shifted)?;
                let id = frame.id(row);
                let better = match best {
                    None => true,
                    Some((bp, bid, _, _)) => match more_decisive(p, bp, self.initial_significant) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => id < bid,
                    },
                };
                if better {
                    best = Some((p, id, cell, shifted));
                }
            }
            let Some((p, _, cell, shifted)) = best else {
                return Ok(GreedyOutcome {
                    reversed: false,
                    entries,
                    p_after: None,
                });
            };
            let row = cells[cell][next[cell]];
            next[cell] += 1;
            current = shifted;
            entries.push(PlanEntry {
                case_id: frame.id(row),
                new_outcome: 1 - frame.outcome(row),
            });
            if self.test.rejects(p) != self.initial_significant {
                return Ok(GreedyOutcome {
                    reversed: true,
                    entries,
                    p_after: Some(p),
                });
            }
        }
    }

    /// Cases with the same arm, outcome, covariates and candidate give the
    /// same p-value, so each such class is evaluated once per step.
    fn run_general(&self, rows: &[usize]) -> Result<GreedyOutcome> {
        let frame = self.frame;
        let mut current = frame.clone();
        let mut modified = vec![false; frame.len()];
        let mut entries = Vec::new();
        let mut class_p: HashMap<(u32, u32, u32, Vec<u64>), f64> = HashMap::new();
        loop {
            class_p.clear();
            let mut best: Option<(f64, usize, u32)> = None;
            for &row in rows {
                if modified[row] {
                    continue;
                }
                let original = frame.outcome(row);
                for candidate in self.modifier.permitted(frame, row) {
                    let key = (
                        frame.arm(row),
                        original,
                        candidate,
                        (0..frame.covariate_names().len())
                            .map(|c| frame.covariate(c, row).to_bits())
                            .collect::<Vec<_>>(),
                    );
                    let p = match class_p.get(&key) {
                        Some(&p) => p,
                        None => {
                            current.set_outcome(row, candidate);
                            let p = self.test.p_value(&current);
                            current.set_outcome(row, original);
                            let p = p?;
                            class_p.insert(key, p);
                            p
                        }
                    };
                    // Rows arrive in id order and candidates ascend, so only a
                    // strictly better p displaces the incumbent.
                    let better = match best {
                        None => true,
                        Some((bp, _, _)) => {
                            more_decisive(p, bp, self.initial_significant) == Ordering::Greater
                        }
                    };
                    if better {
                        best = Some((p, row, candidate));
                    }
                }
            }
            let Some((p, row, candidate)) = best else {
                return Ok(GreedyOutcome {
                    reversed: false,
                    entries,
                    p_after: None,
                });
            };
            current.set_outcome(row, candidate);
            modified[row] = true;
            entries.push(PlanEntry {
                case_id: frame.id(row),
                new_outcome: candidate,
            });
            if self.test.rejects(p) != self.initial_significant {
                return Ok(GreedyOutcome {
                    reversed: true,
                    entries,
                    p_after: Some(p),
                });
            }
        }
    }

    fn result(&self, outcome: GreedyOutcome) -> FragilityResult {
        if !outcome.reversed {
            return FragilityResult::unbounded(self.initial_significant, self.p_before);
        }
        let mut entries = outcome.entries;
        let index = FragilityIndex::signed(entries.len(), self.initial_significant);
        entries.sort_by_key(|e| e.case_id);
        FragilityResult {
            index,
            plan: ModificationPlan { entries },
            initial_significant: self.initial_significant,
            p_before: self.p_before,
            p_after: outcome.p_after,
        }
    }
}

fn restriction_rows(frame: &CaseFrame, restriction: &CaseSubset) -> Result<Vec<usize>> {
    restriction.rows(frame)
}

/// Greedy generalized fragility index.
///
/// Starting from `frame`, each step tries every permitted single-case change
/// among unmodified cases in `restriction` and applies the one whose p-value
/// is most decisive: highest when the test starts significant, lowest
/// otherwise. Ties go to the lowest case id, then the smallest outcome level.
/// The search stops when significance flips, or reports UNBOUNDED once no
/// permitted move remains.
pub fn gfi_greedy(
    frame: &CaseFrame,
    modifier: &Modifier,
    test: &TestSpec,
    restriction: &CaseSubset,
) -> Result<FragilityResult> {
    let prepared = PreparedGreedy::new(frame, modifier, test)?;
    let rows = restriction_rows(frame, restriction)?;
    let outcome = prepared.run(&rows)?;
    Ok(prepared.result(outcome))
}

/// Whether the cases in `restriction` have permitted modifications that
/// reverse significance, judged by [`gfi_greedy`] returning a finite index.
pub fn reversible(
    frame: &CaseFrame,
    modifier: &Modifier,
    test: &TestSpec,
    restriction: &CaseSubset,
) -> Result<bool> {
    let prepared = PreparedGreedy::new(frame, modifier, test)?;
    let rows = restriction_rows(frame, restriction)?;
    Ok(prepared.run(&rows)?.reversed)
}

/// Which of the four cells of `frame_from_table(table)` may switch outcome
/// under `modifier`. Errors unless the answer is constant within each cell.
pub(crate) fn cell_permissions(table: &Table2x2, modifier: &Modifier) -> Result<[bool; 4]> {
    let frame = frame_from_table(table)?;
    modifier.check_frame(&frame)?;
    let mut perm: [Option<bool>; 4] = [None; 4];
    for row in 0..frame.len() {
        let cell = (frame.arm(row) * 2 + frame.outcome(row)) as usize;
        let p = modifier.permits(&frame, row, 1 - frame.outcome(row));
        match perm[cell] {
            None => perm[cell] = Some(p),
            Some(prev) if prev != p => {
                return Err(Error::InvalidParameter(
                    "the modifier must treat all cases in a cell alike".into(),
                ))
            }
            Some(_) => {}
        }
    }
    Ok(perm.map(|p| p.unwrap_or(false)))
}

/// Exact reversibility for a subset holding `composition[i]` cases from
/// cell `i` (cells ordered a, b, c, d).
///
/// Every permitted combination of shifts is tried: the subset is reversible
/// when any reachable table other than the original one reverses
/// significance.
pub fn reversible_2x2_exact(
    table: &Table2x2,
    composition: [u64; 4],
    modifier: &Modifier,
    test: &TestSpec,
) -> Result<bool> {
    let cells = table.cells();
    if composition.iter().zip(cells).any(|(&k, n)| k > n) {
        return Err(Error::InvalidParameter(format!(
            "composition {composition:?} exceeds cell counts {cells:?}"
        )));
    }
    let perm = cell_permissions(table, modifier)?;
    let sig0 = test.rejects(test.table_p_value(table)?);
    let bound = |cell: usize| {
        if perm[cell] {
            composition[cell] as i64
        } else {
            0
        }
    };
    for i in -bound(0)..=bound(1) {
        for j in -bound(2)..=bound(3) {
            if i == 0 && j == 0 {
                continue;
            }
            let shifted = table.shifted(i, j).expect("within cell counts");
            if test.rejects(test.table_p_value(&shifted)?) != sig0 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
