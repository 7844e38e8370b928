// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Case-level data.
//!
//! A [`CaseFrame`] holds one row per case: an arm, a categorical outcome and
//! any number of real covariates. Level order carries meaning for binary
//! data: arm level 0 is the first row of the 2×2 table and outcome level 0
//! is the event column.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{logistic_fit, Table2x2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseId(pub u64);

/// One row handed to [`CaseFrame::from_rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRow {
    pub id: CaseId,
    pub arm: u32,
    pub outcome: u32,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFrame {
    ids: Arc<[CaseId]>,
    index: Arc<HashMap<CaseId, usize>>,
    arms: Arc<[u32]>,
    arm_levels: Arc<[String]>,
    outcomes: Vec<u32>,
    outcome_levels: Arc<[String]>,
    covariate_names: Arc<[String]>,
    /// Column-major: one vector per covariate.
    covariates: Arc<[Vec<f64>]>,
}

impl CaseFrame {
    pub fn from_rows(
        arm_levels: Vec<String>,
        outcome_levels: Vec<String>,
        covariate_names: Vec<String>,
        rows: Vec<CaseRow>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter(
                "a case frame needs at least one row".into(),
            ));
        }
        if arm_levels.is_empty() || outcome_levels.is_empty() {
            return Err(Error::InvalidParameter(
                "arm and outcome levels must be non-empty".into(),
            ));
        }
        let n = rows.len();
        let mut ids = Vec::with_capacity(n);
        let mut index = HashMap::with_capacity(n);
        let mut arms = Vec::with_capacity(n);
        let mut outcomes = Vec::with_capacity(n);
        let mut covariates = vec![Vec::with_capacity(n); covariate_names.len()];
        for (row, case) in rows.into_iter().enumerate() {
            if index.insert(case.id, row).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate case id {}",
                    case.id.0
                )));
            }
            if case.arm as usize >= arm_levels.len() {
                return Err(Error::InvalidParameter(format!(
                    "arm level {} out of range",
                    case.arm
                )));
            }
            if case.outcome as usize >= outcome_levels.len() {
                return Err(Error::InvalidParameter(format!(
                    "outcome level {} out of range",
                    case.outcome
                )));
            }
            if case.covariates.len() != covariate_names.len() {
                return Err(Error::SchemaMismatch(format!(
                    "case {} has {} covariates, expected {}",
                    case.id.0,
                    case.covariates.len(),
                    covariate_names.len()
                )));
            }
            ids.push(case.id);
            arms.push(case.arm);
            outcomes.push(case.outcome);
            for (column, value) in covariates.iter_mut().zip(case.covariates) {
                column.push(value);
            }
        }
        Ok(CaseFrame {
            ids: ids.into(),
            index: Arc::new(index),
            arms: arms.into(),
            arm_levels: arm_levels.into(),
            outcomes,
            outcome_levels: outcome_levels.into(),
            covariate_names: covariate_names.into(),
            covariates: covariates.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[CaseId] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> CaseId {
        self.ids[row]
    }

    pub fn row_of(&self, id: CaseId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn arm(&self, row: usize) -> u32 {
        self.arms[row]
    }

    pub fn outcome(&self, row: usize) -> u32 {
        self.outcomes[row]
    }

    pub fn outcomes(&self) -> &[u32] {
        &self.outcomes
    }

    pub fn arm_levels(&self) -> &[String] {
        &self.arm_levels
    }

    pub fn outcome_levels(&self) -> &[String] {
        &self.outcome_levels
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_column(&self, column: usize) -> &[f64] {
        &self.covariates[column]
    }

    pub fn covariate(&self, column: usize, row: usize) -> f64 {
        self.covariates[column][row]
    }

    /// Two arms, two outcome levels and no covariates.
    pub fn is_two_by_two(&self) -> bool {
        self.arm_levels.len() == 2 && self.outcome_levels.len() == 2 && self.covariates.is_empty()
    }

    /// Overwrite one outcome in place. Callers keep the level in range.
    pub(crate) fn set_outcome(&mut self, row: usize, level: u32) {
        debug_assert!((level as usize) < self.outcome_levels.len());
        self.outcomes[row] = level;
    }

    /// A copy with one outcome replaced.
    pub fn with_outcome(&self, row: usize, level: u32) -> Result<CaseFrame> {
        if row >= self.len() || level as usize >= self.outcome_levels.len() {
            return Err(Error::InvalidParameter(format!(
                "row {row} / outcome level {level} out of range"
            )));
        }
        let mut out = self.clone();
        out.set_outcome(row, level);
        Ok(out)
    }

    /// Apply a modification plan, checking it against this frame.
    pub fn apply(&self, plan: &ModificationPlan) -> Result<CaseFrame> {
        plan.validate(self)?;
        let mut out = self.clone();
        for entry in &plan.entries {
            let row = self.row_of(entry.case_id).expect("validated");
            out.set_outcome(row, entry.new_outcome);
        }
        Ok(out)
    }

    /// Aggregate counts, ignoring covariates.
    pub fn table(&self) -> Result<Table2x2> {
        if self.arm_levels.len() != 2 {
            return Err(Error::SchemaMismatch(format!(
                "a 2x2 table needs exactly two arms, found {}",
                self.arm_levels.len()
            )));
        }
        if self.outcome_levels.len() != 2 {
            return Err(Error::SchemaMismatch(format!(
                "a 2x2 table needs a binary outcome, found {} levels",
                self.outcome_levels.len()
            )));
        }
        let mut cells = [0u64; 4];
        for (&arm, &outcome) in self.arms.iter().zip(&self.outcomes) {
            cells[(arm * 2 + outcome) as usize] += 1;
        }
        Ok(Table2x2 {
            a: cells[0],
            b: cells[1],
            c: cells[2],
            d: cells[3],
        })
    }

    /// Intercept, one indicator per arm level except the last, then every
    /// covariate. For two arms column 1 indicates arm level 0.
    pub fn design_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        let arm_columns = self.arm_levels.len().saturating_sub(1);
        let p = 1 + arm_columns + self.covariates.len();
        let mut x = DMatrix::zeros(n, p);
        for row in 0..n {
            x[(row, 0)] = 1.0;
            let arm = self.arms[row] as usize;
            if arm < arm_columns {
                x[(row, 1 + arm)] = 1.0;
            }
            for (j, column) in self.covariates.iter().enumerate() {
                x[(row, 1 + arm_columns + j)] = column[row];
            }
        }
        Ok(x)
    }

    /// 1.0 where the outcome is the event level (level 0), else 0.0.
    pub fn event_indicator(&self) -> Result<Vec<f64>> {
        if self.outcome_levels.len() != 2 {
            return Err(Error::SchemaMismatch(format!(
                "a binary outcome is required, found {} levels",
                self.outcome_levels.len()
            )));
        }
        Ok(self
            .outcomes
            .iter()
            .map(|&o| if o == 0 { 1.0 } else { 0.0 })
            .collect())
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.arm_levels.len()];
        for &arm in self.arms.iter() {
            counts[arm as usize] += 1;
        }
        counts
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.outcome_levels.len()];
        for &o in &self.outcomes {
            counts[o as usize] += 1;
        }
        counts
    }
}

/// Long-format frame for a 2×2 table.
///
/// Rows come in cell order (arm-1 events, arm-1 nonevents, arm-2 events,
/// arm-2 nonevents) with case ids `0..n`.
pub fn frame_from_table(table: &Table2x2) -> Result<CaseFrame> {
    let n = table.total();
    if n == 0 {
        return Err(Error::InvalidTable("table has no cases".into()));
    }
    let mut rows = Vec::with_capacity(n as usize);
    let mut id = 0u64;
    for (cell, &count) in table.cells().iter().enumerate() {
        for _ in 0..count {
            rows.push(CaseRow {
                id: CaseId(id),
                arm: (cell / 2) as u32,
                outcome: (cell % 2) as u32,
                covariates: Vec::new(),
            });
            id += 1;
        }
    }
    CaseFrame::from_rows(
        vec!["arm 1".into(), "arm 2".into()],
        vec!["event".into(), "nonevent".into()],
        Vec::new(),
        rows,
    )
}

/// Aggregate a two-arm, binary-outcome frame.
pub fn table_from_frame(frame: &CaseFrame) -> Result<Table2x2> {
    frame.table()
}

/// A new outcome for one case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub case_id: CaseId,
    pub new_outcome: u32,
}

/// The set of changed rows taking a frame to its modified version.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModificationPlan {
    pub entries: Vec<PlanEntry>,
}

impl ModificationPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every case appears once, exists in `frame`, and gets a different outcome.
    pub fn validate(&self, frame: &CaseFrame) -> Result<()> {
        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.case_id) {
                return Err(Error::InvalidParameter(format!(
                    "case {} modified twice",
                    entry.case_id.0
                )));
            }
            let row = frame.row_of(entry.case_id).ok_or_else(|| {
                Error::InvalidParameter(format!("case {} not in frame", entry.case_id.0))
            })?;
            if entry.new_outcome as usize >= frame.outcome_levels().len() {
                return Err(Error::InvalidParameter(format!(
                    "outcome level {} out of range",
                    entry.new_outcome
                )));
            }
            if frame.outcome(row) == entry.new_outcome {
                return Err(Error::InvalidParameter(format!(
                    "case {} already has outcome {}",
                    entry.case_id.0, entry.new_outcome
                )));
            }
        }
        Ok(())
    }

    /// The plan that undoes this one when applied to `frame.apply(self)`.
    pub fn reversed(&self, original: &CaseFrame) -> Result<ModificationPlan> {
        self.validate(original)?;
        Ok(ModificationPlan {
            entries: self
                .entries
                .iter()
                .map(|e| PlanEntry {
                    case_id: e.case_id,
                    new_outcome: original.outcome(original.row_of(e.case_id).expect("validated")),
                })
                .collect(),
        })
    }
}

/// Outcome modifier under the sufficiently likely construction: a case may
/// take an alternative outcome only when its modeled probability is at
/// least `q`.
///
/// The probability model is evaluated once against the frame it was built
/// for and stored as an `n × levels` table.
#[derive(Debug, Clone, PartialEq)]
pub struct Modifier {
    q: f64,
    levels: usize,
    probabilities: Arc<[f64]>,
}

impl Modifier {
    pub fn from_fn(
        frame: &CaseFrame,
        q: f64,
        mut model: impl FnMut(usize, u32) -> f64,
    ) -> Result<Self> {
        check_threshold(q)?;
        let levels = frame.outcome_levels().len();
        let mut probabilities = Vec::with_capacity(frame.len() * levels);
        for row in 0..frame.len() {
            for level in 0..levels as u32 {
                let p = model(row, level);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!(
                        "model probability {p} for row {row} is outside [0, 1]"
                    )));
                }
                probabilities.push(p);
            }
        }
        Ok(Modifier {
            q,
            levels,
            probabilities: probabilities.into(),
        })
    }

    /// Every alternative outcome permitted for every case.
    pub fn unrestricted(frame: &CaseFrame) -> Self {
        Modifier::from_fn(frame, 0.0, |_, _| 1.0).expect("constant model is valid")
    }

    /// Same model, different threshold.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        check_threshold(q)?;
        Ok(Modifier {
            q,
            levels: self.levels,
            probabilities: self.probabilities.clone(),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Number of rows the model was built for.
    pub fn rows(&self) -> usize {
        self.probabilities.len() / self.levels.max(1)
    }

    pub fn probability(&self, row: usize, candidate: u32) -> f64 {
        self.probabilities[row * self.levels + candidate as usize]
    }

    /// Whether `row` may change from its outcome in `frame` to `candidate`.
    pub fn permits(&self, frame: &CaseFrame, row: usize, candidate: u32) -> bool {
        candidate != frame.outcome(row) && self.probability(row, candidate) >= self.q
    }

    /// Permitted alternative outcomes for `row`, ascending.
    pub fn permitted<'a>(
        &'a self,
        frame: &'a CaseFrame,
        row: usize,
    ) -> impl Iterator<Item = u32> + 'a {
        (0..self.levels as u32).filter(move |&c| self.permits(frame, row, c))
    }

    pub(crate) fn check_frame(&self, frame: &CaseFrame) -> Result<()> {
        if self.rows() != frame.len() || self.levels != frame.outcome_levels().len() {
            return Err(Error::InvalidParameter(format!(
                "modifier was built for {} rows x {} levels, frame has {} x {}",
                self.rows(),
                self.levels,
                frame.len(),
                frame.outcome_levels().len()
            )));
        }
        Ok(())
    }
}

fn check_threshold(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "sufficiently likely threshold must lie in [0, 1], got {q}"
        )));
    }
    Ok(())
}

/// Sufficiently likely modifier with an empirical probability model.
///
/// Without covariates the model is the outcome distribution within each
/// arm. With covariates it is a logistic regression of the event on arm and
/// covariates. Either way it is fitted once, on `frame` as given.
pub fn empirical_modifier(frame: &CaseFrame, q: f64) -> Result<Modifier> {
    check_threshold(q)?;
    if frame.covariate_names().is_empty() {
        let arms = frame.arm_levels().len();
        let levels = frame.outcome_levels().len();
        let mut counts = vec![0usize; arms * levels];
        let mut totals = vec![0usize; arms];
        for row in 0..frame.len() {
            let arm = frame.arm(row) as usize;
            counts[arm * levels + frame.outcome(row) as usize] += 1;
            totals[arm] += 1;
        }
        Modifier::from_fn(frame, q, |row, level| {
            let arm = frame.arm(row) as usize;
            counts[arm * levels + level as usize] as f64 / totals[arm] as f64
        })
    } else {
        let x = frame.design_matrix()?;
        let y = frame.event_indicator()?;
        let fit = logistic_fit(&x, &y)?;
        if !fit.converged {
            return Err(Error::UnconvergedFit);
        }
        let row_buf: Vec<Vec<f64>> = (0..frame.len())
            .map(|i| x.row(i).iter().copied().collect())
            .collect();
        Modifier::from_fn(frame, q, |row, level| {
            let p_event = fit.predict(&row_buf[row]);
            if level == 0 {
                p_event
            } else {
                1.0 - p_event
            }
        })
    }
}

/// A restriction set of cases, kept sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSubset {
    ids: Vec<CaseId>,
}

impl CaseSubset {
    pub fn all(frame: &CaseFrame) -> Self {
        let mut ids = frame.ids().to_vec();
        ids.sort_unstable();
        CaseSubset { ids }
    }

    pub fn empty() -> Self {
        CaseSubset::default()
    }

    pub fn from_ids(frame: &CaseFrame, ids: impl IntoIterator<Item = CaseId>) -> Result<Self> {
        let set: BTreeSet<CaseId> = ids.into_iter().collect();
        if let Some(missing) = set.iter().find(|id| frame.row_of(**id).is_none()) {
            return Err(Error::InvalidParameter(format!(
                "case {} is not in the frame",
                missing.0
            )));
        }
        Ok(CaseSubset {
            ids: set.into_iter().collect(),
        })
    }

    pub fn from_rows(frame: &CaseFrame, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut ids: Vec<CaseId> = rows.into_iter().map(|r| frame.id(r)).collect();
        ids.sort_unstable();
        ids.dedup();
        CaseSubset { ids }
    }

    pub fn ids(&self) -> &[CaseId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: CaseId) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    /// Row indices in ascending case-id order.
    pub fn rows(&self, frame: &CaseFrame) -> Result<Vec<usize>> {
        self.ids
            .iter()
            .map(|&id| {
                frame.row_of(id).ok_or_else(|| {
                    Error::InvalidParameter(format!("case {} is not in the frame", id.0))
                })
            })
            .collect()
    }
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub arm: String,
    pub outcome: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Arm value placed first (table row 1). Defaults to the largest value
    /// in string order, so `1` beats `0` and `yes` beats `no`.
    #[serde(default)]
    pub treated: Option<String>,
    /// Outcome value treated as the event. Same default rule as `treated`.
    #[serde(default)]
    pub event: Option<String>,
    /// Optional integer id column; row order (from 0) is used otherwise.
    #[serde(default)]
    pub id: Option<String>,
}

impl CsvSchema {
    pub fn new(arm: impl Into<String>, outcome: impl Into<String>) -> Self {
        CsvSchema {
            arm: arm.into(),
            outcome: outcome.into(),
            ..Default::default()
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::SchemaMismatch(format!("column `{name}` not found in header")))
}

fn ordered_levels(values: &[String], first: Option<&str>, role: &str) -> Result<Vec<String>> {
    let distinct: BTreeSet<&str> = values.iter().map(String::as_str).collect();
    let head = match first {
        Some(f) if distinct.contains(f) => f,
        Some(f) => {
            return Err(Error::SchemaMismatch(format!(
                "{role} value `{f}` does not occur in the data"
            )))
        }
        None => distinct.iter().next_back().copied().expect("non-empty"),
    };
    let mut levels = vec![head.to_string()];
    levels.extend(
        distinct
            .into_iter()
            .filter(|&v| v != head)
            .map(str::to_string),
    );
    Ok(levels)
}

/// Parse a case frame from CSV text. A header row is required; lines
/// starting with `#` are skipped.
pub fn read_csv<R: io::Read>(reader: R, schema: &CsvSchema) -> Result<CaseFrame> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let arm_col = column_index(&headers, &schema.arm)?;
    let outcome_col = column_index(&headers, &schema.outcome)?;
    let covariate_cols = schema
        .covariates
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let id_col = schema
        .id
        .as_deref()
        .map(|c| column_index(&headers, c))
        .transpose()?;

    struct Raw {
        line: u64,
        id: Option<u64>,
        arm: String,
        outcome: String,
        covariates: Vec<f64>,
    }
    let mut raws = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize, name: &str| -> Result<String> {
            match record.get(col) {
                Some(v) if !v.is_empty() && v != "NA" => Ok(v.to_string()),
                _ => Err(Error::Parse {
                    line,
                    message: format!("missing value for column `{name}`"),
                }),
            }
        };
        let arm = field(arm_col, &schema.arm)?;
        let outcome = field(outcome_col, &schema.outcome)?;
        let mut covariates = Vec::with_capacity(covariate_cols.len());
        for (&col, name) in covariate_cols.iter().zip(&schema.covariates) {
            let text = field(col, name)?;
            let value: f64 = text.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{name}`: `{text}` is not a number"),
            })?;
            covariates.push(value);
        }
        let id = match (id_col, schema.id.as_deref()) {
            (Some(col), Some(name)) => {
                let text = field(col, name)?;
                Some(text.parse::<u64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column `{name}`: `{text}` is not a non-negative integer"),
                })?)
            }
            _ => None,
        };
        raws.push(Raw {
            line,
            id,
            arm,
            outcome,
            covariates,
        });
    }
    if raws.is_empty() {
        return Err(Error::SchemaMismatch("the file has no data rows".into()));
    }

    let arm_values: Vec<String> = raws.iter().map(|r| r.arm.clone()).collect();
    let outcome_values: Vec<String> = raws.iter().map(|r| r.outcome.clone()).collect();
    let arm_levels = ordered_levels(&arm_values, schema.treated.as_deref(), "treated arm")?;
    let outcome_levels = ordered_levels(&outcome_values, schema.event.as_deref(), "event")?;
    let arm_code: HashMap<&str, u32> = arm_levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();
    let outcome_code: HashMap<&str, u32> = outcome_levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();

    let mut seen = HashMap::new();
    let mut rows = Vec::with_capacity(raws.len());
    for (i, raw) in raws.iter().enumerate() {
        let id = CaseId(raw.id.unwrap_or(i as u64));
        if let Some(prev) = seen.insert(id, raw.line) {
            return Err(Error::Parse {
                line: raw.line,
                message: format!("case id {} already used on line {prev}", id.0),
            });
        }
        rows.push(CaseRow {
            id,
            arm: arm_code[raw.arm.as_str()],
            outcome: outcome_code[raw.outcome.as_str()],
            covariates: raw.covariates.clone(),
        });
    }
    CaseFrame::from_rows(arm_levels, outcome_levels, schema.covariates.clone(), rows)
}

/// [`read_csv`] from a file path.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<CaseFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(io::BufReader::new(file), schema)
}
