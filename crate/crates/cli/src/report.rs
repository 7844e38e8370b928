// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Report types, fixed-precision JSON and plot-ready CSV.

use std::io;
use std::path::Path;

use anyhow::{Context, Result};
use fragility_core::{
    CaseFrame, ClosedFormSgfi, ElectionGfi, FragilityIndex, ModificationPlan, SgfiMethod,
    SgfiResult, StochasticThreshold, TrajectoryPoint,
};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

/// Equal-width bins used for covariate histograms.
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// Arguments the report was produced from, program name excluded.
    pub command: Vec<String>,
    pub measure: String,
    pub input: Option<InputDigest>,
    pub parameters: Parameters,
    /// Absent for grid sweeps, whose values are in `grid`.
    pub result: Option<FragilityIndex>,
    pub p_before: Option<f64>,
    pub p_after: Option<f64>,
    pub plan: Option<PlanSummary>,
    pub sgfi: Option<SgfiResult>,
    pub grid: Vec<GridPoint>,
    pub election: Option<ElectionDetail>,
    pub timing_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub source: String,
    pub rows: usize,
    pub arms: Vec<LevelCount>,
    pub outcomes: Vec<LevelCount>,
    pub covariates: Vec<String>,
}

impl InputDigest {
    pub fn of(frame: &CaseFrame, source: impl Into<String>) -> Self {
        let counts = |levels: &[String], counts: Vec<usize>| {
            levels
                .iter()
                .zip(counts)
                .map(|(level, count)| LevelCount {
                    level: level.clone(),
                    count,
                })
                .collect()
        };
        InputDigest {
            source: source.into(),
            rows: frame.len(),
            arms: counts(frame.arm_levels(), frame.arm_counts()),
            outcomes: counts(frame.outcome_levels(), frame.outcome_counts()),
            covariates: frame.covariate_names().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub test: Option<String>,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<StochasticThreshold>,
    pub trials: Option<usize>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Number of cases moved between one pair of levels within one arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellChange {
    pub arm: String,
    pub from: String,
    pub to: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    /// Cases in the study falling in the bin.
    pub all: usize,
    /// Modified cases falling in the bin.
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateHistogram {
    pub covariate: String,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub cases: usize,
    pub cells: Vec<CellChange>,
    pub case_ids: Vec<u64>,
    pub histograms: Vec<CovariateHistogram>,
}

impl PlanSummary {
    pub fn of(frame: &CaseFrame, plan: &ModificationPlan) -> Self {
        let mut cells: Vec<CellChange> = Vec::new();
        let mut selected_rows = Vec::with_capacity(plan.len());
        for entry in &plan.entries {
            let Some(row) = frame.row_of(entry.case_id) else {
                continue;
            };
            selected_rows.push(row);
            let arm = &frame.arm_levels()[frame.arm(row) as usize];
            let from = &frame.outcome_levels()[frame.outcome(row) as usize];
            let to = &frame.outcome_levels()[entry.new_outcome as usize];
            match cells
                .iter_mut()
                .find(|c| &c.arm == arm && &c.from == from && &c.to == to)
            {
                Some(cell) => cell.count += 1,
                None => cells.push(CellChange {
                    arm: arm.clone(),
                    from: from.clone(),
                    to: to.clone(),
                    count: 1,
                }),
            }
        }
        let histograms = frame
            .covariate_names()
            .iter()
            .enumerate()
            .map(|(column, name)| CovariateHistogram {
                covariate: name.clone(),
                bins: histogram(
                    frame.covariate_column(column),
                    &selected_rows,
                    HISTOGRAM_BINS,
                ),
            })
            .collect();
        PlanSummary {
            cases: plan.len(),
            cells,
            case_ids: plan.entries.iter().map(|e| e.case_id.0).collect(),
            histograms,
        }
    }
}

/// Equal-width histogram of `values` over their range, with a second count
/// for the rows in `selected`. The last bin is closed on the right.
pub fn histogram(values: &[f64], selected: &[usize], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = if hi > lo { bins } else { 1 };
    let width = (hi - lo) / bins as f64;
    let bin_of = |x: f64| {
        if width == 0.0 {
            0
        } else {
            (((x - lo) / width) as usize).min(bins - 1)
        }
    };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lower: lo + width * b as f64,
            upper: if b + 1 == bins {
                hi
            } else {
                lo + width * (b + 1) as f64
            },
            all: 0,
            selected: 0,
        })
        .collect();
    for &x in values {
        out[bin_of(x)].all += 1;
    }
    for &row in selected {
        out[bin_of(values[row])].selected += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub r: StochasticThreshold,
    pub q: f64,
    pub index: FragilityIndex,
    pub method: SgfiMethod,
    pub k_average: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionDetail {
    pub gfi: Option<ElectionGfi>,
    pub closed_form: Option<ClosedFormSgfi>,
}

/// Formats finite numbers with 17 significant digits, which round-trip
/// exactly. Non-finite values become `null`.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..16).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, x)
    } else {
        sci
    }
}

/// Pretty JSON layout with fixed-precision floats.
struct Digits17(PrettyFormatter<'static>);

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with struct field order as key order and 17-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

pub fn from_json(text: &str) -> Result<AnalysisReport> {
    Ok(serde_json::from_str(text)?)
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the plot-ready table for a report: histogram bins for a plan with
/// covariates, the (r, q) table for a grid, the trajectory for a single run.
pub fn write_plot_data(report: &AnalysisReport, path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct BinRow<'a> {
        covariate: &'a str,
        lower: f64,
        upper: f64,
        all: usize,
        selected: usize,
    }
    #[derive(Serialize)]
    struct GridRow {
        r: String,
        q: f64,
        index: String,
        method: SgfiMethod,
        k_average: Option<f64>,
    }
    if !report.grid.is_empty() {
        return write_csv(
            path,
            report.grid.iter().map(|g| GridRow {
                r: g.r.to_string(),
                q: g.q,
                index: g.index.to_string(),
                method: g.method,
                k_average: g.k_average,
            }),
        );
    }
    if let Some(sgfi) = &report.sgfi {
        return write_trajectory(path, &sgfi.trajectory);
    }
    let bins = report.plan.iter().flat_map(|p| {
        p.histograms.iter().flat_map(|h| {
            h.bins.iter().map(|b| BinRow {
                covariate: &h.covariate,
                lower: b.lower,
                upper: b.upper,
                all: b.all,
                selected: b.selected,
            })
        })
    });
    write_csv(path, bins)
}

pub fn write_trajectory(path: &Path, trajectory: &[TrajectoryPoint]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        k: usize,
        p_hat: f64,
    }
    write_csv(
        path,
        trajectory.iter().enumerate().map(|(i, &(k, p_hat))| Row {
            iteration: i + 1,
            k,
            p_hat,
        }),
    )
}
