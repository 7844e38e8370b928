// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Relative slack when comparing conditional-table probabilities with the
/// observed one.
const PMF_TIE_SLACK: f64 = 1e-12;

/// A 2×2 contingency table. Rows are arms, columns are event / nonevent.
///
/// ```text
///            event  nonevent
///   arm 1      a       b
///   arm 2      c       d
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Table2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Table2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Result<Self> {
        let table = Table2x2 { a, b, c, d };
        if table.total() == 0 {
            return Err(Error::InvalidTable("table has no cases".into()));
        }
        Ok(table)
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Cell counts in `[a, b, c, d]` order.
    pub fn cells(&self) -> [u64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// `(a·d) / (b·c)`; infinite or NaN when a margin is degenerate.
    pub fn odds_ratio(&self) -> f64 {
        (self.a as f64 * self.d as f64) / (self.b as f64 * self.c as f64)
    }

    /// Shift `i` arm-1 cases and `j` arm-2 cases from nonevent to event
    /// (negative values move events to nonevents).
    pub fn shifted(&self, i: i64, j: i64) -> Option<Table2x2> {
        let a = self.a as i64 + i;
        let b = self.b as i64 - i;
        let c = self.c as i64 + j;
        let d = self.d as i64 - j;
        if a < 0 || b < 0 || c < 0 || d < 0 {
            return None;
        }
        Some(Table2x2 {
            a: a as u64,
            b: b as u64,
            c: c as u64,
            d: d as u64,
        })
    }
}

impl fmt::Display for Table2x2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.a, self.b, self.c, self.d)
    }
}

/// Two-sided Fisher exact test p-value.
///
/// Sums the probability of every table with the observed margins whose
/// conditional probability does not exceed that of the observed table.
pub fn fisher_exact_two_sided(table: &Table2x2) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::InvalidTable("table has no cases".into()));
    }
    let row1 = table.a + table.b;
    let col1 = table.a + table.c;
    let lo = (row1 + col1).saturating_sub(n);
    let hi = row1.min(col1);
    if lo == hi {
        return Ok(1.0);
    }

    // Weights relative to the mode, filled by the pmf ratio recurrence.
    let mode = (((row1 + 1) as f64 * (col1 + 1) as f64) / (n + 2) as f64).floor() as u64;
    let mode = mode.clamp(lo, hi);
    let len = (hi - lo + 1) as usize;
    let mut weights = vec![0.0f64; len];
    weights[(mode - lo) as usize] = 1.0;
    let ratio = |x: u64| -> f64 {
        // w(x + 1) / w(x)
        ((row1 - x) as f64 * (col1 - x) as f64)
            / ((x + 1) as f64 * (n + x + 1 - row1 - col1) as f64)
    };
    let mut w = 1.0;
    for x in mode..hi {
        w *= ratio(x);
        weights[(x + 1 - lo) as usize] = w;
    }
    w = 1.0;
    for x in (lo..mode).rev() {
        w /= ratio(x);
        weights[(x - lo) as usize] = w;
    }

    let observed = weights[(table.a - lo) as usize];
    let cutoff = observed * (1.0 + PMF_TIE_SLACK);
    let mut total = 0.0;
    let mut tail = 0.0;
    for &w in &weights {
        total += w;
        if w <= cutoff {
            tail += w;
        }
    }
    Ok((tail / total).min(1.0))
}

/// Fisher p-value by direct log-space summation; slower, used as a cross-check.
pub fn fisher_exact_two_sided_direct(table: &Table2x2) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::InvalidTable("table has no cases".into()));
    }
    let row1 = table.a + table.b;
    let col1 = table.a + table.c;
    let lo = (row1 + col1).saturating_sub(n);
    let hi = row1.min(col1);
    let ln_pmf =
        |x: u64| ln_binomial(row1, x) + ln_binomial(n - row1, col1 - x) - ln_binomial(n, col1);
    let observed = ln_pmf(table.a);
    let cutoff = observed + PMF_TIE_SLACK.ln_1p();
    let p: f64 = (lo..=hi)
        .map(ln_pmf)
        .filter(|&l| l <= cutoff)
        .map(f64::exp)
        .sum();
    Ok(p.min(1.0))
}
