// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::Arc;

use crate::data::{frame_from_table, CaseFrame};
use crate::error::{Error, Result};
use crate::stats::fisher::{fisher_exact_two_sided, Table2x2};
use crate::stats::logistic::{logistic_fit, wald_p};

/// A p-value computed from a whole case frame.
///
/// Implementations must not depend on row order or on case ids: the greedy
/// search treats rows with identical contents as interchangeable.
pub trait PValueFn: Send + Sync {
    fn p_value(&self, frame: &CaseFrame) -> Result<f64>;

    /// Shortcut for data that aggregate to a 2×2 table. The default builds
    /// the long-format frame and calls [`PValueFn::p_value`].
    fn table_p_value(&self, table: &Table2x2) -> Result<f64> {
        self.p_value(&frame_from_table(table)?)
    }

    fn name(&self) -> &str;
}

/// Fisher's exact test on the arm × outcome table.
#[derive(Debug, Clone, Copy, Default)]
pub struct FisherTest;

impl PValueFn for FisherTest {
    fn p_value(&self, frame: &CaseFrame) -> Result<f64> {
        fisher_exact_two_sided(&frame.table()?)
    }

    fn table_p_value(&self, table: &Table2x2) -> Result<f64> {
        fisher_exact_two_sided(table)
    }

    fn name(&self) -> &str {
        "fisher"
    }
}

/// Wald test on the arm coefficient of a logistic regression of the event
/// indicator on the arm indicator and every covariate in the frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticWaldTest;

impl PValueFn for LogisticWaldTest {
    fn p_value(&self, frame: &CaseFrame) -> Result<f64> {
        let fit = logistic_fit(&frame.design_matrix()?, &frame.event_indicator()?)?;
        wald_p(&fit, 1)
    }

    fn name(&self) -> &str {
        "logistic"
    }
}

/// A p-value function with a significance level. The rejection region is
/// `{frame : p_value(frame) < alpha}`.
#[derive(Clone)]
pub struct TestSpec {
    p_value: Arc<dyn PValueFn>,
    alpha: f64,
}

impl fmt::Debug for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestSpec")
            .field("test", &self.p_value.name())
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl TestSpec {
    pub fn new(p_value: Arc<dyn PValueFn>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "significance level must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(TestSpec { p_value, alpha })
    }

    pub fn fisher(alpha: f64) -> Result<Self> {
        Self::new(Arc::new(FisherTest), alpha)
    }

    pub fn logistic(alpha: f64) -> Result<Self> {
        Self::new(Arc::new(LogisticWaldTest), alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn name(&self) -> &str {
        self.p_value.name()
    }

    pub fn p_value(&self, frame: &CaseFrame) -> Result<f64> {
        self.p_value.p_value(frame)
    }

    pub fn table_p_value(&self, table: &Table2x2) -> Result<f64> {
        self.p_value.table_p_value(table)
    }

    /// Whether `p` lies in the rejection region.
    pub fn rejects(&self, p: f64) -> bool {
        is_significant(p, self.alpha)
    }
}

/// `p < alpha`, strictly.
pub fn is_significant(p: f64, alpha: f64) -> bool {
    p < alpha
}
