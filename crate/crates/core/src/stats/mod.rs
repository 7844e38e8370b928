// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Statistical substrate: distributions, tests and significance decisions.

pub mod fisher;
pub mod hypergeom;
pub mod logistic;
mod test_spec;

pub use fisher::{fisher_exact_two_sided, Table2x2};
pub use hypergeom::{
    binomial_sf, hypergeom_ln_pmf, hypergeom_pmf, hypergeom_sf, hypergeom_sf_exact,
    multivariate_hypergeom_ln_pmf, BINOMIAL_SWITCH_POPULATION,
};
pub use logistic::{logistic_fit, logistic_fit_from, normal_two_sided, wald_p, LogisticFit};
pub use test_spec::{is_significant, FisherTest, LogisticWaldTest, PValueFn, TestSpec};
