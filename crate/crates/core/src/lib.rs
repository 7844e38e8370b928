// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Fragility measures for significance decisions.
//!
//! A fragility index counts how many cases would need a different outcome
//! for a significance decision to reverse. This crate provides:
//!
//! * [`stats`]: the statistical substrate (hypergeometric tails, Fisher's
//!   exact test, logistic regression by IRLS, Wald p-values).
//! * [`data`]: the case-level data frame, CSV ingestion, modification plans
//!   and the "sufficiently likely" outcome modifier.
//! * [`solver`]: exact fragility indices for 2×2 tables, the greedy
//!   generalized fragility search and the reversibility predicate.
//! * [`stochastic`]: Monte Carlo reversal probabilities, the exact 2×2
//!   composition oracle, and stochastic-approximation root finding for
//!   stochastic (generalized) fragility indices.
//! * [`election`]: fragility of a winner-take-all electoral decision.
//!
//! Signs follow one convention throughout: a positive index means the data
//! start out significant, a negative index means they start out
//! nonsignificant.

pub mod data;
pub mod election;
mod error;
pub mod solver;
pub mod stats;
pub mod stochastic;

pub use data::{
    empirical_modifier, frame_from_table, load_csv, read_csv, table_from_frame, CaseFrame, CaseId,
    CaseRow, CaseSubset, CsvSchema, ModificationPlan, Modifier, PlanEntry,
};
pub use election::{
    election_gfi, load_tally_csv, read_tally_csv, sgfi_half_closed_form, Candidate, ClosedFormSgfi,
    ElectionGfi, Race, StateFlip, StateTally,
};
pub use error::{Error, Result, TrajectoryPoint};
pub use solver::{
    fi_2x2_exact, fi_2x2_exact_frame, gfi_greedy, reversible, reversible_2x2_exact, FragilityIndex,
    FragilityResult,
};
pub use stats::{
    fisher_exact_two_sided, hypergeom_pmf, hypergeom_sf, is_significant, logistic_fit, wald_p,
    LogisticFit, Table2x2, TestSpec,
};
pub use stochastic::{
    exact_reversal_probability, exact_sfi_2x2, probability_reversal, sgfi, FinalCheck,
    ReversalEstimate, SgfiConfig, SgfiMethod, SgfiResult, StochasticThreshold,
};
