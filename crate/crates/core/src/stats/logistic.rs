// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Binary logistic regression fitted by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 50;
const SCORE_TOLERANCE: f64 = 1e-8;
const DEVIANCE_TOLERANCE: f64 = 1e-10;
const RIDGE: f64 = 1e-8;
/// Fitted probabilities this close to 0 or 1 signal separation. Either
/// stopping rule, when driven by separation, leaves some fitted probability
/// inside this band.
const SEPARATION_EPS: f64 = 1e-8;
/// Smallest acceptable eigenvalue ratio of the design's Gram matrix.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub converged: bool,
    /// Set when fitted probabilities collapse to 0 or 1.
    pub separated: bool,
    pub iterations: usize,
    pub deviance: f64,
}

impl LogisticFit {
    /// Fitted event probability for one design row.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let eta: f64 = row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum();
        sigmoid(eta)
    }

    pub fn odds_ratio(&self, coefficient_index: usize) -> f64 {
        self.coefficients[coefficient_index].exp()
    }
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn binary_deviance(y: f64, mu: f64) -> f64 {
    let mu = mu.clamp(1e-300, 1.0 - 1e-16);
    if y > 0.5 {
        -2.0 * mu.ln()
    } else {
        -2.0 * (1.0 - mu).ln()
    }
}

struct Irls<'a> {
    design: &'a DMatrix<f64>,
    outcomes: &'a [f64],
}

impl Irls<'_> {
    /// Score vector, information matrix, deviance and separation flag at `beta`.
    fn evaluate(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, f64, bool) {
        let x = self.design;
        let p = x.ncols();
        let eta = x * beta;
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        let mut deviance = 0.0;
        let mut separated = false;
        for i in 0..x.nrows() {
            let mu = sigmoid(eta[i]);
            if !(SEPARATION_EPS..=1.0 - SEPARATION_EPS).contains(&mu) {
                separated = true;
            }
            let w = mu * (1.0 - mu);
            let resid = self.outcomes[i] - mu;
            deviance += binary_deviance(self.outcomes[i], mu);
            for r in 0..p {
                let xr = x[(i, r)];
                score[r] += xr * resid;
                let wx = w * xr;
                for c in 0..=r {
                    info[(r, c)] += wx * x[(i, c)];
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                info[(c, r)] = info[(r, c)];
            }
        }
        (score, info, deviance, separated)
    }
}

fn solve_spd(info: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = info.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    let ridged = info + DMatrix::identity(info.nrows(), info.ncols()) * RIDGE;
    ridged.cholesky().map(|chol| chol.solve(rhs))
}

fn invert_spd(info: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(chol) = info.clone().cholesky() {
        return Some(chol.inverse());
    }
    let ridged = info + DMatrix::identity(info.nrows(), info.ncols()) * RIDGE;
    ridged.cholesky().map(|chol| chol.inverse())
}

fn check_rank(design: &DMatrix<f64>) -> Result<()> {
    let gram = design.transpose() * design;
    let eigen = gram.symmetric_eigenvalues();
    let max = eigen.iter().cloned().fold(0.0f64, f64::max);
    let min = eigen.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min <= max * RANK_TOLERANCE {
        return Err(Error::SingularDesign);
    }
    Ok(())
}

/// Maximum-likelihood logistic regression.
///
/// `design` should already contain an intercept column. Outcomes must be 0
/// or 1. Non-convergence and separation are reported through
/// [`LogisticFit::converged`] instead of an error; a rank-deficient design is
/// an error.
pub fn logistic_fit(design: &DMatrix<f64>, outcomes: &[f64]) -> Result<LogisticFit> {
    logistic_fit_from(design, outcomes, None)
}

/// [`logistic_fit`] with an optional starting point for the coefficients.
pub fn logistic_fit_from(
    design: &DMatrix<f64>,
    outcomes: &[f64],
    start: Option<&[f64]>,
) -> Result<LogisticFit> {
    let (n, p) = design.shape();
    if outcomes.len() != n {
        return Err(Error::InvalidParameter(format!(
            "design has {n} rows but {} outcomes were given",
            outcomes.len()
        )));
    }
    if n < p || p == 0 {
        return Err(Error::InvalidParameter(format!(
            "need at least as many rows as columns (rows={n}, columns={p})"
        )));
    }
    if let Some(bad) = outcomes.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidParameter(format!(
            "outcomes must be 0 or 1, found {bad}"
        )));
    }
    check_rank(design)?;

    let irls = Irls { design, outcomes };
    let mut beta = match start {
        Some(s) if s.len() == p => DVector::from_column_slice(s),
        Some(_) => {
            return Err(Error::InvalidParameter(
                "starting coefficients have the wrong length".into(),
            ))
        }
        None => DVector::zeros(p),
    };
    let (mut score, mut info, mut deviance, mut separated) = irls.evaluate(&beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        if score.amax() < SCORE_TOLERANCE {
            converged = true;
            break;
        }
        let Some(step) = solve_spd(&info, &score) else {
            break;
        };
        // Step halving keeps the deviance from increasing.
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = &beta + &step * scale;
            let eval = irls.evaluate(&candidate);
            if eval.2.is_finite() && eval.2 <= deviance * (1.0 + 1e-12) + 1e-12 {
                accepted = Some((candidate, eval));
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        let Some((next, (s, i, dev, sep))) = accepted else {
            break;
        };
        let change = (deviance - dev).abs() / (dev.abs() + 0.1);
        beta = next;
        score = s;
        info = i;
        deviance = dev;
        separated = sep;
        if change < DEVIANCE_TOLERANCE {
            converged = true;
            break;
        }
    }

    let standard_errors = match invert_spd(&info) {
        Some(cov) => (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; p],
    };
    let finite = beta.iter().all(|b| b.is_finite());
    Ok(LogisticFit {
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        converged: converged && !separated && finite,
        separated,
        iterations,
        deviance,
    })
}

/// Two-sided Wald p-value for one coefficient: `2·Φ(−|β/se|)`.
pub fn wald_p(fit: &LogisticFit, coefficient_index: usize) -> Result<f64> {
    if !fit.converged {
        return Err(Error::UnconvergedFit);
    }
    let (Some(&coef), Some(&se)) = (
        fit.coefficients.get(coefficient_index),
        fit.standard_errors.get(coefficient_index),
    ) else {
        return Err(Error::InvalidParameter(format!(
            "coefficient index {coefficient_index} out of range"
        )));
    };
    if coef == 0.0 {
        return Ok(1.0);
    }
    if se.is_nan() || se <= 0.0 {
        return Err(Error::UnconvergedFit);
    }
    Ok(normal_two_sided(coef / se))
}

/// `P[|Z| ≥ |z|]` for a standard normal `Z`.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}
