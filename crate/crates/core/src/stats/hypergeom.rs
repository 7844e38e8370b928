// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Hypergeometric and binomial tails.
//!
//! Probabilities are built in log space so that populations in the hundreds
//! of millions do not overflow. Above [`BINOMIAL_SWITCH_POPULATION`] the
//! upper tail is taken from the binomial approximation with
//! `p = successes / population`, evaluated through the regularized
//! incomplete beta function.

use statrs::function::beta::beta_reg;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Population size above which [`hypergeom_sf`] uses the binomial route.
pub const BINOMIAL_SWITCH_POPULATION: u64 = 10_000_000;

/// Terms smaller than this fraction of the running sum end a tail walk.
const TAIL_EPSILON: f64 = 1e-18;

fn check(population: u64, successes: u64, draws: u64) -> Result<()> {
    if successes > population || draws > population {
        return Err(Error::InvalidParameter(format!(
            "hypergeometric needs successes <= population and draws <= population \
             (population={population}, successes={successes}, draws={draws})"
        )));
    }
    Ok(())
}

/// Support `[lo, hi]` of the number of successes among `draws`.
pub fn hypergeom_support(population: u64, successes: u64, draws: u64) -> (u64, u64) {
    let lo = (draws + successes).saturating_sub(population);
    let hi = draws.min(successes);
    (lo, hi)
}

fn ln_pmf_unchecked(population: u64, successes: u64, draws: u64, observed: u64) -> f64 {
    ln_binomial(successes, observed) + ln_binomial(population - successes, draws - observed)
        - ln_binomial(population, draws)
}

/// Natural log of `P[X = observed]`; `-inf` outside the support.
pub fn hypergeom_ln_pmf(population: u64, successes: u64, draws: u64, observed: u64) -> Result<f64> {
    check(population, successes, draws)?;
    let (lo, hi) = hypergeom_support(population, successes, draws);
    if observed < lo || observed > hi {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ln_pmf_unchecked(population, successes, draws, observed))
}

/// `P[X = observed]` for `X ~ HyperGeometric(population, successes, draws)`.
pub fn hypergeom_pmf(population: u64, successes: u64, draws: u64, observed: u64) -> Result<f64> {
    Ok(hypergeom_ln_pmf(population, successes, draws, observed)?.exp())
}

/// `pmf(x + 1) / pmf(x)`.
#[inline]
fn step_up(population: u64, successes: u64, draws: u64, x: u64) -> f64 {
    let num = (successes - x) as f64 * (draws - x) as f64;
    let den = (x + 1) as f64 * (population + x + 1 - successes - draws) as f64;
    num / den
}

/// `P[X >= threshold]` summed exactly over the support.
///
/// The shorter side of the distribution is walked from `threshold` using the
/// pmf ratio recurrence, starting from a single log-space pmf evaluation.
pub fn hypergeom_sf_exact(
    population: u64,
    successes: u64,
    draws: u64,
    threshold: u64,
) -> Result<f64> {
    check(population, successes, draws)?;
    let (lo, hi) = hypergeom_support(population, successes, draws);
    if threshold <= lo {
        return Ok(1.0);
    }
    if threshold > hi {
        return Ok(0.0);
    }
    let mean = draws as f64 * successes as f64 / population as f64;
    if threshold as f64 >= mean {
        // Upper tail from threshold to hi.
        let mut term = ln_pmf_unchecked(population, successes, draws, threshold).exp();
        let mut sum = term;
        let mut x = threshold;
        while x < hi {
            term *= step_up(population, successes, draws, x);
            x += 1;
            sum += term;
            if term < sum * TAIL_EPSILON {
                break;
            }
        }
        Ok(sum.min(1.0))
    } else {
        // Lower tail from threshold - 1 down to lo, then complement.
        let mut x = threshold - 1;
        let mut term = ln_pmf_unchecked(population, successes, draws, x).exp();
        let mut sum = term;
        while x > lo {
            term /= step_up(population, successes, draws, x - 1);
            x -= 1;
            sum += term;
            if term < sum * TAIL_EPSILON {
                break;
            }
        }
        Ok((1.0 - sum).clamp(0.0, 1.0))
    }
}

/// `P[Y >= threshold]` for `Y ~ Binomial(trials, p)`.
pub fn binomial_sf(trials: u64, p: f64, threshold: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "binomial probability must lie in [0, 1], got {p}"
        )));
    }
    if threshold == 0 {
        return Ok(1.0);
    }
    if threshold > trials {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    // P[Y >= t] = I_p(t, n - t + 1)
    Ok(beta_reg(
        threshold as f64,
        (trials - threshold + 1) as f64,
        p,
    ))
}

/// `P[X >= threshold]` for `X ~ HyperGeometric(population, successes, draws)`.
///
/// Uses the exact sum up to [`BINOMIAL_SWITCH_POPULATION`] and the binomial
/// approximation beyond it.
pub fn hypergeom_sf(population: u64, successes: u64, draws: u64, threshold: u64) -> Result<f64> {
    check(population, successes, draws)?;
    if population > BINOMIAL_SWITCH_POPULATION {
        let (lo, hi) = hypergeom_support(population, successes, draws);
        if threshold <= lo {
            return Ok(1.0);
        }
        if threshold > hi {
            return Ok(0.0);
        }
        binomial_sf(draws, successes as f64 / population as f64, threshold)
    } else {
        hypergeom_sf_exact(population, successes, draws, threshold)
    }
}

/// Log of the multivariate hypergeometric pmf: drawing `draws[i]` from each
/// class of size `cells[i]`.
pub fn multivariate_hypergeom_ln_pmf(cells: &[u64], draws: &[u64]) -> Result<f64> {
    if cells.len() != draws.len() {
        return Err(Error::InvalidParameter(
            "cells and draws must have equal length".into(),
        ));
    }
    let population: u64 = cells.iter().sum();
    let total: u64 = draws.iter().sum();
    if total > population {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {total} from a population of {population}"
        )));
    }
    let mut ln = -ln_binomial(population, total);
    for (&cell, &draw) in cells.iter().zip(draws) {
        if draw > cell {
            return Ok(f64::NEG_INFINITY);
        }
        ln += ln_binomial(cell, draw);
    }
    Ok(ln)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Exact integer binomial coefficient for small arguments.
    fn choose(n: u64, k: u64) -> u128 {
        if k > n {
            return 0;
        }
        let k = k.min(n - k);
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc
    }

    fn pmf_by_counting(population: u64, successes: u64, draws: u64, observed: u64) -> f64 {
        if observed > draws {
            return 0.0;
        }
        let num = choose(successes, observed) * choose(population - successes, draws - observed);
        num as f64 / choose(population, draws) as f64
    }

    #[test]
    fn observed_beyond_support_is_zero() {
        assert_eq!(hypergeom_pmf(10, 5, 5, 6).unwrap(), 0.0);
    }

    #[test]
    fn small_pmf_matches_enumeration() {
        // Of the C(4,2) = 6 draws, 4 contain exactly one success.
        assert_relative_eq!(
            hypergeom_pmf(4, 2, 2, 1).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            hypergeom_sf(4, 2, 2, 1).unwrap(),
            5.0 / 6.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn pmf_normalizes() {
        let total: f64 = (0..=9).map(|x| hypergeom_pmf(20, 7, 9, x).unwrap()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_threshold_is_certain() {
        assert_eq!(hypergeom_sf(20, 7, 9, 0).unwrap(), 1.0);
        assert_eq!(hypergeom_sf(194_331_526, 2_693_686, 100, 0).unwrap(), 1.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(hypergeom_pmf(5, 6, 1, 0).is_err());
        assert!(hypergeom_sf(5, 2, 6, 0).is_err());
        assert!(binomial_sf(10, 1.5, 2).is_err());
    }

    #[test]
    fn large_population_median_crossing() {
        // Draw counts on either side of the 50% crossing for 538 pool members.
        let above = hypergeom_sf(194_331_526, 2_693_686, 38_814, 538).unwrap();
        let below = hypergeom_sf(194_331_526, 2_693_686, 38_000, 538).unwrap();
        assert!(above > 0.5, "{above}");
        assert!(below < 0.5, "{below}");
    }

    #[test]
    fn binomial_route_tracks_exact_route_near_switch() {
        // Just below the switch the exact sum is still cheap; compare both routes.
        let n = 9_000_000;
        let k = 1_000_000;
        for &(m, t) in &[(900u64, 100u64), (1000, 111), (5000, 560)] {
            let exact = hypergeom_sf_exact(n, k, m, t).unwrap();
            let approx = binomial_sf(m, k as f64 / n as f64, t).unwrap();
            assert_relative_eq!(exact, approx, max_relative = 1e-3);
        }
    }

    #[test]
    fn multivariate_pmf_sums_to_one() {
        let cells = [3u64, 4, 2, 5];
        let k = 5;
        let mut total = 0.0;
        for a in 0..=k {
            for b in 0..=(k - a) {
                for c in 0..=(k - a - b) {
                    let d = k - a - b - c;
                    total += multivariate_hypergeom_ln_pmf(&cells, &[a, b, c, d])
                        .unwrap()
                        .exp();
                }
            }
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn pmf_sums_to_one(population in 1u64..60, s in 0u64..60, d in 0u64..60) {
            let successes = s % (population + 1);
            let draws = d % (population + 1);
            let total: f64 = (0..=draws).map(|x| hypergeom_pmf(population, successes, draws, x).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn pmf_agrees_with_counting(population in 1u64..50, s in 0u64..50, d in 0u64..50, x in 0u64..50) {
            let successes = s % (population + 1);
            let draws = d % (population + 1);
            let got = hypergeom_pmf(population, successes, draws, x).unwrap();
            let want = pmf_by_counting(population, successes, draws, x);
            prop_assert!((got - want).abs() <= 1e-12 + 1e-10 * want);
        }

        #[test]
        fn sf_agrees_with_pmf_sum(population in 1u64..50, s in 0u64..50, d in 0u64..50, t in 0u64..50) {
            let successes = s % (population + 1);
            let draws = d % (population + 1);
            let got = hypergeom_sf(population, successes, draws, t).unwrap();
            let want: f64 = (t..=draws).map(|x| pmf_by_counting(population, successes, draws, x)).sum();
            prop_assert!((got - want).abs() < 1e-10);
        }

        #[test]
        fn sf_nondecreasing_in_draws(population in 2u64..400, s in 0u64..400, t in 0u64..40, d in 0u64..399) {
            let successes = s % (population + 1);
            let draws = d % population;
            let a = hypergeom_sf(population, successes, draws, t).unwrap();
            let b = hypergeom_sf(population, successes, draws + 1, t).unwrap();
            prop_assert!(b >= a - 1e-12);
        }
    }
}
