// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Stochastic fragility.
//!
//! `P[E_k]` is the probability that a uniformly random `k`-subset of cases
//! can reverse significance with permitted modifications. The stochastic
//! index at threshold `r` is the smallest `k` with `P[E_k] > r`.
//! [`probability_reversal`] estimates `P[E_k]` by Monte Carlo, [`sgfi`] finds
//! the threshold crossing with Polyak–Ruppert averaged stochastic
//! approximation, and [`exact_reversal_probability`] sums it exactly for
//! 2×2 data.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::data::{CaseFrame, Modifier};
use crate::error::{Error, Result, TrajectoryPoint};
use crate::solver::{cell_permissions, FragilityIndex, PreparedGreedy};
use crate::stats::{Table2x2, TestSpec};

/// Compositions (or subsets) the exact searches may visit before giving up.
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 20_000_000;

/// Stream tag separating verification seeds from iteration seeds.
const VERIFY_STREAM: u64 = 0x7665_7269_6679;

/// Counter-based seed derivation (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Threshold `r` on the reversal probability. `OneMinus` asks for every
/// `k`-subset to reverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StochasticThreshold {
    Value(f64),
    OneMinus,
}

impl StochasticThreshold {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "stochastic threshold must lie in [0, 1) or be `1-`, got {r}"
            )));
        }
        Ok(StochasticThreshold::Value(r))
    }
}

impl From<f64> for StochasticThreshold {
    fn from(r: f64) -> Self {
        StochasticThreshold::Value(r)
    }
}

impl fmt::Display for StochasticThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StochasticThreshold::Value(r) => write!(f, "{r}"),
            StochasticThreshold::OneMinus => f.write_str("1-"),
        }
    }
}

impl FromStr for StochasticThreshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1-" || s == "1⁻" {
            return Ok(StochasticThreshold::OneMinus);
        }
        let r: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a threshold")))?;
        StochasticThreshold::new(r)
    }
}

impl Serialize for StochasticThreshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            StochasticThreshold::Value(r) => s.serialize_f64(r),
            StochasticThreshold::OneMinus => s.serialize_str("1-"),
        }
    }
}

impl<'de> Deserialize<'de> for StochasticThreshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(r) => StochasticThreshold::new(r).map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Monte Carlo estimate of `P[E_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversalEstimate {
    pub k: usize,
    pub p_hat: f64,
    pub trials: usize,
    pub reversals: usize,
    pub seed: u64,
}

impl ReversalEstimate {
    /// Binomial standard error at the estimated proportion.
    pub fn standard_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgfiConfig {
    pub r: StochasticThreshold,
    /// Sufficiently likely threshold applied to the modifier's model.
    pub q: f64,
    /// Monte Carlo trials per root-finder evaluation.
    pub trials: usize,
    /// Root-finder iterations.
    pub iterations: usize,
    /// Step scale `a0`; a quarter of the case count when absent.
    pub step_scale: Option<f64>,
    /// Step decay exponent: `a_t = a0 / t^decay`.
    pub step_decay: f64,
    /// Leading fraction of iterates left out of the average.
    pub burn_in: f64,
    /// Verification estimates use `confirm_factor × trials` trials.
    pub confirm_factor: usize,
    /// Maximum ±1 verification steps; the case count when absent.
    pub walk_budget: Option<usize>,
    /// Guard for the worst-case search.
    pub enumeration_limit: u64,
    pub seed: u64,
}

impl Default for SgfiConfig {
    fn default() -> Self {
        SgfiConfig {
            r: StochasticThreshold::Value(0.5),
            q: 0.0,
            trials: 200,
            iterations: 60,
            step_scale: None,
            step_decay: 0.75,
            burn_in: 0.2,
            confirm_factor: 4,
            walk_budget: None,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
            seed: 0,
        }
    }
}

impl SgfiConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if let StochasticThreshold::Value(r) = self.r {
            StochasticThreshold::new(r)?;
        }
        if !(0.0..=1.0).contains(&self.q) {
            return bad(format!("q must lie in [0, 1], got {}", self.q));
        }
        if self.trials == 0 || self.iterations == 0 || self.confirm_factor == 0 {
            return bad("trials, iterations and confirm_factor must be at least 1".into());
        }
        if !(self.step_decay > 0.5 && self.step_decay <= 1.0) {
            return bad(format!(
                "step decay must lie in (0.5, 1], got {}",
                self.step_decay
            ));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in
            ));
        }
        if let Some(a0) = self.step_scale {
            if !(a0 > 0.0 && a0.is_finite()) {
                return bad(format!("step scale must be positive, got {a0}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgfiMethod {
    /// Threshold small enough that the deterministic index answers directly.
    GfiReduction,
    StochasticApproximation,
    /// Every subset of the returned size reverses.
    WorstCase,
}

/// Verification estimates at the returned size and one below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalCheck {
    pub at: ReversalEstimate,
    pub below: ReversalEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgfiResult {
    pub index: FragilityIndex,
    pub method: SgfiMethod,
    /// `(round(k_t), p_hat_t)` for each root-finder iteration.
    pub trajectory: Vec<TrajectoryPoint>,
    /// Mean of the post-burn-in iterates.
    pub k_average: Option<f64>,
    pub final_check: Option<FinalCheck>,
}

fn estimate(
    prepared: &PreparedGreedy<'_>,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<ReversalEstimate> {
    let frame = prepared.frame();
    let n = frame.len();
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "subset size {k} exceeds {n} cases"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    let reversals = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, trial));
            let mut rows = rand::seq::index::sample(&mut rng, n, k).into_vec();
            rows.sort_unstable_by_key(|&r| frame.id(r));
            Ok(prepared.run(&rows)?.reversed as usize)
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    Ok(ReversalEstimate {
        k,
        p_hat: reversals as f64 / trials as f64,
        trials,
        reversals,
        seed,
    })
}

/// Monte Carlo estimate of `P[E_k]` from `trials` uniform `k`-subsets.
///
/// Trial `t` draws its subset from a generator seeded by `mix_seed(seed, t)`,
/// so the result does not depend on how trials are scheduled.
pub fn probability_reversal(
    k: usize,
    frame: &CaseFrame,
    modifier: &Modifier,
    test: &TestSpec,
    trials: usize,
    seed: u64,
) -> Result<ReversalEstimate> {
    let prepared = PreparedGreedy::new(frame, modifier, test)?;
    estimate(&prepared, k, trials, seed)
}

/// Reversal flags over shifts `(i, j)` of a 2×2 table with 2D prefix sums,
/// so a rectangle of reachable shifts is checked in constant time.
struct ReversalGrid {
    i_lo: i64,
    j_lo: i64,
    rows: usize,
    cols: usize,
    flags: Vec<bool>,
    prefix: Vec<u32>,
}

impl ReversalGrid {
    fn new(table: &Table2x2, test: &TestSpec, sig0: bool, radius: u64) -> Result<Self> {
        let i_lo = -(table.a.min(radius) as i64);
        let i_hi = table.b.min(radius) as i64;
        let j_lo = -(table.c.min(radius) as i64);
        let j_hi = table.d.min(radius) as i64;
        let rows = (i_hi - i_lo + 1) as usize;
        let cols = (j_hi - j_lo + 1) as usize;
        let flags: Vec<bool> = (0..rows * cols)
            .into_par_iter()
            .map(|idx| {
                let i = i_lo + (idx / cols) as i64;
                let j = j_lo + (idx % cols) as i64;
                let shifted = table.shifted(i, j).expect("inside cell bounds");
                Ok(test.rejects(test.table_p_value(&shifted)?) != sig0)
            })
            .collect::<Result<_>>()?;
        let mut prefix = vec![0u32; (rows + 1) * (cols + 1)];
        for r in 0..rows {
            for c in 0..cols {
                prefix[(r + 1) * (cols + 1) + c + 1] = flags[r * cols + c] as u32
                    + prefix[r * (cols + 1) + c + 1]
                    + prefix[(r + 1) * (cols + 1) + c]
                    - prefix[r * (cols + 1) + c];
            }
        }
        Ok(ReversalGrid {
            i_lo,
            j_lo,
            rows,
            cols,
            flags,
            prefix,
        })
    }

    fn flag(&self, i: i64, j: i64) -> bool {
        self.flags[(i - self.i_lo) as usize * self.cols + (j - self.j_lo) as usize]
    }

    /// Any reversing shift in `[i0, i1] × [j0, j1]`.
    fn any(&self, i0: i64, i1: i64, j0: i64, j1: i64) -> bool {
        let r0 = (i0 - self.i_lo) as usize;
        let r1 = (i1 - self.i_lo) as usize + 1;
        let c0 = (j0 - self.j_lo) as usize;
        let c1 = (j1 - self.j_lo) as usize + 1;
        debug_assert!(r1 <= self.rows && c1 <= self.cols);
        let w = self.cols + 1;
        self.prefix[r1 * w + c1] + self.prefix[r0 * w + c0]
            > self.prefix[r0 * w + c1] + self.prefix[r1 * w + c0]
    }
}

/// Exact reversal probabilities for 2×2 data.
///
/// A subset with `k_i` cases from cell `i` can reach exactly the shifts in
/// `[-k_a, k_b] × [-k_c, k_d]` (zeroed for cells the modifier freezes).
/// It is reversible when that rectangle holds a reversing table.
struct ExactOracle<'a> {
    table: Table2x2,
    test: &'a TestSpec,
    perm: [bool; 4],
    sig0: bool,
    limit: u64,
    grid: Option<(u64, ReversalGrid)>,
}

impl<'a> ExactOracle<'a> {
    fn new(table: &Table2x2, modifier: &Modifier, test: &'a TestSpec, limit: u64) -> Result<Self> {
        let perm = cell_permissions(table, modifier)?;
        let sig0 = test.rejects(test.table_p_value(table)?);
        Ok(ExactOracle {
            table: *table,
            test,
            perm,
            sig0,
            limit,
            grid: None,
        })
    }

    fn grid(&mut self, radius: u64) -> Result<&ReversalGrid> {
        let have = self.grid.as_ref().map_or(0, |(r, _)| *r);
        if self.grid.is_none() || have < radius {
            let radius = radius.max(have * 2).max(32);
            self.grid = Some((
                radius,
                ReversalGrid::new(&self.table, self.test, self.sig0, radius)?,
            ));
        }
        Ok(&self.grid.as_ref().expect("just built").1)
    }

    fn reaches(&self, grid: &ReversalGrid, comp: [u64; 4]) -> bool {
        let span = |cell: usize| {
            if self.perm[cell] {
                comp[cell] as i64
            } else {
                0
            }
        };
        grid.any(-span(0), span(1), -span(2), span(3))
    }

    fn probability(&mut self, k: u64) -> Result<f64> {
        let cells = self.table.cells();
        let n = self.table.total();
        if k > n {
            return Err(Error::InvalidParameter(format!(
                "subset size {k} exceeds {n} cases"
            )));
        }
        // Compositions of k into four parts: C(k + 3, 3).
        let count = (k as u128 + 3) * (k as u128 + 2) * (k as u128 + 1) / 6;
        if count > self.limit as u128 {
            return Err(Error::CompositionBlowUp { limit: self.limit });
        }
        let ln_choose: Vec<Vec<f64>> = cells
            .iter()
            .map(|&c| (0..=c.min(k)).map(|x| ln_binomial(c, x)).collect())
            .collect();
        let ln_total = ln_binomial(n, k);
        let grid = {
            self.grid(k)?;
            &self.grid.as_ref().expect("built").1
        };
        let mut p = 0.0;
        for k1 in 0..=k.min(cells[0]) {
            for k2 in 0..=(k - k1).min(cells[1]) {
                for k3 in 0..=(k - k1 - k2).min(cells[2]) {
                    let k4 = k - k1 - k2 - k3;
                    if k4 > cells[3] {
                        continue;
                    }
                    let comp = [k1, k2, k3, k4];
                    if self.reaches(grid, comp) {
                        let ln = ln_choose[0][k1 as usize]
                            + ln_choose[1][k2 as usize]
                            + ln_choose[2][k3 as usize]
                            + ln_choose[3][k4 as usize]
                            - ln_total;
                        p += ln.exp();
                    }
                }
            }
        }
        Ok(p.min(1.0))
    }

    /// Size of the largest non-reversible subset, or `None` when even the
    /// full frame cannot reverse.
    ///
    /// Non-reversible compositions are those whose rectangle avoids every
    /// reversing shift. For each column range `[i0, i1]` around zero the
    /// widest clear row range follows from the nearest reversing shift
    /// above and below zero in each column.
    fn largest_nonreversible(&mut self) -> Result<Option<u64>> {
        let cells = self.table.cells();
        let n = self.table.total();
        let radius = cells.iter().copied().max().unwrap_or(0);
        let perm = self.perm;
        let grid = {
            self.grid(radius)?;
            &self.grid.as_ref().expect("built").1
        };
        let (a, b, c, d) = (
            cells[0] as i64,
            cells[1] as i64,
            cells[2] as i64,
            cells[3] as i64,
        );
        let span = |cell: usize, extent: i64| if perm[cell] { extent } else { 0 };
        if !grid.any(-span(0, a), span(1, b), -span(2, c), span(3, d)) {
            return Ok(None);
        }
        // Per column: nearest reversing j above 0, below 0, and at 0.
        let column = |i: i64| -> (i64, i64, bool) {
            let up = (1..=d).find(|&j| grid.flag(i, j)).unwrap_or(d + 1);
            let down = (1..=c)
                .find(|&j| grid.flag(i, -j))
                .map(|j| -j)
                .unwrap_or(-(c + 1));
            (up, down, i != 0 && grid.flag(i, 0))
        };
        let cols: HashMap<i64, (i64, i64, bool)> = (-a..=b).map(|i| (i, column(i))).collect();
        let lo_range = if perm[0] { -a } else { 0 };
        let hi_range = if perm[1] { b } else { 0 };
        let mut best: i64 = -1;
        let mut i0 = 0;
        while i0 >= lo_range {
            let (u0, d0, z0) = cols[&i0];
            if z0 {
                break;
            }
            let (mut up, mut down) = (u0, d0);
            let mut i1 = 0;
            while i1 <= hi_range {
                let (u1, d1, z1) = cols[&i1];
                if z1 {
                    break;
                }
                up = up.min(u1);
                down = down.max(d1);
                let k1 = if perm[0] { -i0 } else { a };
                let k2 = if perm[1] { i1 } else { b };
                let k3 = if perm[2] { (-down - 1).min(c) } else { c };
                let k4 = if perm[3] { (up - 1).min(d) } else { d };
                best = best.max(k1 + k2 + k3 + k4);
                i1 += 1;
            }
            i0 -= 1;
        }
        debug_assert!(best >= 0 && (best as u64) < n);
        Ok(Some(best as u64))
    }
}

/// Exact `P[E_k]` for 2×2 data, summing the multivariate hypergeometric
/// probability of every reversible cell composition of size `k`.
pub fn exact_reversal_probability(
    table: &Table2x2,
    modifier: &Modifier,
    test: &TestSpec,
    k: u64,
) -> Result<f64> {
    ExactOracle::new(table, modifier, test, DEFAULT_ENUMERATION_LIMIT)?.probability(k)
}

/// Exact stochastic fragility index of a 2×2 table.
///
/// Returns the signed smallest `k` with `P[E_k] > r`, or for `1-` the signed
/// smallest `k` at which every `k`-subset reverses.
pub fn exact_sfi_2x2(
    table: &Table2x2,
    modifier: &Modifier,
    test: &TestSpec,
    r: impl Into<StochasticThreshold>,
) -> Result<FragilityIndex> {
    exact_sfi_2x2_with_limit(table, modifier, test, r.into(), DEFAULT_ENUMERATION_LIMIT)
}

pub fn exact_sfi_2x2_with_limit(
    table: &Table2x2,
    modifier: &Modifier,
    test: &TestSpec,
    r: StochasticThreshold,
    limit: u64,
) -> Result<FragilityIndex> {
    let mut oracle = ExactOracle::new(table, modifier, test, limit)?;
    let sig0 = oracle.sig0;
    let sign = |k: u64| FragilityIndex::Finite(if sig0 { k as i64 } else { -(k as i64) });
    let Some(largest) = oracle.largest_nonreversible()? else {
        return Ok(FragilityIndex::Unbounded);
    };
    let r = match r {
        StochasticThreshold::OneMinus => return Ok(sign(largest + 1)),
        StochasticThreshold::Value(r) => r,
    };
    for k in 1..=table.total() {
        if oracle.probability(k)? > r {
            return Ok(sign(k));
        }
    }
    Ok(FragilityIndex::Unbounded)
}

/// Stochastic generalized fragility index.
///
/// The deterministic greedy index answers when `r` is below the chance of
/// drawing its own plan. `1-` runs the worst-case search. Otherwise the
/// root of `P[E_k] - r` is found by stochastic approximation, then a ±1
/// walk with larger confirmation runs enforces `p_hat(k) > r` and
/// `p_hat(k - 1) <= r`.
pub fn sgfi(
    frame: &CaseFrame,
    modifier: &Modifier,
    test: &TestSpec,
    config: &SgfiConfig,
) -> Result<SgfiResult> {
    config.validate()?;
    let modifier = modifier.with_q(config.q)?;
    let prepared = PreparedGreedy::new(frame, &modifier, test)?;
    let n = frame.len();
    let sig0 = prepared.initial_significant;
    let signed = |k: usize| FragilityIndex::Finite(if sig0 { k as i64 } else { -(k as i64) });

    let mut all_rows: Vec<usize> = (0..n).collect();
    all_rows.sort_unstable_by_key(|&r| frame.id(r));
    let full = prepared.run(&all_rows)?;
    if !full.reversed {
        return Ok(SgfiResult {
            index: FragilityIndex::Unbounded,
            method: SgfiMethod::GfiReduction,
            trajectory: Vec::new(),
            k_average: None,
            final_check: None,
        });
    }
    let gfi = full.entries.len();

    let r = match config.r {
        StochasticThreshold::OneMinus => {
            let k = worst_case(&prepared, &modifier, test, gfi, config.enumeration_limit)?;
            return Ok(SgfiResult {
                index: k.map_or(FragilityIndex::Unbounded, signed),
                method: SgfiMethod::WorstCase,
                trajectory: Vec::new(),
                k_average: None,
                final_check: None,
            });
        }
        StochasticThreshold::Value(r) => r,
    };
    if r == 0.0 || r < (-ln_binomial(n as u64, gfi as u64)).exp() {
        return Ok(SgfiResult {
            index: signed(gfi),
            method: SgfiMethod::GfiReduction,
            trajectory: Vec::new(),
            k_average: None,
            final_check: None,
        });
    }

    let a0 = config.step_scale.unwrap_or(n as f64 / 4.0);
    let burn = (config.burn_in * config.iterations as f64).floor() as usize;
    let mut k = gfi as f64;
    let mut trajectory = Vec::with_capacity(config.iterations);
    let (mut sum, mut count) = (0.0, 0usize);
    for t in 1..=config.iterations {
        let rounded = (k.round() as usize).clamp(1, n);
        let est = estimate(
            &prepared,
            rounded,
            config.trials,
            mix_seed(config.seed, t as u64),
        )?;
        trajectory.push((rounded, est.p_hat));
        if t > burn {
            sum += k;
            count += 1;
        }
        let step = a0 / (t as f64).powf(config.step_decay);
        k = (k - step * (est.p_hat - r)).clamp(1.0, n as f64);
    }
    let k_average = sum / count as f64;
    let start = (k_average.ceil() as usize).clamp(1, n);

    let confirm_trials = config.trials * config.confirm_factor;
    let verify_seed = mix_seed(config.seed, VERIFY_STREAM);
    let mut cache: HashMap<usize, ReversalEstimate> = HashMap::new();
    let mut check = |k: usize| -> Result<ReversalEstimate> {
        if let Some(e) = cache.get(&k) {
            return Ok(*e);
        }
        let e = estimate(
            &prepared,
            k,
            confirm_trials,
            mix_seed(verify_seed, k as u64),
        )?;
        cache.insert(k, e);
        Ok(e)
    };
    let budget = config.walk_budget.unwrap_or(n);
    let mut k = start;
    for _ in 0..=budget {
        let at = check(k)?;
        if at.p_hat <= r {
            if k == n {
                break;
            }
            k += 1;
            continue;
        }
        let below = check(k - 1)?;
        if below.p_hat > r {
            k -= 1;
            continue;
        }
        return Ok(SgfiResult {
            index: signed(k),
            method: SgfiMethod::StochasticApproximation,
            trajectory,
            k_average: Some(k_average),
            final_check: Some(FinalCheck { at, below }),
        });
    }
    Err(Error::Diagnostic {
        message: format!(
            "verification walk from k = {start} did not bracket r = {r} within {budget} steps"
        ),
        trajectory,
    })
}

/// Smallest `k` at which every `k`-subset reverses, or `None` if no size
/// works.
///
/// 2×2 data use the exact composition oracle. Other data enumerate subsets
/// in lexicographic order, stopping at the first non-reversible one.
fn worst_case(
    prepared: &PreparedGreedy<'_>,
    modifier: &Modifier,
    test: &TestSpec,
    gfi: usize,
    limit: u64,
) -> Result<Option<usize>> {
    let frame = prepared.frame();
    if frame.is_two_by_two() {
        let table = frame.table()?;
        if let Ok(mut oracle) = ExactOracle::new(
            &table,
            &exact_modifier(frame, &table, modifier)?,
            test,
            limit,
        ) {
            return Ok(oracle.largest_nonreversible()?.map(|m| m as usize + 1));
        }
    }
    let n = frame.len();
    let mut visited: u64 = 0;
    'sizes: for k in gfi.max(1)..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            visited += 1;
            if visited > limit {
                return Err(Error::CompositionBlowUp { limit });
            }
            let mut rows = combo.clone();
            rows.sort_unstable_by_key(|&r| frame.id(r));
            if !prepared.run(&rows)?.reversed {
                continue 'sizes;
            }
            if !next_combination(&mut combo, n) {
                return Ok(Some(k));
            }
        }
    }
    Ok(None)
}

/// The modifier re-expressed on `frame_from_table(table)`, whose rows are in
/// cell order. Needed because `frame` may list its cases in any order.
fn exact_modifier(frame: &CaseFrame, table: &Table2x2, modifier: &Modifier) -> Result<Modifier> {
    let mut by_cell: [Vec<usize>; 4] = Default::default();
    for row in 0..frame.len() {
        by_cell[(frame.arm(row) * 2 + frame.outcome(row)) as usize].push(row);
    }
    let order: Vec<usize> = by_cell.concat();
    let canonical = crate::data::frame_from_table(table)?;
    Modifier::from_fn(&canonical, modifier.q(), |row, level| {
        modifier.probability(order[row], level)
    })
}

/// Advance to the next `k`-combination of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
