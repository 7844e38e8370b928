// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

//! Fragility of an electoral-college decision.
//!
//! Only nonvoters may change: each may be switched to a candidate, while
//! committed votes stay fixed. [`election_gfi`] finds the fewest switches
//! that hand the loser enough electors. [`sgfi_half_closed_form`] gives the
//! smallest random draw of eligible voters that more likely than not holds
//! the required number of switchable nonvoters.

use std::fmt;
use std::fs::File;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::FragilityIndex;
use crate::stats::hypergeom_sf;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTally {
    pub state: String,
    pub votes_a: u64,
    pub votes_b: u64,
    /// Eligible voters who voted for neither candidate.
    pub nonvoters: u64,
    pub electors: u32,
}

impl StateTally {
    pub fn eligible(&self) -> u64 {
        self.votes_a + self.votes_b + self.nonvoters
    }

    fn votes(&self, candidate: Candidate) -> (u64, u64) {
        match candidate {
            Candidate::A => (self.votes_a, self.votes_b),
            Candidate::B => (self.votes_b, self.votes_a),
        }
    }

    /// Switches needed for `candidate` to carry the state outright; a tie
    /// counts as a loss.
    pub fn flip_cost(&self, candidate: Candidate) -> u64 {
        let (own, other) = self.votes(candidate);
        if own > other {
            0
        } else {
            other - own + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Candidate {
    A,
    B,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Candidate::A => "a",
            Candidate::B => "b",
        })
    }
}

/// Per-state tallies and the elector count needed to win.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Race {
    pub states: Vec<StateTally>,
    pub electors_to_win: u32,
}

impl Race {
    /// Validated race; `electors_to_win` defaults to a strict majority.
    pub fn new(states: Vec<StateTally>, electors_to_win: Option<u32>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter(
                "a race needs at least one state".into(),
            ));
        }
        if let Some(s) = states.iter().find(|s| s.electors == 0) {
            return Err(Error::InvalidParameter(format!(
                "{} has no electors",
                s.state
            )));
        }
        let total: u32 = states.iter().map(|s| s.electors).sum();
        let electors_to_win = electors_to_win.unwrap_or(total / 2 + 1);
        if electors_to_win == 0 || electors_to_win > total {
            return Err(Error::InvalidParameter(format!(
                "{electors_to_win} electors to win is outside 1..={total}"
            )));
        }
        Ok(Race {
            states,
            electors_to_win,
        })
    }

    pub fn total_electors(&self) -> u32 {
        self.states.iter().map(|s| s.electors).sum()
    }

    /// Every eligible voter in the tallies.
    pub fn eligible_total(&self) -> u64 {
        self.states.iter().map(StateTally::eligible).sum()
    }

    pub fn electors_won(&self, candidate: Candidate) -> u32 {
        self.states
            .iter()
            .filter(|s| s.flip_cost(candidate) == 0)
            .map(|s| s.electors)
            .sum()
    }
}

/// Parse a tally CSV with columns `state, votes_a, votes_b, nonvoters,
/// electors`. Lines starting with `#` are skipped.
pub fn read_tally_csv<R: io::Read>(reader: R, electors_to_win: Option<u32>) -> Result<Race> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut states = Vec::new();
    for record in rdr.deserialize::<StateTally>() {
        let state = record.map_err(|e| match e.position() {
            Some(pos) => Error::Parse {
                line: pos.line(),
                message: e.to_string(),
            },
            None => Error::SchemaMismatch(e.to_string()),
        })?;
        states.push(state);
    }
    Race::new(states, electors_to_win)
}

pub fn load_tally_csv(path: impl AsRef<Path>, electors_to_win: Option<u32>) -> Result<Race> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_tally_csv(io::BufReader::new(file), electors_to_win)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFlip {
    pub state: String,
    pub switches: u64,
    pub electors: u32,
    pub nonvoters: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionGfi {
    pub beneficiary: Candidate,
    /// Total switches; 0 when the beneficiary already wins.
    pub index: FragilityIndex,
    pub flips: Vec<StateFlip>,
    pub electors_before: u32,
    pub electors_after: u32,
}

impl ElectionGfi {
    /// Nonvoters in the flipped states: the pool the switches come from.
    pub fn target_pool(&self) -> u64 {
        self.flips.iter().map(|f| f.nonvoters).sum()
    }
}

/// Fewest nonvoter switches that give `beneficiary` the election.
///
/// A minimum-cost cover over currently lost states, solved by dynamic
/// programming on electors gained. A state costs its margin plus one and is
/// out of reach when that exceeds its nonvoters.
pub fn election_gfi(race: &Race, beneficiary: Candidate) -> Result<ElectionGfi> {
    let before = race.electors_won(beneficiary);
    if before >= race.electors_to_win {
        return Ok(ElectionGfi {
            beneficiary,
            index: FragilityIndex::Finite(0),
            flips: Vec::new(),
            electors_before: before,
            electors_after: before,
        });
    }
    let need = (race.electors_to_win - before) as usize;
    let lost: Vec<&StateTally> = race
        .states
        .iter()
        .filter(|s| {
            let cost = s.flip_cost(beneficiary);
            cost > 0 && cost <= s.nonvoters
        })
        .collect();

    // best[i][e]: cheapest way to gain at least e electors from the first i states.
    const INF: u64 = u64::MAX;
    let mut best = vec![vec![INF; need + 1]; lost.len() + 1];
    best[0][0] = 0;
    for (i, state) in lost.iter().enumerate() {
        let cost = state.flip_cost(beneficiary);
        let gain = state.electors as usize;
        for e in 0..=need {
            let prior = best[i][e.saturating_sub(gain)];
            let take = if prior == INF { INF } else { prior + cost };
            best[i + 1][e] = best[i][e].min(take);
        }
    }
    if best[lost.len()][need] == INF {
        return Ok(ElectionGfi {
            beneficiary,
            index: FragilityIndex::Unbounded,
            flips: Vec::new(),
            electors_before: before,
            electors_after: before,
        });
    }

    let mut flips = Vec::new();
    let mut e = need;
    for i in (0..lost.len()).rev() {
        if e == 0 {
            break;
        }
        if best[i + 1][e] == best[i][e] {
            continue;
        }
        let state = lost[i];
        flips.push(StateFlip {
            state: state.state.clone(),
            switches: state.flip_cost(beneficiary),
            electors: state.electors,
            nonvoters: state.nonvoters,
        });
        e = e.saturating_sub(state.electors as usize);
    }
    flips.reverse();
    let total: u64 = flips.iter().map(|f| f.switches).sum();
    debug_assert_eq!(total, best[lost.len()][need]);
    let gained: u32 = flips.iter().map(|f| f.electors).sum();
    Ok(ElectionGfi {
        beneficiary,
        index: FragilityIndex::Finite(total as i64),
        flips,
        electors_before: before,
        electors_after: before + gained,
    })
}

/// Smallest random draw of eligible voters likely to contain the switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSgfi {
    pub eligible_total: u64,
    pub target_pool: u64,
    pub switch_requirement: u64,
    /// Smallest `m` with `P[X >= g] > 1/2`, `X ~ HyperGeometric(N, K, m)`.
    pub exact: u64,
    /// `P[X >= g]` at `exact` and at `exact - 1`.
    pub sf_at: f64,
    pub sf_below: f64,
    /// Binomial-mean approximation `g / (K / N)`.
    pub approximation: f64,
    pub approximation_ceil: u64,
}

/// Smallest `m` with `P[HyperGeometric(N, K, m) >= g] > 1/2`.
///
/// Starts at the binomial-mean guess `ceil(g N / K)`, gallops to bracket the
/// crossing and bisects. The tail is monotone in `m`, so the bracket is exact.
pub fn sgfi_half_closed_form(
    eligible_total: u64,
    target_pool: u64,
    switch_requirement: u64,
) -> Result<ClosedFormSgfi> {
    let (n, k, g) = (eligible_total, target_pool, switch_requirement);
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 0 < K <= N, got K={k}, N={n}"
        )));
    }
    if g == 0 || g > k {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= g <= K, got g={g}, K={k}"
        )));
    }
    let sf = |m: u64| hypergeom_sf(n, k, m, g);
    let approximation = g as f64 * n as f64 / k as f64;
    let start = ((g as u128 * n as u128).div_ceil(k as u128) as u64).clamp(g, n);

    // Invariant once bracketed: sf(lo) <= 1/2 < sf(hi).
    let (mut lo, mut hi);
    if sf(start)? > 0.5 {
        hi = start;
        let mut step = 1;
        loop {
            let probe = hi.saturating_sub(step).max(g - 1);
            if probe < g || sf(probe)? <= 0.5 {
                lo = probe;
                break;
            }
            hi = probe;
            step *= 2;
        }
    } else {
        lo = start;
        let mut step = 1;
        loop {
            let probe = (lo + step).min(n);
            if sf(probe)? > 0.5 {
                hi = probe;
                break;
            }
            lo = probe;
            step *= 2;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if sf(mid)? > 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ClosedFormSgfi {
        eligible_total: n,
        target_pool: k,
        switch_requirement: g,
        exact: hi,
        sf_at: sf(hi)?,
        sf_below: sf(hi - 1)?,
        approximation,
        approximation_ceil: approximation.ceil() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(name: &str, a: u64, b: u64, nonvoters: u64, electors: u32) -> StateTally {
        StateTally {
            state: name.into(),
            votes_a: a,
            votes_b: b,
            nonvoters,
            electors,
        }
    }

    /// Cheapest winning flip set by trying every subset of states.
    fn exhaustive(race: &Race, who: Candidate) -> Option<u64> {
        let before = race.electors_won(who);
        if before >= race.electors_to_win {
            return Some(0);
        }
        let n = race.states.len();
        let mut best = None;
        for mask in 0u32..(1 << n) {
            let mut cost = 0;
            let mut electors = before;
            let mut ok = true;
            for (i, s) in race.states.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    continue;
                }
                let c = s.flip_cost(who);
                if c == 0 || c > s.nonvoters {
                    ok = false;
                    break;
                }
                cost += c;
                electors += s.electors;
            }
            if ok && electors >= race.electors_to_win {
                best = Some(best.map_or(cost, |b: u64| b.min(cost)));
            }
        }
        best
    }

    fn choose(n: u64, k: u64) -> u128 {
        if k > n {
            return 0;
        }
        let k = k.min(n - k);
        (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    }

    #[test]
    fn two_state_toy() {
        // Margins of 10 and 100; either state suffices.
        let race = Race::new(
            vec![
                state("X", 0, 10, 50, 3),
                state("Y", 0, 100, 500, 3),
                state("Z", 20, 0, 5, 5),
            ],
            Some(8),
        )
        .unwrap();
        let r = election_gfi(&race, Candidate::A).unwrap();
        assert_eq!(r.index, FragilityIndex::Finite(11));
        assert_eq!(r.flips.len(), 1);
        assert_eq!(r.flips[0].state, "X");
        assert_eq!(exhaustive(&race, Candidate::A), Some(11));
    }

    #[test]
    fn already_winning_is_zero() {
        let race = Race::new(vec![state("X", 10, 1, 0, 3)], None).unwrap();
        assert_eq!(
            election_gfi(&race, Candidate::A).unwrap().index,
            FragilityIndex::Finite(0)
        );
    }

    #[test]
    fn capacity_shortfall_is_unbounded() {
        let race = Race::new(vec![state("X", 0, 100, 50, 3)], None).unwrap();
        assert_eq!(
            election_gfi(&race, Candidate::A).unwrap().index,
            FragilityIndex::Unbounded
        );
    }

    #[test]
    fn ties_count_as_losses() {
        let race = Race::new(vec![state("X", 5, 5, 1, 3)], None).unwrap();
        let r = election_gfi(&race, Candidate::B).unwrap();
        assert_eq!(r.index, FragilityIndex::Finite(1));
    }

    #[test]
    fn tally_csv_round_trip() {
        let text = "# comment\nstate,votes_a,votes_b,nonvoters,electors\nX,1,2,3,4\nY,5,1,0,2\n";
        let race = read_tally_csv(text.as_bytes(), None).unwrap();
        assert_eq!(race.states.len(), 2);
        assert_eq!(race.electors_to_win, 4);
        assert_eq!(race.eligible_total(), 12);
        let bad = "state,votes_a,votes_b,nonvoters,electors\nX,1,two,3,4\n";
        assert!(matches!(
            read_tally_csv(bad.as_bytes(), None),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn whole_population_pool() {
        let r = sgfi_half_closed_form(100, 100, 7).unwrap();
        assert_eq!(r.exact, 7);
    }

    #[test]
    fn small_population_matches_enumeration() {
        let (n, k, g) = (40u64, 10u64, 3u64);
        let brute = (0..=n)
            .find(|&m| {
                let hits: u128 = (g..=m.min(k))
                    .map(|x| choose(k, x) * choose(n - k, m - x))
                    .sum();
                2 * hits > choose(n, m)
            })
            .unwrap();
        let r = sgfi_half_closed_form(n, k, g).unwrap();
        assert_eq!(r.exact, brute);
        assert_eq!(brute, 11);
        assert!(r.sf_at > 0.5 && r.sf_below <= 0.5);
    }

    #[test]
    fn invalid_closed_form_parameters() {
        assert!(sgfi_half_closed_form(10, 0, 1).is_err());
        assert!(sgfi_half_closed_form(10, 11, 1).is_err());
        assert!(sgfi_half_closed_form(10, 5, 0).is_err());
        assert!(sgfi_half_closed_form(10, 5, 6).is_err());
    }

    #[test]
    fn initializer_close_for_large_population() {
        let r = sgfi_half_closed_form(194_331_526, 2_693_686, 538).unwrap();
        let rel = (r.approximation - r.exact as f64).abs() / r.exact as f64;
        assert!(rel < 0.005, "{rel}");
        assert_eq!(r.approximation_ceil, 38814);
    }

    fn arb_race() -> impl Strategy<Value = Race> {
        proptest::collection::vec((0u64..60, 0u64..60, 0u64..40, 1u32..9), 1..=12)
            .prop_flat_map(|rows| {
                let total: u32 = rows.iter().map(|r| r.3).sum();
                (Just(rows), 1..=total)
            })
            .prop_map(|(rows, to_win)| {
                let states = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (a, b, n, e))| state(&format!("S{i}"), a, b, n, e))
                    .collect();
                Race::new(states, Some(to_win)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn dynamic_program_matches_exhaustive(race in arb_race(), b in any::<bool>()) {
            let who = if b { Candidate::B } else { Candidate::A };
            let r = election_gfi(&race, who).unwrap();
            prop_assert_eq!(r.index.magnitude(), exhaustive(&race, who));
            if let Some(total) = r.index.magnitude() {
                prop_assert_eq!(total, r.flips.iter().map(|f| f.switches).sum::<u64>());
                prop_assert!(r.electors_after >= race.electors_to_win);
            }
        }

        #[test]
        fn closed_form_inequality_pair(n in 2u64..400, k in 1u64..400, g in 1u64..40) {
            let k = k.min(n);
            let g = g.min(k);
            let r = sgfi_half_closed_form(n, k, g).unwrap();
            prop_assert!(hypergeom_sf(n, k, r.exact, g).unwrap() > 0.5);
            prop_assert!(hypergeom_sf(n, k, r.exact - 1, g).unwrap() <= 0.5);
        }

        #[test]
        fn closed_form_monotone(n in 2u64..300, k in 1u64..300, g in 1u64..30) {
            let k = k.min(n);
            let g = g.min(k);
            let base = sgfi_half_closed_form(n, k, g).unwrap().exact;
            if g < k {
                prop_assert!(sgfi_half_closed_form(n, k, g + 1).unwrap().exact >= base);
            }
            if k < n {
                prop_assert!(sgfi_half_closed_form(n, k + 1, g).unwrap().exact <= base);
            }
        }
    }
}
