//! Sparsity-specific penalized scores and the interval-level changepoint test.
//!
//! For a triple `(s, v, e)` and grid level `t` the score is
//! `sum_i (C_i^2 - nu(a(t))) * 1{|C_i| >= a(t)} - penalty(t)`, where `C_i` is
//! the CUSUM of series `i`. The overall score is the maximum over the grid.
//!
//! Thresholds `a(t)` decrease along the grid, so the coordinates that pass
//! level `j` are exactly those whose first passing level is `<= j`. One pass
//! over the coordinates bins each `C_i^2` by its first passing level, and a
//! running sum over bins yields every level at once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{check_triple, cusum_weights, DataMatrix, PenaltyTable};

/// Upper bound on grid size: powers of two in `usize` plus `p`.
pub(crate) const MAX_LEVELS: usize = usize::BITS as usize + 2;

/// Which split points an interval test evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    /// Every `v` with `s < v < e`.
    #[default]
    Full,
    /// Only `v = floor((s + e) / 2)`.
    Midpoint,
}

/// Penalized score at one split point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreValue {
    pub value: f64,
    /// Grid level attaining the maximum (smallest on ties).
    pub best_t: usize,
    /// Score at each grid level, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_t: Option<Vec<(usize, f64)>>,
}

/// Outcome of testing one interval for a changepoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalTest {
    pub detected: bool,
    /// Smallest split attaining the maximum score.
    pub argmax_v: usize,
    pub score: f64,
    pub best_t: usize,
}

/// Thresholds, centering terms and penalties of one table in flat arrays.
#[derive(Debug, Clone)]
pub(crate) struct Scorer {
    len: usize,
    grid: [usize; MAX_LEVELS],
    a: [f64; MAX_LEVELS],
    nu: [f64; MAX_LEVELS],
    penalty: [f64; MAX_LEVELS],
}

/// Best score found in a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Best {
    pub value: f64,
    pub v: usize,
    pub level: usize,
}

impl Scorer {
    pub(crate) fn new(table: &PenaltyTable) -> Self {
        let entries = table.entries();
        assert!(entries.len() <= MAX_LEVELS, "grid too large");
        let mut scorer = Scorer {
            len: entries.len(),
            grid: [0; MAX_LEVELS],
            a: [0.0; MAX_LEVELS],
            nu: [0.0; MAX_LEVELS],
            penalty: [0.0; MAX_LEVELS],
        };
        for (j, e) in entries.iter().enumerate() {
            scorer.grid[j] = e.t;
            scorer.a[j] = e.a;
            scorer.nu[j] = e.nu;
            scorer.penalty[j] = e.penalty;
        }
        scorer
    }

    pub(crate) fn levels(&self) -> usize {
        self.len
    }

    pub(crate) fn t_at(&self, level: usize) -> usize {
        self.grid[level]
    }

    /// Unpenalized score at every level; writes `self.levels()` values.
    #[inline]
    pub(crate) fn raw_into(&self, x: &DataMatrix, s: usize, e: usize, v: usize, out: &mut [f64]) {
        let (wl, wr) = cusum_weights(s, e, v);
        let ps = x.prefix_row(s);
        let pv = x.prefix_row(v);
        let pe = x.prefix_row(e);
        let a = &self.a[..self.len];
        let mut sumsq = [0.0f64; MAX_LEVELS];
        let mut count = [0u32; MAX_LEVELS];
        for ((&l0, &m), &r1) in ps.iter().zip(pv).zip(pe) {
            let c = wl * (m - l0) - wr * (r1 - m);
            let ac = c.abs();
            let first = a.iter().filter(|&&aj| ac < aj).count();
            if first < self.len {
                sumsq[first] += c * c;
                count[first] += 1;
            }
        }
        let mut acc_sq = 0.0;
        let mut acc_n = 0u32;
        for j in 0..self.len {
            acc_sq += sumsq[j];
            acc_n += count[j];
            out[j] = acc_sq - self.nu[j] * acc_n as f64;
        }
    }

    /// `(max_t S(t), level)` at one split, smallest level on ties.
    #[inline]
    pub(crate) fn best_at(&self, x: &DataMatrix, s: usize, e: usize, v: usize) -> (f64, usize) {
        let mut raw = [0.0f64; MAX_LEVELS];
        self.raw_into(x, s, e, v, &mut raw);
        let mut best = f64::NEG_INFINITY;
        let mut level = 0;
        for j in 0..self.len {
            let val = raw[j] - self.penalty[j];
            if val > best {
                best = val;
                level = j;
            }
        }
        (best, level)
    }

    /// Maximum over split points of the penalized score on `(s, e]`.
    pub(crate) fn scan(&self, x: &DataMatrix, s: usize, e: usize, mode: ScanMode) -> Best {
        match mode {
            ScanMode::Midpoint => {
                let v = (s + e) / 2;
                let (value, level) = self.best_at(x, s, e, v);
                Best { value, v, level }
            }
            ScanMode::Full => {
                let mut best = Best {
                    value: f64::NEG_INFINITY,
                    v: s + 1,
                    level: 0,
                };
                for v in s + 1..e {
                    let (value, level) = self.best_at(x, s, e, v);
                    if value > best.value {
                        best = Best { value, v, level };
                    }
                }
                best
            }
        }
    }
}

fn check_scan(x: &DataMatrix, s: usize, v: usize, e: usize, table: &PenaltyTable) -> Result<()> {
    check_triple(s, v, e, x.n())?;
    if table.is_empty() {
        return Err(Error::BadParams("empty penalty table".into()));
    }
    if table.grid().last().copied() != Some(x.p()) {
        return Err(Error::BadParams(format!(
            "penalty table grid does not end at p={}",
            x.p()
        )));
    }
    Ok(())
}

/// Penalized score at a single grid level, by direct summation over series.
pub fn score_at(
    x: &DataMatrix,
    s: usize,
    e: usize,
    v: usize,
    t: usize,
    table: &PenaltyTable,
) -> Result<f64> {
    check_scan(x, s, v, e, table)?;
    let entry = table.entry(t)?;
    let mut total = 0.0;
    for i in 0..x.p() {
        let c = x.cusum(i, s, e, v)?;
        if c.abs() >= entry.a {
            total += c * c - entry.nu;
        }
    }
    Ok(total - entry.penalty)
}

/// Maximum of the level scores over the sparsity grid.
pub fn penalized_score(
    x: &DataMatrix,
    s: usize,
    e: usize,
    v: usize,
    table: &PenaltyTable,
) -> Result<ScoreValue> {
    check_scan(x, s, v, e, table)?;
    let scorer = Scorer::new(table);
    let (value, level) = scorer.best_at(x, s, e, v);
    Ok(ScoreValue {
        value,
        best_t: scorer.t_at(level),
        per_t: None,
    })
}

/// As [`penalized_score`], also returning the score at every level.
pub fn penalized_score_detailed(
    x: &DataMatrix,
    s: usize,
    e: usize,
    v: usize,
    table: &PenaltyTable,
) -> Result<ScoreValue> {
    check_scan(x, s, v, e, table)?;
    let scorer = Scorer::new(table);
    let mut raw = [0.0f64; MAX_LEVELS];
    scorer.raw_into(x, s, e, v, &mut raw);
    let per_t: Vec<(usize, f64)> = table
        .entries()
        .iter()
        .zip(&raw)
        .map(|(entry, r)| (entry.t, r - entry.penalty))
        .collect();
    let (mut value, mut best_t) = (f64::NEG_INFINITY, per_t[0].0);
    for &(t, val) in &per_t {
        if val > value {
            value = val;
            best_t = t;
        }
    }
    Ok(ScoreValue {
        value,
        best_t,
        per_t: Some(per_t),
    })
}

/// Tests `(s, e]` for a changepoint: detected iff the maximal penalized score
/// over the scanned splits is positive.
pub fn test_interval(
    x: &DataMatrix,
    s: usize,
    e: usize,
    table: &PenaltyTable,
    mode: ScanMode,
) -> Result<IntervalTest> {
    if e < s + 2 {
        return Err(Error::BadInterval { s, v: s + 1, e, n: x.n() });
    }
    check_scan(x, s, s + 1, e, table)?;
    let scorer = Scorer::new(table);
    let best = scorer.scan(x, s, e, mode);
    Ok(IntervalTest {
        detected: best.value > 0.0,
        argmax_v: best.v,
        score: best.value,
        best_t: scorer.t_at(best.level),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{nu_trunc, NEff, RateContext};

    fn zeros(p: usize, n: usize) -> DataMatrix {
        DataMatrix::from_rows(&vec![vec![0.0; n]; p]).unwrap()
    }

    fn step(p: usize, n: usize, eta: usize, height: f64) -> DataMatrix {
        let row: Vec<f64> = (0..n).map(|t| if t < eta { 0.0 } else { height }).collect();
        DataMatrix::from_rows(&vec![row; p]).unwrap()
    }

    #[test]
    fn zero_data_sparse_level_is_minus_penalty() {
        let x = zeros(20, 30);
        let ctx = RateContext::new(30, 20, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        let t = 1;
        assert!(ctx.threshold_a(t).unwrap() > 0.0);
        let got = score_at(&x, 0, 30, 10, t, &table).unwrap();
        assert_eq!(got, -ctx.lambda_tilde(t).unwrap());
    }

    #[test]
    fn zero_data_dense_level() {
        let x = zeros(20, 30);
        let ctx = RateContext::new(30, 20, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        assert_eq!(ctx.threshold_a(20).unwrap(), 0.0);
        let got = score_at(&x, 0, 30, 10, 20, &table).unwrap();
        assert!((got - (-20.0 - ctx.lambda_tilde(20).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn single_series_step_score() {
        let x = step(1, 8, 4, 10.0);
        let ctx = RateContext::new(8, 1, NEff::N4).unwrap();
        let table = PenaltyTable::zero(&ctx).unwrap();
        let a = ctx.threshold_a(1).unwrap();
        let want = 200.0 - nu_trunc(a).unwrap();
        let got = score_at(&x, 0, 8, 4, 1, &table).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn zero_data_overall_is_best_negative_penalty() {
        let x = zeros(20, 30);
        let ctx = RateContext::new(30, 20, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        let sv = penalized_score(&x, 0, 30, 10, &table).unwrap();
        let mut want = (f64::NEG_INFINITY, 0);
        for e in table.entries() {
            let val = if e.a > 0.0 { -e.penalty } else { -(20.0 * e.nu) - e.penalty };
            if val > want.0 {
                want = (val, e.t);
            }
        }
        assert!((sv.value - want.0).abs() < 1e-12);
        assert_eq!(sv.best_t, want.1);
    }

    #[test]
    fn dense_change_prefers_full_level() {
        let x = step(4, 16, 8, 10.0);
        let ctx = RateContext::new(16, 4, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        let sv = penalized_score_detailed(&x, 0, 16, 8, &table).unwrap();
        assert_eq!(sv.best_t, 4);
        let per_t = sv.per_t.unwrap();
        for &(t, val) in &per_t {
            let direct = score_at(&x, 0, 16, 8, t, &table).unwrap();
            assert!((val - direct).abs() < 1e-9);
        }
        let test = test_interval(&x, 0, 16, &table, ScanMode::Full).unwrap();
        assert!(test.detected);
        assert_eq!(test.argmax_v, 8);
    }

    #[test]
    fn zero_data_never_detects() {
        let x = zeros(5, 40);
        let ctx = RateContext::new(40, 5, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        let test = test_interval(&x, 0, 40, &table, ScanMode::Full).unwrap();
        assert!(!test.detected);
        assert_eq!(test.argmax_v, 1);
    }

    #[test]
    fn midpoint_mode_uses_midpoint_only() {
        let x = step(2, 20, 5, 10.0);
        let ctx = RateContext::new(20, 2, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        let test = test_interval(&x, 3, 12, &table, ScanMode::Midpoint).unwrap();
        assert_eq!(test.argmax_v, 7);
        let direct = penalized_score(&x, 3, 12, 7, &table).unwrap();
        assert_eq!(test.score, direct.value);
    }

    #[test]
    fn errors() {
        let x = zeros(3, 10);
        let ctx = RateContext::new(10, 3, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        assert!(matches!(score_at(&x, 2, 5, 2, 1, &table), Err(Error::BadInterval { .. })));
        assert!(matches!(score_at(&x, 0, 5, 2, 3, &table), Ok(_)));
        let ctx_wide = RateContext::new(10, 9, NEff::N4).unwrap();
        let table_wide = PenaltyTable::analytic(&ctx_wide).unwrap();
        assert!(score_at(&x, 0, 5, 2, 1, &table_wide).is_err());
        assert!(matches!(
            test_interval(&x, 4, 5, &table, ScanMode::Full),
            Err(Error::BadInterval { .. })
        ));
    }

    #[test]
    fn bad_sparsity() {
        let x = zeros(8, 10);
        let ctx = RateContext::new(10, 8, NEff::N4).unwrap();
        let table = PenaltyTable::analytic(&ctx).unwrap();
        assert!(!ctx.grid().contains(&3));
        assert!(matches!(score_at(&x, 0, 5, 2, 3, &table), Err(Error::BadSparsity(3))));
    }
}
