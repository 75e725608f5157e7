//! Numerical primitives: prefix-summed data, CUSUM contrasts, the truncated
//! second moment of a standard normal, and the sparsity-indexed rate,
//! threshold and penalty functions.

use std::f64::consts::{E, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// A `p x n` data matrix (p series observed at n time points) with per-series
/// prefix sums, so that any segment sum costs O(1).
///
/// Storage is time-major: all `p` series for one time point are contiguous,
/// which is the access pattern of a CUSUM scan over coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    p: usize,
    n: usize,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from one vector per series.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::NoSeries);
        }
        let n = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Ragged {
                    series: i,
                    len: row.len(),
                    expected: n,
                });
            }
        }
        let mut values = vec![0.0; p * n];
        for (i, row) in rows.iter().enumerate() {
            for (t, &x) in row.iter().enumerate() {
                values[t * p + i] = x;
            }
        }
        Self::from_time_major(p, n, values)
    }

    /// Builds a matrix from a time-major buffer: `values[t * p + i]` is series
    /// `i` at time index `t` (0-based).
    pub fn from_time_major(p: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::NoSeries);
        }
        if n < 2 {
            return Err(Error::TooShort { n, min: 2 });
        }
        if values.len() != p * n {
            return Err(Error::BadParams(format!(
                "buffer has {} values, expected {}",
                values.len(),
                p * n
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                series: pos % p,
                time: pos / p,
            });
        }
        let mut prefix = vec![0.0; p * (n + 1)];
        for t in 0..n {
            let (done, rest) = prefix.split_at_mut((t + 1) * p);
            let prev = &done[t * p..];
            let row = &values[t * p..(t + 1) * p];
            for ((out, &acc), &x) in rest[..p].iter_mut().zip(prev).zip(row) {
                *out = acc + x;
            }
        }
        Ok(Self {
            p,
            n,
            values,
            prefix,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Value of series `i` at 0-based time index `t`.
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[t * self.p + i]
    }

    /// Sum of the first `v` observations of series `i`; `prefix(i, 0) == 0`.
    pub fn prefix(&self, i: usize, v: usize) -> f64 {
        self.prefix[v * self.p + i]
    }

    /// Prefix sums of all series after `v` observations.
    #[inline]
    pub fn prefix_row(&self, v: usize) -> &[f64] {
        &self.prefix[v * self.p..(v + 1) * self.p]
    }

    /// Time-major view of the raw values.
    pub fn as_time_major(&self) -> &[f64] {
        &self.values
    }

    /// Copy of series `i` as a vector over time.
    pub fn series(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|t| self.get(i, t)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.p).map(|i| self.series(i)).collect()
    }

    /// Returns a copy with series `i` divided by `scale[i]`.
    pub fn scaled(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.p {
            return Err(Error::BadParams(format!(
                "{} scale factors for {} series",
                scale.len(),
                self.p
            )));
        }
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(self.p) {
            for (x, s) in row.iter_mut().zip(scale) {
                *x /= s;
            }
        }
        Self::from_time_major(self.p, self.n, values)
    }

    /// CUSUM of series `i` over `(s, e]` evaluated at split `v`.
    pub fn cusum(&self, i: usize, s: usize, e: usize, v: usize) -> Result<f64> {
        if i >= self.p {
            return Err(Error::BadSeries {
                index: i,
                p: self.p,
            });
        }
        check_triple(s, v, e, self.n)?;
        let (wl, wr) = cusum_weights(s, e, v);
        let left = self.prefix(i, v) - self.prefix(i, s);
        let right = self.prefix(i, e) - self.prefix(i, v);
        Ok(wl * left - wr * right)
    }
}

pub(crate) fn check_triple(s: usize, v: usize, e: usize, n: usize) -> Result<()> {
    if s < v && v < e && e <= n {
        Ok(())
    } else {
        Err(Error::BadInterval { s, v, e, n })
    }
}

/// Weights `(w_left, w_right)` such that the CUSUM is
/// `w_left * sum(s+1..=v) - w_right * sum(v+1..=e)`.
#[inline]
pub(crate) fn cusum_weights(s: usize, e: usize, v: usize) -> (f64, f64) {
    let len = (e - s) as f64;
    let left = (v - s) as f64;
    let right = (e - v) as f64;
    ((right / (len * left)).sqrt(), (left / (len * right)).sqrt())
}

/// `E(Z^2 | |Z| >= a)` for a standard normal `Z`.
///
/// Equals `1 + a * phi(a) / Q(a)`. The ratio is evaluated through the Mills
/// ratio `Q(a) / phi(a)` from its continued fraction once `a > 5`, where both
/// tail quantities are tiny and eventually underflow.
pub fn nu_trunc(a: f64) -> Result<f64> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::NegativeThreshold(a));
    }
    if a == 0.0 {
        return Ok(1.0);
    }
    if a <= 5.0 {
        let density = (-0.5 * a * a).exp() / (2.0 * PI).sqrt();
        let tail = 0.5 * erfc(a / SQRT_2);
        Ok(1.0 + a * density / tail)
    } else {
        Ok(1.0 + a / mills_ratio(a))
    }
}

/// `Q(a) / phi(a)` via the continued fraction
/// `1 / (a + 1 / (a + 2 / (a + 3 / (a + ...))))`, evaluated with modified Lentz.
fn mills_ratio(a: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = a;
    let mut c = a;
    let mut d = 0.0;
    for k in 1..500 {
        let coef = k as f64;
        d = a + coef * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = a + coef / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// How `n` enters the logarithms of the rate and threshold functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NEff {
    /// `log(n^4)`: the practical default.
    #[default]
    N4,
    /// `log(n)`: the form that appears in the finite-sample guarantees.
    N,
}

impl NEff {
    pub fn log(self, n: usize) -> f64 {
        let ln = (n as f64).ln();
        match self {
            NEff::N4 => 4.0 * ln,
            NEff::N => ln,
        }
    }
}

/// Problem dimensions together with the sparsity grid they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateContext {
    n: usize,
    p: usize,
    n_eff: NEff,
    log_n_eff: f64,
    grid: Vec<usize>,
}

impl RateContext {
    pub fn new(n: usize, p: usize, n_eff: NEff) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooShort { n, min: 2 });
        }
        if p == 0 {
            return Err(Error::NoSeries);
        }
        let log_n_eff = n_eff.log(n);
        let grid = sparsity_grid(p, log_n_eff);
        Ok(Self {
            n,
            p,
            n_eff,
            log_n_eff,
            grid,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_eff(&self) -> NEff {
        self.n_eff
    }

    pub fn log_n_eff(&self) -> f64 {
        self.log_n_eff
    }

    /// Candidate sparsity levels, ascending.
    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    /// `sqrt(p log n_eff)`, the boundary between sparse and dense regimes.
    pub fn dense_boundary(&self) -> f64 {
        (self.p as f64 * self.log_n_eff).sqrt()
    }

    fn check_t(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.p {
            Err(Error::OutOfRange { t, p: self.p })
        } else {
            Ok(t as f64)
        }
    }

    fn sparse_rate(&self, t: f64) -> f64 {
        let p = self.p as f64;
        (t * (E * p * self.log_n_eff / (t * t)).ln()).max(self.log_n_eff)
    }

    /// Detection boundary rate `r(t)`.
    pub fn rate_r(&self, t: usize) -> Result<f64> {
        let tf = self.check_t(t)?;
        let bound = self.dense_boundary();
        Ok(if tf >= bound {
            bound
        } else {
            self.sparse_rate(tf)
        })
    }

    /// Localization rate `h(t)`; differs from `r(t)` only in the dense regime.
    pub fn rate_h(&self, t: usize) -> Result<f64> {
        let tf = self.check_t(t)?;
        let p = self.p as f64;
        if tf >= self.dense_boundary() {
            let loglog = (E * p).ln().ln();
            Ok((p * self.log_n_eff.max(loglog)).sqrt())
        } else {
            Ok(self.sparse_rate(tf))
        }
    }

    /// Coordinate threshold `a(t)`; zero in the dense regime.
    pub fn threshold_a(&self, t: usize) -> Result<f64> {
        let tf = self.check_t(t)?;
        if tf <= self.dense_boundary() {
            let p = self.p as f64;
            Ok((4.0 * (E * p * self.log_n_eff / (tf * tf)).ln()).sqrt())
        } else {
            Ok(0.0)
        }
    }

    /// Recommended estimation penalty. Always uses `log(n^4)` inside, with the
    /// regime switch at `sqrt(p log n)`.
    pub fn lambda_tilde(&self, t: usize) -> Result<f64> {
        let tf = self.check_t(t)?;
        let p = self.p as f64;
        let ln = (self.n as f64).ln();
        let l4 = 4.0 * ln;
        if tf >= (p * ln).sqrt() {
            Ok(1.5 * ((p * l4).sqrt() + l4))
        } else {
            Ok(tf * (E * p * l4 / (tf * tf)).ln() + l4)
        }
    }
}

/// `{1, 2, 4, ..., 2^floor(log2 floor(sqrt(p log n_eff)))} ∪ {p}`, capped at `p`.
pub fn sparsity_grid(p: usize, log_n_eff: f64) -> Vec<usize> {
    let bound = (p as f64 * log_n_eff).sqrt().floor();
    let bound = if bound.is_finite() && bound > 0.0 {
        bound as usize
    } else {
        0
    };
    let mut grid = vec![1usize];
    let mut t = 2usize;
    while t <= bound && t <= p {
        grid.push(t);
        t = match t.checked_mul(2) {
            Some(next) => next,
            None => break,
        };
    }
    grid.push(p);
    grid.retain(|&t| t <= p);
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Threshold, centering term and penalty for one grid level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyEntry {
    pub t: usize,
    pub a: f64,
    pub nu: f64,
    pub penalty: f64,
}

/// Per-level thresholds and penalties on the sparsity grid, ascending in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTable {
    entries: Vec<PenaltyEntry>,
}

impl PenaltyTable {
    /// Builds a table from an arbitrary penalty function of `t`.
    pub fn from_fn(ctx: &RateContext, mut penalty: impl FnMut(usize) -> Result<f64>) -> Result<Self> {
        let entries = ctx
            .grid()
            .iter()
            .map(|&t| {
                let a = ctx.threshold_a(t)?;
                let pen = penalty(t)?;
                if !pen.is_finite() {
                    return Err(Error::BadParams(format!("penalty at t={t} is not finite")));
                }
                Ok(PenaltyEntry {
                    t,
                    a,
                    nu: nu_trunc(a)?,
                    penalty: pen,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    /// Penalty `lambda_tilde(t)`.
    pub fn analytic(ctx: &RateContext) -> Result<Self> {
        Self::from_fn(ctx, |t| ctx.lambda_tilde(t))
    }

    /// Penalty `c * r(t)`.
    pub fn rate_multiple(ctx: &RateContext, c: f64) -> Result<Self> {
        Self::from_fn(ctx, |t| Ok(c * ctx.rate_r(t)?))
    }

    /// All penalties zero; used for null calibration.
    pub fn zero(ctx: &RateContext) -> Result<Self> {
        Self::from_fn(ctx, |_| Ok(0.0))
    }

    /// Penalties given explicitly, aligned with `ctx.grid()`.
    pub fn from_values(ctx: &RateContext, penalties: &[f64]) -> Result<Self> {
        if penalties.len() != ctx.grid().len() {
            return Err(Error::BadParams(format!(
                "{} penalties for a grid of {} levels",
                penalties.len(),
                ctx.grid().len()
            )));
        }
        let mut it = penalties.iter();
        Self::from_fn(ctx, |_| Ok(*it.next().expect("length checked")))
    }

    pub fn entries(&self) -> &[PenaltyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grid(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.t).collect()
    }

    pub fn penalties(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.penalty).collect()
    }

    pub fn entry(&self, t: usize) -> Result<&PenaltyEntry> {
        self.entries
            .iter()
            .find(|e| e.t == t)
            .ok_or(Error::BadSparsity(t))
    }

    /// True when both tables use the same levels and thresholds.
    pub fn same_levels(&self, other: &PenaltyTable) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(x, y)| x.t == y.t && x.a == y.a)
    }
}
