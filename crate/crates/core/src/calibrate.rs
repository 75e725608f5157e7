//! Noise-level normalization and Monte Carlo calibration of the testing
//! penalty.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::SeededIntervalSet;
use crate::rng::stream_rng;
use crate::score::{ScanMode, Scorer, MAX_LEVELS};
use crate::stats::{DataMatrix, NEff, PenaltyTable, RateContext};

/// Gaussian consistency factor for the MAD of first differences.
pub const MAD_SCALE: f64 = 1.4826 / std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    MadDiff,
    Known,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub per_series: Vec<f64>,
    pub method: SigmaMethod,
}

impl SigmaEstimate {
    /// User-supplied noise levels; each must be finite and positive.
    pub fn known(per_series: Vec<f64>) -> Result<Self> {
        if let Some(series) = per_series.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::DegenerateSeries { series });
        }
        Ok(Self {
            per_series,
            method: SigmaMethod::Known,
        })
    }
}

fn median(values: &mut [f64]) -> f64 {
    let m = values.len();
    let (_, &mut upper, _) = values.select_nth_unstable_by(m / 2, f64::total_cmp);
    if m % 2 == 1 {
        upper
    } else {
        let lower = values[..m / 2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Scaled median absolute deviation of first differences.
pub fn mad_sigma(series: &[f64]) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::TooShort {
            n: series.len(),
            min: 3,
        });
    }
    let mut d: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let center = median(&mut d);
    for x in d.iter_mut() {
        *x = (*x - center).abs();
    }
    let sigma = MAD_SCALE * median(&mut d);
    if sigma > 0.0 && sigma.is_finite() {
        Ok(sigma)
    } else {
        Err(Error::DegenerateSeries { series: 0 })
    }
}

/// MAD noise level of every series.
pub fn estimate_sigma(x: &DataMatrix) -> Result<SigmaEstimate> {
    let per_series = (0..x.p())
        .map(|i| {
            mad_sigma(&x.series(i)).map_err(|err| match err {
                Error::DegenerateSeries { .. } => Error::DegenerateSeries { series: i },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SigmaEstimate {
        per_series,
        method: SigmaMethod::MadDiff,
    })
}

/// Divides each series by its noise level.
pub fn normalize(x: &DataMatrix, sig: &SigmaEstimate) -> Result<DataMatrix> {
    if sig.per_series.len() != x.p() {
        return Err(Error::BadParams(format!(
            "{} noise levels for {} series",
            sig.per_series.len(),
            x.p()
        )));
    }
    if let Some(series) = sig
        .per_series
        .iter()
        .position(|s| !(s.is_finite() && *s > 0.0))
    {
        return Err(Error::DegenerateSeries { series });
    }
    x.scaled(&sig.per_series)
}

/// Maximum over the interval set of the unpenalized score, at every level of
/// `ctx.grid()`.
pub fn max_raw_scores(
    x: &DataMatrix,
    ctx: &RateContext,
    set: &SeededIntervalSet,
    mode: ScanMode,
) -> Result<Vec<f64>> {
    if set.n() != x.n() {
        return Err(Error::MismatchedN {
            set_n: set.n(),
            data_n: x.n(),
        });
    }
    if ctx.p() != x.p() || ctx.n() != x.n() {
        return Err(Error::BadParams("rate context does not match the data".into()));
    }
    let scorer = Scorer::new(&PenaltyTable::zero(ctx)?);
    Ok(raw_maxima(x, set, &scorer, mode))
}

fn raw_maxima(x: &DataMatrix, set: &SeededIntervalSet, scorer: &Scorer, mode: ScanMode) -> Vec<f64> {
    let levels = scorer.levels();
    let mut best = vec![f64::NEG_INFINITY; levels];
    let mut raw = [0.0f64; MAX_LEVELS];
    let mut fold = |s: usize, e: usize, v: usize| {
        scorer.raw_into(x, s, e, v, &mut raw);
        for (b, r) in best.iter_mut().zip(&raw[..levels]) {
            if *r > *b {
                *b = *r;
            }
        }
    };
    for iv in set.intervals() {
        match mode {
            ScanMode::Full => (iv.s + 1..iv.e).for_each(|v| fold(iv.s, iv.e, v)),
            ScanMode::Midpoint => fold(iv.s, iv.e, iv.midpoint()),
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub mc_n: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub scan_mode: ScanMode,
    /// MAD-normalize each null draw, matching a normalizing pipeline.
    pub normalize: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            mc_n: 1000,
            epsilon: 0.01,
            seed: 0,
            scan_mode: ScanMode::Full,
            normalize: false,
        }
    }
}

/// Calibrated testing penalty, serializable for reuse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedGamma {
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub mc_n: usize,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub grid: Vec<usize>,
    pub gamma: Vec<f64>,
    /// Empirical `1 - epsilon/3` quantiles of the null maxima.
    pub raw: Vec<f64>,
    pub seed: u64,
    pub scan_mode: ScanMode,
    pub n_eff: NEff,
    pub normalize: bool,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub dense: f64,
}

/// Index (1-based) of the order statistic used as the `1 - eps` quantile.
pub fn quantile_rank(mc_n: usize, eps: f64) -> usize {
    let k = (mc_n as f64 * (1.0 - eps) - 1e-9).ceil() as usize;
    k.clamp(1, mc_n)
}

fn null_draw(n: usize, p: usize, seed: u64, replicate: u64) -> Result<DataMatrix> {
    let mut rng = stream_rng(seed, replicate);
    let values: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    DataMatrix::from_time_major(p, n, values)
}

/// Simulates null maxima and assembles the three-segment penalty.
pub fn calibrate_gamma(
    ctx: &RateContext,
    set: &SeededIntervalSet,
    opts: &CalibrationOptions,
) -> Result<CalibratedGamma> {
    if opts.mc_n < 100 {
        return Err(Error::BadParams(format!(
            "need at least 100 Monte Carlo draws, got {}",
            opts.mc_n
        )));
    }
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) {
        return Err(Error::BadParams(format!(
            "epsilon must lie in (0, 1), got {}",
            opts.epsilon
        )));
    }
    if set.n() != ctx.n() {
        return Err(Error::MismatchedN {
            set_n: set.n(),
            data_n: ctx.n(),
        });
    }
    let (n, p) = (ctx.n(), ctx.p());
    let scorer = Scorer::new(&PenaltyTable::zero(ctx)?);
    let maxima = (0..opts.mc_n as u64)
        .into_par_iter()
        .map(|r| {
            let mut x = null_draw(n, p, opts.seed, r)?;
            if opts.normalize {
                x = normalize(&x, &estimate_sigma(&x)?)?;
            }
            Ok(raw_maxima(&x, set, &scorer, opts.scan_mode))
        })
        .collect::<Result<Vec<_>>>()?;

    let rank = quantile_rank(opts.mc_n, opts.epsilon / 3.0);
    let grid = ctx.grid().to_vec();
    let raw: Vec<f64> = (0..grid.len())
        .map(|j| {
            let mut col: Vec<f64> = maxima.iter().map(|m| m[j]).collect();
            col.sort_unstable_by(f64::total_cmp);
            col[rank - 1]
        })
        .collect();

    let log_n = (n as f64).ln();
    let mut gamma1: Option<f64> = None;
    let mut gamma2: Option<f64> = None;
    for (&t, &q) in grid.iter().zip(&raw) {
        if t == p {
            continue;
        }
        let ratio = q / ctx.rate_r(t)?;
        let slot = if t as f64 <= log_n { &mut gamma1 } else { &mut gamma2 };
        *slot = Some(slot.map_or(ratio, |g| g.max(ratio)));
    }
    let gamma1 = gamma1.map(|g| g.max(0.0));
    let gamma2 = gamma2.map(|g| g.max(0.0));
    let dense = raw[grid.len() - 1].max(0.0);
    let gamma = grid
        .iter()
        .map(|&t| {
            if t == p {
                return Ok(dense);
            }
            let c = if t as f64 <= log_n { gamma1 } else { gamma2 };
            Ok(c.expect("segment is nonempty") * ctx.rate_r(t)?)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CalibratedGamma {
        n,
        p,
        epsilon: opts.epsilon,
        mc_n: opts.mc_n,
        alpha: set.alpha(),
        k: set.k(),
        grid,
        gamma,
        raw,
        seed: opts.seed,
        scan_mode: opts.scan_mode,
        n_eff: ctx.n_eff(),
        normalize: opts.normalize,
        gamma1,
        gamma2,
        dense,
    })
}

impl CalibratedGamma {
    /// Penalty table for `ctx`; fails unless `n`, `p` and the grid agree.
    pub fn table(&self, ctx: &RateContext) -> Result<PenaltyTable> {
        if self.n != ctx.n() || self.p != ctx.p() {
            return Err(Error::TableMismatch(format!(
                "calibrated for n={}, p={}; data has n={}, p={}",
                self.n,
                self.p,
                ctx.n(),
                ctx.p()
            )));
        }
        if self.grid != ctx.grid() {
            return Err(Error::TableMismatch(format!(
                "grid {:?} differs from {:?}",
                self.grid,
                ctx.grid()
            )));
        }
        PenaltyTable::from_values(ctx, &self.gamma)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::BadParams(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::BadParams(e.to_string()))
    }
}
