//! Single-changepoint estimation and the seeded narrowest-over-threshold
//! recursion for multiple changepoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::{SeededInterval, SeededIntervalSet};
use crate::score::{Best, ScanMode, ScoreValue, Scorer};
use crate::stats::{DataMatrix, PenaltyTable, RateContext};

/// Work (triples times series) below which a length group is scanned serially.
const PAR_MIN_WORK: usize = 1 << 16;

/// How the recursion proceeds once a changepoint is located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Recurse on `(s, s_m + 1]` and `(e_m - 1, e]`.
    Trimming,
    /// Recurse on `(s, v]` and `(v, e]`.
    #[default]
    SplitAtEstimate,
    /// Trimming recursion, testing each interval only at its midpoint.
    MidpointTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsacConfig {
    pub alpha: f64,
    pub k: usize,
    pub variant: Variant,
    /// Test at midpoints only, whatever the variant.
    pub midpoint_only_test: bool,
    pub gamma: PenaltyTable,
    pub lambda: PenaltyTable,
}

impl EsacConfig {
    /// Defaults: `alpha = 3/2`, `K = 4`, split at the estimate, and
    /// `lambda_tilde` for both testing and estimation.
    pub fn new(ctx: &RateContext) -> Result<Self> {
        let table = PenaltyTable::analytic(ctx)?;
        Ok(Self {
            alpha: 1.5,
            k: 4,
            variant: Variant::default(),
            midpoint_only_test: false,
            gamma: table.clone(),
            lambda: table,
        })
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_gamma(mut self, gamma: PenaltyTable) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_lambda(mut self, lambda: PenaltyTable) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn scan_mode(&self) -> ScanMode {
        if self.midpoint_only_test || self.variant == Variant::MidpointTest {
            ScanMode::Midpoint
        } else {
            ScanMode::Full
        }
    }

    /// True when `alpha` and `K` fall in the range covered by the
    /// localisation guarantee.
    pub fn theoretical(&self) -> bool {
        self.alpha > 1.0 && self.alpha <= 2.0 && self.k >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Changepoint {
    pub position: usize,
    /// Seeded interval whose test selected this changepoint.
    pub interval: SeededInterval,
    /// Maximal estimation score on `interval`.
    pub score: f64,
    /// Grid level attaining `score`.
    pub sparsity: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Sorted by position.
    pub changepoints: Vec<Changepoint>,
}

impl DetectionResult {
    pub fn positions(&self) -> Vec<usize> {
        self.changepoints.iter().map(|c| c.position).collect()
    }

    pub fn len(&self) -> usize {
        self.changepoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changepoints.is_empty()
    }
}

fn check_table(x: &DataMatrix, table: &PenaltyTable, name: &str) -> Result<()> {
    if table.grid().last().copied() != Some(x.p()) {
        return Err(Error::BadParams(format!(
            "{name} table grid does not end at p={}",
            x.p()
        )));
    }
    Ok(())
}

/// Smallest maximiser over `0 < v < n` of the penalized score on `(0, n]`.
pub fn estimate_single(x: &DataMatrix, lambda: &PenaltyTable) -> Result<(usize, ScoreValue)> {
    if x.n() < 2 {
        return Err(Error::TooShort { n: x.n(), min: 2 });
    }
    check_table(x, lambda, "lambda")?;
    let scorer = Scorer::new(lambda);
    let best = scorer.scan(x, 0, x.n(), ScanMode::Full);
    Ok((
        best.v,
        ScoreValue {
            value: best.value,
            best_t: scorer.t_at(best.level),
            per_t: None,
        },
    ))
}

/// Runs the seeded recursion on `(0, n]`.
pub fn esac(x: &DataMatrix, cfg: &EsacConfig, set: &SeededIntervalSet) -> Result<DetectionResult> {
    if set.n() != x.n() {
        return Err(Error::MismatchedN {
            set_n: set.n(),
            data_n: x.n(),
        });
    }
    check_table(x, &cfg.gamma, "gamma")?;
    check_table(x, &cfg.lambda, "lambda")?;
    let gamma = Scorer::new(&cfg.gamma);
    let lambda = Scorer::new(&cfg.lambda);
    let mut search = Search {
        x,
        set,
        lengths: set.lengths().collect(),
        gamma: &gamma,
        lambda: &lambda,
        mode: cfg.scan_mode(),
        tested: vec![None; set.len()],
        estimated: vec![None; set.len()],
    };

    let mut found = Vec::new();
    let mut stack = vec![(0usize, x.n())];
    while let Some((s, e)) = stack.pop() {
        if e <= s + 1 {
            continue;
        }
        let Some((iv, best)) = search.locate(s, e) else {
            continue;
        };
        found.push(Changepoint {
            position: best.v,
            interval: iv,
            score: best.value,
            sparsity: lambda.t_at(best.level),
        });
        match cfg.variant {
            Variant::SplitAtEstimate => {
                stack.push((best.v, e));
                stack.push((s, best.v));
            }
            Variant::Trimming | Variant::MidpointTest => {
                stack.push((iv.e - 1, e));
                stack.push((s, iv.s + 1));
            }
        }
    }
    found.sort_by_key(|c| c.position);
    Ok(DetectionResult { changepoints: found })
}

/// Recursion state. Test outcomes and estimation scans depend only on the
/// seeded interval, so each is computed at most once per run.
struct Search<'a> {
    x: &'a DataMatrix,
    set: &'a SeededIntervalSet,
    lengths: Vec<usize>,
    gamma: &'a Scorer,
    lambda: &'a Scorer,
    mode: ScanMode,
    tested: Vec<Option<bool>>,
    estimated: Vec<Option<Best>>,
}

/// Evaluates `f` on the intervals at `todo` and stores the results.
fn fill<T, F>(cache: &mut [Option<T>], todo: &[usize], intervals: &[SeededInterval], work: usize, f: F)
where
    T: Send,
    F: Fn(&SeededInterval) -> T + Sync + Send,
{
    let values: Vec<T> = if work >= PAR_MIN_WORK && todo.len() > 1 {
        todo.par_iter().map(|&m| f(&intervals[m])).collect()
    } else {
        todo.iter().map(|&m| f(&intervals[m])).collect()
    };
    for (&m, v) in todo.iter().zip(values) {
        cache[m] = Some(v);
    }
}

impl Search<'_> {
    /// The narrowest detecting length inside `(s, e]`, then the interval of
    /// that length with the largest estimation score (earliest on ties).
    fn locate(&mut self, s: usize, e: usize) -> Option<(SeededInterval, Best)> {
        let (x, gamma, lambda, mode) = (self.x, self.gamma, self.lambda, self.mode);
        let intervals = self.set.intervals();
        let levels = gamma.levels().max(1);
        for &len in &self.lengths {
            if len > e - s {
                break;
            }
            let range = self.set.range_within(len, s, e);
            if range.is_empty() {
                continue;
            }
            let todo: Vec<usize> = range.clone().filter(|&m| self.tested[m].is_none()).collect();
            let per_interval = match mode {
                ScanMode::Full => len,
                ScanMode::Midpoint => 1,
            };
            let work = todo.len() * per_interval * x.p() * levels;
            fill(&mut self.tested, &todo, intervals, work, |iv| {
                gamma.scan(x, iv.s, iv.e, mode).value > 0.0
            });
            let hits: Vec<usize> = range.filter(|&m| self.tested[m] == Some(true)).collect();
            if hits.is_empty() {
                continue;
            }
            let todo: Vec<usize> = hits
                .iter()
                .copied()
                .filter(|&m| self.estimated[m].is_none())
                .collect();
            let work = todo.len() * len * x.p() * levels;
            fill(&mut self.estimated, &todo, intervals, work, |iv| {
                lambda.scan(x, iv.s, iv.e, ScanMode::Full)
            });
            let mut pick: Option<(usize, Best)> = None;
            for &m in &hits {
                let b = self.estimated[m].expect("filled above");
                if pick.is_none_or(|(_, cur)| b.value > cur.value) {
                    pick = Some((m, b));
                }
            }
            return pick.map(|(m, b)| (intervals[m], b));
        }
        None
    }
}

/// Keeps the `top_k` changepoints with the largest scores, in position order.
pub fn significance_rank(result: &DetectionResult, top_k: usize) -> DetectionResult {
    let mut ranked = result.changepoints.clone();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.position.cmp(&b.position))
    });
    ranked.truncate(top_k);
    ranked.sort_by_key(|c| c.position);
    DetectionResult {
        changepoints: ranked,
    }
}
