//! Replicated simulation experiments for single- and multiple-change designs.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate_gamma, estimate_sigma, normalize, CalibratedGamma, CalibrationOptions};
use crate::detect::{esac, estimate_single, EsacConfig, Variant};
use crate::error::{Error, Result};
use crate::intervals::generate as seeded_intervals;
use crate::rng::{stream_rng, GENERATOR};
use crate::simulate::{
    draw_locations, generate, hausdorff, spacings, stream_id, Direction, NoiseModel, SignalScale,
    SimulationSpec,
};
use crate::stats::{DataMatrix, NEff, PenaltyTable, RateContext};

/// Stream role for experiment-level layout draws (locations and sparsities).
pub const ROLE_LAYOUT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `k` uniform on `1..=floor(sqrt(p log n))`.
    Sparse,
    /// `k` uniform on `ceil(sqrt(p log n))..=p`.
    Dense,
    /// Sparse or dense with equal probability, per change.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SparsityChoice {
    Fixed(usize),
    Random(Regime),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// One change at `eta`, located by the single-change estimator.
    Single {
        n: usize,
        p: usize,
        eta: usize,
        k: SparsityChoice,
        c: f64,
    },
    /// `j` changes at uniformly drawn locations, found by the recursion.
    Multiple {
        n: usize,
        p: usize,
        j: usize,
        regime: Regime,
        c: f64,
    },
}

impl Design {
    pub fn n(&self) -> usize {
        match *self {
            Design::Single { n, .. } | Design::Multiple { n, .. } => n,
        }
    }

    pub fn p(&self) -> usize {
        match *self {
            Design::Single { p, .. } | Design::Multiple { p, .. } => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GammaSource {
    /// `lambda_tilde`.
    #[default]
    Analytic,
    /// Monte Carlo three-segment penalty; `epsilon` defaults to `1 / mc_n`.
    Calibrated {
        mc_n: usize,
        #[serde(default)]
        epsilon: Option<f64>,
        seed: u64,
    },
}

fn default_alpha() -> f64 {
    1.5
}

fn default_k() -> usize {
    4
}

fn default_scale() -> SignalScale {
    SignalScale::Additive
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: Design,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub direction: Direction,
    /// Defaults to the additive rate, which reproduces the change sizes of
    /// the standard simulation designs.
    #[serde(default = "default_scale")]
    pub scale: SignalScale,
    #[serde(default)]
    pub n_eff: NEff,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default)]
    pub gamma: GammaSource,
    /// Record wall-clock times; off by default so reports are reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(design: Design, replicates: usize, seed: u64) -> Self {
        Self {
            design,
            replicates,
            seed,
            noise: NoiseModel::default(),
            direction: Direction::default(),
            scale: default_scale(),
            n_eff: NEff::default(),
            alpha: default_alpha(),
            k: default_k(),
            variant: Variant::default(),
            normalize: true,
            gamma: GammaSource::default(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub truth: Vec<usize>,
    pub sparsities: Vec<usize>,
    pub estimates: Vec<usize>,
    pub hausdorff: f64,
    pub abs_j_err: usize,
    /// Correct count and every estimate within half its spacing.
    pub localized: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub millis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_ms: f64,
    pub median_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub generator: String,
    /// Mean squared location error (single-change designs).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mse: Option<f64>,
    pub hausdorff: f64,
    pub abs_j_err: f64,
    pub localized_rate: f64,
    pub hausdorff_convention: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub calibration: Option<CalibratedGamma>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<TimingStats>,
    pub records: Vec<ReplicateRecord>,
}

fn sparse_bound(n: usize, p: usize) -> f64 {
    (p as f64 * (n as f64).ln()).sqrt()
}

/// Draws a sparsity from `regime`.
pub fn draw_sparsity(regime: Regime, n: usize, p: usize, rng: &mut ChaCha8Rng) -> usize {
    let bound = sparse_bound(n, p);
    let sparse_hi = (bound.floor() as usize).clamp(1, p);
    let dense_lo = (bound.ceil() as usize).clamp(1, p);
    let regime = match regime {
        Regime::Mixed if rng.random::<bool>() => Regime::Sparse,
        Regime::Mixed => Regime::Dense,
        r => r,
    };
    match regime {
        Regime::Sparse => rng.random_range(1..=sparse_hi),
        _ => rng.random_range(dense_lo..=p),
    }
}

struct Prepared {
    ctx: RateContext,
    esac_cfg: EsacConfig,
    lambda: PenaltyTable,
    set: crate::intervals::SeededIntervalSet,
    calibration: Option<CalibratedGamma>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (n, p) = (cfg.design.n(), cfg.design.p());
    let ctx = RateContext::new(n, p, cfg.n_eff)?;
    let set = seeded_intervals(n, cfg.alpha, cfg.k)?;
    let mut esac_cfg = EsacConfig::new(&ctx)?.with_variant(cfg.variant);
    esac_cfg.alpha = cfg.alpha;
    esac_cfg.k = cfg.k;
    let lambda = esac_cfg.lambda.clone();
    let mut calibration = None;
    if let (Design::Multiple { .. }, GammaSource::Calibrated { mc_n, epsilon, seed }) = (&cfg.design, cfg.gamma) {
        let opts = CalibrationOptions {
            mc_n,
            epsilon: epsilon.unwrap_or(1.0 / mc_n as f64),
            seed,
            scan_mode: esac_cfg.scan_mode(),
            normalize: cfg.normalize,
        };
        let cal = calibrate_gamma(&ctx, &set, &opts)?;
        esac_cfg.gamma = cal.table(&ctx)?;
        calibration = Some(cal);
    }
    Ok(Prepared {
        ctx,
        esac_cfg,
        lambda,
        set,
        calibration,
    })
}

fn preprocess(x: DataMatrix, on: bool) -> Result<DataMatrix> {
    if on {
        normalize(&x, &estimate_sigma(&x)?)
    } else {
        Ok(x)
    }
}

/// The simulation spec of replicate `r`, with its layout drawn from the
/// replicate's own stream.
pub fn replicate_spec(cfg: &ExperimentConfig, r: u64) -> Result<SimulationSpec> {
    let (n, p) = (cfg.design.n(), cfg.design.p());
    let mut layout = stream_rng(cfg.seed, stream_id(r, ROLE_LAYOUT));
    let (truth, sparsities, c) = match cfg.design {
        Design::Single { eta, k, c, .. } => {
            let k = match k {
                SparsityChoice::Fixed(k) => k,
                SparsityChoice::Random(regime) => draw_sparsity(regime, n, p, &mut layout),
            };
            (vec![eta], vec![k], c)
        }
        Design::Multiple { j, regime, c, .. } => {
            let locs = draw_locations(n, j, &mut layout)?;
            let ks = (0..j).map(|_| draw_sparsity(regime, n, p, &mut layout)).collect();
            (locs, ks, c)
        }
    };
    let spec = SimulationSpec {
        n,
        p,
        changepoints: truth,
        sparsities,
        direction: cfg.direction,
        c,
        noise: cfg.noise,
        sigma: 1.0,
        n_eff: cfg.n_eff,
        scale: cfg.scale,
        seed: cfg.seed,
        replicate: r,
    };
    spec.validate()?;
    Ok(spec)
}

fn run_replicate(cfg: &ExperimentConfig, prep: &Prepared, r: u64) -> Result<ReplicateRecord> {
    let n = prep.ctx.n();
    let spec = replicate_spec(cfg, r)?;
    let (x, _) = generate(&spec)?;
    let started = Instant::now();
    let x = preprocess(x, cfg.normalize)?;
    let estimates = match cfg.design {
        Design::Single { .. } => vec![estimate_single(&x, &prep.lambda)?.0],
        Design::Multiple { .. } => esac(&x, &prep.esac_cfg, &prep.set)?.positions(),
    };
    let millis = cfg
        .timing
        .then(|| started.elapsed().as_secs_f64() * 1e3);
    let SimulationSpec {
        changepoints: truth,
        sparsities,
        ..
    } = spec;
    let deltas = spacings(&truth, n);
    let localized = estimates.len() == truth.len()
        && estimates
            .iter()
            .zip(&truth)
            .zip(&deltas)
            .all(|((&e, &t), &d)| 2 * e.abs_diff(t) <= d);
    Ok(ReplicateRecord {
        replicate: r,
        hausdorff: hausdorff(&estimates, &truth, n),
        abs_j_err: estimates.len().abs_diff(truth.len()),
        truth,
        sparsities,
        estimates,
        localized,
        millis,
    })
}

/// Runs every replicate of `cfg` and aggregates the metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    if cfg.replicates == 0 {
        return Err(Error::SpecInvalid("need at least one replicate".into()));
    }
    if let Design::Single { n, eta, .. } = cfg.design {
        if eta == 0 || eta >= n {
            return Err(Error::SpecInvalid(format!("eta={eta} outside (0, {n})")));
        }
    }
    let prep = prepare(cfg)?;
    let records = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &prep, r))
        .collect::<Result<Vec<_>>>()?;

    let count = records.len() as f64;
    let mean = |f: &dyn Fn(&ReplicateRecord) -> f64| records.iter().map(f).sum::<f64>() / count;
    let mse = match cfg.design {
        Design::Single { eta, .. } => Some(mean(&|r| {
            let d = r.estimates[0] as f64 - eta as f64;
            d * d
        })),
        Design::Multiple { .. } => None,
    };
    let timing = cfg.timing.then(|| {
        let mut ms: Vec<f64> = records.iter().filter_map(|r| r.millis).collect();
        ms.sort_by(f64::total_cmp);
        let mid = ms.len() / 2;
        let median_ms = if ms.len() % 2 == 1 {
            ms[mid]
        } else {
            0.5 * (ms[mid - 1] + ms[mid])
        };
        TimingStats {
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            median_ms,
        }
    });
    Ok(MetricsReport {
        config: cfg.clone(),
        generator: GENERATOR.to_string(),
        mse,
        hausdorff: mean(&|r| r.hausdorff),
        abs_j_err: mean(&|r| r.abs_j_err as f64),
        localized_rate: mean(&|r| if r.localized { 1.0 } else { 0.0 }),
        hausdorff_convention: "0 when both sets are empty; n when exactly one is empty".into(),
        calibration: prep.calibration,
        timing,
        records,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::BadParams(e.to_string()))
    }

    /// One-row aligned table with the usual column names.
    pub fn text_table(&self) -> String {
        let (n, p) = (self.config.design.n(), self.config.design.p());
        let setting = match &self.config.design {
            Design::Single { k, .. } => match k {
                SparsityChoice::Fixed(k) => format!("k={k}"),
                SparsityChoice::Random(r) => format!("{r:?}").to_lowercase(),
            },
            Design::Multiple { j, regime, .. } => {
                format!("J={j} {}", format!("{regime:?}").to_lowercase())
            }
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>14} {:>10} {:>20} {:>12} {:>10}",
            "n", "p", "setting", "MSE", "Hausdorff distance", "|J_hat - J|", "time (ms)"
        );
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>14} {:>10} {:>20} {:>12} {:>10}",
            n,
            p,
            setting,
            fmt(self.mse),
            fmt(Some(self.hausdorff)),
            format!("{:.3}", self.abs_j_err),
            fmt(self.timing.as_ref().map(|t| t.mean_ms)),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsity_ranges() {
        let mut rng = stream_rng(3, 0);
        let bound = sparse_bound(200, 100);
        for _ in 0..200 {
            let k = draw_sparsity(Regime::Sparse, 200, 100, &mut rng);
            assert!(k >= 1 && (k as f64) <= bound);
            let k = draw_sparsity(Regime::Dense, 200, 100, &mut rng);
            assert!((k as f64) >= bound && k <= 100);
        }
    }

    #[test]
    fn small_experiment_is_reproducible() {
        let design = Design::Multiple {
            n: 60,
            p: 5,
            j: 1,
            regime: Regime::Dense,
            c: 12.25,
        };
        let cfg = ExperimentConfig::new(design, 4, 9);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.records.len(), 4);
        assert!(a.text_table().contains("Hausdorff distance"));
    }

    #[test]
    fn single_design_reports_mse() {
        let design = Design::Single {
            n: 50,
            p: 4,
            eta: 10,
            k: SparsityChoice::Fixed(4),
            c: 100.0,
        };
        let report = run_experiment(&ExperimentConfig::new(design, 3, 1)).unwrap();
        let mse = report.mse.unwrap();
        assert!(mse >= 0.0);
        assert_eq!(report.abs_j_err, 0.0);
    }

    #[test]
    fn config_json_defaults() {
        let text = r#"{"design":{"kind":"single","n":200,"p":100,"eta":40,"k":"sparse","c":6.25},"replicates":10,"seed":1}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert!(cfg.normalize);
        assert_eq!(cfg.alpha, 1.5);
        assert_eq!(cfg.gamma, GammaSource::Analytic);
        assert!(matches!(
            cfg.design,
            Design::Single { k: SparsityChoice::Random(Regime::Sparse), .. }
        ));
    }
}
