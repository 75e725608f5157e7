use std::fs;
use std::path::Path;

use esac_core::{
    calibrate_gamma, esac, estimate_sigma, normalize, replicate_spec, run_experiment,
    seeded_intervals, significance_rank, simulate as generate, CalibratedGamma, CalibrationOptions,
    DataMatrix, Design, EsacConfig, ExperimentConfig, GammaSource, NEff, RateContext, SigmaEstimate,
    SparsityChoice, Variant,
};
use serde_json::{json, Value};

use crate::io::{emit, read_matrix, write_matrix};
use crate::{
    CalibrateArgs, CliError, DesignArg, DetectArgs, IntervalArgs, ScanArgs, SimulateArgs, SingleArgs,
};

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn preprocess(x: DataMatrix, on: bool) -> Result<(DataMatrix, SigmaEstimate), CliError> {
    if on {
        let sig = estimate_sigma(&x)?;
        Ok((normalize(&x, &sig)?, sig))
    } else {
        let sig = SigmaEstimate::known(vec![1.0; x.p()])?;
        Ok((x, sig))
    }
}

fn scan_config(scan: &ScanArgs, ctx: &RateContext) -> Result<EsacConfig, CliError> {
    let mut cfg = EsacConfig::new(ctx)?.with_variant(scan.variant.into());
    cfg.alpha = scan.alpha;
    cfg.k = scan.k;
    Ok(cfg)
}

fn load_calibration(path: &Path) -> Result<CalibratedGamma, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    CalibratedGamma::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Checks the settings a calibrated table depends on beyond `n`, `p` and the
/// grid, which the table itself verifies.
fn check_calibration(cal: &CalibratedGamma, cfg: &EsacConfig, n_eff: NEff) -> Result<(), CliError> {
    let mut diffs = Vec::new();
    if cal.alpha != cfg.alpha {
        diffs.push(format!("alpha {} vs {}", cal.alpha, cfg.alpha));
    }
    if cal.k != cfg.k {
        diffs.push(format!("K {} vs {}", cal.k, cfg.k));
    }
    if cal.scan_mode != cfg.scan_mode() {
        diffs.push(format!("scan mode {:?} vs {:?}", cal.scan_mode, cfg.scan_mode()));
    }
    if cal.n_eff != n_eff {
        diffs.push(format!("n_eff {:?} vs {:?}", cal.n_eff, n_eff));
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Mismatch(format!("calibrated table differs: {}", diffs.join(", "))))
    }
}

pub fn detect(a: &DetectArgs, seed: u64) -> Result<(), CliError> {
    let x = read_matrix(&a.input)?;
    let (n, p) = (x.n(), x.p());
    let n_eff: NEff = a.scan.n_eff.into();
    let ctx = RateContext::new(n, p, n_eff)?;
    let mut cfg = scan_config(&a.scan, &ctx)?;
    let penalty = if a.penalty == "analytic" {
        json!({"source": "analytic"})
    } else {
        let cal = load_calibration(Path::new(&a.penalty))?;
        check_calibration(&cal, &cfg, n_eff)?;
        cfg.gamma = cal.table(&ctx)?;
        json!({"source": "calibrated", "path": a.penalty, "table": cal})
    };
    let (x, sig) = preprocess(x, !a.scan.no_normalize)?;
    let set = seeded_intervals(n, cfg.alpha, cfg.k)?;
    let mut found = esac(&x, &cfg, &set)?;
    if let Some(top) = a.top_k {
        found = significance_rank(&found, top);
    }
    let changepoints: Vec<Value> = found
        .changepoints
        .iter()
        .map(|c| {
            json!({
                "position": c.position,
                "interval": [c.interval.s, c.interval.e],
                "score": c.score,
                "sparsity": c.sparsity,
            })
        })
        .collect();
    let out = json!({
        "n": n,
        "p": p,
        "changepoints": changepoints,
        "sigma": sig.per_series,
        "config": {
            "input": a.input,
            "seed": seed,
            "alpha": cfg.alpha,
            "K": cfg.k,
            "variant": cfg.variant,
            "n_eff": n_eff,
            "normalize": !a.scan.no_normalize,
            "top_k": a.top_k,
            "penalty": penalty,
            "gamma": cfg.gamma.penalties(),
            "lambda": cfg.lambda.penalties(),
            "grid": ctx.grid(),
        },
    });
    emit(a.output.as_deref(), &pretty(&out))
}

pub fn estimate_single(a: &SingleArgs, seed: u64) -> Result<(), CliError> {
    let x = read_matrix(&a.input)?;
    let (n, p) = (x.n(), x.p());
    let n_eff: NEff = a.n_eff.into();
    let ctx = RateContext::new(n, p, n_eff)?;
    let lambda = EsacConfig::new(&ctx)?.lambda;
    let (x, sig) = preprocess(x, !a.no_normalize)?;
    let (position, score) = esac_core::estimate_single(&x, &lambda)?;
    let out = json!({
        "n": n,
        "p": p,
        "position": position,
        "score": score.value,
        "sparsity": score.best_t,
        "sigma": sig.per_series,
        "config": {
            "input": a.input,
            "seed": seed,
            "n_eff": n_eff,
            "normalize": !a.no_normalize,
            "lambda": lambda.penalties(),
            "grid": ctx.grid(),
        },
    });
    emit(a.output.as_deref(), &pretty(&out))
}

pub fn intervals(a: &IntervalArgs) -> Result<(), CliError> {
    let set = seeded_intervals(a.n, a.alpha, a.k)?;
    let lines: Vec<String> = set
        .intervals()
        .iter()
        .map(|iv| json!({"s": iv.s, "e": iv.e}).to_string())
        .collect();
    emit(a.output.as_deref(), &lines.join("\n"))
}

pub fn calibrate(a: &CalibrateArgs, seed: u64) -> Result<(), CliError> {
    let (n, p) = match &a.input {
        Some(path) => {
            let x = read_matrix(path)?;
            (x.n(), x.p())
        }
        None => (a.n.unwrap_or_default(), a.p.unwrap_or_default()),
    };
    let ctx = RateContext::new(n, p, a.scan.n_eff.into())?;
    let cfg = scan_config(&a.scan, &ctx)?;
    let set = seeded_intervals(n, cfg.alpha, cfg.k)?;
    let opts = CalibrationOptions {
        mc_n: a.mc_n,
        epsilon: a.epsilon,
        seed,
        scan_mode: cfg.scan_mode(),
        normalize: !a.scan.no_normalize,
    };
    let cal = calibrate_gamma(&ctx, &set, &opts)?;
    emit(a.output.as_deref(), &cal.to_json()?)
}

fn experiment_config(a: &SimulateArgs, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        return Ok(cfg);
    }
    let seed = seed.unwrap_or(0);
    let design = match a.design {
        DesignArg::Single => Design::Single {
            n: a.n,
            p: a.p,
            eta: a.eta,
            k: SparsityChoice::Fixed(a.sparsity),
            c: a.c,
        },
        DesignArg::Multiple => Design::Multiple {
            n: a.n,
            p: a.p,
            j: a.j,
            regime: a.regime.into(),
            c: a.c,
        },
    };
    let mut cfg = ExperimentConfig::new(design, a.reps, seed);
    cfg.n_eff = a.scan.n_eff.into();
    cfg.alpha = a.scan.alpha;
    cfg.k = a.scan.k;
    cfg.variant = Variant::from(a.scan.variant);
    cfg.normalize = !a.scan.no_normalize;
    cfg.timing = a.timing;
    if a.calibrated {
        cfg.gamma = GammaSource::Calibrated {
            mc_n: a.mc_n,
            epsilon: a.epsilon,
            seed: seed.wrapping_add(1),
        };
    }
    Ok(cfg)
}

pub fn simulate(a: &SimulateArgs, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = experiment_config(a, seed)?;
    if let Some(path) = &a.data {
        let spec = replicate_spec(&cfg, a.replicate)?;
        let (x, truth) = generate(&spec)?;
        write_matrix(path, &x)?;
        let out = json!({"spec": spec, "truth": truth, "data": path});
        return emit(a.output.as_deref(), &pretty(&out));
    }
    let report = run_experiment(&cfg)?;
    if a.table {
        eprintln!("{}", report.text_table());
    }
    emit(a.output.as_deref(), &report.to_json()?)
}
