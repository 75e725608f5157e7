use std::time::Instant;

use esac_core::{
    esac, seeded_intervals, simulate, DataMatrix, Direction, EsacConfig, NEff, NoiseModel, RateContext,
    SignalScale, SimulationSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::io::emit;
use crate::{BenchArgs, CliError};

#[derive(Serialize)]
struct Cell {
    n: usize,
    p: usize,
    case: &'static str,
    seconds: f64,
    detected: usize,
}

fn null_data(n: usize, p: usize, seed: u64) -> Result<DataMatrix, CliError> {
    let spec = SimulationSpec {
        n,
        p,
        changepoints: vec![],
        sparsities: vec![],
        direction: Direction::Signs,
        c: 0.0,
        noise: NoiseModel::M0,
        sigma: 1.0,
        n_eff: NEff::N4,
        scale: SignalScale::Rate,
        seed,
        replicate: 0,
    };
    Ok(simulate(&spec)?.0)
}

/// Large alternating jumps in every series: a change at every time point.
fn alternating(n: usize, p: usize) -> Result<DataMatrix, CliError> {
    let values = (0..n * p)
        .map(|idx| if (idx / p) % 2 == 0 { 0.0 } else { 100.0 })
        .collect();
    Ok(DataMatrix::from_time_major(p, n, values)?)
}

fn time(x: &DataMatrix, reps: usize, case: &'static str) -> Result<Cell, CliError> {
    let (n, p) = (x.n(), x.p());
    let ctx = RateContext::new(n, p, NEff::N4)?;
    let cfg = EsacConfig::new(&ctx)?;
    let set = seeded_intervals(n, cfg.alpha, cfg.k)?;
    let mut times = Vec::with_capacity(reps);
    let mut detected = 0;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        detected = esac(x, &cfg, &set)?.len();
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_unstable_by(f64::total_cmp);
    Ok(Cell {
        n,
        p,
        case,
        seconds: times[times.len() / 2],
        detected,
    })
}

/// Least-squares slope of log time against log size.
fn exponent(cells: &[&Cell], size: impl Fn(&Cell) -> usize) -> Option<f64> {
    if cells.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| ((size(c) as f64).ln(), c.seconds.max(1e-9).ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn ratios(cells: &[&Cell]) -> Vec<f64> {
    cells.windows(2).map(|w| w[1].seconds / w[0].seconds).collect()
}

pub fn run(a: &BenchArgs, seed: u64) -> Result<(), CliError> {
    let mut by_n = Vec::new();
    for &n in &a.ns {
        by_n.push(time(&null_data(n, a.base_p, seed)?, a.reps, "null")?);
    }
    let mut by_p = Vec::new();
    for &p in &a.ps {
        by_p.push(time(&null_data(a.base_n, p, seed)?, a.reps, "null")?);
    }
    let best = time(&alternating(a.base_n, a.base_p)?, a.reps, "best")?;
    let n_cells: Vec<&Cell> = by_n.iter().collect();
    let p_cells: Vec<&Cell> = by_p.iter().collect();
    let out = json!({
        "config": {
            "seed": seed,
            "ns": a.ns,
            "ps": a.ps,
            "base_n": a.base_n,
            "base_p": a.base_p,
            "reps": a.reps,
            "threads": rayon::current_num_threads(),
        },
        "cells": by_n.iter().chain(&by_p).chain([&best]).collect::<Vec<_>>(),
        "exponent_n": exponent(&n_cells, |c| c.n),
        "exponent_p": exponent(&p_cells, |c| c.p),
        "ratios_n": ratios(&n_cells),
        "ratios_p": ratios(&p_cells),
    });
    emit(a.output.as_deref(), &serde_json::to_string_pretty(&out).expect("json values serialize"))
}
