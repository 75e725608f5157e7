//! Synthetic panels with planted mean changes, misspecified noise models,
//! and evaluation metrics.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::stats::{DataMatrix, NEff, RateContext};

/// Stream role for design randomness (locations, sparsities, directions).
pub const ROLE_DESIGN: u64 = 0;
/// Stream role for noise.
pub const ROLE_NOISE: u64 = 1;

/// Stream index for `role` within `replicate`.
pub fn stream_id(replicate: u64, role: u64) -> u64 {
    (replicate << 8) | role
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Independent Gaussian noise.
    #[default]
    M0,
    /// Uniform on `(-sqrt 3, sqrt 3)`.
    Unif,
    /// Student t with `d > 2` degrees of freedom, standardized.
    StudentT { d: f64 },
    /// Gaussian with correlation `rho^|i-j|` between series.
    CsLoc { rho: f64 },
    /// Gaussian with covariance `(1 - rho) I + (rho / p) 1 1'`.
    Cs { rho: f64 },
    /// `W_v = sqrt(rho) Z_v + sqrt(1 - rho) W_{v-1}`.
    Temp { rho: f64 },
    /// Each series changes at a time shifted uniformly within half the
    /// spacing around the nominal changepoint.
    Async,
    /// Linear ramp across half the spacing on each side of the changepoint.
    Gradual,
}

impl NoiseModel {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::StudentT { d } if !(d > 2.0 && d.is_finite()) => Err(Error::SpecInvalid(
                format!("Student t needs more than 2 degrees of freedom, got {d}"),
            )),
            NoiseModel::CsLoc { rho } if !(rho.abs() < 1.0) => Err(Error::SpecInvalid(format!(
                "local correlation must lie in (-1, 1), got {rho}"
            ))),
            NoiseModel::Cs { rho } | NoiseModel::Temp { rho } if !(0.0..=1.0).contains(&rho) => {
                Err(Error::SpecInvalid(format!("rho must lie in [0, 1], got {rho}")))
            }
            NoiseModel::Temp { rho } if rho == 0.0 => {
                Err(Error::SpecInvalid("temporal rho must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Shape of a change vector on its support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Equal magnitudes with random signs.
    #[default]
    Signs,
    /// Independent Gaussian entries.
    Gaussian,
}

/// Rate used to set the squared norm of each change vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignalScale {
    /// `r(k)` under the configured effective sample size.
    #[default]
    Rate,
    /// `k log(e p log n / k^2) + log n` for `k < sqrt(p log n)`, otherwise
    /// `sqrt(p log n)`, with the actual `n`.
    Additive,
}

/// `Additive` signal rate for sparsity `k`.
pub fn additive_rate(n: usize, p: usize, k: usize) -> f64 {
    let l = (n as f64).ln();
    let kf = k as f64;
    let dense = (p as f64 * l).sqrt();
    if kf >= dense {
        dense
    } else {
        kf * (std::f64::consts::E * p as f64 * l / (kf * kf)).ln() + l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    /// Ascending changepoints in `(0, n)`.
    pub changepoints: Vec<usize>,
    /// Sparsity of each change.
    pub sparsities: Vec<usize>,
    #[serde(default)]
    pub direction: Direction,
    /// Constant `c` in `Delta_j * phi_j^2 = c * rate(k_j)`.
    pub c: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    pub sigma: f64,
    #[serde(default)]
    pub n_eff: NEff,
    #[serde(default)]
    pub scale: SignalScale,
    pub seed: u64,
    #[serde(default)]
    pub replicate: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::SpecInvalid(format!(
                "need n >= 2 and p >= 1, got n={}, p={}",
                self.n, self.p
            )));
        }
        if self.sparsities.len() != self.changepoints.len() {
            return Err(Error::SpecInvalid(format!(
                "{} sparsities for {} changepoints",
                self.sparsities.len(),
                self.changepoints.len()
            )));
        }
        let mut prev = 0;
        for &eta in &self.changepoints {
            if eta <= prev || eta >= self.n {
                return Err(Error::SpecInvalid(format!(
                    "changepoints must increase strictly within (0, {}), got {:?}",
                    self.n, self.changepoints
                )));
            }
            prev = eta;
        }
        if let Some(&k) = self.sparsities.iter().find(|&&k| k == 0 || k > self.p) {
            return Err(Error::SpecInvalid(format!(
                "sparsity {k} outside [1, {}]",
                self.p
            )));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::SpecInvalid(format!("c must be nonnegative, got {}", self.c)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::SpecInvalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        self.noise.validate()
    }

    /// Spacing `min(eta_j - eta_{j-1}, eta_{j+1} - eta_j)` of each change.
    pub fn spacings(&self) -> Vec<usize> {
        spacings(&self.changepoints, self.n)
    }

    fn rate(&self, k: usize) -> Result<f64> {
        match self.scale {
            SignalScale::Rate => RateContext::new(self.n, self.p, self.n_eff)?.rate_r(k),
            SignalScale::Additive => Ok(additive_rate(self.n, self.p, k)),
        }
    }
}

/// Spacings of ascending changepoints in `(0, n)`.
pub fn spacings(changepoints: &[usize], n: usize) -> Vec<usize> {
    (0..changepoints.len())
        .map(|j| {
            let prev = if j == 0 { 0 } else { changepoints[j - 1] };
            let next = changepoints.get(j + 1).copied().unwrap_or(n);
            (changepoints[j] - prev).min(next - changepoints[j])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub changepoints: Vec<usize>,
    pub spacings: Vec<usize>,
    /// Change vectors, one of length `p` per changepoint.
    pub thetas: Vec<Vec<f64>>,
}

fn change_vector(p: usize, k: usize, norm: f64, direction: Direction, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut theta = vec![0.0; p];
    match direction {
        Direction::Signs => {
            let mag = norm / (k as f64).sqrt();
            for x in theta.iter_mut().take(k) {
                *x = if rng.random::<bool>() { mag } else { -mag };
            }
        }
        Direction::Gaussian => {
            for x in theta.iter_mut().take(k) {
                *x = StandardNormal.sample(rng);
            }
            let len = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 0.0 {
                theta.iter_mut().for_each(|x| *x *= norm / len);
            } else {
                theta[0] = norm;
            }
        }
    }
    theta
}

/// Time-major noise of unit marginal variance (before `sigma` scaling).
fn noise(model: NoiseModel, n: usize, p: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut w = vec![0.0; n * p];
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    match model {
        NoiseModel::M0 | NoiseModel::Async | NoiseModel::Gradual => {
            w.iter_mut().for_each(|x| *x = gauss(rng));
        }
        NoiseModel::Unif => {
            let r = 3f64.sqrt();
            let u = Uniform::new(-r, r).map_err(|e| Error::SpecInvalid(e.to_string()))?;
            w.iter_mut().for_each(|x| *x = u.sample(rng));
        }
        NoiseModel::StudentT { d } => {
            let t = StudentT::new(d).map_err(|e| Error::SpecInvalid(e.to_string()))?;
            let sd = (d / (d - 2.0)).sqrt();
            w.iter_mut().for_each(|x| *x = t.sample(rng) / sd);
        }
        NoiseModel::CsLoc { rho } => {
            let innov = (1.0 - rho * rho).sqrt();
            for row in w.chunks_mut(p) {
                let mut prev = gauss(rng);
                row[0] = prev;
                for x in row.iter_mut().skip(1) {
                    prev = rho * prev + innov * gauss(rng);
                    *x = prev;
                }
            }
        }
        NoiseModel::Cs { rho } => {
            let own = (1.0 - rho).sqrt();
            let common = (rho / p as f64).sqrt();
            for row in w.chunks_mut(p) {
                let g = gauss(rng);
                row.iter_mut().for_each(|x| *x = own * gauss(rng) + common * g);
            }
        }
        NoiseModel::Temp { rho } => {
            let fresh = rho.sqrt();
            let carry = (1.0 - rho).sqrt();
            for i in 0..p {
                w[i] = gauss(rng);
            }
            for t in 1..n {
                for i in 0..p {
                    w[t * p + i] = fresh * gauss(rng) + carry * w[(t - 1) * p + i];
                }
            }
        }
    }
    Ok(w)
}

/// Draws one data set from `spec`.
pub fn generate(spec: &SimulationSpec) -> Result<(DataMatrix, Truth)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut design = stream_rng(spec.seed, stream_id(spec.replicate, ROLE_DESIGN));
    let mut noise_rng = stream_rng(spec.seed, stream_id(spec.replicate, ROLE_NOISE));
    let deltas = spec.spacings();

    let mut thetas = Vec::with_capacity(spec.changepoints.len());
    for (&k, &delta) in spec.sparsities.iter().zip(&deltas) {
        let norm = (spec.c * spec.rate(k)? / delta as f64).sqrt();
        thetas.push(change_vector(p, k, norm, spec.direction, &mut design));
    }

    let mut values = noise(spec.noise, n, p, &mut noise_rng)?;
    values.iter_mut().for_each(|x| *x *= spec.sigma);

    for ((&eta, &delta), theta) in spec.changepoints.iter().zip(&deltas).zip(&thetas) {
        let half = delta / 2;
        for (i, &th) in theta.iter().enumerate() {
            if th == 0.0 {
                continue;
            }
            // Time points are 1-based: row t holds time t + 1.
            match spec.noise {
                NoiseModel::Gradual => {
                    let lo = eta - half;
                    let width = (2 * half + 1) as f64;
                    for t in lo..n {
                        let frac = ((t + 1 - lo) as f64 / width).min(1.0);
                        values[t * p + i] += th * frac;
                    }
                }
                NoiseModel::Async => {
                    let shift = design.random_range(0..=2 * half) as isize - half as isize;
                    let start = (eta as isize + shift).clamp(0, n as isize) as usize;
                    for t in start..n {
                        values[t * p + i] += th;
                    }
                }
                _ => {
                    for t in eta..n {
                        values[t * p + i] += th;
                    }
                }
            }
        }
    }

    let x = DataMatrix::from_time_major(p, n, values)?;
    Ok((
        x,
        Truth {
            changepoints: spec.changepoints.clone(),
            spacings: deltas,
            thetas,
        },
    ))
}

/// Ordered changepoints drawn uniformly without replacement from `1..n`.
pub fn draw_locations(n: usize, j: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if j > n.saturating_sub(1) {
        return Err(Error::SpecInvalid(format!(
            "cannot place {j} changepoints in (0, {n})"
        )));
    }
    let mut locs: Vec<usize> = sample(rng, n - 1, j).into_iter().map(|x| x + 1).collect();
    locs.sort_unstable();
    Ok(locs)
}

/// Mean squared error of estimates around a true location.
pub fn mse(estimates: &[usize], truth: usize) -> f64 {
    if estimates.is_empty() {
        return 0.0;
    }
    let total: f64 = estimates
        .iter()
        .map(|&e| {
            let d = e as f64 - truth as f64;
            d * d
        })
        .sum();
    total / estimates.len() as f64
}

fn dist_to(x: usize, set: &[usize]) -> usize {
    set.iter().map(|&y| x.abs_diff(y)).min().unwrap_or(usize::MAX)
}

/// Hausdorff distance between changepoint sets; 0 if both are empty and
/// `n` if exactly one is.
pub fn hausdorff(a: &[usize], b: &[usize], n: usize) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => n as f64,
        _ => {
            let ab = a.iter().map(|&x| dist_to(x, b)).max().unwrap_or(0);
            let ba = b.iter().map(|&x| dist_to(x, a)).max().unwrap_or(0);
            ab.max(ba) as f64
        }
    }
}
