#![allow(dead_code)]

use esac_core::{DataMatrix, PenaltyTable};

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = rule(fa, flm, fm, a, m);
        let right = rule(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    recurse(f, a, b, fa, fm, fb, rule(fa, fm, fb, a, b), tol, 50)
}

/// `E(Z^2 | |Z| >= a)` by quadrature of the tail integrals after shifting to
/// `a` and factoring out `exp(-a^2/2)`.
pub fn nu_quadrature(a: f64) -> f64 {
    // Tail integrand ratio: z = a + u, weight exp(-a u - u^2 / 2).
    let upper = if a > 0.0 { (80.0 / a).min(12.0) } else { 12.0 };
    let weight = |u: f64| (-a * u - 0.5 * u * u).exp();
    let num = simpson(&|u| (a + u) * (a + u) * weight(u), 0.0, upper, 1e-14);
    let den = simpson(&|u| weight(u), 0.0, upper, 1e-14);
    num / den
}

/// CUSUM of one series by direct summation, 0-based data, 1-based times.
pub fn cusum_direct(series: &[f64], s: usize, e: usize, v: usize) -> f64 {
    let len = (e - s) as f64;
    let (l, r) = ((v - s) as f64, (e - v) as f64);
    let left: f64 = series[s..v].iter().sum();
    let right: f64 = series[v..e].iter().sum();
    (r / (len * l)).sqrt() * left - (l / (len * r)).sqrt() * right
}

/// Inner product of the series with the CUSUM contrast vector.
pub fn cusum_inner(series: &[f64], s: usize, e: usize, v: usize) -> f64 {
    let len = (e - s) as f64;
    let (l, r) = ((v - s) as f64, (e - v) as f64);
    let plus = (r / (len * l)).sqrt();
    let minus = -(l / (len * r)).sqrt();
    (s..e)
        .map(|t| series[t] * if t < v { plus } else { minus })
        .sum()
}

/// CUSUM of a noiseless step of height `theta` after `eta`, when
/// `s < eta < e`.
pub fn population_cusum(s: usize, e: usize, v: usize, eta: usize, theta: f64) -> f64 {
    let len = (e - s) as f64;
    let (vs, ev) = ((v - s) as f64, (e - v) as f64);
    if v <= eta {
        -theta * (e - eta) as f64 * (vs / (len * ev)).sqrt()
    } else {
        -theta * (eta - s) as f64 * (ev / (len * vs)).sqrt()
    }
}

/// Penalized score by a double loop over levels and series.
pub fn naive_score(x: &DataMatrix, s: usize, e: usize, v: usize, table: &PenaltyTable) -> (f64, usize) {
    let rows = x.rows();
    let mut best = (f64::NEG_INFINITY, 0);
    for entry in table.entries() {
        let mut total = -entry.penalty;
        for row in &rows {
            let c = cusum_direct(row, s, e, v);
            if c.abs() >= entry.a {
                total += c * c - entry.nu;
            }
        }
        if total > best.0 {
            best = (total, entry.t);
        }
    }
    best
}

/// Smallest-`v` maximum of the naive score over `s < v < e`.
pub fn naive_scan(x: &DataMatrix, s: usize, e: usize, table: &PenaltyTable) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, s + 1);
    for v in s + 1..e {
        let (val, _) = naive_score(x, s, e, v, table);
        if val > best.0 {
            best = (val, v);
        }
    }
    best
}

/// Recursion that tests every contained seeded interval, keeps the minimal
/// detecting length, then applies the selection rule; splits at the estimate.
pub fn naive_esac(
    x: &DataMatrix,
    set: &esac_core::SeededIntervalSet,
    gamma: &PenaltyTable,
    lambda: &PenaltyTable,
    s: usize,
    e: usize,
    out: &mut Vec<usize>,
) {
    if e <= s + 1 {
        return;
    }
    let detecting: Vec<_> = set
        .intervals()
        .iter()
        .filter(|iv| iv.s >= s && iv.e <= e)
        .filter(|iv| naive_scan(x, iv.s, iv.e, gamma).0 > 0.0)
        .copied()
        .collect();
    let Some(min_len) = detecting.iter().map(|iv| iv.len()).min() else {
        return;
    };
    let mut chosen: Option<(f64, usize)> = None;
    let mut narrow: Vec<_> = detecting.into_iter().filter(|iv| iv.len() == min_len).collect();
    narrow.sort_by_key(|iv| iv.s);
    for iv in narrow {
        let (val, v) = naive_scan(x, iv.s, iv.e, lambda);
        if chosen.is_none_or(|(best, _)| val > best) {
            chosen = Some((val, v));
        }
    }
    let v = chosen.unwrap().1;
    out.push(v);
    naive_esac(x, set, gamma, lambda, s, v, out);
    naive_esac(x, set, gamma, lambda, v, e, out);
}

/// Noiseless data with steps of `height` in every series at `cps`.
pub fn steps(p: usize, n: usize, cps: &[usize], height: f64) -> DataMatrix {
    let row: Vec<f64> = (0..n)
        .map(|t| height * cps.iter().filter(|&&c| t >= c).count() as f64)
        .collect();
    DataMatrix::from_rows(&vec![row; p]).unwrap()
}

/// Deterministic pseudo-random matrix with a few planted shifts.
pub fn noisy(p: usize, n: usize, seed: u64) -> DataMatrix {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cp = rng.random_range(1..n);
    let shift: f64 = rng.random_range(0.0..4.0);
    let rows: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..n)
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + if t >= cp && i % 2 == 0 { shift } else { 0.0 }
                })
                .collect()
        })
        .collect();
    DataMatrix::from_rows(&rows).unwrap()
}
