mod common;

use common::*;
use esac_core::rng::stream_rng;
use esac_core::*;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn nu_matches_quadrature() {
    for i in 0..=100 {
        let a = i as f64 * 0.1;
        let got = nu_trunc(a).unwrap();
        let want = nu_quadrature(a);
        assert!((got - want).abs() <= 1e-8, "a={a}: {got} vs {want}");
    }
}

#[test]
fn single_series_step_subtracts_quadrature_nu() {
    let x = steps(1, 8, &[4], 10.0);
    let ctx = RateContext::new(8, 1, NEff::N4).unwrap();
    let table = PenaltyTable::zero(&ctx).unwrap();
    let c = population_cusum(0, 8, 4, 4, 10.0);
    assert!((c * c - 200.0).abs() < 1e-10);
    let a = ctx.threshold_a(1).unwrap();
    let got = score_at(&x, 0, 8, 4, 1, &table).unwrap();
    assert!((got - (200.0 - nu_quadrature(a))).abs() < 1e-8);
}

#[test]
fn fast_score_equals_naive() {
    let ctx = RateContext::new(32, 8, NEff::N4).unwrap();
    let tables = [
        PenaltyTable::analytic(&ctx).unwrap(),
        PenaltyTable::zero(&ctx).unwrap(),
    ];
    for seed in 0..100 {
        let x = noisy(8, 32, seed);
        for table in &tables {
            for (s, e) in [(0, 32), (3, 17), (10, 12)] {
                for v in s + 1..e {
                    let fast = penalized_score(&x, s, e, v, table).unwrap();
                    let (val, t) = naive_score(&x, s, e, v, table);
                    assert!((fast.value - val).abs() <= 1e-9, "seed {seed}");
                    if (fast.value - val).abs() < 1e-12 {
                        assert_eq!(fast.best_t, t);
                    }
                }
            }
        }
    }
}

#[test]
fn dense_change_prefers_full_sparsity() {
    let x = steps(4, 16, &[8], 25.0);
    let ctx = RateContext::new(16, 4, NEff::N4).unwrap();
    let table = PenaltyTable::analytic(&ctx).unwrap();
    let (_, t) = naive_score(&x, 0, 16, 8, &table);
    assert_eq!(t, 4);
    let sv = penalized_score(&x, 0, 16, 8, &table).unwrap();
    assert_eq!(sv.best_t, 4);
    let (_, eta) = naive_scan(&x, 0, 16, &table);
    assert_eq!(eta, 8);
}

#[test]
fn step_inside_interval_is_detected_at_its_location() {
    let ctx = RateContext::new(40, 3, NEff::N4).unwrap();
    let table = PenaltyTable::analytic(&ctx).unwrap();
    for eta in [12, 17, 25] {
        let x = steps(3, 40, &[eta], 8.0);
        let res = test_interval(&x, 5, 35, &table, ScanMode::Full).unwrap();
        let (val, v) = naive_scan(&x, 5, 35, &table);
        assert!(res.detected);
        assert_eq!(res.argmax_v, eta);
        assert_eq!(v, eta);
        assert!((res.score - val).abs() < 1e-9);
    }
}

#[test]
fn two_dense_changes_match_exhaustive_recursion() {
    let x = steps(4, 64, &[20, 44], 10.0);
    let ctx = RateContext::new(64, 4, NEff::N4).unwrap();
    let cfg = EsacConfig::new(&ctx).unwrap();
    let set = seeded_intervals(64, cfg.alpha, cfg.k).unwrap();
    let mut oracle = Vec::new();
    naive_esac(&x, &set, &cfg.gamma, &cfg.lambda, 0, 64, &mut oracle);
    oracle.sort_unstable();
    assert_eq!(oracle, vec![20, 44]);
    assert_eq!(esac(&x, &cfg, &set).unwrap().positions(), oracle);
}

#[test]
fn early_exit_matches_exhaustive_scan() {
    let ctx = RateContext::new(64, 8, NEff::N4).unwrap();
    let gamma = PenaltyTable::rate_multiple(&ctx, 1.0).unwrap();
    let cfg = EsacConfig::new(&ctx).unwrap().with_gamma(gamma);
    let set = seeded_intervals(64, cfg.alpha, cfg.k).unwrap();
    let mut nonempty = 0;
    for seed in 0..50 {
        let x = noisy(8, 64, 1000 + seed);
        let mut oracle = Vec::new();
        naive_esac(&x, &set, &cfg.gamma, &cfg.lambda, 0, 64, &mut oracle);
        oracle.sort_unstable();
        let got = esac(&x, &cfg, &set).unwrap().positions();
        assert_eq!(got, oracle, "seed {seed}");
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 10);
}

#[test]
fn mad_is_consistent_for_gaussian_noise() {
    let mut inside = 0;
    let mut second_pass_ok = 0;
    let reps = 200;
    for r in 0..reps {
        let mut rng = stream_rng(77, r);
        let series: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sigma = mad_sigma(&series).unwrap();
        inside += usize::from((0.93..=1.07).contains(&sigma));
        let rescaled: Vec<f64> = series.iter().map(|x| x / sigma).collect();
        let again = mad_sigma(&rescaled).unwrap();
        second_pass_ok += usize::from((0.99..=1.01).contains(&again));
    }
    assert!(inside as f64 >= 0.99 * reps as f64, "{inside}");
    assert_eq!(second_pass_ok, reps as usize);
}

#[test]
fn normalization_undoes_per_series_scaling() {
    let spec = SimulationSpec {
        n: 120,
        p: 6,
        changepoints: vec![40, 80],
        sparsities: vec![6, 3],
        direction: Direction::Signs,
        c: 30.0,
        noise: NoiseModel::M0,
        sigma: 1.0,
        n_eff: NEff::N4,
        scale: SignalScale::Rate,
        seed: 3,
        replicate: 0,
    };
    let (x, _) = simulate(&spec).unwrap();
    let scales = [1.0, 2.0, 0.5, 8.0, 1.0, 4.0];
    let y = x.scaled(&scales.map(|s| 1.0 / s)).unwrap();
    let nx = normalize(&x, &estimate_sigma(&x).unwrap()).unwrap();
    let ny = normalize(&y, &estimate_sigma(&y).unwrap()).unwrap();
    let ctx = RateContext::new(120, 6, NEff::N4).unwrap();
    let cfg = EsacConfig::new(&ctx).unwrap();
    let set = seeded_intervals(120, cfg.alpha, cfg.k).unwrap();
    let a = esac(&nx, &cfg, &set).unwrap().positions();
    let b = esac(&ny, &cfg, &set).unwrap().positions();
    assert_eq!(a, b);
    assert!(!a.is_empty());
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn null_spec(n: usize, p: usize, noise: NoiseModel) -> SimulationSpec {
    SimulationSpec {
        n,
        p,
        changepoints: vec![],
        sparsities: vec![],
        direction: Direction::Signs,
        c: 0.0,
        noise,
        sigma: 1.0,
        n_eff: NEff::N4,
        scale: SignalScale::Rate,
        seed: 21,
        replicate: 0,
    }
}

#[test]
fn spatial_correlation_is_local() {
    let (x, _) = simulate(&null_spec(500, 200, NoiseModel::CsLoc { rho: 0.6 })).unwrap();
    let w = x.as_time_major();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for row in w.chunks(200) {
        for i in 1..200 {
            a.push(row[i - 1]);
            b.push(row[i]);
        }
    }
    assert!((corr(&a, &b) - 0.6).abs() < 0.03);
}

#[test]
fn temporal_correlation_and_variance() {
    let rho: f64 = 0.5;
    let (x, _) = simulate(&null_spec(10_000, 4, NoiseModel::Temp { rho })).unwrap();
    for i in 0..4 {
        let s = x.series(i);
        let r = corr(&s[..s.len() - 1], &s[1..]);
        assert!((r - (1.0 - rho).sqrt()).abs() < 0.05, "{r}");
        let var = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        assert!((var - 1.0).abs() < 0.15, "{var}");
    }
}

#[test]
fn global_correlation_matches_covariance() {
    let p = 50;
    let rho = 0.8;
    let (x, _) = simulate(&null_spec(20_000, p, NoiseModel::Cs { rho })).unwrap();
    let var0 = x.series(0).iter().map(|v| v * v).sum::<f64>() / 20_000.0;
    let want = 1.0 - rho + rho / p as f64;
    assert!((var0 - want).abs() < 0.03, "{var0} vs {want}");
    let row_sums: Vec<f64> = x.as_time_major().chunks(p).map(|r| r.iter().sum()).collect();
    let var_sum = row_sums.iter().map(|v| v * v).sum::<f64>() / row_sums.len() as f64;
    let want_sum = p as f64 * (1.0 - rho) + rho * p as f64;
    assert!((var_sum / want_sum - 1.0).abs() < 0.05);
}

#[test]
fn calibration_is_thread_invariant() {
    let ctx = RateContext::new(40, 6, NEff::N4).unwrap();
    let set = seeded_intervals(40, 1.5, 4).unwrap();
    let opts = CalibrationOptions {
        mc_n: 120,
        epsilon: 0.05,
        seed: 4,
        ..Default::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| calibrate_gamma(&ctx, &set, &opts).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one.to_json().unwrap(), run(2).to_json().unwrap());
}

#[test]
fn raw_maxima_shrink_with_the_interval_set() {
    let ctx = RateContext::new(64, 5, NEff::N4).unwrap();
    let set = seeded_intervals(64, 1.5, 4).unwrap();
    let zero = PenaltyTable::zero(&ctx).unwrap();
    for seed in 0..10 {
        let x = noisy(5, 64, seed);
        let all = max_raw_scores(&x, &ctx, &set, ScanMode::Full).unwrap();
        let mut sub = vec![f64::NEG_INFINITY; all.len()];
        for iv in set.intervals().iter().step_by(3) {
            for v in iv.s + 1..iv.e {
                let per_t = penalized_score_detailed(&x, iv.s, iv.e, v, &zero)
                    .unwrap()
                    .per_t
                    .unwrap();
                for (m, (_, val)) in sub.iter_mut().zip(per_t) {
                    *m = m.max(val);
                }
            }
        }
        assert!(all.iter().zip(&sub).all(|(a, b)| a >= b));
    }
}
