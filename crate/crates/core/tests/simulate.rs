use bertrand_core::asymptotics::SecondOrder;
use bertrand_core::demand::GreekParams;
use bertrand_core::hjb::{solve_duopoly, GameParams, Grid2D, SolverConfig};
use bertrand_core::monopoly::MonopolyModel;
use bertrand_core::output::write_path;
use bertrand_core::simulate::{
    batch_simulate, deterministic_path, stochastic_path, AsymptoticPolicy, PathRecord, PolicyMode, PolicySource,
    SurfacePolicy,
};
use proptest::prelude::*;

fn model() -> MonopolyModel {
    MonopolyModel::new(6.0, 1.0, 1.0).unwrap()
}

fn policy(gamma: f64, order: usize) -> AsymptoticPolicy {
    AsymptoticPolicy::new(model(), gamma, SecondOrder::Consistent, PolicyMode::StaticGame, order).unwrap()
}

fn noisy(gamma: f64, sigma: f64, rho: f64) -> GameParams {
    GameParams::new(GreekParams::new(6.0, 1.0, gamma).unwrap(), 1.0, sigma, sigma, rho).unwrap()
}

fn csv(path: &PathRecord) -> Vec<u8> {
    let mut buf = Vec::new();
    write_path(&mut buf, path).unwrap();
    buf
}

#[test]
fn monopoly_depletion_clock() {
    let m = model();
    let path = deterministic_path(&policy(0.0, 1), [10.0, 10.0], 1e-2, 10.0).unwrap();
    for (&t, &x) in path.times.iter().zip(&path.x1) {
        if x > 0.0 {
            assert!((m.big_q(x) - (m.big_q(10.0) - t)).abs() <= 1e-6, "t = {t}");
        }
    }
    let t1 = path.absorption_time1.unwrap();
    assert!((t1 - m.big_q(10.0)).abs() <= 1e-6);
    assert_eq!(path.absorption_time1, path.absorption_time2);
}

#[test]
fn depletion_takes_longer_with_closer_substitutes() {
    for order in [1, 2] {
        let mut last = 0.0;
        for gamma in [0.0, 0.1, 0.2, 0.3] {
            let path = deterministic_path(&policy(gamma, order), [10.0, 10.0], 1e-2, 30.0).unwrap();
            let t = path.absorption_time1.unwrap();
            assert!(t > last, "order {order}, gamma {gamma}: {t} after {last}");
            last = t;
        }
    }
}

#[test]
fn prices_rise_and_demand_falls_along_paths() {
    for gamma in [0.1, 0.3] {
        for x0 in [[10.0, 10.0], [8.0, 3.0]] {
            let path = deterministic_path(&policy(gamma, 2), x0, 1e-2, 30.0).unwrap();
            let live = path.x1.iter().zip(&path.x2).take_while(|(a, b)| **a > 0.0 && **b > 0.0).count();
            for k in 1..live {
                for (p, d) in [(&path.price1, &path.demand1), (&path.price2, &path.demand2)] {
                    assert!(p[k] >= p[k - 1] - 1e-12, "gamma {gamma}, {x0:?}, step {k}");
                    assert!(d[k] <= d[k - 1] + 1e-12, "gamma {gamma}, {x0:?}, step {k}");
                }
            }
        }
    }
}

#[test]
fn step_bound_enforced() {
    let p = policy(0.1, 1);
    // 1e-2 * 1 * 2 / 6
    assert!(deterministic_path(&p, [1.0, 5.0], 3.4e-3, 1.0).is_err());
    assert!(deterministic_path(&p, [1.0, 5.0], 3.3e-3, 1.0).is_ok());
}

#[test]
fn series_policy_reports_negative_demand() {
    // The truncated series prices the smaller firm out before its capacity
    // is gone; the path stops with an error instead of clipping.
    let p = AsymptoticPolicy::new(model(), 0.3, SecondOrder::Consistent, PolicyMode::Series, 1).unwrap();
    let err = deterministic_path(&p, [2.0, 8.0], 1e-3, 30.0).unwrap_err();
    assert!(err.to_string().contains("demand"), "{err}");
}

#[test]
fn surface_policy_drives_paths() {
    let params = noisy(0.4, 0.6, 0.1);
    let grid = Grid2D::new(20.0, 33, 33).unwrap();
    let s = solve_duopoly(&params, &grid, &SolverConfig::default()).unwrap();
    let src = SurfacePolicy::new(s, &params);
    assert_eq!(src.greek().gamma(), 0.4);
    let path = deterministic_path(&src, [10.0, 6.0], 1e-2, 30.0).unwrap();
    assert!(path.absorption_time2.unwrap() < path.absorption_time1.unwrap());
    assert_eq!(path.extrapolated_steps, 0);
    let far = deterministic_path(&src, [25.0, 25.0], 1e-2, 0.5).unwrap();
    assert!(far.extrapolated_steps > 0);
    let noisy_path = stochastic_path(&src, &params, [10.0, 6.0], 1e-2, 30.0, 5).unwrap();
    assert!(noisy_path.x1.iter().chain(&noisy_path.x2).all(|&x| x >= 0.0));
}

fn check_absorption(path: &PathRecord) {
    for (xs, hit) in [(&path.x1, path.absorption_time1), (&path.x2, path.absorption_time2)] {
        assert!(xs.iter().all(|&x| x >= 0.0));
        match hit {
            Some(t) => {
                for (&s, &x) in path.times.iter().zip(xs.iter()) {
                    if s >= t {
                        assert_eq!(x, 0.0, "seed {} at {s}", path.seed);
                    } else {
                        assert!(x > 0.0);
                    }
                }
            }
            None => assert!(xs.iter().all(|&x| x > 0.0)),
        }
    }
}

#[test]
fn absorption_is_permanent() {
    let p = policy(0.3, 1);
    let params = noisy(0.3, 0.6, 0.1);
    for seed in 0..200 {
        let path = stochastic_path(&p, &params, [2.0, 3.0], 1e-2, 20.0, seed).unwrap();
        check_absorption(&path);
    }
}

#[test]
fn survivor_switches_to_monopoly_pricing() {
    let p = policy(0.3, 1);
    let params = noisy(0.3, 0.6, 0.1);
    let m = model();
    let mut seen = 0;
    for seed in 0..100 {
        let path = stochastic_path(&p, &params, [1.0, 6.0], 1e-2, 20.0, seed).unwrap();
        let (Some(t1), t2) = (path.absorption_time1, path.absorption_time2) else { continue };
        if t2.is_some_and(|t2| t2 <= t1) {
            continue;
        }
        seen += 1;
        for k in 0..path.len() {
            if path.times[k] >= t1 && path.x2[k] > 0.0 {
                let (price, demand) = m.policy(path.x2[k]);
                assert_eq!(path.price2[k], price);
                assert_eq!(path.demand2[k], demand);
                assert_eq!(path.demand1[k], 0.0);
            }
        }
    }
    assert!(seen > 10);
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    let p = policy(0.3, 1);
    let params = noisy(0.3, 0.6, 0.1);
    let a = stochastic_path(&p, &params, [10.0, 10.0], 1e-2, 20.0, 2024).unwrap();
    let b = stochastic_path(&p, &params, [10.0, 10.0], 1e-2, 20.0, 2024).unwrap();
    assert_eq!(csv(&a), csv(&b));
    let d1 = deterministic_path(&p, [10.0, 4.0], 1e-2, 20.0).unwrap();
    let d2 = deterministic_path(&p, [10.0, 4.0], 1e-2, 20.0).unwrap();
    assert_eq!(csv(&d1), csv(&d2));
}

/// Standardized noise draws recovered from a path while both firms sell.
fn increments(path: &PathRecord, sigma: f64, dt: f64) -> Vec<[f64; 2]> {
    let scale = sigma * dt.sqrt();
    (1..path.len())
        .take_while(|&k| path.x1[k] > 0.0 && path.x2[k] > 0.0)
        .map(|k| {
            [
                (path.x1[k] - path.x1[k - 1] + path.demand1[k - 1] * dt) / scale,
                (path.x2[k] - path.x2[k - 1] + path.demand2[k - 1] * dt) / scale,
            ]
        })
        .collect()
}

#[test]
fn increments_have_the_requested_correlation() {
    let p = policy(0.1, 1);
    let params = noisy(0.1, 0.6, 0.1);
    let dt = 1e-2;
    let mut z = Vec::new();
    for seed in 0..10_000 {
        let path = stochastic_path(&p, &params, [10.0, 10.0], dt, 0.05, seed).unwrap();
        z.extend(increments(&path, 0.6, dt));
    }
    let n = z.len() as f64;
    let mean = |i: usize| z.iter().map(|v| v[i]).sum::<f64>() / n;
    let (m1, m2) = (mean(0), mean(1));
    let cov = z.iter().map(|v| (v[0] - m1) * (v[1] - m2)).sum::<f64>() / n;
    let var = |i: usize, m: f64| z.iter().map(|v| (v[i] - m).powi(2)).sum::<f64>() / n;
    let corr = cov / (var(0, m1) * var(1, m2)).sqrt();
    assert!((corr - 0.1).abs() <= 0.02, "correlation {corr}");
}

#[test]
fn increments_look_normal() {
    let p = policy(0.1, 1);
    let params = noisy(0.1, 0.6, -0.4);
    let dt = 1e-2;
    let mut z = Vec::new();
    for seed in 0..10_000u64 {
        let path = stochastic_path(&p, &params, [10.0, 10.0], dt, 0.1, seed.wrapping_mul(7919)).unwrap();
        z.extend(increments(&path, 0.6, dt));
    }
    assert_eq!(z.len(), 100_000);
    let n = z.len() as f64;
    for i in 0..2 {
        let m = z.iter().map(|v| v[i]).sum::<f64>() / n;
        let c = |k: i32| z.iter().map(|v| (v[i] - m).powi(k)).sum::<f64>() / n;
        let (var, skew, kurt) = (c(2), c(3) / c(2).powf(1.5), c(4) / c(2).powi(2) - 3.0);
        assert!(m.abs() <= 4.0 / n.sqrt(), "mean {m}");
        assert!((var - 1.0).abs() <= 4.0 * (2.0 / n).sqrt(), "variance {var}");
        assert!(skew.abs() <= 4.0 * (6.0 / n).sqrt(), "skewness {skew}");
        assert!(kurt.abs() <= 4.0 * (24.0 / n).sqrt(), "excess kurtosis {kurt}");
    }
}

#[test]
fn vanishing_noise_converges_to_deterministic_path() {
    let p = policy(0.2, 1);
    let x0 = [6.0, 3.0];
    let t_end = 2.0;
    let steps = [4e-3, 2e-3, 1e-3];
    let mut errors = Vec::new();
    for dt in steps {
        let d = deterministic_path(&p, x0, dt, t_end).unwrap();
        let s = stochastic_path(&p, &noisy(0.2, 0.0, 0.0), x0, dt, t_end, 1).unwrap();
        let a = (d.x1.last().unwrap() - s.x1.last().unwrap()).abs();
        let b = (d.x2.last().unwrap() - s.x2.last().unwrap()).abs();
        errors.push(a.max(b));
    }
    // Euler against RK4: the gap shrinks and stays within C dt.
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    for (e, dt) in errors.iter().zip(steps) {
        assert!(*e <= 0.5 * dt, "{errors:?}");
    }
}

#[test]
fn batches_are_reproducible() {
    let p = policy(0.3, 1);
    let params = noisy(0.3, 0.6, 0.1);
    let a = batch_simulate(&p, &params, [2.0, 2.0], 1e-2, 20.0, 64, 11).unwrap();
    let b = batch_simulate(&p, &params, [2.0, 2.0], 1e-2, 20.0, 64, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_paths, 64);
    let c = batch_simulate(&p, &params, [2.0, 2.0], 1e-2, 20.0, 64, 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn competition_delays_absorption_on_average() {
    let x0 = [10.0, 10.0];
    let mean = |gamma: f64| {
        let s = batch_simulate(&policy(gamma, 1), &noisy(gamma, 0.6, 0.1), x0, 1e-2, 30.0, 1000, 100).unwrap();
        assert_eq!(s.absorption[0].absorbed, 1000);
        s.absorption[0].mean.unwrap()
    };
    let (calm, crowded) = (mean(0.0), mean(0.3));
    assert!(crowded > calm, "{crowded} vs {calm}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn stochastic_paths_never_go_negative(
        seed in any::<u64>(),
        x1 in 0.05f64..5.0,
        x2 in 0.05f64..5.0,
        gamma in 0.0f64..0.3,
        rho in -0.9f64..0.9,
    ) {
        let p = policy(gamma, 1);
        let path = stochastic_path(&p, &noisy(gamma, 0.6, rho), [x1, x2], 1e-2, 5.0, seed).unwrap();
        check_absorption(&path);
        prop_assert!(path.times.windows(2).all(|w| w[1] > w[0]));
    }
}
