use bertrand_core::demand::{abc_from_greek, level_coefficients, GreekParams, LevelCoefficients};
use bertrand_core::equilibrium::oracle::best_response_oracle_levels;
use bertrand_core::equilibrium::{
    best_response_oracle, classify_duopoly, max_deviation_gain, phi1, phi2, region_of, solve_nash,
    solve_nash_greek, CostVector, DuopolyRegion, EquilibriumType,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check_against_oracle(g: &GreekParams, s: &[f64]) -> Result<(), String> {
    let n = s.len();
    let params = abc_from_greek(g, n).unwrap();
    let ladder = level_coefficients(&params).unwrap();
    let costs = CostVector::new(s).unwrap();
    let eq = solve_nash(&params, &costs).map_err(|e| e.to_string())?;
    let gain = max_deviation_gain(&ladder, s, &eq.prices, 2000, 2.0 * g.alpha());
    if gain > 1e-8 {
        return Err(format!("deviation gain {gain:e} at {s:?} ({:?})", eq.eq_type));
    }
    let oracle = best_response_oracle(&params, &costs, 1e-13).map_err(|e| e.to_string())?;
    let multi_kink = matches!(eq.eq_type, EquilibriumType::Boundary { above_cost, .. } if above_cost >= 2);
    if multi_kink {
        let og = max_deviation_gain(&ladder, s, &oracle, 2000, 2.0 * g.alpha());
        if og > 1e-8 {
            return Err(format!("oracle point not an equilibrium at {s:?}"));
        }
        // Same kink: the entrant is held at zero demand in both.
        let d = ladder.actual_demands(&oracle).unwrap();
        if d.active_count != eq.prices.iter().zip(s).filter(|(p, c)| p > c).count()
            && d.active_count != eq.prices.iter().zip(s).filter(|(p, c)| p > c).count() + 1
        {
            return Err(format!("oracle lands on another kink at {s:?}"));
        }
    } else {
        for i in 0..n {
            if (oracle[i] - eq.prices[i]).abs() > 1e-8 {
                return Err(format!(
                    "oracle {:?} vs solver {:?} at {s:?} ({:?})",
                    oracle, eq.prices, eq.eq_type
                ));
            }
        }
    }
    Ok(())
}

#[test]
fn random_duopolies_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let g = GreekParams::new(6.0, 1.0, rng.gen_range(0.05..0.9)).unwrap();
        let s = [rng.gen_range(0.0..7.0), rng.gen_range(0.0..7.0)];
        check_against_oracle(&g, &s).unwrap();
    }
}

#[test]
fn random_four_firm_markets_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let g = GreekParams::new(6.0, 1.0, rng.gen_range(0.05..0.6)).unwrap();
        let s: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..6.0)).collect();
        check_against_oracle(&g, &s).unwrap();
    }
}

#[test]
fn three_firms_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = GreekParams::new(6.0, 1.0, 0.3).unwrap();
    for _ in 0..40 {
        let s: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..3.0)).collect();
        check_against_oracle(&g, &s).unwrap();
    }
}

#[test]
fn region_map_agrees_with_solver() {
    let g = GreekParams::new(6.0, 1.0, 0.5).unwrap();
    let ladder = LevelCoefficients::from_greek(&g, 2).unwrap();
    let mut seen = std::collections::HashSet::new();
    let n = 100;
    for i in 0..n {
        for j in 0..n {
            let s1 = 1.5 * g.alpha() * i as f64 / (n - 1) as f64;
            let s2 = 1.5 * g.alpha() * j as f64 / (n - 1) as f64;
            let eq = bertrand_core::equilibrium::solve_nash_levels(
                &ladder,
                &CostVector::new(&[s1, s2]).unwrap(),
            )
            .unwrap();
            let solved = region_of(&eq).unwrap();
            let classified = classify_duopoly(&g, s1, s2).unwrap();
            let (lo, hi) = (s1.min(s2), s1.max(s2));
            let on_edge = (phi1(&g, hi) - lo).abs() < 1e-9 || (phi2(&g, hi) - lo).abs() < 1e-9;
            if !on_edge {
                assert_eq!(solved, classified, "at ({s1}, {s2})");
            }
            seen.insert(classified);
        }
    }
    for r in [
        DuopolyRegion::Duopoly,
        DuopolyRegion::M1,
        DuopolyRegion::M2,
        DuopolyRegion::B1,
        DuopolyRegion::B2,
        DuopolyRegion::AllAtCost,
    ] {
        assert!(seen.contains(&r), "{r:?} missing");
    }
}

#[test]
fn oracle_on_zero_gamma_is_monopoly() {
    let g = GreekParams::new(6.0, 1.0, 0.0).unwrap();
    let ladder = LevelCoefficients::from_greek(&g, 2).unwrap();
    let p = best_response_oracle_levels(&ladder, &[1.0, 2.0], 1e-13).unwrap();
    assert!((p[0] - 3.5).abs() < 1e-10 && (p[1] - 4.0).abs() < 1e-10);
    let eq = solve_nash_greek(&g, &CostVector::new(&[1.0, 2.0]).unwrap()).unwrap();
    assert_eq!(eq.prices, vec![3.5, 4.0]);
}
