use gmroi_core::solvers::{brute_force_subproblem, solve_exact_with, solve_unconstrained};
use gmroi_core::{
    brute_force_fractional, classify_regime, isotonic_fit, read_scenarios, solve_fractional,
    write_scenarios, Bucket, DinkelbachConfig, Error, ExactConfig, ExactSolver, LagrangianSolver,
    MetricSeries, Regime, ScenarioMetrics, SkuScenarios, SubproblemSolver, UnconstrainedSolver,
};
use proptest::prelude::*;

const DENS: [u64; 5] = [10, 20, 30, 100, 365];

fn sku_strategy(max_scenarios: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec(
        (0.0..100.0f64, 0.5..50.0f64, 0.0..=1.0f64),
        1..=max_scenarios,
    )
}

prop_compose! {
    fn bucket_strategy(max_n: usize, max_j: usize)
        (skus in prop::collection::vec((sku_strategy(max_j), 0..DENS.len()), 1..=max_n),
         floor in 0.0..=1.0f64)
        -> Bucket
    {
        let skus = skus
            .into_iter()
            .enumerate()
            .map(|(i, (rows, d))| {
                let den = DENS[d];
                let scenarios = rows
                    .into_iter()
                    .enumerate()
                    .map(|(j, (m, inv, p))| {
                        ScenarioMetrics::new(j as u64, m, inv, (p * den as f64).round() as u64, den).unwrap()
                    })
                    .collect();
                SkuScenarios::new(format!("s{i}"), scenarios).unwrap()
            })
            .collect();
        Bucket::new(skus, floor).unwrap()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

fn solve(b: &Bucket, s: &dyn SubproblemSolver) -> Result<gmroi_core::SolveReport, Error> {
    solve_fractional(b, &DinkelbachConfig::default(), s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exact_matches_brute_force(b in bucket_strategy(6, 4)) {
        let exact = solve(&b, &ExactSolver::new(ExactConfig::dp_only()));
        match brute_force_fractional(&b) {
            Ok((_, r)) => {
                let rep = exact.unwrap();
                prop_assert!(rel(r, rep.optimal_ratio) <= 1e-12, "{} vs {}", r, rep.optimal_ratio);
                prop_assert!(rep.feasible);
            }
            Err(Error::Infeasible { .. }) => {
                let infeasible = matches!(exact, Err(Error::Infeasible { .. }));
                prop_assert!(infeasible);
            }
            Err(e) => return Err(TestCaseError::fail(format!("oracle failed: {e}"))),
        }
    }

    #[test]
    fn dp_subproblem_matches_enumeration(b in bucket_strategy(6, 4), lambda in 0.0..10.0f64) {
        prop_assume!(classify_regime(&b).regime != Regime::Infeasible);
        let dp = solve_exact_with(&b, lambda, &ExactConfig::dp_only()).unwrap();
        let (_, best) = brute_force_subproblem(&b, lambda, u128::MAX).unwrap();
        prop_assert!((dp.value - best).abs() <= 1e-9 * best.abs().max(1.0), "{} vs {}", dp.value, best);
        prop_assert!(b.meets_floor(&dp.selection));
    }

    #[test]
    fn lagrangian_is_feasible_and_never_beats_exact(b in bucket_strategy(6, 4)) {
        prop_assume!(classify_regime(&b).regime != Regime::Infeasible);
        let lag = solve(&b, &LagrangianSolver::default()).unwrap();
        let exact = solve(&b, &ExactSolver::default()).unwrap();
        prop_assert!(lag.feasible);
        prop_assert!(lag.optimal_ratio <= exact.optimal_ratio * (1.0 + 1e-12));
    }

    #[test]
    fn regime_agrees_with_enumeration(b in bucket_strategy(5, 3)) {
        let mut any = false;
        let mut all = true;
        let sizes: Vec<usize> = b.skus().iter().map(|k| k.scenarios.len()).collect();
        let mut sel = vec![0usize; sizes.len()];
        'outer: loop {
            let ok = b.meets_floor(&gmroi_core::Selection(sel.clone()));
            any |= ok;
            all &= ok;
            for i in (0..sel.len()).rev() {
                sel[i] += 1;
                if sel[i] < sizes[i] { continue 'outer; }
                sel[i] = 0;
            }
            break;
        }
        let expected = if !any { Regime::Infeasible } else if all { Regime::Unconstrained } else { Regime::Constrained };
        prop_assert_eq!(classify_regime(&b).regime, expected);
    }

    #[test]
    fn unconstrained_regime_solvers_agree(b in bucket_strategy(8, 4)) {
        let b = b.with_service_floor(0.0).unwrap();
        let u = solve(&b, &UnconstrainedSolver).unwrap();
        let e = solve(&b, &ExactSolver::default()).unwrap();
        let l = solve(&b, &LagrangianSolver::default()).unwrap();
        prop_assert_eq!(&u.selection, &e.selection);
        prop_assert_eq!(&u.selection, &l.selection);
        prop_assert_eq!(u.optimal_ratio, e.optimal_ratio);
        prop_assert_eq!(u.optimal_ratio, l.optimal_ratio);
    }

    #[test]
    fn unconstrained_subproblem_is_separable(b in bucket_strategy(8, 5), lambda in 0.0..5.0f64) {
        let (_, value) = solve_unconstrained(&b, lambda);
        let per_sku: f64 = b
            .skus()
            .iter()
            .map(|k| k.scenarios.iter().map(|s| s.margin - lambda * s.inventory).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        prop_assert!((value - per_sku).abs() <= 1e-9 * per_sku.abs().max(1.0));
    }

    #[test]
    fn ratio_scales_with_margin_and_inventory(b in bucket_strategy(5, 4), k in -3i32..=3) {
        prop_assume!(classify_regime(&b).regime != Regime::Infeasible);
        let a = 2f64.powi(k);
        let scaled = |fm: f64, fi: f64| {
            let skus = b.skus().iter().map(|s| {
                let sc = s.scenarios.iter().map(|m| ScenarioMetrics {
                    margin: m.margin * fm,
                    inventory: m.inventory * fi,
                    ..m.clone()
                }).collect();
                SkuScenarios::new(s.sku_id.clone(), sc).unwrap()
            }).collect();
            Bucket::new(skus, b.service_floor()).unwrap()
        };
        let base = solve(&b, &ExactSolver::default()).unwrap().optimal_ratio;
        let m = solve(&scaled(a, 1.0), &ExactSolver::default()).unwrap().optimal_ratio;
        let i = solve(&scaled(1.0, a), &ExactSolver::default()).unwrap().optimal_ratio;
        prop_assert!(rel(m, base * a) <= 1e-12);
        prop_assert!(rel(i, base / a) <= 1e-12);
    }

    #[test]
    fn sku_order_does_not_matter(b in bucket_strategy(6, 4)) {
        prop_assume!(classify_regime(&b).regime != Regime::Infeasible);
        let mut skus = b.skus().to_vec();
        skus.reverse();
        let rev = Bucket::new(skus, b.service_floor()).unwrap();
        let x = solve(&b, &ExactSolver::default()).unwrap().optimal_ratio;
        let y = solve(&rev, &ExactSolver::default()).unwrap().optimal_ratio;
        prop_assert!(rel(x, y) <= 1e-12);
    }

    #[test]
    fn weak_duality_along_trace(b in bucket_strategy(6, 4), lambda in 0.0..6.0f64) {
        prop_assume!(classify_regime(&b).regime == Regime::Constrained);
        let sub = LagrangianSolver::default().solve(&b, lambda).unwrap();
        let exact = solve_exact_with(&b, lambda, &ExactConfig::default()).unwrap().value;
        let trace = sub.dual_trace.unwrap();
        for p in &trace.points {
            prop_assert!(p.dual_value >= exact - 1e-9 * exact.abs().max(1.0), "phi({}) = {} < {}", p.mu, p.dual_value, exact);
        }
        prop_assert!(sub.value <= exact + 1e-9 * exact.abs().max(1.0));
    }

    #[test]
    fn csv_round_trip(b in bucket_strategy(6, 5)) {
        let mut buf = Vec::new();
        write_scenarios(&b, &mut buf).unwrap();
        let back = read_scenarios(buf.as_slice()).unwrap();
        prop_assert_eq!(back.skus(), b.skus());
    }

    #[test]
    fn pav_is_monotone_idempotent_and_mean_preserving(
        ys in prop::collection::vec(-100.0..100.0f64, 1..40),
    ) {
        let fit = isotonic_fit(&MetricSeries::unweighted(ys.clone())).unwrap();
        prop_assert!(fit.windows(2).all(|w| w[0] <= w[1]));
        let again = isotonic_fit(&MetricSeries::unweighted(fit.clone())).unwrap();
        prop_assert_eq!(&again, &fit);
        let (s0, s1): (f64, f64) = (ys.iter().sum(), fit.iter().sum());
        prop_assert!((s0 - s1).abs() <= 1e-9 * ys.len() as f64 * 100.0);
    }

    #[test]
    fn pav_beats_every_monotone_grid_candidate(ys in prop::collection::vec(0u8..4, 1..=5)) {
        let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
        let fit = isotonic_fit(&MetricSeries::unweighted(ys.clone())).unwrap();
        let sse = |v: &[f64]| v.iter().zip(&ys).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let best = sse(&fit);
        // any non-decreasing sequence over a half-step grid is a candidate
        let grid: Vec<f64> = (0..=6).map(|k| k as f64 * 0.5).collect();
        let mut idx = vec![0usize; ys.len()];
        let mut more = true;
        while more {
            let cand: Vec<f64> = idx.iter().map(|&k| grid[k]).collect();
            if cand.windows(2).all(|w| w[0] <= w[1]) {
                prop_assert!(best <= sse(&cand) + 1e-9);
            }
            more = false;
            for i in (0..idx.len()).rev() {
                idx[i] += 1;
                if idx[i] < grid.len() {
                    more = true;
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}
