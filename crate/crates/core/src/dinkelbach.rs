//! Dinkelbach's method for `max M(x) / I(x)` over feasible selections.
//!
//! Each outer iteration solves the parametric subproblem
//! `W(lambda_k) = max M(x) - lambda_k I(x)` and moves `lambda` to the ratio of
//! the maximizer, stopping once `W(lambda_k) < epsilon`. With an exact
//! subproblem solver the `lambda` sequence is strictly increasing, bounded by
//! the optimal ratio, and visits each achievable ratio at most once.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    aggregate, classify_regime, Aggregates, Bucket, Regime, RegimeReport, Selection,
};
use crate::solvers::{
    achievable_ratios, solve_exact, DualTrace, SubproblemSolver, BRUTE_FORCE_LIMIT,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Epsilon {
    Absolute(f64),
    /// Multiplied by `max(1, M(x_0))`, the margin of the first iterate.
    RelativeToInitialMargin(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DinkelbachConfig {
    pub epsilon: Epsilon,
    pub max_iterations: usize,
    pub initial_lambda: f64,
}

impl Default for DinkelbachConfig {
    fn default() -> Self {
        DinkelbachConfig {
            epsilon: Epsilon::RelativeToInitialMargin(1e-9),
            max_iterations: 50,
            initial_lambda: 0.0,
        }
    }
}

impl DinkelbachConfig {
    fn validate(&self) -> Result<()> {
        let e = match self.epsilon {
            Epsilon::Absolute(e) | Epsilon::RelativeToInitialMargin(e) => e,
        };
        if !(e > 0.0) || self.max_iterations == 0 || !self.initial_lambda.is_finite() {
            return Err(Error::Validation(
                "epsilon must be positive, max_iterations >= 1, initial lambda finite".into(),
            ));
        }
        Ok(())
    }
}

/// One outer iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationTrace {
    pub lambda: f64,
    /// `W(lambda)` as returned by the subproblem solver.
    pub subproblem_value: f64,
    pub selection: Selection,
    pub aggregates: Aggregates,
    pub subproblem_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_trace: Option<DualTrace>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub optimal_ratio: f64,
    pub selection: Selection,
    pub aggregates: Aggregates,
    pub iterations: Vec<IterationTrace>,
    pub solver_name: String,
    pub total_seconds: f64,
    pub regime: RegimeReport,
    pub service_floor: f64,
    /// The selection meets the service floor exactly.
    pub feasible: bool,
    /// Stopping tolerance actually used.
    pub epsilon: f64,
    pub rationalized_isp: bool,
}

impl SolveReport {
    /// Number of subproblem solves.
    pub fn outer_iterations(&self) -> usize {
        self.iterations.len()
    }

    /// Number of `lambda` updates, i.e. iterates whose `lambda` is an achieved ratio.
    pub fn lambda_updates(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn lambdas(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterations.iter().map(|t| t.lambda)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn solve_fractional<S: SubproblemSolver + ?Sized>(
    bucket: &Bucket,
    cfg: &DinkelbachConfig,
    solver: &S,
) -> Result<SolveReport> {
    cfg.validate()?;
    let regime = classify_regime(bucket);
    if regime.regime == Regime::Infeasible {
        return Err(Error::Infeasible {
            floor: bucket.service_floor(),
            max_achievable: regime.max_achievable_isp,
        });
    }

    let start = Instant::now();
    let mut lambda = cfg.initial_lambda;
    let mut epsilon = f64::NAN;
    let mut iterations: Vec<IterationTrace> = Vec::new();
    loop {
        if iterations.len() == cfg.max_iterations {
            return Err(Error::MaxIterationsExceeded(cfg.max_iterations));
        }
        let t = Instant::now();
        let sub = solver
            .solve(bucket, lambda)
            .map_err(|e| Error::SubproblemFailure {
                solver: solver.name().to_string(),
                source: Box::new(e),
            })?;
        let subproblem_seconds = t.elapsed().as_secs_f64();
        let aggregates = aggregate(bucket, &sub.selection)?;

        if iterations.is_empty() {
            epsilon = match cfg.epsilon {
                Epsilon::Absolute(e) => e,
                Epsilon::RelativeToInitialMargin(e) => e * aggregates.total_margin.max(1.0),
            };
            if cfg.initial_lambda != 0.0 && sub.value < 0.0 {
                return Err(Error::InvalidWarmStart {
                    lambda: cfg.initial_lambda,
                    value: sub.value,
                });
            }
        }

        let done = sub.value < epsilon;
        let next_lambda = aggregates.gmroi;
        iterations.push(IterationTrace {
            lambda,
            subproblem_value: sub.value,
            selection: sub.selection,
            aggregates,
            subproblem_seconds,
            dual_trace: sub.dual_trace,
        });
        if done {
            break;
        }
        lambda = next_lambda;
    }

    // An inexact subproblem can end on a selection worse than the incumbent
    // whose ratio is the current lambda.
    let last = iterations.len() - 1;
    let best =
        if last > 0 && iterations[last - 1].aggregates.gmroi > iterations[last].aggregates.gmroi {
            last - 1
        } else {
            last
        };
    let winner = &iterations[best];
    Ok(SolveReport {
        optimal_ratio: winner.aggregates.gmroi,
        selection: winner.selection.clone(),
        aggregates: winner.aggregates.clone(),
        feasible: bucket.meets_floor(&winner.selection),
        solver_name: solver.name().to_string(),
        total_seconds: start.elapsed().as_secs_f64(),
        regime,
        service_floor: bucket.service_floor(),
        epsilon,
        rationalized_isp: bucket.has_rationalized_isp(),
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `lambda` strictly increases across iterations.
    LambdaMonotone,
    /// `lambda` updates do not exceed the number of achievable ratios.
    IterationBound,
    /// The final selection meets the service floor.
    Feasibility,
    /// `W(lambda*) < epsilon` under the exact solver.
    ZeroCrossing,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Clause::LambdaMonotone => "lambda_monotone",
            Clause::IterationBound => "iteration_bound",
            Clause::Feasibility => "feasibility",
            Clause::ZeroCrossing => "zero_crossing",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseStatus {
    Passed,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationResult {
    pub checks: Vec<(Clause, ClauseStatus)>,
    /// `|R|` when the bucket was small enough to enumerate.
    pub achievable_ratio_count: Option<usize>,
    /// Exact `W(lambda*)`, when it could be computed.
    pub exact_value_at_optimum: Option<f64>,
}

/// Re-checks a report against the bucket it came from.
pub fn certify(report: &SolveReport, bucket: &Bucket) -> Result<CertificationResult> {
    let fail =
        |clause: Clause, detail: String| Error::CertificationFailed(format!("{clause}: {detail}"));
    let mut checks = Vec::new();

    for w in report.iterations.windows(2) {
        if !(w[1].lambda > w[0].lambda) {
            return Err(fail(
                Clause::LambdaMonotone,
                format!("lambda {} followed by {}", w[0].lambda, w[1].lambda),
            ));
        }
    }
    checks.push((Clause::LambdaMonotone, ClauseStatus::Passed));

    let mut achievable_ratio_count = None;
    if bucket.selection_count() <= BRUTE_FORCE_LIMIT {
        let r = achievable_ratios(bucket)?.len();
        achievable_ratio_count = Some(r);
        if report.lambda_updates() > r {
            return Err(fail(
                Clause::IterationBound,
                format!(
                    "{} lambda updates for {r} achievable ratios",
                    report.lambda_updates()
                ),
            ));
        }
        checks.push((Clause::IterationBound, ClauseStatus::Passed));
    } else {
        checks.push((
            Clause::IterationBound,
            ClauseStatus::Skipped("bucket too large to enumerate".into()),
        ));
    }

    if bucket.validate_selection(&report.selection).is_err()
        || !bucket.meets_floor(&report.selection)
    {
        return Err(fail(
            Clause::Feasibility,
            "final selection misses the service floor".into(),
        ));
    }
    checks.push((Clause::Feasibility, ClauseStatus::Passed));

    let mut exact_value_at_optimum = None;
    match solve_exact(bucket, report.optimal_ratio) {
        Ok(sol) => {
            exact_value_at_optimum = Some(sol.value);
            if !(sol.value < report.epsilon) {
                return Err(fail(
                    Clause::ZeroCrossing,
                    format!("W(lambda*) = {} >= epsilon {}", sol.value, report.epsilon),
                ));
            }
            checks.push((Clause::ZeroCrossing, ClauseStatus::Passed));
        }
        Err(Error::BudgetOverflow { states, cap }) => checks.push((
            Clause::ZeroCrossing,
            ClauseStatus::Skipped(format!("exact state space {states} exceeds {cap}")),
        )),
        Err(e) => return Err(e),
    }

    Ok(CertificationResult {
        checks,
        achievable_ratio_count,
        exact_value_at_optimum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioMetrics, SkuScenarios};
    use crate::solvers::{
        brute_force_fractional, ExactSolver, LagrangianSolver, Subsolution, UnconstrainedSolver,
    };

    fn metrics(margin: f64, inventory: f64, num: u64, den: u64) -> ScenarioMetrics {
        ScenarioMetrics::new(0, margin, inventory, num, den).unwrap()
    }

    fn single() -> Bucket {
        Bucket::new(
            vec![SkuScenarios::new("x", vec![metrics(10.0, 4.0, 9, 10)]).unwrap()],
            0.5,
        )
        .unwrap()
    }

    fn running_example() -> Bucket {
        Bucket::new(
            vec![
                SkuScenarios::new(
                    "1",
                    vec![metrics(10.0, 5.0, 90, 100), metrics(12.0, 8.0, 95, 100)],
                )
                .unwrap(),
                SkuScenarios::new(
                    "2",
                    vec![metrics(8.0, 4.0, 80, 100), metrics(9.0, 6.0, 99, 100)],
                )
                .unwrap(),
            ],
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn forced_selection_takes_two_solves() {
        let r = solve_fractional(
            &single(),
            &DinkelbachConfig::default(),
            &ExactSolver::default(),
        )
        .unwrap();
        let lambdas: Vec<f64> = r.lambdas().collect();
        assert_eq!(lambdas, vec![0.0, 2.5]);
        assert_eq!(r.iterations[0].subproblem_value, 10.0);
        assert_eq!(r.iterations[1].subproblem_value, 0.0);
        assert_eq!(r.optimal_ratio, 2.5);
        assert!(r.feasible);
        let cert = certify(&r, &single()).unwrap();
        assert!(cert.checks.iter().all(|(_, s)| *s == ClauseStatus::Passed));
    }

    #[test]
    fn running_example_reaches_brute_force_optimum() {
        let b = running_example();
        let (oracle_sel, oracle) = brute_force_fractional(&b).unwrap();
        for solver in [
            Box::new(ExactSolver::default()) as Box<dyn SubproblemSolver>,
            Box::new(LagrangianSolver::default()),
        ] {
            let r = solve_fractional(&b, &DinkelbachConfig::default(), &solver).unwrap();
            assert_eq!(r.selection, oracle_sel);
            assert_eq!(r.optimal_ratio, oracle);
            assert!((r.optimal_ratio - 19.0 / 11.0).abs() < 1e-15);
            certify(&r, &b).unwrap();
        }
    }

    #[test]
    fn infeasible_bucket_is_rejected() {
        let b = running_example().with_service_floor(0.99).unwrap();
        assert!(matches!(
            solve_fractional(&b, &DinkelbachConfig::default(), &ExactSolver::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn corrupted_selection_fails_feasibility() {
        let b = running_example();
        let mut r =
            solve_fractional(&b, &DinkelbachConfig::default(), &ExactSolver::default()).unwrap();
        r.selection = Selection(vec![0, 0]);
        match certify(&r, &b) {
            Err(Error::CertificationFailed(msg)) => {
                assert!(msg.starts_with("feasibility"), "{msg}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupted_trace_fails_monotonicity() {
        let b = running_example();
        let mut r =
            solve_fractional(&b, &DinkelbachConfig::default(), &ExactSolver::default()).unwrap();
        r.iterations[1].lambda = -1.0;
        match certify(&r, &b) {
            Err(Error::CertificationFailed(msg)) => {
                assert!(msg.starts_with("lambda_monotone"), "{msg}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unconstrained_solver_may_report_infeasible_selection() {
        let b = running_example();
        let r = solve_fractional(&b, &DinkelbachConfig::default(), &UnconstrainedSolver).unwrap();
        // unconstrained optimum (0,0) has ratio 2 but ISP 0.85 < 0.9
        assert_eq!(r.selection, Selection(vec![0, 0]));
        assert!(!r.feasible);
    }

    #[test]
    fn warm_start_above_optimum_rejected() {
        let cfg = DinkelbachConfig {
            initial_lambda: 3.0,
            ..DinkelbachConfig::default()
        };
        assert!(matches!(
            solve_fractional(&single(), &cfg, &ExactSolver::default()),
            Err(Error::InvalidWarmStart { .. })
        ));
        let ok = DinkelbachConfig {
            initial_lambda: 1.0,
            ..DinkelbachConfig::default()
        };
        let r = solve_fractional(&single(), &ok, &ExactSolver::default()).unwrap();
        assert_eq!(r.optimal_ratio, 2.5);
    }

    struct Stubborn;

    impl SubproblemSolver for Stubborn {
        fn name(&self) -> &'static str {
            "stubborn"
        }

        fn solve(&self, _: &Bucket, _: f64) -> Result<Subsolution> {
            Ok(Subsolution {
                selection: Selection(vec![0]),
                value: 1.0,
                dual_trace: None,
            })
        }
    }

    #[test]
    fn iteration_cap() {
        let cfg = DinkelbachConfig {
            max_iterations: 3,
            ..DinkelbachConfig::default()
        };
        assert!(matches!(
            solve_fractional(&single(), &cfg, &Stubborn),
            Err(Error::MaxIterationsExceeded(3))
        ));
    }

    #[test]
    fn report_serializes() {
        let r = solve_fractional(
            &running_example(),
            &DinkelbachConfig::default(),
            &LagrangianSolver::default(),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["solver_name"], "lagrangian");
        assert_eq!(v["selection"], serde_json::json!([0, 1]));
        assert!(v["iterations"].as_array().unwrap().len() >= 2);
    }
}
