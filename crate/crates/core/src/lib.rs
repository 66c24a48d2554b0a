//! Service-constrained GMROI maximization over per-SKU safety-stock scenarios.
//!
//! Each SKU offers a small menu of scenarios (margin, average inventory,
//! in-stock probability). Choosing one per SKU, [`solve_fractional`] maximizes
//! total margin over total inventory while keeping the average in-stock
//! probability at or above a floor. The ratio is handled by a parametric
//! outer loop; the inner separable subproblem is solved by one of the
//! [`SubproblemSolver`] implementations.
//!
//! ```
//! use gmroi_core::{Bucket, DinkelbachConfig, ExactSolver, ScenarioMetrics, SkuScenarios, solve_fractional};
//!
//! let m = |a, b, n| ScenarioMetrics::new(0, a, b, n, 100).unwrap();
//! let bucket = Bucket::new(
//!     vec![
//!         SkuScenarios::new("a", vec![m(10.0, 5.0, 90), m(12.0, 8.0, 95)]).unwrap(),
//!         SkuScenarios::new("b", vec![m(8.0, 4.0, 80), m(9.0, 6.0, 99)]).unwrap(),
//!     ],
//!     0.91,
//! )
//! .unwrap();
//! let report = solve_fractional(&bucket, &DinkelbachConfig::default(), &ExactSolver::default()).unwrap();
//! assert_eq!(report.optimal_ratio, 19.0 / 11.0);
//! ```

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dinkelbach;
pub mod error;
pub mod experiment;
pub mod isotonic;
pub mod scenario;
pub mod sim;
pub mod solvers;
pub mod table;

pub use dinkelbach::{
    certify, solve_fractional, CertificationResult, Clause, ClauseStatus, DinkelbachConfig,
    Epsilon, IterationTrace, SolveReport,
};
pub use error::{Error, Result};
pub use experiment::{
    run_compare, run_sweep, BucketSource, ComparisonRow, ExperimentSpec, FloorRule, SweepRow,
};
pub use isotonic::{isotonic_fit, preprocess_bucket, preprocess_sku, MetricSeries};
pub use scenario::{
    aggregate, classify_regime, tar_err, Aggregates, Bucket, Regime, RegimeReport, ScenarioMetrics,
    Selection, ServiceGrid, SkuScenarios,
};
pub use sim::{
    generate_bucket, generate_scenarios, simulate_sku, ScenarioGrid, SimConfig, SimulationPlan,
    Trajectory,
};
pub use solvers::{
    brute_force_fractional, make_solver, DualTrace, DualTracePoint, ExactConfig, ExactSolver,
    LagrangianConfig, LagrangianSolver, SolverKind, SolverSettings, SubproblemSolver, Subsolution,
    UnconstrainedSolver,
};
pub use table::{ingest_scenarios, read_scenarios, write_scenarios, write_scenarios_file};
