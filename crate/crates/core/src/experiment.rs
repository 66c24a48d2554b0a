//! Solver comparison and service-floor sweeps.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dinkelbach::{solve_fractional, DinkelbachConfig, SolveReport};
use crate::error::{Error, Result};
use crate::isotonic::preprocess_bucket;
use crate::scenario::{classify_regime, tar_err, Bucket, Regime};
use crate::sim::SimulationPlan;
use crate::solvers::{make_solver, SolverKind, SolverSettings, UnconstrainedSolver};
use crate::table::ingest_scenarios;

/// TAR_ERR at or below this prints as `EXACT`.
pub const EXACT_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorRule {
    Explicit(f64),
    /// Midpoint of the achievable average-ISP range.
    Midpoint,
    /// One service unit below the smallest achievable average ISP.
    BelowLowerBound,
}

/// The service floor `rule` picks for this bucket's scenarios.
pub fn resolve_floor(bucket: &Bucket, rule: FloorRule) -> Result<f64> {
    let g = bucket.service_grid();
    match rule {
        FloorRule::Explicit(v) if (0.0..=1.0).contains(&v) => Ok(v),
        FloorRule::Explicit(v) => Err(Error::Validation(format!("floor {v} outside [0, 1]"))),
        FloorRule::Midpoint => Ok((g.min_total + g.max_total) as f64 / 2.0 / g.full as f64),
        FloorRule::BelowLowerBound => Ok(g.to_fraction(g.min_total.saturating_sub(1))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BucketSource {
    SimulateFromConfig(SimulationPlan),
    LoadScenarioCsv(PathBuf),
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub solvers: Vec<SolverKind>,
    pub floor_rule: FloorRule,
    /// Number of floors in a sweep.
    pub sweep: Option<usize>,
    pub dinkelbach: DinkelbachConfig,
    pub settings: SolverSettings,
    /// Run each timed solve once beforehand and discard it.
    pub warmup: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            solvers: vec![
                SolverKind::Exact,
                SolverKind::Lagrangian,
                SolverKind::Unconstrained,
            ],
            floor_rule: FloorRule::Midpoint,
            sweep: None,
            dinkelbach: DinkelbachConfig::default(),
            settings: SolverSettings::default(),
            warmup: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::Validation("at least one solver is required".into()));
        }
        if let FloorRule::Explicit(v) = self.floor_rule {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("floor {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Loads the scenario data, optionally applying isotonic preprocessing.
/// The returned bucket has service floor 0; apply a [`FloorRule`] afterwards.
pub fn load_bucket(source: &BucketSource, seed: Option<u64>, isotonic: bool) -> Result<Bucket> {
    let raw = match source {
        BucketSource::SimulateFromConfig(plan) => {
            let mut plan = plan.clone();
            if let Some(s) = seed {
                plan.seed = s;
            }
            plan.generate(0.0)?
        }
        BucketSource::LoadScenarioCsv(path) => ingest_scenarios(path)?,
    };
    if isotonic {
        preprocess_bucket(&raw)
    } else {
        Ok(raw)
    }
}

/// `C`/`U`, SKU count, scenario count: `C00200-0012000`.
pub fn instance_label(bucket: &Bucket) -> String {
    let kind = match classify_regime(bucket).regime {
        Regime::Unconstrained => 'U',
        _ => 'C',
    };
    format!("{kind}{:05}-{:07}", bucket.n(), bucket.scenario_count())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRun {
    pub iterations: usize,
    pub wall_seconds: f64,
    pub gmroi: f64,
    pub realized_isp: f64,
    pub feasible: bool,
}

impl SolverRun {
    fn from_report(r: &SolveReport, wall_seconds: f64) -> Self {
        SolverRun {
            iterations: r.outer_iterations(),
            wall_seconds,
            gmroi: r.optimal_ratio,
            realized_isp: r.aggregates.avg_isp,
            feasible: r.feasible,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub solver: SolverKind,
    pub run: std::result::Result<SolverRun, String>,
    pub tar_err: Option<f64>,
}

impl SolverOutcome {
    /// `EXACT`, a number, or empty when unavailable.
    pub fn tar_err_cell(&self) -> String {
        match self.tar_err {
            Some(e) if e <= EXACT_THRESHOLD => "EXACT".into(),
            Some(e) => format!("{e:e}"),
            None => String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instance_label: String,
    pub regime: Regime,
    pub service_floor: f64,
    /// GMROI of the exact solver, the TAR_ERR reference.
    pub exact_gmroi: Option<f64>,
    pub outcomes: Vec<SolverOutcome>,
}

impl ComparisonRow {
    pub fn outcome(&self, kind: SolverKind) -> Option<&SolverOutcome> {
        self.outcomes.iter().find(|o| o.solver == kind)
    }
}

fn timed_solve(
    bucket: &Bucket,
    kind: SolverKind,
    spec: &ExperimentSpec,
) -> Result<(SolveReport, f64)> {
    let solver = make_solver(kind, bucket, &spec.settings);
    if spec.warmup {
        solve_fractional(bucket, &spec.dinkelbach, &solver)?;
    }
    let t = Instant::now();
    let report = solve_fractional(bucket, &spec.dinkelbach, &solver)?;
    Ok((report, t.elapsed().as_secs_f64()))
}

/// Solves one bucket (floor already applied) with every requested solver.
pub fn compare_bucket(bucket: &Bucket, spec: &ExperimentSpec) -> Result<ComparisonRow> {
    spec.validate()?;
    let regime = classify_regime(bucket);
    if regime.regime == Regime::Infeasible {
        return Err(Error::Infeasible {
            floor: bucket.service_floor(),
            max_achievable: regime.max_achievable_isp,
        });
    }

    let mut runs: Vec<(SolverKind, std::result::Result<SolverRun, String>)> = spec
        .solvers
        .iter()
        .map(|&kind| {
            let run = timed_solve(bucket, kind, spec)
                .map(|(r, secs)| SolverRun::from_report(&r, secs))
                .map_err(|e| format!("{}: {e}", e.root().category()));
            (kind, run)
        })
        .collect();

    let exact_gmroi = match runs.iter().find(|(k, _)| *k == SolverKind::Exact) {
        Some((_, Ok(r))) => Some(r.gmroi),
        Some((_, Err(_))) => None,
        None => {
            let solver = make_solver(SolverKind::Exact, bucket, &spec.settings);
            solve_fractional(bucket, &spec.dinkelbach, &solver)
                .ok()
                .map(|r| r.optimal_ratio)
        }
    };

    let outcomes = runs
        .drain(..)
        .map(|(solver, run)| {
            let tar = match (&run, exact_gmroi) {
                (Ok(r), Some(e)) => Some(tar_err(e, r.gmroi)),
                _ => None,
            };
            SolverOutcome {
                solver,
                run,
                tar_err: tar,
            }
        })
        .collect();

    Ok(ComparisonRow {
        instance_label: instance_label(bucket),
        regime: regime.regime,
        service_floor: bucket.service_floor(),
        exact_gmroi,
        outcomes,
    })
}

/// Applies the spec's floor rule to each bucket and compares solvers on it.
pub fn run_compare(buckets: &[Bucket], spec: &ExperimentSpec) -> Result<Vec<ComparisonRow>> {
    buckets
        .iter()
        .map(|b| {
            let floored = b.with_service_floor(resolve_floor(b, spec.floor_rule)?)?;
            compare_bucket(&floored, spec)
        })
        .collect()
}

/// `reference_gmroi` is the exact optimum each `tar_err` is measured against.
pub fn comparison_csv(rows: &[ComparisonRow], solvers: &[SolverKind], timing: bool) -> String {
    let mut out = String::from("instance,regime,service_floor,reference_gmroi");
    for s in solvers {
        out.push_str(&format!(
            ",{s}_iter,{s}_t_s,{s}_gmroi,{s}_isp,{s}_feasible,{s}_tar_err,{s}_error"
        ));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{:?},{},{}",
            row.instance_label,
            row.regime,
            row.service_floor,
            row.exact_gmroi.map(|g| g.to_string()).unwrap_or_default()
        ));
        for &s in solvers {
            match row.outcome(s) {
                Some(o) => match &o.run {
                    Ok(r) => out.push_str(&format!(
                        ",{},{},{},{},{},{},",
                        r.iterations,
                        if timing {
                            r.wall_seconds.to_string()
                        } else {
                            String::new()
                        },
                        r.gmroi,
                        r.realized_isp,
                        r.feasible,
                        o.tar_err_cell()
                    )),
                    Err(e) => out.push_str(&format!(",,,,,,,{}", e.replace(',', ";"))),
                },
                None => out.push_str(",,,,,,,"),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub solver: SolverKind,
    pub wall_seconds: f64,
    pub gmroi: f64,
    pub relative_gmroi: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Position of the floor within `[min achievable, max achievable]`.
    pub normalized_tightness: f64,
    pub service_floor: f64,
    pub cells: Vec<SweepCell>,
}

impl SweepRow {
    pub fn cell(&self, kind: SolverKind) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.solver == kind)
    }
}

/// The sweep's floors: evenly spaced from the smallest achievable average ISP
/// to one service unit below the largest.
pub fn sweep_floors(bucket: &Bucket, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Validation("a sweep needs at least 2 points".into()));
    }
    let g = bucket.service_grid();
    let lo = g.min_total as f64;
    let hi = g.max_total.saturating_sub(1) as f64;
    Ok((0..points)
        .map(|k| {
            let units = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            (units / g.full as f64).clamp(0.0, 1.0)
        })
        .collect())
}

/// Solves the bucket at every sweep floor with every requested solver.
/// GMROI is reported relative to the unconstrained optimum.
pub fn run_sweep(bucket: &Bucket, spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec
        .sweep
        .ok_or_else(|| Error::Validation("sweep point count missing".into()))?;
    let floors = sweep_floors(bucket, points)?;

    let open = bucket.with_service_floor(0.0)?;
    let reference = solve_fractional(&open, &spec.dinkelbach, &UnconstrainedSolver)?.optimal_ratio;
    let g = bucket.service_grid();
    let span = (g.max_total - g.min_total) as f64 / g.full as f64;
    let lo = g.to_fraction(g.min_total);

    let mut rows = Vec::with_capacity(floors.len());
    for floor in floors {
        let b = bucket.with_service_floor(floor)?;
        let cells = spec
            .solvers
            .iter()
            .map(|&kind| match timed_solve(&b, kind, spec) {
                Ok((r, secs)) => SweepCell {
                    solver: kind,
                    wall_seconds: secs,
                    gmroi: r.optimal_ratio,
                    relative_gmroi: relative(r.optimal_ratio, reference),
                    iterations: r.outer_iterations(),
                    feasible: r.feasible,
                    error: None,
                },
                Err(e) => SweepCell {
                    solver: kind,
                    wall_seconds: f64::NAN,
                    gmroi: f64::NAN,
                    relative_gmroi: f64::NAN,
                    iterations: 0,
                    feasible: false,
                    error: Some(format!("{}: {e}", e.root().category())),
                },
            })
            .collect();
        let tightness = if span > 0.0 {
            ((floor - lo) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        rows.push(SweepRow {
            normalized_tightness: tightness,
            service_floor: floor,
            cells,
        });
    }
    Ok(rows)
}

fn relative(gmroi: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if gmroi == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        gmroi / reference
    }
}

pub fn sweep_csv(rows: &[SweepRow], solvers: &[SolverKind], timing: bool) -> String {
    let mut out = String::from("normalized_tightness,service_floor");
    for s in solvers {
        out.push_str(&format!(",{s}_t_s,{s}_relative_gmroi,{s}_iterations"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{}",
            row.normalized_tightness, row.service_floor
        ));
        for &s in solvers {
            match row.cell(s) {
                Some(c) if c.error.is_none() => out.push_str(&format!(
                    ",{},{},{}",
                    if timing {
                        c.wall_seconds.to_string()
                    } else {
                        String::new()
                    },
                    c.relative_gmroi,
                    c.iterations
                )),
                _ => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioMetrics, SkuScenarios};
    use crate::solvers::brute_force_fractional;

    fn running_example() -> Bucket {
        let m = |a, b, n| ScenarioMetrics::new(0, a, b, n, 100).unwrap();
        Bucket::new(
            vec![
                SkuScenarios::new("1", vec![m(10.0, 5.0, 90), m(12.0, 8.0, 95)]).unwrap(),
                SkuScenarios::new("2", vec![m(8.0, 4.0, 80), m(9.0, 6.0, 99)]).unwrap(),
            ],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn floor_rules() {
        let b = running_example();
        assert_eq!(resolve_floor(&b, FloorRule::Midpoint).unwrap(), 0.91);
        assert_eq!(
            resolve_floor(&b, FloorRule::BelowLowerBound).unwrap(),
            0.845
        );
        assert_eq!(resolve_floor(&b, FloorRule::Explicit(0.3)).unwrap(), 0.3);
        assert!(resolve_floor(&b, FloorRule::Explicit(1.3)).is_err());
    }

    #[test]
    fn midpoint_compare_on_running_example() {
        let spec = ExperimentSpec::default();
        let rows = run_compare(&[running_example()], &spec).unwrap();
        let row = &rows[0];
        assert_eq!(row.instance_label, "C00002-0000004");
        let oracle = brute_force_fractional(&running_example().with_service_floor(0.91).unwrap())
            .unwrap()
            .1;
        assert_eq!(oracle, 19.0 / 11.0);
        assert_eq!(row.exact_gmroi, Some(oracle));
        let exact = row.outcome(SolverKind::Exact).unwrap();
        assert_eq!(exact.tar_err, Some(0.0));
        assert_eq!(exact.tar_err_cell(), "EXACT");
        let lag = row.outcome(SolverKind::Lagrangian).unwrap();
        assert!(lag.run.as_ref().unwrap().feasible);
    }

    #[test]
    fn below_lower_bound_is_unconstrained_and_exact_everywhere() {
        let spec = ExperimentSpec {
            floor_rule: FloorRule::BelowLowerBound,
            ..ExperimentSpec::default()
        };
        let row = &run_compare(&[running_example()], &spec).unwrap()[0];
        assert_eq!(row.regime, Regime::Unconstrained);
        assert!(row.instance_label.starts_with('U'));
        for o in &row.outcomes {
            assert_eq!(o.tar_err_cell(), "EXACT", "{:?}", o.solver);
        }
    }

    #[test]
    fn infeasible_explicit_floor() {
        let spec = ExperimentSpec {
            floor_rule: FloorRule::Explicit(0.99),
            ..ExperimentSpec::default()
        };
        assert!(matches!(
            run_compare(&[running_example()], &spec),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn sweep_endpoints() {
        let b = running_example();
        let f = sweep_floors(&b, 3).unwrap();
        assert_eq!(f[0], 0.85);
        // one unit below the max of 0.97
        assert_eq!(f[2], 0.965);
        assert!(sweep_floors(&b, 1).is_err());
    }

    #[test]
    fn sweep_starts_at_one() {
        let spec = ExperimentSpec {
            sweep: Some(4),
            ..ExperimentSpec::default()
        };
        let rows = run_sweep(&running_example(), &spec).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].normalized_tightness, 0.0);
        for c in &rows[0].cells {
            assert_eq!(c.relative_gmroi, 1.0);
        }
        let exact: Vec<f64> = rows
            .iter()
            .map(|r| r.cell(SolverKind::Exact).unwrap().relative_gmroi)
            .collect();
        assert!(exact.windows(2).all(|w| w[1] <= w[0]), "{exact:?}");
    }

    #[test]
    fn csv_shapes() {
        let spec = ExperimentSpec::default();
        let rows = run_compare(&[running_example()], &spec).unwrap();
        let csv = comparison_csv(&rows, &spec.solvers, false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert!(lines[0]
            .starts_with("instance,regime,service_floor,reference_gmroi,exact_iter,exact_t_s"));
    }
}
