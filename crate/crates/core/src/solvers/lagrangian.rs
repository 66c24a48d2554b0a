//! Lagrangian relaxation of the service floor with bisection on the
//! multiplier.
//!
//! For a multiplier `mu >= 0` the relaxed subproblem separates by SKU: each
//! SKU picks `argmax_j W_ij + (mu / n) * S_ij`. The induced service level
//! `S(x(mu))` is non-decreasing in `mu`, so the smallest multiplier whose
//! selection meets the floor is found by doubling an upper bracket and then
//! bisecting.

use serde::{Deserialize, Serialize};

use super::{argmax_penalized, ScoreMatrix, SubproblemSolver, Subsolution};
use crate::error::{Error, Result};
use crate::scenario::{classify_regime, Bucket, Regime, Selection};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LagrangianConfig {
    /// Bisection stops once the bracket is this narrow. `None` scales with
    /// the scores: `1e-7 * (1 + n * max |W_ij|)`.
    pub mu_tolerance: Option<f64>,
    pub mu_initial_high: f64,
    pub doubling_cap: u32,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig {
            mu_tolerance: None,
            mu_initial_high: 1.0,
            doubling_cap: 64,
        }
    }
}

impl LagrangianConfig {
    fn validate(&self) -> Result<()> {
        if let Some(t) = self.mu_tolerance {
            if !(t > 0.0) {
                return Err(Error::Validation(format!(
                    "mu tolerance {t} must be positive"
                )));
            }
        }
        if !(self.mu_initial_high > 0.0) || self.doubling_cap == 0 {
            return Err(Error::Validation(
                "mu_initial_high must be positive and doubling_cap >= 1".into(),
            ));
        }
        Ok(())
    }

    fn tolerance_for(&self, scores: &ScoreMatrix) -> f64 {
        self.mu_tolerance
            .unwrap_or_else(|| 1e-7 * (1.0 + scores.max_abs() * scores.n() as f64))
    }
}

/// One evaluated multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualTracePoint {
    pub mu: f64,
    /// `S(x(mu))`.
    pub induced_isp: f64,
    /// `phi(mu) = max_x { M - lambda I + mu S(x) } - mu C_S`.
    pub dual_value: f64,
    pub feasible: bool,
}

/// Every multiplier evaluated during one Lagrangian solve, in evaluation order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualTrace {
    pub points: Vec<DualTracePoint>,
    pub doublings: u32,
    pub bisections: u32,
    pub mu_tolerance: f64,
    /// Multiplier that produced the returned selection (0 when the floor is slack).
    pub effective_mu: f64,
}

impl DualTrace {
    /// Points sorted by multiplier.
    pub fn sorted(&self) -> Vec<DualTracePoint> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        pts
    }

    /// `mu,induced_isp,dual_value` rows in increasing `mu`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,induced_isp,dual_value\n");
        for p in &self.sorted() {
            out.push_str(&format!("{},{},{}\n", p.mu, p.induced_isp, p.dual_value));
        }
        out
    }
}

struct Relaxed {
    selection: Selection,
    units: u64,
    dual_value: f64,
}

fn relaxed_argmax(bucket: &Bucket, scores: &ScoreMatrix, mu: f64) -> Relaxed {
    let cols = bucket.columns();
    let n = scores.n();
    let c = mu / n as f64;
    let mut chosen = Vec::with_capacity(n);
    let mut units = 0u64;
    let mut total = 0.0;
    for i in 0..n {
        let range = cols.range(i);
        let w = scores.sku(i);
        let s = &cols.isp[range.clone()];
        let j = argmax_penalized(w, s, c);
        chosen.push(j);
        units += cols.units[range.start + j];
        total += w[j] + c * s[j];
    }
    Relaxed {
        selection: Selection(chosen),
        units,
        dual_value: total - mu * bucket.service_floor(),
    }
}

/// `x(mu)`: the per-SKU maximizer of `W_ij + (mu / n) S_ij`.
pub fn enumerate_solve(bucket: &Bucket, lambda: f64, mu: f64) -> Selection {
    relaxed_argmax(bucket, &ScoreMatrix::new(bucket, lambda), mu).selection
}

/// Lagrangian solve of `W(lambda)`. The returned selection always meets the
/// floor; its value is the primal `M - lambda I`, not the dual bound.
pub fn solve_lagrangian(
    bucket: &Bucket,
    lambda: f64,
    cfg: &LagrangianConfig,
) -> Result<Subsolution> {
    cfg.validate()?;
    let regime = classify_regime(bucket);
    if regime.regime == Regime::Infeasible {
        return Err(Error::Infeasible {
            floor: bucket.service_floor(),
            max_achievable: regime.max_achievable_isp,
        });
    }
    let grid = bucket.service_grid();
    let scores = ScoreMatrix::new(bucket, lambda);
    let mut trace = DualTrace {
        mu_tolerance: cfg.tolerance_for(&scores),
        ..DualTrace::default()
    };
    let eval = |mu: f64, trace: &mut DualTrace| {
        let r = relaxed_argmax(bucket, &scores, mu);
        let feasible = grid.meets(r.units);
        trace.points.push(DualTracePoint {
            mu,
            induced_isp: grid.to_fraction(r.units),
            dual_value: r.dual_value,
            feasible,
        });
        (r.selection, feasible)
    };

    let (x0, slack) = eval(0.0, &mut trace);
    if slack {
        return Ok(finish(bucket, lambda, x0, trace));
    }

    let mut high = cfg.mu_initial_high;
    let mut best = loop {
        let (x, feasible) = eval(high, &mut trace);
        if feasible {
            break x;
        }
        if trace.doublings >= cfg.doubling_cap {
            return Err(Error::BracketingFailed {
                doublings: trace.doublings,
                reached: trace.points.last().map_or(0.0, |p| p.induced_isp),
                floor: bucket.service_floor(),
            });
        }
        high *= 2.0;
        trace.doublings += 1;
    };
    let mut best_mu = high;
    let mut best_score = scores.total(&best);

    let mut low = 0.0;
    while high - low > trace.mu_tolerance {
        let mu = 0.5 * (low + high);
        if mu <= low || mu >= high {
            break;
        }
        trace.bisections += 1;
        let (x, feasible) = eval(mu, &mut trace);
        if feasible {
            high = mu;
            let score = scores.total(&x);
            if score > best_score {
                best_score = score;
                best = x;
                best_mu = mu;
            }
        } else {
            low = mu;
        }
    }
    trace.effective_mu = best_mu;
    Ok(finish(bucket, lambda, best, trace))
}

fn finish(bucket: &Bucket, lambda: f64, selection: Selection, trace: DualTrace) -> Subsolution {
    Subsolution {
        value: bucket.reduced_value(&selection, lambda),
        selection,
        dual_trace: Some(trace),
    }
}

#[derive(Clone, Debug, Default)]
pub struct LagrangianSolver {
    pub config: LagrangianConfig,
}

impl LagrangianSolver {
    pub fn new(config: LagrangianConfig) -> Self {
        LagrangianSolver { config }
    }
}

impl SubproblemSolver for LagrangianSolver {
    fn name(&self) -> &'static str {
        "lagrangian"
    }

    fn solve(&self, bucket: &Bucket, lambda: f64) -> Result<Subsolution> {
        solve_lagrangian(bucket, lambda, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::super::brute_force_subproblem;
    use super::super::fixtures::{metrics, running_example};
    use super::*;
    use crate::scenario::SkuScenarios;

    #[test]
    fn zero_multiplier_is_plain_argmax() {
        let b = running_example(0.9);
        // W at lambda 1: (5, 4), (4, 3)
        assert_eq!(enumerate_solve(&b, 1.0, 0.0), Selection(vec![0, 0]));
    }

    #[test]
    fn multiplier_trades_score_for_service() {
        let b = Bucket::new(
            vec![
                SkuScenarios::new("x", vec![metrics(5.0, 1.0, 1, 2), metrics(4.0, 1.0, 2, 2)])
                    .unwrap(),
            ],
            0.0,
        )
        .unwrap();
        assert_eq!(enumerate_solve(&b, 0.0, 0.0), Selection(vec![0]));
        // 4 + 10 > 5 + 5
        assert_eq!(enumerate_solve(&b, 0.0, 10.0), Selection(vec![1]));
    }

    #[test]
    fn identical_scenarios_pick_lowest() {
        let b = Bucket::new(
            vec![SkuScenarios::new("x", vec![metrics(3.0, 2.0, 1, 2); 4]).unwrap()],
            0.0,
        )
        .unwrap();
        assert_eq!(enumerate_solve(&b, 0.5, 7.0), Selection(vec![0]));
    }

    #[test]
    fn slack_floor_returns_zero_multiplier() {
        let b = running_example(0.8);
        let sol = solve_lagrangian(&b, 0.0, &LagrangianConfig::default()).unwrap();
        let trace = sol.dual_trace.unwrap();
        assert_eq!(trace.effective_mu, 0.0);
        assert_eq!(trace.points.len(), 1);
        assert_eq!(sol.selection, enumerate_solve(&b, 0.0, 0.0));
    }

    #[test]
    fn running_example_at_optimal_ratio() {
        let b = running_example(0.9);
        let lambda = 19.0 / 11.0;
        let sol = solve_lagrangian(&b, lambda, &LagrangianConfig::default()).unwrap();
        assert_eq!(sol.selection, Selection(vec![0, 1]));
        assert!(sol.value.abs() < 1e-12);
        let (oracle, v) = brute_force_subproblem(&b, lambda, 4).unwrap();
        assert_eq!(oracle, sol.selection);
        assert!((v - sol.value).abs() < 1e-12);
    }

    #[test]
    fn bisection_count_is_bounded() {
        let b = running_example(0.9);
        let sol = solve_lagrangian(&b, 0.5, &LagrangianConfig::default()).unwrap();
        let t = sol.dual_trace.unwrap();
        let high = LagrangianConfig::default().mu_initial_high * 2f64.powi(t.doublings as i32);
        let bound = t.doublings + (high / t.mu_tolerance).log2().ceil() as u32;
        assert!(t.bisections <= bound, "{} > {bound}", t.bisections);
        assert!(b.meets_floor(&sol.selection));
    }

    #[test]
    fn infeasible_bucket_rejected() {
        let b = running_example(0.99);
        assert!(matches!(
            solve_lagrangian(&b, 0.0, &LagrangianConfig::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn bracketing_cap_is_reported() {
        // W gap of 1e30 per SKU cannot be overcome with mu <= 2
        let b = Bucket::new(
            vec![
                SkuScenarios::new("x", vec![metrics(1e30, 1.0, 0, 1), metrics(0.0, 1.0, 1, 1)])
                    .unwrap(),
            ],
            1.0,
        )
        .unwrap();
        let cfg = LagrangianConfig {
            doubling_cap: 1,
            ..LagrangianConfig::default()
        };
        assert!(matches!(
            solve_lagrangian(&b, 0.0, &cfg),
            Err(Error::BracketingFailed { doublings: 1, .. })
        ));
    }

    #[test]
    fn trace_csv_header() {
        let b = running_example(0.9);
        let t = solve_lagrangian(&b, 0.0, &LagrangianConfig::default())
            .unwrap()
            .dual_trace
            .unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("mu,induced_isp,dual_value\n"));
        assert_eq!(csv.lines().count(), t.points.len() + 1);
    }
}
