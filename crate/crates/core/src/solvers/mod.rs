//! Solvers for the parametric subproblem
//! `W(lambda) = max { M(x) - lambda * I(x) : x feasible }`.

mod brute;
mod exact;
mod lagrangian;
mod unconstrained;

use serde::{Deserialize, Serialize};

pub use brute::{
    achievable_ratios, brute_force_fractional, brute_force_subproblem, BRUTE_FORCE_LIMIT,
};
pub use exact::{solve_exact, solve_exact_with, ExactConfig, ExactSolver};
pub use lagrangian::{
    enumerate_solve, solve_lagrangian, DualTrace, DualTracePoint, LagrangianConfig,
    LagrangianSolver,
};
pub use unconstrained::{solve_unconstrained, UnconstrainedSolver};

use crate::error::{Error, Result};
use crate::scenario::{classify_regime, Bucket, Regime, Selection};

/// Reduced scores `W_ij = M_ij - lambda * I_ij`, laid out like the bucket.
#[derive(Clone, Debug)]
pub struct ScoreMatrix {
    lambda: f64,
    offsets: Vec<usize>,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(bucket: &Bucket, lambda: f64) -> Self {
        let c = bucket.columns();
        let scores = c
            .margin
            .iter()
            .zip(&c.inventory)
            .map(|(m, i)| m - lambda * i)
            .collect();
        ScoreMatrix {
            lambda,
            offsets: c.offsets.clone(),
            scores,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn sku(&self, i: usize) -> &[f64] {
        &self.scores[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sku(i)[j]
    }

    /// `sum_i W_{i, sel_i}`.
    pub fn total(&self, sel: &Selection) -> f64 {
        sel.0.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.scores.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// Index maximizing `w[j] + c * s[j]`; the lowest index wins ties.
///
/// Candidates are compared through differences, so for a fixed pair the
/// outcome is monotone in `c` even under rounding.
pub(crate) fn argmax_penalized(w: &[f64], s: &[f64], c: f64) -> usize {
    let mut best = 0;
    for j in 1..w.len() {
        let gain = (w[j] - w[best]) + c * (s[j] - s[best]);
        if gain > 0.0 {
            best = j;
        }
    }
    best
}

/// One subproblem answer.
#[derive(Clone, Debug)]
pub struct Subsolution {
    pub selection: Selection,
    /// `M(x) - lambda * I(x)` of `selection`, recomputed from the bucket.
    pub value: f64,
    pub dual_trace: Option<DualTrace>,
}

/// A routine returning a maximizer of `M(x) - lambda * I(x)` over the
/// selections it is responsible for.
pub trait SubproblemSolver {
    fn name(&self) -> &'static str;

    fn solve(&self, bucket: &Bucket, lambda: f64) -> Result<Subsolution>;
}

impl<S: SubproblemSolver + ?Sized> SubproblemSolver for &S {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn solve(&self, bucket: &Bucket, lambda: f64) -> Result<Subsolution> {
        (**self).solve(bucket, lambda)
    }
}

impl<S: SubproblemSolver + ?Sized> SubproblemSolver for Box<S> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn solve(&self, bucket: &Bucket, lambda: f64) -> Result<Subsolution> {
        (**self).solve(bucket, lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Lagrangian,
    Unconstrained,
    /// Unconstrained regime goes to the separable solver, everything else to
    /// the Lagrangian one.
    Auto,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Lagrangian => "lagrangian",
            SolverKind::Unconstrained => "unconstrained",
            SolverKind::Auto => "auto",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "lagrangian" => Ok(SolverKind::Lagrangian),
            "unconstrained" => Ok(SolverKind::Unconstrained),
            "auto" => Ok(SolverKind::Auto),
            other => Err(Error::Validation(format!("unknown solver `{other}`"))),
        }
    }
}

/// Tunables for all subproblem solvers.
#[derive(Clone, Debug, Default)]
pub struct SolverSettings {
    pub exact: ExactConfig,
    pub lagrangian: LagrangianConfig,
}

/// Builds the solver for `kind`, resolving `Auto` against the bucket's regime.
pub fn make_solver(
    kind: SolverKind,
    bucket: &Bucket,
    settings: &SolverSettings,
) -> Box<dyn SubproblemSolver + Send + Sync> {
    match kind {
        SolverKind::Exact => Box::new(ExactSolver::new(settings.exact.clone())),
        SolverKind::Lagrangian => Box::new(LagrangianSolver::new(settings.lagrangian.clone())),
        SolverKind::Unconstrained => Box::new(UnconstrainedSolver),
        SolverKind::Auto => match classify_regime(bucket).regime {
            Regime::Unconstrained => Box::new(UnconstrainedSolver),
            _ => Box::new(LagrangianSolver::new(settings.lagrangian.clone())),
        },
    }
}

/// Visits every selection in lexicographic order.
pub(crate) fn for_each_selection(bucket: &Bucket, mut visit: impl FnMut(&Selection)) {
    let sizes: Vec<usize> = bucket.skus().iter().map(|k| k.scenarios.len()).collect();
    let mut sel = Selection(vec![0; sizes.len()]);
    loop {
        visit(&sel);
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            sel.0[i] += 1;
            if sel.0[i] < sizes[i] {
                break;
            }
            sel.0[i] = 0;
        }
    }
}
