use super::{argmax_penalized, ScoreMatrix, SubproblemSolver, Subsolution};
use crate::error::Result;
use crate::scenario::{Bucket, Selection};

/// Per-SKU argmax of `W_ij`, ignoring the service floor.
pub fn solve_unconstrained(bucket: &Bucket, lambda: f64) -> (Selection, f64) {
    let scores = ScoreMatrix::new(bucket, lambda);
    let sel = separable_argmax(&scores);
    let value = bucket.reduced_value(&sel, lambda);
    (sel, value)
}

pub(crate) fn separable_argmax(scores: &ScoreMatrix) -> Selection {
    Selection(
        (0..scores.n())
            .map(|i| {
                let w = scores.sku(i);
                argmax_penalized(w, w, 0.0)
            })
            .collect(),
    )
}

/// Separable solver for buckets whose floor never binds.
#[derive(Clone, Copy, Debug, Default)]
pub struct UnconstrainedSolver;

impl SubproblemSolver for UnconstrainedSolver {
    fn name(&self) -> &'static str {
        "unconstrained"
    }

    fn solve(&self, bucket: &Bucket, lambda: f64) -> Result<Subsolution> {
        let (selection, value) = solve_unconstrained(bucket, lambda);
        Ok(Subsolution {
            selection,
            value,
            dual_trace: None,
        })
    }
}
