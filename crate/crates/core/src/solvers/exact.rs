//! Exact subproblem solver: dynamic programming over integer service units.
//!
//! Start from the per-SKU argmax of `W_ij`. If that already meets the floor it
//! is optimal. Otherwise the solver must buy the missing service units
//! `deficit` at least cost, where moving SKU `i` to scenario `j` costs
//! `W_i,best - W_ij >= 0` and gains `u_ij - u_i,best` units. Moves that gain
//! nothing are never useful, so every candidate has positive gain and the DP
//! state is "units gained so far, capped at `deficit`":
//!
//! `cost_i[d] = min(cost_{i-1}[d], min_j c_ij + cost_{i-1}[max(d - g_ij, 0)])`
//!
//! where `cost_i[d]` is the least cost for the first `i` SKUs to gain at
//! least `d` units.

use serde::{Deserialize, Serialize};

use super::unconstrained::separable_argmax;
use super::{brute_force_subproblem, ScoreMatrix, SubproblemSolver, Subsolution};
use crate::error::{Error, Result};
use crate::scenario::{classify_regime, Bucket, Selection};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactConfig {
    /// Upper bound on `(skus with candidate moves) * (deficit + 1)`.
    pub dp_state_cap: u64,
    /// Buckets with at most this many selections are enumerated instead.
    pub enumeration_limit: u128,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            dp_state_cap: 100_000_000,
            enumeration_limit: 10_000,
        }
    }
}

impl ExactConfig {
    /// Always run the DP, however small the bucket.
    pub fn dp_only() -> Self {
        ExactConfig {
            enumeration_limit: 0,
            ..ExactConfig::default()
        }
    }
}

pub fn solve_exact(bucket: &Bucket, lambda: f64) -> Result<Subsolution> {
    solve_exact_with(bucket, lambda, &ExactConfig::default())
}

pub fn solve_exact_with(bucket: &Bucket, lambda: f64, cfg: &ExactConfig) -> Result<Subsolution> {
    let grid = bucket.service_grid();
    if !grid.meets(grid.max_total) {
        return Err(Error::Infeasible {
            floor: bucket.service_floor(),
            max_achievable: classify_regime(bucket).max_achievable_isp,
        });
    }
    let scores = ScoreMatrix::new(bucket, lambda);
    let base = separable_argmax(&scores);
    let base_units = bucket.service_units(&base);

    let selection = if grid.meets(base_units) {
        base
    } else if bucket.selection_count() <= cfg.enumeration_limit {
        brute_force_subproblem(bucket, lambda, cfg.enumeration_limit)?.0
    } else {
        cover_deficit(
            bucket,
            &scores,
            base,
            grid.required - base_units,
            cfg.dp_state_cap,
        )?
    };
    Ok(Subsolution {
        value: bucket.reduced_value(&selection, lambda),
        selection,
        dual_trace: None,
    })
}

#[derive(Clone, Copy, Debug)]
struct Move {
    cost: f64,
    gain: usize,
    scenario: usize,
}

/// Pareto-optimal moves away from `base_j`: no other move gains at least as
/// much for no more cost. Gains are capped at `deficit`.
fn candidate_moves(w: &[f64], units: &[u64], base_j: usize, deficit: usize) -> Vec<Move> {
    let mut moves: Vec<Move> = (0..w.len())
        .filter(|&j| units[j] > units[base_j])
        .map(|j| Move {
            cost: w[base_j] - w[j],
            gain: ((units[j] - units[base_j]) as usize).min(deficit),
            scenario: j,
        })
        .collect();
    moves.sort_by(|a, b| {
        b.gain
            .cmp(&a.gain)
            .then(a.cost.total_cmp(&b.cost))
            .then(a.scenario.cmp(&b.scenario))
    });
    let mut frontier = Vec::with_capacity(moves.len());
    let mut cheapest = f64::INFINITY;
    for m in moves {
        if m.cost < cheapest {
            cheapest = m.cost;
            frontier.push(m);
        }
    }
    frontier
}

fn cover_deficit(
    bucket: &Bucket,
    scores: &ScoreMatrix,
    base: Selection,
    deficit: u64,
    cap: u64,
) -> Result<Selection> {
    let cols = bucket.columns();
    let deficit_us = usize::try_from(deficit).map_err(|_| Error::BudgetOverflow {
        states: deficit,
        cap,
    })?;

    let layers: Vec<(usize, Vec<Move>)> = (0..scores.n())
        .filter_map(|i| {
            let units = &cols.units[cols.range(i)];
            let moves = candidate_moves(scores.sku(i), units, base.0[i], deficit_us);
            (!moves.is_empty()).then_some((i, moves))
        })
        .collect();

    let width = deficit_us + 1;
    let states = (layers.len() as u64).saturating_mul(width as u64);
    if states > cap {
        return Err(Error::BudgetOverflow { states, cap });
    }
    if layers.iter().any(|(_, m)| m.len() >= u16::MAX as usize) {
        return Err(Error::Validation("too many scenarios for one sku".into()));
    }

    let mut cost = vec![f64::INFINITY; width];
    cost[0] = 0.0;
    let mut next = vec![0.0; width];
    // choice[layer * width + d]: 0 keeps the base scenario, k takes move k - 1
    let mut choice = vec![0u16; layers.len() * width];

    for (layer, (_, moves)) in layers.iter().enumerate() {
        next.copy_from_slice(&cost);
        let row = &mut choice[layer * width..(layer + 1) * width];
        for (k, mv) in moves.iter().enumerate() {
            let tag = (k + 1) as u16;
            let g = mv.gain;
            let from_zero = cost[0] + mv.cost;
            for d in 0..=g.min(deficit_us) {
                if from_zero < next[d] {
                    next[d] = from_zero;
                    row[d] = tag;
                }
            }
            for d in g + 1..width {
                let cand = cost[d - g] + mv.cost;
                if cand < next[d] {
                    next[d] = cand;
                    row[d] = tag;
                }
            }
        }
        std::mem::swap(&mut cost, &mut next);
    }

    if !cost[deficit_us].is_finite() {
        return Err(Error::Infeasible {
            floor: bucket.service_floor(),
            max_achievable: classify_regime(bucket).max_achievable_isp,
        });
    }

    let mut sel = base;
    let mut d = deficit_us;
    for (layer, (i, moves)) in layers.iter().enumerate().rev() {
        let tag = choice[layer * width + d];
        if tag > 0 {
            let mv = moves[tag as usize - 1];
            sel.0[*i] = mv.scenario;
            d = d.saturating_sub(mv.gain);
        }
    }
    debug_assert_eq!(d, 0);
    Ok(sel)
}

#[derive(Clone, Debug, Default)]
pub struct ExactSolver {
    pub config: ExactConfig,
}

impl ExactSolver {
    pub fn new(config: ExactConfig) -> Self {
        ExactSolver { config }
    }
}

impl SubproblemSolver for ExactSolver {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, bucket: &Bucket, lambda: f64) -> Result<Subsolution> {
        solve_exact_with(bucket, lambda, &self.config)
    }
}
