//! Exhaustive enumeration over all selections. Only for small buckets; serves
//! as the reference the other solvers are checked against.

use super::for_each_selection;
use crate::error::{Error, Result};
use crate::scenario::{classify_regime, Bucket, Regime, Selection};

/// Largest number of selections the enumerators will visit.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

fn check_size(bucket: &Bucket, limit: u128) -> Result<()> {
    let count = bucket.selection_count();
    if count > limit {
        return Err(Error::TooLarge { count, limit });
    }
    Ok(())
}

fn infeasible(bucket: &Bucket) -> Error {
    Error::Infeasible {
        floor: bucket.service_floor(),
        max_achievable: classify_regime(bucket).max_achievable_isp,
    }
}

/// Best feasible GMROI by enumerating every selection.
pub fn brute_force_fractional(bucket: &Bucket) -> Result<(Selection, f64)> {
    check_size(bucket, BRUTE_FORCE_LIMIT)?;
    let mut best: Option<(Selection, f64)> = None;
    let mut zero_inventory = false;
    for_each_selection(bucket, |sel| {
        if !bucket.meets_floor(sel) {
            return;
        }
        let (m, i) = bucket.margin_inventory(sel);
        if i <= 0.0 {
            zero_inventory = true;
            return;
        }
        let ratio = m / i;
        if best.as_ref().is_none_or(|(_, r)| ratio > *r) {
            best = Some((sel.clone(), ratio));
        }
    });
    if zero_inventory {
        return Err(Error::ZeroInventory);
    }
    best.ok_or_else(|| infeasible(bucket))
}

/// Best feasible `M(x) - lambda * I(x)` by enumeration, up to `limit` selections.
pub fn brute_force_subproblem(
    bucket: &Bucket,
    lambda: f64,
    limit: u128,
) -> Result<(Selection, f64)> {
    check_size(bucket, limit)?;
    let mut best: Option<(Selection, f64)> = None;
    for_each_selection(bucket, |sel| {
        if !bucket.meets_floor(sel) {
            return;
        }
        let v = bucket.reduced_value(sel, lambda);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((sel.clone(), v));
        }
    });
    best.ok_or_else(|| infeasible(bucket))
}

/// The set of distinct feasible GMROI values, ascending.
pub fn achievable_ratios(bucket: &Bucket) -> Result<Vec<f64>> {
    check_size(bucket, BRUTE_FORCE_LIMIT)?;
    if classify_regime(bucket).regime == Regime::Infeasible {
        return Err(infeasible(bucket));
    }
    let mut ratios = Vec::new();
    for_each_selection(bucket, |sel| {
        if bucket.meets_floor(sel) {
            let (m, i) = bucket.margin_inventory(sel);
            ratios.push(m / i);
        }
    });
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    Ok(ratios)
}
