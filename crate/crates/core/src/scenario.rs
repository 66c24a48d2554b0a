//! Problem data model: scenarios, buckets, selections and the bucket-level
//! aggregates `M(x)`, `I(x)`, `S(x)`.
//!
//! In-stock percentages are carried both as floats and as exact rationals
//! `isp_numerator / isp_denominator`. All service-floor comparisons go through
//! the rational form: every scenario's ISP is rescaled to integer *service
//! units* over the least common denominator of the bucket, and the floor is
//! converted to the smallest integer unit total that meets it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator assigned to ISP values supplied without a rational form.
pub const RATIONALIZED_DENOMINATOR: u64 = 1_000_000;

/// Performance of one simulated scenario (one SKU at one safety-stock level).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub safety_stock: u64,
    /// Gross margin dollars over the horizon.
    pub margin: f64,
    /// Average inventory investment dollars.
    pub inventory: f64,
    pub isp: f64,
    pub isp_numerator: u64,
    pub isp_denominator: u64,
    /// Set when `isp` came from a float and the rational form was derived by rounding.
    #[serde(default)]
    pub rationalized: bool,
}

impl ScenarioMetrics {
    pub fn new(
        safety_stock: u64,
        margin: f64,
        inventory: f64,
        isp_numerator: u64,
        isp_denominator: u64,
    ) -> Result<Self> {
        let m = ScenarioMetrics {
            safety_stock,
            margin,
            inventory,
            isp: if isp_denominator == 0 {
                f64::NAN
            } else {
                isp_numerator as f64 / isp_denominator as f64
            },
            isp_numerator,
            isp_denominator,
            rationalized: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds metrics from a float ISP, rounding it onto a grid of
    /// [`RATIONALIZED_DENOMINATOR`] and flagging the result.
    pub fn from_float_isp(
        safety_stock: u64,
        margin: f64,
        inventory: f64,
        isp: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&isp) {
            return Err(Error::Validation(format!("isp {isp} outside [0, 1]")));
        }
        let num = (isp * RATIONALIZED_DENOMINATOR as f64).round() as u64;
        let mut m = Self::new(
            safety_stock,
            margin,
            inventory,
            num,
            RATIONALIZED_DENOMINATOR,
        )?;
        m.rationalized = true;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.margin.is_finite() || self.margin < 0.0 {
            return Err(Error::Validation(format!(
                "margin {} must be finite and >= 0",
                self.margin
            )));
        }
        if !self.inventory.is_finite() || self.inventory < 0.0 {
            return Err(Error::Validation(format!(
                "inventory {} must be finite and >= 0",
                self.inventory
            )));
        }
        if self.isp_denominator == 0 {
            return Err(Error::Validation("isp denominator must be positive".into()));
        }
        if self.isp_numerator > self.isp_denominator {
            return Err(Error::Validation(format!(
                "isp numerator {} exceeds denominator {}",
                self.isp_numerator, self.isp_denominator
            )));
        }
        let exact = self.isp_numerator as f64 / self.isp_denominator as f64;
        if self.isp.to_bits() != exact.to_bits() {
            return Err(Error::Validation(format!(
                "isp {} disagrees with rational form {}/{}",
                self.isp, self.isp_numerator, self.isp_denominator
            )));
        }
        Ok(())
    }
}

/// The ordered scenario list of one SKU.
#[derive(Clone, Debug, PartialEq)]
pub struct SkuScenarios {
    pub sku_id: String,
    pub scenarios: Vec<ScenarioMetrics>,
}

impl SkuScenarios {
    pub fn new(sku_id: impl Into<String>, scenarios: Vec<ScenarioMetrics>) -> Result<Self> {
        let sku = SkuScenarios {
            sku_id: sku_id.into(),
            scenarios,
        };
        sku.validate()?;
        Ok(sku)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Validation(format!(
                "sku `{}` has no scenarios",
                self.sku_id
            )));
        }
        for s in &self.scenarios {
            s.validate()
                .map_err(|e| Error::Validation(format!("sku `{}`: {e}", self.sku_id)))?;
        }
        Ok(())
    }
}

/// One chosen scenario index per SKU.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Selection(pub Vec<usize>);

impl Selection {
    pub fn chosen(&self) -> &[usize] {
        &self.0
    }
}

/// Scenario data flattened SKU-major, for the solvers' inner loops.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Columns {
    /// `offsets[i]..offsets[i + 1]` are SKU `i`'s scenarios.
    pub offsets: Vec<usize>,
    pub margin: Vec<f64>,
    pub inventory: Vec<f64>,
    pub isp: Vec<f64>,
    /// ISP rescaled to the bucket's common denominator.
    pub units: Vec<u64>,
}

impl Columns {
    pub fn range(&self, sku: usize) -> std::ops::Range<usize> {
        self.offsets[sku]..self.offsets[sku + 1]
    }
}

/// Exact integer view of the service constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceGrid {
    /// Least common multiple of all ISP denominators in the bucket.
    pub scale: u64,
    /// `n * scale`: the unit total that corresponds to an average ISP of 1.
    pub full: u64,
    /// Smallest unit total meeting the service floor.
    pub required: u64,
    pub min_total: u64,
    pub max_total: u64,
}

impl ServiceGrid {
    pub fn meets(&self, units: u64) -> bool {
        units >= self.required
    }

    pub fn to_fraction(&self, units: u64) -> f64 {
        units as f64 / self.full as f64
    }
}

/// A group of SKUs planned jointly under one bucket-level service floor.
#[derive(Clone, Debug, PartialEq)]
pub struct Bucket {
    skus: Vec<SkuScenarios>,
    service_floor: f64,
    columns: Columns,
    grid: ServiceGrid,
}

impl Bucket {
    pub fn new(skus: Vec<SkuScenarios>, service_floor: f64) -> Result<Self> {
        if skus.is_empty() {
            return Err(Error::Validation(
                "bucket must contain at least one sku".into(),
            ));
        }
        check_floor(service_floor)?;
        for sku in &skus {
            sku.validate()?;
        }

        let mut scale: u64 = 1;
        for s in skus.iter().flat_map(|k| &k.scenarios) {
            scale = lcm(scale, s.isp_denominator).ok_or_else(|| {
                Error::ServiceGridOverflow("least common ISP denominator exceeds u64".into())
            })?;
        }
        let full = scale.checked_mul(skus.len() as u64).ok_or_else(|| {
            Error::ServiceGridOverflow(format!("{} skus x denominator {scale}", skus.len()))
        })?;

        let total: usize = skus.iter().map(|k| k.scenarios.len()).sum();
        let mut columns = Columns {
            offsets: Vec::with_capacity(skus.len() + 1),
            margin: Vec::with_capacity(total),
            inventory: Vec::with_capacity(total),
            isp: Vec::with_capacity(total),
            units: Vec::with_capacity(total),
        };
        let (mut min_total, mut max_total) = (0u64, 0u64);
        columns.offsets.push(0);
        for sku in &skus {
            let (mut lo, mut hi) = (u64::MAX, 0u64);
            for s in &sku.scenarios {
                let u = s.isp_numerator * (scale / s.isp_denominator);
                lo = lo.min(u);
                hi = hi.max(u);
                columns.margin.push(s.margin);
                columns.inventory.push(s.inventory);
                columns.isp.push(s.isp);
                columns.units.push(u);
            }
            min_total += lo;
            max_total += hi;
            columns.offsets.push(columns.margin.len());
        }

        let grid = ServiceGrid {
            scale,
            full,
            required: required_units(full, service_floor),
            min_total,
            max_total,
        };
        Ok(Bucket {
            skus,
            service_floor,
            columns,
            grid,
        })
    }

    /// Same scenarios under a different service floor.
    pub fn with_service_floor(&self, service_floor: f64) -> Result<Self> {
        check_floor(service_floor)?;
        let mut b = self.clone();
        b.service_floor = service_floor;
        b.grid.required = required_units(b.grid.full, service_floor);
        Ok(b)
    }

    pub fn skus(&self) -> &[SkuScenarios] {
        &self.skus
    }

    pub fn into_skus(self) -> Vec<SkuScenarios> {
        self.skus
    }

    pub fn service_floor(&self) -> f64 {
        self.service_floor
    }

    /// Number of SKUs.
    pub fn n(&self) -> usize {
        self.skus.len()
    }

    /// Total number of scenarios across all SKUs.
    pub fn scenario_count(&self) -> usize {
        self.columns.margin.len()
    }

    /// Number of distinct selections, saturating at `u128::MAX`.
    pub fn selection_count(&self) -> u128 {
        self.skus
            .iter()
            .try_fold(1u128, |acc, k| acc.checked_mul(k.scenarios.len() as u128))
            .unwrap_or(u128::MAX)
    }

    pub fn service_grid(&self) -> &ServiceGrid {
        &self.grid
    }

    pub fn has_rationalized_isp(&self) -> bool {
        self.skus
            .iter()
            .flat_map(|k| &k.scenarios)
            .any(|s| s.rationalized)
    }

    pub(crate) fn columns(&self) -> &Columns {
        &self.columns
    }

    pub fn validate_selection(&self, sel: &Selection) -> Result<()> {
        if sel.0.len() != self.n() {
            return Err(Error::InvalidSelection(format!(
                "{} indices for {} skus",
                sel.0.len(),
                self.n()
            )));
        }
        for (i, (&j, sku)) in sel.0.iter().zip(&self.skus).enumerate() {
            if j >= sku.scenarios.len() {
                return Err(Error::InvalidSelection(format!(
                    "sku {i} has {} scenarios, index {j} chosen",
                    sku.scenarios.len()
                )));
            }
        }
        Ok(())
    }

    /// Total service units of a selection (assumes it is valid).
    pub fn service_units(&self, sel: &Selection) -> u64 {
        sel.0
            .iter()
            .enumerate()
            .map(|(i, &j)| self.columns.units[self.columns.offsets[i] + j])
            .sum()
    }

    /// Exact check of `S(x) >= C_S`.
    pub fn meets_floor(&self, sel: &Selection) -> bool {
        self.grid.meets(self.service_units(sel))
    }

    /// `M(x) - lambda * I(x)`.
    pub fn reduced_value(&self, sel: &Selection, lambda: f64) -> f64 {
        let (m, inv) = self.margin_inventory(sel);
        m - lambda * inv
    }

    pub(crate) fn margin_inventory(&self, sel: &Selection) -> (f64, f64) {
        let c = &self.columns;
        let mut m = 0.0;
        let mut inv = 0.0;
        for (i, &j) in sel.0.iter().enumerate() {
            let k = c.offsets[i] + j;
            m += c.margin[k];
            inv += c.inventory[k];
        }
        (m, inv)
    }
}

fn check_floor(service_floor: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&service_floor) {
        return Err(Error::Validation(format!(
            "service floor {service_floor} outside [0, 1]"
        )));
    }
    Ok(())
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> Option<u64> {
    (a / gcd(a, b)).checked_mul(b)
}

/// Relative distance within which `n * floor` is snapped to an integer unit count.
pub const FLOOR_SNAP_TOLERANCE: f64 = 1e-9;

/// Smallest unit total meeting `floor`. Floors typed as decimals (0.9) are
/// not dyadic, so products within [`FLOOR_SNAP_TOLERANCE`] of an integer are
/// taken as that integer; everything else is an exact ceiling.
pub(crate) fn required_units(full: u64, floor: f64) -> u64 {
    let x = full as f64 * floor;
    let r = x.round();
    if (x - r).abs() <= FLOOR_SNAP_TOLERANCE * x.max(1.0) {
        r as u64
    } else {
        ceil_mul(full, floor)
    }
}

/// `ceil(n * x)` computed exactly for `x` in `[0, 1]`.
pub(crate) fn ceil_mul(n: u64, x: f64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0;
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    // x = mantissa * 2^exp
    let (mantissa, exp) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    let prod = n as u128 * mantissa as u128;
    let shift = (-exp) as u32;
    if shift >= 128 {
        return u64::from(prod > 0);
    }
    let q = prod >> shift;
    let r = prod & ((1u128 << shift) - 1);
    (q + u128::from(r != 0)) as u64
}

/// Bucket-level totals of a selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub total_margin: f64,
    pub total_inventory: f64,
    pub avg_isp: f64,
    /// Exact service units behind `avg_isp`.
    pub service_units: u64,
    pub gmroi: f64,
}

/// Sums of selected margins and inventories and the mean selected ISP.
pub fn aggregate(bucket: &Bucket, sel: &Selection) -> Result<Aggregates> {
    bucket.validate_selection(sel)?;
    let (total_margin, total_inventory) = bucket.margin_inventory(sel);
    if total_inventory <= 0.0 {
        return Err(Error::ZeroInventory);
    }
    let service_units = bucket.service_units(sel);
    Ok(Aggregates {
        total_margin,
        total_inventory,
        avg_isp: bucket.grid.to_fraction(service_units),
        service_units,
        gmroi: total_margin / total_inventory,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Every selection meets the floor.
    Unconstrained,
    /// The floor can bind.
    Constrained,
    /// No selection meets the floor.
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub min_achievable_isp: f64,
    pub max_achievable_isp: f64,
    pub regime: Regime,
}

pub fn classify_regime(bucket: &Bucket) -> RegimeReport {
    let g = &bucket.grid;
    let regime = if g.meets(g.min_total) {
        Regime::Unconstrained
    } else if !g.meets(g.max_total) {
        Regime::Infeasible
    } else {
        Regime::Constrained
    };
    RegimeReport {
        min_achievable_isp: g.to_fraction(g.min_total),
        max_achievable_isp: g.to_fraction(g.max_total),
        regime,
    }
}

/// Relative GMROI deviation from the exact optimum, denominator clamped at 1.
pub fn tar_err(exact_gmroi: f64, solver_gmroi: f64) -> f64 {
    (exact_gmroi - solver_gmroi).abs() / exact_gmroi.abs().max(1.0)
}
