//! Single-echelon, lost-sales, reorder-point inventory simulation.
//!
//! Each SKU is replayed at every safety-stock level of its grid against the
//! same demand paths (common random numbers), producing one
//! [`ScenarioMetrics`] per level.
//!
//! Policy: reorder point `R = ss + round(mean * lead_time)`, order-up-to level
//! `R + round(mean * lead_time)`. At the end of each period, if the inventory
//! position is at or below `R` and nothing is on order, the gap to the
//! order-up-to level is ordered and arrives `lead_time` periods later, at the
//! start of that period. Demand that cannot be served is lost.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Bucket, ScenarioMetrics, SkuScenarios};

/// Dispersion at or above which demand is deterministic (`round(mean)` every period).
pub const DETERMINISTIC_DISPERSION: f64 = 1e6;

/// Target number of safety-stock levels in a default grid.
pub const DEFAULT_GRID_POINTS: usize = 60;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Review {
    #[default]
    Continuous,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderQuantityRule {
    #[default]
    OrderUpTo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sku_id: Option<String>,
    /// Periods simulated.
    pub horizon: u32,
    /// Mean demand per period.
    pub demand_mean: f64,
    /// Negative binomial shape; larger is less dispersed.
    pub demand_dispersion: f64,
    /// Periods between placing and receiving an order.
    pub lead_time: u32,
    pub unit_price: f64,
    pub unit_cost: f64,
    #[serde(default)]
    pub review: Review,
    #[serde(default)]
    pub order_quantity_rule: OrderQuantityRule,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.lead_time == 0 {
            return bad("lead_time must be >= 1".into());
        }
        if self.horizon < self.lead_time + 1 {
            return bad(format!(
                "horizon {} must be at least lead_time + 1 = {}",
                self.horizon,
                self.lead_time + 1
            ));
        }
        if !(self.demand_mean >= 0.0 && self.demand_mean.is_finite()) {
            return bad(format!(
                "demand_mean {} must be finite and >= 0",
                self.demand_mean
            ));
        }
        if !(self.demand_dispersion > 0.0) {
            return bad(format!(
                "demand_dispersion {} must be > 0",
                self.demand_dispersion
            ));
        }
        if !(self.unit_price >= 0.0 && self.unit_cost >= 0.0)
            || !self.unit_price.is_finite()
            || !self.unit_cost.is_finite()
        {
            return bad("unit price and cost must be finite and >= 0".into());
        }
        if self.unit_cost > self.unit_price {
            return bad(format!(
                "unit_cost {} above unit_price {} gives negative margins",
                self.unit_cost, self.unit_price
            ));
        }
        Ok(())
    }

    fn lead_time_demand(&self) -> u64 {
        (self.demand_mean * self.lead_time as f64).round() as u64
    }

    pub fn is_deterministic(&self) -> bool {
        self.demand_dispersion >= DETERMINISTIC_DISPERSION
    }
}

/// Strictly increasing safety-stock levels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    safety_stocks: Vec<u64>,
}

impl ScenarioGrid {
    pub fn new(safety_stocks: Vec<u64>) -> Result<Self> {
        if safety_stocks.is_empty() {
            return Err(Error::InvalidConfig("scenario grid is empty".into()));
        }
        if safety_stocks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "scenario grid must be strictly increasing".into(),
            ));
        }
        Ok(ScenarioGrid { safety_stocks })
    }

    /// About 60 levels from 0 to `ceil(4 * mean * lead_time)`.
    pub fn default_for(cfg: &SimConfig) -> Self {
        let top = (4.0 * cfg.demand_mean * cfg.lead_time as f64).ceil() as u64;
        let points = DEFAULT_GRID_POINTS.min(top as usize + 1);
        let mut levels: Vec<u64> = if points <= 1 {
            vec![0]
        } else {
            (0..points)
                .map(|i| ((i as f64) * top as f64 / (points - 1) as f64).round() as u64)
                .collect()
        };
        levels.dedup();
        ScenarioGrid {
            safety_stocks: levels,
        }
    }

    pub fn levels(&self) -> &[u64] {
        &self.safety_stocks
    }
}

/// Period-by-period record of one simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial_on_hand: u64,
    pub demand: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub units_sold: Vec<u64>,
    /// End-of-period stock.
    pub on_hand: Vec<u64>,
    pub in_stock_flag: Vec<bool>,
    /// `(period placed, quantity)`.
    pub orders_placed: Vec<(u32, u64)>,
}

impl Trajectory {
    /// Checks stock conservation and the lost-sales rule in every period.
    pub fn check_conservation(&self) -> std::result::Result<(), String> {
        let mut prev = self.initial_on_hand;
        for t in 0..self.demand.len() {
            let avail = prev + self.arrivals[t];
            if self.units_sold[t] != self.demand[t].min(avail) {
                return Err(format!(
                    "period {t}: sold {} of demand {} with {avail} available",
                    self.units_sold[t], self.demand[t]
                ));
            }
            if self.on_hand[t] != avail - self.units_sold[t] {
                return Err(format!(
                    "period {t}: on hand {} != {avail} - {}",
                    self.on_hand[t], self.units_sold[t]
                ));
            }
            prev = self.on_hand[t];
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the demand stream for one (SKU, replication) pair.
pub fn stream_seed(seed: u64, sku_index: u64, replication: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ sku_index) ^ replication)
}

/// Demand path of one replication. ChaCha8 seeded by [`stream_seed`];
/// negative binomial drawn as a gamma-Poisson mixture.
pub fn demand_path(cfg: &SimConfig, sku_index: u64, replication: u64) -> Result<Vec<u64>> {
    cfg.validate()?;
    let h = cfg.horizon as usize;
    if cfg.demand_mean == 0.0 {
        return Ok(vec![0; h]);
    }
    if cfg.is_deterministic() {
        return Ok(vec![cfg.demand_mean.round() as u64; h]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, sku_index, replication));
    let shape = cfg.demand_dispersion;
    let gamma = Gamma::new(shape, cfg.demand_mean / shape)
        .map_err(|e| Error::InvalidConfig(format!("demand distribution: {e}")))?;
    Ok((0..h)
        .map(|_| {
            let rate: f64 = gamma.sample(&mut rng);
            if rate > 0.0 {
                Poisson::new(rate).map_or(0, |p| p.sample(&mut rng) as u64)
            } else {
                0
            }
        })
        .collect())
}

/// Replays the reorder-point policy against a fixed demand path.
pub fn run_policy(cfg: &SimConfig, safety_stock: u64, demand: &[u64]) -> Trajectory {
    let lt_demand = cfg.lead_time_demand();
    let reorder_point = safety_stock + lt_demand;
    let order_up_to = reorder_point + lt_demand;
    let h = demand.len();
    let mut tr = Trajectory {
        initial_on_hand: order_up_to,
        demand: demand.to_vec(),
        arrivals: vec![0; h],
        units_sold: Vec::with_capacity(h),
        on_hand: Vec::with_capacity(h),
        in_stock_flag: Vec::with_capacity(h),
        orders_placed: Vec::new(),
    };
    let mut on_hand = order_up_to;
    // (arrival period, quantity)
    let mut pending: Option<(usize, u64)> = None;
    for (t, &d) in demand.iter().enumerate() {
        if let Some((due, q)) = pending {
            if due == t {
                tr.arrivals[t] = q;
                on_hand += q;
                pending = None;
            }
        }
        let sold = d.min(on_hand);
        on_hand -= sold;
        tr.units_sold.push(sold);
        tr.on_hand.push(on_hand);
        // zero-demand periods turn no customer away
        tr.in_stock_flag.push(on_hand > 0 || d == 0);

        if pending.is_none() && on_hand <= reorder_point {
            let q = order_up_to - on_hand;
            if q > 0 {
                pending = Some((t + cfg.lead_time as usize, q));
                tr.orders_placed.push((t as u32, q));
            }
        }
    }
    tr
}

fn metrics_of(cfg: &SimConfig, safety_stock: u64, tr: &Trajectory) -> Result<ScenarioMetrics> {
    let sold: u64 = tr.units_sold.iter().sum();
    let stock: u64 = tr.on_hand.iter().sum();
    let in_stock = tr.in_stock_flag.iter().filter(|&&f| f).count() as u64;
    ScenarioMetrics::new(
        safety_stock,
        sold as f64 * (cfg.unit_price - cfg.unit_cost),
        stock as f64 / tr.on_hand.len() as f64 * cfg.unit_cost,
        in_stock,
        tr.on_hand.len() as u64,
    )
}

/// One run at one safety-stock level, on the first replication's demand stream.
pub fn simulate_sku(cfg: &SimConfig, safety_stock: u64) -> Result<(Trajectory, ScenarioMetrics)> {
    simulate_replication(cfg, safety_stock, 0, 0)
}

pub fn simulate_replication(
    cfg: &SimConfig,
    safety_stock: u64,
    sku_index: u64,
    replication: u64,
) -> Result<(Trajectory, ScenarioMetrics)> {
    let demand = demand_path(cfg, sku_index, replication)?;
    let tr = run_policy(cfg, safety_stock, &demand);
    let m = metrics_of(cfg, safety_stock, &tr)?;
    Ok((tr, m))
}

fn scenarios_for(
    cfg: &SimConfig,
    grid: &ScenarioGrid,
    replications: u32,
    sku_index: u64,
) -> Result<SkuScenarios> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    cfg.validate()?;
    let paths = (0..replications as u64)
        .map(|r| demand_path(cfg, sku_index, r))
        .collect::<Result<Vec<_>>>()?;
    let scenarios = grid
        .levels()
        .iter()
        .map(|&ss| {
            let runs = paths
                .iter()
                .map(|d| metrics_of(cfg, ss, &run_policy(cfg, ss, d)))
                .collect::<Result<Vec<_>>>()?;
            if let [only] = runs.as_slice() {
                return Ok(only.clone());
            }
            let k = runs.len() as f64;
            ScenarioMetrics::new(
                ss,
                runs.iter().map(|m| m.margin).sum::<f64>() / k,
                runs.iter().map(|m| m.inventory).sum::<f64>() / k,
                runs.iter().map(|m| m.isp_numerator).sum(),
                runs.iter().map(|m| m.isp_denominator).sum(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let id = cfg.sku_id.clone().unwrap_or_else(|| sku_index.to_string());
    SkuScenarios::new(id, scenarios)
}

/// Scenario table of one SKU, averaging margin and inventory over
/// replications and pooling in-stock counts.
pub fn generate_scenarios(
    cfg: &SimConfig,
    grid: &ScenarioGrid,
    replications: u32,
) -> Result<SkuScenarios> {
    scenarios_for(cfg, grid, replications, 0)
}

/// Simulates every SKU (in parallel) and assembles them in input order.
pub fn generate_bucket(
    cfgs: &[SimConfig],
    grids: &[ScenarioGrid],
    service_floor: f64,
    replications: u32,
) -> Result<Bucket> {
    if cfgs.is_empty() || cfgs.len() != grids.len() {
        return Err(Error::InvalidConfig(format!(
            "{} configs for {} grids",
            cfgs.len(),
            grids.len()
        )));
    }
    let skus = cfgs
        .par_iter()
        .zip(grids.par_iter())
        .enumerate()
        .map(|(i, (cfg, grid))| scenarios_for(cfg, grid, replications, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Bucket::new(skus, service_floor)
}

/// Ranges from which a synthetic SKU population is drawn uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub skus: usize,
    pub horizon: u32,
    pub demand_mean: [f64; 2],
    pub demand_dispersion: [f64; 2],
    pub lead_time: [u32; 2],
    pub unit_price: [f64; 2],
    /// Gross margin as a fraction of price.
    pub margin_rate: [f64; 2],
}

impl PopulationSpec {
    pub fn configs(&self, seed: u64) -> Result<Vec<SimConfig>> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5ca1_ab1e));
        let mut draw = |r: [f64; 2]| -> f64 {
            if r[0] >= r[1] {
                r[0]
            } else {
                rng.random_range(r[0]..r[1])
            }
        };
        let mut out = Vec::with_capacity(self.skus);
        for _ in 0..self.skus {
            let price = draw(self.unit_price);
            let rate = draw(self.margin_rate);
            let mean = draw(self.demand_mean);
            let dispersion = draw(self.demand_dispersion);
            let lt =
                draw([self.lead_time[0] as f64, self.lead_time[1] as f64 + 1.0]).floor() as u32;
            out.push(SimConfig {
                sku_id: None,
                horizon: self.horizon,
                demand_mean: mean,
                demand_dispersion: dispersion,
                lead_time: lt.clamp(self.lead_time[0], self.lead_time[1]),
                unit_price: price,
                unit_cost: price * (1.0 - rate),
                review: Review::Continuous,
                order_quantity_rule: OrderQuantityRule::OrderUpTo,
                seed,
            });
        }
        out.iter().try_for_each(SimConfig::validate)?;
        Ok(out)
    }
}

/// Contents of a simulation config file: explicit SKUs, a synthetic
/// population, or both (explicit SKUs first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    #[serde(default = "one")]
    pub replications: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub service_floor: Option<f64>,
    #[serde(default, rename = "sku")]
    pub skus: Vec<SimConfig>,
    #[serde(default)]
    pub population: Option<PopulationSpec>,
}

fn one() -> u32 {
    1
}

impl SimulationPlan {
    /// Every SKU's config, with the plan seed applied to all of them.
    pub fn configs(&self) -> Result<Vec<SimConfig>> {
        let mut cfgs: Vec<SimConfig> = self
            .skus
            .iter()
            .cloned()
            .map(|mut c| {
                c.seed = self.seed;
                c
            })
            .collect();
        if let Some(pop) = &self.population {
            cfgs.extend(pop.configs(self.seed)?);
        }
        if cfgs.is_empty() {
            return Err(Error::InvalidConfig("plan defines no skus".into()));
        }
        Ok(cfgs)
    }

    /// Simulates the plan on default grids.
    pub fn generate(&self, service_floor: f64) -> Result<Bucket> {
        let cfgs = self.configs()?;
        let grids: Vec<ScenarioGrid> = cfgs.iter().map(ScenarioGrid::default_for).collect();
        generate_bucket(&cfgs, &grids, service_floor, self.replications)
    }
}
