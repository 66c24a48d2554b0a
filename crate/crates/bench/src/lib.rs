//! Instance builders shared by the benchmarks.

use gmroi_core::experiment::{resolve_floor, FloorRule};
use gmroi_core::sim::PopulationSpec;
use gmroi_core::{Bucket, SimulationPlan};

/// A synthetic population whose SKUs all get the full 60-level grid.
pub fn plan(skus: usize, horizon: u32, seed: u64) -> SimulationPlan {
    SimulationPlan {
        replications: 1,
        seed,
        service_floor: None,
        skus: Vec::new(),
        population: Some(PopulationSpec {
            skus,
            horizon,
            demand_mean: [3.0, 12.0],
            demand_dispersion: [1.0, 6.0],
            lead_time: [5, 10],
            unit_price: [5.0, 50.0],
            margin_rate: [0.2, 0.5],
        }),
    }
}

/// Simulated bucket with its floor at the midpoint of the achievable range.
pub fn constrained_bucket(skus: usize, horizon: u32, seed: u64) -> Bucket {
    let b = plan(skus, horizon, seed).generate(0.0).expect("simulate");
    let floor = resolve_floor(&b, FloorRule::Midpoint).expect("floor");
    b.with_service_floor(floor).expect("floor")
}
