//! Least-squares isotonic regression by pool-adjacent-violators, used to make
//! simulated metrics non-decreasing in safety stock.

use crate::error::{Error, Result};
use crate::scenario::{Bucket, ScenarioMetrics, SkuScenarios};

/// A metric observed at increasing safety-stock levels.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MetricSeries {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let s = MetricSeries { xs, ys, weights };
        s.validate()?;
        Ok(s)
    }

    /// Unit weights at positions `0, 1, 2, ...`.
    pub fn unweighted(ys: Vec<f64>) -> Self {
        MetricSeries {
            xs: (0..ys.len()).map(|i| i as f64).collect(),
            weights: vec![1.0; ys.len()],
            ys,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ys.len();
        if n == 0 || self.xs.len() != n || self.weights.len() != n {
            return Err(Error::Validation(
                "series lengths must match and be >= 1".into(),
            ));
        }
        if self.xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation(
                "series xs must be strictly increasing".into(),
            ));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Validation("series weights must be positive".into()));
        }
        if self.ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::Validation("series values must be finite".into()));
        }
        Ok(())
    }
}

struct Block {
    sum: f64,
    weight: f64,
    len: usize,
    /// `y` itself for a single point; `y * w / w` can be off by an ulp.
    mean: f64,
}

/// Weighted least-squares non-decreasing fit.
///
/// Values that are never pooled come back bit-for-bit unchanged.
pub fn isotonic_fit(series: &MetricSeries) -> Result<Vec<f64>> {
    series.validate()?;
    let mut blocks: Vec<Block> = Vec::with_capacity(series.ys.len());
    for (&y, &w) in series.ys.iter().zip(&series.weights) {
        blocks.push(Block {
            sum: y * w,
            weight: w,
            len: 1,
            mean: y,
        });
        while blocks.len() > 1 {
            let k = blocks.len();
            if blocks[k - 2].mean <= blocks[k - 1].mean {
                break;
            }
            let last = blocks.pop().unwrap();
            let prev = blocks.last_mut().unwrap();
            prev.sum += last.sum;
            prev.weight += last.weight;
            prev.len += last.len;
            prev.mean = prev.sum / prev.weight;
        }
    }
    let mut out = Vec::with_capacity(series.ys.len());
    for b in &blocks {
        out.extend(std::iter::repeat_n(b.mean, b.len));
    }
    Ok(out)
}

/// Fits margin, inventory and ISP of one SKU independently, with unit weights.
///
/// ISP is clamped to `[0, 1]` and re-rationalized on its own denominator.
pub fn preprocess_sku(sku: &SkuScenarios) -> Result<SkuScenarios> {
    let xs: Vec<f64> = sku
        .scenarios
        .iter()
        .map(|s| s.safety_stock as f64)
        .collect();
    let weights = vec![1.0; xs.len()];
    let fit = |f: fn(&ScenarioMetrics) -> f64| -> Result<Vec<f64>> {
        isotonic_fit(&MetricSeries::new(
            xs.clone(),
            sku.scenarios.iter().map(f).collect(),
            weights.clone(),
        )?)
    };
    let margin = fit(|s| s.margin)?;
    let inventory = fit(|s| s.inventory)?;
    let isp = fit(|s| s.isp)?;

    let scenarios = sku
        .scenarios
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let den = s.isp_denominator;
            let num = if isp[j].to_bits() == s.isp.to_bits() {
                s.isp_numerator
            } else {
                (isp[j].clamp(0.0, 1.0) * den as f64).round() as u64
            };
            ScenarioMetrics {
                safety_stock: s.safety_stock,
                margin: margin[j],
                inventory: inventory[j],
                isp: num as f64 / den as f64,
                isp_numerator: num,
                isp_denominator: den,
                rationalized: s.rationalized,
            }
        })
        .collect();
    SkuScenarios::new(sku.sku_id.clone(), scenarios)
}

pub fn preprocess_bucket(bucket: &Bucket) -> Result<Bucket> {
    let skus = bucket
        .skus()
        .iter()
        .map(preprocess_sku)
        .collect::<Result<Vec<_>>>()?;
    Bucket::new(skus, bucket.service_floor())
}
