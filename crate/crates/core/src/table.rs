//! Scenario-table CSV: `sku_id,scenario_id,safety_stock,margin,inventory,isp_num,isp_den`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Bucket, ScenarioMetrics, SkuScenarios};

pub const SCENARIO_HEADER: [&str; 7] = [
    "sku_id",
    "scenario_id",
    "safety_stock",
    "margin",
    "inventory",
    "isp_num",
    "isp_den",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    sku_id: String,
    scenario_id: u64,
    safety_stock: u64,
    margin: f64,
    inventory: f64,
    isp_num: u64,
    isp_den: u64,
}

pub fn write_scenarios<W: Write>(bucket: &Bucket, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for sku in bucket.skus() {
        for (j, s) in sku.scenarios.iter().enumerate() {
            w.serialize(Row {
                sku_id: sku.sku_id.clone(),
                scenario_id: j as u64,
                safety_stock: s.safety_stock,
                margin: s.margin,
                inventory: s.inventory,
                isp_num: s.isp_numerator,
                isp_den: s.isp_denominator,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_scenarios_file(bucket: &Bucket, path: impl AsRef<Path>) -> Result<()> {
    write_scenarios(bucket, std::fs::File::create(path)?)
}

/// Parses a scenario table into a bucket with service floor 0.
///
/// SKUs keep first-appearance order; each SKU's scenarios are sorted by
/// safety stock.
pub fn read_scenarios<R: Read>(input: R) -> Result<Bucket> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers().map_err(|e| parse_error(&e, 1))?.clone();
    if header.iter().collect::<Vec<_>>() != SCENARIO_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", SCENARIO_HEADER.join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<(u64, u64, ScenarioMetrics)>> = HashMap::new();
    for rec in rdr.deserialize::<Row>() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(&e, line)
        })?;
        let m = ScenarioMetrics::new(
            row.safety_stock,
            row.margin,
            row.inventory,
            row.isp_num,
            row.isp_den,
        )
        .map_err(|e| {
            Error::Validation(format!(
                "sku `{}` scenario {}: {e}",
                row.sku_id, row.scenario_id
            ))
        })?;
        let entry = groups.entry(row.sku_id.clone()).or_insert_with(|| {
            order.push(row.sku_id.clone());
            Vec::new()
        });
        entry.push((row.safety_stock, row.scenario_id, m));
    }
    if order.is_empty() {
        return Err(Error::Validation("scenario table has no rows".into()));
    }

    let skus = order
        .into_iter()
        .map(|id| {
            let mut rows = groups.remove(&id).unwrap_or_default();
            rows.sort_by_key(|&(ss, sid, _)| (ss, sid));
            if rows.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation(format!(
                    "sku `{id}` repeats a safety-stock level"
                )));
            }
            SkuScenarios::new(id, rows.into_iter().map(|(_, _, m)| m).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Bucket::new(skus, 0.0)
}

pub fn ingest_scenarios(path: impl AsRef<Path>) -> Result<Bucket> {
    read_scenarios(std::fs::File::open(path)?)
}

fn parse_error(e: &csv::Error, line: u64) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}
