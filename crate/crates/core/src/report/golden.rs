//! Reference NPV tables and the deviation report against them.
//!
//! A data directory may carry `golden/npv_tables.csv`, a long-format table
//! of the published per-asset valuation figures the fixture set is built to
//! reproduce (`asset,field,index,value`). The engine compares its own output
//! cell by cell and flags every cell outside the reproduction tolerance, so
//! systematic differences (notably the discounted terminal value, which the
//! reference tables do not derive from their own stated formula) stay
//! visible instead of being absorbed into the fixtures.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dcf::DcfResult;
use crate::domain::AssetKind;
use crate::error::{Error, Result};

/// Reference valuation figures for one asset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldenDcf {
    pub revenue: Vec<f64>,
    pub workforce_expenses: Vec<f64>,
    pub net_income: Vec<f64>,
    pub pv_cashflows: Vec<f64>,
    pub pv_terminal: Option<f64>,
    pub total_pv: Option<f64>,
    pub fair_price: Option<f64>,
    pub market_price: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldenTables {
    tables: BTreeMap<String, GoldenDcf>,
}

impl GoldenTables {
    pub fn get(&self, ticker: &str) -> Option<&GoldenDcf> {
        self.tables.get(ticker)
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// Parse `golden/npv_tables.csv`.
pub fn load_golden(input: &str) -> Result<GoldenTables> {
    let mut lines = input.lines();
    match lines.next() {
        Some(h) if h.trim() == "asset,field,index,value" => {}
        other => {
            return Err(Error::FileFormat(format!(
                "golden tables: expected header asset,field,index,value, got {other:?}"
            )))
        }
    }
    let mut tables: BTreeMap<String, GoldenDcf> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::FileFormat(format!(
                "golden tables line {}: expected 4 fields",
                i + 2
            )));
        }
        let value: f64 = fields[3].trim().parse().map_err(|_| {
            Error::FileFormat(format!(
                "golden tables line {}: bad value {:?}",
                i + 2,
                fields[3]
            ))
        })?;
        let entry = tables.entry(fields[0].trim().to_string()).or_default();
        let index = fields[2].trim();
        let push = |vec: &mut Vec<f64>| -> Result<()> {
            let idx: usize = index.parse().map_err(|_| {
                Error::FileFormat(format!("golden tables line {}: bad index {index:?}", i + 2))
            })?;
            if idx != vec.len() {
                return Err(Error::FileFormat(format!(
                    "golden tables line {}: non-contiguous index {idx}",
                    i + 2
                )));
            }
            vec.push(value);
            Ok(())
        };
        match fields[1].trim() {
            "revenue" => push(&mut entry.revenue)?,
            "workforce_expenses" => push(&mut entry.workforce_expenses)?,
            "net_income" => push(&mut entry.net_income)?,
            "pv_cashflows" => push(&mut entry.pv_cashflows)?,
            "pv_terminal" => entry.pv_terminal = Some(value),
            "total_pv" => entry.total_pv = Some(value),
            "fair_price" => entry.fair_price = Some(value),
            "market_price" => entry.market_price = Some(value),
            other => {
                return Err(Error::FileFormat(format!(
                    "golden tables line {}: unknown field {other:?}",
                    i + 2
                )))
            }
        }
    }
    Ok(GoldenTables { tables })
}

/// One flagged cell of the deviation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub ticker: String,
    pub field: String,
    /// Year offset for projection cells; absent for summary cells.
    pub index: Option<usize>,
    pub engine: f64,
    pub reference: f64,
    pub delta: f64,
}

/// Reproduction tolerances: projection and PV cells must land within the
/// print precision of the reference tables (tokens are printed at two
/// decimals on small magnitudes, firms on large ones).
fn projection_tolerance(kind: AssetKind) -> f64 {
    match kind {
        AssetKind::Token => 0.01,
        AssetKind::Equity => 0.1,
    }
}

fn pv_tolerance(kind: AssetKind) -> f64 {
    match kind {
        AssetKind::Token => 0.01,
        AssetKind::Equity => 0.5,
    }
}

fn summary_tolerance(kind: AssetKind) -> f64 {
    match kind {
        AssetKind::Token => 0.02,
        AssetKind::Equity => 1.0,
    }
}

fn price_tolerance(reference: f64) -> f64 {
    (0.005 * reference.abs()).max(0.02)
}

/// Compare an engine result against a reference table and return every cell
/// outside its tolerance, in table order.
pub fn deviations(result: &DcfResult, golden: &GoldenDcf, kind: AssetKind) -> Vec<Deviation> {
    let mut out = Vec::new();
    let mut flag = |field: &str, index: Option<usize>, engine: f64, reference: f64, tol: f64| {
        let delta = engine - reference;
        if delta.abs() > tol {
            out.push(Deviation {
                ticker: result.ticker.clone(),
                field: field.to_string(),
                index,
                engine,
                reference,
                delta,
            });
        }
    };

    let proj_tol = projection_tolerance(kind);
    for (field, engine_cell, reference) in [
        ("revenue", 0, &golden.revenue),
        ("workforce_expenses", 1, &golden.workforce_expenses),
        ("net_income", 2, &golden.net_income),
        ("pv_cashflows", 3, &golden.pv_cashflows),
    ] {
        let tol = if field == "pv_cashflows" {
            pv_tolerance(kind)
        } else {
            proj_tol
        };
        for (i, row) in result.rows.iter().enumerate() {
            let Some(&want) = reference.get(i) else { break };
            let got = match engine_cell {
                0 => row.revenue.0,
                1 => row.workforce_expenses.0,
                2 => row.net_income.0,
                _ => row.pv.0,
            };
            flag(field, Some(i), got, want, tol);
        }
    }

    let sum_tol = summary_tolerance(kind);
    if let Some(want) = golden.pv_terminal {
        flag("pv_terminal", None, result.pv_terminal.0, want, sum_tol);
    }
    if let Some(want) = golden.total_pv {
        flag("total_pv", None, result.total_pv.0, want, sum_tol);
    }
    if let Some(want) = golden.fair_price {
        flag(
            "fair_price",
            None,
            result.fair_price,
            want,
            price_tolerance(want),
        );
    }
    if let Some(want) = golden.market_price {
        flag(
            "market_price",
            None,
            result.market_price,
            want,
            price_tolerance(want),
        );
    }
    out
}
