//! Historical earnings tables: quarterly aggregation of daily token data,
//! quarter-over-quarter growth, and the compound quarterly growth rate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::domain::{AssetRecord, Quarter, UsdMillions};
use crate::error::{Error, Result};
use crate::ingest::{DailyTokenMetrics, QuarterlyFundamentals};

/// One rendered history row: a quarter's earnings and, when the preceding
/// quarter is available with nonzero earnings, its growth over it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub quarter: Quarter,
    pub earnings: UsdMillions,
    pub growth: Option<f64>,
}

/// Per-asset earnings history with the compound quarterly growth rate over
/// the full span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarningsHistory {
    pub ticker: String,
    pub rows: Vec<HistoryRow>,
    pub cqgr: Option<f64>,
}

/// How a quarter's market cap is sampled from the daily series. The ratio
/// figures are sensitive to this choice; quarter end is the default
/// convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketCapSampling {
    #[default]
    QuarterEnd,
    QuarterAverage,
}

/// Collapse a daily token series into quarterly fundamentals with the
/// default quarter-end market-cap sampling.
pub fn aggregate_token_quarters(daily: &[DailyTokenMetrics]) -> Vec<QuarterlyFundamentals> {
    aggregate_token_quarters_sampled(daily, MarketCapSampling::QuarterEnd)
}

/// Collapse a daily token series into quarterly fundamentals.
///
/// Revenue (and earnings) is the sum of daily protocol revenue within the
/// quarter; net assets are the treasury at the last observation; market cap
/// follows `sampling`. Edge quarters that do not cover their full calendar
/// span are flagged partial.
pub fn aggregate_token_quarters_sampled(
    daily: &[DailyTokenMetrics],
    sampling: MarketCapSampling,
) -> Vec<QuarterlyFundamentals> {
    let mut buckets: BTreeMap<Quarter, Vec<&DailyTokenMetrics>> = BTreeMap::new();
    for row in daily {
        buckets
            .entry(Quarter::from_date(row.date))
            .or_default()
            .push(row);
    }
    let last_index = buckets.len().saturating_sub(1);
    buckets
        .iter()
        .enumerate()
        .map(|(i, (&quarter, rows))| {
            let revenue = UsdMillions(rows.iter().map(|r| r.protocol_revenue.0).sum());
            let last = rows.last().expect("bucket is non-empty");
            let market_cap = match sampling {
                MarketCapSampling::QuarterEnd => last.market_cap,
                MarketCapSampling::QuarterAverage => UsdMillions(
                    rows.iter().map(|r| r.market_cap.0).sum::<f64>() / rows.len() as f64,
                ),
            };
            let partial = (i == 0 && rows[0].date > quarter.first_day())
                || (i == last_index && last.date < quarter.last_day());
            QuarterlyFundamentals {
                quarter,
                revenue,
                earnings: revenue,
                total_assets: None,
                total_liabilities: None,
                net_assets: last.treasury,
                market_cap,
                partial,
            }
        })
        .collect()
}

/// Quarter-over-quarter growth: `curr / prev - 1`.
pub fn qoq_growth(prev: UsdMillions, curr: UsdMillions) -> Result<f64> {
    if prev.0 == 0.0 {
        return Err(Error::UndefinedGrowth);
    }
    Ok(curr / prev - 1.0)
}

/// Compound quarterly growth rate between two observations `quarters` apart:
/// `(v_end / v_start)^(1/q) - 1`.
pub fn cqgr(v_start: UsdMillions, v_end: UsdMillions, quarters: i32) -> Result<f64> {
    if v_start.0 <= 0.0 || v_end.0 <= 0.0 || quarters < 1 {
        return Err(Error::GrowthDomain {
            start: v_start.0,
            end: v_end.0,
            quarters,
        });
    }
    Ok((v_end / v_start).powf(1.0 / quarters as f64) - 1.0)
}

/// Assemble the per-asset history: row-wise growth against the immediately
/// preceding quarter and the compound rate from the first quarter with
/// nonzero earnings to the last row.
///
/// Growth is present only where the preceding calendar quarter exists in the
/// series with nonzero earnings; gaps yield absent growth, never zero.
pub fn build_history(asset: &AssetRecord, quarters: &[QuarterlyFundamentals]) -> EarningsHistory {
    let mut rows: Vec<HistoryRow> = Vec::with_capacity(quarters.len());
    for (i, q) in quarters.iter().enumerate() {
        let growth = if i > 0 {
            let prev = &quarters[i - 1];
            if q.quarter.quarters_since(prev.quarter) == 1 && prev.earnings.0 != 0.0 {
                qoq_growth(prev.earnings, q.earnings).ok()
            } else {
                None
            }
        } else {
            None
        };
        rows.push(HistoryRow {
            quarter: q.quarter,
            earnings: q.earnings,
            growth,
        });
    }

    let cqgr = quarters
        .iter()
        .find(|q| q.earnings.0 != 0.0)
        .and_then(|start| {
            let end = quarters.last()?;
            let span = end.quarter.quarters_since(start.quarter);
            if span < 1 {
                return None;
            }
            cqgr(start.earnings, end.earnings, span).ok()
        });

    EarningsHistory {
        ticker: asset.ticker.clone(),
        rows,
        cqgr,
    }
}
