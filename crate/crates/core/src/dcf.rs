//! Intrinsic valuation: cost of capital, cash-flow projection, discounting,
//! Gordon terminal value, and the resulting fair price per unit.
//!
//! The projection runs `n` years starting at offset 0; the first projected
//! year is carried undiscounted and the terminal perpetuity is discounted one
//! period after the final projected year. All computations are stateless pure
//! functions over `f64` at millions-of-USD scale.

use serde::Serialize;

use crate::domain::{resolve_discount_rate, AssetRecord, Assumptions, UsdMillions};
use crate::error::{Error, Result};

/// One projected year of the cash-flow table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionRow {
    /// Year offset from the base year, starting at 0.
    pub year_offset: u32,
    pub revenue: UsdMillions,
    pub workforce_expenses: UsdMillions,
    pub net_income: UsdMillions,
    /// Present value of `net_income`; zero until [`discount_rows`] fills it.
    pub pv: UsdMillions,
}

/// Over/under valuation call for a fair price against the market price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Overvalued,
    Fair,
    Undervalued,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Overvalued => write!(f, "Overvalued"),
            Verdict::Fair => write!(f, "Fair"),
            Verdict::Undervalued => write!(f, "Undervalued"),
        }
    }
}

/// Default half-width of the Fair band around the market/fair price ratio.
pub const DEFAULT_VERDICT_BAND: f64 = 0.10;

/// Full valuation result for one asset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcfResult {
    pub ticker: String,
    pub rows: Vec<ProjectionRow>,
    /// Gordon perpetuity value one period after the final projected year,
    /// before discounting.
    pub terminal_value_undiscounted: UsdMillions,
    pub pv_terminal: UsdMillions,
    /// Sum of the discounted rows plus the discounted terminal value.
    pub total_pv: UsdMillions,
    /// USD per unit: `total_pv` spread over the circulating supply.
    pub fair_price: f64,
    pub market_price: f64,
    pub verdict: Verdict,
    /// Set when the fair price was not positive and the verdict fell back to
    /// the overvalued-by-convention case.
    pub verdict_degenerate: bool,
    pub discount_rate: f64,
    pub perpetual_growth: f64,
}

/// Weighted average cost of capital:
/// `E/(E+D) * Re + D/(E+D) * Rd * (1 - tax)`.
pub fn wacc(
    equity: f64,
    debt: f64,
    cost_of_equity: f64,
    cost_of_debt: f64,
    tax_rate: f64,
) -> Result<f64> {
    if equity < 0.0 || debt < 0.0 || equity + debt <= 0.0 {
        return Err(Error::invalid("wacc", "equity + debt must be > 0"));
    }
    let total = equity + debt;
    Ok((equity / total) * cost_of_equity + (debt / total) * cost_of_debt * (1.0 - tax_rate))
}

/// Cost of equity as beta times the average market return.
pub fn cost_of_equity(beta: f64, market_return: f64) -> f64 {
    beta * market_return
}

/// Project revenue, workforce expenses and net income over `n` years.
///
/// Revenue compounds at `growth` from `base_revenue`; workforce expenses are
/// a fixed share of revenue and net income is the remainder. Present values
/// are left unset.
pub fn project_cashflows(
    base_revenue: UsdMillions,
    growth: f64,
    workforce_share: f64,
    n: u32,
) -> Vec<ProjectionRow> {
    (0..n)
        .map(|t| {
            let revenue = base_revenue * (1.0 + growth).powi(t as i32);
            let workforce_expenses = revenue * workforce_share;
            ProjectionRow {
                year_offset: t,
                revenue,
                workforce_expenses,
                net_income: revenue - workforce_expenses,
                pv: UsdMillions::ZERO,
            }
        })
        .collect()
}

/// Fill present values: `pv_t = net_income_t / (1+r)^t`, with the first
/// projected year undiscounted.
pub fn discount_rows(mut rows: Vec<ProjectionRow>, rate: f64) -> Vec<ProjectionRow> {
    for row in &mut rows {
        row.pv = row.net_income / (1.0 + rate).powi(row.year_offset as i32);
    }
    rows
}

/// Gordon growing perpetuity: `cash * (1+g) / (r-g)`.
pub fn terminal_value(final_cash: UsdMillions, growth: f64, rate: f64) -> Result<UsdMillions> {
    if rate <= growth {
        return Err(Error::DivergentValuation { rate, growth });
    }
    Ok(final_cash * (1.0 + growth) / (rate - growth))
}

/// Classify a market price against a fair price with a symmetric band.
///
/// The call depends only on the ratio `market/fair`: above `1 + band` is
/// overvalued, below `1 - band` undervalued, in between fair. A non-positive
/// fair price with a positive market price is overvalued by convention (the
/// caller is expected to surface the degenerate case).
pub fn verdict(fair_price: f64, market_price: f64, band: f64) -> Verdict {
    if fair_price <= 0.0 {
        return Verdict::Overvalued;
    }
    let ratio = market_price / fair_price;
    if ratio > 1.0 + band {
        Verdict::Overvalued
    } else if ratio < 1.0 - band {
        Verdict::Undervalued
    } else {
        Verdict::Fair
    }
}

/// Annualization fallback for the base-year revenue: twice the observed
/// first-half revenue of `year`. Present only when both Q1 and Q2 of that
/// year are in the series.
pub fn annualize_first_half(
    quarters: &[crate::ingest::QuarterlyFundamentals],
    year: i32,
) -> Option<UsdMillions> {
    let find = |index: u8| {
        quarters
            .iter()
            .find(|q| q.quarter.year == year && q.quarter.index == index)
            .map(|q| q.revenue)
    };
    let (q1, q2) = (find(1)?, find(2)?);
    Some((q1 + q2) * 2.0)
}

/// Resolve the projection's base revenue: the explicit registry figure when
/// present, otherwise the first-half annualization for the spot year.
pub fn resolve_base_revenue(
    asset: &AssetRecord,
    quarters: &[crate::ingest::QuarterlyFundamentals],
) -> Option<UsdMillions> {
    use chrono::Datelike;
    asset
        .base_revenue
        .or_else(|| annualize_first_half(quarters, asset.spot_date.year()))
}

/// Value one asset end to end: project, discount, close with the terminal
/// perpetuity, and compare the per-unit fair price with the market price.
pub fn value_asset(
    asset: &AssetRecord,
    base_revenue: UsdMillions,
    assumptions: &Assumptions,
) -> Result<DcfResult> {
    value_asset_with_band(asset, base_revenue, assumptions, DEFAULT_VERDICT_BAND)
}

pub fn value_asset_with_band(
    asset: &AssetRecord,
    base_revenue: UsdMillions,
    assumptions: &Assumptions,
    band: f64,
) -> Result<DcfResult> {
    assumptions.validate()?;
    if !asset.supply.is_finite() || asset.supply <= 0.0 {
        return Err(Error::Asset {
            ticker: asset.ticker.clone(),
            reason: format!("supply {} must be > 0", asset.supply),
        });
    }
    if base_revenue.0 < 0.0 || !base_revenue.is_finite() {
        return Err(Error::Asset {
            ticker: asset.ticker.clone(),
            reason: format!("base revenue {} must be >= 0", base_revenue.0),
        });
    }
    let rate = resolve_discount_rate(&asset.discounting)?;
    let growth = assumptions.perpetual_growth;
    if rate <= growth {
        return Err(Error::DivergentValuation { rate, growth });
    }

    let n = assumptions.horizon_years;
    let rows = discount_rows(
        project_cashflows(
            base_revenue,
            assumptions.revenue_growth,
            asset.workforce_share,
            n,
        ),
        rate,
    );
    let final_cash = rows.last().expect("horizon >= 1").net_income;
    let tv = terminal_value(final_cash, growth, rate)?;
    // Final row sits at t = n-1; the perpetuity starts one period later.
    let pv_terminal = tv / (1.0 + rate).powi(n as i32);

    let mut total_pv = UsdMillions::ZERO;
    for row in &rows {
        total_pv += row.pv;
    }
    total_pv += pv_terminal;

    let fair_price = total_pv.as_usd() / asset.supply;
    let call = verdict(fair_price, asset.spot_price, band);

    Ok(DcfResult {
        ticker: asset.ticker.clone(),
        rows,
        terminal_value_undiscounted: tv,
        pv_terminal,
        total_pv,
        fair_price,
        market_price: asset.spot_price,
        verdict: call,
        verdict_degenerate: fair_price <= 0.0 && asset.spot_price > 0.0,
        discount_rate: rate,
        perpetual_growth: growth,
    })
}
