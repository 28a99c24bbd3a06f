//! Shared domain types: assets, quarters, money at a fixed scale, discounting
//! configuration, and the global assumption set.
//!
//! Everything here is an immutable value after construction and safe to share
//! across threads.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An amount of USD carried at millions-of-USD scale.
///
/// Fundamentals (revenue, earnings, assets, market cap) are normalized to
/// this scale on ingest. Conversion to raw USD is explicit via
/// [`UsdMillions::as_usd`]; per-unit prices stay plain `f64` USD.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UsdMillions(pub f64);

impl UsdMillions {
    pub const ZERO: UsdMillions = UsdMillions(0.0);

    pub fn from_usd(raw: f64) -> Self {
        UsdMillions(raw / 1e6)
    }

    /// The raw USD amount.
    pub fn as_usd(self) -> f64 {
        self.0 * 1e6
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn abs(self) -> Self {
        UsdMillions(self.0.abs())
    }
}

impl Add for UsdMillions {
    type Output = UsdMillions;
    fn add(self, rhs: UsdMillions) -> UsdMillions {
        UsdMillions(self.0 + rhs.0)
    }
}

impl AddAssign for UsdMillions {
    fn add_assign(&mut self, rhs: UsdMillions) {
        self.0 += rhs.0;
    }
}

impl Sub for UsdMillions {
    type Output = UsdMillions;
    fn sub(self, rhs: UsdMillions) -> UsdMillions {
        UsdMillions(self.0 - rhs.0)
    }
}

impl Mul<f64> for UsdMillions {
    type Output = UsdMillions;
    fn mul(self, rhs: f64) -> UsdMillions {
        UsdMillions(self.0 * rhs)
    }
}

impl Div<f64> for UsdMillions {
    type Output = UsdMillions;
    fn div(self, rhs: f64) -> UsdMillions {
        UsdMillions(self.0 / rhs)
    }
}

/// Ratio of two amounts at the same scale.
impl Div for UsdMillions {
    type Output = f64;
    fn div(self, rhs: UsdMillions) -> f64 {
        self.0 / rhs.0
    }
}

impl Neg for UsdMillions {
    type Output = UsdMillions;
    fn neg(self) -> UsdMillions {
        UsdMillions(-self.0)
    }
}

impl fmt::Display for UsdMillions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

/// A calendar quarter, totally ordered, written `YYYYQn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    pub year: i32,
    /// 1..=4
    pub index: u8,
}

impl Serialize for Quarter {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl Quarter {
    pub fn new(year: i32, index: u8) -> Result<Self> {
        if !(1..=4).contains(&index) {
            return Err(Error::invalid(
                "quarter",
                format!("index {index} out of 1..=4"),
            ));
        }
        Ok(Quarter { year, index })
    }

    pub fn from_date(date: NaiveDate) -> Self {
        Quarter {
            year: date.year(),
            index: ((date.month0() / 3) + 1) as u8,
        }
    }

    /// Signed number of quarters from `earlier` to `self`.
    pub fn quarters_since(self, earlier: Quarter) -> i32 {
        (self.year - earlier.year) * 4 + (self.index as i32 - earlier.index as i32)
    }

    pub fn next(self) -> Quarter {
        if self.index == 4 {
            Quarter {
                year: self.year + 1,
                index: 1,
            }
        } else {
            Quarter {
                year: self.year,
                index: self.index + 1,
            }
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, 3 * (self.index as u32 - 1) + 1, 1).unwrap()
    }

    pub fn last_day(self) -> NaiveDate {
        self.next().first_day().pred_opt().unwrap()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.index)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    /// Parses the `YYYYQn` form, e.g. `2021Q3`.
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::invalid("quarter", format!("expected YYYYQn, got {s:?}"));
        let (y, q) = s.split_once(['Q', 'q']).ok_or_else(err)?;
        let year: i32 = y.trim().parse().map_err(|_| err())?;
        let index: u8 = q.trim().parse().map_err(|_| err())?;
        if !(1..=4).contains(&index) {
            return Err(err());
        }
        Ok(Quarter { year, index })
    }
}

/// Whether the asset is a protocol token or publicly traded equity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Token,
    Equity,
}

impl AssetKind {
    /// Default share of revenue consumed by workforce expenses.
    pub fn default_workforce_share(self) -> f64 {
        match self {
            AssetKind::Token => 0.20,
            AssetKind::Equity => 0.30,
        }
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssetKind::Token => write!(f, "token"),
            AssetKind::Equity => write!(f, "equity"),
        }
    }
}

/// Business sector; the first three are DeFi classes, the last three the
/// traditional counterparts used for comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Dex,
    Plf,
    YieldAggregator,
    Exchange,
    Bank,
    AssetManager,
}

impl Sector {
    pub fn expected_kind(self) -> AssetKind {
        match self {
            Sector::Dex | Sector::Plf | Sector::YieldAggregator => AssetKind::Token,
            Sector::Exchange | Sector::Bank | Sector::AssetManager => AssetKind::Equity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Dex => "dex",
            Sector::Plf => "plf",
            Sector::YieldAggregator => "yield_aggregator",
            Sector::Exchange => "exchange",
            Sector::Bank => "bank",
            Sector::AssetManager => "asset_manager",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How an asset's cash flows are discounted: a flat annual rate, or a
/// weighted average cost of capital derived from the capital structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiscountConfig {
    Fixed {
        rate: f64,
    },
    Wacc {
        beta: f64,
        market_return: f64,
        cost_of_debt: f64,
        tax_rate: f64,
        equity: f64,
        debt: f64,
    },
}

impl DiscountConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiscountConfig::Fixed { rate } => {
                if !(rate > 0.0 && rate < 1.0) {
                    return Err(Error::invalid(
                        "discount.rate",
                        format!("{rate} not in (0, 1)"),
                    ));
                }
            }
            DiscountConfig::Wacc {
                beta,
                market_return,
                cost_of_debt,
                tax_rate,
                equity,
                debt,
            } => {
                if beta < 0.0 || !beta.is_finite() {
                    return Err(Error::invalid("discount.beta", "must be >= 0"));
                }
                for (name, v) in [
                    ("discount.market_return", market_return),
                    ("discount.cost_of_debt", cost_of_debt),
                    ("discount.tax_rate", tax_rate),
                ] {
                    if !(0.0..1.0).contains(&v) {
                        return Err(Error::invalid(name, format!("{v} not in [0, 1)")));
                    }
                }
                if equity < 0.0 || debt < 0.0 || equity + debt <= 0.0 {
                    return Err(Error::invalid("discount", "equity + debt must be > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Resolve a discount configuration to an annual rate.
///
/// A fixed configuration returns the rate unchanged; a WACC configuration
/// blends the cost of equity (beta times market return) with the after-tax
/// cost of debt, weighted by the capital structure. Convergence against the
/// perpetual growth rate is checked at valuation time, not here.
pub fn resolve_discount_rate(cfg: &DiscountConfig) -> Result<f64> {
    cfg.validate()?;
    let rate = match *cfg {
        DiscountConfig::Fixed { rate } => rate,
        DiscountConfig::Wacc {
            beta,
            market_return,
            cost_of_debt,
            tax_rate,
            equity,
            debt,
        } => crate::dcf::wacc(
            equity,
            debt,
            crate::dcf::cost_of_equity(beta, market_return),
            cost_of_debt,
            tax_rate,
        )?,
    };
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::invalid(
            "discount",
            format!("resolved rate {rate} not in (0, 1)"),
        ));
    }
    Ok(rate)
}

/// Global valuation assumptions shared by every asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    /// Annual revenue growth applied over the projection horizon.
    pub revenue_growth: f64,
    /// Perpetual growth rate `g` of the terminal perpetuity.
    pub perpetual_growth: f64,
    /// Number of projected years.
    pub horizon_years: u32,
    /// Average annual market return, used for beta-derived cost of equity.
    pub market_return: f64,
}

impl Default for Assumptions {
    fn default() -> Self {
        Assumptions {
            revenue_growth: 0.05,
            perpetual_growth: 0.0239,
            horizon_years: 6,
            market_return: 0.10,
        }
    }
}

impl Assumptions {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_years < 1 {
            return Err(Error::invalid("horizon_years", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.perpetual_growth) {
            return Err(Error::invalid("perpetual_growth", "must be in [0, 1)"));
        }
        if !self.revenue_growth.is_finite() || self.revenue_growth <= -1.0 {
            return Err(Error::invalid("revenue_growth", "must be finite and > -1"));
        }
        if !(0.0..1.0).contains(&self.market_return) {
            return Err(Error::invalid("market_return", "must be in [0, 1)"));
        }
        Ok(())
    }
}

/// One entry of the asset registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    /// Ticker, the asset's identity everywhere in the pipeline.
    pub ticker: String,
    pub name: String,
    pub kind: AssetKind,
    pub sector: Sector,
    /// Circulating units (tokens or shares), strictly positive.
    pub supply: f64,
    /// Market price per unit in USD on `spot_date`.
    pub spot_price: f64,
    pub spot_date: NaiveDate,
    pub discounting: DiscountConfig,
    /// Fraction of revenue consumed by workforce expenses, in [0, 1).
    pub workforce_share: f64,
    /// Base-year revenue for the cash-flow projection, USD millions. When
    /// absent the annualization helper (twice the observed first-half
    /// revenue) is used instead.
    pub base_revenue: Option<UsdMillions>,
    /// Optional note about corrections applied to this asset's fixtures.
    pub erratum: Option<String>,
}

impl AssetRecord {
    pub fn validate(&self, assumptions: &Assumptions) -> Result<()> {
        let fail = |reason: String| Error::Asset {
            ticker: self.ticker.clone(),
            reason,
        };
        if self.ticker.is_empty() {
            return Err(Error::invalid("ticker", "must not be empty"));
        }
        if !(self.supply > 0.0 && self.supply.is_finite()) {
            return Err(fail(format!("supply {} must be > 0", self.supply)));
        }
        if self.spot_price < 0.0 || !self.spot_price.is_finite() {
            return Err(fail(format!("spot_price {} must be >= 0", self.spot_price)));
        }
        if self.sector.expected_kind() != self.kind {
            return Err(fail(format!(
                "sector {} does not admit kind {}",
                self.sector, self.kind
            )));
        }
        if !(0.0..1.0).contains(&self.workforce_share) {
            return Err(fail(format!(
                "workforce_share {} not in [0, 1)",
                self.workforce_share
            )));
        }
        if let Some(base) = self.base_revenue {
            if base.0 < 0.0 || !base.is_finite() {
                return Err(fail(format!("base_revenue {} must be >= 0", base.0)));
            }
        }
        let rate = resolve_discount_rate(&self.discounting).map_err(|e| fail(e.to_string()))?;
        if rate <= assumptions.perpetual_growth {
            return Err(fail(format!(
                "discount rate {:.4} must exceed perpetual growth {:.4}",
                rate, assumptions.perpetual_growth
            )));
        }
        Ok(())
    }
}
