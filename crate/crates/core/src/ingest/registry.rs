//! Asset registry loading.
//!
//! The registry is one TOML document with a global `[assumptions]` block and
//! one `[[asset]]` block per entry:
//!
//! ```toml
//! [assumptions]
//! revenue_growth = 0.05      # optional, defaults shown
//! perpetual_growth = 0.0239
//! horizon_years = 6
//! market_return = 0.10
//!
//! [[asset]]
//! ticker = "UNI"
//! name = "Uniswap"
//! kind = "token"             # token | equity
//! sector = "dex"             # dex | plf | yield_aggregator | exchange | bank | asset_manager
//! supply = 460045871.6       # circulating units
//! spot_price = 5.0           # USD per unit
//! spot_date = "2022-06-30"
//! base_revenue = 108.68      # optional, USD millions
//! workforce_share = 0.20     # optional, defaults to 0.20 (token) / 0.30 (equity)
//! erratum = "..."            # optional fixture-correction note
//!
//! [asset.discount]
//! type = "fixed"             # or "wacc" with beta, market_return,
//! rate = 0.25                # cost_of_debt, tax_rate, equity, debt
//! ```
//!
//! Every record is validated on load; an asset whose resolved discount rate
//! does not exceed the perpetual growth rate is a hard error here.

use chrono::NaiveDate;
use serde::Deserialize;

use crate::domain::{AssetKind, AssetRecord, Assumptions, DiscountConfig, Sector, UsdMillions};
use crate::error::{Error, Result};
use crate::fundamentals::MarketCapSampling;

/// A validated registry: the asset universe in file order plus the global
/// assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    pub assets: Vec<AssetRecord>,
    pub assumptions: Assumptions,
    /// How token quarterly market caps are sampled from the daily series.
    pub market_cap_sampling: MarketCapSampling,
}

impl Registry {
    pub fn asset(&self, ticker: &str) -> Option<&AssetRecord> {
        self.assets.iter().find(|a| a.ticker == ticker)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegistry {
    #[serde(default)]
    assumptions: RawAssumptions,
    #[serde(default, rename = "asset")]
    assets: Vec<RawAsset>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssumptions {
    revenue_growth: Option<f64>,
    perpetual_growth: Option<f64>,
    horizon_years: Option<u32>,
    market_return: Option<f64>,
    market_cap_sampling: Option<MarketCapSampling>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAsset {
    ticker: String,
    name: String,
    kind: AssetKind,
    sector: Sector,
    supply: f64,
    spot_price: f64,
    spot_date: String,
    discount: RawDiscount,
    workforce_share: Option<f64>,
    base_revenue: Option<f64>,
    erratum: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawDiscount {
    Fixed {
        rate: f64,
    },
    Wacc {
        beta: f64,
        market_return: Option<f64>,
        cost_of_debt: f64,
        tax_rate: f64,
        equity: f64,
        debt: f64,
    },
}

/// Parse and validate a registry document. Any invalid asset is a hard
/// error.
pub fn load_registry(input: &str) -> Result<Registry> {
    let (registry, rejected) = load_registry_lenient(input)?;
    if let Some((_, err)) = rejected.into_iter().next() {
        return Err(err);
    }
    Ok(registry)
}

/// Like [`load_registry`], but invalid assets are returned as per-ticker
/// errors instead of failing the whole document, so commands can proceed
/// with the surviving assets. Document-level problems (TOML syntax, bad
/// assumptions, duplicate tickers) remain hard errors.
pub fn load_registry_lenient(input: &str) -> Result<(Registry, Vec<(String, Error)>)> {
    let raw: RawRegistry = toml::from_str(input).map_err(|e| Error::Registry(e.to_string()))?;

    let defaults = Assumptions::default();
    let assumptions = Assumptions {
        revenue_growth: raw
            .assumptions
            .revenue_growth
            .unwrap_or(defaults.revenue_growth),
        perpetual_growth: raw
            .assumptions
            .perpetual_growth
            .unwrap_or(defaults.perpetual_growth),
        horizon_years: raw
            .assumptions
            .horizon_years
            .unwrap_or(defaults.horizon_years),
        market_return: raw
            .assumptions
            .market_return
            .unwrap_or(defaults.market_return),
    };
    assumptions.validate()?;
    let market_cap_sampling = raw.assumptions.market_cap_sampling.unwrap_or_default();

    let mut assets: Vec<AssetRecord> = Vec::with_capacity(raw.assets.len());
    let mut rejected = Vec::new();
    for raw_asset in raw.assets {
        let ticker = raw_asset.ticker.clone();
        match build_asset(raw_asset, &assumptions) {
            Ok(record) => {
                if assets.iter().any(|a| a.ticker == record.ticker) {
                    return Err(Error::Registry(format!(
                        "duplicate asset ticker {:?}",
                        record.ticker
                    )));
                }
                match record.validate(&assumptions) {
                    Ok(()) => assets.push(record),
                    Err(err) => rejected.push((ticker, err)),
                }
            }
            Err(err) => rejected.push((ticker, err)),
        }
    }
    Ok((
        Registry {
            assets,
            assumptions,
            market_cap_sampling,
        },
        rejected,
    ))
}

fn build_asset(raw: RawAsset, assumptions: &Assumptions) -> Result<AssetRecord> {
    let spot_date = NaiveDate::parse_from_str(&raw.spot_date, "%Y-%m-%d").map_err(|_| {
        Error::Registry(format!(
            "{}: invalid spot_date {:?}",
            raw.ticker, raw.spot_date
        ))
    })?;
    let discounting = match raw.discount {
        RawDiscount::Fixed { rate } => DiscountConfig::Fixed { rate },
        RawDiscount::Wacc {
            beta,
            market_return,
            cost_of_debt,
            tax_rate,
            equity,
            debt,
        } => DiscountConfig::Wacc {
            beta,
            market_return: market_return.unwrap_or(assumptions.market_return),
            cost_of_debt,
            tax_rate,
            equity,
            debt,
        },
    };
    Ok(AssetRecord {
        workforce_share: raw
            .workforce_share
            .unwrap_or(raw.kind.default_workforce_share()),
        ticker: raw.ticker,
        name: raw.name,
        kind: raw.kind,
        sector: raw.sector,
        supply: raw.supply,
        spot_price: raw.spot_price,
        spot_date,
        discounting,
        base_revenue: raw.base_revenue.map(UsdMillions),
        erratum: raw.erratum,
    })
}
