//! Fundamentals valuation engine for DAO tokens and publicly traded firms:
//! historical earnings tables with growth metrics, discounted-cash-flow fair
//! prices, and cross-sector valuation-multiple series.
//!
//! The pipeline is file based: an asset registry (TOML) names the universe
//! and its assumptions, daily token CSVs and quarterly firm CSVs provide the
//! fundamentals, and the [`report`] module renders tables in markdown, CSV or
//! JSON. All values are immutable after construction and every computation
//! is a deterministic pure function, so evaluation can be parallelized or
//! repeated byte-identically.

pub mod dcf;
pub mod domain;
pub mod error;
pub mod fundamentals;
pub mod ingest;
pub mod multiples;
pub mod report;

pub use domain::{
    resolve_discount_rate, AssetKind, AssetRecord, Assumptions, DiscountConfig, Quarter, Sector,
    UsdMillions,
};
pub use error::{Error, Result};
