//! Comparable analysis: quarterly market-cap multiples per asset and the
//! DeFi-versus-TradFi sector spread.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::domain::{AssetKind, AssetRecord, Quarter, Sector, UsdMillions};
use crate::error::{Error, Result};
use crate::ingest::QuarterlyFundamentals;

/// Which fundamental the market cap is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultipleMetric {
    RevenueMultiple,
    NetAssetMultiple,
}

impl MultipleMetric {
    pub const ALL: [MultipleMetric; 2] = [
        MultipleMetric::RevenueMultiple,
        MultipleMetric::NetAssetMultiple,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MultipleMetric::RevenueMultiple => "revenue_multiple",
            MultipleMetric::NetAssetMultiple => "net_asset_multiple",
        }
    }
}

impl std::fmt::Display for MultipleMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplePoint {
    pub quarter: Quarter,
    pub ratio: f64,
    /// Present only for positive ratios; the figures are log scale.
    pub log10_ratio: Option<f64>,
}

/// Time-indexed ratio series for one asset and one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultipleSeries {
    pub ticker: String,
    pub kind: AssetKind,
    pub sector: Sector,
    pub metric: MultipleMetric,
    pub points: Vec<MultiplePoint>,
    /// Quarters whose denominator violated the metric's precondition,
    /// with the reason they were left out.
    pub omitted: Vec<(Quarter, String)>,
}

/// Market cap over revenue. Requires positive revenue.
pub fn revenue_multiple(market_cap: UsdMillions, revenue: UsdMillions) -> Result<f64> {
    if revenue.0 <= 0.0 {
        return Err(Error::invalid(
            "revenue",
            format!("{} must be > 0", revenue.0),
        ));
    }
    Ok(market_cap / revenue)
}

/// Market cap over net assets. Requires nonzero net assets; a negative
/// denominator yields a negative ratio that callers flag (no log point).
pub fn net_asset_multiple(market_cap: UsdMillions, net_assets: UsdMillions) -> Result<f64> {
    if net_assets.0 == 0.0 {
        return Err(Error::invalid("net_assets", "must be nonzero"));
    }
    Ok(market_cap / net_assets)
}

/// Build the per-quarter series for one asset and metric. Quarters with an
/// invalid denominator are omitted and recorded; every other quarter yields
/// exactly one point.
pub fn build_series(
    asset: &AssetRecord,
    quarters: &[QuarterlyFundamentals],
    metric: MultipleMetric,
) -> MultipleSeries {
    let mut points = Vec::new();
    let mut omitted = Vec::new();
    for q in quarters {
        let ratio = match metric {
            MultipleMetric::RevenueMultiple => revenue_multiple(q.market_cap, q.revenue),
            MultipleMetric::NetAssetMultiple => net_asset_multiple(q.market_cap, q.net_assets),
        };
        match ratio {
            Ok(ratio) => points.push(MultiplePoint {
                quarter: q.quarter,
                ratio,
                log10_ratio: (ratio > 0.0).then(|| ratio.log10()),
            }),
            Err(e) => omitted.push((q.quarter, e.to_string())),
        }
    }
    points.sort_by_key(|p| p.quarter);
    MultipleSeries {
        ticker: asset.ticker.clone(),
        kind: asset.kind,
        sector: asset.sector,
        metric,
        points,
        omitted,
    }
}

/// A DeFi sector paired with its traditional counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectorPair {
    pub defi: Sector,
    pub tradfi: Sector,
}

impl SectorPair {
    pub const ALL: [SectorPair; 3] = [
        SectorPair {
            defi: Sector::Dex,
            tradfi: Sector::Exchange,
        },
        SectorPair {
            defi: Sector::Plf,
            tradfi: Sector::Bank,
        },
        SectorPair {
            defi: Sector::YieldAggregator,
            tradfi: Sector::AssetManager,
        },
    ];

    pub fn contains(&self, sector: Sector) -> bool {
        sector == self.defi || sector == self.tradfi
    }
}

/// One quarter of the cross-sector comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub quarter: Quarter,
    /// Per-asset ratios in input order.
    pub ratios: Vec<f64>,
    pub defi_median: Option<f64>,
    pub tradfi_median: Option<f64>,
    /// DeFi median over TradFi median; 1.0 means no spread.
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorComparison {
    pub pair: SectorPair,
    pub metric: MultipleMetric,
    /// Tickers in the order the ratio columns are reported.
    pub tickers: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Compare the series of a sector pair quarter by quarter over the
/// intersection of their quarters, summarizing each side by its median.
///
/// All series must carry the same metric; the result is invariant under
/// permutation of the input list apart from column order.
pub fn compare_sector(series: &[&MultipleSeries], pair: SectorPair) -> Result<SectorComparison> {
    let relevant: Vec<&MultipleSeries> = series
        .iter()
        .copied()
        .filter(|s| pair.contains(s.sector))
        .collect();
    if relevant.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let metric = relevant[0].metric;
    if relevant.iter().any(|s| s.metric != metric) {
        return Err(Error::MixedMetrics);
    }

    let mut shared: Option<BTreeSet<Quarter>> = None;
    for s in &relevant {
        let quarters: BTreeSet<Quarter> = s.points.iter().map(|p| p.quarter).collect();
        shared = Some(match shared {
            None => quarters,
            Some(prev) => prev.intersection(&quarters).copied().collect(),
        });
    }
    let shared = shared.unwrap_or_default();
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }

    let mut rows = Vec::with_capacity(shared.len());
    for quarter in shared {
        let mut ratios = Vec::with_capacity(relevant.len());
        let mut defi = Vec::new();
        let mut tradfi = Vec::new();
        for s in &relevant {
            let point = s
                .points
                .iter()
                .find(|p| p.quarter == quarter)
                .expect("quarter is in the intersection");
            ratios.push(point.ratio);
            match s.kind {
                AssetKind::Token => defi.push(point.ratio),
                AssetKind::Equity => tradfi.push(point.ratio),
            }
        }
        let defi_median = median(&mut defi);
        let tradfi_median = median(&mut tradfi);
        let spread = match (defi_median, tradfi_median) {
            (Some(d), Some(t)) if t != 0.0 => Some(d / t),
            _ => None,
        };
        rows.push(ComparisonRow {
            quarter,
            ratios,
            defi_median,
            tradfi_median,
            spread,
        });
    }

    Ok(SectorComparison {
        pair,
        metric,
        tickers: relevant.iter().map(|s| s.ticker.clone()).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DiscountConfig;
    use chrono::NaiveDate;

    fn asset(ticker: &str, kind: AssetKind, sector: Sector) -> AssetRecord {
        AssetRecord {
            ticker: ticker.into(),
            name: ticker.into(),
            kind,
            sector,
            supply: 1.0e6,
            spot_price: 1.0,
            spot_date: NaiveDate::from_ymd_opt(2022, 6, 30).unwrap(),
            discounting: DiscountConfig::Fixed { rate: 0.25 },
            workforce_share: kind.default_workforce_share(),
            base_revenue: None,
            erratum: None,
        }
    }

    fn quarter_row(y: i32, q: u8, mc: f64, revenue: f64, net: f64) -> QuarterlyFundamentals {
        QuarterlyFundamentals {
            quarter: Quarter::new(y, q).unwrap(),
            revenue: UsdMillions(revenue),
            earnings: UsdMillions(revenue),
            total_assets: None,
            total_liabilities: None,
            net_assets: UsdMillions(net),
            market_cap: UsdMillions(mc),
            partial: false,
        }
    }

    #[test]
    fn revenue_multiple_arithmetic() {
        assert_eq!(
            revenue_multiple(UsdMillions(5000.0), UsdMillions(100.0)).unwrap(),
            50.0
        );
        assert_eq!(
            revenue_multiple(UsdMillions(3.7), UsdMillions(3.7)).unwrap(),
            1.0
        );
        assert!(revenue_multiple(UsdMillions(1.0), UsdMillions::ZERO).is_err());
        assert!(revenue_multiple(UsdMillions(1.0), UsdMillions(-2.0)).is_err());
    }

    #[test]
    fn revenue_multiple_reference_quarter() {
        // Quarter-end market cap near five billion against 23.2 of
        // quarterly revenue.
        let r = revenue_multiple(UsdMillions(5000.0), UsdMillions(23.2)).unwrap();
        assert!((r - 215.5).abs() < 0.5);
    }

    #[test]
    fn net_asset_multiple_arithmetic() {
        assert_eq!(
            net_asset_multiple(UsdMillions(100.0), UsdMillions(50.0)).unwrap(),
            2.0
        );
        assert_eq!(
            net_asset_multiple(UsdMillions(100.0), UsdMillions(-50.0)).unwrap(),
            -2.0
        );
        assert!(net_asset_multiple(UsdMillions(100.0), UsdMillions::ZERO).is_err());
    }

    #[test]
    fn net_asset_multiple_reference_quarter() {
        let r = net_asset_multiple(UsdMillions(5000.0), UsdMillions(3000.0)).unwrap();
        assert!((r - 1.67).abs() <= 0.05);
    }

    #[test]
    fn series_counts_points_plus_omitted() {
        let a = asset("TKN", AssetKind::Token, Sector::Dex);
        let quarters = [
            quarter_row(2021, 1, 100.0, 10.0, 5.0),
            quarter_row(2021, 2, 100.0, 0.0, 5.0),
            quarter_row(2021, 3, 100.0, 20.0, 5.0),
        ];
        let s = build_series(&a, &quarters, MultipleMetric::RevenueMultiple);
        assert_eq!(s.points.len() + s.omitted.len(), quarters.len());
        assert_eq!(s.points.len(), 2);
        assert_eq!(s.omitted[0].0, Quarter::new(2021, 2).unwrap());
    }

    #[test]
    fn series_all_positive_has_all_log_points() {
        let a = asset("TKN", AssetKind::Token, Sector::Dex);
        let quarters: Vec<_> = (1..=4)
            .map(|q| quarter_row(2021, q, 100.0 * q as f64, 10.0, 5.0))
            .collect();
        let s = build_series(&a, &quarters, MultipleMetric::RevenueMultiple);
        assert_eq!(s.points.len(), 4);
        for p in &s.points {
            let log = p.log10_ratio.unwrap();
            assert!((log - p.ratio.log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_net_assets_ratio_without_log_point() {
        let a = asset("EQ", AssetKind::Equity, Sector::Bank);
        let quarters = [quarter_row(2021, 1, 100.0, 10.0, -50.0)];
        let s = build_series(&a, &quarters, MultipleMetric::NetAssetMultiple);
        assert_eq!(s.points[0].ratio, -2.0);
        assert!(s.points[0].log10_ratio.is_none());
    }

    fn flat_series(
        ticker: &str,
        kind: AssetKind,
        sector: Sector,
        ratios: &[f64],
    ) -> MultipleSeries {
        let a = asset(ticker, kind, sector);
        let quarters: Vec<_> = ratios
            .iter()
            .enumerate()
            .map(|(i, &r)| quarter_row(2021, (i + 1) as u8, r * 10.0, 10.0, 10.0))
            .collect();
        build_series(&a, &quarters, MultipleMetric::RevenueMultiple)
    }

    #[test]
    fn identical_series_have_unit_spread() {
        let d = flat_series("T", AssetKind::Token, Sector::Dex, &[3.0, 4.0, 5.0]);
        let f = flat_series("E", AssetKind::Equity, Sector::Exchange, &[3.0, 4.0, 5.0]);
        let cmp = compare_sector(&[&d, &f], SectorPair::ALL[0]).unwrap();
        for row in cmp.rows {
            assert!(
                (row.spread.unwrap() - 1.0).abs() < 1e-12,
                "no spread between equals"
            );
        }
    }

    #[test]
    fn tenfold_series_have_spread_ten() {
        let d = flat_series("T", AssetKind::Token, Sector::Dex, &[30.0, 40.0, 50.0]);
        let f = flat_series("E", AssetKind::Equity, Sector::Exchange, &[3.0, 4.0, 5.0]);
        let cmp = compare_sector(&[&d, &f], SectorPair::ALL[0]).unwrap();
        for row in cmp.rows {
            assert!((row.spread.unwrap() - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn comparison_uses_quarter_intersection() {
        let d = flat_series("T", AssetKind::Token, Sector::Dex, &[3.0, 4.0, 5.0]);
        let f = flat_series("E", AssetKind::Equity, Sector::Exchange, &[3.0, 4.0]);
        let cmp = compare_sector(&[&d, &f], SectorPair::ALL[0]).unwrap();
        assert_eq!(cmp.rows.len(), 2);
    }

    #[test]
    fn disjoint_quarters_error() {
        let d = flat_series("T", AssetKind::Token, Sector::Dex, &[3.0]);
        let mut f = flat_series("E", AssetKind::Equity, Sector::Exchange, &[3.0]);
        for p in &mut f.points {
            p.quarter = Quarter::new(2030, 1).unwrap();
        }
        assert!(matches!(
            compare_sector(&[&d, &f], SectorPair::ALL[0]),
            Err(Error::EmptyIntersection)
        ));
    }

    #[test]
    fn mixed_metrics_rejected() {
        let d = flat_series("T", AssetKind::Token, Sector::Dex, &[3.0]);
        let mut f = flat_series("E", AssetKind::Equity, Sector::Exchange, &[3.0]);
        f.metric = MultipleMetric::NetAssetMultiple;
        assert!(matches!(
            compare_sector(&[&d, &f], SectorPair::ALL[0]),
            Err(Error::MixedMetrics)
        ));
    }

    #[test]
    fn comparison_is_permutation_invariant() {
        let a = flat_series("T1", AssetKind::Token, Sector::Dex, &[30.0, 40.0]);
        let b = flat_series("T2", AssetKind::Token, Sector::Dex, &[10.0, 20.0]);
        let c = flat_series("E1", AssetKind::Equity, Sector::Exchange, &[3.0, 4.0]);
        let fwd = compare_sector(&[&a, &b, &c], SectorPair::ALL[0]).unwrap();
        let rev = compare_sector(&[&c, &b, &a], SectorPair::ALL[0]).unwrap();
        for (x, y) in fwd.rows.iter().zip(rev.rows.iter()) {
            assert_eq!(x.quarter, y.quarter);
            assert_eq!(x.defi_median, y.defi_median);
            assert_eq!(x.tradfi_median, y.tradfi_median);
            assert_eq!(x.spread, y.spread);
        }
    }

    #[test]
    fn scale_invariance_of_ratios() {
        let mc = UsdMillions(123.0);
        let rev = UsdMillions(7.0);
        let k = 42.0;
        let base = revenue_multiple(mc, rev).unwrap();
        let scaled = revenue_multiple(mc * k, rev * k).unwrap();
        assert!((base - scaled).abs() < 1e-12);
    }
}
