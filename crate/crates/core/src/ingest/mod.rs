//! Parsing of daily token-metric files and quarterly firm-fundamentals files
//! into validated, sorted time series.
//!
//! Both inputs are header-first CSV. Structural problems (missing columns,
//! no header) are file-level errors; defective rows are rejected and listed
//! in the [`ParseReport`] without affecting accepted rows. Parsing is
//! deterministic: identical bytes produce identical series and reports.

pub mod registry;

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;

use crate::domain::{Quarter, UsdMillions};
use crate::error::{Error, Result};

pub use registry::{load_registry, Registry};

/// One day of token measures. Aggregate amounts are USD millions; `price`
/// is USD per token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DailyTokenMetrics {
    pub date: NaiveDate,
    pub price: f64,
    pub market_cap: UsdMillions,
    pub tvl: UsdMillions,
    pub protocol_revenue: UsdMillions,
    pub treasury: UsdMillions,
}

/// One fiscal quarter of fundamentals, USD millions throughout.
///
/// For firms the fields map to quarterly total revenue, pre-tax income and
/// the balance-sheet aggregates; for tokens revenue and earnings are the
/// summed daily protocol revenue and net assets the treasury.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarterlyFundamentals {
    pub quarter: Quarter,
    pub revenue: UsdMillions,
    pub earnings: UsdMillions,
    pub total_assets: Option<UsdMillions>,
    pub total_liabilities: Option<UsdMillions>,
    pub net_assets: UsdMillions,
    pub market_cap: UsdMillions,
    /// Edge quarter with incomplete calendar coverage.
    pub partial: bool,
}

/// Row-level outcome of a parse: counts plus per-line diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseReport {
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    /// 1-based line number in the source file.
    pub line: usize,
    pub reason: String,
}

impl ParseReport {
    fn reject(&mut self, line: usize, reason: impl Into<String>) {
        self.rows_rejected += 1;
        self.diagnostics.push(Diagnostic {
            line,
            reason: reason.into(),
        });
    }

    fn note(&mut self, line: usize, reason: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            line,
            reason: reason.into(),
        });
    }
}

const TOKEN_COLUMNS: [&str; 6] = [
    "date",
    "price",
    "market_cap",
    "tvl",
    "protocol_revenue",
    "treasury",
];
const FIRM_COLUMNS: [&str; 6] = [
    "quarter",
    "revenue",
    "pretax_income",
    "total_assets",
    "total_liabilities",
    "market_cap",
];

/// Validate the header and return the position of each mandatory column.
fn header_positions(header: &str, mandatory: &[&str]) -> Result<Vec<usize>> {
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    for name in &names {
        if !mandatory.contains(name) {
            return Err(Error::FileFormat(format!(
                "unknown column {name:?} in header"
            )));
        }
    }
    mandatory
        .iter()
        .map(|want| {
            names
                .iter()
                .position(|n| n == want)
                .ok_or_else(|| Error::FileFormat(format!("missing mandatory column {want:?}")))
        })
        .collect()
}

fn parse_number(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("unparseable {name} {:?}", field.trim()))?;
    if !v.is_finite() {
        return Err(format!("non-finite {name}"));
    }
    Ok(v)
}

/// Parse a daily token-metrics CSV.
///
/// Rows with an invalid date, a duplicate date, or a negative measure are
/// rejected with a reason; calendar gaps between accepted rows are recorded
/// as diagnostics. Accepted rows are returned sorted by date.
pub fn parse_token_daily(
    input: &str,
    ticker: &str,
) -> Result<(Vec<DailyTokenMetrics>, ParseReport)> {
    let mut lines = input.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::FileFormat(format!("{ticker}: empty file, expected header")))?;
    let positions = header_positions(header.1, &TOKEN_COLUMNS)
        .map_err(|e| Error::FileFormat(format!("{ticker}: {e}")))?;

    let mut report = ParseReport::default();
    let mut rows: Vec<DailyTokenMetrics> = Vec::new();
    let mut line_of: BTreeMap<NaiveDate, usize> = BTreeMap::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != positions.len() {
            report.reject(
                line_no,
                format!(
                    "expected {} fields, found {}",
                    positions.len(),
                    fields.len()
                ),
            );
            continue;
        }
        let field = |i: usize| fields[positions[i]];

        let date = match NaiveDate::parse_from_str(field(0).trim(), "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => {
                report.reject(line_no, format!("invalid date {:?}", field(0).trim()));
                continue;
            }
        };
        if line_of.contains_key(&date) {
            report.reject(line_no, format!("duplicate date {date}"));
            continue;
        }

        let mut numbers = [0.0f64; 5];
        let mut bad = None;
        for (i, name) in TOKEN_COLUMNS.iter().enumerate().skip(1) {
            match parse_number(field(i), name) {
                Ok(v) if v < 0.0 => {
                    bad = Some(format!("negative {name}"));
                    break;
                }
                Ok(v) => numbers[i - 1] = v,
                Err(reason) => {
                    bad = Some(reason);
                    break;
                }
            }
        }
        if let Some(reason) = bad {
            report.reject(line_no, reason);
            continue;
        }

        report.rows_accepted += 1;
        line_of.insert(date, line_no);
        rows.push(DailyTokenMetrics {
            date,
            price: numbers[0],
            market_cap: UsdMillions(numbers[1]),
            tvl: UsdMillions(numbers[2]),
            protocol_revenue: UsdMillions(numbers[3]),
            treasury: UsdMillions(numbers[4]),
        });
    }

    rows.sort_by_key(|r| r.date);
    for pair in rows.windows(2) {
        let gap = (pair[1].date - pair[0].date).num_days();
        if gap > 1 {
            report.note(
                line_of[&pair[1].date],
                format!("{ticker}: gap of {} days after {}", gap - 1, pair[0].date),
            );
        }
    }
    Ok((rows, report))
}

/// Parse a quarterly firm-fundamentals CSV.
///
/// Net assets are computed as total assets minus total liabilities; a
/// quarter whose liabilities exceed its assets is accepted with a negative
/// net-asset diagnostic. Accepted rows are returned sorted by quarter.
pub fn parse_firm_quarterly(
    input: &str,
    ticker: &str,
) -> Result<(Vec<QuarterlyFundamentals>, ParseReport)> {
    let mut lines = input.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::FileFormat(format!("{ticker}: empty file, expected header")))?;
    let positions = header_positions(header.1, &FIRM_COLUMNS)
        .map_err(|e| Error::FileFormat(format!("{ticker}: {e}")))?;

    let mut report = ParseReport::default();
    let mut rows: Vec<QuarterlyFundamentals> = Vec::new();
    let mut seen: BTreeSet<Quarter> = BTreeSet::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != positions.len() {
            report.reject(
                line_no,
                format!(
                    "expected {} fields, found {}",
                    positions.len(),
                    fields.len()
                ),
            );
            continue;
        }
        let field = |i: usize| fields[positions[i]];

        let quarter = match Quarter::from_str(field(0).trim()) {
            Ok(q) => q,
            Err(_) => {
                report.reject(
                    line_no,
                    format!("unparseable quarter {:?}", field(0).trim()),
                );
                continue;
            }
        };
        if !seen.insert(quarter) {
            report.reject(line_no, format!("duplicate quarter {quarter}"));
            continue;
        }

        let mut numbers = [0.0f64; 5];
        let mut bad = None;
        for (i, name) in FIRM_COLUMNS.iter().enumerate().skip(1) {
            match parse_number(field(i), name) {
                Ok(v) => numbers[i - 1] = v,
                Err(reason) => {
                    bad = Some(reason);
                    break;
                }
            }
        }
        if let Some(reason) = bad {
            seen.remove(&quarter);
            report.reject(line_no, reason);
            continue;
        }
        let [revenue, pretax, assets, liabilities, market_cap] = numbers;
        if market_cap < 0.0 {
            seen.remove(&quarter);
            report.reject(line_no, "negative market_cap");
            continue;
        }
        if liabilities > assets {
            report.note(
                line_no,
                format!("{quarter}: liabilities exceed assets, negative net assets"),
            );
        }

        report.rows_accepted += 1;
        rows.push(QuarterlyFundamentals {
            quarter,
            revenue: UsdMillions(revenue),
            earnings: UsdMillions(pretax),
            total_assets: Some(UsdMillions(assets)),
            total_liabilities: Some(UsdMillions(liabilities)),
            net_assets: UsdMillions(assets - liabilities),
            market_cap: UsdMillions(market_cap),
            partial: false,
        });
    }

    rows.sort_by_key(|r| r.quarter);
    Ok((rows, report))
}

/// Write a daily series back to the CSV form accepted by
/// [`parse_token_daily`]; parse-serialize-parse is a fixpoint for accepted
/// rows.
pub fn serialize_token_daily(rows: &[DailyTokenMetrics]) -> String {
    let mut out = String::from("date,price,market_cap,tvl,protocol_revenue,treasury\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.date, r.price, r.market_cap.0, r.tvl.0, r.protocol_revenue.0, r.treasury.0
        ));
    }
    out
}

/// Counterpart of [`serialize_token_daily`] for the quarterly firm format.
pub fn serialize_firm_quarterly(rows: &[QuarterlyFundamentals]) -> String {
    let mut out =
        String::from("quarter,revenue,pretax_income,total_assets,total_liabilities,market_cap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.quarter,
            r.revenue.0,
            r.earnings.0,
            r.total_assets.map(|v| v.0).unwrap_or(0.0),
            r.total_liabilities.map(|v| v.0).unwrap_or(0.0),
            r.market_cap.0
        ));
    }
    out
}
