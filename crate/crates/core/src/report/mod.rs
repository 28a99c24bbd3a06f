//! Command orchestration and document rendering.
//!
//! Each command loads the registry and data files, evaluates the engine over
//! the requested assets in registry order, and renders one document in
//! markdown, CSV or JSON. Rendering is a single-threaded deterministic fold:
//! identical inputs and flags produce byte-identical output.

pub mod golden;
pub mod render;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::Datelike;
use serde::Serialize;

use crate::dcf::{self, DcfResult, DEFAULT_VERDICT_BAND};
use crate::domain::{AssetKind, AssetRecord, Assumptions, Quarter, Sector};
use crate::error::{Error, Result};
use crate::fundamentals::{self, EarningsHistory};
use crate::ingest::{self, ParseReport, QuarterlyFundamentals};
use crate::multiples::{self, MultipleMetric, MultipleSeries, SectorComparison, SectorPair};

use golden::{Deviation, GoldenTables};

/// First quarter shown by the history tables; earlier data still feeds
/// growth and compound-rate computations.
pub const HISTORY_DISPLAY_START: Quarter = Quarter {
    year: 2020,
    index: 4,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    History,
    Dcf,
    Multiples,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

/// Assumption overrides applied on top of the registry file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub growth: Option<f64>,
    pub perpetual_growth: Option<f64>,
    pub horizon: Option<u32>,
    pub band: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub registry_path: PathBuf,
    pub data_dir: PathBuf,
    pub command: CommandKind,
    pub format: OutputFormat,
    /// Ticker filter; empty means every registry asset.
    pub assets: Vec<String>,
    pub overrides: Overrides,
}

/// A rendered document plus everything the caller needs for the exit-status
/// contract: a run is clean iff there were no file-level errors and every
/// requested asset produced output.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub body: String,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub failed_assets: Vec<String>,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.errors.is_empty() && self.failed_assets.is_empty()
    }
}

/// One registry asset with its parsed quarterly series.
#[derive(Debug, Clone)]
pub struct LoadedAsset {
    pub record: AssetRecord,
    pub file: String,
    pub quarters: Vec<QuarterlyFundamentals>,
    pub parse_report: ParseReport,
}

/// Everything a command needs, loaded once.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub assumptions: Assumptions,
    pub band: f64,
    pub assets: Vec<LoadedAsset>,
    pub golden: GoldenTables,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// Requested tickers that could not be served.
    pub failed_assets: Vec<String>,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load registry, data files and optional golden tables for a run.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let registry_text = read_file(&cfg.registry_path)?;
    let (registry, rejected) = ingest::registry::load_registry_lenient(&registry_text)?;

    let mut assumptions = registry.assumptions;
    if let Some(g) = cfg.overrides.growth {
        assumptions.revenue_growth = g;
    }
    if let Some(g) = cfg.overrides.perpetual_growth {
        assumptions.perpetual_growth = g;
    }
    if let Some(n) = cfg.overrides.horizon {
        assumptions.horizon_years = n;
    }
    assumptions.validate()?;
    let band = cfg.overrides.band.unwrap_or(DEFAULT_VERDICT_BAND);
    if !(0.0..1.0).contains(&band) {
        return Err(Error::invalid("band", "must be in [0, 1)"));
    }

    let mut errors: Vec<String> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut failed_assets: Vec<String> = Vec::new();

    for (ticker, err) in &rejected {
        errors.push(format!("registry: {ticker}: {err}"));
        failed_assets.push(ticker.clone());
    }

    let selected: Vec<&AssetRecord> = if cfg.assets.is_empty() {
        registry.assets.iter().collect()
    } else {
        for ticker in &cfg.assets {
            if !registry.assets.iter().any(|a| &a.ticker == ticker)
                && !rejected.iter().any(|(t, _)| t == ticker)
            {
                errors.push(format!("registry: unknown asset {ticker:?}"));
                failed_assets.push(ticker.clone());
            }
        }
        registry
            .assets
            .iter()
            .filter(|a| cfg.assets.iter().any(|t| t == &a.ticker))
            .collect()
    };

    let mut assets = Vec::with_capacity(selected.len());
    for record in selected {
        let path = cfg.data_dir.join(format!("{}.csv", record.ticker));
        let text = match read_file(&path) {
            Ok(t) => t,
            Err(e) => {
                errors.push(e.to_string());
                failed_assets.push(record.ticker.clone());
                continue;
            }
        };
        let parsed = match record.kind {
            AssetKind::Token => {
                ingest::parse_token_daily(&text, &record.ticker).map(|(daily, report)| {
                    let quarters = fundamentals::aggregate_token_quarters_sampled(
                        &daily,
                        registry.market_cap_sampling,
                    );
                    (quarters, report)
                })
            }
            AssetKind::Equity => ingest::parse_firm_quarterly(&text, &record.ticker),
        };
        let (quarters, parse_report) = match parsed {
            Ok(p) => p,
            Err(e) => {
                errors.push(format!("{}: {e}", path.display()));
                failed_assets.push(record.ticker.clone());
                continue;
            }
        };
        for q in quarters.iter().filter(|q| q.partial) {
            warnings.push(format!(
                "{}: partial edge quarter {}",
                record.ticker, q.quarter
            ));
        }
        assets.push(LoadedAsset {
            record: record.clone(),
            file: path.display().to_string(),
            quarters,
            parse_report,
        });
    }

    let golden_path = cfg.data_dir.join("golden").join("npv_tables.csv");
    let golden = if golden_path.exists() {
        match read_file(&golden_path).and_then(|t| golden::load_golden(&t)) {
            Ok(g) => g,
            Err(e) => {
                errors.push(e.to_string());
                GoldenTables::default()
            }
        }
    } else {
        GoldenTables::default()
    };

    Ok(Dataset {
        assumptions,
        band,
        assets,
        golden,
        errors,
        warnings,
        failed_assets,
    })
}

/// Execute a command against the filesystem and render its document.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut dataset = load_dataset(cfg)?;
    let body = match cfg.command {
        CommandKind::Validate => {
            let doc = build_validate(&dataset);
            render_validate(&doc, cfg.format)
        }
        CommandKind::History => {
            let doc = build_history(&mut dataset);
            render_history(&doc, cfg.format)
        }
        CommandKind::Dcf => {
            let doc = build_dcf(&mut dataset);
            render_dcf(&doc, cfg.format)
        }
        CommandKind::Multiples => {
            let doc = build_multiples(&mut dataset);
            render_multiples(&doc, cfg.format)
        }
        CommandKind::Report => {
            let doc = build_report(&mut dataset);
            render_report(&doc, cfg.format)
        }
    };
    Ok(RunOutcome {
        body,
        warnings: dataset.warnings,
        errors: dataset.errors,
        failed_assets: dataset.failed_assets,
    })
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FileValidation {
    pub ticker: String,
    pub file: String,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    pub diagnostics: Vec<ingest::Diagnostic>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateDoc {
    pub files: Vec<FileValidation>,
    pub errors: Vec<String>,
    pub summary: String,
}

pub fn build_validate(dataset: &Dataset) -> ValidateDoc {
    let files: Vec<FileValidation> = dataset
        .assets
        .iter()
        .map(|a| FileValidation {
            ticker: a.record.ticker.clone(),
            file: a.file.clone(),
            rows_accepted: a.parse_report.rows_accepted,
            rows_rejected: a.parse_report.rows_rejected,
            diagnostics: a.parse_report.diagnostics.clone(),
        })
        .collect();
    let attempted = files.len() + dataset.failed_assets.len();
    let summary = format!("{} assets, {} errors", attempted, dataset.errors.len());
    ValidateDoc {
        files,
        errors: dataset.errors.clone(),
        summary,
    }
}

fn validation_rows(doc: &ValidateDoc) -> Vec<Vec<String>> {
    doc.files
        .iter()
        .map(|f| {
            vec![
                f.ticker.clone(),
                f.file.clone(),
                f.rows_accepted.to_string(),
                f.rows_rejected.to_string(),
            ]
        })
        .collect()
}

fn render_validate(doc: &ValidateDoc, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(doc),
        OutputFormat::Csv => {
            let mut out = render::csv_block(
                "validation",
                &[
                    "asset".into(),
                    "file".into(),
                    "accepted".into(),
                    "rejected".into(),
                ],
                &validation_rows(doc),
            );
            let diag_rows: Vec<Vec<String>> = doc
                .files
                .iter()
                .flat_map(|f| {
                    f.diagnostics
                        .iter()
                        .map(|d| vec![f.ticker.clone(), d.line.to_string(), d.reason.clone()])
                })
                .collect();
            if !diag_rows.is_empty() {
                out.push('\n');
                out.push_str(&render::csv_block(
                    "diagnostics",
                    &["asset".into(), "line".into(), "reason".into()],
                    &diag_rows,
                ));
            }
            for e in &doc.errors {
                out.push_str(&format!("# error: {e}\n"));
            }
            out.push_str(&format!("# {}\n", doc.summary));
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::from("# Validation\n\n");
            out.push_str(&render::md_table(
                &[
                    "asset".into(),
                    "file".into(),
                    "accepted".into(),
                    "rejected".into(),
                ],
                &validation_rows(doc),
            ));
            let diags: Vec<(&FileValidation, &ingest::Diagnostic)> = doc
                .files
                .iter()
                .flat_map(|f| f.diagnostics.iter().map(move |d| (f, d)))
                .collect();
            if !diags.is_empty() {
                out.push_str("\n## Diagnostics\n\n");
                for (f, d) in diags {
                    out.push_str(&format!("- {} line {}: {}\n", f.ticker, d.line, d.reason));
                }
            }
            if !doc.errors.is_empty() {
                out.push_str("\n## Errors\n\n");
                for e in &doc.errors {
                    out.push_str(&format!("- {e}\n"));
                }
            }
            out.push_str(&format!("\n{}\n", doc.summary));
            out
        }
    }
}

// ---------------------------------------------------------------------------
// history
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct HistoryDoc {
    pub histories: Vec<EarningsHistory>,
    /// Kind per history, for table grouping.
    #[serde(skip)]
    pub kinds: Vec<AssetKind>,
}

pub fn build_history(dataset: &mut Dataset) -> HistoryDoc {
    let mut histories = Vec::new();
    let mut kinds = Vec::new();
    for asset in &dataset.assets {
        if asset.quarters.is_empty() {
            dataset.warnings.push(format!(
                "{}: no data, omitted from history",
                asset.record.ticker
            ));
            dataset.failed_assets.push(asset.record.ticker.clone());
            continue;
        }
        histories.push(fundamentals::build_history(&asset.record, &asset.quarters));
        kinds.push(asset.record.kind);
    }
    HistoryDoc { histories, kinds }
}

fn quarter_axis(histories: &[&EarningsHistory]) -> Vec<Quarter> {
    let last = histories
        .iter()
        .filter_map(|h| h.rows.last().map(|r| r.quarter))
        .max();
    let Some(last) = last else { return Vec::new() };
    let mut axis = Vec::new();
    let mut q = HISTORY_DISPLAY_START;
    while q <= last {
        axis.push(q);
        q = q.next();
    }
    axis
}

fn history_group_table(histories: &[&EarningsHistory]) -> (Vec<String>, Vec<Vec<String>>) {
    let axis = quarter_axis(histories);
    let mut headers: Vec<String> = vec!["asset".into(), "row".into()];
    headers.extend(axis.iter().map(|q| q.to_string()));
    headers.push("CQGR".into());

    let mut rows = Vec::new();
    for h in histories {
        let find = |q: Quarter| h.rows.iter().find(|r| r.quarter == q);
        let mut earnings_row = vec![h.ticker.clone(), "earnings ($M)".into()];
        for &q in &axis {
            earnings_row.push(
                find(q)
                    .map(|r| render::millions(r.earnings.0))
                    .unwrap_or_else(|| "NA".into()),
            );
        }
        earnings_row.push(render::opt(h.cqgr, render::percent));
        rows.push(earnings_row);

        let mut growth_row = vec![h.ticker.clone(), "% growth".into()];
        for &q in &axis {
            growth_row.push(
                find(q)
                    .map(|r| render::opt(r.growth, render::percent))
                    .unwrap_or_else(|| "NA".into()),
            );
        }
        growth_row.push(String::new());
        rows.push(growth_row);
    }
    (headers, rows)
}

fn render_history(doc: &HistoryDoc, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(&serde_json::json!({ "histories": doc.histories })),
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            for h in &doc.histories {
                for (i, r) in h.rows.iter().enumerate() {
                    let cqgr = if i + 1 == h.rows.len() {
                        render::opt(h.cqgr, render::percent)
                    } else {
                        String::new()
                    };
                    rows.push(vec![
                        h.ticker.clone(),
                        r.quarter.to_string(),
                        render::millions(r.earnings.0),
                        render::opt(r.growth, render::percent),
                        cqgr,
                    ]);
                }
            }
            render::csv_block(
                "historical earnings",
                &[
                    "asset".into(),
                    "quarter".into(),
                    "earnings".into(),
                    "growth".into(),
                    "cqgr".into(),
                ],
                &rows,
            )
        }
        OutputFormat::Markdown => {
            let mut out = String::from("# Historical earnings\n");
            for (kind, title) in [(AssetKind::Token, "Tokens"), (AssetKind::Equity, "Firms")] {
                let group: Vec<&EarningsHistory> = doc
                    .histories
                    .iter()
                    .zip(&doc.kinds)
                    .filter(|(_, k)| **k == kind)
                    .map(|(h, _)| h)
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let (headers, rows) = history_group_table(&group);
                out.push_str(&format!("\n## {title}\n\n"));
                out.push_str(&render::md_table(&headers, &rows));
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// dcf
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DcfValuation {
    /// Calendar year of the first projected column.
    pub base_year: i32,
    pub base_revenue: f64,
    pub base_revenue_source: BaseRevenueSource,
    #[serde(flatten)]
    pub result: DcfResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseRevenueSource {
    Registry,
    AnnualizedFirstHalf,
}

impl fmt::Display for BaseRevenueSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseRevenueSource::Registry => write!(f, "registry"),
            BaseRevenueSource::AnnualizedFirstHalf => write!(f, "annualized 2x first half"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DcfFailure {
    pub ticker: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DcfDoc {
    pub valuations: Vec<DcfValuation>,
    pub failures: Vec<DcfFailure>,
}

pub fn build_dcf(dataset: &mut Dataset) -> DcfDoc {
    let mut valuations = Vec::new();
    let mut failures = Vec::new();
    for asset in &dataset.assets {
        let ticker = asset.record.ticker.clone();
        let (base, source) = match asset.record.base_revenue {
            Some(b) => (b, BaseRevenueSource::Registry),
            None => {
                match dcf::annualize_first_half(&asset.quarters, asset.record.spot_date.year()) {
                    Some(b) => (b, BaseRevenueSource::AnnualizedFirstHalf),
                    None => {
                        failures.push(DcfFailure {
                            ticker: ticker.clone(),
                            error: "base revenue unavailable: not in registry and first half not observed"
                                .into(),
                        });
                        dataset.failed_assets.push(ticker);
                        continue;
                    }
                }
            }
        };
        match dcf::value_asset_with_band(&asset.record, base, &dataset.assumptions, dataset.band) {
            Ok(result) => valuations.push(DcfValuation {
                base_year: asset.record.spot_date.year(),
                base_revenue: base.0,
                base_revenue_source: source,
                result,
            }),
            Err(e) => {
                failures.push(DcfFailure {
                    ticker: ticker.clone(),
                    error: e.to_string(),
                });
                dataset.failed_assets.push(ticker);
            }
        }
    }
    DcfDoc {
        valuations,
        failures,
    }
}

fn render_dcf_tables_md(doc: &DcfDoc, out: &mut String) {
    for v in &doc.valuations {
        out.push_str(&format!("\n## {}\n\n", v.result.ticker));
        let mut headers: Vec<String> = vec!["row".into()];
        headers.extend(
            v.result
                .rows
                .iter()
                .map(|r| (v.base_year + r.year_offset as i32).to_string()),
        );
        let mut rows = Vec::new();
        for (label, field) in [
            ("Revenue ($M)", 0usize),
            ("Workforce expenses ($M)", 1),
            ("Net income ($M)", 2),
            ("PV cashflows ($M)", 3),
        ] {
            let mut row: Vec<String> = vec![label.into()];
            for r in &v.result.rows {
                let value = match field {
                    0 => r.revenue.0,
                    1 => r.workforce_expenses.0,
                    2 => r.net_income.0,
                    _ => r.pv.0,
                };
                row.push(render::millions(value));
            }
            rows.push(row);
        }
        out.push_str(&render::md_table(&headers, &rows));
        out.push('\n');
        let mut summary = vec![
            vec![
                "PV terminal value ($M)".to_string(),
                render::millions(v.result.pv_terminal.0),
            ],
            vec![
                "Total PV ($M)".to_string(),
                render::millions(v.result.total_pv.0),
            ],
            vec![
                "Fair price ($)".to_string(),
                render::price(v.result.fair_price),
            ],
            vec![
                "Market price ($)".to_string(),
                render::price(v.result.market_price),
            ],
            vec!["Verdict".to_string(), v.result.verdict.to_string()],
            vec![
                "Discount rate".to_string(),
                render::percent(v.result.discount_rate),
            ],
            vec![
                "Base revenue source".to_string(),
                v.base_revenue_source.to_string(),
            ],
        ];
        if v.result.verdict_degenerate {
            summary.push(vec![
                "Note".to_string(),
                "non-positive fair price; overvalued by convention".to_string(),
            ]);
        }
        out.push_str(&render::md_table(
            &["metric".into(), "value".into()],
            &summary,
        ));
    }
    if !doc.failures.is_empty() {
        out.push_str("\n## Failures\n\n");
        for f in &doc.failures {
            out.push_str(&format!("- {}: {}\n", f.ticker, f.error));
        }
    }
}

fn dcf_csv_rows(doc: &DcfDoc) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for v in &doc.valuations {
        let t = &v.result.ticker;
        let push = |rows: &mut Vec<Vec<String>>, field: &str, index: String, value: String| {
            rows.push(vec![t.clone(), field.to_string(), index, value]);
        };
        for r in &v.result.rows {
            let i = r.year_offset.to_string();
            push(
                &mut rows,
                "revenue",
                i.clone(),
                render::millions(r.revenue.0),
            );
            push(
                &mut rows,
                "workforce_expenses",
                i.clone(),
                render::millions(r.workforce_expenses.0),
            );
            push(
                &mut rows,
                "net_income",
                i.clone(),
                render::millions(r.net_income.0),
            );
            push(&mut rows, "pv_cashflows", i, render::millions(r.pv.0));
        }
        push(
            &mut rows,
            "pv_terminal",
            String::new(),
            render::millions(v.result.pv_terminal.0),
        );
        push(
            &mut rows,
            "total_pv",
            String::new(),
            render::millions(v.result.total_pv.0),
        );
        push(
            &mut rows,
            "fair_price",
            String::new(),
            render::price(v.result.fair_price),
        );
        push(
            &mut rows,
            "market_price",
            String::new(),
            render::price(v.result.market_price),
        );
        push(
            &mut rows,
            "verdict",
            String::new(),
            v.result.verdict.to_string(),
        );
        push(
            &mut rows,
            "discount_rate",
            String::new(),
            render::percent(v.result.discount_rate),
        );
    }
    rows
}

fn render_dcf(doc: &DcfDoc, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(doc),
        OutputFormat::Csv => {
            let mut out = render::csv_block(
                "dcf valuation",
                &[
                    "asset".into(),
                    "field".into(),
                    "index".into(),
                    "value".into(),
                ],
                &dcf_csv_rows(doc),
            );
            for f in &doc.failures {
                out.push_str(&format!("# error: {}: {}\n", f.ticker, f.error));
            }
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::from("# DCF valuation\n");
            render_dcf_tables_md(doc, &mut out);
            out
        }
    }
}

// ---------------------------------------------------------------------------
// multiples
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PlotRow {
    pub asset: String,
    pub sector: Sector,
    pub quarter: Quarter,
    pub metric: MultipleMetric,
    pub ratio: f64,
    pub log10_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplesDoc {
    pub plot: Vec<PlotRow>,
    pub comparisons: Vec<SectorComparison>,
}

pub fn build_multiples(dataset: &mut Dataset) -> MultiplesDoc {
    let mut all_series: Vec<MultipleSeries> = Vec::new();
    let mut plot = Vec::new();
    let mut productive: BTreeSet<String> = BTreeSet::new();

    for asset in &dataset.assets {
        for metric in MultipleMetric::ALL {
            let series = multiples::build_series(&asset.record, &asset.quarters, metric);
            for (quarter, reason) in &series.omitted {
                dataset.warnings.push(format!(
                    "{}: {metric} point omitted at {quarter}: {reason}",
                    series.ticker
                ));
            }
            if series.points.is_empty() {
                dataset.warnings.push(format!(
                    "{}: no valid {metric} points, asset omitted",
                    series.ticker
                ));
                continue;
            }
            productive.insert(series.ticker.clone());
            for p in &series.points {
                plot.push(PlotRow {
                    asset: series.ticker.clone(),
                    sector: series.sector,
                    quarter: p.quarter,
                    metric,
                    ratio: p.ratio,
                    log10_ratio: p.log10_ratio,
                });
            }
            all_series.push(series);
        }
    }

    for asset in &dataset.assets {
        if !asset.quarters.is_empty() && !productive.contains(&asset.record.ticker) {
            dataset.failed_assets.push(asset.record.ticker.clone());
        }
    }

    let mut comparisons = Vec::new();
    for metric in MultipleMetric::ALL {
        for pair in SectorPair::ALL {
            let series: Vec<&MultipleSeries> = all_series
                .iter()
                .filter(|s| s.metric == metric && pair.contains(s.sector))
                .collect();
            if series.is_empty() {
                continue;
            }
            match multiples::compare_sector(&series, pair) {
                Ok(cmp) => comparisons.push(cmp),
                Err(e) => dataset.warnings.push(format!(
                    "{metric} {} vs {}: comparison skipped: {e}",
                    pair.defi, pair.tradfi
                )),
            }
        }
    }
    MultiplesDoc { plot, comparisons }
}

fn plot_csv(doc: &MultiplesDoc) -> String {
    let mut out = String::from("asset,sector,quarter,metric,ratio,log10_ratio\n");
    for r in &doc.plot {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{}\n",
            r.asset,
            r.sector,
            r.quarter,
            r.metric,
            r.ratio,
            r.log10_ratio.map(|v| format!("{v:.6}")).unwrap_or_default()
        ));
    }
    out
}

fn comparison_table(cmp: &SectorComparison) -> (Vec<String>, Vec<Vec<String>>) {
    let mut headers: Vec<String> = vec!["quarter".into()];
    headers.extend(cmp.tickers.iter().cloned());
    headers.extend([
        "defi_median".into(),
        "tradfi_median".into(),
        "spread".into(),
    ]);
    let rows: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .map(|row| {
            let mut cells = vec![row.quarter.to_string()];
            cells.extend(row.ratios.iter().map(|&r| render::ratio(r)));
            cells.push(render::opt(row.defi_median, render::ratio));
            cells.push(render::opt(row.tradfi_median, render::ratio));
            cells.push(render::opt(row.spread, render::ratio));
            cells
        })
        .collect();
    (headers, rows)
}

fn render_multiples(doc: &MultiplesDoc, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(doc),
        OutputFormat::Csv => {
            let mut out = String::from("# plot data\n");
            out.push_str(&plot_csv(doc));
            for cmp in &doc.comparisons {
                let (headers, rows) = comparison_table(cmp);
                out.push('\n');
                out.push_str(&render::csv_block(
                    &format!("{} {} vs {}", cmp.metric, cmp.pair.defi, cmp.pair.tradfi),
                    &headers,
                    &rows,
                ));
            }
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::from("# Valuation multiples\n");
            for cmp in &doc.comparisons {
                out.push_str(&format!(
                    "\n## {} — {} vs {}\n\n",
                    cmp.metric, cmp.pair.defi, cmp.pair.tradfi
                ));
                let (headers, rows) = comparison_table(cmp);
                out.push_str(&render::md_table(&headers, &rows));
            }
            out.push_str("\n## Plot data\n\n```csv\n");
            out.push_str(&plot_csv(doc));
            out.push_str("```\n");
            out
        }
    }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct AssetSummary {
    pub ticker: String,
    pub name: String,
    pub kind: AssetKind,
    pub sector: Sector,
    pub supply: f64,
    pub spot_price: f64,
    pub spot_date: String,
    pub discount: String,
    pub workforce_share: f64,
    pub base_revenue: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Erratum {
    pub ticker: String,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDoc {
    pub assumptions: Assumptions,
    pub verdict_band: f64,
    pub assets: Vec<AssetSummary>,
    pub history: HistoryDoc,
    pub dcf: DcfDoc,
    pub multiples: MultiplesDoc,
    pub errata: Vec<Erratum>,
    pub deviations: Vec<Deviation>,
}

fn discount_label(record: &AssetRecord) -> String {
    match &record.discounting {
        crate::domain::DiscountConfig::Fixed { rate } => {
            format!("fixed {}", render::percent(*rate))
        }
        crate::domain::DiscountConfig::Wacc {
            beta,
            market_return,
            cost_of_debt,
            tax_rate,
            equity,
            debt,
        } => {
            let rate = crate::domain::resolve_discount_rate(&record.discounting)
                .map(render::percent)
                .unwrap_or_else(|_| "invalid".into());
            format!(
                "wacc beta={beta} mr={} rd={} tax={} E={equity} D={debt} -> {rate}",
                render::percent(*market_return),
                render::percent(*cost_of_debt),
                render::percent(*tax_rate),
            )
        }
    }
}

pub fn build_report(dataset: &mut Dataset) -> ReportDoc {
    let assets: Vec<AssetSummary> = dataset
        .assets
        .iter()
        .map(|a| AssetSummary {
            ticker: a.record.ticker.clone(),
            name: a.record.name.clone(),
            kind: a.record.kind,
            sector: a.record.sector,
            supply: a.record.supply,
            spot_price: a.record.spot_price,
            spot_date: a.record.spot_date.to_string(),
            discount: discount_label(&a.record),
            workforce_share: a.record.workforce_share,
            base_revenue: a.record.base_revenue.map(|b| b.0),
        })
        .collect();
    let errata: Vec<Erratum> = dataset
        .assets
        .iter()
        .filter_map(|a| {
            a.record.erratum.as_ref().map(|note| Erratum {
                ticker: a.record.ticker.clone(),
                note: note.clone(),
            })
        })
        .collect();

    let history = build_history(dataset);
    let dcf = build_dcf(dataset);
    let multiples = build_multiples(dataset);

    let mut deviations = Vec::new();
    for valuation in &dcf.valuations {
        let kind = dataset
            .assets
            .iter()
            .find(|a| a.record.ticker == valuation.result.ticker)
            .map(|a| a.record.kind)
            .expect("valuation comes from a loaded asset");
        if let Some(golden) = dataset.golden.get(&valuation.result.ticker) {
            deviations.extend(golden::deviations(&valuation.result, golden, kind));
        }
    }

    ReportDoc {
        assumptions: dataset.assumptions,
        verdict_band: dataset.band,
        assets,
        history,
        dcf,
        multiples,
        errata,
        deviations,
    }
}

fn deviation_rows(deviations: &[Deviation]) -> Vec<Vec<String>> {
    deviations
        .iter()
        .map(|d| {
            vec![
                d.ticker.clone(),
                d.field.clone(),
                d.index.map(|i| i.to_string()).unwrap_or_default(),
                format!("{:.4}", d.engine),
                format!("{:.4}", d.reference),
                format!("{:+.4}", d.delta),
            ]
        })
        .collect()
}

const DEVIATION_HEADERS: [&str; 6] = ["asset", "field", "index", "engine", "reference", "delta"];

fn render_report(doc: &ReportDoc, format: OutputFormat) -> String {
    let assumption_rows = vec![
        vec![
            "revenue_growth".to_string(),
            render::percent(doc.assumptions.revenue_growth),
        ],
        vec![
            "perpetual_growth".to_string(),
            render::percent(doc.assumptions.perpetual_growth),
        ],
        vec![
            "horizon_years".to_string(),
            doc.assumptions.horizon_years.to_string(),
        ],
        vec![
            "market_return".to_string(),
            render::percent(doc.assumptions.market_return),
        ],
        vec![
            "verdict_band".to_string(),
            render::percent(doc.verdict_band),
        ],
    ];
    match format {
        OutputFormat::Json => to_json(doc),
        OutputFormat::Csv => {
            let mut out = render::csv_block(
                "assumptions",
                &["key".into(), "value".into()],
                &assumption_rows,
            );
            out.push('\n');
            out.push_str(&render_history(&doc.history, OutputFormat::Csv));
            out.push('\n');
            out.push_str(&render_dcf(&doc.dcf, OutputFormat::Csv));
            out.push('\n');
            out.push_str(&render_multiples(&doc.multiples, OutputFormat::Csv));
            if !doc.errata.is_empty() {
                out.push('\n');
                let rows: Vec<Vec<String>> = doc
                    .errata
                    .iter()
                    .map(|e| vec![e.ticker.clone(), e.note.clone()])
                    .collect();
                out.push_str(&render::csv_block(
                    "errata",
                    &["asset".into(), "note".into()],
                    &rows,
                ));
            }
            out.push('\n');
            out.push_str(&render::csv_block(
                "deviations vs reference tables",
                &DEVIATION_HEADERS.map(String::from),
                &deviation_rows(&doc.deviations),
            ));
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::from("# Valuation report\n\n## Assumptions\n\n");
            out.push_str(&render::md_table(
                &["key".into(), "value".into()],
                &assumption_rows,
            ));

            out.push_str("\n## Universe\n\n");
            let rows: Vec<Vec<String>> = doc
                .assets
                .iter()
                .map(|a| {
                    vec![
                        a.ticker.clone(),
                        a.name.clone(),
                        a.kind.to_string(),
                        a.sector.to_string(),
                        format!("{}", a.supply),
                        render::price(a.spot_price),
                        a.spot_date.clone(),
                        a.discount.clone(),
                        render::percent(a.workforce_share),
                        render::opt(a.base_revenue, render::millions),
                    ]
                })
                .collect();
            out.push_str(&render::md_table(
                &[
                    "ticker".into(),
                    "name".into(),
                    "kind".into(),
                    "sector".into(),
                    "supply".into(),
                    "spot price".into(),
                    "spot date".into(),
                    "discounting".into(),
                    "workforce share".into(),
                    "base revenue".into(),
                ],
                &rows,
            ));

            out.push('\n');
            out.push_str(&render_history(&doc.history, OutputFormat::Markdown));
            out.push_str("\n# DCF valuation\n");
            render_dcf_tables_md(&doc.dcf, &mut out);
            out.push('\n');
            out.push_str(&render_multiples(&doc.multiples, OutputFormat::Markdown));

            if !doc.errata.is_empty() {
                out.push_str("\n## Errata\n\n");
                for e in &doc.errata {
                    out.push_str(&format!("- {}: {}\n", e.ticker, e.note));
                }
            }

            out.push_str("\n## Deviations vs reference tables\n\n");
            if doc.deviations.is_empty() {
                out.push_str("No reference tables available, or every cell within tolerance.\n");
            } else {
                out.push_str(&render::md_table(
                    &DEVIATION_HEADERS.map(String::from),
                    &deviation_rows(&doc.deviations),
                ));
            }
            out
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut body = serde_json::to_string_pretty(value).expect("documents serialize");
    body.push('\n');
    body
}
