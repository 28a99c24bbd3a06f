//! Small text-rendering helpers shared by the markdown and CSV emitters.
//!
//! Display precision follows the reference tables: two decimals for USD
//! millions, prices and percentages; four for unitless ratios. The JSON
//! emitters bypass these and carry full precision.

/// USD millions, two decimals.
pub fn millions(v: f64) -> String {
    format!("{v:.2}")
}

/// USD per unit, two decimals.
pub fn price(v: f64) -> String {
    format!("{v:.2}")
}

/// A fraction rendered as a percentage, two decimals.
pub fn percent(frac: f64) -> String {
    format!("{:.2}%", frac * 100.0)
}

/// Unitless ratio, four decimals.
pub fn ratio(v: f64) -> String {
    format!("{v:.4}")
}

pub fn opt<T>(value: Option<T>, f: impl Fn(T) -> String) -> String {
    value.map(f).unwrap_or_else(|| "NA".to_string())
}

/// A GitHub-style markdown table.
pub fn md_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", headers.join(" | ")));
    out.push_str(&format!("|{}\n", "---|".repeat(headers.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

/// One CSV section: a `#`-prefixed title, a header row, and data rows.
pub fn csv_block(title: &str, headers: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {title}\n"));
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
