//! CSV and markdown report emission.

use std::fmt::Write as _;
use std::io::Write;

use branchpde::EstimatorResult;

use crate::config::Format;
use crate::error::CliResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COLUMNS: [&str; 11] = [
    "x",
    "estimate",
    "ci_lo",
    "ci_hi",
    "std_over_mean",
    "rel_error",
    "runtime_s",
    "n",
    "seed",
    "version",
    "r",
];

/// One estimator result at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub x: Vec<f64>,
    /// Domain half-width, for tables that vary it.
    pub r: Option<f64>,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub std_over_mean: Option<f64>,
    pub rel_error: Option<f64>,
    pub runtime_s: f64,
    pub n: u64,
    pub seed: u64,
}

impl Row {
    pub fn new(x: &[f64], res: &EstimatorResult, exact: Option<f64>, seed: u64) -> Self {
        Row {
            x: x.to_vec(),
            r: None,
            estimate: res.mean,
            ci_lo: res.ci99.0,
            ci_hi: res.ci99.1,
            std_over_mean: res.std_over_mean(),
            rel_error: exact.and_then(|e| res.relative_error(e)),
            runtime_s: res.elapsed,
            n: res.n,
            seed,
        }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }
}

/// Rows plus the metadata printed around them.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub title: String,
    pub rows: Vec<Row>,
    pub seed: u64,
    pub notes: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn format_point(x: &[f64]) -> String {
    match x {
        [v] => v.to_string(),
        _ => format!(
            "({})",
            x.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        ),
    }
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            format_point(&r.x),
            r.estimate.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
            opt(r.std_over_mean),
            opt(r.rel_error),
            r.runtime_s.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            VERSION.to_string(),
            opt(r.r),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn markdown(report: &Report) -> String {
    let rows = &report.rows;
    let with_r = rows.iter().any(|r| r.r.is_some());
    let with_rel = rows.iter().any(|r| r.rel_error.is_some());
    let mut head = Vec::new();
    if with_r {
        head.push("r");
    }
    head.extend(["x", "Estimate", "99% conf. interval", "Std/Mean"]);
    if with_rel {
        head.push("Relative error");
    }
    head.push("Runtime (s)");

    let mut s = String::new();
    let _ = writeln!(s, "### {}\n", report.title);
    let _ = writeln!(s, "| {} |", head.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(head.len()));
    for r in rows {
        let mut cells = Vec::new();
        if with_r {
            cells.push(r.r.map(|v| v.to_string()).unwrap_or_else(|| "--".into()));
        }
        cells.push(format_point(&r.x));
        cells.push(format!("{:.6}", r.estimate));
        cells.push(format!("[{:.6}, {:.6}]", r.ci_lo, r.ci_hi));
        cells.push(
            r.std_over_mean
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "--".into()),
        );
        if with_rel {
            cells.push(
                r.rel_error
                    .map(|v| format!("{:.4}%", 100.0 * v))
                    .unwrap_or_else(|| "--".into()),
            );
        }
        cells.push(format!("{:.2}", r.runtime_s));
        let _ = writeln!(s, "| {} |", cells.join(" | "));
    }
    let n: Vec<String> = {
        let mut n: Vec<u64> = rows.iter().map(|r| r.n).collect();
        n.dedup();
        n.iter().map(u64::to_string).collect()
    };
    let _ = writeln!(
        s,
        "\nn = {}, seed = {}, branchpde {}",
        n.join("/"),
        report.seed,
        VERSION
    );
    for note in &report.notes {
        let _ = writeln!(s, "\n{note}");
    }
    s
}

pub fn emit<W: Write>(report: &Report, format: Format, mut out: W) -> CliResult<()> {
    match format {
        Format::Csv => write_csv(&report.rows, out),
        Format::Md => {
            out.write_all(markdown(report).as_bytes())
                .map_err(|e| crate::error::CliError::Io {
                    path: "<output>".into(),
                    source: e,
                })
        }
    }
}

/// Two-column `quantity,value` output for analysis and kernel checks.
pub fn emit_pairs<W: Write>(
    title: &str,
    pairs: &[(String, String)],
    format: Format,
    mut out: W,
) -> CliResult<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["quantity", "value"])?;
            for (k, v) in pairs {
                w.write_record([k, v])?;
            }
            w.flush().map_err(csv::Error::from)?;
            Ok(())
        }
        Format::Md => {
            let mut s = format!("### {title}\n\n| Quantity | Value |\n|---|---|\n");
            for (k, v) in pairs {
                let _ = writeln!(s, "| {k} | {v} |");
            }
            let _ = writeln!(s, "\nbranchpde {VERSION}");
            out.write_all(s.as_bytes())
                .map_err(|e| crate::error::CliError::Io {
                    path: "<output>".into(),
                    source: e,
                })
        }
    }
}
