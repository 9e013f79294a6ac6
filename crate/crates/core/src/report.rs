//! Tables and their Markdown, CSV and JSON renderings.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explorer::{SweepResult, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format `{other}` (markdown, csv, json)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderTarget {
    pub format: Format,
    /// Significant digits when `k_notation` is off.
    pub precision: usize,
    /// Print 48000 as `48K` and 1.5e6 as `1.5M`.
    pub k_notation: bool,
}

impl Default for RenderTarget {
    fn default() -> Self {
        Self {
            format: Format::Markdown,
            precision: 3,
            k_notation: true,
        }
    }
}

impl RenderTarget {
    pub fn new(format: Format) -> Self {
        Self {
            format,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.precision == 0 {
            return Err(Error::domain("render target", "precision must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumKind {
    /// Tokens per second.
    Rate,
    /// Whole GiB.
    Capacity,
    /// FLOPs per byte, two decimals.
    Intensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Cell {
    Num {
        value: f64,
        unit: NumKind,
    },
    /// System TPS with the matching user TPS.
    Pair {
        stps: f64,
        utps: f64,
    },
    /// Not servable; `pair` cells render as `- (-)`.
    Dash {
        pair: bool,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    /// Empty for tables without grouping.
    pub name: String,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    pub title: String,
    pub row_header: String,
    pub columns: Vec<String>,
    pub sections: Vec<Section>,
}

impl Table {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Parse(format!("table at `{}`: {}", e.path(), e.inner())))
    }

    pub fn cells(&self) -> impl Iterator<Item = (&str, &str, &str, &Cell)> {
        self.sections.iter().flat_map(move |s| {
            s.rows.iter().flat_map(move |r| {
                self.columns
                    .iter()
                    .zip(&r.cells)
                    .map(move |(c, cell)| (s.name.as_str(), r.label.as_str(), c.as_str(), cell))
            })
        })
    }

    pub fn cell(&self, section: &str, row: &str, column: &str) -> Option<&Cell> {
        self.cells()
            .find(|(s, r, c, _)| *s == section && *r == row && *c == column)
            .map(|x| x.3)
    }
}

/// `486`, `1.2K`, `48K`, `1.5M`: integers below a thousand, otherwise one
/// decimal while the scaled value is below 10.
pub fn k_notation(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let a = v.abs();
    if a.round() < 1000.0 {
        return format!("{}", v.round() as i64);
    }
    let (scaled, suffix) = if (a / 1e3).round() < 1000.0 && a < 1e6 {
        (v / 1e3, "K")
    } else {
        (v / 1e6, "M")
    };
    if (scaled.abs() * 10.0).round() < 100.0 {
        format!("{scaled:.1}{suffix}")
    } else {
        format!("{}{suffix}", scaled.round() as i64)
    }
}

/// `v` to `digits` significant digits, without exponent notation.
pub fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = digits as i64 - 1 - magnitude;
    if decimals >= 0 {
        format!("{v:.*}", decimals as usize)
    } else {
        let unit = 10f64.powi((-decimals) as i32);
        format!("{}", ((v / unit).round() * unit) as i64)
    }
}

fn rate(v: f64, t: &RenderTarget) -> String {
    if t.k_notation {
        k_notation(v)
    } else {
        significant(v, t.precision)
    }
}

pub fn format_cell(cell: &Cell, t: &RenderTarget) -> String {
    match cell {
        Cell::Num { value, unit } => match unit {
            NumKind::Rate => rate(*value, t),
            NumKind::Capacity => format!("{}", value.round() as i64),
            NumKind::Intensity => format!("{value:.2}"),
        },
        Cell::Pair { stps, utps } => format!("{} ({})", rate(*stps, t), rate(*utps, t)),
        Cell::Dash { pair: true, .. } => "- (-)".into(),
        Cell::Dash { pair: false, .. } => "-".into(),
    }
}

pub fn render(table: &Table, t: &RenderTarget) -> Result<String> {
    t.validate()?;
    match t.format {
        Format::Markdown => Ok(markdown(table, t)),
        Format::Csv => csv_table(table, t),
        Format::Json => Ok(serde_json::to_string_pretty(table).expect("table serializes") + "\n"),
    }
}

fn markdown(table: &Table, t: &RenderTarget) -> String {
    let mut out = format!("### {}\n\n", table.title);
    let header: Vec<&str> = std::iter::once(table.row_header.as_str())
        .chain(table.columns.iter().map(String::as_str))
        .collect();
    out += &format!("| {} |\n", header.join(" | "));
    out += &format!("|{}\n", ":---|".to_string() + &"---:|".repeat(table.columns.len()));
    for s in &table.sections {
        if !s.name.is_empty() {
            out += &format!("| **{}** |{}\n", s.name, " |".repeat(table.columns.len()));
        }
        for r in &s.rows {
            let cells: Vec<String> = r.cells.iter().map(|c| format_cell(c, t)).collect();
            out += &format!("| {} | {} |\n", r.label, cells.join(" | "));
        }
    }
    out
}

fn csv_table(table: &Table, t: &RenderTarget) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["section".to_string(), table.row_header.clone()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for s in &table.sections {
        for r in &s.rows {
            let mut rec = vec![s.name.clone(), r.label.clone()];
            rec.extend(r.cells.iter().map(|c| format_cell(c, t)));
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Column order of sweep CSV output. Times are seconds, bandwidth TB/s.
pub const SWEEP_COLUMNS: [&str; 30] = [
    "model",
    "chip",
    "tp",
    "pp",
    "batch",
    "context",
    "mem_bw_tbs",
    "t_tp_sync_ns",
    "feasible",
    "t_compute",
    "t_mem",
    "t_exposed_sync",
    "t_exposed_pp",
    "t_exposed_moe_balance",
    "t_exposed_moe_routing",
    "t_exposed_other",
    "t_batch",
    "utps",
    "stps",
    "bottleneck",
    "tensor_utilization",
    "mem_bw_utilization",
    "capacity_gib",
    "power_w",
    "stps_per_w",
    "mi",
    "utps_norm",
    "stps_norm",
    "efficiency_norm",
    "reason",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sweep_record(r: &SweepRow) -> Vec<String> {
    let s = |v: u64| v.to_string();
    let f = |v: f64| v.to_string();
    let mut rec = vec![r.model.clone(), r.chip.clone(), s(r.tp)];
    match &r.point {
        Some(e) => {
            let l = &e.latency;
            let t = &e.throughput;
            rec.extend([
                s(e.pp),
                s(e.batch),
                s(e.context),
                f(e.mem_bw),
                f(e.t_tp_sync * 1e9),
                "true".into(),
                f(l.t_compute),
                f(l.t_mem),
                f(l.t_exposed_sync),
                f(l.t_exposed_pp),
                f(l.t_exposed_moe_balance),
                f(l.t_exposed_moe_routing),
                f(l.t_exposed_other),
                f(l.t_batch),
                f(t.utps),
                f(t.stps),
                t.bottleneck.to_string(),
                f(t.tensor_utilization),
                f(t.mem_bw_utilization),
                f(e.capacity_gib),
                f(e.power_w),
                f(e.stps_per_w),
                f(e.mi),
                opt(r.utps_norm),
                opt(r.stps_norm),
                opt(r.efficiency_norm),
                String::new(),
            ]);
        }
        None => {
            rec.extend([
                String::new(),
                r.requested_batch.map(s).unwrap_or_else(|| "max".into()),
                s(r.context),
                opt(r.mem_bw_override),
                opt(r.tp_sync_ns_override),
                "false".into(),
            ]);
            rec.extend(std::iter::repeat_n(String::new(), SWEEP_COLUMNS.len() - rec.len() - 1));
            rec.push(r.infeasible.clone().unwrap_or_default());
        }
    }
    rec
}

/// Sweep rows as CSV (one row per grid point), a Markdown table, or JSON.
pub fn render_sweep(result: &SweepResult, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(result).expect("sweep serializes") + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(SWEEP_COLUMNS).map_err(io)?;
            for r in &result.rows {
                w.write_record(sweep_record(r)).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
        }
        Format::Markdown => {
            let mut out = format!(
                "| {} |\n|{}\n",
                SWEEP_COLUMNS.join(" | "),
                "---|".repeat(SWEEP_COLUMNS.len())
            );
            for r in &result.rows {
                out += &format!("| {} |\n", sweep_record(r).join(" | "));
            }
            Ok(out)
        }
    }
}
