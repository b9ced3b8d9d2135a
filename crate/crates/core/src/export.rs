//! Trace tables, batch summaries and SVG trajectory plots.
//!
//! Trace table layout (`voisim-trace/1`): a `#` comment line with the schema
//! and run identity, a header row, then one comma-separated row per step.
//! Columns: `k`, `sq_err_<l>` per link, `u_<t>` per transmitter, `gamma_<l>`
//! per link (`1`, `0`, or empty when nothing was sent), `lambda_<l>` per
//! link, `chi_<t>` per transmitter (empty for baselines) and, for
//! multi-access runs, `rho_<t>`. Reals are written with 17 significant
//! digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::batch::{BatchSummary, Stat};
use crate::model::ScenarioKind;
use crate::rng::GENERATOR;
use crate::sim::RunMetrics;

pub const TRACE_SCHEMA: &str = "voisim-trace/1";
pub const SUMMARY_SCHEMA: &str = "voisim-summary/1";

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct ExportError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Table,
    Plot,
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn trace_table(metrics: &RunMetrics) -> String {
    let links = metrics.total_mse.len();
    let tx = metrics.transmissions.len();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {TRACE_SCHEMA} scenario={} kind={} policy={} seed={} rng={GENERATOR}",
        metrics.scenario, metrics.kind, metrics.policy, metrics.seed
    );
    let mut header: Vec<String> = vec!["k".into()];
    header.extend((1..=links).map(|l| format!("sq_err_{l}")));
    header.extend((1..=tx).map(|t| format!("u_{t}")));
    header.extend((1..=links).map(|l| format!("gamma_{l}")));
    header.extend((1..=links).map(|l| format!("lambda_{l}")));
    header.extend((1..=tx).map(|t| format!("chi_{t}")));
    if metrics.kind == ScenarioKind::MultiAccess {
        header.extend((1..=tx).map(|t| format!("rho_{t}")));
    }
    out.push_str(&header.join(","));
    out.push('\n');

    for step in &metrics.steps {
        let mut row: Vec<String> = vec![step.k.to_string()];
        row.extend(step.links.iter().map(|l| num(l.sq_error)));
        row.extend(step.decision.transmit.iter().map(|u| (*u as u8).to_string()));
        row.extend(step.links.iter().map(|l| match l.delivered {
            Some(true) => "1".to_string(),
            Some(false) => "0".to_string(),
            None => String::new(),
        }));
        row.extend(step.links.iter().map(|l| num(l.lambda)));
        row.extend((0..tx).map(|t| opt(step.decision.chi.get(t).copied())));
        if metrics.kind == ScenarioKind::MultiAccess {
            row.extend((0..tx).map(|t| opt(step.decision.rho.get(t).copied())));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<(), ExportError> {
    let wrap = |source| ExportError {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(wrap)?;
    }
    std::fs::write(path, contents).map_err(wrap)
}

pub fn export_run(metrics: &RunMetrics, format: ExportFormat, path: &Path) -> Result<(), ExportError> {
    match format {
        ExportFormat::Table => write(path, &trace_table(metrics)),
        ExportFormat::Plot => write(path, &plot_svg(metrics)),
    }
}

fn stat_cells(s: &Stat) -> [String; 2] {
    [num(s.mean), s.std_err.map(num).unwrap_or_else(|| "n/a".into())]
}

/// Long-format summary: `section,policy,metric,mean,std_err`.
pub fn summary_table(summary: &BatchSummary) -> String {
    let mut out = String::new();
    let seeds: Vec<String> = summary.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(
        out,
        "# {SUMMARY_SCHEMA} scenario={} rng={GENERATOR} seeds={}",
        summary.scenario,
        seeds.join(" ")
    );
    out.push_str("section,policy,metric,mean,std_err\n");
    let mut row = |section: &str, policy: &str, metric: String, s: &Stat| {
        let [m, se] = stat_cells(s);
        let _ = writeln!(out, "{section},{policy},{metric},{m},{se}");
    };
    for p in &summary.policies {
        row("policy", &p.policy, "phi".into(), &p.phi);
        for (l, s) in p.total_mse.iter().enumerate() {
            row("policy", &p.policy, format!("total_mse_{}", l + 1), s);
        }
        row("policy", &p.policy, "transmissions".into(), &p.transmissions);
        for (l, s) in p.losses.iter().enumerate() {
            row("policy", &p.policy, format!("losses_{}", l + 1), s);
        }
    }
    for d in &summary.paired {
        let label = format!("{} - {}", d.policy, d.reference);
        row("paired", &label, "phi".into(), &d.phi);
        for (l, s) in d.total_mse.iter().enumerate() {
            row("paired", &label, format!("total_mse_{}", l + 1), s);
        }
        row("paired", &label, "transmissions".into(), &d.transmissions);
    }
    out
}

pub fn write_summary(summary: &BatchSummary, path: &Path) -> Result<(), ExportError> {
    write(path, &summary_table(summary))
}

const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

/// Squared-error trajectories (log scale) above per-link transmission
/// markers: filled circle for a delivered packet, cross for a lost one.
pub fn plot_svg(metrics: &RunMetrics) -> String {
    let (width, height) = (960.0, 540.0);
    let (left, right) = (70.0, 20.0);
    let (top, err_h) = (40.0, 300.0);
    let events_top = top + err_h + 50.0;
    let lane = 50.0;
    let plot_w = width - left - right;
    let steps = metrics.steps.len().max(2) - 1;
    let x_of = |k: usize| left + plot_w * k as f64 / steps as f64;

    let floor = 1e-12_f64;
    let logs: Vec<Vec<f64>> = (0..metrics.total_mse.len())
        .map(|l| {
            metrics
                .steps
                .iter()
                .map(|s| s.links[l].sq_error.max(floor).log10())
                .collect()
        })
        .collect();
    let hi = logs.iter().flatten().cloned().fold(f64::MIN, f64::max).ceil();
    let lo = logs.iter().flatten().cloned().fold(f64::MAX, f64::min).floor();
    let span = (hi - lo).max(1.0);
    let y_of = |v: f64| top + err_h * (hi - v) / span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{left}" y="20">{} | {} | seed {} | TX={}</text>"#,
        metrics.scenario,
        metrics.policy,
        metrics.seed,
        metrics.total_transmissions()
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{err_h}" fill="none" stroke="black"/>"#
    );
    let mut decade = lo;
    while decade <= hi {
        let y = y_of(decade);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0,
            decade as i64
        );
        decade += 1.0;
    }
    for (l, series) in logs.iter().enumerate() {
        let points: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{:.2},{:.2}", x_of(k), y_of(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            COLORS[l % 2],
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{}">link {} squared error</text>"#,
            left + plot_w - 160.0,
            top + 16.0 + 14.0 * l as f64,
            COLORS[l % 2],
            l + 1
        );
    }

    for l in 0..metrics.total_mse.len() {
        let y = events_top + lane * l as f64;
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999999"/><text x="{:.2}" y="{:.2}" text-anchor="end">link {}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0,
            l + 1
        );
        for step in &metrics.steps {
            let x = x_of(step.k);
            match step.links[l].delivered {
                Some(true) => {
                    let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, COLORS[l % 2]);
                }
                Some(false) => {
                    let _ = writeln!(
                        svg,
                        r#"<path d="M{:.2},{:.2} l6,6 m0,-6 l-6,6" stroke="black"/>"#,
                        x - 3.0,
                        y - 3.0
                    );
                }
                None => {}
            }
        }
    }
    let axis_y = events_top + lane * metrics.total_mse.len() as f64;
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{axis_y:.2}" text-anchor="middle">step k (0..{})</text>"#,
        left + plot_w / 2.0,
        metrics.horizon
    );
    svg.push_str("</svg>\n");
    svg
}
