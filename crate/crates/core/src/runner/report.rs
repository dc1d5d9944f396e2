//! Benchmark output files.
//!
//! | file               | contents                                     |
//! |--------------------|----------------------------------------------|
//! | `report.csv`       | one row per (grid point, variant, seed)      |
//! | `summary.csv`      | mean and std per (grid point, variant)       |
//! | `report.md`        | the summary as one table per attack case     |
//! | `lambda_sweep.csv` | the λ selection, when λ was swept            |
//! | `checksums.csv`    | poisoned-graph SHA-256 per row               |
//! | `errors.log`       | failed cells, one per line                   |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::benchmark::{BenchmarkReport, SummaryRow, Variant};
use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 10] = [
    "case",
    "n_rogue",
    "edges_per_rogue",
    "variant",
    "seed",
    "test_acc",
    "mean_norm_entropy",
    "mean_rogue_mass",
    "best_epoch",
    "wall_time_s",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "case",
    "n_rogue",
    "edges_per_rogue",
    "variant",
    "n_ok",
    "n_failed",
    "test_acc_mean",
    "test_acc_std",
    "mean_norm_entropy",
    "mean_rogue_mass",
];

/// Aggregate formatting shared by `summary.csv` and `report.md`, so the two
/// always show identical numbers.
pub fn fmt_stat(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.4}")
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

pub fn write_report_csv(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record(REPORT_HEADER).map_err(err)?;
    for r in &report.rows {
        let mut rec = vec![
            r.case.clone(),
            r.n_rogue.to_string(),
            r.edges_per_rogue.to_string(),
            r.variant.name().to_string(),
            r.seed.to_string(),
        ];
        match &r.metrics {
            Some(m) => rec.extend([
                m.test_acc.to_string(),
                m.mean_norm_entropy.to_string(),
                m.mean_rogue_mass.to_string(),
                m.best_epoch.to_string(),
                format!("{:.3}", m.wall_time_s),
            ]),
            None => rec.extend(std::iter::repeat(String::new()).take(5)),
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn summary_record(s: &SummaryRow) -> Vec<String> {
    vec![
        s.case.clone(),
        s.n_rogue.to_string(),
        s.edges_per_rogue.to_string(),
        s.variant.name().to_string(),
        s.n_ok.to_string(),
        s.n_failed.to_string(),
        fmt_stat(s.test_acc_mean),
        fmt_stat(s.test_acc_std),
        fmt_stat(s.entropy_mean),
        fmt_stat(s.rogue_mass_mean),
    ]
}

pub fn write_summary_csv(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    for s in &report.summary {
        w.write_record(summary_record(s)).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cell(s: Option<&SummaryRow>) -> String {
    match s {
        None => "n/a".into(),
        Some(s) if s.n_ok == 0 => "failed".into(),
        Some(s) => {
            let mut c = format!(
                "{} ± {}",
                fmt_stat(s.test_acc_mean),
                fmt_stat(s.test_acc_std)
            );
            if s.n_failed > 0 {
                let _ = write!(c, " ({} failed)", s.n_failed);
            }
            c
        }
    }
}

/// Markdown tables shaped like the usual attack tables: one row per grid
/// point with baseline and robust test accuracy (mean ± std over seeds).
pub fn render_markdown(report: &BenchmarkReport, n_seeds: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Benchmark report\n");
    let _ = writeln!(
        out,
        "Regularizer `{}` at λ* = {}; {} seed(s) per cell. Test accuracy as mean ± sample std.\n",
        report.kind.name(),
        report.lambda_star,
        n_seeds
    );
    let mut cases: Vec<&str> = Vec::new();
    for s in &report.summary {
        if !cases.contains(&s.case.as_str()) {
            cases.push(&s.case);
        }
    }
    for case in cases {
        let (title, axis) = match case {
            "edges_fixed_500" => ("500 edges per rogue node", "# Rogue nodes"),
            "nodes_fixed_50" => ("50 rogue nodes", "# Edges per rogue node"),
            _ => ("Control (no rogue nodes)", "# Rogue nodes"),
        };
        let _ = writeln!(out, "## {title}\n");
        let _ = writeln!(out, "| {axis} | Baseline GAT | Robust GAT |");
        let _ = writeln!(out, "|---:|---:|---:|");
        let mut seen = Vec::new();
        for s in report.summary.iter().filter(|s| s.case == case) {
            let point = (s.n_rogue, s.edges_per_rogue);
            if seen.contains(&point) {
                continue;
            }
            seen.push(point);
            let x = if case == "nodes_fixed_50" {
                s.edges_per_rogue
            } else {
                s.n_rogue
            };
            let b = report.summary_for(case, point.0, point.1, Variant::Baseline);
            let r = report.summary_for(case, point.0, point.1, Variant::Robust);
            let _ = writeln!(out, "| {x} | {} | {} |", cell(b), cell(r));
        }
        out.push('\n');
    }
    out
}

pub fn write_sweep_csv(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let Some(sweep) = &report.sweep else {
        return Ok(());
    };
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record([
        "kind",
        "lambda",
        "mean_val_acc",
        "mean_norm_entropy",
        "selected",
    ])
    .map_err(err)?;
    for r in &sweep.rows {
        w.write_record([
            sweep.kind.name().to_string(),
            r.lambda.to_string(),
            r.mean_val_acc.to_string(),
            r.mean_entropy.to_string(),
            (r.lambda == sweep.best_lambda).to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_checksums_csv(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record([
        "case",
        "n_rogue",
        "edges_per_rogue",
        "variant",
        "seed",
        "checksum",
    ])
    .map_err(err)?;
    for r in &report.rows {
        w.write_record([
            r.case.clone(),
            r.n_rogue.to_string(),
            r.edges_per_rogue.to_string(),
            r.variant.name().to_string(),
            r.seed.to_string(),
            r.checksum.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_all(dir: &Path, report: &BenchmarkReport, n_seeds: usize) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_report_csv(&dir.join("report.csv"), report)?;
    write_summary_csv(&dir.join("summary.csv"), report)?;
    let md = dir.join("report.md");
    fs::write(&md, render_markdown(report, n_seeds)).map_err(|e| Error::io(&md, e))?;
    write_sweep_csv(&dir.join("lambda_sweep.csv"), report)?;
    write_checksums_csv(&dir.join("checksums.csv"), report)?;
    let mut log = String::new();
    for r in &report.rows {
        if let Some(e) = &r.error {
            let _ = writeln!(
                log,
                "{} n_rogue={} edges={} {} seed={}: {e}",
                r.case,
                r.n_rogue,
                r.edges_per_rogue,
                r.variant.name(),
                r.seed
            );
        }
    }
    let path = dir.join("errors.log");
    fs::write(&path, log).map_err(|e| Error::io(&path, e))
}
