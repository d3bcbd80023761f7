//! CSV tables and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::runner::{Method, RunReport};
use crate::scan::ScanGrid;
use crate::BenchError;

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Aggregate table: one row per (sweep value, method).
pub fn aggregates_csv(report: &RunReport) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let sweep = report.sweep_parameter.as_deref().unwrap_or("sweep_value");
    w.write_record([sweep, "method", "mean_objective", "mean_gap_percent", "feasible_count", "mean_iterations", "mean_wall_ms"])
        .map_err(csv_err)?;
    for a in &report.aggregates {
        w.write_record([
            opt(a.sweep_value),
            a.method.name().to_string(),
            opt(a.mean_objective),
            opt(a.mean_gap_percent),
            a.feasible_count.to_string(),
            opt(a.mean_iterations),
            opt(a.mean_wall_ms),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Per-realization table without timing columns, so identical configs give
/// identical files.
pub fn records_csv(report: &RunReport) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sweep_value".to_string(), "realization".into(), "upper_bound".into(), "dual_converged".into()];
    for m in &Method::ALL[1..] {
        header.push(format!("{}_status", m.name()));
        header.push(format!("{}_objective", m.name()));
        header.push(format!("{}_gap_percent", m.name()));
    }
    header.push("dual_iterations".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in &report.records {
        let mut row = vec![opt(r.sweep_value), r.realization.to_string(), format!("{}", r.upper_bound), r.dual_converged.to_string()];
        for &m in &Method::ALL[1..] {
            let res = r.result(m);
            row.push(serde_json::to_value(res.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
            row.push(opt(res.objective));
            row.push(opt(res.gap_percent));
        }
        row.push(r.dual.iterations.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Dual iteration traces of every realization that carries one.
pub fn traces_csv(report: &RunReport) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sweep_value", "realization", "iteration", "theta", "lambda", "mu", "g_lambda", "g_mu_norm", "power", "rt_rates"])
        .map_err(csv_err)?;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";");
    for r in &report.records {
        for t in r.trace.iter().flatten() {
            w.write_record([
                opt(r.sweep_value),
                r.realization.to_string(),
                t.iteration.to_string(),
                format!("{}", t.theta),
                format!("{}", t.lambda),
                join(&t.mu),
                format!("{}", t.g_lambda),
                format!("{}", t.g_mu_norm),
                format!("{}", t.power),
                join(&t.rt_rates),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> BenchError {
    BenchError::Io(std::io::Error::other(e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, BenchError> {
    let bytes = w.into_inner().map_err(|e| BenchError::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| BenchError::Io(std::io::Error::other(e)))
}

/// Writes `<sweep>.csv`, `records.csv`, `manifest.json` and, when traces
/// were kept, `traces.csv`. Returns the written paths.
pub fn write_report(report: &RunReport, out: &Path) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(out)?;
    let name = report.sweep_parameter.as_deref().unwrap_or("scenario");
    let mut files = vec![
        (out.join(format!("{name}.csv")), aggregates_csv(report)?),
        (out.join("records.csv"), records_csv(report)?),
    ];
    if report.records.iter().any(|r| r.trace.is_some()) {
        files.push((out.join("traces.csv"), traces_csv(report)?));
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": report.config.seed,
        "realizations": report.config.realizations,
        "sweep_parameter": report.sweep_parameter,
        "config": report.config,
        "aggregates": report.aggregates,
        "files": files.iter().map(|(p, _)| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let manifest_text = serde_json::to_string_pretty(&manifest).map_err(|e| BenchError::Io(std::io::Error::other(e)))?;
    files.push((out.join("manifest.json"), manifest_text));
    for (path, text) in &files {
        fs::write(path, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn write_scan(grid: &ScanGrid, out: &Path) -> Result<PathBuf, BenchError> {
    fs::create_dir_all(out)?;
    let path = out.join("scan.csv");
    fs::write(&path, grid.to_delimited())?;
    Ok(path)
}
