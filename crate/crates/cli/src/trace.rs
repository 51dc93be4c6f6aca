//! Geodesic traces as CSV: `t, x0.., y0.., F`, one row per output node.

use std::fmt::Write as _;
use std::path::Path;

use finsler_core::geodesics::GeodesicTrace;

pub fn header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols.extend((0..n).map(|i| format!("y{i}")));
    cols.push("F".into());
    cols.join(",")
}

/// `Display` for `f64` is the shortest round-trip representation.
pub fn to_csv(trace: &GeodesicTrace) -> String {
    let n = trace.samples.first().map_or(0, |s| s.x.len());
    let mut out = header(n);
    out.push('\n');
    for s in &trace.samples {
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.x.iter().copied())
            .chain(s.y.iter().copied())
            .chain(std::iter::once(s.f))
            .map(|v| v.to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn emit_trace(trace: &GeodesicTrace, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_csv(trace))
}

/// Rows of a trace CSV, header skipped.
pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, std::num::ParseFloatError> {
    text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::parse).collect()).collect()
}
