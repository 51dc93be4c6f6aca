//! Geodesic integration with an embedded Dormand–Prince 5(4) pair and trace diagnostics.

use ndarray::Array1;
use serde::Serialize;

use crate::connection;
use crate::error::{FinslerError, Result};
use crate::metric;
use crate::spec::MetricSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Output nodes, equally spaced on `[0, t_end]` including both ends.
    pub nodes: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 1_000_000, nodes: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `F` on unit-speed traces, `T` otherwise.
    pub f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicTrace {
    pub samples: Vec<TraceSample>,
    pub stats: IntegratorStats,
    /// Whether `y0` was normalized to `F = 1` (requires `T(x0, y0) > 0`).
    pub unit_speed: bool,
    pub order: usize,
}

/// Geodesic acceleration `−2G^i`, the same spray the connection layer reports.
pub fn acceleration(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array1<f64>> {
    Ok(connection::spray(spec, x, y)? * -2.0)
}

fn speed_value(spec: &MetricSpec, x: &[f64], y: &[f64], unit_speed: bool) -> Result<f64> {
    let (t, f) = metric::fundamental(spec, x, y)?;
    Ok(if unit_speed { f.unwrap_or(f64::NAN) } else { t })
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// State `(x, y)` flattened; derivative `(y, −2G(x, y))`.
fn rhs(spec: &MetricSpec, state: &[f64]) -> Result<Vec<f64>> {
    let n = state.len() / 2;
    let (x, y) = state.split_at(n);
    let acc = acceleration(spec, x, y)?;
    Ok(y.iter().copied().chain(acc.iter().copied()).collect())
}

/// One DP step; returns the 5th-order solution and the embedded error estimate.
fn dp_step(spec: &MetricSpec, state: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = state.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for s in 0..7 {
        let mut stage = state.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                for (v, d) in stage.iter_mut().zip(kj) {
                    *v += h * a * d;
                }
            }
        }
        debug_assert!(C[s] >= 0.0);
        k.push(rhs(spec, &stage)?);
    }
    let mut next = state.to_vec();
    let mut err = vec![0.0; dim];
    for s in 0..7 {
        for i in 0..dim {
            next[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    Ok((next, err))
}

pub fn integrate_geodesic(
    spec: &MetricSpec,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<GeodesicTrace> {
    integrate_geodesic_with(spec, x0, y0, t_end, IntegratorOptions { rtol, atol, ..Default::default() })
}

pub fn integrate_geodesic_with(
    spec: &MetricSpec,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    opts: IntegratorOptions,
) -> Result<GeodesicTrace> {
    let n = spec.dimension();
    for (what, v) in [("x0", x0), ("y0", y0)] {
        if v.len() != n {
            return Err(FinslerError::DimensionMismatch { what, expected: n, found: v.len() });
        }
    }
    if !(t_end > 0.0) || opts.nodes < 2 {
        return Err(FinslerError::InvalidSpec("t_end must be positive and nodes ≥ 2".into()));
    }
    if !spec.contains(x0) {
        return Err(FinslerError::ChartExit { t: 0.0 });
    }
    // Checks nondegeneracy of h at the start.
    let jet0 = metric::metric_jet_to(spec, x0, y0, metric::JetDepth::Spray)?;
    let unit_speed = jet0.t > 0.0;
    let y_start: Vec<f64> = match jet0.f {
        Some(f) if unit_speed => y0.iter().map(|v| v / f).collect(),
        _ => y0.to_vec(),
    };

    let mut state: Vec<f64> = x0.iter().chain(&y_start).copied().collect();
    let node_t = |k: usize| t_end * k as f64 / (opts.nodes - 1) as f64;
    let mut samples = vec![TraceSample {
        t: 0.0,
        x: x0.to_vec(),
        y: y_start.clone(),
        f: speed_value(spec, x0, &y_start, unit_speed)?,
    }];
    let mut next_node = 1;
    let mut t = 0.0;
    let mut h = node_t(1).min(0.01 * t_end);
    let mut stats = IntegratorStats { steps: 0, rejected: 0, rtol: opts.rtol, atol: opts.atol };

    while next_node < opts.nodes {
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(FinslerError::StepBudget { t, max_steps: opts.max_steps });
        }
        let target = node_t(next_node);
        let lands = h >= target - t;
        let step = if lands { target - t } else { h };
        if step < 1e-14 * t_end.max(1.0) {
            return Err(FinslerError::StepFailure { t, h: step });
        }
        let (cand, err) = dp_step(spec, &state, step)?;
        let norm = state
            .iter()
            .zip(&cand)
            .zip(&err)
            .map(|((a, b), e)| e.abs() / (opts.atol + opts.rtol * a.abs().max(b.abs())))
            .fold(0.0f64, f64::max);
        if !norm.is_finite() {
            stats.rejected += 1;
            h = step * 0.2;
            continue;
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        if norm > 1.0 {
            stats.rejected += 1;
            h = step * factor;
            continue;
        }
        stats.steps += 1;
        t = if lands { target } else { t + step };
        state = cand;
        let (x, y) = state.split_at(n);
        if !spec.contains(x) {
            return Err(FinslerError::ChartExit { t });
        }
        if lands {
            samples.push(TraceSample { t, x: x.to_vec(), y: y.to_vec(), f: speed_value(spec, x, y, unit_speed)? });
            next_node += 1;
            // A clamped landing step says nothing about the natural step size.
            h = h.max(step * factor);
        } else {
            h = step * factor;
        }
    }
    Ok(GeodesicTrace { samples, stats, unit_speed, order: spec.order() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceDiagnostics {
    /// Max relative `|F − F(0)|` (or of `T` on traces that are not unit speed).
    pub speed_drift: f64,
    /// Max distance of `x(t)` from the chord through the endpoints, over the polyline length.
    pub straightness: f64,
    pub length: f64,
}

pub fn trace_diagnostics(trace: &GeodesicTrace) -> TraceDiagnostics {
    let s = &trace.samples;
    let f0 = s.first().map_or(0.0, |p| p.f);
    let speed_drift =
        s.iter().map(|p| (p.f - f0).abs() / f0.abs().max(f64::MIN_POSITIVE)).fold(0.0f64, f64::max);
    let length = polyline_length(s);
    let (Some(a), Some(b)) = (s.first(), s.last()) else {
        return TraceDiagnostics { speed_drift, straightness: 0.0, length };
    };
    let dir: Vec<f64> = b.x.iter().zip(&a.x).map(|(p, q)| p - q).collect();
    let dd: f64 = dir.iter().map(|v| v * v).sum();
    let max_dev = s
        .iter()
        .map(|p| {
            let r: Vec<f64> = p.x.iter().zip(&a.x).map(|(u, v)| u - v).collect();
            let proj = if dd > 0.0 { r.iter().zip(&dir).map(|(u, v)| u * v).sum::<f64>() / dd } else { 0.0 };
            r.iter().zip(&dir).map(|(u, v)| (u - proj * v).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0f64, f64::max);
    let straightness = if length > 0.0 { max_dev / length } else { 0.0 };
    TraceDiagnostics { speed_drift, straightness, length }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

fn polyline_length(s: &[TraceSample]) -> f64 {
    s.windows(2).map(|w| dist(&w[0].x, &w[1].x)).sum()
}

/// Point on the polyline at Euclidean arc length `target`.
fn point_at_length(s: &[TraceSample], target: f64) -> Vec<f64> {
    let mut acc = 0.0;
    for w in s.windows(2) {
        let seg = dist(&w[0].x, &w[1].x);
        if acc + seg >= target && seg > 0.0 {
            let u = (target - acc) / seg;
            return w[0].x.iter().zip(&w[1].x).map(|(p, q)| p + u * (q - p)).collect();
        }
        acc += seg;
    }
    s.last().map(|p| p.x.clone()).unwrap_or_default()
}

/// Max distance between two traces resampled at matched Euclidean arc lengths,
/// over the common length range.
///
/// Traces of one curve under different parametrizations give ≈ 0; the value is
/// limited by the chord error of the polylines, so dense traces are needed.
pub fn point_set_distance(a: &GeodesicTrace, b: &GeodesicTrace, resample: usize) -> f64 {
    let la = polyline_length(&a.samples);
    let lb = polyline_length(&b.samples);
    let common = la.min(lb);
    let k = resample.max(2);
    (0..k)
        .map(|i| {
            let s = common * i as f64 / (k - 1) as f64;
            dist(&point_at_length(&a.samples, s), &point_at_length(&b.samples, s))
        })
        .fold(0.0f64, f64::max)
}
