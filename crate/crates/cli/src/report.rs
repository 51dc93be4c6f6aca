//! Report envelope shared by every subcommand.

use finsler_core::MetricSpec;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::specfile;

pub const TIMING_FIELD: &str = "timing_ms";

/// SHA-256 of the canonical JSON form of a spec, so formatting does not matter.
pub fn spec_digest(spec: &MetricSpec) -> String {
    hex::encode(Sha256::digest(specfile::spec_to_json(spec).as_bytes()))
}

/// `{tool, version, command, specs, settings, result, timing_ms}`; keys come out sorted.
pub fn envelope(command: &str, specs: &[&MetricSpec], settings: Value, result: impl Serialize, timing_ms: u128) -> Value {
    let digests: Vec<String> = specs.iter().map(|s| spec_digest(s)).collect();
    json!({
        "tool": "finsler",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "spec_digests": digests,
        "settings": settings,
        "result": serde_json::to_value(result).expect("reports serialize"),
        TIMING_FIELD: timing_ms as u64,
    })
}

pub fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

/// The report with its timing removed, for comparisons.
pub fn without_timing(mut v: Value) -> Value {
    if let Some(map) = v.as_object_mut() {
        map.remove(TIMING_FIELD);
    }
    v
}

/// Nested arrays of an n-dimensional array.
pub fn array_json<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> Value {
    fn rec(view: ndarray::ArrayViewD<f64>) -> Value {
        if view.ndim() == 0 {
            return json!(view.first().copied().unwrap_or(0.0));
        }
        Value::Array(view.outer_iter().map(rec).collect())
    }
    rec(a.view().into_dyn())
}
