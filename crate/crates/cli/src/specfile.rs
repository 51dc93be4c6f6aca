//! JSON spec files: `{dimension, order, coefficients: [{index, poly: [{exponents, value}]}], chart_box, scale?}`.

use std::collections::BTreeSet;
use std::path::Path;

use finsler_core::polyfield::{canonicalize_index, Monomial, PolyScalar};
use finsler_core::{ConformalScale, MetricSpec, SymCoeffTensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {field}: {message}")]
    Validation { path: String, field: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub index: Vec<i64>,
    pub poly: Vec<Term>,
}

/// Optional rational factor `base(x)^power` multiplying every coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleEntry {
    pub base: Vec<Term>,
    pub power: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub dimension: usize,
    pub order: usize,
    pub coefficients: Vec<CoefficientEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleEntry>,
}

struct Ctx<'a> {
    path: &'a str,
}

impl Ctx<'_> {
    fn invalid(&self, field: impl Into<String>, message: impl Into<String>) -> SpecError {
        SpecError::Validation { path: self.path.to_string(), field: field.into(), message: message.into() }
    }
}

fn poly_from_terms(ctx: &Ctx, field: &str, n: usize, terms: &[Term]) -> Result<PolyScalar, SpecError> {
    let mut seen = BTreeSet::new();
    for (t, term) in terms.iter().enumerate() {
        if term.exponents.len() != n {
            return Err(ctx.invalid(
                format!("{field}.poly[{t}].exponents"),
                format!("length {} but dimension is {n}", term.exponents.len()),
            ));
        }
        if !term.value.is_finite() {
            return Err(ctx.invalid(format!("{field}.poly[{t}].value"), "not finite"));
        }
        if !seen.insert(term.exponents.clone()) {
            return Err(ctx.invalid(format!("{field}.poly[{t}].exponents"), "duplicate monomial"));
        }
    }
    Ok(PolyScalar::from_monomials(
        terms.iter().map(|t| Monomial { exponents: t.exponents.clone(), coefficient: t.value }),
    ))
}

fn parse_text(text: &str, path: &str) -> Result<SpecFile, SpecError> {
    serde_json::from_str(text).map_err(|e| SpecError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn read(path: &Path) -> Result<(String, String), SpecError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io { path: p.clone(), source })?;
    Ok((p, text))
}

/// Coefficient tensor of any order `≥ min_order`; canonical duplicates are rejected.
fn tensor_from_file(ctx: &Ctx, file: &SpecFile, min_order: usize) -> Result<SymCoeffTensor, SpecError> {
    let (n, m) = (file.dimension, file.order);
    if n < 1 {
        return Err(ctx.invalid("dimension", "must be positive"));
    }
    if m < min_order {
        return Err(ctx.invalid("order", format!("must be at least {min_order}")));
    }
    let mut tensor = SymCoeffTensor::zeros(n, m);
    let mut seen = BTreeSet::new();
    for (e, entry) in file.coefficients.iter().enumerate() {
        let field = format!("coefficients[{e}]");
        if entry.index.len() != m {
            return Err(ctx.invalid(
                format!("{field}.index"),
                format!("length {} but order is {m}", entry.index.len()),
            ));
        }
        let key = canonicalize_index(&entry.index, n).map_err(|err| ctx.invalid(format!("{field}.index"), err.to_string()))?;
        if !seen.insert(key.clone()) {
            return Err(ctx.invalid(format!("{field}.index"), format!("duplicate canonical index {:?}", key.indices())));
        }
        let poly = poly_from_terms(ctx, &field, n, &entry.poly)?;
        tensor.set(key.indices(), poly).map_err(|err| ctx.invalid(field, err.to_string()))?;
    }
    Ok(tensor)
}

fn spec_from_file(ctx: &Ctx, file: &SpecFile) -> Result<MetricSpec, SpecError> {
    let n = file.dimension;
    let tensor = tensor_from_file(ctx, file, 2)?;
    let chart_box: Vec<(f64, f64)> = match &file.chart_box {
        None => MetricSpec::unit_box(n),
        Some(b) => {
            if b.len() != n {
                return Err(ctx.invalid("chart_box", format!("{} intervals but dimension is {n}", b.len())));
            }
            b.iter().map(|[lo, hi]| (*lo, *hi)).collect()
        }
    };
    let scale = match &file.scale {
        None => None,
        Some(s) => Some(ConformalScale { base: poly_from_terms(ctx, "scale.base", n, &s.base)?, power: s.power }),
    };
    MetricSpec::with_scale(tensor, scale, chart_box).map_err(|err| ctx.invalid("spec", err.to_string()))
}

pub fn parse_spec_str(text: &str, path: &str) -> Result<MetricSpec, SpecError> {
    spec_from_file(&Ctx { path }, &parse_text(text, path)?)
}

pub fn parse_spec(path: &Path) -> Result<MetricSpec, SpecError> {
    let (p, text) = read(path)?;
    parse_spec_str(&text, &p)
}

/// A bare coefficient tensor in the spec schema; order 1 is allowed.
pub fn parse_tensor(path: &Path) -> Result<SymCoeffTensor, SpecError> {
    let (p, text) = read(path)?;
    let ctx = Ctx { path: &p };
    let file = parse_text(&text, &p)?;
    if file.scale.is_some() {
        return Err(ctx.invalid("scale", "not supported for a bare tensor"));
    }
    tensor_from_file(&ctx, &file, 1)
}

fn terms_of(p: &PolyScalar) -> Vec<Term> {
    p.monomials().map(|m| Term { exponents: m.exponents, value: m.coefficient }).collect()
}

fn entries_of(t: &SymCoeffTensor) -> Vec<CoefficientEntry> {
    t.entries()
        .map(|(k, p)| CoefficientEntry { index: k.indices().iter().map(|&i| i as i64).collect(), poly: terms_of(p) })
        .collect()
}

pub fn tensor_to_file(t: &SymCoeffTensor) -> SpecFile {
    SpecFile { dimension: t.dim(), order: t.degree(), coefficients: entries_of(t), chart_box: None, scale: None }
}

pub fn spec_to_file(spec: &MetricSpec) -> SpecFile {
    SpecFile {
        dimension: spec.dimension(),
        order: spec.order(),
        coefficients: entries_of(spec.coefficients()),
        chart_box: Some(spec.chart_box().iter().map(|&(lo, hi)| [lo, hi]).collect()),
        scale: spec.scale().map(|s| ScaleEntry { base: terms_of(&s.base), power: s.power }),
    }
}

/// Canonical pretty JSON for a spec; identical specs give identical text.
pub fn spec_to_json(spec: &MetricSpec) -> String {
    serde_json::to_string_pretty(&spec_to_file(spec)).expect("spec files serialize") + "\n"
}

pub fn write_spec(spec: &MetricSpec, path: &Path) -> Result<(), SpecError> {
    std::fs::write(path, spec_to_json(spec))
        .map_err(|source| SpecError::Io { path: path.display().to_string(), source })
}
