//! Problem instances: an m-th root metric given by its symmetric coefficient tensor.

use crate::error::{FinslerError, Result};
use crate::polyfield::{PolyScalar, SymCoeffTensor, SymNumTensor};

/// Common factor `base(x)^power` multiplying every coefficient.
///
/// Lets rational metrics such as the Beltrami–Klein model be written with
/// polynomial numerators over a shared denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalScale {
    pub base: PolyScalar,
    pub power: i32,
}

impl ConformalScale {
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let b = self.base.eval(x);
        if self.power < 0 && b == 0.0 {
            return Err(FinslerError::SingularScale);
        }
        let value = b.powi(self.power);
        let outer = if self.power == 0 { 0.0 } else { f64::from(self.power) * b.powi(self.power - 1) };
        let grad = (0..x.len()).map(|k| outer * self.base.partial(k).eval(x)).collect();
        Ok((value, grad))
    }
}

/// Dimension `n`, root order `m`, coefficient field `a_{i1..im}(x)` and the chart box.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    coefficients: SymCoeffTensor,
    scale: Option<ConformalScale>,
    chart_box: Vec<(f64, f64)>,
    partials: Vec<SymCoeffTensor>,
}

impl MetricSpec {
    pub fn new(coefficients: SymCoeffTensor, chart_box: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_scale(coefficients, None, chart_box)
    }

    pub fn with_scale(
        coefficients: SymCoeffTensor,
        scale: Option<ConformalScale>,
        chart_box: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let n = coefficients.dim();
        let m = coefficients.degree();
        if n < 2 {
            return Err(FinslerError::InvalidSpec(format!("dimension must be at least 2, got {n}")));
        }
        if m < 2 {
            return Err(FinslerError::InvalidSpec(format!("order must be at least 2, got {m}")));
        }
        check_tensor_vars(&coefficients)?;
        if let Some(s) = &scale {
            check_poly_vars(&s.base, n)?;
        }
        if chart_box.len() != n {
            return Err(FinslerError::DimensionMismatch {
                what: "chart box axes",
                expected: n,
                found: chart_box.len(),
            });
        }
        for (k, &(lo, hi)) in chart_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FinslerError::InvalidSpec(format!("chart box axis {k}: [{lo}, {hi}] is empty")));
            }
        }
        let partials = (0..n).map(|k| coefficients.partial_x(k)).collect::<Result<Vec<_>>>()?;
        Ok(Self { coefficients, scale, chart_box, partials })
    }

    /// Default chart box `[-1, 1]^n`.
    pub fn unit_box(n: usize) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); n]
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn order(&self) -> usize {
        self.coefficients.degree()
    }

    pub fn coefficients(&self) -> &SymCoeffTensor {
        &self.coefficients
    }

    pub fn scale(&self) -> Option<&ConformalScale> {
        self.scale.as_ref()
    }

    pub fn chart_box(&self) -> &[(f64, f64)] {
        &self.chart_box
    }

    pub fn with_chart_box(mut self, chart_box: Vec<(f64, f64)>) -> Result<Self> {
        if chart_box.len() != self.dimension() {
            return Err(FinslerError::DimensionMismatch {
                what: "chart box axes",
                expected: self.dimension(),
                found: chart_box.len(),
            });
        }
        self.chart_box = chart_box;
        Ok(self)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.chart_box).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(FinslerError::DimensionMismatch {
                what: "point length",
                expected: self.dimension(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `a_{i1..im}(x)` including the conformal scale.
    pub fn coeffs_at(&self, x: &[f64]) -> Result<SymNumTensor> {
        self.check_point(x)?;
        let raw = self.coefficients.eval_at(x)?;
        match &self.scale {
            None => Ok(raw),
            Some(s) => {
                let (v, _) = s.value_and_gradient(x)?;
                Ok(raw.scaled(v))
            }
        }
    }

    /// `∂a/∂x^k` at `x` for every axis `k`.
    pub fn coeff_partials_at(&self, x: &[f64]) -> Result<Vec<SymNumTensor>> {
        self.check_point(x)?;
        let raw: Vec<SymNumTensor> = self.partials.iter().map(|p| p.eval_at(x)).collect::<Result<_>>()?;
        match &self.scale {
            None => Ok(raw),
            Some(s) => {
                let (v, grad) = s.value_and_gradient(x)?;
                let base = self.coefficients.eval_at(x)?;
                raw.iter()
                    .zip(grad)
                    .map(|(d, g)| d.scaled(v).plus(&base.scaled(g)))
                    .collect()
            }
        }
    }

    /// True when every coefficient is constant in this chart.
    pub fn has_constant_coefficients(&self) -> bool {
        let scale_const = self.scale.as_ref().is_none_or(|s| s.power == 0 || s.base.is_constant());
        scale_const && self.coefficients.is_constant()
    }

    /// The same Finsler function written with order `2m` and coefficients `sym(a ⊗ a)`.
    pub fn squared(&self) -> Result<MetricSpec> {
        let coeffs = self.coefficients.sym_product(&self.coefficients)?;
        let scale = self.scale.as_ref().map(|s| ConformalScale { base: s.base.clone(), power: 2 * s.power });
        MetricSpec::with_scale(coeffs, scale, self.chart_box.clone())
    }
}

fn check_poly_vars(p: &PolyScalar, n: usize) -> Result<()> {
    match p.nvars() {
        Some(k) if k != n => Err(FinslerError::DimensionMismatch { what: "monomial exponents", expected: n, found: k }),
        _ => {
            if p.monomials().any(|mono| mono.exponents.len() != n) {
                return Err(FinslerError::InvalidSpec("inconsistent exponent lengths".into()));
            }
            Ok(())
        }
    }
}

pub(crate) fn check_tensor_vars(t: &SymCoeffTensor) -> Result<()> {
    t.entries().try_for_each(|(_, p)| check_poly_vars(p, t.dim()))
}
