//! Independent reference implementations for cross-validation.
//!
//! Nothing here calls into `connection` or into the transvection-based jet:
//! `T` is rebuilt by brute force over all `n^m` index tuples and every
//! derivative is a central finite difference.

use ndarray::{Array1, Array2, Array3, ArrayD, IxDyn};

use crate::error::{FinslerError, Result};
use crate::linalg::{self, CONDITION_CAP};
use crate::polyfield::{PolyScalar, SymCoeffTensor};
use crate::spec::MetricSpec;

/// Central-difference stencil policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdScheme {
    /// Combine steps `h` and `h/2` to cancel the `h²` error term.
    pub richardson: bool,
}

impl FdScheme {
    /// Step for a derivative of the given order at coordinate value `v`:
    /// `eps^(1/3)(1+|v|)` for first, `eps^(1/4)(1+|v|)` for second derivatives.
    pub fn step(&self, order: usize, v: f64) -> f64 {
        let base = if order <= 1 { f64::EPSILON.cbrt() } else { f64::EPSILON.powf(0.25) };
        base * (1.0 + v.abs())
    }
}

type VecFn<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;

fn call(f: &VecFn, y: &[f64]) -> Result<Vec<f64>> {
    f(y).map_err(|e| FinslerError::StencilFailure(format!("at {y:?}: {e}")))
}

fn shifted(y: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut z = y.to_vec();
    for &(i, d) in moves {
        z[i] += d;
    }
    z
}

fn first_raw(f: &VecFn, y: &[f64], steps: &[f64]) -> Result<ArrayD<f64>> {
    let n = y.len();
    let mut out: Option<ArrayD<f64>> = None;
    for j in 0..n {
        let h = steps[j];
        let fp = call(f, &shifted(y, &[(j, h)]))?;
        let fm = call(f, &shifted(y, &[(j, -h)]))?;
        let out = out.get_or_insert_with(|| ArrayD::zeros(IxDyn(&[fp.len(), n])));
        for (i, (a, b)) in fp.iter().zip(&fm).enumerate() {
            out[[i, j].as_slice()] = (a - b) / (2.0 * h);
        }
    }
    Ok(out.unwrap_or_else(|| ArrayD::zeros(IxDyn(&[0, 0]))))
}

fn second_raw(f: &VecFn, y: &[f64], steps: &[f64]) -> Result<ArrayD<f64>> {
    let n = y.len();
    let f0 = call(f, y)?;
    let mut out = ArrayD::zeros(IxDyn(&[f0.len(), n, n]));
    for j in 0..n {
        for k in j..n {
            let (hj, hk) = (steps[j], steps[k]);
            let vals: Vec<f64> = if j == k {
                let fp = call(f, &shifted(y, &[(j, hj)]))?;
                let fm = call(f, &shifted(y, &[(j, -hj)]))?;
                (0..f0.len()).map(|i| (fp[i] - 2.0 * f0[i] + fm[i]) / (hj * hj)).collect()
            } else {
                let fpp = call(f, &shifted(y, &[(j, hj), (k, hk)]))?;
                let fpm = call(f, &shifted(y, &[(j, hj), (k, -hk)]))?;
                let fmp = call(f, &shifted(y, &[(j, -hj), (k, hk)]))?;
                let fmm = call(f, &shifted(y, &[(j, -hj), (k, -hk)]))?;
                (0..f0.len()).map(|i| (fpp[i] - fpm[i] - fmp[i] + fmm[i]) / (4.0 * hj * hk)).collect()
            };
            for (i, v) in vals.into_iter().enumerate() {
                out[[i, j, k].as_slice()] = v;
                out[[i, k, j].as_slice()] = v;
            }
        }
    }
    Ok(out)
}

/// Central-difference derivative of a vector function of `y`.
///
/// The result has shape `[len(f), n]` for `order = 1` and `[len(f), n, n]` for `order = 2`.
pub fn fd_derivative_with(scheme: FdScheme, f: &VecFn, y: &[f64], order: usize) -> Result<ArrayD<f64>> {
    if !(1..=2).contains(&order) {
        return Err(FinslerError::StencilFailure(format!("unsupported derivative order {order}")));
    }
    let steps: Vec<f64> = y.iter().map(|v| scheme.step(order, *v)).collect();
    let raw = |s: &[f64]| if order == 1 { first_raw(f, y, s) } else { second_raw(f, y, s) };
    let d = raw(&steps)?;
    if !scheme.richardson {
        return Ok(d);
    }
    let half: Vec<f64> = steps.iter().map(|h| h / 2.0).collect();
    let d2 = raw(&half)?;
    Ok((d2 * 4.0 - d) / 3.0)
}

pub fn fd_derivative(f: &VecFn, y: &[f64], order: usize) -> Result<ArrayD<f64>> {
    fd_derivative_with(FdScheme::default(), f, y, order)
}

/// First-order `fd_derivative` as a Jacobian `J[i, j] = ∂f_i/∂y^j`.
pub fn fd_jacobian(f: &VecFn, y: &[f64]) -> Result<Array2<f64>> {
    Ok(fd_derivative(f, y, 1)?.into_dimensionality().expect("rank 2"))
}

/// `T(x, y)` summed over every ordered index tuple.
struct BruteT {
    n: usize,
    m: usize,
    tuples: Vec<(Vec<usize>, PolyScalar)>,
    scale: Option<(PolyScalar, i32)>,
}

impl BruteT {
    fn new(spec: &MetricSpec) -> Result<Self> {
        let (n, m) = (spec.dimension(), spec.order());
        let mut tuples = Vec::new();
        let mut idx = vec![0usize; m];
        loop {
            let c = spec.coefficients().get(&idx)?;
            if !c.is_zero() {
                tuples.push((idx.clone(), c));
            }
            let mut pos = m;
            loop {
                if pos == 0 {
                    let scale = spec.scale().map(|s| (s.base.clone(), s.power));
                    return Ok(Self { n, m, tuples, scale });
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.n);
        let raw: f64 = self
            .tuples
            .iter()
            .map(|(idx, c)| c.eval(x) * idx.iter().map(|&i| y[i]).product::<f64>())
            .sum();
        debug_assert!(self.m >= 2);
        match &self.scale {
            Some((base, power)) => base.eval(x).powi(*power) * raw,
            None => raw,
        }
    }
}

/// Reference spray from the Euler–Lagrange equations of `T`:
/// `2 T_ij G^j = y^k ∂²T/∂x^k∂y^i − ∂T/∂x^i`, all derivatives by finite differences.
pub fn fd_spray(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array1<f64>> {
    let n = spec.dimension();
    let brute = BruteT::new(spec)?;
    let z: Vec<f64> = x.iter().chain(y).copied().collect();
    let t = |z: &[f64]| Ok(vec![brute.eval(&z[..n], &z[n..])]);
    let grad = fd_derivative(&t, &z, 1)?;
    let hess = fd_derivative(&t, &z, 2)?;
    let t_yy = Array2::from_shape_fn((n, n), |(i, j)| hess[[0, n + i, n + j].as_slice()]);
    let (inv, cond) = linalg::inverse_with_condition(&t_yy, CONDITION_CAP);
    let inv = inv.ok_or(FinslerError::DegenerateFlagMetric { cond })?;
    let rhs = Array1::from_shape_fn(n, |i| {
        let mixed: f64 = (0..n).map(|k| hess[[0, n + i, k].as_slice()] * y[k]).sum();
        mixed - grad[[0, i].as_slice()]
    });
    Ok(inv.dot(&rhs) * 0.5)
}

/// Levi-Civita symbols `Γ^i_jk` of a quadratic coefficient tensor, indexed `[i, j, k]`.
pub fn levi_civita(metric: &SymCoeffTensor, x: &[f64]) -> Result<Array3<f64>> {
    if metric.degree() != 2 {
        return Err(FinslerError::DimensionMismatch { what: "metric degree", expected: 2, found: metric.degree() });
    }
    let n = metric.dim();
    let a = Array2::from_shape_fn((n, n), |(i, j)| metric.get(&[i, j]).map(|p| p.eval(x)).unwrap_or(0.0));
    let (inv, _) = linalg::inverse_with_condition(&a, CONDITION_CAP);
    let inv = inv.ok_or(FinslerError::DegenerateMetric)?;
    // da[k][[i, j]] = ∂a_ij/∂x^k
    let mut da = Vec::with_capacity(n);
    for k in 0..n {
        let mut d = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                d[[i, j]] = metric.get(&[i, j])?.partial(k).eval(x);
            }
        }
        da.push(d);
    }
    Ok(Array3::from_shape_fn((n, n, n), |(i, j, k)| {
        0.5 * (0..n).map(|p| inv[[i, p]] * (da[k][[p, j]] + da[j][[p, k]] - da[p][[j, k]])).sum::<f64>()
    }))
}
