//! Point evaluation of `T = F^m`, the polynomial flag metric `h_ij` and their
//! y-derivatives, including derivatives of `h^{ij}` up to third order.
//!
//! Every y-derivative of `T` comes from an exact transvection of `a(x)`:
//! `T_{i1..ik} = m!/(m-k)! · a_{i1..ik 0..0}`. The flag metric is the
//! `(m-2)`-fold transvection `h_ij = a_{ij0..0}`, so
//! `h_{ij·k} = (m-2) a_{ijk0..0}` and so on.

use ndarray::{s, Array1, Array2, Array3, Array4, Array5, Axis, Dimension, Ix1, Ix2, Ix3, Ix4, Ix5};
use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::linalg::{self, CONDITION_CAP};
use crate::polyfield::{factorial, SymNumTensor};
use crate::sampling::{Sample, Sampler};
use crate::spec::MetricSpec;

/// Highest derivative order of `h^{ij}` to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetDepth {
    /// `h^{ij}` only: enough for the spray.
    Spray,
    /// First y-derivative of `h^{ij}`: nonlinear connection.
    Nonlinear,
    /// Second derivative: Berwald coefficients.
    Berwald,
    /// Third derivative: hv-curvature.
    Curvature,
}

/// Everything the connection layer needs from the metric at one `(x, y)`.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub order: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `a(x)` with the conformal scale applied.
    pub coeffs: SymNumTensor,
    pub t: f64,
    pub f: Option<f64>,
    pub t_i: Array1<f64>,
    pub t_ij: Array2<f64>,
    pub t_ijk: Array3<f64>,
    pub t_ijkl: Array4<f64>,
    pub h: Array2<f64>,
    pub h_inv: Array2<f64>,
    /// `h_{ij·k}`
    pub dh: Array3<f64>,
    /// `h_{ij·kl}`
    pub ddh: Array4<f64>,
    /// `h_{ij·klm}`
    pub dddh: Array5<f64>,
    /// `∂h^{ij}/∂y^k`, indexed `[i, j, k]`.
    pub dinv1: Option<Array3<f64>>,
    pub dinv2: Option<Array4<f64>>,
    pub dinv3: Option<Array5<f64>>,
    pub l: Option<Array1<f64>>,
    pub cond_h: f64,
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// `F`, or `NonPositiveT` where it is undefined.
    pub fn f(&self) -> Result<f64> {
        self.f.ok_or(FinslerError::NonPositiveT { t: self.t, order: self.order })
    }

    pub fn l(&self) -> Result<&Array1<f64>> {
        self.l.as_ref().ok_or(FinslerError::NonPositiveT { t: self.t, order: self.order })
    }

    /// Shimada's homogenized metric `a_ij = h_ij / F^{m-2}`.
    pub fn homogenized_metric(&self) -> Result<Array2<f64>> {
        let f = self.f()?;
        Ok(&self.h / f.powi(self.order as i32 - 2))
    }

    pub fn dinv1(&self) -> &Array3<f64> {
        self.dinv1.as_ref().expect("jet computed without first inverse derivative")
    }

    pub fn dinv2(&self) -> &Array4<f64> {
        self.dinv2.as_ref().expect("jet computed without second inverse derivative")
    }

    pub fn dinv3(&self) -> &Array5<f64> {
        self.dinv3.as_ref().expect("jet computed without third inverse derivative")
    }
}

/// Real, 1-homogeneous root: signed root for odd `m`, defined only on `T > 0` for even `m`.
pub fn finsler_from_t(t: f64, m: usize) -> Option<f64> {
    if m % 2 == 1 {
        (t != 0.0).then(|| t.signum() * t.abs().powf(1.0 / m as f64))
    } else {
        (t > 0.0).then(|| t.powf(1.0 / m as f64))
    }
}

/// `(T, F)` at one point without any derivative work.
pub fn fundamental(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<(f64, Option<f64>)> {
    let t = spec.coeffs_at(x)?.contract_all(y)?;
    Ok((t, finsler_from_t(t, spec.order())))
}

pub(crate) fn dense<D: Dimension>(t: &SymNumTensor) -> Array<D> {
    t.to_dense().into_dimensionality::<D>().expect("tensor rank matches requested dimensionality")
}

type Array<D> = ndarray::Array<f64, D>;

/// `a_{i1..ik 0..0}` for `k = 0..=5`; orders above `m` are zero.
fn partial_transvections(a: &SymNumTensor, y: &[f64]) -> Result<Vec<SymNumTensor>> {
    let m = a.degree();
    (0..=5)
        .map(|k| if k <= m { a.transvect(y, m - k) } else { Ok(SymNumTensor::zeros(a.dim(), k)) })
        .collect()
}

fn falling(m: usize, k: usize) -> f64 {
    if k > m {
        0.0
    } else {
        factorial(m) / factorial(m - k)
    }
}

/// Full jet, including third derivatives of `h^{ij}`.
pub fn metric_jet(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<MetricJet> {
    metric_jet_to(spec, x, y, JetDepth::Curvature)
}

pub fn metric_jet_to(spec: &MetricSpec, x: &[f64], y: &[f64], depth: JetDepth) -> Result<MetricJet> {
    let n = spec.dimension();
    let m = spec.order();
    if y.len() != n {
        return Err(FinslerError::DimensionMismatch { what: "direction length", expected: n, found: y.len() });
    }
    if y.iter().all(|&v| v == 0.0) {
        return Err(FinslerError::InvalidSpec("direction y must be nonzero".into()));
    }
    let coeffs = spec.coeffs_at(x)?;
    let p = partial_transvections(&coeffs, y)?;

    let t = p[0].get(&[])?;
    let t_i = dense::<Ix1>(&p[1]) * falling(m, 1);
    let t_ij = dense::<Ix2>(&p[2]) * falling(m, 2);
    let t_ijk = dense::<Ix3>(&p[3]) * falling(m, 3);
    let t_ijkl = dense::<Ix4>(&p[4]) * falling(m, 4);

    let mm1 = (m * (m - 1)) as f64;
    let h = &t_ij / mm1;
    let dh = &t_ijk / mm1;
    let ddh = &t_ijkl / mm1;
    let dddh = dense::<Ix5>(&p[5]) * (falling(m, 5) / mm1);

    let (inv, cond_h) = linalg::inverse_with_condition(&h, CONDITION_CAP);
    let h_inv = inv.ok_or(FinslerError::DegenerateFlagMetric { cond: cond_h })?;

    let f = finsler_from_t(t, m);
    let l = f.map(|f| &t_i / (m as f64 * f.powi(m as i32 - 1)));

    let mut jet = MetricJet {
        order: m,
        x: x.to_vec(),
        y: y.to_vec(),
        coeffs,
        t,
        f,
        t_i,
        t_ij,
        t_ijk,
        t_ijkl,
        h,
        h_inv,
        dh,
        ddh,
        dddh,
        dinv1: None,
        dinv2: None,
        dinv3: None,
        l,
        cond_h,
    };
    if depth >= JetDepth::Nonlinear {
        inverse_derivatives(&mut jet, depth);
    }
    Ok(jet)
}

/// Derivatives of `H = h^{-1}` from `dH = -H (dh) H` and its Leibniz extensions.
///
/// With `M_k = H h_{·k}`, `M_kl = H h_{·kl}` and `M_klm = H h_{·klm}`:
/// `∂_k H = -M_k H`, `∂_kl H = (M_l M_k + M_k M_l - M_kl) H`, and the third
/// derivative differentiates that once more using `∂_m M_k = M_km - M_m M_k`.
fn inverse_derivatives(jet: &mut MetricJet, depth: JetDepth) {
    let n = jet.dim();
    let hinv = &jet.h_inv;
    let m1: Vec<Array2<f64>> = (0..n).map(|k| hinv.dot(&jet.dh.index_axis(Axis(2), k))).collect();

    let mut d1 = Array3::zeros((n, n, n));
    for k in 0..n {
        d1.slice_mut(s![.., .., k]).assign(&(-m1[k].dot(hinv)));
    }
    jet.dinv1 = Some(d1);
    if depth < JetDepth::Berwald {
        return;
    }

    let m2 = |k: usize, l: usize| hinv.dot(&jet.ddh.slice(s![.., .., k, l]));
    let m2s: Vec<Vec<Array2<f64>>> = (0..n).map(|k| (0..n).map(|l| m2(k, l)).collect()).collect();
    let mut d2 = Array4::zeros((n, n, n, n));
    for k in 0..n {
        for l in 0..n {
            let x = m1[l].dot(&m1[k]) + m1[k].dot(&m1[l]) - &m2s[k][l];
            d2.slice_mut(s![.., .., k, l]).assign(&x.dot(hinv));
        }
    }
    jet.dinv2 = Some(d2);
    if depth < JetDepth::Curvature {
        return;
    }

    let mut d3 = Array5::zeros((n, n, n, n, n));
    for k in 0..n {
        for l in 0..n {
            for m in 0..n {
                let (mk, ml, mm) = (&m1[k], &m1[l], &m1[m]);
                let (mkl, mkm, mlm) = (&m2s[k][l], &m2s[k][m], &m2s[l][m]);
                let mklm = hinv.dot(&jet.dddh.slice(s![.., .., k, l, m]));
                let x = -mm.dot(ml).dot(mk) + mlm.dot(mk) - ml.dot(mm).dot(mk) + ml.dot(mkm)
                    - ml.dot(mk).dot(mm)
                    - mm.dot(mk).dot(ml)
                    + mkm.dot(ml)
                    - mk.dot(mm).dot(ml)
                    + mk.dot(mlm)
                    - mk.dot(ml).dot(mm)
                    + mm.dot(mkl)
                    - mklm
                    + mkl.dot(mm);
                d3.slice_mut(s![.., .., k, l, m]).assign(&x.dot(hinv));
            }
        }
    }
    jet.dinv3 = Some(d3);
}

/// The usual Finsler metric `g_ij = ½ ∂²F²/∂y^i∂y^j` and its inverse.
#[derive(Debug, Clone)]
pub struct UsualMetricJet {
    pub g: Array2<f64>,
    pub g_inv: Array2<f64>,
    pub cond_g: f64,
}

/// Closed form `g_ij = ½[(2/m)(2/m-1) T^{2/m-2} T_i T_j + (2/m) T^{2/m-1} T_ij]`.
pub fn usual_metric(jet: &MetricJet) -> Result<UsualMetricJet> {
    if jet.t <= 0.0 {
        return Err(FinslerError::NonPositiveT { t: jet.t, order: jet.order });
    }
    let q = 2.0 / jet.order as f64;
    let n = jet.dim();
    let t = jet.t;
    let g = Array2::from_shape_fn((n, n), |(i, j)| {
        0.5 * (q * (q - 1.0) * t.powf(q - 2.0) * jet.t_i[i] * jet.t_i[j] + q * t.powf(q - 1.0) * jet.t_ij[[i, j]])
    });
    let (inv, cond_g) = linalg::inverse_with_condition(&g, CONDITION_CAP);
    let g_inv = inv.ok_or(FinslerError::DegenerateUsualMetric { cond: cond_g })?;
    Ok(UsualMetricJet { g, g_inv, cond_g })
}

/// Outcome of a nondegeneracy sweep over sampled points.
#[derive(Debug, Clone, Serialize)]
pub struct NondegeneracyReport {
    pub samples: usize,
    pub positive_t_samples: usize,
    pub min_abs_det_h: f64,
    /// Smallest eigenvalue of `g` over samples with `T > 0`.
    pub min_eigenvalue_g: Option<f64>,
    /// Largest relative mismatch of `det h = λ^{n-1}(λ+μ) det g`.
    pub det_relation_residual: f64,
    pub nondegenerate: bool,
    pub positive_definite: bool,
    pub worst_point: Option<Sample>,
}

/// Sweep `det h`, the eigenvalues of `g`, and the determinant relation between them.
pub fn check_nondegenerate(spec: &MetricSpec, sampler: &Sampler) -> Result<NondegeneracyReport> {
    let n = spec.dimension();
    let m = spec.order();
    let mut report = NondegeneracyReport {
        samples: 0,
        positive_t_samples: 0,
        min_abs_det_h: f64::INFINITY,
        min_eigenvalue_g: None,
        det_relation_residual: 0.0,
        nondegenerate: true,
        positive_definite: true,
        worst_point: None,
    };
    for sample in sampler.candidates() {
        let coeffs = spec.coeffs_at(&sample.x)?;
        let p = partial_transvections(&coeffs, &sample.y)?;
        let h: Array2<f64> = dense::<Ix2>(&p[2]);
        let det_h = linalg::determinant(&h);
        report.samples += 1;
        if det_h.abs() < report.min_abs_det_h {
            report.min_abs_det_h = det_h.abs();
            report.worst_point = Some(sample.clone());
        }
        if linalg::condition_estimate(&h) > CONDITION_CAP {
            report.nondegenerate = false;
        }
        let t = p[0].get(&[])?;
        if t <= 0.0 {
            if m.is_multiple_of(2) {
                report.positive_definite = false;
            }
            continue;
        }
        report.positive_t_samples += 1;
        let t_i = dense::<Ix1>(&p[1]) * falling(m, 1);
        let t_ij = dense::<Ix2>(&p[2]) * falling(m, 2);
        let q = 2.0 / m as f64;
        let g = Array2::from_shape_fn((n, n), |(i, j)| {
            0.5 * (q * (q - 1.0) * t.powf(q - 2.0) * t_i[i] * t_i[j] + q * t.powf(q - 1.0) * t_ij[[i, j]])
        });
        let ev = linalg::symmetric_eigenvalues(&g);
        let min_ev = ev[0];
        report.min_eigenvalue_g = Some(report.min_eigenvalue_g.map_or(min_ev, |v: f64| v.min(min_ev)));
        if min_ev <= 0.0 {
            report.positive_definite = false;
        }
        let f = t.powf(1.0 / m as f64);
        let lambda = f.powi(m as i32 - 2) / (m as f64 - 1.0);
        let mu = f.powi(m as i32 - 2) * (m as f64 - 2.0) / (m as f64 - 1.0);
        let rhs = lambda.powi(n as i32 - 1) * (lambda + mu) * linalg::determinant(&g);
        let denom = det_h.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        report.det_relation_residual = report.det_relation_residual.max((det_h - rhs).abs() / denom);
    }
    if report.positive_t_samples == 0 {
        report.positive_definite = false;
    }
    Ok(report)
}
