//! Generalized Christoffel symbols, spray, Kern nonlinear connection, Berwald
//! connection and hv-curvature, the canonical metrical horizontal coefficients
//! of `h`, horizontal covariant derivatives of `h`, and the Douglas tensor.
//!
//! Index layout: a tensor `X^i_{jk..}` is stored as an array indexed
//! `[i, j, k, ..]`.

use ndarray::{Array1, Array2, Array3, Array4, Ix1, Ix2, Ix3, Ix4};

use crate::error::{FinslerError, Result};
use crate::metric::{self, dense, JetDepth, MetricJet};
use crate::polyfield::{Coefficient, MultiIndex, SymCoeffTensor, SymNumTensor, SymTensor};
use crate::spec::MetricSpec;

/// Relative FD step for the y-derivative of the contracted Berwald curvature.
pub const DOUGLAS_FD_STEP: f64 = 1e-5;

/// `γ_{p j1..jm}` at one point: one symmetric degree-`m` tensor per `p`.
#[derive(Debug, Clone)]
pub struct GammaLower {
    per_index: Vec<SymNumTensor>,
}

impl GammaLower {
    pub fn order(&self) -> usize {
        self.per_index[0].degree()
    }

    pub fn dim(&self) -> usize {
        self.per_index.len()
    }

    /// `γ_{p j1..jm}` for any ordering of the `j`s.
    pub fn get(&self, p: usize, js: &[usize]) -> Result<f64> {
        self.per_index
            .get(p)
            .ok_or(FinslerError::IndexOutOfRange { index: p as i64, dimension: self.dim() })?
            .get(js)
    }

    pub fn component(&self, p: usize) -> &SymNumTensor {
        &self.per_index[p]
    }

    /// `γ_{p j1..jk 0..0}` stacked into a dense array of rank `k + 1`.
    fn transvected(&self, y: &[f64], free: usize) -> Result<ndarray::ArrayD<f64>> {
        let n = self.dim();
        let m = self.order();
        let mut shape = vec![n; free + 1];
        shape[0] = n;
        let mut out = ndarray::ArrayD::zeros(shape);
        if free > m {
            return Ok(out);
        }
        for (p, g) in self.per_index.iter().enumerate() {
            let t = g.transvect(y, m - free)?.to_dense();
            out.index_axis_mut(ndarray::Axis(0), p).assign(&t);
        }
        Ok(out)
    }
}

/// `γ_{pJ} = (Σ_cyclic ∂_{j1} a_{p j2..jm} − ∂_p a_J) / (m(m−1))` from the x-partials of `a`.
///
/// In the cyclic sum each axis `v` occurring `c_v` times in `J` contributes
/// `c_v · ∂_v a_{p ∪ J∖v}`.
pub fn gamma_from_partials<C: Coefficient>(partials: &[SymTensor<C>]) -> Result<Vec<SymTensor<C>>> {
    let n = partials.len();
    let m = partials.first().map(SymTensor::degree).ok_or(FinslerError::InvalidSpec("no partials".into()))?;
    let norm = 1.0 / (m * (m - 1)) as f64;
    let mut out = Vec::with_capacity(n);
    for p in 0..n {
        let mut g = SymTensor::<C>::zeros(n, m);
        for key in MultiIndex::all(n, m) {
            let counts = key.counts(n);
            let mut acc = partials[p].get(key.indices())?.scaled(-1.0);
            for (v, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let mut rest: Vec<usize> = key.indices().to_vec();
                let pos = rest.iter().position(|&i| i == v).expect("axis present");
                rest[pos] = p;
                acc = acc.plus(&partials[v].get(&rest)?.scaled(c as f64));
            }
            g.set(key.indices(), acc.scaled(norm))?;
        }
        out.push(g);
    }
    Ok(out)
}

/// Generalized Christoffel symbols of the first kind at `x`.
pub fn gamma_lower(spec: &MetricSpec, x: &[f64]) -> Result<GammaLower> {
    let partials = spec.coeff_partials_at(x)?;
    Ok(GammaLower { per_index: gamma_from_partials(&partials)? })
}

/// The same symbols as exact polynomials in `x` (coefficient tensor without a conformal scale).
pub fn gamma_lower_exact(coefficients: &SymCoeffTensor) -> Result<Vec<SymCoeffTensor>> {
    let partials: Vec<SymCoeffTensor> =
        (0..coefficients.dim()).map(|k| coefficients.partial_x(k)).collect::<Result<_>>()?;
    gamma_from_partials(&partials)
}

/// Which linear connection supplies the horizontal coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizontalConnection {
    /// `G^i_jk`
    Berwald,
    /// `L^i_jk` of the canonical metrical connection of `h`.
    Metrical,
}

/// All connection data at one `(x, y)`.
#[derive(Debug, Clone)]
pub struct PointConnection {
    pub jet: MetricJet,
    pub gamma: GammaLower,
    partials: Vec<SymNumTensor>,
    g0: Array1<f64>,
    g1: Array2<f64>,
    g2: Array3<f64>,
    g3: Array4<f64>,
}

fn max_abs<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

impl PointConnection {
    pub fn new(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Self> {
        Self::with_depth(spec, x, y, JetDepth::Curvature)
    }

    pub fn with_depth(spec: &MetricSpec, x: &[f64], y: &[f64], depth: JetDepth) -> Result<Self> {
        let jet = metric::metric_jet_to(spec, x, y, depth)?;
        let partials = spec.coeff_partials_at(x)?;
        let gamma = GammaLower { per_index: gamma_from_partials(&partials)? };
        let n = y.len();
        // Only the transvections the requested depth needs; the rest stay zero.
        let needed = match depth {
            JetDepth::Spray => 0,
            JetDepth::Nonlinear => 1,
            JetDepth::Berwald => 2,
            JetDepth::Curvature => 3,
        };
        let as_rank = |free: usize| -> Result<ndarray::ArrayD<f64>> {
            if free <= needed {
                gamma.transvected(y, free)
            } else {
                Ok(ndarray::ArrayD::zeros(vec![n; free + 1]))
            }
        };
        let g0 = as_rank(0)?.into_dimensionality::<Ix1>().expect("rank 1");
        let g1 = as_rank(1)?.into_dimensionality::<Ix2>().expect("rank 2");
        let g2 = as_rank(2)?.into_dimensionality::<Ix3>().expect("rank 3");
        let g3 = as_rank(3)?.into_dimensionality::<Ix4>().expect("rank 4");
        Ok(Self { jet, gamma, partials, g0, g1, g2, g3 })
    }

    fn n(&self) -> usize {
        self.jet.dim()
    }

    fn m(&self) -> f64 {
        self.jet.order as f64
    }

    pub fn y(&self) -> &[f64] {
        &self.jet.y
    }

    /// `γ_{p0..0}`
    pub fn gamma_lower_transvected(&self) -> &Array1<f64> {
        &self.g0
    }

    /// `γ^i_{0..0} = h^{ip} γ_{p0..0}`
    pub fn gamma_up_transvected(&self) -> Array1<f64> {
        self.jet.h_inv.dot(&self.g0)
    }

    /// `G^i = ½ γ^i_{0..0}`
    pub fn spray(&self) -> Array1<f64> {
        self.gamma_up_transvected() * 0.5
    }

    /// `N^i_j = ½(h^{is}_{·j} γ_{s0..0} + m h^{is} γ_{sj0..0})`
    pub fn nonlinear(&self) -> Array2<f64> {
        let n = self.n();
        let m = self.m();
        let d1 = self.jet.dinv1();
        let hg1 = self.jet.h_inv.dot(&self.g1);
        Array2::from_shape_fn((n, n), |(i, j)| {
            let a: f64 = (0..n).map(|s| d1[[i, s, j]] * self.g0[s]).sum();
            0.5 * (a + m * hg1[[i, j]])
        })
    }

    /// Berwald coefficients `G^i_jk`, the four-term formula.
    pub fn berwald(&self) -> Array3<f64> {
        let n = self.n();
        let m = self.m();
        let d1 = self.jet.dinv1();
        let d2 = self.jet.dinv2();
        let h = &self.jet.h_inv;
        Array3::from_shape_fn((n, n, n), |(i, j, k)| {
            let mut acc = 0.0;
            for s in 0..n {
                acc += d2[[i, s, j, k]] * self.g0[s]
                    + m * d1[[i, s, j]] * self.g1[[s, k]]
                    + m * d1[[i, s, k]] * self.g1[[s, j]]
                    + m * (m - 1.0) * h[[i, s]] * self.g2[[s, j, k]];
            }
            0.5 * acc
        })
    }

    /// hv-curvature `G^i_jkl` and the largest magnitude among its four term groups.
    pub fn hv_curvature_scaled(&self) -> (Array4<f64>, f64) {
        let n = self.n();
        let m = self.m();
        let d1 = self.jet.dinv1();
        let d2 = self.jet.dinv2();
        let d3 = self.jet.dinv3();
        let h = &self.jet.h_inv;
        let (g0, g1, g2, g3) = (&self.g0, &self.g1, &self.g2, &self.g3);
        let mut scale = 0.0f64;
        let mut out = Array4::zeros((n, n, n, n));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                        for s in 0..n {
                            a += d3[[i, s, j, k, l]] * g0[s];
                            b += d2[[i, s, j, k]] * g1[[s, l]] + d2[[i, s, k, l]] * g1[[s, j]] + d2[[i, s, l, j]] * g1[[s, k]];
                            c += d1[[i, s, j]] * g2[[s, k, l]] + d1[[i, s, k]] * g2[[s, l, j]] + d1[[i, s, l]] * g2[[s, j, k]];
                            d += h[[i, s]] * g3[[s, j, k, l]];
                        }
                        let (b, c, d) = (m * b, m * (m - 1.0) * c, m * (m - 1.0) * (m - 2.0) * d);
                        scale = scale.max(a.abs()).max(b.abs()).max(c.abs()).max(d.abs());
                        out[[i, j, k, l]] = 0.5 * (a + b + c + d);
                    }
                }
            }
        }
        (out, 0.5 * scale)
    }

    pub fn hv_curvature(&self) -> Array4<f64> {
        self.hv_curvature_scaled().0
    }

    /// `∂h_ij/∂x^k`, indexed `[i, j, k]`.
    pub fn h_dx(&self) -> Result<Array3<f64>> {
        let n = self.n();
        let m = self.jet.order;
        let mut out = Array3::zeros((n, n, n));
        for (k, d) in self.partials.iter().enumerate() {
            let t: Array2<f64> = dense::<Ix2>(&d.transvect(&self.jet.y, m - 2)?);
            out.slice_mut(ndarray::s![.., .., k]).assign(&t);
        }
        Ok(out)
    }

    /// `δh_ij/δx^k = ∂h_ij/∂x^k − N^r_k ∂h_ij/∂y^r`, indexed `[i, j, k]`.
    pub fn h_delta(&self) -> Result<Array3<f64>> {
        let n = self.n();
        let nl = self.nonlinear();
        let hdx = self.h_dx()?;
        Ok(Array3::from_shape_fn((n, n, n), |(i, j, k)| {
            hdx[[i, j, k]] - (0..n).map(|r| nl[[r, k]] * self.jet.dh[[i, j, r]]).sum::<f64>()
        }))
    }

    /// `L^i_jk = ½ h^{ih}(h_{hj;k} + h_{hk;j} − h_{jk;h})`
    pub fn metrical_horizontal(&self) -> Result<Array3<f64>> {
        let n = self.n();
        let dh = self.h_delta()?;
        let h = &self.jet.h_inv;
        Ok(Array3::from_shape_fn((n, n, n), |(i, j, k)| {
            0.5 * (0..n).map(|q| h[[i, q]] * (dh[[q, j, k]] + dh[[q, k, j]] - dh[[j, k, q]])).sum::<f64>()
        }))
    }

    /// `h_{ij|k} = δh_ij/δx^k − C^r_ik h_rj − C^r_jk h_ir` with the chosen coefficients `C`,
    /// and the largest magnitude among the three terms.
    pub fn cov_deriv_h_scaled(&self, which: HorizontalConnection) -> Result<(Array3<f64>, f64)> {
        let n = self.n();
        let coeffs = match which {
            HorizontalConnection::Berwald => self.berwald(),
            HorizontalConnection::Metrical => self.metrical_horizontal()?,
        };
        let dh = self.h_delta()?;
        let h = &self.jet.h;
        let mut scale = 0.0f64;
        let out = Array3::from_shape_fn((n, n, n), |(i, j, k)| {
            let a: f64 = (0..n).map(|r| coeffs[[r, i, k]] * h[[r, j]]).sum();
            let b: f64 = (0..n).map(|r| coeffs[[r, j, k]] * h[[i, r]]).sum();
            scale = scale.max(dh[[i, j, k]].abs()).max(a.abs()).max(b.abs());
            dh[[i, j, k]] - a - b
        });
        Ok((out, scale))
    }

    pub fn cov_deriv_h(&self, which: HorizontalConnection) -> Result<Array3<f64>> {
        Ok(self.cov_deriv_h_scaled(which)?.0)
    }

    /// `y^i_{|k} = −N^i_k + C^i_{rk} y^r`, which vanishes for both connections.
    pub fn y_cov_deriv(&self, which: HorizontalConnection) -> Result<Array2<f64>> {
        let n = self.n();
        let coeffs = match which {
            HorizontalConnection::Berwald => self.berwald(),
            HorizontalConnection::Metrical => self.metrical_horizontal()?,
        };
        let nl = self.nonlinear();
        let y = self.y();
        Ok(Array2::from_shape_fn((n, n), |(i, k)| {
            -nl[[i, k]] + (0..n).map(|r| coeffs[[i, r, k]] * y[r]).sum::<f64>()
        }))
    }

    /// x-partials of `a` at the base point.
    pub fn coeff_partials(&self) -> &[SymNumTensor] {
        &self.partials
    }
}

/// Spray `G^i`; the geodesic acceleration is `−2G^i`.
pub fn spray(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array1<f64>> {
    Ok(PointConnection::with_depth(spec, x, y, JetDepth::Spray)?.spray())
}

pub fn nonlinear_connection(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array2<f64>> {
    Ok(PointConnection::with_depth(spec, x, y, JetDepth::Nonlinear)?.nonlinear())
}

pub fn berwald_coefficients(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array3<f64>> {
    Ok(PointConnection::with_depth(spec, x, y, JetDepth::Berwald)?.berwald())
}

pub fn hv_curvature(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array4<f64>> {
    Ok(PointConnection::new(spec, x, y)?.hv_curvature())
}

pub fn metrical_horizontal(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array3<f64>> {
    PointConnection::with_depth(spec, x, y, JetDepth::Nonlinear)?.metrical_horizontal()
}

pub fn cov_deriv_h(spec: &MetricSpec, x: &[f64], y: &[f64], which: HorizontalConnection) -> Result<Array3<f64>> {
    PointConnection::with_depth(spec, x, y, JetDepth::Berwald)?.cov_deriv_h(which)
}

/// A 1-homogeneous scalar `p(x, y)` defining the projective change `Ḡ^i = G^i + p y^i`.
pub trait ProjectiveFactor: Sync {
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    /// `∂p/∂y^j`
    fn gradient(&self, x: &[f64], y: &[f64]) -> Array1<f64>;
    /// `∂²p/∂y^j∂y^k`
    fn hessian(&self, x: &[f64], y: &[f64]) -> Array2<f64>;
    /// `∂³p/∂y^j∂y^k∂y^l`
    fn third(&self, x: &[f64], y: &[f64]) -> Array3<f64>;

    /// `∂³(p y^i)/∂y^j∂y^k∂y^l`, indexed `[i, j, k, l]`.
    fn hv_term(&self, x: &[f64], y: &[f64]) -> Array4<f64> {
        let n = y.len();
        let p2 = self.hessian(x, y);
        let p3 = self.third(x, y);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
            p3[[j, k, l]] * y[i] + p2[[j, k]] * d(i, l) + p2[[k, l]] * d(i, j) + p2[[l, j]] * d(i, k)
        })
    }
}

/// `p = b_r(x) y^r` with polynomial `b_r`.
#[derive(Debug, Clone)]
pub struct LinearFactor {
    pub b: Vec<crate::polyfield::PolyScalar>,
}

impl ProjectiveFactor for LinearFactor {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.b.iter().zip(y).map(|(b, v)| b.eval(x) * v).sum()
    }
    fn gradient(&self, x: &[f64], _y: &[f64]) -> Array1<f64> {
        self.b.iter().map(|b| b.eval(x)).collect()
    }
    fn hessian(&self, _x: &[f64], y: &[f64]) -> Array2<f64> {
        Array2::zeros((y.len(), y.len()))
    }
    fn third(&self, _x: &[f64], y: &[f64]) -> Array3<f64> {
        let n = y.len();
        Array3::zeros((n, n, n))
    }
}

/// `p = sqrt(c_rs y^r y^s)` for a constant positive-definite `c`.
#[derive(Debug, Clone)]
pub struct QuadraticRootFactor {
    pub c: Array2<f64>,
}

impl QuadraticRootFactor {
    fn parts(&self, y: &[f64]) -> (f64, Array1<f64>) {
        let y = Array1::from(y.to_vec());
        let cy = self.c.dot(&y);
        (y.dot(&cy).sqrt(), cy)
    }
}

impl ProjectiveFactor for QuadraticRootFactor {
    fn value(&self, _x: &[f64], y: &[f64]) -> f64 {
        self.parts(y).0
    }
    fn gradient(&self, _x: &[f64], y: &[f64]) -> Array1<f64> {
        let (p, cy) = self.parts(y);
        cy / p
    }
    fn hessian(&self, _x: &[f64], y: &[f64]) -> Array2<f64> {
        let (p, cy) = self.parts(y);
        let n = y.len();
        Array2::from_shape_fn((n, n), |(j, k)| self.c[[j, k]] / p - cy[j] * cy[k] / p.powi(3))
    }
    fn third(&self, _x: &[f64], y: &[f64]) -> Array3<f64> {
        let (p, cy) = self.parts(y);
        let n = y.len();
        let c = &self.c;
        Array3::from_shape_fn((n, n, n), |(j, k, l)| {
            -(c[[j, k]] * cy[l] + c[[j, l]] * cy[k] + c[[k, l]] * cy[j]) / p.powi(3)
                + 3.0 * cy[j] * cy[k] * cy[l] / p.powi(5)
        })
    }
}

/// Spray after the projective change `Ḡ^i = G^i + p y^i`.
pub fn spray_with_change(spec: &MetricSpec, x: &[f64], y: &[f64], change: &dyn ProjectiveFactor) -> Result<Array1<f64>> {
    let p = change.value(x, y);
    Ok(spray(spec, x, y)? + &(Array1::from(y.to_vec()) * p))
}

fn contracted_trace(hv: &Array4<f64>) -> Array2<f64> {
    let n = hv.shape()[0];
    Array2::from_shape_fn((n, n), |(j, k)| (0..n).map(|i| hv[[i, j, k, i]]).sum())
}

/// Douglas tensor from an hv-curvature provider, plus the scale of its constituent terms.
///
/// `G_{jk·l}` is a central difference of the trace `G_jk = G^i_jki` with step
/// `DOUGLAS_FD_STEP · |y|`.
pub fn douglas_from_hv<F>(y: &[f64], hv_at: F) -> Result<(Array4<f64>, f64)>
where
    F: Fn(&[f64]) -> Result<(Array4<f64>, f64)>,
{
    let n = y.len();
    let (hv, hv_scale) = hv_at(y)?;
    let trace = contracted_trace(&hv);
    let step = DOUGLAS_FD_STEP * y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut trace_dy = Array3::zeros((n, n, n));
    for l in 0..n {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[l] += step;
        ym[l] -= step;
        let tp = contracted_trace(&hv_at(&yp)?.0);
        let tm = contracted_trace(&hv_at(&ym)?.0);
        let d = (tp - tm) / (2.0 * step);
        trace_dy.slice_mut(ndarray::s![.., .., l]).assign(&d);
    }
    let k1 = 1.0 / (n as f64 + 1.0);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut scale = hv_scale.max(max_abs(&hv));
    let out = Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
        let a = trace_dy[[j, k, l]] * y[i] * k1;
        let b = (trace[[j, k]] * d(i, l) + trace[[l, j]] * d(i, k) + trace[[k, l]] * d(i, j)) * k1;
        scale = scale.max(a.abs()).max(b.abs());
        hv[[i, j, k, l]] - a - b
    });
    Ok((out, scale))
}

pub fn douglas_tensor_scaled(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<(Array4<f64>, f64)> {
    douglas_from_hv(y, |yy| Ok(PointConnection::new(spec, x, yy)?.hv_curvature_scaled()))
}

pub fn douglas_tensor(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Array4<f64>> {
    Ok(douglas_tensor_scaled(spec, x, y)?.0)
}

/// Douglas tensor of the projectively changed spray `G^i + p y^i`.
pub fn douglas_with_change(
    spec: &MetricSpec,
    x: &[f64],
    y: &[f64],
    change: &dyn ProjectiveFactor,
) -> Result<(Array4<f64>, f64)> {
    douglas_from_hv(y, |yy| {
        let (hv, s) = PointConnection::new(spec, x, yy)?.hv_curvature_scaled();
        Ok((hv + &change.hv_term(x, yy), s))
    })
}

/// Connection-level objects at one `(x, y)`.
#[derive(Debug, Clone)]
pub struct ConnectionBundle {
    pub gamma_up_transvected: Array1<f64>,
    pub spray: Array1<f64>,
    pub nonlinear: Array2<f64>,
    pub berwald: Array3<f64>,
    pub hv_curvature: Array4<f64>,
    pub metrical_horizontal: Array3<f64>,
    pub douglas: Array4<f64>,
    /// `h_{ij|k}` with respect to the Berwald connection.
    pub berwald_cov_h: Array3<f64>,
}

pub fn connection_bundle(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<ConnectionBundle> {
    let pc = PointConnection::new(spec, x, y)?;
    Ok(ConnectionBundle {
        gamma_up_transvected: pc.gamma_up_transvected(),
        spray: pc.spray(),
        nonlinear: pc.nonlinear(),
        berwald: pc.berwald(),
        hv_curvature: pc.hv_curvature(),
        metrical_horizontal: pc.metrical_horizontal()?,
        douglas: douglas_tensor(spec, x, y)?,
        berwald_cov_h: pc.cov_deriv_h(HorizontalConnection::Berwald)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::oracle;

    fn max_abs_dyn<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> f64 {
        max_abs(a)
    }

    fn pt3() -> ([f64; 3], [f64; 3]) {
        ([0.1, -0.25, 0.3], [0.48, -0.6, 0.64])
    }

    #[test]
    fn constant_coefficients_give_zero_symbols() {
        let spec = corpus::berwald_moor(4);
        let x = [0.2, 0.1, -0.3, 0.4];
        let y = [0.3, 0.5, 0.7, 0.4];
        let g = gamma_lower(&spec, &x).unwrap();
        assert!((0..4).all(|p| g.component(p).num_stored() == 0));
        let pc = PointConnection::new(&spec, &x, &y).unwrap();
        assert_eq!(max_abs_dyn(&pc.spray()), 0.0);
        assert_eq!(max_abs_dyn(&pc.nonlinear()), 0.0);
        assert_eq!(max_abs_dyn(&pc.berwald()), 0.0);
        assert_eq!(max_abs_dyn(&pc.hv_curvature()), 0.0);
        assert_eq!(max_abs_dyn(&pc.metrical_horizontal().unwrap()), 0.0);
        assert_eq!(max_abs_dyn(&douglas_tensor(&spec, &x, &y).unwrap()), 0.0);
    }

    #[test]
    fn quadratic_gamma_is_first_kind_christoffel() {
        let spec = corpus::random_riemannian(11, 3);
        let x = [0.2, -0.1, 0.4];
        let g = gamma_lower(&spec, &x).unwrap();
        let d = spec.coeff_partials_at(&x).unwrap();
        for p in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let expect = 0.5
                        * (d[j].get(&[p, k]).unwrap() + d[k].get(&[p, j]).unwrap() - d[p].get(&[j, k]).unwrap());
                    assert!((g.get(p, &[j, k]).unwrap() - expect).abs() < 1e-14);
                    assert_eq!(g.get(p, &[j, k]).unwrap(), g.get(p, &[k, j]).unwrap());
                }
            }
        }
    }

    #[test]
    fn exact_gamma_agrees_with_pointwise() {
        let spec = corpus::random_quartic(4, 2);
        let exact = gamma_lower_exact(spec.coefficients()).unwrap();
        let x = [0.3, -0.2];
        let g = gamma_lower(&spec, &x).unwrap();
        for p in 0..2 {
            for key in MultiIndex::all(2, 4) {
                let a = exact[p].get(key.indices()).unwrap().eval(&x);
                let b = g.get(p, key.indices()).unwrap();
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn riemannian_reduces_to_levi_civita() {
        let spec = corpus::random_riemannian(5, 3);
        let (x, y) = pt3();
        let lc = oracle::levi_civita(spec.coefficients(), &x).unwrap();
        let pc = PointConnection::new(&spec, &x, &y).unwrap();
        let g = pc.spray();
        let nl = pc.nonlinear();
        let gjk = pc.berwald();
        let l = pc.metrical_horizontal().unwrap();
        for i in 0..3 {
            let half: f64 = (0..3).flat_map(|j| (0..3).map(move |k| (j, k))).map(|(j, k)| lc[[i, j, k]] * y[j] * y[k]).sum();
            assert!((g[i] - 0.5 * half).abs() < 1e-12);
            for j in 0..3 {
                let nij: f64 = (0..3).map(|k| lc[[i, j, k]] * y[k]).sum();
                assert!((nl[[i, j]] - nij).abs() < 1e-12);
                for k in 0..3 {
                    assert!((gjk[[i, j, k]] - lc[[i, j, k]]).abs() < 1e-12);
                    assert!((l[[i, j, k]] - lc[[i, j, k]]).abs() < 1e-12);
                }
            }
        }
        assert!(max_abs_dyn(&pc.hv_curvature()) < 1e-12);
        assert!(max_abs_dyn(&douglas_tensor(&spec, &x, &y).unwrap()) < 1e-8);
        assert!(max_abs_dyn(&pc.cov_deriv_h(HorizontalConnection::Berwald).unwrap()) < 1e-12);
    }

    #[test]
    fn structural_identities_on_quartic() {
        let spec = corpus::random_quartic(9, 3);
        let (x, y) = pt3();
        let pc = PointConnection::new(&spec, &x, &y).unwrap();
        let g = pc.spray();
        let nl = pc.nonlinear();
        let gjk = pc.berwald();
        let (hv, _) = pc.hv_curvature_scaled();
        let scale = 1.0 + max_abs_dyn(&nl) + max_abs_dyn(&gjk);
        for i in 0..3 {
            let ny: f64 = (0..3).map(|j| nl[[i, j]] * y[j]).sum();
            assert!((ny - 2.0 * g[i]).abs() < 1e-12 * scale);
            for j in 0..3 {
                let gy: f64 = (0..3).map(|k| gjk[[i, j, k]] * y[k]).sum();
                assert!((gy - nl[[i, j]]).abs() < 1e-12 * scale);
                assert!((gjk[[i, j, 0]] - gjk[[i, 0, j]]).abs() < 1e-12 * scale);
                for k in 0..3 {
                    let hy: f64 = (0..3).map(|l| hv[[i, j, k, l]] * y[l]).sum();
                    assert!(hy.abs() < 1e-11 * scale);
                    for l in 0..3 {
                        let v = hv[[i, j, k, l]];
                        assert!((v - hv[[i, k, j, l]]).abs() < 1e-11 * scale);
                        assert!((v - hv[[i, l, k, j]]).abs() < 1e-11 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn derivative_chain_matches_finite_differences() {
        let spec = corpus::random_quartic(2, 2);
        let x = [0.15, -0.3];
        let y = [0.6, 0.8];
        let pc = PointConnection::new(&spec, &x, &y).unwrap();
        let f_spray = |yy: &[f64]| spray(&spec, &x, yy).map(|a| a.to_vec());
        let fd = oracle::fd_jacobian(&f_spray, &y).unwrap();
        let nl = pc.nonlinear();
        for i in 0..2 {
            for j in 0..2 {
                assert!((fd[[i, j]] - nl[[i, j]]).abs() < 1e-6 * (1.0 + max_abs(&nl)));
            }
        }
        let f_nl = |yy: &[f64]| nonlinear_connection(&spec, &x, yy).map(|a| a.iter().copied().collect());
        let fd = oracle::fd_jacobian(&f_nl, &y).unwrap();
        let gjk = pc.berwald();
        for (flat, v) in gjk.iter().enumerate() {
            let (i, j, k) = (flat / 4, (flat / 2) % 2, flat % 2);
            assert!((fd[[i * 2 + j, k]] - v).abs() < 1e-6 * (1.0 + max_abs(&gjk)));
        }
    }

    #[test]
    fn metrical_connection_is_metric_and_y_is_parallel() {
        let spec = corpus::generic_quartic();
        let x = [0.2, -0.4];
        let y = [0.8, -0.6];
        let pc = PointConnection::new(&spec, &x, &y).unwrap();
        let (cov, scale) = pc.cov_deriv_h_scaled(HorizontalConnection::Metrical).unwrap();
        assert!(max_abs(&cov) < 1e-9 * (1.0 + scale));
        let (cov_b, scale_b) = pc.cov_deriv_h_scaled(HorizontalConnection::Berwald).unwrap();
        assert!(max_abs(&cov_b) > 1e-4 * (1.0 + scale_b));
        assert!(max_abs(&pc.y_cov_deriv(HorizontalConnection::Berwald).unwrap()) < 1e-12);
        assert!(max_abs(&pc.y_cov_deriv(HorizontalConnection::Metrical).unwrap()) < 1e-10);
        let l = pc.metrical_horizontal().unwrap();
        for i in 0..2 {
            assert!((l[[i, 0, 1]] - l[[i, 1, 0]]).abs() < 1e-13);
        }
    }

    #[test]
    fn squared_riemannian_is_berwald() {
        let spec = corpus::quartic_squared_riemannian();
        let base = corpus::curved_riemannian();
        let x = [0.3, 0.5];
        let y = [-0.28, 0.96];
        let pc = PointConnection::new(&spec, &x, &y).unwrap();
        let pb = PointConnection::new(&base, &x, &y).unwrap();
        assert!(max_abs(&(pc.spray() - pb.spray())) < 1e-12);
        assert!(max_abs(&(pc.berwald() - pb.berwald())) < 1e-12);
        let (hv, scale) = pc.hv_curvature_scaled();
        assert!(max_abs(&hv) < 1e-12 * (1.0 + scale));
        assert!(max_abs(&(pc.metrical_horizontal().unwrap() - pc.berwald())) < 1e-9);
    }

    #[test]
    fn generic_quartic_has_curvature() {
        let spec = corpus::generic_quartic();
        let (hv, _) = PointConnection::new(&spec, &[0.2, 0.3], &[0.6, 0.8]).unwrap().hv_curvature_scaled();
        assert!(max_abs(&hv) > 1e-3);
        let (d, _) = douglas_tensor_scaled(&spec, &[0.2, 0.3], &[0.6, 0.8]).unwrap();
        assert!(max_abs(&d) > 1e-3);
    }

    #[test]
    fn douglas_is_symmetric_and_projectively_invariant() {
        let spec = corpus::random_quartic(3, 3);
        let (x, y) = pt3();
        let (d, scale) = douglas_tensor_scaled(&spec, &x, &y).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    assert!((d[[0, j, k, l]] - d[[0, k, j, l]]).abs() < 1e-8 * (1.0 + scale));
                    assert!((d[[1, j, k, l]] - d[[1, l, k, j]]).abs() < 1e-8 * (1.0 + scale));
                }
            }
        }
        let quad = QuadraticRootFactor { c: ndarray::array![[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]] };
        let (dq, _) = douglas_with_change(&spec, &x, &y, &quad).unwrap();
        assert!(max_abs(&(&dq - &d)) < 1e-7 * (1.0 + scale));
    }

    #[test]
    fn quadratic_root_factor_derivatives() {
        let quad = QuadraticRootFactor { c: ndarray::array![[2.0, 0.3], [0.3, 1.0]] };
        let x = [0.0, 0.0];
        let y = [0.4, -0.7];
        let grad = |yy: &[f64]| Ok(quad.gradient(&x, yy).to_vec());
        let fd = oracle::fd_jacobian(&grad, &y).unwrap();
        let hess = quad.hessian(&x, &y);
        assert!(max_abs(&(fd - &hess)) < 1e-8);
        let hess_flat = |yy: &[f64]| Ok(quad.hessian(&x, yy).iter().copied().collect());
        let fd = oracle::fd_jacobian(&hess_flat, &y).unwrap();
        let third = quad.third(&x, &y);
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    assert!((fd[[j * 2 + k, l]] - third[[j, k, l]]).abs() < 1e-7);
                }
            }
        }
    }
}
