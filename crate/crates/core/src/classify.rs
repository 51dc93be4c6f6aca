//! Sample-based and exact-coefficient classification predicates, projective
//! relations between two metrics, least-squares recovery of a projectively
//! related linear connection, and the product construction from a Riemannian metric.
//!
//! Every residual is normalized as `|value| / (1 + max |constituent term|)`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Array3};
use rayon::prelude::*;
use serde::Serialize;

use crate::connection::{self, HorizontalConnection, PointConnection};
use crate::error::{FinslerError, Result};
use crate::linalg;
use crate::metric::{self, JetDepth, NondegeneracyReport};
use crate::polyfield::{canonicalize_index, Coefficient, MultiIndex, PolyScalar, SymCoeffTensor, SymTensor};
use crate::sampling::{Sample, Sampler};
use crate::spec::MetricSpec;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Fraction of rejected samples above which a verdict is indeterminate.
pub const MAX_REJECTED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Indeterminate,
}

impl Verdict {
    fn from_residual(residual: f64, tol: f64) -> Self {
        if residual < tol { Verdict::Holds } else { Verdict::Fails }
    }
}

/// An independent residual computed alongside the main one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondaryChannel {
    pub name: String,
    pub residual: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub predicate: String,
    pub verdict: Verdict,
    /// Max normalized residual over accepted samples.
    pub residual: f64,
    pub tolerance: f64,
    /// Accepted samples.
    pub samples: usize,
    /// Samples rejected for degeneracy.
    pub rejected: usize,
    pub seed: u64,
    pub worst_sample: Option<Sample>,
    pub secondary: Option<SecondaryChannel>,
}

fn normalized(value: f64, scale: f64) -> f64 {
    let r = value.abs() / (1.0 + scale.abs());
    if r.is_nan() { f64::INFINITY } else { r }
}

fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Evaluates `channels` at every candidate in parallel and reduces in candidate order.
///
/// `channels` returns one normalized residual per channel; the first is the
/// primary, an optional second becomes the secondary channel.
fn run_samples<F>(
    predicate: &str,
    secondary: Option<&str>,
    candidates: &[Sample],
    seed: u64,
    tol: f64,
    channels: F,
) -> Result<ClassificationReport>
where
    F: Fn(&Sample) -> Result<Vec<f64>> + Sync,
{
    let results: Vec<Result<Vec<f64>>> = candidates.par_iter().map(&channels).collect();
    let mut accepted = 0;
    let mut rejected = 0;
    let mut worst: Option<usize> = None;
    let mut residual = 0.0f64;
    let mut second = 0.0f64;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => {
                accepted += 1;
                let primary = v.first().copied().unwrap_or(0.0);
                if primary > residual || worst.is_none() {
                    residual = residual.max(primary);
                    worst = Some(i);
                }
                if let Some(s) = v.get(1) {
                    second = second.max(*s);
                }
            }
            Err(e) if e.is_degeneracy() => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    let total = accepted + rejected;
    let too_many = total == 0 || accepted == 0 || rejected as f64 > MAX_REJECTED_FRACTION * total as f64;
    let verdict_for = |r: f64| if too_many { Verdict::Indeterminate } else { Verdict::from_residual(r, tol) };
    Ok(ClassificationReport {
        predicate: predicate.to_string(),
        verdict: verdict_for(residual),
        residual,
        tolerance: tol,
        samples: accepted,
        rejected,
        seed,
        worst_sample: worst.map(|i| candidates[i].clone()),
        secondary: secondary.map(|name| SecondaryChannel {
            name: name.to_string(),
            residual: second,
            verdict: verdict_for(second),
        }),
    })
}

/// Holds iff every coefficient (and the conformal scale) is constant in this chart.
pub fn classify_minkowski_chart(spec: &MetricSpec) -> Verdict {
    if spec.has_constant_coefficients() { Verdict::Holds } else { Verdict::Fails }
}

fn minkowski_report(spec: &MetricSpec, tol: f64, seed: u64) -> Result<ClassificationReport> {
    let n = spec.dimension();
    let mut residual = 0.0f64;
    for k in 0..n {
        residual = residual.max(spec.coefficients().partial_x(k)?.max_abs_coefficient());
        if let Some(s) = spec.scale().filter(|s| s.power != 0) {
            residual = residual.max(s.base.partial(k).max_abs_coefficient());
        }
    }
    Ok(ClassificationReport {
        predicate: "minkowski".into(),
        verdict: classify_minkowski_chart(spec),
        residual,
        tolerance: tol,
        samples: 0,
        rejected: 0,
        seed,
        worst_sample: None,
        secondary: None,
    })
}

/// Holds iff the hv-curvature `G^i_jkl` vanishes at every sample.
pub fn test_berwald(spec: &MetricSpec, sampler: &Sampler, tol: f64) -> Result<ClassificationReport> {
    run_samples("berwald", None, &sampler.candidates(), sampler.seed, tol, |s| {
        let (hv, scale) = PointConnection::new(spec, &s.x, &s.y)?.hv_curvature_scaled();
        Ok(vec![normalized(max_abs(&hv), scale)])
    })
}

/// Holds iff `h_{ij|k} = 0` for the Berwald connection; the secondary channel
/// measures `G^i_jk − L^i_jk`.
pub fn test_landsberg(spec: &MetricSpec, sampler: &Sampler, tol: f64) -> Result<ClassificationReport> {
    run_samples("landsberg", Some("berwald_minus_metrical"), &sampler.candidates(), sampler.seed, tol, |s| {
        let pc = PointConnection::with_depth(spec, &s.x, &s.y, JetDepth::Berwald)?;
        let (cov, scale) = pc.cov_deriv_h_scaled(HorizontalConnection::Berwald)?;
        let g = pc.berwald();
        let l = pc.metrical_horizontal()?;
        let diff = max_abs((&g - &l).iter());
        Ok(vec![normalized(max_abs(&cov), scale), normalized(diff, max_abs(&g).max(max_abs(&l)))])
    })
}

/// Holds iff the Douglas tensor vanishes at every sample.
pub fn test_douglas(spec: &MetricSpec, sampler: &Sampler, tol: f64) -> Result<ClassificationReport> {
    run_samples("douglas", None, &sampler.candidates(), sampler.seed, tol, |s| {
        let (d, scale) = connection::douglas_tensor_scaled(spec, &s.x, &s.y)?;
        Ok(vec![normalized(max_abs(&d), scale)])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatMode {
    /// The degree-`2m` identity in `y` checked at sampled `(x, y)`.
    Sampled,
    /// Both sides built as polynomial coefficient tensors and compared coefficientwise.
    Exact,
}

/// Residual of `m T γ_{j0..0} − (T_j/m) y^r T_{,r}` at one point.
fn flat_residual_at(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let jet = metric::metric_jet_to(spec, x, y, JetDepth::Spray)?;
    let m = spec.order();
    let mf = m as f64;
    let gamma = connection::gamma_lower(spec, x)?;
    let partials = spec.coeff_partials_at(x)?;
    let ydt: f64 = partials.iter().zip(y).map(|(d, v)| d.contract_all(y).map(|c| c * v)).sum::<Result<f64>>()?;
    let mut worst = 0.0f64;
    for j in 0..spec.dimension() {
        let gj = gamma.component(j).contract_all(y)?;
        let lhs = mf * jet.t * gj;
        let rhs = jet.t_i[j] / mf * ydt;
        worst = worst.max(normalized(lhs - rhs, lhs.abs().max(rhs.abs())));
    }
    Ok(worst)
}

/// Left and right sides of the flatness identity for each `j`, as symmetric
/// tensors of degree `2m`: `m·(a ∘ γ_j)` and `a_{j·} ∘ E` with `E ↔ y^r T_{,r}`.
///
/// `∘` is the product of the associated forms.
fn flat_sides<C: Coefficient>(a: &SymTensor<C>, partials: &[SymTensor<C>]) -> Result<Vec<(SymTensor<C>, SymTensor<C>)>> {
    let n = a.dim();
    let m = a.degree();
    let gamma = connection::gamma_from_partials(partials)?;
    let mut e = SymTensor::<C>::zeros(n, m + 1);
    for key in MultiIndex::all(n, m + 1) {
        let mut acc = C::zero_value();
        let counts = key.counts(n);
        for r in (0..n).filter(|&r| counts[r] > 0) {
            let mut rest = key.indices().to_vec();
            let pos = rest.iter().position(|&i| i == r).expect("present");
            rest.remove(pos);
            let rest_key = canonicalize_index(&rest.iter().map(|&i| i as i64).collect::<Vec<_>>(), n)?;
            let w = rest_key.multiplicity() / key.multiplicity();
            acc = acc.plus(&partials[r].get(&rest)?.scaled(w));
        }
        e.set(key.indices(), acc)?;
    }
    let mut out = Vec::with_capacity(n);
    for (j, gj) in gamma.iter().enumerate() {
        let lhs = a.sym_product(gj)?.scaled(m as f64);
        let mut aj = SymTensor::<C>::zeros(n, m - 1);
        for key in MultiIndex::all(n, m - 1) {
            let mut idx = key.indices().to_vec();
            idx.push(j);
            aj.set(key.indices(), a.get(&idx)?)?;
        }
        out.push((lhs, aj.sym_product(&e)?));
    }
    Ok(out)
}

/// Exact flatness residual over polynomial coefficients.
///
/// With a conformal scale `s^p`, write `a = s^{p−1}(s c)` and
/// `∂a = s^{p−1}(p ∂s c + s ∂c)`; both sides carry `s^{2p−2}`, which is dropped.
fn flat_exact_residual(spec: &MetricSpec) -> Result<f64> {
    let n = spec.dimension();
    let c = spec.coefficients();
    let (a, partials): (SymCoeffTensor, Vec<SymCoeffTensor>) = match spec.scale().filter(|s| s.power != 0) {
        None => (c.clone(), (0..n).map(|k| c.partial_x(k)).collect::<Result<_>>()?),
        Some(s) => {
            let p = s.power as f64;
            let a = c.map(|q| q * &s.base);
            let partials = (0..n)
                .map(|k| {
                    let ds = s.base.partial(k).scale(p);
                    let dc = c.partial_x(k)?;
                    c.map(|q| q * &ds).plus(&dc.map(|q| q * &s.base))
                })
                .collect::<Result<_>>()?;
            (a, partials)
        }
    };
    let mut worst = 0.0f64;
    for (lhs, rhs) in flat_sides(&a, &partials)? {
        let diff = lhs.plus(&rhs.scaled(-1.0))?;
        worst = worst.max(normalized(diff.max_abs_coefficient(), lhs.max_abs_coefficient().max(rhs.max_abs_coefficient())));
    }
    Ok(worst)
}

/// Projective flatness via `m T γ_{j0..0} = (T_j/m) y^r T_{,r}`.
pub fn test_projective_flat(
    spec: &MetricSpec,
    sampler: &Sampler,
    tol: f64,
    mode: FlatMode,
) -> Result<ClassificationReport> {
    match mode {
        FlatMode::Sampled => run_samples("projectively_flat", None, &sampler.candidates(), sampler.seed, tol, |s| {
            Ok(vec![flat_residual_at(spec, &s.x, &s.y)?])
        }),
        FlatMode::Exact => {
            let residual = flat_exact_residual(spec)?;
            Ok(ClassificationReport {
                predicate: "projectively_flat_exact".into(),
                verdict: Verdict::from_residual(residual, tol),
                residual,
                tolerance: tol,
                samples: 0,
                rejected: 0,
                seed: sampler.seed,
                worst_sample: None,
                secondary: None,
            })
        }
    }
}

fn check_pair(a: &MetricSpec, b: &MetricSpec) -> Result<()> {
    if a.dimension() != b.dimension() {
        return Err(FinslerError::DimensionMismatch { what: "paired spec dimension", expected: a.dimension(), found: b.dimension() });
    }
    Ok(())
}

/// Projective relation report plus the recovered `p` per candidate (`None` where rejected).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveRelation {
    pub report: ClassificationReport,
    pub p_values: Vec<Option<f64>>,
}

/// Holds iff `Ḡ^i − G^i` is parallel to `y^i` at every sample.
pub fn test_projective_relation(
    a: &MetricSpec,
    b: &MetricSpec,
    sampler: &Sampler,
    tol: f64,
) -> Result<ProjectiveRelation> {
    check_pair(a, b)?;
    let candidates = sampler.candidates();
    let eval = |s: &Sample| -> Result<(f64, f64)> {
        let ga = connection::spray(a, &s.x, &s.y)?;
        let gb = connection::spray(b, &s.x, &s.y)?;
        let y = Array1::from(s.y.clone());
        let d = &gb - &ga;
        let p = d.dot(&y) / y.dot(&y);
        let orth = &d - &(&y * p);
        let scale = max_abs(&ga).max(max_abs(&gb));
        Ok((normalized(orth.dot(&orth).sqrt(), scale), p))
    };
    let report = run_samples("projective_relation", None, &candidates, sampler.seed, tol, |s| Ok(vec![eval(s)?.0]))?;
    let p_values = candidates.par_iter().map(|s| eval(s).ok().map(|r| r.1)).collect();
    Ok(ProjectiveRelation { report, p_values })
}

/// Condition `mT̄(T̄_{;i} − y^r T̄_{;r·i}) = (1−m) T̄_{;r} T̄_i y^r` for `T̄` of `b`,
/// covariant derivatives built from the nonlinear connection of `a`.
pub fn rapcsak_residual(a: &MetricSpec, b: &MetricSpec, sampler: &Sampler, tol: f64) -> Result<ClassificationReport> {
    check_pair(a, b)?;
    run_samples("rapcsak", None, &sampler.candidates(), sampler.seed, tol, |s| {
        let n = a.dimension();
        let (x, y) = (&s.x[..], &s.y[..]);
        let base = PointConnection::with_depth(a, x, y, JetDepth::Berwald)?;
        let nl = base.nonlinear();
        let gjk = base.berwald();
        let jet = metric::metric_jet_to(b, x, y, JetDepth::Spray)?;
        let m = b.order();
        let mf = m as f64;
        let partials = b.coeff_partials_at(x)?;
        // T̄_{,r} and T̄_{,r·i} = ∂_r T̄_i
        let t_x: Vec<f64> = partials.iter().map(|d| d.contract_all(y)).collect::<Result<_>>()?;
        let mut t_xy = Array2::zeros((n, n));
        for (r, d) in partials.iter().enumerate() {
            let v = d.transvect(y, m - 1)?;
            for i in 0..n {
                t_xy[[r, i]] = mf * v.get(&[i])?;
            }
        }
        let (t, ti, tij) = (jet.t, &jet.t_i, &jet.t_ij);
        let semi = |r: usize| t_x[r] - (0..n).map(|q| nl[[q, r]] * ti[q]).sum::<f64>();
        let semi_dot = |r: usize, i: usize| {
            t_xy[[r, i]]
                - (0..n).map(|q| gjk[[q, r, i]] * ti[q]).sum::<f64>()
                - (0..n).map(|q| nl[[q, r]] * tij[[q, i]]).sum::<f64>()
        };
        let semi_y: f64 = (0..n).map(|r| semi(r) * y[r]).sum();
        let mut worst = 0.0f64;
        for i in 0..n {
            let contracted: f64 = (0..n).map(|r| y[r] * semi_dot(r, i)).sum();
            let lhs = mf * t * (semi(i) - contracted);
            let rhs = (1.0 - mf) * semi_y * ti[i];
            let scale = (mf * t * semi(i)).abs().max((mf * t * contracted).abs()).max(rhs.abs());
            worst = worst.max(normalized(lhs - rhs, scale));
        }
        Ok(vec![worst])
    })
}

/// Linear connection recovered at one base point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveredConnection {
    pub x: Vec<f64>,
    /// Minimal-norm `Γ^i_jk`, nested `[i][j][k]`.
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// Gauge-free part `Γ^i_jk − (δ^i_j Γ^r_rk + δ^i_k Γ^r_rj)/(n+1)`.
    pub thomas_parameters: Vec<Vec<Vec<f64>>>,
    pub residual: f64,
    pub rank: usize,
    pub unknowns: usize,
    /// `Γ ↦ Γ + δ⊗φ + φ⊗δ` leaves the system unchanged, so rank ≤ unknowns − n.
    pub gauge_dim: usize,
    pub rank_deficient: bool,
    pub directions: usize,
}

fn nested(a: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    a.outer_iter().map(|m| m.outer_iter().map(|r| r.to_vec()).collect()).collect()
}

/// `Π^i_jk = Γ^i_jk − (δ^i_j Γ^r_rk + δ^i_k Γ^r_rj)/(n+1)`, invariant under projective gauge.
pub fn thomas_parameters(gamma: &Array3<f64>) -> Array3<f64> {
    let n = gamma.shape()[0];
    let tr: Vec<f64> = (0..n).map(|k| (0..n).map(|r| gamma[[r, r, k]]).sum()).collect();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Array3::from_shape_fn((n, n, n), |(i, j, k)| {
        gamma[[i, j, k]] - (d(i, j) * tr[k] + d(i, k) * tr[j]) / (n as f64 + 1.0)
    })
}

/// Least-squares `Γ^i_jk(x)` with `mT(T_{,i} − y^r T_{,r·i}) + (m−1)T_i y^r T_{,r} = −Γ^s_00 A_is`,
/// `A_is = (1−m)T_iT_s + mTT_is`, over sampled directions.
pub fn solve_riemann_projective(spec: &MetricSpec, x: &[f64], sampler: &Sampler) -> Result<RecoveredConnection> {
    let n = spec.dimension();
    let m = spec.order();
    let mf = m as f64;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j..n).map(move |k| (j, k))).collect();
    let unknowns = n * pairs.len();
    let count = sampler.count.max(4 * n * n * n);
    let dirs = Sampler { count, ..sampler.clone() }.directions();
    let partials = spec.coeff_partials_at(x)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut scale = 0.0f64;
    let mut used = 0;
    for y in &dirs {
        let jet = match metric::metric_jet_to(spec, x, y, JetDepth::Spray) {
            Ok(j) => j,
            Err(e) if e.is_degeneracy() => continue,
            Err(e) => return Err(e),
        };
        used += 1;
        let (t, ti, tij) = (jet.t, &jet.t_i, &jet.t_ij);
        let t_x: Vec<f64> = partials.iter().map(|d| d.contract_all(y)).collect::<Result<_>>()?;
        let ydt: f64 = t_x.iter().zip(y).map(|(a, b)| a * b).sum();
        for i in 0..n {
            // y^r T_{,r·i} = m (y^r ∂_r a)_{i0..0}
            let mut yr_txi = 0.0;
            for (r, d) in partials.iter().enumerate() {
                yr_txi += y[r] * mf * d.transvect(y, m - 1)?.get(&[i])?;
            }
            let lhs = mf * t * (t_x[i] - yr_txi) + (mf - 1.0) * ti[i] * ydt;
            let mut row = vec![0.0; unknowns];
            for s in 0..n {
                let a_is = (1.0 - mf) * ti[i] * ti[s] + mf * t * tij[[i, s]];
                for (u, &(j, k)) in pairs.iter().enumerate() {
                    let w = if j == k { 1.0 } else { 2.0 };
                    row[s * pairs.len() + u] = a_is * w * y[j] * y[k];
                }
            }
            scale = scale.max((mf * t * t_x[i]).abs()).max((mf * t * yr_txi).abs()).max(((mf - 1.0) * ti[i] * ydt).abs());
            rows.push(row);
            rhs.push(-lhs);
        }
    }
    if used == 0 {
        return Err(FinslerError::DegenerateFlagMetric { cond: f64::INFINITY });
    }
    let design = DMatrix::from_fn(rows.len(), unknowns, |r, c| rows[r][c]);
    let ls = linalg::least_squares(&design, &rhs);
    let theta = nalgebra::DVector::from_column_slice(&ls.solution);
    let fit = &design * &theta;
    let misfit = fit.iter().zip(&rhs).map(|(f, b)| (f - b).abs()).fold(0.0f64, f64::max);
    scale = scale.max(max_abs(fit.iter()));
    let mut gamma = Array3::zeros((n, n, n));
    for s in 0..n {
        for (u, &(j, k)) in pairs.iter().enumerate() {
            let v = ls.solution[s * pairs.len() + u];
            gamma[[s, j, k]] = v;
            gamma[[s, k, j]] = v;
        }
    }
    let gauge_dim = n;
    Ok(RecoveredConnection {
        x: x.to_vec(),
        thomas_parameters: nested(&thomas_parameters(&gamma)),
        gamma: nested(&gamma),
        residual: normalized(misfit, scale),
        rank: ls.rank,
        unknowns,
        gauge_dim,
        rank_deficient: ls.rank < unknowns - gauge_dim,
        directions: used,
    })
}

/// `α_{;i} = ∂α/∂x^i − N^r_i ∂α/∂y^r` with `N` of the Riemannian `gamma`, max normalized over samples.
pub fn parallel_residual(gamma: &MetricSpec, alpha: &SymCoeffTensor, sampler: &Sampler, tol: f64) -> Result<ClassificationReport> {
    if gamma.order() != 2 {
        return Err(FinslerError::InvalidSpec(format!("base metric must be quadratic, got order {}", gamma.order())));
    }
    if alpha.dim() != gamma.dimension() || alpha.degree() < 1 {
        return Err(FinslerError::InvalidSpec("alpha must share the dimension and have degree ≥ 1".into()));
    }
    let n = gamma.dimension();
    let p = alpha.degree();
    let alpha_x: Vec<SymCoeffTensor> = (0..n).map(|k| alpha.partial_x(k)).collect::<Result<_>>()?;
    run_samples("alpha_parallel", None, &sampler.candidates(), sampler.seed, tol, |s| {
        let (x, y) = (&s.x[..], &s.y[..]);
        let nl = connection::nonlinear_connection(gamma, x, y)?;
        let a = alpha.eval_at(x)?;
        let dy = a.transvect(y, p - 1)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            let dx = alpha_x[i].eval_at(x)?.contract_all(y)?;
            let corr: f64 = (0..n).map(|r| nl[[r, i]] * p as f64 * dy.get(&[r]).unwrap_or(0.0)).sum();
            worst = worst.max(normalized(dx - corr, dx.abs().max(corr.abs())));
        }
        Ok(vec![worst])
    })
}

/// The metric `T̄ = α·γ` of order `deg α + 2`, provided `α` is parallel for the
/// nonlinear connection of `γ`; it is then projectively related to `γ`.
pub fn construct_from_riemannian(
    gamma: &MetricSpec,
    alpha: &SymCoeffTensor,
    sampler: &Sampler,
    tol: f64,
) -> Result<MetricSpec> {
    let report = parallel_residual(gamma, alpha, sampler, tol)?;
    if report.verdict != Verdict::Holds {
        return Err(FinslerError::NotParallel { residual: report.residual, tolerance: tol });
    }
    crate::corpus::product_metric(gamma, alpha)
}

/// Residual of `α_{,i} = (1/m)(T_i/T) α_{,r} y^r` for a function `α(x)`; the
/// secondary channel evaluates the rewritten form `α_{,r}(δ^r_i − T_i y^r/(mT))`.
pub fn conformal_factor_check(
    spec: &MetricSpec,
    alpha: &PolyScalar,
    sampler: &Sampler,
    tol: f64,
) -> Result<ClassificationReport> {
    let n = spec.dimension();
    let mf = spec.order() as f64;
    let grad: Vec<PolyScalar> = (0..n).map(|k| alpha.partial(k)).collect();
    run_samples("conformal_factor", Some("rewritten_form"), &sampler.candidates(), sampler.seed, tol, |s| {
        let jet = metric::metric_jet_to(spec, &s.x, &s.y, JetDepth::Spray)?;
        if jet.t == 0.0 {
            return Err(FinslerError::NonPositiveT { t: jet.t, order: spec.order() });
        }
        let da: Vec<f64> = grad.iter().map(|g| g.eval(&s.x)).collect();
        let da_y: f64 = da.iter().zip(&s.y).map(|(a, b)| a * b).sum();
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for i in 0..n {
            let other = jet.t_i[i] / (mf * jet.t) * da_y;
            first = first.max(normalized(da[i] - other, da[i].abs().max(other.abs())));
            let rewritten: f64 =
                (0..n).map(|r| da[r] * ((if r == i { 1.0 } else { 0.0 }) - jet.t_i[i] * s.y[r] / (mf * jet.t))).sum();
            second = second.max(normalized(rewritten, da[i].abs().max(other.abs())));
        }
        Ok(vec![first, second])
    })
}

/// Nondegeneracy sweep plus the five predicates.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub nondegeneracy: NondegeneracyReport,
    pub predicates: Vec<ClassificationReport>,
}

impl SuiteReport {
    pub fn verdict(&self, predicate: &str) -> Option<Verdict> {
        self.predicates.iter().find(|r| r.predicate == predicate).map(|r| r.verdict)
    }
}

/// Runs minkowski, berwald, landsberg, douglas and projectively_flat (sampled,
/// with the exact mode as secondary channel).
pub fn classify_all(spec: &MetricSpec, sampler: &Sampler, tol: f64) -> Result<SuiteReport> {
    let nondegeneracy = metric::check_nondegenerate(spec, sampler)?;
    let mut flat = test_projective_flat(spec, sampler, tol, FlatMode::Sampled)?;
    let exact = test_projective_flat(spec, sampler, tol, FlatMode::Exact)?;
    flat.secondary = Some(SecondaryChannel { name: "exact".into(), residual: exact.residual, verdict: exact.verdict });
    let predicates = vec![
        minkowski_report(spec, tol, sampler.seed)?,
        test_berwald(spec, sampler, tol)?,
        test_landsberg(spec, sampler, tol)?,
        test_douglas(spec, sampler, tol)?,
        flat,
    ];
    Ok(SuiteReport { nondegeneracy, predicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::polyfield::Monomial;

    fn sampler(spec: &MetricSpec, count: usize) -> Sampler {
        Sampler::for_spec(spec, count, 42)
    }

    #[test]
    fn minkowski_chart_examples() {
        assert_eq!(classify_minkowski_chart(&corpus::berwald_moor(4)), Verdict::Holds);
        assert_eq!(classify_minkowski_chart(&corpus::euclidean(3)), Verdict::Holds);
        let mut a = SymTensor::zeros(2, 2);
        a.set(&[0, 0], PolyScalar::from_monomials([
            Monomial { exponents: vec![0, 0], coefficient: 1.0 },
            Monomial { exponents: vec![2, 0], coefficient: 1.0 },
        ])).unwrap();
        a.set(&[1, 1], PolyScalar::constant(2, 1.0)).unwrap();
        let spec = MetricSpec::new(a, MetricSpec::unit_box(2)).unwrap();
        assert_eq!(classify_minkowski_chart(&spec), Verdict::Fails);
        assert_eq!(classify_minkowski_chart(&corpus::beltrami(2)), Verdict::Fails);
    }

    #[test]
    fn riemannian_is_berwald_and_douglas() {
        let spec = corpus::random_riemannian(3, 3);
        let s = sampler(&spec, 16);
        assert_eq!(test_berwald(&spec, &s, 1e-8).unwrap().verdict, Verdict::Holds);
        assert_eq!(test_douglas(&spec, &s, 1e-8).unwrap().verdict, Verdict::Holds);
        let l = test_landsberg(&spec, &s, 1e-8).unwrap();
        assert_eq!(l.verdict, Verdict::Holds);
        assert_eq!(l.secondary.unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn generic_quartic_fails_everything() {
        let spec = corpus::generic_quartic();
        let s = sampler(&spec, 16);
        for r in [
            test_berwald(&spec, &s, 1e-8).unwrap(),
            test_landsberg(&spec, &s, 1e-8).unwrap(),
            test_douglas(&spec, &s, 1e-8).unwrap(),
            test_projective_flat(&spec, &s, 1e-8, FlatMode::Sampled).unwrap(),
            test_projective_flat(&spec, &s, 1e-8, FlatMode::Exact).unwrap(),
        ] {
            assert_eq!(r.verdict, Verdict::Fails, "{r:?}");
        }
    }

    #[test]
    fn beltrami_flat_in_both_modes_and_perturbation_breaks_it() {
        let spec = corpus::beltrami(2);
        let s = sampler(&spec, 32);
        let sampled = test_projective_flat(&spec, &s, 1e-8, FlatMode::Sampled).unwrap();
        let exact = test_projective_flat(&spec, &s, 1e-8, FlatMode::Exact).unwrap();
        assert_eq!(sampled.verdict, Verdict::Holds, "{sampled:?}");
        assert_eq!(exact.verdict, Verdict::Holds, "{exact:?}");
        let p = corpus::perturbed_beltrami(2, 0.01);
        let sampled = test_projective_flat(&p, &s, 1e-8, FlatMode::Sampled).unwrap();
        let exact = test_projective_flat(&p, &s, 1e-8, FlatMode::Exact).unwrap();
        assert!(sampled.residual > 1e-3, "{sampled:?}");
        assert!(exact.residual > 1e-3, "{exact:?}");
    }

    #[test]
    fn constant_coefficients_flat_exactly() {
        let spec = corpus::berwald_moor(4);
        let r = test_projective_flat(&spec, &sampler(&spec, 4), 1e-8, FlatMode::Exact).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn projective_relation_reflexive_and_squared() {
        let spec = corpus::random_quartic(1, 2);
        let s = sampler(&spec, 16);
        let r = test_projective_relation(&spec, &spec, &s, 1e-8).unwrap();
        assert_eq!(r.report.verdict, Verdict::Holds);
        assert!(r.p_values.iter().flatten().all(|p| *p == 0.0));
        let sq = spec.squared().unwrap();
        let r = test_projective_relation(&spec, &sq, &s, 1e-8).unwrap();
        assert_eq!(r.report.verdict, Verdict::Holds);
        assert!(r.p_values.iter().flatten().all(|p| p.abs() < 1e-9));
        let other = corpus::generic_quartic();
        let ab = test_projective_relation(&spec, &other, &s, 1e-8).unwrap().report;
        let ba = test_projective_relation(&other, &spec, &s, 1e-8).unwrap().report;
        assert_eq!(ab.verdict, Verdict::Fails);
        assert_eq!(ab.residual, ba.residual);
    }

    #[test]
    fn rapcsak_agrees_with_knebelmann() {
        let spec = corpus::random_quartic(5, 2);
        let s = sampler(&spec, 16);
        assert!(rapcsak_residual(&spec, &spec, &s, 1e-8).unwrap().residual < 1e-12);
        let (gamma, alpha) = corpus::product_construction_parts();
        let built = construct_from_riemannian(&gamma, &alpha, &sampler(&gamma, 16), 1e-8).unwrap();
        let s3 = sampler(&gamma, 16);
        assert_eq!(rapcsak_residual(&gamma, &built, &s3, 1e-8).unwrap().verdict, Verdict::Holds);
        assert_eq!(test_projective_relation(&gamma, &built, &s3, 1e-8).unwrap().report.verdict, Verdict::Holds);
        let other = corpus::generic_quartic();
        let r = rapcsak_residual(&spec, &other, &s, 1e-8).unwrap();
        assert!(r.residual > 1e-4, "{r:?}");
        assert_eq!(test_projective_relation(&spec, &other, &s, 1e-8).unwrap().report.verdict, Verdict::Fails);
    }

    #[test]
    fn riemann_projective_recovery_on_quadratic() {
        let spec = corpus::random_riemannian(7, 2);
        let x = [0.1, -0.2];
        let rec = solve_riemann_projective(&spec, &x, &sampler(&spec, 8)).unwrap();
        assert!(rec.residual < 1e-10, "{rec:?}");
        assert_eq!(rec.unknowns, 6);
        assert_eq!(rec.rank, rec.unknowns - rec.gauge_dim);
        assert!(!rec.rank_deficient);
        let lc = crate::oracle::levi_civita(spec.coefficients(), &x).unwrap();
        let pi = thomas_parameters(&lc);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!((rec.thomas_parameters[i][j][k] - pi[[i, j, k]]).abs() < 1e-8);
                    assert_eq!(rec.gamma[i][j][k], rec.gamma[i][k][j]);
                }
            }
        }
    }

    #[test]
    fn riemann_projective_recovery_on_flat_construction_and_generic() {
        let (gamma, alpha) = corpus::flat_construction_parts();
        let spec = construct_from_riemannian(&gamma, &alpha, &sampler(&gamma, 16), 1e-8).unwrap();
        let rec = solve_riemann_projective(&spec, &[0.1, 0.2], &sampler(&spec, 8)).unwrap();
        assert!(rec.residual < 1e-8);
        assert!(rec.gamma.iter().flatten().flatten().all(|v| v.abs() < 1e-8));
        let g = corpus::generic_quartic();
        let rec = solve_riemann_projective(&g, &[0.3, 0.2], &sampler(&g, 8)).unwrap();
        assert!(rec.residual > 1e-6, "{rec:?}");
    }

    #[test]
    fn construction_rejects_non_parallel_alpha() {
        let gamma = corpus::beltrami(2);
        let mut alpha = SymTensor::zeros(2, 2);
        alpha.set(&[0, 0], PolyScalar::constant(2, 1.0)).unwrap();
        let err = construct_from_riemannian(&gamma, &alpha, &sampler(&gamma, 8), 1e-8).unwrap_err();
        assert!(matches!(err, FinslerError::NotParallel { .. }));
    }

    #[test]
    fn constructed_sextic_is_projectively_flat() {
        let gamma = corpus::euclidean(2);
        let alpha = corpus::form_to_tensor(2, 4, &[
            (vec![4, 0], PolyScalar::constant(2, 1.0)),
            (vec![2, 2], PolyScalar::constant(2, 0.5)),
            (vec![0, 4], PolyScalar::constant(2, 2.0)),
        ]);
        let spec = construct_from_riemannian(&gamma, &alpha, &sampler(&gamma, 8), 1e-8).unwrap();
        assert_eq!(spec.order(), 6);
        let s = sampler(&spec, 8);
        assert_eq!(test_projective_flat(&spec, &s, 1e-8, FlatMode::Sampled).unwrap().verdict, Verdict::Holds);
        assert_eq!(test_projective_flat(&spec, &s, 1e-8, FlatMode::Exact).unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn conformal_factor_examples() {
        let spec = corpus::generic_quartic();
        let s = sampler(&spec, 16);
        let r = conformal_factor_check(&spec, &PolyScalar::constant(2, 3.0), &s, 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.residual, 0.0);
        let alpha = PolyScalar::from_monomials([
            Monomial { exponents: vec![1, 0], coefficient: 1.0 },
            Monomial { exponents: vec![1, 1], coefficient: 0.5 },
        ]);
        let r = conformal_factor_check(&spec, &alpha, &s, 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        let second = r.secondary.unwrap();
        assert!((second.residual - r.residual).abs() < 1e-12 * (1.0 + r.residual));
    }

    #[test]
    fn degenerate_samples_make_verdict_indeterminate() {
        // T ≤ 0 directions of Berwald-Moór still have a nondegenerate flag metric.
        let spec = corpus::berwald_moor(4);
        let r = test_berwald(&spec, &sampler(&spec, 16), 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        // a = diag(x0, 1) is singular to within the condition cap on this box.
        let mut a = SymTensor::zeros(2, 2);
        a.set(&[0, 0], PolyScalar::coordinate(2, 0)).unwrap();
        a.set(&[1, 1], PolyScalar::constant(2, 1.0)).unwrap();
        let spec = MetricSpec::new(a, vec![(-1e-14, 1e-14), (-1.0, 1.0)]).unwrap();
        let r = test_berwald(&spec, &sampler(&spec, 16), 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Indeterminate, "{r:?}");
    }

    #[test]
    fn suite_on_bundled_corpus() {
        for entry in corpus::bundled() {
            let s = sampler(&entry.spec, 16);
            let suite = classify_all(&entry.spec, &s, 1e-8).unwrap();
            let v = |p: &str| suite.verdict(p).unwrap();
            if v("berwald") == Verdict::Holds {
                assert_eq!(v("landsberg"), Verdict::Holds, "{}", entry.name);
                assert_eq!(v("douglas"), Verdict::Holds, "{}", entry.name);
            }
            if v("minkowski") == Verdict::Holds {
                assert_eq!(v("projectively_flat"), Verdict::Holds, "{}", entry.name);
            }
            if v("projectively_flat") == Verdict::Holds {
                assert_eq!(v("douglas"), Verdict::Holds, "{}", entry.name);
            }
            let flat = suite.predicates.iter().find(|r| r.predicate == "projectively_flat").unwrap();
            assert_eq!(flat.verdict, flat.secondary.as_ref().unwrap().verdict, "{}", entry.name);
        }
    }
}
