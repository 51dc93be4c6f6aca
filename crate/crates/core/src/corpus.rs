//! Bundled example metrics and seeded random families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::polyfield::{factorial, Monomial, MultiIndex, PolyScalar, SymCoeffTensor};
use crate::spec::{ConformalScale, MetricSpec};

fn poly(n: usize, terms: &[(&[u32], f64)]) -> PolyScalar {
    PolyScalar::from_monomials(terms.iter().map(|(e, c)| {
        debug_assert_eq!(e.len(), n);
        Monomial { exponents: e.to_vec(), coefficient: *c }
    }))
}

/// Symmetric tensor of a form given as `Σ c(x) y^e`, keyed by the y-exponent vector.
pub fn form_to_tensor(n: usize, degree: usize, terms: &[(Vec<usize>, PolyScalar)]) -> SymCoeffTensor {
    let mut t = SymCoeffTensor::zeros(n, degree);
    for (y_exp, c) in terms {
        let idx: Vec<usize> = y_exp.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect();
        assert_eq!(idx.len(), degree, "term degree must match the form degree");
        let multiplicity = y_exp.iter().fold(factorial(degree), |acc, &k| acc / factorial(k));
        let prev = t.get(&idx).expect("valid index");
        t.set(&idx, &prev + &c.scale(1.0 / multiplicity)).expect("valid index");
    }
    t
}

/// `a_ij = δ_ij` on `[-1, 1]^n`.
pub fn euclidean(n: usize) -> MetricSpec {
    let mut a = SymCoeffTensor::zeros(n, 2);
    for i in 0..n {
        a.set(&[i, i], PolyScalar::constant(n, 1.0)).expect("in range");
    }
    MetricSpec::new(a, MetricSpec::unit_box(n)).expect("valid spec")
}

/// `F = (y^0 y^1 ... y^{n-1})^{1/n}`; one stored entry `1/n!`.
pub fn berwald_moor(n: usize) -> MetricSpec {
    let mut a = SymCoeffTensor::zeros(n, n);
    let idx: Vec<usize> = (0..n).collect();
    a.set(&idx, PolyScalar::constant(n, 1.0 / factorial(n))).expect("in range");
    MetricSpec::new(a, MetricSpec::unit_box(n)).expect("valid spec")
}

fn beltrami_with(n: usize, perturbation: f64) -> MetricSpec {
    // a_ij = [(1 - |x|^2) δ_ij + x_i x_j] / (1 - |x|^2)^2
    let one = PolyScalar::constant(n, 1.0);
    let mut r2 = PolyScalar::zero();
    for k in 0..n {
        let xk = PolyScalar::coordinate(n, k);
        r2 = &r2 + &(&xk * &xk);
    }
    let q = &one - &r2;
    let mut a = SymCoeffTensor::zeros(n, 2);
    for i in 0..n {
        for j in i..n {
            let mut e = &PolyScalar::coordinate(n, i) * &PolyScalar::coordinate(n, j);
            if i == j {
                e = &e + &q;
            }
            a.set(&[i, j], e).expect("in range");
        }
    }
    if perturbation != 0.0 {
        let x0 = PolyScalar::coordinate(n, 0);
        let bump = (&x0 * &x0).scale(perturbation);
        let prev = a.get(&[1, 1]).expect("in range");
        a.set(&[1, 1], &prev + &bump).expect("in range");
    }
    MetricSpec::with_scale(a, Some(ConformalScale { base: q, power: -2 }), vec![(-0.5, 0.5); n]).expect("valid spec")
}

/// Beltrami–Klein metric of curvature −1 on `[-0.5, 0.5]^n` (inside the unit ball).
pub fn beltrami(n: usize) -> MetricSpec {
    beltrami_with(n, 0.0)
}

/// Beltrami with `a_11` numerator bumped by `eps · (x^0)^2`.
pub fn perturbed_beltrami(n: usize, eps: f64) -> MetricSpec {
    beltrami_with(n, eps)
}

/// A position-dependent quartic in two dimensions with no special structure.
pub fn generic_quartic() -> MetricSpec {
    let n = 2;
    let t = form_to_tensor(
        n,
        4,
        &[
            (vec![4, 0], poly(n, &[(&[0, 0], 1.0), (&[1, 0], 0.3), (&[0, 2], 0.2)])),
            (vec![0, 4], poly(n, &[(&[0, 0], 1.0), (&[1, 1], -0.2)])),
            (vec![2, 2], poly(n, &[(&[0, 0], 0.8), (&[0, 1], 0.4)])),
            (vec![3, 1], poly(n, &[(&[1, 0], 0.25)])),
        ],
    );
    MetricSpec::new(t, MetricSpec::unit_box(n)).expect("valid spec")
}

/// A non-flat Riemannian metric in two dimensions.
pub fn curved_riemannian() -> MetricSpec {
    let n = 2;
    let mut b = SymCoeffTensor::zeros(n, 2);
    b.set(&[0, 0], poly(n, &[(&[0, 0], 1.0), (&[0, 2], 0.5)])).expect("in range");
    b.set(&[0, 1], poly(n, &[(&[1, 0], 0.2)])).expect("in range");
    b.set(&[1, 1], poly(n, &[(&[0, 0], 1.0), (&[2, 0], 0.3)])).expect("in range");
    MetricSpec::new(b, MetricSpec::unit_box(n)).expect("valid spec")
}

/// `T = (b_ij y^i y^j)^2` for the curved Riemannian `b`: a quartic with Riemannian `F`.
pub fn quartic_squared_riemannian() -> MetricSpec {
    curved_riemannian().squared().expect("valid spec")
}

/// Flat `γ = δ` and constant `α = c_ij y^i y^j`, the ingredients of a constructed quartic.
pub fn flat_construction_parts() -> (MetricSpec, SymCoeffTensor) {
    let n = 2;
    let mut c = SymCoeffTensor::zeros(n, 2);
    c.set(&[0, 0], PolyScalar::constant(n, 1.0)).expect("in range");
    c.set(&[0, 1], PolyScalar::constant(n, 0.3)).expect("in range");
    c.set(&[1, 1], PolyScalar::constant(n, 2.0)).expect("in range");
    (euclidean(n), c)
}

/// Product metric `γ = (dx^0)^2 + (1 + (x^2)^2)(dx^1)^2 + (dx^2)^2` and the parallel `α = (y^0)^2`.
pub fn product_construction_parts() -> (MetricSpec, SymCoeffTensor) {
    let n = 3;
    let mut g = SymCoeffTensor::zeros(n, 2);
    g.set(&[0, 0], PolyScalar::constant(n, 1.0)).expect("in range");
    g.set(&[1, 1], poly(n, &[(&[0, 0, 0], 1.0), (&[0, 0, 2], 1.0)])).expect("in range");
    g.set(&[2, 2], PolyScalar::constant(n, 1.0)).expect("in range");
    let mut alpha = SymCoeffTensor::zeros(n, 2);
    alpha.set(&[0, 0], PolyScalar::constant(n, 1.0)).expect("in range");
    (MetricSpec::new(g, MetricSpec::unit_box(n)).expect("valid spec"), alpha)
}

/// `sym(α ⊗ γ)` carrying `γ`'s scale and chart; the constructed metric `T̄ = α γ`.
pub fn product_metric(gamma: &MetricSpec, alpha: &SymCoeffTensor) -> crate::error::Result<MetricSpec> {
    let coeffs = alpha.sym_product(gamma.coefficients())?;
    MetricSpec::with_scale(coeffs, gamma.scale().cloned(), gamma.chart_box().to_vec())
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize, max_degree: u32, magnitude: f64) -> PolyScalar {
    let mut p = PolyScalar::zero();
    for k in 0..n {
        for d in 1..=max_degree {
            let mut e = vec![0u32; n];
            e[k] = d;
            let c = rng.random_range(-magnitude..magnitude);
            p = &p + &PolyScalar::from_monomials([Monomial { exponents: e, coefficient: c }]);
        }
    }
    if n >= 2 {
        let mut e = vec![0u32; n];
        e[0] = 1;
        e[1] = 1;
        let c = rng.random_range(-magnitude..magnitude);
        p = &p + &PolyScalar::from_monomials([Monomial { exponents: e, coefficient: c }]);
    }
    p
}

/// Seeded Riemannian metric `2δ + small polynomial perturbation` on `[-0.5, 0.5]^n`.
pub fn random_riemannian(seed: u64, n: usize) -> MetricSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = SymCoeffTensor::zeros(n, 2);
    for i in 0..n {
        for j in i..n {
            let base = if i == j { 2.0 } else { rng.random_range(-0.2..0.2) };
            let p = &PolyScalar::constant(n, base) + &random_poly(&mut rng, n, 2, 0.3);
            a.set(&[i, j], p).expect("in range");
        }
    }
    MetricSpec::new(a, vec![(-0.5, 0.5); n]).expect("valid spec")
}

/// Seeded quartic: `sym(b ⊗ b)` for a random Riemannian `b` plus a random quartic perturbation.
pub fn random_quartic(seed: u64, n: usize) -> MetricSpec {
    let base = random_riemannian(seed, n).squared().expect("valid spec");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut a = base.coefficients().clone();
    for key in MultiIndex::all(n, 4) {
        let bump = &PolyScalar::constant(n, rng.random_range(-0.15..0.15)) + &random_poly(&mut rng, n, 1, 0.15);
        let prev = a.get(key.indices()).expect("in range");
        a.set(key.indices(), &prev + &bump).expect("in range");
    }
    MetricSpec::new(a, vec![(-0.5, 0.5); n]).expect("valid spec")
}

/// Seeded cubic form with position dependence (odd order, indefinite `T`).
pub fn random_cubic(seed: u64, n: usize) -> MetricSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = SymCoeffTensor::zeros(n, 3);
    for key in MultiIndex::all(n, 3) {
        let diag = key.indices().iter().all(|&i| i == key.indices()[0]);
        let c = if diag { 1.0 } else { rng.random_range(-0.3..0.3) };
        let p = &PolyScalar::constant(n, c) + &random_poly(&mut rng, n, 1, 0.2);
        a.set(key.indices(), p).expect("in range");
    }
    MetricSpec::new(a, vec![(-0.5, 0.5); n]).expect("valid spec")
}

/// A named corpus entry.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub spec: MetricSpec,
}

/// The bundled corpus, in a fixed order.
pub fn bundled() -> Vec<CorpusEntry> {
    let (flat_gamma, flat_alpha) = flat_construction_parts();
    let (prod_gamma, prod_alpha) = product_construction_parts();
    vec![
        CorpusEntry { name: "euclidean", spec: euclidean(2) },
        CorpusEntry { name: "berwald_moor", spec: berwald_moor(4) },
        CorpusEntry { name: "beltrami", spec: beltrami(2) },
        CorpusEntry { name: "generic_quartic", spec: generic_quartic() },
        CorpusEntry { name: "quartic_squared_riemannian", spec: quartic_squared_riemannian() },
        CorpusEntry {
            name: "constructed_flat",
            spec: product_metric(&flat_gamma, &flat_alpha).expect("valid construction"),
        },
        CorpusEntry {
            name: "constructed_product",
            spec: product_metric(&prod_gamma, &prod_alpha).expect("valid construction"),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_round_trip() {
        let n = 2;
        let t = form_to_tensor(n, 4, &[(vec![2, 2], PolyScalar::constant(n, 6.0)), (vec![3, 1], PolyScalar::constant(n, 4.0))]);
        let num = t.eval_at(&[0.0, 0.0]).unwrap();
        let y = [0.7f64, -1.3];
        let expect = 6.0 * y[0] * y[0] * y[1] * y[1] + 4.0 * y[0].powi(3) * y[1];
        assert!((num.contract_all(&y).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn beltrami_matches_closed_form() {
        let spec = beltrami(2);
        let x = [0.3, -0.2];
        let a = spec.coeffs_at(&x).unwrap();
        let q = 1.0 - (x[0] * x[0] + x[1] * x[1]);
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { 1.0 } else { 0.0 };
                let expect = d / q + x[i] * x[j] / (q * q);
                assert!((a.get(&[i, j]).unwrap() - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_families_are_seeded() {
        assert_eq!(random_quartic(5, 3), random_quartic(5, 3));
        assert_ne!(random_quartic(5, 3), random_quartic(6, 3));
        assert_eq!(random_riemannian(1, 2).order(), 2);
        assert_eq!(random_cubic(1, 2).order(), 3);
    }

    #[test]
    fn squared_metric_has_same_finsler_function() {
        let b = curved_riemannian();
        let q = quartic_squared_riemannian();
        let x = [0.4, -0.1];
        let y = [0.2, 0.9];
        let tb = b.coeffs_at(&x).unwrap().contract_all(&y).unwrap();
        let tq = q.coeffs_at(&x).unwrap().contract_all(&y).unwrap();
        assert!((tb * tb - tq).abs() < 1e-13);
    }
}
