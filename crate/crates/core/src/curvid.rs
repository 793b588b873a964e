//! Algebraic curvature tensors built from `g` and `J`: `π₁`, `π₂`, `Ψ(Q)`,
//! the `Q` tensor of a curvature operator, and the residuals of the
//! constant-antiholomorphic-curvature identity.
//!
//! Every array here is a component array in one fixed basis described by a
//! [`FrameMetric`]. `π₁`, `π₂` and `Ψ` are written for arbitrary `(g, J)`;
//! traces assume the basis is orthonormal.

use ndarray::{Array2, Array4};
use serde::Serialize;
use thiserror::Error;

use crate::rng::{gaussian_vector, StreamRng};
use crate::tensor::{frobenius, FrameMetric, Tensor2, Tensor4};

/// Largest tolerated `|Q(JX,JY) − Q(Y,X)|` on basis vectors.
pub const ADMISSIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum CurvError {
    #[error("Q violates Q(JX,JY) = Q(Y,X) by {defect:e} (tolerance {ADMISSIBILITY_TOL:e})")]
    NotAdmissible { defect: f64 },
    #[error("the π-basis fit needs complex dimension at least 3, got {n}")]
    DimensionTooSmall { n: usize },
    #[error("Gram system of π₁, π₂ is singular (determinant {det:e})")]
    SingularGram { det: f64 },
}

/// `π₁(X,Y,Z,U) = g(Y,Z)g(X,U) − g(X,Z)g(Y,U)`.
pub fn pi1(fm: &FrameMetric) -> Tensor4 {
    let g = &fm.g;
    let d = fm.dim();
    Array4::from_shape_fn((d, d, d, d), |(x, y, z, u)| {
        g[[y, z]] * g[[x, u]] - g[[x, z]] * g[[y, u]]
    })
}

/// `π₂(X,Y,Z,U) = g(Y,JZ)g(X,JU) − g(X,JZ)g(Y,JU) − 2g(X,JY)g(Z,JU)`.
pub fn pi2(fm: &FrameMetric) -> Tensor4 {
    let w = fm.omega();
    let d = fm.dim();
    Array4::from_shape_fn((d, d, d, d), |(x, y, z, u)| {
        w[[y, z]] * w[[x, u]] - w[[x, z]] * w[[y, u]] - 2.0 * w[[x, y]] * w[[z, u]]
    })
}

/// `max_{a,b} |Q(JE_a,JE_b) − Q(E_b,E_a)|`.
pub fn admissibility_defect(q: &Tensor2, fm: &FrameMetric) -> f64 {
    let j = &fm.j;
    let lhs = j.t().dot(q).dot(j);
    lhs.iter().zip(q.t().iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// A bilinear form with the symmetry `Q(JX,JY) = Q(Y,X)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QTensor {
    q: Tensor2,
}

impl QTensor {
    pub fn new(q: Tensor2, fm: &FrameMetric) -> Result<Self, CurvError> {
        let defect = admissibility_defect(&q, fm);
        if defect > ADMISSIBILITY_TOL {
            return Err(CurvError::NotAdmissible { defect });
        }
        Ok(QTensor { q })
    }

    pub fn components(&self) -> &Tensor2 {
        &self.q
    }

    pub fn into_components(self) -> Tensor2 {
        self.q
    }

    /// Trace in an orthonormal basis.
    pub fn trace(&self) -> f64 {
        self.q.diag().sum()
    }

    /// `Q − λg` in max norm, minimised over λ by the trace.
    pub fn distance_from_multiple_of(&self, g: &Tensor2) -> (f64, f64) {
        let lambda = self.trace() / g.diag().sum();
        let dev = self
            .q
            .iter()
            .zip(g.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - lambda * b).abs()));
        (lambda, dev)
    }
}

/// `Q = (M + JᵀMᵀJ)/2` for a Gaussian `M`; admissible in any basis where `J` is orthogonal.
pub fn random_admissible_q(rng: &mut StreamRng, fm: &FrameMetric) -> QTensor {
    let d = fm.dim();
    let m = Array2::from_shape_vec((d, d), gaussian_vector(rng, d * d).to_vec()).expect("square");
    let j = &fm.j;
    let q = (&m + &j.t().dot(&m.t()).dot(j)) * 0.5;
    QTensor::new(q, fm).expect("symmetrised Q is admissible")
}

fn psi_raw(q: &Tensor2, fm: &FrameMetric) -> Tensor4 {
    let w = fm.omega();
    let qj = q.dot(&fm.j);
    let d = fm.dim();
    Array4::from_shape_fn((d, d, d, d), |(x, y, z, u)| {
        w[[y, z]] * qj[[x, u]] - w[[x, z]] * qj[[y, u]] - 2.0 * w[[x, y]] * qj[[z, u]] + w[[x, u]] * qj[[y, z]]
            - w[[y, u]] * qj[[x, z]]
            - 2.0 * w[[z, u]] * qj[[x, y]]
    })
}

/// The six-term construction `Ψ(Q)`.
pub fn psi(q: &QTensor, fm: &FrameMetric) -> Tensor4 {
    psi_raw(&q.q, fm)
}

/// `Q = ρ*/(2(n+1)) − (τ* + 2(n+1)ν)/(4(n+1)(2n+1))·g`.
///
/// `ρ*` has the admissible symmetry for any almost Hermitian curvature, so
/// the result is not re-checked here.
pub fn q_from_star_ricci(star_ricci: &Tensor2, star_scalar: f64, nu: f64, n: usize, g: &Tensor2) -> QTensor {
    let nf = n as f64;
    let a = 1.0 / (2.0 * (nf + 1.0));
    let b = (star_scalar + 2.0 * (nf + 1.0) * nu) / (4.0 * (nf + 1.0) * (2.0 * nf + 1.0));
    QTensor {
        q: star_ricci * a - g * b,
    }
}

/// `tr Q = (τ* − 2nν)/(2(2n+1))`.
pub fn trace_q_formula(star_scalar: f64, nu: f64, n: usize) -> f64 {
    let nf = n as f64;
    (star_scalar - 2.0 * nf * nu) / (2.0 * (2.0 * nf + 1.0))
}

/// `R = Ψ(Q) + νπ₁`.
pub fn synthetic_r(q: &QTensor, nu: f64, fm: &FrameMetric) -> Tensor4 {
    psi(q, fm) + pi1(fm) * nu
}

/// Relative residuals of the two equivalent forms of the characterization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub residual25: f64,
    pub residual26: f64,
    pub nu_used: f64,
}

/// Residuals of
/// `R − Ψ(ρ*)/(2(n+1)) + τ*π₂/(2(n+1)(2n+1)) = ν(π₁ − π₂/(2n+1))` and of
/// `R = Ψ(Q) + νπ₁`, each as `‖LHS − RHS‖ / (1 + ‖R‖)`.
pub fn residual_constant_antiholo(
    r: &Tensor4,
    star_ricci: &Tensor2,
    star_scalar: f64,
    nu: f64,
    fm: &FrameMetric,
) -> IdentityResidual {
    let n = fm.n();
    let nf = n as f64;
    let p1 = pi1(fm);
    let p2 = pi2(fm);
    let scale = 1.0 + frobenius(r);

    let lhs = r - &(psi_raw(star_ricci, fm) / (2.0 * (nf + 1.0)))
        + &p2 * (star_scalar / (2.0 * (nf + 1.0) * (2.0 * nf + 1.0)));
    let rhs = (&p1 - &(&p2 / (2.0 * nf + 1.0))) * nu;
    let residual25 = frobenius(&(lhs - rhs)) / scale;

    let q = q_from_star_ricci(star_ricci, star_scalar, nu, n, &fm.g);
    let residual26 = frobenius(&(r - &synthetic_r(&q, nu, fm))) / scale;
    IdentityResidual {
        residual25,
        residual26,
        nu_used: nu,
    }
}

/// Least-squares coefficients of `R ≈ fπ₁ + hπ₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct PiFit {
    pub f: f64,
    pub h: f64,
    /// `‖R − fπ₁ − hπ₂‖ / (1 + ‖R‖)`.
    pub residual: f64,
}

fn inner(a: &Tensor4, b: &Tensor4) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn fit_pi_basis(r: &Tensor4, fm: &FrameMetric) -> Result<PiFit, CurvError> {
    let n = fm.n();
    if n < 3 {
        return Err(CurvError::DimensionTooSmall { n });
    }
    let p1 = pi1(fm);
    let p2 = pi2(fm);
    let (a11, a12, a22) = (inner(&p1, &p1), inner(&p1, &p2), inner(&p2, &p2));
    let (b1, b2) = (inner(r, &p1), inner(r, &p2));
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-12 * a11 * a22 {
        return Err(CurvError::SingularGram { det });
    }
    let f = (b1 * a22 - b2 * a12) / det;
    let h = (a11 * b2 - a12 * b1) / det;
    let residual = frobenius(&(r - &(p1 * f) - &(p2 * h))) / (1.0 + frobenius(r));
    Ok(PiFit { f, h, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::tensor::{max_abs, ricci_traces, symmetry_defects};
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use proptest::prelude::*;

    fn unit(d: usize, i: usize) -> Array1<f64> {
        let mut v = Array1::zeros(d);
        v[i] = 1.0;
        v
    }

    fn k(r: &Tensor4, x: &Array1<f64>, y: &Array1<f64>) -> f64 {
        crate::tensor::eval4(r, x, y, y, x)
    }

    /// Gram–Schmidt of two Gaussian vectors against `{X, JX}`, done by hand.
    fn antiholomorphic_pair(rng: &mut StreamRng, fm: &FrameMetric) -> (Array1<f64>, Array1<f64>) {
        let d = fm.dim();
        let mut x = gaussian_vector(rng, d);
        x /= x.dot(&x).sqrt();
        let jx = fm.j.dot(&x);
        let mut y = gaussian_vector(rng, d);
        y = &y - &(&x * y.dot(&x));
        y = &y - &(&jx * y.dot(&jx));
        y /= y.dot(&y).sqrt();
        (x, y)
    }

    #[test]
    fn pi_values_on_special_pairs() {
        let fm = FrameMetric::standard(3);
        let (p1, p2) = (pi1(&fm), pi2(&fm));
        let (x, y, jx) = (unit(6, 0), unit(6, 1), unit(6, 3));
        assert_eq!(k(&p1, &x, &y), 1.0);
        assert_eq!(k(&p2, &x, &y), 0.0);
        assert_eq!(k(&p1, &x, &jx), 1.0);
        assert_eq!(k(&p2, &x, &jx), 3.0);
        assert_eq!(symmetry_defects(&p2).max(), 0.0);
    }

    #[test]
    fn psi_of_metric_is_twice_pi2() {
        let fm = FrameMetric::standard(3);
        let q = QTensor::new(fm.g.clone(), &fm).unwrap();
        assert!(max_abs(&(psi(&q, &fm) - pi2(&fm) * 2.0)) < 1e-15);
        let r = synthetic_r(&q, 0.0, &fm);
        assert_abs_diff_eq!(k(&r, &unit(6, 0), &unit(6, 3)), 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k(&r, &unit(6, 0), &unit(6, 1)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn inadmissible_q_is_rejected() {
        let fm = FrameMetric::standard(2);
        let mut q = Array2::<f64>::eye(4);
        q[[0, 1]] = 1.0;
        assert!(matches!(QTensor::new(q, &fm), Err(CurvError::NotAdmissible { .. })));
    }

    #[test]
    fn flat_and_space_form_residuals() {
        let fm = FrameMetric::standard(3);
        let zero = Array4::zeros((6, 6, 6, 6));
        let res = residual_constant_antiholo(&zero, &Array2::zeros((6, 6)), 0.0, 0.0, &fm);
        assert_eq!(res.residual25, 0.0);
        assert_eq!(res.residual26, 0.0);

        let r = (pi1(&fm) + pi2(&fm)) * 1.0;
        let tr = ricci_traces(&r, &fm);
        let res = residual_constant_antiholo(&r, &tr.star_ricci, tr.star_scalar, 1.0, &fm);
        assert!(res.residual25 < 1e-14);
        assert!(res.residual26 < 1e-14);
        let q = q_from_star_ricci(&tr.star_ricci, tr.star_scalar, 1.0, 3, &fm.g);
        let (lambda, dev) = q.distance_from_multiple_of(&fm.g);
        assert_abs_diff_eq!(lambda, 0.5, epsilon = 1e-14);
        assert!(dev < 1e-14);
        assert_abs_diff_eq!(q.trace(), 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(q.trace(), trace_q_formula(tr.star_scalar, 1.0, 3), epsilon = 1e-13);
    }

    #[test]
    fn constant_curvature_traces() {
        let fm = FrameMetric::standard(3);
        let r = pi1(&fm) * 2.0;
        let tr = ricci_traces(&r, &fm);
        assert_abs_diff_eq!(tr.scalar, 60.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tr.star_scalar, 12.0, epsilon = 1e-12);
        let q = q_from_star_ricci(&tr.star_ricci, tr.star_scalar, 2.0, 3, &fm.g);
        assert_abs_diff_eq!(q.trace(), 0.0, epsilon = 1e-13);
        assert!(max_abs(q.components()) < 1e-13);
    }

    #[test]
    fn pi_fit_recovers_coefficients() {
        let fm = FrameMetric::standard(3);
        let fit = fit_pi_basis(&(pi1(&fm) * 2.0), &fm).unwrap();
        assert_abs_diff_eq!(fit.f, 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(fit.h, 0.0, epsilon = 1e-13);
        assert!(fit.residual < 1e-14);
        let fit = fit_pi_basis(&(pi1(&fm) + pi2(&fm)), &fm).unwrap();
        assert_abs_diff_eq!(fit.f, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(fit.h, 1.0, epsilon = 1e-13);
        assert_eq!(
            fit_pi_basis(&pi1(&FrameMetric::standard(2)), &FrameMetric::standard(2)),
            Err(CurvError::DimensionTooSmall { n: 2 })
        );
    }

    #[test]
    fn antiholomorphic_planes_see_only_nu() {
        let fm = FrameMetric::standard(3);
        let mut rng = stream_rng(5, 0);
        let q = random_admissible_q(&mut rng, &fm);
        let r = synthetic_r(&q, 1.0, &fm);
        let mut holo = Vec::new();
        for _ in 0..50 {
            let (x, y) = antiholomorphic_pair(&mut rng, &fm);
            assert_abs_diff_eq!(k(&r, &x, &y), 1.0, epsilon = 1e-10);
            holo.push(k(&r, &x, &fm.j.dot(&x)));
        }
        let spread = holo.iter().cloned().fold(f64::MIN, f64::max) - holo.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 1e-2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn psi_is_linear_and_algebraic(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64, n in 2usize..5) {
            let fm = FrameMetric::standard(n);
            let mut rng = stream_rng(seed, 0);
            let q1 = random_admissible_q(&mut rng, &fm);
            let q2 = random_admissible_q(&mut rng, &fm);
            let combo = QTensor::new(q1.components() * a + q2.components() * b, &fm).unwrap();
            let lhs = psi(&combo, &fm);
            let rhs = psi(&q1, &fm) * a + psi(&q2, &fm) * b;
            let scale = 1.0 + max_abs(&lhs);
            prop_assert!(max_abs(&(&lhs - &rhs)) < 1e-12 * scale);
            let defects = symmetry_defects(&lhs);
            prop_assert!(defects.max() < 1e-12 * scale);
            for _ in 0..8 {
                let (x, y) = antiholomorphic_pair(&mut rng, &fm);
                prop_assert!(k(&lhs, &x, &y).abs() < 1e-10 * scale);
            }
        }

        #[test]
        fn residual_forms_agree(seed in any::<u64>(), nu in -2.0..2.0f64, n in 2usize..5, noise in 0.0..1.0f64) {
            let fm = FrameMetric::standard(n);
            let mut rng = stream_rng(seed, 1);
            let q = random_admissible_q(&mut rng, &fm);
            let mut r = synthetic_r(&q, nu, &fm);
            // A(Y,Z)A(X,U) − A(X,Z)A(Y,U) for symmetric A: an algebraic curvature
            // tensor with non-constant antiholomorphic curvature
            let d = fm.dim();
            let m = Array2::from_shape_vec((d, d), gaussian_vector(&mut rng, d * d).to_vec()).unwrap();
            let a = &m + &m.t();
            r = r + Array4::from_shape_fn((d, d, d, d), |(x, y, z, u)| a[[y, z]] * a[[x, u]] - a[[x, z]] * a[[y, u]]) * noise;
            let tr = ricci_traces(&r, &fm);
            for trial_nu in [nu, nu + 0.3] {
                let res = residual_constant_antiholo(&r, &tr.star_ricci, tr.star_scalar, trial_nu, &fm);
                prop_assert!((res.residual25 - res.residual26).abs() < 1e-10);
            }
        }

        #[test]
        fn synthetic_tensors_satisfy_their_identity(seed in any::<u64>(), nu in -2.0..2.0f64, n in 2usize..5) {
            let fm = FrameMetric::standard(n);
            let mut rng = stream_rng(seed, 2);
            let q = random_admissible_q(&mut rng, &fm);
            let r = synthetic_r(&q, nu, &fm);
            let tr = ricci_traces(&r, &fm);
            let res = residual_constant_antiholo(&r, &tr.star_ricci, tr.star_scalar, nu, &fm);
            prop_assert!(res.residual25 < 1e-12);
            prop_assert!(res.residual26 < 1e-12);
        }
    }
}
