//! Orthonormal J-adapted frames, the special complex basis
//! `Z_α = (e_α − iJe_α)/2`, and complex components of real tensors.

use ndarray::{Array1, Array2, ArrayD};
use num_complex::Complex64;
use thiserror::Error;

use crate::manifold::{ChartManifold, ManifoldError};
use crate::tensor::{contract_each_slot, FrameMetric};

/// Projected norms below this are treated as linear dependence.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame construction broke down: only {found} of {needed} directions are independent")]
    Breakdown { found: usize, needed: usize },
    #[error("pattern has {pattern} slots but the tensor has order {order}")]
    PatternMismatch { pattern: usize, order: usize },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Columns `e_1..e_n, Je_1..Je_n` in coordinate components.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedFrame {
    n: usize,
    columns: Array2<f64>,
}

impl AdaptedFrame {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// The `2n × 2n` matrix whose columns are the frame vectors.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.columns
    }

    pub fn vector(&self, a: usize) -> Array1<f64> {
        self.columns.column(a).to_owned()
    }

    /// `max |g(E_a, E_b) − δ_ab|`.
    pub fn orthonormality_defect(&self, g: &Array2<f64>) -> f64 {
        let gram = self.columns.t().dot(g).dot(&self.columns);
        let mut worst: f64 = 0.0;
        for ((a, b), v) in gram.indexed_iter() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
        worst
    }

    /// Metric and complex structure in this frame: `(EᵀgE, EᵀgJE)`, using
    /// `E⁻¹ = Eᵀg` for an orthonormal frame.
    pub fn frame_metric(&self, g: &Array2<f64>, j: &Array2<f64>) -> FrameMetric {
        let e = &self.columns;
        let etg = e.t().dot(g);
        FrameMetric::new(etg.dot(e), etg.dot(j).dot(e))
    }
}

/// J-adapted Gram–Schmidt on the coordinate directions in index order.
pub fn adapted_frame(g: &Array2<f64>, j: &Array2<f64>) -> Result<AdaptedFrame, FrameError> {
    let dim = g.nrows();
    let n = dim / 2;
    let inner = |x: &Array1<f64>, y: &Array1<f64>| x.dot(&g.dot(y));
    let mut unbarred: Vec<Array1<f64>> = Vec::with_capacity(n);
    let mut accepted: Vec<Array1<f64>> = Vec::with_capacity(dim);
    for k in 0..dim {
        if unbarred.len() == n {
            break;
        }
        let mut v = Array1::zeros(dim);
        v[k] = 1.0;
        for _ in 0..2 {
            for w in &accepted {
                let c = inner(&v, w);
                v.scaled_add(-c, w);
            }
        }
        let norm = inner(&v, &v).max(0.0).sqrt();
        if norm < PIVOT_TOL {
            continue;
        }
        v /= norm;
        let jv = j.dot(&v);
        accepted.push(v.clone());
        accepted.push(jv);
        unbarred.push(v);
    }
    if unbarred.len() < n {
        return Err(FrameError::Breakdown {
            found: unbarred.len(),
            needed: n,
        });
    }
    let mut columns = Array2::zeros((dim, dim));
    for (a, e) in unbarred.iter().enumerate() {
        columns.column_mut(a).assign(e);
        columns.column_mut(n + a).assign(&j.dot(e));
    }
    Ok(AdaptedFrame { n, columns })
}

pub fn adapted_frame_at(m: &ChartManifold, p: &[f64]) -> Result<AdaptedFrame, FrameError> {
    let g = m.metric_at(p)?;
    let j = m.complex_structure_at(p)?;
    adapted_frame(&g, &j)
}

/// Columns `Z_1..Z_n` followed by `Z_1̄..Z_n̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexBasis {
    n: usize,
    columns: Array2<Complex64>,
}

impl ComplexBasis {
    /// Built from real vectors `e_α` (columns `0..n`) and `Je_α` (columns `n..2n`).
    pub fn from_real_columns(e: &Array2<f64>) -> Self {
        let dim = e.nrows();
        let n = e.ncols() / 2;
        let columns = Array2::from_shape_fn((dim, 2 * n), |(i, c)| {
            let (a, sign) = if c < n { (c, -1.0) } else { (c - n, 1.0) };
            Complex64::new(0.5 * e[[i, a]], 0.5 * sign * e[[i, n + a]])
        });
        ComplexBasis { n, columns }
    }

    /// Coordinate components of the basis attached to `frame`.
    pub fn from_frame(frame: &AdaptedFrame) -> Self {
        Self::from_real_columns(frame.matrix())
    }

    /// Components with respect to the adapted frame itself.
    pub fn standard(n: usize) -> Self {
        Self::from_real_columns(&Array2::eye(2 * n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.columns
    }

    pub fn unbarred(&self, alpha: usize) -> Array1<Complex64> {
        self.columns.column(alpha).to_owned()
    }

    pub fn barred(&self, alpha: usize) -> Array1<Complex64> {
        self.columns.column(self.n + alpha).to_owned()
    }

    fn slot_matrix(&self, barred: bool) -> Array2<Complex64> {
        let range = if barred { self.n..2 * self.n } else { 0..self.n };
        self.columns.slice(ndarray::s![.., range]).to_owned()
    }
}

/// Components of a real tensor on the complex basis for one bar pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexComponents {
    pub pattern: Vec<bool>,
    pub values: ArrayD<Complex64>,
}

impl ComplexComponents {
    /// Components for the fully complementary pattern, which are the conjugates.
    pub fn conjugate(&self) -> ComplexComponents {
        ComplexComponents {
            pattern: self.pattern.iter().map(|b| !b).collect(),
            values: self.values.mapv(|z| z.conj()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

fn complexify(t: &ArrayD<f64>) -> ArrayD<Complex64> {
    t.mapv(|x| Complex64::new(x, 0.0))
}

/// `T(Z_{A_1}, ..., Z_{A_k})` with `pattern[s]` selecting barred vectors in slot `s`.
pub fn complex_components(
    t: &ArrayD<f64>,
    basis: &ComplexBasis,
    pattern: &[bool],
) -> Result<ComplexComponents, FrameError> {
    if pattern.len() != t.ndim() {
        return Err(FrameError::PatternMismatch {
            pattern: pattern.len(),
            order: t.ndim(),
        });
    }
    let mats: Vec<Array2<Complex64>> = pattern.iter().map(|&b| basis.slot_matrix(b)).collect();
    let refs: Vec<&Array2<Complex64>> = mats.iter().collect();
    Ok(ComplexComponents {
        pattern: pattern.to_vec(),
        values: contract_each_slot(&complexify(t), &refs),
    })
}

/// All components at once, indexed `0..2n` per slot with `n..2n` the barred vectors.
pub fn full_complex_components(t: &ArrayD<f64>, basis: &ComplexBasis) -> ArrayD<Complex64> {
    let refs: Vec<&Array2<Complex64>> = vec![&basis.columns; t.ndim()];
    contract_each_slot(&complexify(t), &refs)
}

/// Inverts [`full_complex_components`] and returns the real tensor together
/// with the largest imaginary part discarded.
pub fn reconstruct_real(full: &ArrayD<Complex64>, basis: &ComplexBasis) -> (ArrayD<f64>, f64) {
    let inv = dual_basis(basis);
    let refs: Vec<&Array2<Complex64>> = vec![&inv; full.ndim()];
    let back = contract_each_slot(full, &refs);
    let imag = back.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
    (back.mapv(|z| z.re), imag)
}

// The columns of the basis matrix B are vectors; covariant components transform
// with B, so the inverse transform contracts with B⁻¹ transposed into slot form.
fn dual_basis(basis: &ComplexBasis) -> Array2<Complex64> {
    let d = basis.columns.nrows();
    let b = nalgebra::DMatrix::from_fn(d, d, |i, j| basis.columns[[i, j]]);
    let inv = b.try_inverse().expect("complex basis is invertible");
    // out[a..] = Σ full[A..] inv[A, a]
    Array2::from_shape_fn((d, d), |(big, a)| inv[(big, a)])
}
