//! Component arrays, basis changes and the pointwise algebra shared by the
//! curvature modules.

use ndarray::{Array1, Array2, Array3, Array4, Array5, ArrayD, Dimension, IxDyn, LinalgScalar};
use serde::{Deserialize, Serialize};

pub type Tensor2 = Array2<f64>;
pub type Tensor3 = Array3<f64>;
pub type Tensor4 = Array4<f64>;
pub type Tensor5 = Array5<f64>;

/// The standard complex structure on R^{2n}: `J e_a = e_{n+a}`, `J e_{n+a} = -e_a`.
pub fn standard_complex_structure(n: usize) -> Array2<f64> {
    let mut j = Array2::zeros((2 * n, 2 * n));
    for a in 0..n {
        j[[n + a, a]] = 1.0;
        j[[a, n + a]] = -1.0;
    }
    j
}

/// Metric and complex structure components in a fixed basis.
///
/// In an adapted orthonormal frame this is `(I, J0)` up to round-off; the
/// algebraic constructions accept any pair so tests can feed other bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetric {
    pub g: Array2<f64>,
    pub j: Array2<f64>,
}

impl FrameMetric {
    pub fn new(g: Array2<f64>, j: Array2<f64>) -> Self {
        assert_eq!(g.dim(), j.dim(), "g and J must have the same shape");
        assert!(g.nrows().is_multiple_of(2), "dimension must be even");
        FrameMetric { g, j }
    }

    pub fn standard(n: usize) -> Self {
        FrameMetric {
            g: Array2::eye(2 * n),
            j: standard_complex_structure(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn n(&self) -> usize {
        self.dim() / 2
    }

    pub fn inner(&self, x: &Array1<f64>, y: &Array1<f64>) -> f64 {
        x.dot(&self.g.dot(y))
    }

    pub fn norm(&self, x: &Array1<f64>) -> f64 {
        self.inner(x, x).sqrt()
    }

    pub fn apply_j(&self, x: &Array1<f64>) -> Array1<f64> {
        self.j.dot(x)
    }

    /// `ω_ab = g(E_a, J E_b)`.
    pub fn omega(&self) -> Array2<f64> {
        self.g.dot(&self.j)
    }
}

/// Contracts every slot of `t` with `m`: `out[A..] = Σ t[a..] m[a,A]..`.
pub fn contract_slots<A: LinalgScalar>(t: &ArrayD<A>, m: &Array2<A>) -> ArrayD<A> {
    let per_slot: Vec<&Array2<A>> = vec![m; t.ndim()];
    contract_each_slot(t, &per_slot)
}

/// Contracts slot `s` of `t` with `ms[s]`.
pub fn contract_each_slot<A: LinalgScalar>(t: &ArrayD<A>, ms: &[&Array2<A>]) -> ArrayD<A> {
    assert_eq!(ms.len(), t.ndim(), "one matrix per slot");
    let mut cur = t.clone();
    for (slot, m) in ms.iter().enumerate() {
        assert_eq!(m.nrows(), cur.shape()[slot], "slot {slot} size mismatch");
        let mut shape = cur.shape().to_vec();
        shape[slot] = m.ncols();
        let src = &cur;
        let next = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
            let mut from = idx.clone();
            let mut acc = A::zero();
            for c in 0..m.nrows() {
                from[slot] = c;
                acc = acc + src[&from] * m[[c, idx[slot]]];
            }
            acc
        });
        cur = next;
    }
    cur
}

/// Components `T(E_a, E_b, ...)` of a covariant tensor in the basis whose
/// vectors are the columns of `basis`.
pub fn change_basis<D: Dimension>(t: &ndarray::Array<f64, D>, basis: &Array2<f64>) -> ndarray::Array<f64, D> {
    let dynamic = t.clone().into_dyn();
    contract_slots(&dynamic, basis)
        .into_dimensionality::<D>()
        .expect("contraction preserves rank")
}

pub fn frobenius<D: Dimension>(t: &ndarray::Array<f64, D>) -> f64 {
    t.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs<D: Dimension>(t: &ndarray::Array<f64, D>) -> f64 {
    t.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Value of the quadrilinear form `T(x, y, z, u)`.
pub fn eval4(t: &Tensor4, x: &Array1<f64>, y: &Array1<f64>, z: &Array1<f64>, u: &Array1<f64>) -> f64 {
    let d = x.len();
    let std;
    let flat = match t.as_slice() {
        Some(s) => s,
        None => {
            std = t.as_standard_layout();
            std.as_slice().expect("standard layout")
        }
    };
    let (x, y) = (x.to_vec(), y.to_vec());
    let (z, u) = (z.to_vec(), u.to_vec());
    let mut acc = 0.0;
    for (a, &xa) in x.iter().enumerate() {
        if xa == 0.0 {
            continue;
        }
        for (b, &yb) in y.iter().enumerate() {
            if yb == 0.0 {
                continue;
            }
            let xy = xa * yb;
            let block = &flat[(a * d + b) * d * d..(a * d + b + 1) * d * d];
            for (row, &zc) in block.chunks_exact(d).zip(&z) {
                let inner = row.iter().zip(&u).fold(0.0, |s, (t, ue)| s + t * ue);
                acc += xy * zc * inner;
            }
        }
    }
    acc
}

/// Frobenius norms of the defects of the algebraic curvature symmetries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDefects {
    pub skew_first_pair: f64,
    pub skew_second_pair: f64,
    pub pair_exchange: f64,
    pub first_bianchi: f64,
}

impl SymmetryDefects {
    pub fn max(&self) -> f64 {
        self.skew_first_pair
            .max(self.skew_second_pair)
            .max(self.pair_exchange)
            .max(self.first_bianchi)
    }
}

pub fn symmetry_defects(r: &Tensor4) -> SymmetryDefects {
    let d = r.shape()[0];
    let (mut s12, mut s34, mut pe, mut b1) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let v = r[[i, j, k, l]];
                    s12 += (v + r[[j, i, k, l]]).powi(2);
                    s34 += (v + r[[i, j, l, k]]).powi(2);
                    pe += (v - r[[k, l, i, j]]).powi(2);
                    b1 += (v + r[[j, k, i, l]] + r[[k, i, j, l]]).powi(2);
                }
            }
        }
    }
    SymmetryDefects {
        skew_first_pair: s12.sqrt(),
        skew_second_pair: s34.sqrt(),
        pair_exchange: pe.sqrt(),
        first_bianchi: b1.sqrt(),
    }
}

/// Ricci and *-Ricci traces of a (0,4) tensor given in an orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicciTraces {
    pub ricci: Tensor2,
    pub scalar: f64,
    pub star_ricci: Tensor2,
    pub star_scalar: f64,
}

/// `ρ(X,Y) = Σ_i R(e_i,X,Y,e_i)` and `ρ*(X,Y) = Σ_i R(e_i,X,JY,Je_i)`,
/// summed over the basis vectors, which must be orthonormal.
pub fn ricci_traces(r: &Tensor4, fm: &FrameMetric) -> RicciTraces {
    let d = fm.dim();
    let j = &fm.j;
    let ricci = Array2::from_shape_fn((d, d), |(a, b)| (0..d).map(|i| r[[i, a, b, i]]).sum());
    let star_ricci = Array2::from_shape_fn((d, d), |(a, b)| {
        let mut acc = 0.0;
        for i in 0..d {
            for c in 0..d {
                if j[[c, b]] == 0.0 {
                    continue;
                }
                for e in 0..d {
                    acc += r[[i, a, c, e]] * j[[c, b]] * j[[e, i]];
                }
            }
        }
        acc
    });
    let scalar = ricci.diag().sum();
    let star_scalar = star_ricci.diag().sum();
    RicciTraces {
        ricci,
        scalar,
        star_ricci,
        star_scalar,
    }
}
