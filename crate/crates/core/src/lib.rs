//! Chart-level curvature engine for almost Hermitian manifolds.
//!
//! The crate evaluates a metric `g` and almost complex structure `J` given as
//! expressions in real coordinates, computes the Riemann tensor and the
//! structure tensors derived from `(g, J)` with exact jet differentiation, and
//! tests the algebraic characterization of pointwise constant antiholomorphic
//! sectional curvature.

// NaN-rejecting guards are written `!(x > tol)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvid;
pub mod expr;
pub mod frames;
pub mod jet;
pub mod manifold;
pub mod planes;
pub mod rng;
pub mod tensor;
pub mod tensorcalc;
pub mod verify;

pub use expr::{eval_jet, parse_expr, Expr};
pub use jet::Jet;

pub use manifold::{catalog_manifold, load_manifold, ChartManifold};
