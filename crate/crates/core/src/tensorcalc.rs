//! Pointwise tensor calculus from the metric and structure jets: Christoffel
//! symbols, curvature and its covariant derivative, the structure tensor
//! `F = g((∇J)·,·)` and the Nijenhuis tensor.
//!
//! Coordinate components come out of the jet pipeline; [`curvature_package`]
//! rewrites everything in the adapted orthonormal frame, where the algebra
//! downstream expects it.

use ndarray::{Array2, Array3, Array4, Array5};
use serde::Serialize;
use thiserror::Error;

use crate::frames::{adapted_frame, AdaptedFrame, FrameError};
use crate::jet::Jet;
use crate::manifold::{ChartManifold, ManifoldError};
use crate::tensor::{change_basis, ricci_traces, FrameMetric, RicciTraces, Tensor2, Tensor3, Tensor4, Tensor5};

#[derive(Debug, Error)]
pub enum CalcError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("metric is singular at {point:?} (pivot {pivot:e} in column {column})")]
    SingularMetric { point: Vec<f64>, column: usize, pivot: f64 },
}

type JetMatrix = Vec<Vec<Jet>>;

fn zero(d: usize, order: u8) -> Jet {
    Jet::constant(d, order, 0.0)
}

/// Gauss–Jordan on jets. `g` is SPD, so no pivoting is needed.
fn invert(g: &JetMatrix, point: &[f64]) -> Result<JetMatrix, CalcError> {
    let d = g.len();
    let order = g[0][0].order();
    let scale = g.iter().flatten().fold(0.0_f64, |m, x| m.max(x.value().abs()));
    let mut a: JetMatrix = g.to_vec();
    let mut inv: JetMatrix = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| Jet::constant(d, order, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..d {
        let pivot = a[col][col].value();
        if !(pivot > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
            return Err(CalcError::SingularMetric {
                point: point.to_vec(),
                column: col,
                pivot,
            });
        }
        let r = a[col][col].recip();
        for j in 0..d {
            a[col][j] = &a[col][j] * &r;
            inv[col][j] = &inv[col][j] * &r;
        }
        for row in 0..d {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            for j in 0..d {
                a[row][j] = &a[row][j] - &(&factor * &a[col][j]);
                inv[row][j] = &inv[row][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    Ok(inv)
}

#[inline]
fn i3(d: usize, a: usize, b: usize, c: usize) -> usize {
    (a * d + b) * d + c
}

#[inline]
fn i4(d: usize, a: usize, b: usize, c: usize, e: usize) -> usize {
    ((a * d + b) * d + c) * d + e
}

/// Jets of everything up to curvature at one point.
struct JetPipeline {
    d: usize,
    g: JetMatrix,
    ginv: JetMatrix,
    /// `Γ^k_{ij}` at flat index `(k, i, j)`, one order below `g`.
    gamma: Vec<Jet>,
}

impl JetPipeline {
    fn new(m: &ChartManifold, p: &[f64], order: u8) -> Result<Self, CalcError> {
        let g = m.metric_jets(p, order)?;
        let ginv = invert(&g, p)?;
        let d = g.len();
        // dg[l][i][j] = ∂_l g_ij
        let dg: Vec<JetMatrix> = (0..d)
            .map(|l| g.iter().map(|row| row.iter().map(|x| x.partial(l)).collect()).collect())
            .collect();
        let lowered: Vec<Jet> = (0..d * d * d)
            .map(|idx| {
                let (l, i, j) = (idx / (d * d), (idx / d) % d, idx % d);
                (&(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j]).scale(0.5)
            })
            .collect();
        let gamma = (0..d * d * d)
            .map(|idx| {
                let (k, i, j) = (idx / (d * d), (idx / d) % d, idx % d);
                let mut acc = zero(d, order - 1);
                for l in 0..d {
                    acc = &acc + &(&ginv[k][l] * &lowered[i3(d, l, i, j)]);
                }
                acc
            })
            .collect();
        Ok(JetPipeline { d, g, ginv, gamma })
    }

    fn christoffel(&self) -> Tensor3 {
        let d = self.d;
        Array3::from_shape_fn((d, d, d), |(k, i, j)| self.gamma[i3(d, k, i, j)].value())
    }

    /// `R_{ijkl}` jets, two orders below `g`.
    fn riemann(&self) -> Vec<Jet> {
        let d = self.d;
        let order = self.gamma[0].order() - 1;
        let gt: Vec<Jet> = self.gamma.iter().map(|x| x.truncate(order)).collect();
        let dgamma: Vec<Vec<Jet>> = self
            .gamma
            .iter()
            .map(|x| (0..d).map(|i| x.partial(i)).collect())
            .collect();
        // (1,3) tensor Rm^l_{ijk}, stored at (l, i, j, k)
        let mut rm = vec![zero(d, order); d * d * d * d];
        for l in 0..d {
            for i in 0..d {
                for j in 0..i {
                    for k in 0..d {
                        let mut acc = &dgamma[i3(d, l, j, k)][i] - &dgamma[i3(d, l, i, k)][j];
                        for m in 0..d {
                            acc = &acc + &(&gt[i3(d, l, i, m)] * &gt[i3(d, m, j, k)]);
                            acc = &acc - &(&gt[i3(d, l, j, m)] * &gt[i3(d, m, i, k)]);
                        }
                        rm[i4(d, l, j, i, k)] = -&acc;
                        rm[i4(d, l, i, j, k)] = acc;
                    }
                }
            }
        }
        let gl: Vec<Vec<Jet>> = self
            .g
            .iter()
            .map(|row| row.iter().map(|x| x.truncate(order)).collect())
            .collect();
        let mut r = vec![zero(d, order); d * d * d * d];
        for i in 0..d {
            for j in 0..i {
                for k in 0..d {
                    for l in 0..d {
                        let mut acc = zero(d, order);
                        for m in 0..d {
                            acc = &acc + &(&gl[l][m] * &rm[i4(d, m, i, j, k)]);
                        }
                        r[i4(d, j, i, k, l)] = -&acc;
                        r[i4(d, i, j, k, l)] = acc;
                    }
                }
            }
        }
        r
    }

    fn metric_value(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.d, self.d), |(i, j)| self.g[i][j].value())
    }

    fn inverse_value(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.d, self.d), |(i, j)| self.ginv[i][j].value())
    }

    fn max_metric_gradient(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for row in &self.g {
            for x in row {
                for l in 0..d {
                    worst = worst.max(x.d1(l).abs());
                }
            }
        }
        worst
    }
}

fn values4(d: usize, r: &[Jet]) -> Tensor4 {
    Array4::from_shape_fn((d, d, d, d), |(i, j, k, l)| r[i4(d, i, j, k, l)].value())
}

/// `∇_m R_{ijkl}` at `(m, i, j, k, l)` from order-1 curvature jets.
fn nabla_riemann(d: usize, r: &[Jet], gamma: &Tensor3) -> Tensor5 {
    let rv = values4(d, r);
    Array5::from_shape_fn((d, d, d, d, d), |(m, i, j, k, l)| {
        let mut v = r[i4(d, i, j, k, l)].d1(m);
        for a in 0..d {
            v -= gamma[[a, m, i]] * rv[[a, j, k, l]]
                + gamma[[a, m, j]] * rv[[i, a, k, l]]
                + gamma[[a, m, k]] * rv[[i, j, a, l]]
                + gamma[[a, m, l]] * rv[[i, j, k, a]];
        }
        v
    })
}

/// `F_{ijk} = g_{kl}(∂_i J^l_j + Γ^l_{im}J^m_j − Γ^m_{ij}J^l_m)`.
fn structure_tensor(g: &Array2<f64>, gamma: &Tensor3, jj: &JetMatrix) -> Tensor3 {
    let d = g.nrows();
    let jv = Array2::from_shape_fn((d, d), |(a, b)| jj[a][b].value());
    let mut nabla_j = Array3::<f64>::zeros((d, d, d)); // (i, l, j) = (∇_i J)^l_j
    for i in 0..d {
        for l in 0..d {
            for j in 0..d {
                let mut v = jj[l][j].d1(i);
                for m in 0..d {
                    v += gamma[[l, i, m]] * jv[[m, j]] - gamma[[m, i, j]] * jv[[l, m]];
                }
                nabla_j[[i, l, j]] = v;
            }
        }
    }
    Array3::from_shape_fn((d, d, d), |(i, j, k)| {
        (0..d).map(|l| g[[k, l]] * nabla_j[[i, l, j]]).sum()
    })
}

/// `N^i_{jk}` at `(i, j, k)`, the components of
/// `N(X,Y) = [JX,JY] − J[JX,Y] − J[X,JY] − [X,Y]` on coordinate fields.
fn nijenhuis(jj: &JetMatrix) -> Tensor3 {
    let d = jj.len();
    let jv = |a: usize, b: usize| jj[a][b].value();
    Array3::from_shape_fn((d, d, d), |(i, j, k)| {
        let mut v = 0.0;
        for a in 0..d {
            v += jv(a, j) * jj[i][k].d1(a) - jv(a, k) * jj[i][j].d1(a);
            v -= jv(i, a) * (jj[a][k].d1(j) - jj[a][j].d1(k));
        }
        v
    })
}

pub fn christoffel_at(m: &ChartManifold, p: &[f64]) -> Result<Tensor3, CalcError> {
    Ok(JetPipeline::new(m, p, 1)?.christoffel())
}

/// Coordinate components `R_{ijkl} = g(R(∂_i,∂_j)∂_k, ∂_l)`.
pub fn riemann_at(m: &ChartManifold, p: &[f64]) -> Result<Tensor4, CalcError> {
    let pipe = JetPipeline::new(m, p, 2)?;
    Ok(values4(pipe.d, &pipe.riemann()))
}

/// Coordinate components `(∇_m R)_{ijkl}` at `(m, i, j, k, l)`.
pub fn covar_deriv_riemann_at(m: &ChartManifold, p: &[f64]) -> Result<Tensor5, CalcError> {
    let pipe = JetPipeline::new(m, p, 3)?;
    Ok(nabla_riemann(pipe.d, &pipe.riemann(), &pipe.christoffel()))
}

pub fn f_tensor_at(m: &ChartManifold, p: &[f64]) -> Result<Tensor3, CalcError> {
    let pipe = JetPipeline::new(m, p, 1)?;
    let jj = m.structure_jets(p, 1)?;
    Ok(structure_tensor(&pipe.metric_value(), &pipe.christoffel(), &jj))
}

pub fn nijenhuis_at(m: &ChartManifold, p: &[f64]) -> Result<Tensor3, CalcError> {
    Ok(nijenhuis(&m.structure_jets(p, 1)?))
}

/// Traces in the adapted orthonormal frame.
pub fn ricci_scalar_at(m: &ChartManifold, p: &[f64]) -> Result<RicciTraces, CalcError> {
    Ok(curvature_package(m, p, false)?.traces)
}

/// The same traces through `g^{ij}` in coordinates: `ρ_ab = g^{il}R_{iabl}`,
/// `ρ*_ab = g^{il}R_{iacm}J^c_b J^m_l`.
pub fn coordinate_traces(r: &Tensor4, ginv: &Array2<f64>, j: &Array2<f64>) -> RicciTraces {
    let d = r.shape()[0];
    // w[i][c][m] = Σ_l g^{il} J^m_l
    let gj = ginv.dot(&j.t());
    let ricci = Array2::from_shape_fn((d, d), |(a, b)| {
        let mut acc = 0.0;
        for i in 0..d {
            for l in 0..d {
                acc += ginv[[i, l]] * r[[i, a, b, l]];
            }
        }
        acc
    });
    let star_ricci = Array2::from_shape_fn((d, d), |(a, b)| {
        let mut acc = 0.0;
        for i in 0..d {
            for c in 0..d {
                if j[[c, b]] == 0.0 {
                    continue;
                }
                for m in 0..d {
                    acc += r[[i, a, c, m]] * j[[c, b]] * gj[[i, m]];
                }
            }
        }
        acc
    });
    let scalar = (ginv * &ricci).sum();
    let star_scalar = (ginv * &star_ricci).sum();
    RicciTraces {
        ricci,
        scalar,
        star_ricci,
        star_scalar,
    }
}

/// `Φ(X,Y) = g(JX,Y)`: `Φ_ab = J^c_a g_cb`.
pub fn kaehler_form(g: &Array2<f64>, j: &Array2<f64>) -> Tensor2 {
    j.t().dot(g)
}

/// Everything the diagnostics need at one point, in the adapted frame.
#[derive(Clone, Debug, Serialize)]
pub struct CurvaturePackage {
    pub point: Vec<f64>,
    pub n: usize,
    #[serde(skip)]
    pub frame: AdaptedFrame,
    pub frame_metric: FrameMetric,
    /// Coordinate `Γ^k_{ij}` at `(k, i, j)`.
    pub christoffel: Tensor3,
    pub r: Tensor4,
    pub nabla_r: Option<Tensor5>,
    pub traces: RicciTraces,
    pub phi: Tensor2,
    pub f: Tensor3,
    /// `N_{jkl} = g(N(E_j, E_k), E_l)`.
    pub nijenhuis: Tensor3,
    /// `max |∂_k g_ij|` in coordinates.
    pub max_metric_gradient: f64,
    /// Coordinate-route traces rewritten in the frame, kept for cross-checks.
    pub coordinate_traces: RicciTraces,
}

pub fn curvature_package(m: &ChartManifold, p: &[f64], with_derivative: bool) -> Result<CurvaturePackage, CalcError> {
    let order = if with_derivative { 3 } else { 2 };
    let pipe = JetPipeline::new(m, p, order)?;
    let d = pipe.d;
    let g = pipe.metric_value();
    let jj = m.structure_jets(p, 1)?;
    let j = Array2::from_shape_fn((d, d), |(a, b)| jj[a][b].value());
    let frame = adapted_frame(&g, &j)?;
    let e = &frame.matrix().clone();
    let fm = frame.frame_metric(&g, &j);

    let gamma = pipe.christoffel();
    let r_jets = pipe.riemann();
    let r_coord = values4(d, &r_jets);
    let nabla_r = with_derivative.then(|| change_basis(&nabla_riemann(d, &r_jets, &gamma), e));
    let r = change_basis(&r_coord, e);
    let traces = ricci_traces(&r, &fm);
    let coord = coordinate_traces(&r_coord, &pipe.inverse_value(), &j);
    let coordinate_traces = RicciTraces {
        ricci: change_basis(&coord.ricci, e),
        scalar: coord.scalar,
        star_ricci: change_basis(&coord.star_ricci, e),
        star_scalar: coord.star_scalar,
    };
    let f = change_basis(&structure_tensor(&g, &gamma, &jj), e);
    let n_up = nijenhuis(&jj);
    let n_low = Array3::from_shape_fn((d, d, d), |(a, b, c)| (0..d).map(|i| g[[c, i]] * n_up[[i, a, b]]).sum());
    Ok(CurvaturePackage {
        point: p.to_vec(),
        n: d / 2,
        phi: kaehler_form(&fm.g, &fm.j),
        frame,
        frame_metric: fm,
        christoffel: gamma,
        r,
        nabla_r,
        traces,
        f,
        nijenhuis: change_basis(&n_low, e),
        max_metric_gradient: pipe.max_metric_gradient(),
        coordinate_traces,
    })
}

/// Defects of the identities satisfied by `F`, as Frobenius norms over the frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FIdentityDefects {
    /// `F(X,Y,Z) + F(X,Z,Y)`.
    pub skew: f64,
    /// `F(X,JY,JZ) + F(X,Y,Z)`.
    pub j_invariance: f64,
    /// `F(JX,Y,Z) + F(X,JY,Z)`, which vanishes exactly for Hermitian structures.
    pub hermitian: f64,
}

pub fn f_identity_defects(f: &Tensor3, fm: &FrameMetric) -> FIdentityDefects {
    let d = f.shape()[0];
    let j = &fm.j;
    // F with slot s fed J E_b instead of E_b: Σ_c J[c,b] F[.., c, ..]
    let fj = |s: usize| {
        Array3::from_shape_fn((d, d, d), |idx| {
            let idx = [idx.0, idx.1, idx.2];
            (0..d)
                .map(|c| {
                    let mut k = idx;
                    k[s] = c;
                    j[[c, idx[s]]] * f[k]
                })
                .sum::<f64>()
        })
    };
    let f0 = fj(0);
    let f1 = fj(1);
    let f12 = Array3::from_shape_fn((d, d, d), |(a, b, c)| {
        (0..d).map(|e| j[[e, c]] * f1[[a, b, e]]).sum::<f64>()
    });
    let mut defects = [0.0_f64; 3];
    for ((a, b, c), v) in f.indexed_iter() {
        defects[0] += (v + f[[a, c, b]]).powi(2);
        defects[1] += (f12[[a, b, c]] + v).powi(2);
        defects[2] += (f0[[a, b, c]] + f1[[a, b, c]]).powi(2);
    }
    FIdentityDefects {
        skew: defects[0].sqrt(),
        j_invariance: defects[1].sqrt(),
        hermitian: defects[2].sqrt(),
    }
}

/// `max_{a,b} |ρ*(JE_a, JE_b) − ρ*(E_b, E_a)|`, zero for every almost
/// Hermitian structure.
pub fn star_ricci_symmetry_defect(traces: &RicciTraces, fm: &FrameMetric) -> f64 {
    let j = &fm.j;
    let lhs = j.t().dot(&traces.star_ricci).dot(j);
    max_diff(&lhs, &traces.star_ricci.t().to_owned())
}

/// `max_{a,b} |ρ*(JE_a, JE_b) − ρ(E_b, E_a)|`. Zero on Kähler points only:
/// there `ρ* = ρ`, elsewhere the two traces differ.
pub fn star_ricci_ricci_defect(traces: &RicciTraces, fm: &FrameMetric) -> f64 {
    let j = &fm.j;
    let lhs = j.t().dot(&traces.star_ricci).dot(j);
    max_diff(&lhs, &traces.ricci.t().to_owned())
}

fn max_diff(a: &Tensor2, b: &Tensor2) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Frobenius norm of `∇_m R_{ijkl} + ∇_i R_{jmkl} + ∇_j R_{mikl}`.
pub fn second_bianchi_defect(nabla_r: &Tensor5) -> f64 {
    let mut acc = 0.0;
    for ((m, i, j, k, l), v) in nabla_r.indexed_iter() {
        acc += (v + nabla_r[[i, j, m, k, l]] + nabla_r[[j, m, i, k, l]]).powi(2);
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog_manifold;
    use crate::tensor::{frobenius, max_abs, standard_complex_structure, symmetry_defects};
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;

    /// `(c/4)(π₁ + π₂)` built from its defining display, independently of curvid.
    fn space_form_oracle(n: usize, c: f64) -> Tensor4 {
        let d = 2 * n;
        let g = Array2::<f64>::eye(d);
        let w = standard_complex_structure(n); // ω = g J
        Array4::from_shape_fn((d, d, d, d), |(x, y, z, u)| {
            let p1 = g[[y, z]] * g[[x, u]] - g[[x, z]] * g[[y, u]];
            let p2 = w[[y, z]] * w[[x, u]] - w[[x, z]] * w[[y, u]] - 2.0 * w[[x, y]] * w[[z, u]];
            0.25 * c * (p1 + p2)
        })
    }

    fn fd_christoffel(m: &ChartManifold, p: &[f64], h: f64) -> Tensor3 {
        let d = p.len();
        let g = m.metric_at(p).unwrap();
        let ginv = nalgebra::DMatrix::from_fn(d, d, |i, j| g[[i, j]])
            .try_inverse()
            .unwrap();
        let dg: Vec<Array2<f64>> = (0..d)
            .map(|l| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[l] += h;
                b[l] -= h;
                (m.metric_at(&a).unwrap() - m.metric_at(&b).unwrap()) / (2.0 * h)
            })
            .collect();
        Array3::from_shape_fn((d, d, d), |(k, i, j)| {
            (0..d)
                .map(|l| 0.5 * ginv[(k, l)] * (dg[i][[j, l]] + dg[j][[i, l]] - dg[l][[i, j]]))
                .sum()
        })
    }

    fn unit(d: usize, i: usize) -> Array1<f64> {
        let mut v = Array1::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn flat_everything_vanishes() {
        let m = catalog_manifold("flat", &[3.0]).unwrap();
        let pkg = curvature_package(&m, &[0.1, 0.2, -0.3, 0.4, 0.0, 0.5], true).unwrap();
        assert_eq!(max_abs(&pkg.christoffel), 0.0);
        assert_eq!(max_abs(&pkg.r), 0.0);
        assert_eq!(max_abs(pkg.nabla_r.as_ref().unwrap()), 0.0);
        assert_eq!(max_abs(&pkg.f), 0.0);
        assert_eq!(max_abs(&pkg.nijenhuis), 0.0);
        assert_eq!(pkg.traces.scalar, 0.0);
        assert_eq!(pkg.traces.star_scalar, 0.0);
    }

    #[test]
    fn fubini_study_christoffel_vanishes_at_origin() {
        let m = catalog_manifold("fubini_study", &[2.0, 4.0]).unwrap();
        let gamma = christoffel_at(&m, &[0.0; 4]).unwrap();
        assert!(max_abs(&gamma) < 1e-15);
        let fd = fd_christoffel(&m, &[0.3, -0.1, 0.2, 0.4], 1e-5);
        let jet = christoffel_at(&m, &[0.3, -0.1, 0.2, 0.4]).unwrap();
        assert!(max_abs(&(fd - jet)) < 1e-8);
    }

    #[test]
    fn hopf_christoffel_matches_finite_differences() {
        let m = catalog_manifold("hopf", &[3.0]).unwrap();
        let p = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let jet = christoffel_at(&m, &p).unwrap();
        assert!(max_abs(&jet) > 0.5);
        let fd = fd_christoffel(&m, &p, 1e-5);
        assert!(max_abs(&(fd - &jet)) < 1e-7);
        // g = δ/r²: Γ^k_ij = −(δ_ki x_j + δ_kj x_i − δ_ij x_k)/r²
        assert_abs_diff_eq!(jet[[0, 0, 0]], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(jet[[0, 1, 1]], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(jet[[1, 0, 1]], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn fubini_study_matches_space_form_oracle() {
        let m = catalog_manifold("fubini_study", &[3.0, 4.0]).unwrap();
        let pkg = curvature_package(&m, &[0.0; 6], true).unwrap();
        let oracle = space_form_oracle(3, 4.0);
        assert!(max_abs(&(&pkg.r - &oracle)) < 1e-10);
        let r = &pkg.r;
        let k = |a: usize, b: usize| r[[a, b, b, a]];
        assert_abs_diff_eq!(k(0, 1), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(k(0, 3), 4.0, epsilon = 1e-8);
        let oracle_traces = ricci_traces(&oracle, &FrameMetric::standard(3));
        assert_abs_diff_eq!(pkg.traces.scalar, oracle_traces.scalar, epsilon = 1e-8);
        assert_abs_diff_eq!(pkg.traces.star_scalar, oracle_traces.star_scalar, epsilon = 1e-8);
        // ρ = ρ* = (c/4)(2n+2) g
        assert_abs_diff_eq!(pkg.traces.scalar, 48.0, epsilon = 1e-8);
        assert_abs_diff_eq!(pkg.traces.star_scalar, 48.0, epsilon = 1e-8);
        assert!(max_abs(pkg.nabla_r.as_ref().unwrap()) < 1e-8);
    }

    #[test]
    fn fubini_study_away_from_origin_is_still_a_space_form() {
        let m = catalog_manifold("fubini_study", &[3.0, 4.0]).unwrap();
        let pkg = curvature_package(&m, &[0.3, -0.2, 0.5, 0.1, 0.4, -0.6], true).unwrap();
        let oracle = space_form_oracle(3, 4.0);
        assert!(max_abs(&(&pkg.r - &oracle)) < 1e-8);
        assert!(max_abs(pkg.nabla_r.as_ref().unwrap()) < 1e-7);
        assert!(frobenius(&pkg.f) < 1e-8);
    }

    #[test]
    fn riemann_matches_finite_differences_of_christoffel() {
        let m = catalog_manifold("hopf", &[2.0]).unwrap();
        let p = [0.8, -0.3, 0.5, 0.6];
        let d = 4;
        let h = 1e-5;
        let gamma = christoffel_at(&m, &p).unwrap();
        let dgamma: Vec<Tensor3> = (0..d)
            .map(|i| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[i] += h;
                b[i] -= h;
                (christoffel_at(&m, &a).unwrap() - christoffel_at(&m, &b).unwrap()) / (2.0 * h)
            })
            .collect();
        let g = m.metric_at(&p).unwrap();
        let rm = Array4::from_shape_fn((d, d, d, d), |(l, i, j, k)| {
            let mut v = dgamma[i][[l, j, k]] - dgamma[j][[l, i, k]];
            for q in 0..d {
                v += gamma[[l, i, q]] * gamma[[q, j, k]] - gamma[[l, j, q]] * gamma[[q, i, k]];
            }
            v
        });
        let oracle = Array4::from_shape_fn((d, d, d, d), |(i, j, k, l)| {
            (0..d).map(|q| g[[l, q]] * rm[[q, i, j, k]]).sum::<f64>()
        });
        let r = riemann_at(&m, &p).unwrap();
        assert!(max_abs(&(&r - &oracle)) < 1e-7 * (1.0 + max_abs(&r)));
    }

    #[test]
    fn covariant_derivative_matches_finite_differences() {
        let m = catalog_manifold("hopf", &[2.0]).unwrap();
        let p = [0.8, -0.3, 0.5, 0.6];
        let d = 4;
        let h = 1e-4;
        let gamma = christoffel_at(&m, &p).unwrap();
        let r = riemann_at(&m, &p).unwrap();
        let dr: Vec<Tensor4> = (0..d)
            .map(|i| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[i] += h;
                b[i] -= h;
                (riemann_at(&m, &a).unwrap() - riemann_at(&m, &b).unwrap()) / (2.0 * h)
            })
            .collect();
        let oracle = Array5::from_shape_fn((d, d, d, d, d), |(q, i, j, k, l)| {
            let mut v = dr[q][[i, j, k, l]];
            for a in 0..d {
                v -= gamma[[a, q, i]] * r[[a, j, k, l]]
                    + gamma[[a, q, j]] * r[[i, a, k, l]]
                    + gamma[[a, q, k]] * r[[i, j, a, l]]
                    + gamma[[a, q, l]] * r[[i, j, k, a]];
            }
            v
        });
        let nr = covar_deriv_riemann_at(&m, &p).unwrap();
        assert!(max_abs(&(&nr - &oracle)) < 1e-6 * (1.0 + max_abs(&nr)));
    }

    #[test]
    fn hopf_is_locally_symmetric() {
        let m = catalog_manifold("hopf", &[3.0]).unwrap();
        let pkg = curvature_package(&m, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], true).unwrap();
        let scale = 1.0 + max_abs(&pkg.r);
        assert!(max_abs(&pkg.r) > 0.5);
        assert!(symmetry_defects(&pkg.r).max() < 1e-8 * scale);
        assert!(frobenius(pkg.nabla_r.as_ref().unwrap()) < 1e-7 * scale);
    }

    #[test]
    fn second_bianchi_on_twisted_structure() {
        let m = catalog_manifold("twisted_j", &[3.0, 0.1]).unwrap();
        for p in m.domain().random_points(3, 21, 0) {
            let pkg = curvature_package(&m, &p, true).unwrap();
            let nr = pkg.nabla_r.as_ref().unwrap();
            assert!(frobenius(nr) > 1e-4);
            assert!(symmetry_defects(&pkg.r).max() < 1e-8 * (1.0 + max_abs(&pkg.r)));
            assert!(second_bianchi_defect(nr) < 1e-7 * (1.0 + frobenius(nr)));
        }
    }

    #[test]
    fn hopf_is_hermitian_but_not_kaehler() {
        let m = catalog_manifold("hopf", &[3.0]).unwrap();
        let pkg = curvature_package(&m, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], false).unwrap();
        assert!(frobenius(&pkg.f) > 0.1);
        assert!(frobenius(&pkg.nijenhuis) < 1e-12);
        let defects = f_identity_defects(&pkg.f, &pkg.frame_metric);
        assert!(defects.skew < 1e-8);
        assert!(defects.j_invariance < 1e-8);
        assert!(defects.hermitian < 1e-8);
    }

    #[test]
    fn hopf_structure_tensor_matches_finite_differences() {
        let m = catalog_manifold("hopf", &[3.0]).unwrap();
        let p = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let d = 6;
        let gamma = fd_christoffel(&m, &p, 1e-5);
        let g = m.metric_at(&p).unwrap();
        let j = standard_complex_structure(3);
        let oracle = Array3::from_shape_fn((d, d, d), |(i, a, k)| {
            let mut v = 0.0;
            for l in 0..d {
                let mut nab = 0.0;
                for q in 0..d {
                    nab += gamma[[l, i, q]] * j[[q, a]] - gamma[[q, i, a]] * j[[l, q]];
                }
                v += g[[k, l]] * nab;
            }
            v
        });
        let f = f_tensor_at(&m, &p).unwrap();
        assert!(max_abs(&(&f - &oracle)) < 1e-7);
        assert_abs_diff_eq!(frobenius(&f), 4.0, epsilon = 1e-10);
    }

    #[test]
    fn twisted_structure_is_neither_integrable_nor_hermitian() {
        let m = catalog_manifold("twisted_j", &[3.0, 0.1]).unwrap();
        let probes = m.domain().random_points(8, 11, 0);
        for p in &probes {
            let pkg = curvature_package(&m, p, false).unwrap();
            assert!(frobenius(&pkg.nijenhuis) > 1e-3, "N at {p:?}");
            let defects = f_identity_defects(&pkg.f, &pkg.frame_metric);
            assert!(
                defects.hermitian > 1e-3,
                "Hermitian identity at {p:?}: {}",
                defects.hermitian
            );
            assert!(defects.skew < 1e-8);
            assert!(defects.j_invariance < 1e-8);
        }
        let untwisted = catalog_manifold("twisted_j", &[3.0, 0.0]).unwrap();
        assert_eq!(max_abs(&nijenhuis_at(&untwisted, &probes[0]).unwrap()), 0.0);
    }

    #[test]
    fn kaehler_catalog_entries_are_integrable() {
        for (name, params) in [
            ("flat", vec![3.0]),
            ("fubini_study", vec![3.0, 4.0]),
            ("hopf", vec![3.0]),
        ] {
            let m = catalog_manifold(name, &params).unwrap();
            for p in m.domain().random_points(4, 5, 1) {
                assert!(frobenius(&nijenhuis_at(&m, &p).unwrap()) < 1e-7, "{name}");
            }
        }
    }

    #[test]
    fn frame_and_coordinate_traces_agree() {
        for (name, params) in [
            ("fubini_study", vec![3.0, 4.0]),
            ("hopf", vec![3.0]),
            ("twisted_j", vec![3.0, 0.1]),
        ] {
            let m = catalog_manifold(name, &params).unwrap();
            for p in m.domain().random_points(3, 9, 2) {
                let pkg = curvature_package(&m, &p, false).unwrap();
                let (a, b) = (&pkg.traces, &pkg.coordinate_traces);
                let tol = 1e-9 * (1.0 + max_abs(&a.ricci));
                assert!(max_abs(&(&a.ricci - &b.ricci)) < tol, "{name}");
                assert!(max_abs(&(&a.star_ricci - &b.star_ricci)) < tol, "{name}");
                assert!((a.scalar - b.scalar).abs() < tol);
                assert!((a.star_scalar - b.star_scalar).abs() < tol);
                assert!(max_abs(&(&a.ricci - &a.ricci.t())) < tol);
                assert!(star_ricci_symmetry_defect(a, &pkg.frame_metric) < 1e-8 * (1.0 + frobenius(&a.ricci)));
                let to_ricci = star_ricci_ricci_defect(a, &pkg.frame_metric);
                if name == "fubini_study" {
                    assert!(to_ricci < 1e-8 * (1.0 + frobenius(&a.ricci)));
                } else {
                    assert!(to_ricci > 1e-3, "{name}: {to_ricci}");
                }
            }
        }
    }

    #[test]
    fn kaehler_form_is_skew() {
        let m = catalog_manifold("twisted_j", &[2.0, 0.1]).unwrap();
        let pkg = curvature_package(&m, &[0.2, 0.3, -0.4, 0.5], false).unwrap();
        assert!(max_abs(&(&pkg.phi + &pkg.phi.t())) < 1e-12);
        let x = unit(4, 0);
        let jx = pkg.frame_metric.apply_j(&x);
        assert_abs_diff_eq!(x.dot(&pkg.phi.dot(&jx)), 1.0, epsilon = 1e-12);
    }
}
