//! Tangent 2-planes: the angle `θ = ∠(E, JE)`, random antiholomorphic planes,
//! sectional curvature, and sampling/optimisation of the antiholomorphic
//! sectional curvature at a point.
//!
//! Vectors are frame components; `g` and `J` come from a [`FrameMetric`].

use ndarray::Array1;
use serde::Serialize;
use thiserror::Error;

use crate::manifold::ChartManifold;
use crate::rng::{gaussian_vector, stream_rng, StreamRng};
use crate::tensor::{eval4, FrameMetric, Tensor4};
use crate::tensorcalc::{curvature_package, CalcError};

/// Tolerance of the orthonormality and antiholomorphy flags.
pub const PLANE_TOL: f64 = 1e-10;
/// Projected norms below this trigger a redraw.
pub const DEGENERATE_TOL: f64 = 1e-8;
pub const MAX_ATTEMPTS: usize = 16;
pub const DEFAULT_SAMPLES: usize = 128;
pub const MIN_SAMPLES: usize = 32;
pub const DEFAULT_RESTARTS: usize = 16;
pub const MAX_ITERATIONS: usize = 500;
pub const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PlaneError {
    #[error("spanning pair is not orthonormal (defect {defect:e})")]
    NotOrthonormal { defect: f64 },
    #[error("no non-degenerate plane after {attempts} attempts")]
    Degenerate { attempts: usize },
    #[error("at least {MIN_SAMPLES} samples are required, got {got}")]
    TooFewSamples { got: usize },
    #[error("at least one restart is required")]
    NoRestarts,
    #[error(transparent)]
    Calc(#[from] CalcError),
}

/// A plane given by an orthonormal spanning pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentPlane {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    /// `|g(X, JY)|`, the cosine of the angle between `E` and `JE`.
    cos_theta: f64,
    antiholomorphic: bool,
}

impl TangentPlane {
    pub fn new(x: Array1<f64>, y: Array1<f64>, fm: &FrameMetric) -> Result<Self, PlaneError> {
        let defect = (fm.inner(&x, &x) - 1.0)
            .abs()
            .max((fm.inner(&y, &y) - 1.0).abs())
            .max(fm.inner(&x, &y).abs());
        if defect > PLANE_TOL {
            return Err(PlaneError::NotOrthonormal { defect });
        }
        let xjy = fm.inner(&x, &fm.apply_j(&y));
        let yjx = fm.inner(&y, &fm.apply_j(&x));
        Ok(TangentPlane {
            cos_theta: xjy.abs().min(1.0),
            antiholomorphic: xjy.abs() < PLANE_TOL && yjx.abs() < PLANE_TOL,
            x,
            y,
        })
    }

    /// `θ ∈ [0, π/2]`; `0` for holomorphic and `π/2` for antiholomorphic planes.
    pub fn theta(&self) -> f64 {
        self.cos_theta.acos()
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos_theta
    }

    pub fn is_antiholomorphic(&self) -> bool {
        self.antiholomorphic
    }

    pub fn swapped(&self) -> TangentPlane {
        TangentPlane {
            x: self.y.clone(),
            y: self.x.clone(),
            ..self.clone()
        }
    }

    /// `(X cos t + Y sin t, −X sin t + Y cos t)`.
    pub fn rotated(&self, t: f64) -> TangentPlane {
        let (s, c) = t.sin_cos();
        TangentPlane {
            x: &self.x * c + &self.y * s,
            y: &self.y * c - &self.x * s,
            ..self.clone()
        }
    }
}

/// Orthonormalises `(x, y)` into an antiholomorphic pair: `X = x/|x|`, then
/// `y` is projected off `X` and `JX` and normalised.
pub fn antiholomorphic_from(x: &Array1<f64>, y: &Array1<f64>, fm: &FrameMetric) -> Option<TangentPlane> {
    let nx = fm.norm(x);
    if !(nx > DEGENERATE_TOL) {
        return None;
    }
    let x = x / nx;
    let jx = fm.apply_j(&x);
    let mut y = y.clone();
    for _ in 0..2 {
        let a = fm.inner(&y, &x);
        y.scaled_add(-a, &x);
        let b = fm.inner(&y, &jx) / fm.inner(&jx, &jx);
        y.scaled_add(-b, &jx);
    }
    let ny = fm.norm(&y);
    if !(ny > DEGENERATE_TOL) {
        return None;
    }
    TangentPlane::new(x, y / ny, fm).ok()
}

pub fn random_antiholomorphic_plane(fm: &FrameMetric, rng: &mut StreamRng) -> Result<TangentPlane, PlaneError> {
    for _ in 0..MAX_ATTEMPTS {
        let x = gaussian_vector(rng, fm.dim());
        let y = gaussian_vector(rng, fm.dim());
        if let Some(p) = antiholomorphic_from(&x, &y, fm) {
            return Ok(p);
        }
    }
    Err(PlaneError::Degenerate { attempts: MAX_ATTEMPTS })
}

/// The plane spanned by `E_1` and `cos θ·JE_1 + sin θ·E_2` in an adapted orthonormal frame.
pub fn plane_at_angle(fm: &FrameMetric, theta: f64) -> Result<TangentPlane, PlaneError> {
    let d = fm.dim();
    let mut x = Array1::zeros(d);
    x[0] = 1.0;
    let mut e2 = Array1::zeros(d);
    e2[1] = 1.0;
    let y = fm.apply_j(&x) * theta.cos() + e2 * theta.sin();
    TangentPlane::new(x, y, fm)
}

/// `K(E) = R(X,Y,Y,X)`.
pub fn sectional_curvature(r: &Tensor4, plane: &TangentPlane) -> f64 {
    eval4(r, &plane.x, &plane.y, &plane.y, &plane.x)
}

/// Result of optimising `K` over antiholomorphic planes.
#[derive(Clone, Debug, Serialize)]
pub struct Extremum {
    pub k_min: f64,
    pub k_max: f64,
    pub argmin: TangentPlane,
    pub argmax: TangentPlane,
    /// Gradient steps taken, summed over restarts and both directions.
    pub iterations: usize,
}

/// Allocation-free `K ∘ projection` for the finite-difference probes of the
/// ascent. Mirrors [`antiholomorphic_from`] step for step.
struct Objective {
    d: usize,
    r: Vec<f64>,
    g: Vec<f64>,
    j: Vec<f64>,
}

impl Objective {
    fn new(r: &Tensor4, fm: &FrameMetric) -> Self {
        Objective {
            d: fm.dim(),
            r: r.iter().copied().collect(),
            g: fm.g.iter().copied().collect(),
            j: fm.j.iter().copied().collect(),
        }
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.g
            .chunks_exact(self.d)
            .zip(a)
            .map(|(row, ai)| ai * row.iter().zip(b).map(|(gij, bj)| gij * bj).sum::<f64>())
            .sum()
    }

    /// `R(x, y, y, x)`.
    fn curvature(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.d;
        let mut acc = 0.0;
        for (a, &xa) in x.iter().enumerate() {
            for (b, &yb) in y.iter().enumerate() {
                let block = &self.r[(a * d + b) * d * d..(a * d + b + 1) * d * d];
                let s: f64 = block
                    .chunks_exact(d)
                    .zip(y)
                    .map(|(row, yc)| yc * row.iter().zip(x).map(|(t, xe)| t * xe).sum::<f64>())
                    .sum();
                acc += xa * yb * s;
            }
        }
        acc
    }

    fn value(&self, x: &[f64], y: &[f64], scratch: &mut [Vec<f64>; 3]) -> Option<f64> {
        let [px, py, jx] = scratch;
        let nx = self.inner(x, x).sqrt();
        if !(nx > DEGENERATE_TOL) {
            return None;
        }
        px.iter_mut().zip(x).for_each(|(p, v)| *p = v / nx);
        for (row, out) in self.j.chunks_exact(self.d).zip(jx.iter_mut()) {
            *out = row.iter().zip(px.iter()).map(|(a, b)| a * b).sum();
        }
        py.copy_from_slice(y);
        let jj = self.inner(jx, jx);
        for _ in 0..2 {
            let a = self.inner(py, px);
            py.iter_mut().zip(px.iter()).for_each(|(v, xi)| *v -= a * xi);
            let b = self.inner(py, jx) / jj;
            py.iter_mut().zip(jx.iter()).for_each(|(v, ji)| *v -= b * ji);
        }
        let ny = self.inner(py, py).sqrt();
        if !(ny > DEGENERATE_TOL) {
            return None;
        }
        py.iter_mut().for_each(|v| *v /= ny);
        Some(self.curvature(px, py))
    }
}

/// Projected ascent of `sign·K` from `start`; returns the best plane and the iteration count.
fn ascend(obj: &Objective, fm: &FrameMetric, start: TangentPlane, sign: f64) -> (f64, TangentPlane, usize) {
    const H: f64 = 1e-6;
    let d = obj.d;
    let mut scratch = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let mut plane = start;
    let mut value = sign * sectional_curvature_flat(obj, &plane);
    let mut step = 0.25;
    let mut iterations = 0;
    let mut grad = vec![0.0; 2 * d];
    let mut probe = vec![0.0; 2 * d];
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let base: Vec<f64> = plane.x.iter().chain(plane.y.iter()).copied().collect();
        probe.copy_from_slice(&base);
        for k in 0..2 * d {
            let mut f = |delta: f64| {
                probe[k] = base[k] + delta;
                let v = obj
                    .value(&probe[..d], &probe[d..], &mut scratch)
                    .map_or(value, |v| sign * v);
                probe[k] = base[k];
                v
            };
            grad[k] = (f(H) - f(-H)) / (2.0 * H);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-13 {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            probe
                .iter_mut()
                .zip(&base)
                .zip(&grad)
                .for_each(|((p, b), g)| *p = b + g * (step / norm));
            if let Some(v) = obj.value(&probe[..d], &probe[d..], &mut scratch) {
                let v = sign * v;
                if v > value {
                    let cand = antiholomorphic_from(
                        &Array1::from(probe[..d].to_vec()),
                        &Array1::from(probe[d..].to_vec()),
                        fm,
                    );
                    if let Some(p) = cand {
                        let improvement = v - value;
                        value = v;
                        plane = p;
                        step = (step * 1.5).min(1.0);
                        accepted = improvement >= IMPROVEMENT_TOL;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (sign * value, plane, iterations)
}

fn sectional_curvature_flat(obj: &Objective, plane: &TangentPlane) -> f64 {
    obj.curvature(
        plane.x.as_slice().expect("contiguous"),
        plane.y.as_slice().expect("contiguous"),
    )
}

/// Minimum and maximum of `K` over antiholomorphic planes, from `restarts`
/// random starts plus the given warm starts.
pub fn extremize_antiholomorphic(
    r: &Tensor4,
    fm: &FrameMetric,
    restarts: usize,
    rng: &mut StreamRng,
    warm: &[TangentPlane],
) -> Result<Extremum, PlaneError> {
    if restarts == 0 {
        return Err(PlaneError::NoRestarts);
    }
    let mut starts: Vec<TangentPlane> = warm.to_vec();
    for _ in 0..restarts {
        starts.push(random_antiholomorphic_plane(fm, rng)?);
    }
    let obj = Objective::new(r, fm);
    let mut best: Option<Extremum> = None;
    for s in starts {
        let (lo, lo_plane, it_lo) = ascend(&obj, fm, s.clone(), -1.0);
        let (hi, hi_plane, it_hi) = ascend(&obj, fm, s, 1.0);
        let e = best.get_or_insert_with(|| Extremum {
            k_min: lo,
            k_max: hi,
            argmin: lo_plane.clone(),
            argmax: hi_plane.clone(),
            iterations: 0,
        });
        e.iterations += it_lo + it_hi;
        if lo < e.k_min {
            e.k_min = lo;
            e.argmin = lo_plane;
        }
        if hi > e.k_max {
            e.k_max = hi;
            e.argmax = hi_plane;
        }
    }
    Ok(best.expect("at least one start"))
}

/// Sampled and optimised antiholomorphic sectional curvature at one point.
#[derive(Clone, Debug, Serialize)]
pub struct ConstancyStats {
    /// Mean of the sampled curvatures.
    pub nu_hat: f64,
    /// Largest `|K − ν̂|` over the samples and the two extremal planes.
    pub max_dev: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub sample_min: f64,
    pub sample_max: f64,
    pub m: usize,
    pub seed: u64,
    pub stream: u64,
    pub restarts: usize,
    pub iterations: usize,
}

/// Samples `m` planes from stream `2·stream` and extremizes on stream `2·stream + 1`.
pub fn constancy_stats_for(
    r: &Tensor4,
    fm: &FrameMetric,
    m: usize,
    restarts: usize,
    seed: u64,
    stream: u64,
) -> Result<ConstancyStats, PlaneError> {
    if m < MIN_SAMPLES {
        return Err(PlaneError::TooFewSamples { got: m });
    }
    let mut rng = stream_rng(seed, 2 * stream);
    let mut samples = Vec::with_capacity(m);
    let mut lo: Option<(f64, TangentPlane)> = None;
    let mut hi: Option<(f64, TangentPlane)> = None;
    for _ in 0..m {
        let p = random_antiholomorphic_plane(fm, &mut rng)?;
        let k = sectional_curvature(r, &p);
        if lo.as_ref().is_none_or(|(v, _)| k < *v) {
            lo = Some((k, p.clone()));
        }
        if hi.as_ref().is_none_or(|(v, _)| k > *v) {
            hi = Some((k, p));
        }
        samples.push(k);
    }
    let (lo, hi) = (lo.expect("m > 0"), hi.expect("m > 0"));
    let nu_hat = samples.iter().sum::<f64>() / m as f64;
    let mut ext_rng = stream_rng(seed, 2 * stream + 1);
    let ext = extremize_antiholomorphic(r, fm, restarts, &mut ext_rng, &[lo.1, hi.1])?;
    let max_dev = samples
        .iter()
        .chain([ext.k_min, ext.k_max].iter())
        .fold(0.0_f64, |acc, k| acc.max((k - nu_hat).abs()));
    Ok(ConstancyStats {
        nu_hat,
        max_dev,
        k_min: ext.k_min,
        k_max: ext.k_max,
        sample_min: lo.0,
        sample_max: hi.0,
        m,
        seed,
        stream,
        restarts,
        iterations: ext.iterations,
    })
}

pub fn constancy_stats(m_: &ChartManifold, p: &[f64], m: usize, seed: u64) -> Result<ConstancyStats, PlaneError> {
    let pkg = curvature_package(m_, p, false)?;
    constancy_stats_for(&pkg.r, &pkg.frame_metric, m, DEFAULT_RESTARTS, seed, 0)
}
