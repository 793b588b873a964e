//! Single-chart almost Hermitian manifolds: the built-in catalog, the
//! `antiholo-spec v1` text format, and pointwise structure validation.
//!
//! Coordinates are real and ordered as J-pairs: `x1..xn` are the real parts
//! and `x{n+1}..x{2n}` the imaginary parts of the complex coordinates, so the
//! standard structure maps `∂/∂x_a` to `∂/∂x_{n+a}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_jet, parse_expr, EvalError, Expr, ParseError};
use crate::jet::Jet;
use crate::rng::{stream_rng, uniform};

pub const SPEC_HEADER: &str = "antiholo-spec v1";

/// Relative tolerance of the structure axioms.
pub const STRUCTURE_TOL: f64 = 1e-9;

pub const CATALOG: [&str; 4] = ["flat", "fubini_study", "hopf", "twisted_j"];

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("unknown catalog manifold {0:?} (known: flat, fubini_study, hopf, twisted_j)")]
    UnknownCatalog(String),
    #[error("invalid parameters for {name}: {reason}")]
    InvalidParams { name: String, reason: String },
    #[error("spec line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("spec is missing the {0} section")]
    MissingSection(&'static str),
    #[error("entry {entry}: {source}")]
    Parse {
        entry: String,
        #[source]
        source: ParseError,
    },
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("point {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("structure validation failed at {point:?}: {reason}")]
    Validation { point: Vec<f64>, reason: String },
}

/// Axis-aligned coordinate box, optionally punctured by a ball around the
/// origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
    pub min_radius: Option<f64>,
}

impl Domain {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Domain {
            bounds: vec![(lo, hi); dim],
            min_radius: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        let in_box = p.iter().zip(&self.bounds).all(|(x, (lo, hi))| *lo <= *x && *x <= *hi);
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        in_box && self.min_radius.is_none_or(|m| r >= m)
    }

    /// A `per_axis^dim` lattice at interior fractions `k/(per_axis+1)`,
    /// thinned to at most `cap` points by a fixed stride. Points in the
    /// puncture are dropped.
    pub fn probe_grid(&self, per_axis: usize, cap: usize) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let total = per_axis.pow(dim as u32);
        let picks: Vec<usize> = if total <= cap {
            (0..total).collect()
        } else {
            (0..cap).map(|k| k * total / cap).collect()
        };
        picks
            .into_iter()
            .map(|mut idx| {
                (0..dim)
                    .map(|axis| {
                        let digit = idx % per_axis;
                        idx /= per_axis;
                        let (lo, hi) = self.bounds[axis];
                        lo + (hi - lo) * (digit + 1) as f64 / (per_axis + 1) as f64
                    })
                    .collect::<Vec<f64>>()
            })
            .filter(|p| self.contains(p))
            .collect()
    }

    /// `k` points drawn uniformly from the domain (rejecting the puncture).
    pub fn random_points(&self, k: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, stream);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let p: Vec<f64> = self.bounds.iter().map(|(lo, hi)| uniform(&mut rng, *lo, *hi)).collect();
            if self.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ChartManifold {
    pub name: String,
    pub params: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
    n: usize,
    domain: Domain,
    /// Lower triangle, row-major: entry `(i, j)` with `i >= j`.
    metric: Vec<Expr>,
    /// Row-major `J^i_j`.
    complex_structure: Vec<Expr>,
}

fn tri(i: usize, j: usize) -> usize {
    let (a, b) = if i >= j { (i, j) } else { (j, i) };
    a * (a + 1) / 2 + b
}

impl ChartManifold {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        domain: Domain,
        metric_lower: Vec<Expr>,
        complex_structure: Vec<Expr>,
    ) -> Result<Self, ManifoldError> {
        let name = name.into();
        let dim = 2 * n;
        let bad = |reason: String| ManifoldError::InvalidParams {
            name: name.clone(),
            reason,
        };
        if n < 2 {
            return Err(bad(format!("complex dimension must be at least 2, got {n}")));
        }
        if domain.dim() != dim {
            return Err(bad(format!("domain has {} axes, expected {dim}", domain.dim())));
        }
        if metric_lower.len() != dim * (dim + 1) / 2 || complex_structure.len() != dim * dim {
            return Err(bad("wrong number of metric or J entries".into()));
        }
        if domain.bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(bad("every domain interval must satisfy lo < hi".into()));
        }
        Ok(ChartManifold {
            name,
            params: Vec::new(),
            metadata: BTreeMap::new(),
            n,
            domain,
            metric: metric_lower,
            complex_structure,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn metric_expr(&self, i: usize, j: usize) -> &Expr {
        &self.metric[tri(i, j)]
    }

    pub fn j_expr(&self, i: usize, j: usize) -> &Expr {
        &self.complex_structure[i * self.dim() + j]
    }

    /// Same geometry, ignoring name, parameters and metadata.
    pub fn structurally_eq(&self, other: &ChartManifold) -> bool {
        self.n == other.n
            && self.domain == other.domain
            && self.metric == other.metric
            && self.complex_structure == other.complex_structure
    }

    fn check_point(&self, p: &[f64]) -> Result<(), ManifoldError> {
        if !self.domain.contains(p) {
            return Err(ManifoldError::OutsideDomain { point: p.to_vec() });
        }
        Ok(())
    }

    fn jet_at(&self, e: &Expr, p: &[f64], order: u8) -> Result<Jet, ManifoldError> {
        eval_jet(e, p, order).map_err(|source| ManifoldError::Eval {
            point: p.to_vec(),
            source,
        })
    }

    /// Jets of all metric components, `[i][j]`, symmetric by construction.
    pub fn metric_jets(&self, p: &[f64], order: u8) -> Result<Vec<Vec<Jet>>, ManifoldError> {
        self.check_point(p)?;
        let lower: Vec<Jet> = self
            .metric
            .iter()
            .map(|e| self.jet_at(e, p, order))
            .collect::<Result<_, _>>()?;
        let d = self.dim();
        Ok((0..d)
            .map(|i| (0..d).map(|j| lower[tri(i, j)].clone()).collect())
            .collect())
    }

    /// Jets of `J^i_j`, `[i][j]`.
    pub fn structure_jets(&self, p: &[f64], order: u8) -> Result<Vec<Vec<Jet>>, ManifoldError> {
        self.check_point(p)?;
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.jet_at(self.j_expr(i, j), p, order)).collect())
            .collect()
    }

    pub fn metric_at(&self, p: &[f64]) -> Result<Array2<f64>, ManifoldError> {
        let jets = self.metric_jets(p, 0)?;
        Ok(Array2::from_shape_fn((self.dim(), self.dim()), |(i, j)| {
            jets[i][j].value()
        }))
    }

    pub fn complex_structure_at(&self, p: &[f64]) -> Result<Array2<f64>, ManifoldError> {
        let jets = self.structure_jets(p, 0)?;
        Ok(Array2::from_shape_fn((self.dim(), self.dim()), |(i, j)| {
            jets[i][j].value()
        }))
    }

    /// Relabels coordinates: new coordinate `k` is old coordinate `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> ChartManifold {
        let d = self.dim();
        assert_eq!(perm.len(), d);
        let mut inverse = vec![0; d];
        for (k, &old) in perm.iter().enumerate() {
            inverse[old] = k;
        }
        let rename = |i: usize| inverse[i];
        let mut metric = Vec::with_capacity(self.metric.len());
        for i in 0..d {
            for j in 0..=i {
                metric.push(self.metric_expr(perm[i], perm[j]).map_vars(&rename));
            }
        }
        let complex_structure = (0..d * d)
            .map(|k| self.j_expr(perm[k / d], perm[k % d]).map_vars(&rename))
            .collect();
        let domain = Domain {
            bounds: perm.iter().map(|&old| self.domain.bounds[old]).collect(),
            min_radius: self.domain.min_radius,
        };
        ChartManifold {
            name: format!("{}[permuted]", self.name),
            params: self.params.clone(),
            metadata: self.metadata.clone(),
            n: self.n,
            domain,
            metric,
            complex_structure,
        }
    }

    /// Serializes to the `antiholo-spec v1` format.
    pub fn to_spec_text(&self) -> String {
        let d = self.dim();
        let mut s = String::new();
        let _ = writeln!(s, "{SPEC_HEADER}");
        let _ = writeln!(s, "NAME: {}", self.name);
        let _ = writeln!(s, "DIM: {d}");
        let bounds: Vec<String> = self
            .domain
            .bounds
            .iter()
            .map(|(lo, hi)| format!("{lo:?} {hi:?}"))
            .collect();
        let _ = writeln!(s, "DOMAIN: {}", bounds.join(", "));
        if let Some(r) = self.domain.min_radius {
            let _ = writeln!(s, "EXCLUDE_RADIUS: {r:?}");
        }
        let _ = writeln!(s, "METRIC:");
        for i in 0..d {
            for j in 0..=i {
                let _ = writeln!(s, "[{},{}] = {}", i + 1, j + 1, self.metric_expr(i, j));
            }
        }
        let _ = writeln!(s, "J:");
        for i in 0..d {
            for j in 0..d {
                let _ = writeln!(s, "[{},{}] = {}", i + 1, j + 1, self.j_expr(i, j));
            }
        }
        s
    }
}

/// Residuals of the three structure axioms at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub point: Vec<f64>,
    /// Smallest eigenvalue of g divided by the largest.
    pub min_eigenvalue_ratio: f64,
    pub symmetry_defect: f64,
    /// `max |J² + I|`.
    pub j_squared_defect: f64,
    /// `max |Jᵀ g J − g| / (1 + max |g|)`.
    pub compatibility_defect: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failure_reason(&self) -> Option<String> {
        if self.passed {
            return None;
        }
        let mut reasons = Vec::new();
        if !(self.min_eigenvalue_ratio > STRUCTURE_TOL) || self.symmetry_defect >= STRUCTURE_TOL {
            reasons.push(format!(
                "metric is not symmetric positive definite (min eigenvalue ratio {:.3e})",
                self.min_eigenvalue_ratio
            ));
        }
        if !(self.j_squared_defect < STRUCTURE_TOL) {
            reasons.push(format!("J² ≠ −I (defect {:.3e})", self.j_squared_defect));
        }
        if !(self.compatibility_defect < STRUCTURE_TOL) {
            reasons.push(format!("g(JX,JY) ≠ g(X,Y) (defect {:.3e})", self.compatibility_defect));
        }
        Some(reasons.join("; "))
    }
}

pub fn validate_structure_at(m: &ChartManifold, p: &[f64]) -> Result<ValidationReport, ManifoldError> {
    let g = m.metric_at(p)?;
    let j = m.complex_structure_at(p)?;
    Ok(validate_matrices(p, &g, &j))
}

pub(crate) fn validate_matrices(p: &[f64], g: &Array2<f64>, j: &Array2<f64>) -> ValidationReport {
    let d = g.nrows();
    let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let symmetry_defect = (0..d)
        .flat_map(|a| (0..d).map(move |b| (a, b)))
        .fold(0.0f64, |m, (a, b)| m.max((g[[a, b]] - g[[b, a]]).abs()))
        / (1.0 + gmax);
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |a, b| g[[a, b]]));
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    let min_eigenvalue_ratio = if lmax > 0.0 { lmin / lmax } else { f64::NEG_INFINITY };
    let jj = j.dot(j) + Array2::<f64>::eye(d);
    let j_squared_defect = jj.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let compat = j.t().dot(g).dot(j) - g;
    let compatibility_defect = compat.iter().fold(0.0f64, |m, x| m.max(x.abs())) / (1.0 + gmax);
    let passed = min_eigenvalue_ratio > STRUCTURE_TOL
        && symmetry_defect < STRUCTURE_TOL
        && j_squared_defect < STRUCTURE_TOL
        && compatibility_defect < STRUCTURE_TOL;
    ValidationReport {
        point: p.to_vec(),
        min_eigenvalue_ratio,
        symmetry_defect,
        j_squared_defect,
        compatibility_defect,
        passed,
    }
}

/// Validates on the `3^{2n}` probe lattice capped at 200 points.
pub fn validate_on_probe_grid(m: &ChartManifold) -> Result<Vec<ValidationReport>, ManifoldError> {
    let mut out = Vec::new();
    for p in m.domain.probe_grid(3, 200) {
        let report = validate_structure_at(m, &p)?;
        if let Some(reason) = report.failure_reason() {
            return Err(ManifoldError::Validation { point: p, reason });
        }
        out.push(report);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Catalog

fn var(i: usize) -> String {
    format!("x{}", i + 1)
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn parse_all(entries: &[String], dim: usize) -> Result<Vec<Expr>, ManifoldError> {
    entries
        .iter()
        .enumerate()
        .map(|(k, text)| {
            parse_expr(text, dim).map_err(|source| ManifoldError::Parse {
                entry: format!("#{k} `{text}`"),
                source,
            })
        })
        .collect()
}

fn standard_j_entries(n: usize) -> Vec<String> {
    let d = 2 * n;
    let j = crate::tensor::standard_complex_structure(n);
    (0..d * d).map(|k| num(j[[k / d, k % d]])).collect()
}

fn lower_from_fn(d: usize, f: impl Fn(usize, usize) -> String) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..=i {
            out.push(f(i, j));
        }
    }
    out
}

fn complex_dim(name: &str, v: f64) -> Result<usize, ManifoldError> {
    if v.fract() != 0.0 || !(2.0..=16.0).contains(&v) {
        return Err(ManifoldError::InvalidParams {
            name: name.into(),
            reason: format!("complex dimension n must be an integer in 2..=16, got {v}"),
        });
    }
    Ok(v as usize)
}

/// Builds one of the catalog manifolds.
///
/// * `flat [n]`: Euclidean `R^{2n}` with the standard structure.
/// * `fubini_study [n, c]`: Fubini–Study metric of holomorphic sectional
///   curvature `c` in the affine chart; identity at the origin.
/// * `hopf [n]`: `g = δ/|z|²` with the standard structure on a box punctured
///   at `|z| < 0.5`; Hermitian, not Kähler.
/// * `twisted_j [n, ε]`: flat metric averaged over `J = A J₀ A⁻¹` with a
///   position-dependent shear `A`; generically non-integrable.
pub fn catalog_manifold(name: &str, params: &[f64]) -> Result<ChartManifold, ManifoldError> {
    let expect = |count: usize| {
        if params.len() != count {
            Err(ManifoldError::InvalidParams {
                name: name.into(),
                reason: format!("expected {count} parameter(s), got {}", params.len()),
            })
        } else {
            Ok(())
        }
    };
    let mut m = match name {
        "flat" => {
            expect(1)?;
            let n = complex_dim(name, params[0])?;
            let d = 2 * n;
            let g = lower_from_fn(d, |i, j| if i == j { "1".into() } else { "0".into() });
            ChartManifold::new(
                name,
                n,
                Domain::cube(d, -1.0, 1.0),
                parse_all(&g, d)?,
                parse_all(&standard_j_entries(n), d)?,
            )?
        }
        "fubini_study" => {
            expect(2)?;
            let n = complex_dim(name, params[0])?;
            let c = params[1];
            if !(c > 0.0 && c.is_finite()) {
                return Err(ManifoldError::InvalidParams {
                    name: name.into(),
                    reason: format!("holomorphic sectional curvature must be positive, got {c}"),
                });
            }
            fubini_study(n, c)?
        }
        "hopf" => {
            expect(1)?;
            let n = complex_dim(name, params[0])?;
            let d = 2 * n;
            let r2 = (0..d).map(|i| format!("{}^2", var(i))).collect::<Vec<_>>().join(" + ");
            let g = lower_from_fn(d, |i, j| if i == j { format!("1/({r2})") } else { "0".into() });
            let domain = Domain {
                bounds: vec![(-2.0, 2.0); d],
                min_radius: Some(0.5),
            };
            ChartManifold::new(
                name,
                n,
                domain,
                parse_all(&g, d)?,
                parse_all(&standard_j_entries(n), d)?,
            )?
        }
        "twisted_j" => {
            expect(2)?;
            let n = complex_dim(name, params[0])?;
            let eps = params[1];
            if !eps.is_finite() {
                return Err(ManifoldError::InvalidParams {
                    name: name.into(),
                    reason: "shear magnitude must be finite".into(),
                });
            }
            twisted_j(n, eps)?
        }
        other => return Err(ManifoldError::UnknownCatalog(other.into())),
    };
    m.params = params.to_vec();
    m.metadata.insert("source".into(), "catalog".into());
    Ok(m)
}

fn fubini_study(n: usize, c: f64) -> Result<ChartManifold, ManifoldError> {
    // g = [(1 + a r²) δ − a (u uᵀ + v vᵀ)] / (1 + a r²)², a = c/4, u = x, v = J₀ x.
    let d = 2 * n;
    let a = num(c / 4.0);
    let r2 = (0..d).map(|i| format!("{}^2", var(i))).collect::<Vec<_>>().join(" + ");
    let denom = format!("(1 + {a}*({r2}))^2");
    // (sign, variable) of u_i and v_i
    let u = |i: usize| (1.0, i);
    let v = |i: usize| if i < n { (-1.0, n + i) } else { (1.0, i - n) };
    let g = lower_from_fn(d, |i, j| {
        let mut terms = Vec::new();
        for (si, vi, sj, vj) in [(u(i).0, u(i).1, u(j).0, u(j).1), (v(i).0, v(i).1, v(j).0, v(j).1)] {
            let sign = if si * sj > 0.0 { "+" } else { "-" };
            terms.push(format!("{sign} {}*{}", var(vi), var(vj)));
        }
        let rank2 = format!("(0 {})", terms.join(" "));
        let numerator = if i == j {
            format!("(1 + {a}*({r2})) - {a}*{rank2}")
        } else {
            format!("-{a}*{rank2}")
        };
        format!("({numerator})/{denom}")
    });
    ChartManifold::new(
        "fubini_study",
        n,
        Domain::cube(d, -1.0, 1.0),
        parse_all(&g, d)?,
        parse_all(&standard_j_entries(n), d)?,
    )
}

fn twisted_j(n: usize, eps: f64) -> Result<ChartManifold, ManifoldError> {
    // A = I + t N with N = E_{12}; A⁻¹ = I − t N. J = A J₀ A⁻¹ is polynomial
    // in t, and g = ½(I + Jᵀ J) makes (g, J) compatible.
    let d = 2 * n;
    let t = format!("({}*({} + sin({})))", num(eps), var(n), var(d - 1));
    let j0 = crate::tensor::standard_complex_structure(n);
    let mut shear = Array2::<f64>::zeros((d, d));
    shear[[0, 1]] = 1.0;
    // J(t) = J0 + t (N J0 − J0 N) − t² N J0 N
    let jc = [j0.clone(), shear.dot(&j0) - j0.dot(&shear), -shear.dot(&j0).dot(&shear)];
    let poly = |coeffs: &[f64]| -> String {
        let mut parts = Vec::new();
        for (k, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            parts.push(match k {
                0 => format!("({})", num(*c)),
                1 => format!("({})*{t}", num(*c)),
                _ => format!("({})*{t}^{k}", num(*c)),
            });
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    };
    let j_entries: Vec<String> = (0..d * d)
        .map(|k| {
            let (r, s) = (k / d, k % d);
            poly(&[jc[0][[r, s]], jc[1][[r, s]], jc[2][[r, s]]])
        })
        .collect();
    // (Jᵀ J)_{rs} = Σ_k J_{kr} J_{ks}, a polynomial of degree ≤ 4 in t.
    let g = lower_from_fn(d, |r, s| {
        let mut coeffs = [0.0; 5];
        coeffs[0] = if r == s { 0.5 } else { 0.0 };
        for k in 0..d {
            for p in 0..3 {
                for q in 0..3 {
                    coeffs[p + q] += 0.5 * jc[p][[k, r]] * jc[q][[k, s]];
                }
            }
        }
        poly(&coeffs)
    });
    ChartManifold::new(
        "twisted_j",
        n,
        Domain::cube(d, -1.0, 1.0),
        parse_all(&g, d)?,
        parse_all(&j_entries, d)?,
    )
}

// ---------------------------------------------------------------------------
// Spec files

fn parse_index_pair(s: &str, line: usize) -> Result<(usize, usize), ManifoldError> {
    let err = || ManifoldError::Format {
        line,
        message: format!("expected an entry of the form `[i,j] = expression`, got {s:?}"),
    };
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(err)?;
    let (a, b) = inner.split_once(',').ok_or_else(err)?;
    let a: usize = a.trim().parse().map_err(|_| err())?;
    let b: usize = b.trim().parse().map_err(|_| err())?;
    Ok((a, b))
}

/// Parses an `antiholo-spec v1` document and validates it on the probe grid.
///
/// ```text
/// antiholo-spec v1
/// NAME: flat2
/// DIM: 4
/// DOMAIN: -1 1, -1 1, -1 1, -1 1
/// EXCLUDE_RADIUS: 0.5          # optional
/// METRIC:
/// [1,1] = 1                    # lower triangle only; missing entries are 0
/// J:
/// [3,1] = 1                    # J^i_j, row i, column j
/// [1,3] = -1
/// ```
pub fn load_manifold(spec_text: &str) -> Result<ChartManifold, ManifoldError> {
    let mut lines = spec_text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, SPEC_HEADER)) => {}
        Some((line, other)) => {
            return Err(ManifoldError::Format {
                line,
                message: format!("expected header `{SPEC_HEADER}`, got {other:?}"),
            })
        }
        None => return Err(ManifoldError::MissingSection("header")),
    }

    #[derive(PartialEq)]
    enum Block {
        None,
        Metric,
        J,
    }
    let mut block = Block::None;
    let mut name = None;
    let mut dim = None;
    let mut domain_line = None;
    let mut exclude = None;
    let mut metric_entries: Vec<(usize, usize, usize, String)> = Vec::new();
    let mut j_entries: Vec<(usize, usize, usize, String)> = Vec::new();
    let (mut saw_metric, mut saw_j) = (false, false);

    for (line, text) in lines {
        if text.starts_with('[') {
            let (idx, expr) = text.split_once('=').ok_or_else(|| ManifoldError::Format {
                line,
                message: "entry needs `=`".into(),
            })?;
            let (i, j) = parse_index_pair(idx, line)?;
            let entry = (line, i, j, expr.trim().to_string());
            match block {
                Block::Metric => metric_entries.push(entry),
                Block::J => j_entries.push(entry),
                Block::None => {
                    return Err(ManifoldError::Format {
                        line,
                        message: "entry outside a METRIC or J section".into(),
                    })
                }
            }
            continue;
        }
        let (key, value) = text.split_once(':').ok_or_else(|| ManifoldError::Format {
            line,
            message: format!("expected `KEY: value` or a section header, got {text:?}"),
        })?;
        let value = value.trim();
        block = Block::None;
        match key.trim() {
            "NAME" => name = Some(value.to_string()),
            "DIM" => {
                dim = Some(value.parse::<usize>().map_err(|_| ManifoldError::Format {
                    line,
                    message: format!("DIM must be an integer, got {value:?}"),
                })?)
            }
            "DOMAIN" => domain_line = Some((line, value.to_string())),
            "EXCLUDE_RADIUS" => {
                exclude = Some(value.parse::<f64>().map_err(|_| ManifoldError::Format {
                    line,
                    message: format!("EXCLUDE_RADIUS must be a number, got {value:?}"),
                })?)
            }
            "METRIC" if value.is_empty() => {
                block = Block::Metric;
                saw_metric = true;
            }
            "J" if value.is_empty() => {
                block = Block::J;
                saw_j = true;
            }
            other => {
                return Err(ManifoldError::Format {
                    line,
                    message: format!("unknown section {other:?}"),
                })
            }
        }
    }

    let name = name.ok_or(ManifoldError::MissingSection("NAME"))?;
    let dim = dim.ok_or(ManifoldError::MissingSection("DIM"))?;
    let (domain_at, domain_text) = domain_line.ok_or(ManifoldError::MissingSection("DOMAIN"))?;
    if !saw_metric {
        return Err(ManifoldError::MissingSection("METRIC"));
    }
    if !saw_j {
        return Err(ManifoldError::MissingSection("J"));
    }
    if dim < 4 || dim % 2 != 0 {
        return Err(ManifoldError::Format {
            line: 0,
            message: format!("DIM must be even and at least 4, got {dim}"),
        });
    }
    let bounds = domain_text
        .split(',')
        .map(|iv| {
            let nums: Vec<f64> = iv
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ManifoldError::Format {
                    line: domain_at,
                    message: format!("bad interval {iv:?}"),
                })?;
            match nums[..] {
                [lo, hi] => Ok((lo, hi)),
                _ => Err(ManifoldError::Format {
                    line: domain_at,
                    message: format!("interval {iv:?} needs exactly two numbers"),
                }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if bounds.len() != dim {
        return Err(ManifoldError::Format {
            line: domain_at,
            message: format!("DOMAIN has {} intervals but DIM is {dim}", bounds.len()),
        });
    }

    let mut metric = vec![Expr::Num(0.0); dim * (dim + 1) / 2];
    let mut seen = vec![false; metric.len()];
    for (line, i, j, text) in metric_entries {
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(ManifoldError::Format {
                line,
                message: format!("metric index [{i},{j}] out of range for DIM {dim}"),
            });
        }
        if i < j {
            return Err(ManifoldError::Format {
                line,
                message: format!("metric entries must address the lower triangle, got [{i},{j}]"),
            });
        }
        let k = tri(i - 1, j - 1);
        if std::mem::replace(&mut seen[k], true) {
            return Err(ManifoldError::Format {
                line,
                message: format!("duplicate metric entry [{i},{j}]"),
            });
        }
        metric[k] = parse_expr(&text, dim).map_err(|source| ManifoldError::Parse {
            entry: format!("METRIC [{i},{j}] (line {line})"),
            source,
        })?;
    }
    let mut complex_structure = vec![Expr::Num(0.0); dim * dim];
    let mut seen = vec![false; dim * dim];
    for (line, i, j, text) in j_entries {
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(ManifoldError::Format {
                line,
                message: format!("J index [{i},{j}] out of range for DIM {dim}"),
            });
        }
        let k = (i - 1) * dim + (j - 1);
        if std::mem::replace(&mut seen[k], true) {
            return Err(ManifoldError::Format {
                line,
                message: format!("duplicate J entry [{i},{j}]"),
            });
        }
        complex_structure[k] = parse_expr(&text, dim).map_err(|source| ManifoldError::Parse {
            entry: format!("J [{i},{j}] (line {line})"),
            source,
        })?;
    }
    let domain = Domain {
        bounds,
        min_radius: exclude,
    };
    let mut m = ChartManifold::new(name, dim / 2, domain, metric, complex_structure)?;
    m.metadata.insert("source".into(), "spec".into());
    validate_on_probe_grid(&m)?;
    Ok(m)
}
