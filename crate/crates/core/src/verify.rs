//! Per-point diagnostics and manifold scans: classification, the implication
//! check for Hermitian non-Kähler points of constant antiholomorphic
//! curvature, trace identities and the property suite.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvid::{fit_pi_basis, pi1, q_from_star_ricci, residual_constant_antiholo, IdentityResidual, PiFit};
use crate::frames::{complex_components, ComplexBasis};
use crate::manifold::{ChartManifold, ManifoldError};
use crate::planes::{constancy_stats_for, ConstancyStats, PlaneError, DEFAULT_RESTARTS, DEFAULT_SAMPLES};
use crate::rng::{gaussian_vector, stream_rng};
use crate::tensor::{frobenius, max_abs, ricci_traces, symmetry_defects, FrameMetric, RicciTraces, Tensor3, Tensor4};
use crate::tensorcalc::{
    curvature_package, f_identity_defects, second_bianchi_defect, star_ricci_ricci_defect, star_ricci_symmetry_defect,
    CalcError, CurvaturePackage,
};

/// Order-≤2 identities.
pub const TOL_ORDER2: f64 = 1e-8;
/// Identities involving third derivatives of the metric.
pub const TOL_ORDER3: f64 = 1e-7;
/// Verdict thresholds.
pub const TOL_VERDICT: f64 = 1e-6;
/// `max_dev` below this counts as constant antiholomorphic curvature.
pub const CONSTANCY_TOL: f64 = 1e-7;
/// Unit vectors of `T^{1,0}` tried by the `(∇_Z̄ J)Z` check.
pub const ZBAR_SAMPLES: usize = 64;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("dimension four excluded: the implication check needs complex dimension n >= 3, got n = {n}")]
    DimensionFourExcluded { n: usize },
    #[error("no sample points inside the domain")]
    EmptySample,
    #[error("invalid sampler '{0}': expected grid:N or random:K with N, K ≥ 1")]
    BadSampler(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Plane(#[from] PlaneError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PointClass {
    Kaehler,
    HermitianNonKaehler,
    NonIntegrable,
}

impl fmt::Display for PointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointClass::Kaehler => "KAEHLER",
            PointClass::HermitianNonKaehler => "HERMITIAN_NON_KAEHLER",
            PointClass::NonIntegrable => "NON_INTEGRABLE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TheoremAStatus {
    NotApplicable,
    HypothesisFails,
    Verified,
    Violation,
}

impl fmt::Display for TheoremAStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoremAStatus::NotApplicable => "NOT_APPLICABLE",
            TheoremAStatus::HypothesisFails => "HYPOTHESIS_FAILS",
            TheoremAStatus::Verified => "VERIFIED",
            TheoremAStatus::Violation => "VIOLATION",
        })
    }
}

/// Outcome of one property-suite row. `Evidence` rows describe the point's
/// class and never count as failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
    Evidence,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
            Verdict::Evidence => "EVIDENCE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: PointClass,
    /// Frobenius norm of `F` in the adapted frame.
    pub f_norm: f64,
    /// Frobenius norm of the lowered Nijenhuis tensor in the adapted frame.
    pub n_norm: f64,
    /// `‖F(JX,Y,Z) + F(X,JY,Z)‖ / (1 + max|F|)`.
    pub hermitian_residual: f64,
    /// `1e-7·(1 + max|∂g|)`, used for both `‖F‖` and `‖N‖`.
    pub threshold: f64,
}

pub fn classify_package(pkg: &CurvaturePackage) -> Classification {
    let threshold = 1e-7 * (1.0 + pkg.max_metric_gradient);
    let f_norm = frobenius(&pkg.f);
    let n_norm = frobenius(&pkg.nijenhuis);
    let hermitian_residual = f_identity_defects(&pkg.f, &pkg.frame_metric).hermitian / (1.0 + max_abs(&pkg.f));
    let class = if f_norm < threshold {
        PointClass::Kaehler
    } else if n_norm < threshold && hermitian_residual < threshold {
        PointClass::HermitianNonKaehler
    } else {
        PointClass::NonIntegrable
    };
    Classification {
        class,
        f_norm,
        n_norm,
        hermitian_residual,
        threshold,
    }
}

pub fn classify_point(m: &ChartManifold, p: &[f64]) -> Result<Classification, VerifyError> {
    Ok(classify_package(&curvature_package(m, p, false)?))
}

/// `|τ − (2n−1)τ*|`, `|ν̂ − τ*/(2n)|`, `|ν̂ − τ/(2n(2n−1))|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceChecks {
    pub tau_vs_star: f64,
    pub nu_vs_star: f64,
    pub nu_vs_tau: f64,
}

pub fn trace_checks(traces: &RicciTraces, nu: f64, n: usize) -> TraceChecks {
    let d = 2.0 * n as f64;
    TraceChecks {
        tau_vs_star: (traces.scalar - (d - 1.0) * traces.star_scalar).abs(),
        nu_vs_star: (nu - traces.star_scalar / d).abs(),
        nu_vs_tau: (nu - traces.scalar / (d * (d - 1.0))).abs(),
    }
}

/// Complex-component structure of `F` given in an adapted orthonormal frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianComponents {
    /// Largest of `|∇_α J_β^γ|`, `|∇_ᾱ J_β^γ|`, `|∇_α J_β^γ̄|`.
    pub nabla_j_max: f64,
    /// Largest `F` component outside the `F_{ᾱβγ}` pattern and its conjugate.
    pub nonessential_max: f64,
    /// `max |F_{ᾱβγ} + F_{ᾱγβ}|`.
    pub essential_skew: f64,
    pub essential_max: f64,
}

pub fn hermitian_components(f: &Tensor3, n: usize) -> HermitianComponents {
    let basis = ComplexBasis::standard(n);
    let fd = f.clone().into_dyn();
    let comp = |pat: [bool; 3]| complex_components(&fd, &basis, &pat).expect("order-3 pattern");
    // ∇_A J_B^γ = 2F(Z_A, Z_B, Z_γ̄), ∇_A J_B^γ̄ = 2F(Z_A, Z_B, Z_γ)
    let nabla_j_max = [[false, false, true], [true, false, true], [false, false, false]]
        .into_iter()
        .map(|p| 2.0 * comp(p).max_abs())
        .fold(0.0, f64::max);
    let mut nonessential_max: f64 = 0.0;
    for bits in 0..8u8 {
        let pat = [bits & 4 != 0, bits & 2 != 0, bits & 1 != 0];
        if pat == [true, false, false] || pat == [false, true, true] {
            continue;
        }
        nonessential_max = nonessential_max.max(comp(pat).max_abs());
    }
    let ess = comp([true, false, false]).values;
    let mut essential_skew: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                essential_skew = essential_skew.max((ess[[a, b, c]] + ess[[a, c, b]]).norm());
            }
        }
    }
    HermitianComponents {
        nabla_j_max,
        nonessential_max,
        essential_skew,
        essential_max: ess.iter().fold(0.0, |m, z| m.max(z.norm())),
    }
}

/// `max |Q_{αβ̄} − Q_{β̄α}|` and `max |Q_{αβ} + Q_{βα}|`.
pub fn q_component_defects(q: &ndarray::Array2<f64>, n: usize) -> (f64, f64) {
    let basis = ComplexBasis::standard(n);
    let qd = q.clone().into_dyn();
    let c = |p: [bool; 2]| complex_components(&qd, &basis, &p).expect("order-2 pattern").values;
    let (ab, ba, aa) = (c([false, true]), c([true, false]), c([false, false]));
    let (mut mixed, mut pure) = (0.0_f64, 0.0_f64);
    for a in 0..n {
        for b in 0..n {
            mixed = mixed.max((ab[[a, b]] - ba[[b, a]]).norm());
            pure = pure.max((aa[[a, b]] + aa[[b, a]]).norm());
        }
    }
    (mixed, pure)
}

/// `max |(∇_Z̄ J)Z|` over sampled unit `Z ∈ T^{1,0}`, with `F` in an adapted frame.
pub fn zbar_probe(f: &Tensor3, n: usize, samples: usize, seed: u64, stream: u64) -> f64 {
    let d = 2 * n;
    let basis = ComplexBasis::standard(n);
    let mut rng = stream_rng(seed, stream);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let re = gaussian_vector(&mut rng, n);
        let im = gaussian_vector(&mut rng, n);
        let mut z = Array1::<Complex64>::zeros(d);
        for a in 0..n {
            let c = Complex64::new(re[a], im[a]);
            z = z + basis.unbarred(a).mapv(|v| v * c);
        }
        let norm = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        z.mapv_inplace(|v| v / norm);
        let zbar = z.mapv(|v| v.conj());
        let mut w = Array1::<Complex64>::zeros(d);
        for a in 0..d {
            for b in 0..d {
                let coeff = zbar[a] * z[b];
                for c in 0..d {
                    w[c] += coeff * f[[a, b, c]];
                }
            }
        }
        worst = worst.max(w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt());
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl SuiteRow {
    fn check(name: &str, residual: f64, tolerance: f64) -> Self {
        SuiteRow {
            name: name.into(),
            residual,
            tolerance,
            verdict: if residual < tolerance {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        }
    }

    fn with(name: &str, residual: f64, tolerance: f64, verdict: Verdict) -> Self {
        SuiteRow {
            name: name.into(),
            residual,
            tolerance,
            verdict,
        }
    }
}

/// Inputs of the suite beyond the curvature package.
pub struct SuiteContext<'a> {
    pub classification: &'a Classification,
    pub stats: &'a ConstancyStats,
    pub residual: &'a IdentityResidual,
    pub fit: Option<&'a PiFit>,
    pub seed: u64,
    pub stream: u64,
}

pub fn property_suite_for(pkg: &CurvaturePackage, ctx: &SuiteContext<'_>) -> Vec<SuiteRow> {
    let n = pkg.n;
    let fm = &pkg.frame_metric;
    let class = ctx.classification.class;
    let hermitian = class != PointClass::NonIntegrable;
    let rel = |x: f64, scale: f64| x / (1.0 + scale);
    let mut rows = Vec::new();

    let r_scale = max_abs(&pkg.r);
    let sym = symmetry_defects(&pkg.r);
    rows.push(SuiteRow::check(
        "R skew and pair symmetry",
        rel(
            sym.skew_first_pair.max(sym.skew_second_pair).max(sym.pair_exchange),
            r_scale,
        ),
        TOL_ORDER2,
    ));
    rows.push(SuiteRow::check(
        "first Bianchi",
        rel(sym.first_bianchi, r_scale),
        TOL_ORDER2,
    ));
    match &pkg.nabla_r {
        Some(nr) => rows.push(SuiteRow::check(
            "second Bianchi",
            rel(second_bianchi_defect(nr), frobenius(nr)),
            TOL_ORDER3,
        )),
        None => rows.push(SuiteRow::with("second Bianchi", 0.0, TOL_ORDER3, Verdict::Skipped)),
    }

    let tr = &pkg.traces;
    let ct = &pkg.coordinate_traces;
    let trace_gap = max_abs(&(&tr.ricci - &ct.ricci))
        .max(max_abs(&(&tr.star_ricci - &ct.star_ricci)))
        .max((tr.scalar - ct.scalar).abs())
        .max((tr.star_scalar - ct.star_scalar).abs());
    let ricci_scale = frobenius(&tr.ricci);
    rows.push(SuiteRow::check(
        "frame and coordinate traces agree",
        rel(trace_gap, ricci_scale),
        TOL_ORDER2,
    ));
    rows.push(SuiteRow::check(
        "star-Ricci J-symmetry rho*(JX,JY) = rho*(Y,X)",
        rel(star_ricci_symmetry_defect(tr, fm), ricci_scale),
        TOL_ORDER2,
    ));
    let literal = rel(star_ricci_ricci_defect(tr, fm), ricci_scale);
    rows.push(if class == PointClass::Kaehler {
        SuiteRow::check("rho*(JX,JY) = rho(Y,X) (Kaehler)", literal, TOL_ORDER2)
    } else {
        SuiteRow::with(
            "rho*(JX,JY) = rho(Y,X) (Kaehler)",
            literal,
            TOL_ORDER2,
            Verdict::Evidence,
        )
    });

    let f_scale = max_abs(&pkg.f);
    let fd = f_identity_defects(&pkg.f, fm);
    rows.push(SuiteRow::check(
        "F skew F(X,Y,Z) = -F(X,Z,Y)",
        rel(fd.skew, f_scale),
        TOL_ORDER2,
    ));
    rows.push(SuiteRow::check(
        "F J-invariance F(X,JY,JZ) = -F(X,Y,Z)",
        rel(fd.j_invariance, f_scale),
        TOL_ORDER2,
    ));
    rows.push(SuiteRow::check(
        "Hermitian F(JX,Y,Z) = -F(X,JY,Z)",
        rel(fd.hermitian, f_scale),
        TOL_ORDER2,
    ));
    let threshold = ctx.classification.threshold;
    rows.push(if class == PointClass::Kaehler {
        SuiteRow::check("F = 0 (Kaehler)", ctx.classification.f_norm, threshold)
    } else {
        SuiteRow::with(
            "F = 0 (Kaehler)",
            ctx.classification.f_norm,
            threshold,
            Verdict::Evidence,
        )
    });
    rows.push(SuiteRow::with(
        "N = 0 (integrable)",
        ctx.classification.n_norm,
        threshold,
        if ctx.classification.n_norm < threshold {
            Verdict::Pass
        } else {
            Verdict::Evidence
        },
    ));

    let q = q_from_star_ricci(&tr.star_ricci, tr.star_scalar, ctx.stats.nu_hat, n, &fm.g);
    let (q_mixed, q_pure) = q_component_defects(q.components(), n);
    let hc = hermitian_components(&pkg.f, n);
    let zbar = zbar_probe(&pkg.f, n, ZBAR_SAMPLES, ctx.seed, ctx.stream);
    let q_scale = max_abs(q.components());
    let conditional: [(&str, f64, f64); 4] = [
        ("Q complex components", rel(q_mixed.max(q_pure), q_scale), TOL_ORDER2),
        ("nabla J complex components", rel(hc.nabla_j_max, f_scale), TOL_ORDER2),
        (
            "F essential components",
            rel(hc.nonessential_max.max(hc.essential_skew), f_scale),
            TOL_ORDER2,
        ),
        ("(nabla_Zbar J)Z = 0 iff F = 0", zbar, threshold),
    ];
    for (i, (name, residual, tol)) in conditional.into_iter().enumerate() {
        rows.push(if !hermitian {
            SuiteRow::with(name, residual, tol, Verdict::Skipped)
        } else if i == 3 {
            // both sides vanish together
            let agree = (zbar < threshold) == (ctx.classification.f_norm < threshold);
            SuiteRow::with(name, residual, tol, if agree { Verdict::Pass } else { Verdict::Fail })
        } else {
            SuiteRow::check(name, residual, tol)
        });
    }

    let constant = ctx.stats.max_dev < CONSTANCY_TOL;
    let identity = ctx.residual.residual25 < TOL_VERDICT;
    rows.push(SuiteRow::with(
        "sampling and identity agree on constancy",
        ctx.residual.residual25,
        TOL_VERDICT,
        if constant == identity {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    ));
    rows.push(SuiteRow::check(
        "identity residual forms coincide",
        (ctx.residual.residual25 - ctx.residual.residual26).abs(),
        1e-10,
    ));
    let fit_row = match (ctx.fit, class) {
        (None, _) | (Some(_), PointClass::NonIntegrable) => {
            SuiteRow::with("complex space form shadow", 0.0, TOL_VERDICT, Verdict::Skipped)
        }
        (Some(fit), PointClass::Kaehler) if constant => {
            SuiteRow::check("complex space form shadow", fit.residual, TOL_VERDICT)
        }
        (Some(fit), PointClass::Kaehler) => SuiteRow::with(
            "complex space form shadow",
            fit.residual,
            TOL_VERDICT,
            Verdict::Evidence,
        ),
        (Some(fit), PointClass::HermitianNonKaehler) => {
            let space_form = fit.residual < TOL_VERDICT && fit.h.abs() > 1e-3;
            SuiteRow::with(
                "complex space form shadow",
                fit.residual,
                TOL_VERDICT,
                if space_form { Verdict::Fail } else { Verdict::Pass },
            )
        }
    };
    rows.push(fit_row);
    rows
}

/// Quantities the implication check needs, whatever their source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremAEvidence {
    pub status: TheoremAStatus,
    /// `‖R − ν̂π₁‖ / (1 + ‖R‖)`.
    pub constant_curvature_residual: f64,
    pub tau_defect: f64,
}

pub fn theorem_a_decide(
    class: PointClass,
    r: &Tensor4,
    fm: &FrameMetric,
    traces: &RicciTraces,
    stats: &ConstancyStats,
    residual25: f64,
) -> Result<TheoremAEvidence, VerifyError> {
    let n = fm.n();
    if n < 3 {
        return Err(VerifyError::DimensionFourExcluded { n });
    }
    let constant_curvature_residual = frobenius(&(r - &(pi1(fm) * stats.nu_hat))) / (1.0 + frobenius(r));
    let tau_defect = (traces.scalar - (2.0 * n as f64 - 1.0) * traces.star_scalar).abs();
    let status = if class != PointClass::HermitianNonKaehler {
        TheoremAStatus::NotApplicable
    } else if !(stats.max_dev < CONSTANCY_TOL && residual25 < TOL_VERDICT) {
        TheoremAStatus::HypothesisFails
    } else if constant_curvature_residual < TOL_VERDICT && tau_defect < TOL_VERDICT * (1.0 + traces.scalar.abs()) {
        TheoremAStatus::Verified
    } else {
        TheoremAStatus::Violation
    };
    Ok(TheoremAEvidence {
        status,
        constant_curvature_residual,
        tau_defect,
    })
}

/// Runs the implication check on an algebraic curvature tensor with an
/// externally supplied class, sampling its antiholomorphic curvature first.
pub fn theorem_a_algebraic(
    r: &Tensor4,
    fm: &FrameMetric,
    class: PointClass,
    seed: u64,
) -> Result<TheoremAEvidence, VerifyError> {
    let traces = ricci_traces(r, fm);
    let stats = constancy_stats_for(r, fm, DEFAULT_SAMPLES, DEFAULT_RESTARTS, seed, 0)?;
    let res = residual_constant_antiholo(r, &traces.star_ricci, traces.star_scalar, stats.nu_hat, fm);
    theorem_a_decide(class, r, fm, &traces, &stats, res.residual25)
}

pub fn theorem_a_check(m: &ChartManifold, p: &[f64]) -> Result<TheoremAStatus, VerifyError> {
    if m.n() < 3 {
        return Err(VerifyError::DimensionFourExcluded { n: m.n() });
    }
    let d = diagnose_point(m, p, &ScanOptions::default(), 0)?;
    Ok(d.theorem_a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub index: usize,
    pub point: Vec<f64>,
    pub class: PointClass,
    pub f_norm: f64,
    pub n_norm: f64,
    pub hermitian_residual: f64,
    pub class_threshold: f64,
    pub nu_hat: f64,
    pub max_dev: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub sample_min: f64,
    pub sample_max: f64,
    pub samples: usize,
    pub restarts: usize,
    pub rng_stream: u64,
    pub tau: f64,
    pub tau_star: f64,
    pub residual25: f64,
    pub residual26: f64,
    pub fit: Option<PiFit>,
    pub trace_checks: TraceChecks,
    pub property_suite: Vec<SuiteRow>,
    pub theorem_a: TheoremAStatus,
    pub constant_curvature_residual: f64,
}

impl PointDiagnostics {
    pub fn suite_failures(&self) -> usize {
        self.property_suite
            .iter()
            .filter(|r| r.verdict == Verdict::Fail)
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub samples: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            samples: DEFAULT_SAMPLES,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

/// Point `index` samples planes on streams `4(index+1)` and `4(index+1)+1`
/// and probes `T^{1,0}` on stream `4(index+1)+2`; stream 0 draws random points.
pub fn diagnose_point(
    m: &ChartManifold,
    p: &[f64],
    opts: &ScanOptions,
    index: usize,
) -> Result<PointDiagnostics, VerifyError> {
    let pkg = curvature_package(m, p, true)?;
    let base = 4 * (index as u64 + 1);
    let classification = classify_package(&pkg);
    let fm = &pkg.frame_metric;
    let stats = constancy_stats_for(&pkg.r, fm, opts.samples, opts.restarts, opts.seed, base / 2)?;
    let residual = residual_constant_antiholo(&pkg.r, &pkg.traces.star_ricci, pkg.traces.star_scalar, stats.nu_hat, fm);
    let fit = fit_pi_basis(&pkg.r, fm).ok();
    let ctx = SuiteContext {
        classification: &classification,
        stats: &stats,
        residual: &residual,
        fit: fit.as_ref(),
        seed: opts.seed,
        stream: base + 2,
    };
    let property_suite = property_suite_for(&pkg, &ctx);
    let theorem = theorem_a_decide(
        classification.class,
        &pkg.r,
        fm,
        &pkg.traces,
        &stats,
        residual.residual25,
    )?;
    Ok(PointDiagnostics {
        index,
        point: p.to_vec(),
        class: classification.class,
        f_norm: classification.f_norm,
        n_norm: classification.n_norm,
        hermitian_residual: classification.hermitian_residual,
        class_threshold: classification.threshold,
        nu_hat: stats.nu_hat,
        max_dev: stats.max_dev,
        k_min: stats.k_min,
        k_max: stats.k_max,
        sample_min: stats.sample_min,
        sample_max: stats.sample_max,
        samples: stats.m,
        restarts: stats.restarts,
        rng_stream: base,
        tau: pkg.traces.scalar,
        tau_star: pkg.traces.star_scalar,
        residual25: residual.residual25,
        residual26: residual.residual26,
        fit,
        trace_checks: trace_checks(&pkg.traces, stats.nu_hat, pkg.n),
        property_suite,
        theorem_a: theorem.status,
        constant_curvature_residual: theorem.constant_curvature_residual,
    })
}

/// The property suite alone at one point.
pub fn property_suite(m: &ChartManifold, p: &[f64], opts: &ScanOptions) -> Result<Vec<SuiteRow>, VerifyError> {
    let pkg = curvature_package(m, p, true)?;
    let classification = classify_package(&pkg);
    let fm = &pkg.frame_metric;
    let stats = constancy_stats_for(&pkg.r, fm, opts.samples, opts.restarts, opts.seed, 2)?;
    let residual = residual_constant_antiholo(&pkg.r, &pkg.traces.star_ricci, pkg.traces.star_scalar, stats.nu_hat, fm);
    let fit = fit_pi_basis(&pkg.r, fm).ok();
    let ctx = SuiteContext {
        classification: &classification,
        stats: &stats,
        residual: &residual,
        fit: fit.as_ref(),
        seed: opts.seed,
        stream: 6,
    };
    Ok(property_suite_for(&pkg, &ctx))
}

/// How scan points are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampler {
    /// `N^n` points: real parts on the interior grid `(k+1)/(N+1)` of each
    /// axis, imaginary parts at the domain midpoint.
    Grid(usize),
    /// `K` uniform points from the domain.
    Random(usize),
}

impl FromStr for Sampler {
    type Err = VerifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || VerifyError::BadSampler(s.to_string());
        let (kind, count) = s.split_once(':').ok_or_else(bad)?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(bad());
        }
        match kind.trim() {
            "grid" => Ok(Sampler::Grid(count)),
            "random" => Ok(Sampler::Random(count)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Grid(k) => write!(f, "grid:{k}"),
            Sampler::Random(k) => write!(f, "random:{k}"),
        }
    }
}

impl Sampler {
    pub fn points(&self, m: &ChartManifold, seed: u64) -> Vec<Vec<f64>> {
        let domain = m.domain();
        match *self {
            Sampler::Random(k) => domain.random_points(k, seed, 0),
            Sampler::Grid(per_axis) => {
                let n = m.n();
                let mid = domain.center();
                let total = per_axis.pow(n as u32);
                (0..total)
                    .map(|mut code| {
                        let mut p = mid.clone();
                        for (a, x) in p.iter_mut().take(n).enumerate() {
                            let k = code % per_axis;
                            code /= per_axis;
                            let (lo, hi) = domain.bounds[a];
                            *x = lo + (hi - lo) * (k + 1) as f64 / (per_axis + 1) as f64;
                        }
                        p
                    })
                    .filter(|p| domain.contains(p))
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub kaehler: usize,
    pub hermitian_non_kaehler: usize,
    pub non_integrable: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub point_count: usize,
    pub classes: ClassCounts,
    pub nu_hat_min: f64,
    pub nu_hat_max: f64,
    /// `max ν̂ − min ν̂` across points.
    pub nu_hat_spread: f64,
    pub max_dev_max: f64,
    /// Points with `max_dev` below the constancy tolerance.
    pub pointwise_constant: usize,
    /// Every point constant and the spread below the constancy tolerance.
    pub globally_constant: bool,
    pub suite_failures: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldReport {
    pub tool_version: String,
    pub manifold: String,
    pub params: Vec<f64>,
    pub n: usize,
    pub sampler: String,
    pub seed: u64,
    pub samples: usize,
    pub restarts: usize,
    pub points: Vec<PointDiagnostics>,
    pub summary: ScanSummary,
}

fn summarize(points: &[PointDiagnostics]) -> ScanSummary {
    let count = |c: PointClass| points.iter().filter(|p| p.class == c).count();
    let nu_min = points.iter().map(|p| p.nu_hat).fold(f64::INFINITY, f64::min);
    let nu_max = points.iter().map(|p| p.nu_hat).fold(f64::NEG_INFINITY, f64::max);
    let pointwise_constant = points.iter().filter(|p| p.max_dev < CONSTANCY_TOL).count();
    ScanSummary {
        point_count: points.len(),
        classes: ClassCounts {
            kaehler: count(PointClass::Kaehler),
            hermitian_non_kaehler: count(PointClass::HermitianNonKaehler),
            non_integrable: count(PointClass::NonIntegrable),
        },
        nu_hat_min: nu_min,
        nu_hat_max: nu_max,
        nu_hat_spread: nu_max - nu_min,
        max_dev_max: points.iter().map(|p| p.max_dev).fold(0.0, f64::max),
        pointwise_constant,
        globally_constant: pointwise_constant == points.len() && nu_max - nu_min < CONSTANCY_TOL,
        suite_failures: points.iter().map(|p| p.suite_failures()).sum(),
        violations: points
            .iter()
            .filter(|p| p.theorem_a == TheoremAStatus::Violation)
            .count(),
    }
}

/// Diagnoses every sample point in parallel; results keep sample order.
pub fn scan_manifold(m: &ChartManifold, sampler: Sampler, opts: &ScanOptions) -> Result<ManifoldReport, VerifyError> {
    if m.n() < 3 {
        return Err(VerifyError::DimensionFourExcluded { n: m.n() });
    }
    let pts = sampler.points(m, opts.seed);
    if pts.is_empty() {
        return Err(VerifyError::EmptySample);
    }
    let points = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| diagnose_point(m, p, opts, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ManifoldReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        manifold: m.name.clone(),
        params: m.params.clone(),
        n: m.n(),
        sampler: sampler.to_string(),
        seed: opts.seed,
        samples: opts.samples,
        restarts: opts.restarts,
        summary: summarize(&points),
        points,
    })
}
