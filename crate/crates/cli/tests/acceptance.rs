//! Acceptance criteria, each checked at its stated tolerance and time budget.
//! Prints one PASS/FAIL line per criterion, then fails if any criterion did.

use std::f64::consts::FRAC_PI_2;
use std::process::Command;
use std::time::Instant;

use antiholo_core::curvid::{
    pi1, pi2, psi, q_from_star_ricci, random_admissible_q, residual_constant_antiholo, synthetic_r, QTensor,
};
use antiholo_core::manifold::{validate_structure_at, CATALOG};
use antiholo_core::planes::{
    constancy_stats_for, plane_at_angle, random_antiholomorphic_plane, sectional_curvature, DEFAULT_RESTARTS,
    DEFAULT_SAMPLES,
};
use antiholo_core::rng::{gaussian_vector, stream_rng, uniform, StreamRng};
use antiholo_core::tensor::{eval4, frobenius, max_abs, ricci_traces, symmetry_defects, FrameMetric, Tensor4};
use antiholo_core::tensorcalc::{curvature_package, riemann_at, second_bianchi_defect};
use antiholo_core::verify::{diagnose_point, hermitian_components, PointClass, ScanOptions, TheoremAStatus};
use antiholo_core::{catalog_manifold, ChartManifold};
use ndarray::{Array1, Array2, Array4};
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> ChartManifold {
    let params: &[f64] = match name {
        "flat" | "hopf" => &[3.0],
        "fubini_study" => &[3.0, 4.0],
        "twisted_j" => &[3.0, 0.1],
        other => panic!("no default parameters for {other}"),
    };
    catalog_manifold(name, params).unwrap()
}

fn structure_axioms() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for name in CATALOG {
        let m = fixture(name);
        let probes = m.domain().probe_grid(3, 200);
        ensure(!probes.is_empty() && probes.len() <= 200, || {
            format!("{name}: {} probes", probes.len())
        })?;
        for p in probes {
            let v = validate_structure_at(&m, &p).map_err(|e| e.to_string())?;
            ensure(v.min_eigenvalue_ratio > 0.0, || {
                format!("{name} not positive definite at {p:?}")
            })?;
            let r = v.symmetry_defect.max(v.j_squared_defect).max(v.compatibility_defect);
            ensure(r < 1e-9, || format!("{name} residual {r:e} at {p:?}"))?;
            worst = worst.max(r);
            count += 1;
        }
    }
    Ok(format!("{count} probe points, max residual {worst:.2e}"))
}

/// `(c/4)` times the curvature of a complex space form built directly from `g = I`
/// and `ω = J0`.
fn space_form_oracle(n: usize, c: f64) -> Tensor4 {
    let d = 2 * n;
    let mut w = Array2::<f64>::zeros((d, d));
    for a in 0..n {
        w[[n + a, a]] = 1.0;
        w[[a, n + a]] = -1.0;
    }
    let g = Array2::<f64>::eye(d);
    Array4::from_shape_fn((d, d, d, d), |(i, j, k, l)| {
        0.25 * c
            * (g[[i, l]] * g[[j, k]] - g[[i, k]] * g[[j, l]] + w[[i, l]] * w[[j, k]]
                - w[[i, k]] * w[[j, l]]
                - 2.0 * w[[i, j]] * w[[k, l]])
    })
}

fn curvature_correctness() -> Outcome {
    let m = fixture("fubini_study");
    let origin = [0.0; 6];
    let r = riemann_at(&m, &origin).map_err(|e| e.to_string())?;
    let gap = max_abs(&(&r - &space_form_oracle(3, 4.0)));
    ensure(gap < 1e-8, || format!("componentwise gap {gap:e}"))?;
    let pkg = curvature_package(&m, &origin, false).map_err(|e| e.to_string())?;
    let fm = &pkg.frame_metric;
    let anti = sectional_curvature(&pkg.r, &plane_at_angle(fm, FRAC_PI_2).map_err(|e| e.to_string())?);
    let holo = sectional_curvature(&pkg.r, &plane_at_angle(fm, 0.0).map_err(|e| e.to_string())?);
    ensure((anti - 1.0).abs() < 1e-8, || format!("antiholomorphic K {anti}"))?;
    ensure((holo - 4.0).abs() < 1e-8, || format!("holomorphic K {holo}"))?;
    Ok(format!(
        "max |R - oracle| {gap:.2e}, K_anti {anti:.12}, K_holo {holo:.12}"
    ))
}

/// Generic algebraic curvature tensor: Kulkarni–Nomizu square of a random symmetric form.
fn kulkarni_nomizu_square(rng: &mut StreamRng, d: usize) -> Tensor4 {
    let m = Array2::from_shape_fn((d, d), |_| uniform(rng, -1.0, 1.0));
    let a = (&m + &m.t()) * 0.5;
    Array4::from_shape_fn((d, d, d, d), |(i, j, k, l)| {
        a[[i, l]] * a[[j, k]] - a[[i, k]] * a[[j, l]]
    })
}

fn identity_residuals() -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, nu) in [("flat", 0.0), ("fubini_study", 1.0)] {
        let m = fixture(name);
        for p in m.domain().random_points(5, 11, 0) {
            let pkg = curvature_package(&m, &p, false).map_err(|e| e.to_string())?;
            let t = &pkg.traces;
            let res = residual_constant_antiholo(&pkg.r, &t.star_ricci, t.star_scalar, nu, &pkg.frame_metric);
            ensure(res.residual25 < 1e-8 && res.residual26 < 1e-8, || {
                format!("{name} at {p:?}: {res:?}")
            })?;
            ensure((res.residual25 - res.residual26).abs() < 1e-10, || {
                format!("{name}: forms differ {res:?}")
            })?;
            worst = worst.max(res.residual25).max(res.residual26);
        }
    }
    let mut split: f64 = 0.0;
    let mut rng = stream_rng(12, 0);
    for n in [3, 4] {
        let fm = FrameMetric::standard(n);
        for _ in 0..50 {
            let nu = uniform(&mut rng, -2.0, 2.0);
            let q = random_admissible_q(&mut rng, &fm);
            let noise = kulkarni_nomizu_square(&mut rng, 2 * n) * uniform(&mut rng, 0.0, 1.0);
            for r in [
                synthetic_r(&q, nu, &fm),
                &synthetic_r(&q, nu, &fm) + &noise,
                noise.clone(),
            ] {
                let t = ricci_traces(&r, &fm);
                let res = residual_constant_antiholo(&r, &t.star_ricci, t.star_scalar, nu, &fm);
                split = split.max((res.residual25 - res.residual26).abs());
            }
        }
    }
    ensure(split < 1e-10, || format!("|residual25 - residual26| reached {split:e}"))?;
    Ok(format!("fixture residual {worst:.2e}, max form split {split:.2e}"))
}

fn random_unit(rng: &mut StreamRng, d: usize) -> Array1<f64> {
    let v = gaussian_vector(rng, d);
    let norm = v.dot(&v).sqrt();
    v / norm
}

fn psi_algebra() -> Outcome {
    let fm = FrameMetric::standard(3);
    let g = QTensor::new(fm.g.clone(), &fm).map_err(|e| e.to_string())?;
    let gap = max_abs(&(&psi(&g, &fm) - &(pi2(&fm) * 2.0)));
    ensure(gap < 1e-13, || format!("Psi(g) - 2 pi2 = {gap:e}"))?;
    let mut rng = stream_rng(13, 0);
    let planes = (0..1000)
        .map(|_| random_antiholomorphic_plane(&fm, &mut rng))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let (mut vanish, mut sym): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let q = random_admissible_q(&mut rng, &fm);
        let t = psi(&q, &fm);
        for p in &planes {
            vanish = vanish.max(sectional_curvature(&t, p).abs());
        }
        let scale = 1.0 + max_abs(&t);
        for _ in 0..20 {
            let [x, y, z, w] = [0, 1, 2, 3].map(|_| random_unit(&mut rng, 6));
            let v = eval4(&t, &x, &y, &z, &w);
            let defects = [
                v + eval4(&t, &y, &x, &z, &w),
                v + eval4(&t, &x, &y, &w, &z),
                v - eval4(&t, &z, &w, &x, &y),
                v + eval4(&t, &y, &z, &x, &w) + eval4(&t, &z, &x, &y, &w),
            ];
            sym = defects.iter().fold(sym, |m, d| m.max(d.abs() / scale));
        }
    }
    ensure(vanish < 1e-10, || {
        format!("Psi(Q) on antiholomorphic planes reached {vanish:e}")
    })?;
    ensure(sym < 1e-12, || format!("brute-force symmetry defect {sym:e}"))?;
    Ok(format!(
        "Psi(g) gap {gap:.1e}, antiholomorphic max {vanish:.2e}, symmetry {sym:.2e}"
    ))
}

fn forward_direction() -> Outcome {
    let fm = FrameMetric::standard(3);
    let mut rng = stream_rng(14, 0);
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let q = random_admissible_q(&mut rng, &fm);
        let nu = uniform(&mut rng, -2.0, 2.0);
        let r = synthetic_r(&q, nu, &fm);
        let stats =
            constancy_stats_for(&r, &fm, DEFAULT_SAMPLES, DEFAULT_RESTARTS, 14, k + 1).map_err(|e| e.to_string())?;
        let dev = [
            stats.nu_hat,
            stats.sample_min,
            stats.sample_max,
            stats.k_min,
            stats.k_max,
        ]
        .iter()
        .fold(0.0_f64, |m, v| m.max((v - nu).abs()));
        ensure(dev < 1e-7, || format!("nu {nu}: deviation {dev:e} ({stats:?})"))?;
        worst = worst.max(dev);
    }
    Ok(format!("100 synthetic tensors, max |K - nu| {worst:.2e}"))
}

fn negative_control() -> Outcome {
    let m = fixture("hopf");
    let probes = m.domain().probe_grid(3, 200);
    let opts = ScanOptions::default();
    let diags = probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| diagnose_point(&m, p, &opts, i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut min_dev = f64::INFINITY;
    for d in &diags {
        ensure(d.class == PointClass::HermitianNonKaehler, || {
            format!("class {} at {:?}", d.class, d.point)
        })?;
        ensure(d.f_norm > d.class_threshold && d.n_norm < d.class_threshold, || {
            format!(
                "|F| {} |N| {} threshold {} at {:?}",
                d.f_norm, d.n_norm, d.class_threshold, d.point
            )
        })?;
        ensure(d.max_dev > 1e-2, || format!("max_dev {} at {:?}", d.max_dev, d.point))?;
        ensure(d.theorem_a == TheoremAStatus::HypothesisFails, || {
            format!("{} at {:?}", d.theorem_a, d.point)
        })?;
        min_dev = min_dev.min(d.max_dev);
    }
    Ok(format!("{} probe points, smallest max_dev {min_dev:.3}", diags.len()))
}

fn trace_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [3usize, 4] {
        let fm = FrameMetric::standard(n);
        let d = 2.0 * n as f64;
        for nu in [-1.0, 0.5, 2.0] {
            let r = pi1(&fm) * nu;
            let t = ricci_traces(&r, &fm);
            let q = q_from_star_ricci(&t.star_ricci, t.star_scalar, nu, n, &fm.g);
            let errs = [
                t.scalar - (d - 1.0) * t.star_scalar,
                nu - t.scalar / (d * (d - 1.0)),
                nu - t.star_scalar / d,
                q.trace(),
            ];
            let e = errs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            ensure(e < 1e-10, || format!("n={n} nu={nu}: {errs:?}"))?;
            worst = worst.max(e);
        }
    }
    Ok(format!("max defect {worst:.2e}"))
}

fn hermitian_structure() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut essential: f64 = 0.0;
    for name in ["hopf", "fubini_study"] {
        let m = fixture(name);
        let mut points = m.domain().random_points(5, 15, 0);
        points.push(if name == "hopf" {
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        } else {
            vec![0.0; 6]
        });
        for p in points {
            let pkg = curvature_package(&m, &p, false).map_err(|e| e.to_string())?;
            let hc = hermitian_components(&pkg.f, pkg.n);
            let e = hc.nabla_j_max.max(hc.nonessential_max).max(hc.essential_skew);
            ensure(e < 1e-8, || format!("{name} at {p:?}: {hc:?}"))?;
            worst = worst.max(e);
            if name == "hopf" {
                essential = essential.max(hc.essential_max);
            }
        }
    }
    ensure(essential > 1e-3, || "hopf F has no essential components".into())?;
    Ok(format!(
        "max vanishing component {worst:.2e}, hopf essential size {essential:.3}"
    ))
}

fn bianchi_suite() -> Outcome {
    let (mut first, mut second): (f64, f64) = (0.0, 0.0);
    for name in CATALOG {
        let m = fixture(name);
        for p in m.domain().random_points(10, 16, 0) {
            let pkg = curvature_package(&m, &p, true).map_err(|e| e.to_string())?;
            let b1 = symmetry_defects(&pkg.r).first_bianchi / (1.0 + max_abs(&pkg.r));
            let nr = pkg.nabla_r.as_ref().expect("derivative requested");
            let b2 = second_bianchi_defect(nr) / (1.0 + frobenius(nr));
            ensure(b1 < 1e-8, || format!("{name} first Bianchi {b1:e} at {p:?}"))?;
            ensure(b2 < 1e-7, || format!("{name} second Bianchi {b2:e} at {p:?}"))?;
            first = first.max(b1);
            second = second.max(b2);
        }
    }
    Ok(format!("first {first:.2e}, second {second:.2e}"))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("out{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_antiholo"))
            .args([
                "analyze",
                "--catalog",
                "hopf",
                "--params",
                "3",
                "--points",
                "random:5",
                "--seed",
                "7",
                "--json",
            ])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.code() == Some(0), || {
            String::from_utf8_lossy(&status.stderr).into_owned()
        })?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "JSON differs between runs".into())?;
    Ok(format!("{} identical bytes", outputs[0].len()))
}

struct Criterion {
    id: u8,
    title: &'static str,
    budget_s: f64,
    check: fn() -> Outcome,
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        id: 1,
        title: "structure axioms",
        budget_s: 5.0,
        check: structure_axioms,
    },
    Criterion {
        id: 2,
        title: "curvature correctness",
        budget_s: 5.0,
        check: curvature_correctness,
    },
    Criterion {
        id: 3,
        title: "constant antiholomorphic identity",
        budget_s: 10.0,
        check: identity_residuals,
    },
    Criterion {
        id: 4,
        title: "Psi algebra",
        budget_s: 10.0,
        check: psi_algebra,
    },
    Criterion {
        id: 5,
        title: "forward direction on synthetic tensors",
        budget_s: 30.0,
        check: forward_direction,
    },
    Criterion {
        id: 6,
        title: "hopf negative control",
        budget_s: 30.0,
        check: negative_control,
    },
    Criterion {
        id: 7,
        title: "trace identities",
        budget_s: 5.0,
        check: trace_identities,
    },
    Criterion {
        id: 8,
        title: "Hermitian component structure",
        budget_s: 10.0,
        check: hermitian_structure,
    },
    Criterion {
        id: 9,
        title: "Bianchi suite",
        budget_s: 60.0,
        check: bianchi_suite,
    },
    Criterion {
        id: 10,
        title: "reproducible JSON",
        budget_s: 60.0,
        check: reproducibility,
    },
];

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for c in &CRITERIA {
        let start = Instant::now();
        let outcome = (c.check)();
        let secs = start.elapsed().as_secs_f64();
        let outcome = outcome.and_then(|detail| {
            if secs < c.budget_s {
                Ok(detail)
            } else {
                Err(format!("{detail}; over time budget"))
            }
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!(
            "{tag} [{:>2}] {}: {detail} ({secs:.2} s, budget {} s)",
            c.id, c.title, c.budget_s
        );
        if outcome.is_err() {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
