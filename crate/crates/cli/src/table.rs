//! Fixed-width, locale-independent text output.

use std::io::{self, Write};

use antiholo_core::planes::{Extremum, TangentPlane};
use antiholo_core::verify::{ManifoldReport, SuiteRow};
use antiholo_core::ChartManifold;
use ndarray::Array2;

fn real(x: f64) -> String {
    format!("{x:>14.6e}")
}

fn label(name: &str, params: &[f64]) -> String {
    let ps: Vec<String> = params.iter().map(|p| p.to_string()).collect();
    format!("{name}({})", ps.join(","))
}

fn coords(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.9}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn write_report(out: &mut dyn Write, r: &ManifoldReport) -> io::Result<()> {
    writeln!(
        out,
        "manifold {}  n={}  points={}  seed={}  samples={}  restarts={}",
        label(&r.manifold, &r.params),
        r.n,
        r.sampler,
        r.seed,
        r.samples,
        r.restarts
    )?;
    writeln!(
        out,
        "{:>5}  {:<22}{:>14}{:>14}{:>14}  theorem_a",
        "point", "class", "nu_hat", "max_dev", "residual25"
    )?;
    for p in &r.points {
        writeln!(
            out,
            "{:>5}  {:<22}{}{}{}  {}",
            p.index,
            p.class.to_string(),
            real(p.nu_hat),
            real(p.max_dev),
            real(p.residual25),
            p.theorem_a
        )?;
    }
    let s = &r.summary;
    writeln!(
        out,
        "classes: KAEHLER {}  HERMITIAN_NON_KAEHLER {}  NON_INTEGRABLE {}",
        s.classes.kaehler, s.classes.hermitian_non_kaehler, s.classes.non_integrable
    )?;
    writeln!(
        out,
        "nu_hat range [{}, {}]  spread {}",
        real(s.nu_hat_min).trim(),
        real(s.nu_hat_max).trim(),
        real(s.nu_hat_spread).trim()
    )?;
    writeln!(
        out,
        "constant antiholomorphic curvature: pointwise {}/{}  global {}",
        s.pointwise_constant,
        s.point_count,
        if s.globally_constant { "YES" } else { "NO" }
    )?;
    writeln!(out, "suite failures {}  violations {}", s.suite_failures, s.violations)
}

pub fn write_suite(out: &mut dyn Write, m: &ChartManifold, p: &[f64], rows: &[SuiteRow]) -> io::Result<()> {
    writeln!(out, "checks {} at {}", label(&m.name, &m.params), coords(p))?;
    writeln!(
        out,
        "{:<44}{:>14}{:>14}  {:<9}{:>14}",
        "property", "residual", "tolerance", "verdict", "margin"
    )?;
    for row in rows {
        writeln!(
            out,
            "{:<44}{}{}  {:<9}{}",
            row.name,
            real(row.residual),
            real(row.tolerance),
            row.verdict.to_string(),
            real(row.residual - row.tolerance)
        )?;
    }
    Ok(())
}

fn plane_lines(out: &mut dyn Write, tag: &str, plane: &TangentPlane, e: &Array2<f64>) -> io::Result<()> {
    let x = e.dot(&plane.x);
    let y = e.dot(&plane.y);
    writeln!(out, "{tag} X = {}", coords(x.as_slice().expect("contiguous")))?;
    writeln!(out, "{tag} Y = {}", coords(y.as_slice().expect("contiguous")))
}

/// Plane vectors are printed in coordinate components.
pub fn write_extremum(
    out: &mut dyn Write,
    m: &ChartManifold,
    p: &[f64],
    frame: &Array2<f64>,
    ext: &Extremum,
) -> io::Result<()> {
    writeln!(out, "extremize {} at {}", label(&m.name, &m.params), coords(p))?;
    writeln!(out, "{:<12}{}", "K_min", real(ext.k_min))?;
    writeln!(out, "{:<12}{}", "K_max", real(ext.k_max))?;
    writeln!(out, "{:<12}{}", "gap", real(ext.k_max - ext.k_min))?;
    writeln!(out, "{:<12}{:>14}", "iterations", ext.iterations)?;
    plane_lines(out, "argmin", &ext.argmin, frame)?;
    plane_lines(out, "argmax", &ext.argmax, frame)
}
