//! Per-kind grid-point runners and the checks aggregated over a sweep.

use super::{compare, create, logspace, regress_loglog, run_points, Check, ExperimentSpec, GridPoint, Kind, RunSummary};
use crate::boundary_layers::{build_b, resonant_shape, BoundaryLayerSolution, BoundaryTrace, Part, Side};
use crate::correctors::{assemble_dirichlet_approx, assemble_wind_approx, AssemblyOptions};
use crate::direct::{node_weights, solve_direct, DirectConfig, DirectSolution};
use crate::envelope::ekman_coefficient;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{norms, ModeField};
use crate::quad::ZRule;
use crate::spectral::{Params, SpectralField};
use crate::C64;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

type Values = BTreeMap<String, f64>;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn unit_h(beta: f64) -> [C64; 2] {
    [C64::new(beta, 0.0), zero()]
}

pub(crate) fn direct_config(spec: &ExperimentSpec, p: &Params, t_end: f64) -> DirectConfig {
    let ratio = spec.dt_ratio.unwrap_or(0.01);
    let nz = spec.nz.unwrap_or(match spec.kind {
        Kind::Destabilization => 256,
        _ => 512,
    });
    let mut cfg = DirectConfig::new(t_end, ratio * p.epsilon, nz);
    let steps = (t_end / cfg.dt).round().max(1.0) as usize;
    cfg.stride = spec.stride.unwrap_or((steps / 40).clamp(1, 50));
    // grid points already run in parallel
    cfg.execution = Execution::Sequential;
    cfg
}

fn write_direct(sol: &DirectSolution, dir: &Path) -> Result<()> {
    for (kh, m) in &sol.modes {
        m.write_csv(create(&dir.join(format!("direct_{}_{}.csv", kh[0], kh[1])))?)?;
        m.write_diagnostics_csv(create(&dir.join(format!("diagnostics_{}_{}.csv", kh[0], kh[1])))?)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

pub(crate) fn run_kind(spec: &ExperimentSpec, out: &Path, exec: Execution) -> Result<RunSummary> {
    let name = serde_json::to_value(spec.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let f: &super::PointFn = match spec.kind {
        Kind::BlScaling => &bl_point,
        Kind::ResonantGrowth => &resonant_point,
        Kind::WindConvergence => &wind_point,
        Kind::DirichletConvergence => &dirichlet_point,
        Kind::EkmanRate => &ekman_point,
        Kind::Destabilization => &destabilization_point,
    };
    let points = run_points(spec, out, exec, f)?;
    let mut s = RunSummary::new(&format!("sweep:{name}"), spec, points);
    let tol = &spec.tolerances;
    match spec.kind {
        Kind::BlScaling => {
            s.slope_check("classical_j0", "x_classical", "classical_j0", 0.25, tol.bl_classical_slope);
            s.slope_check("classical_j1", "x_classical", "classical_j1", 0.75, tol.bl_classical_slope);
            s.slope_check("quasi_j0", "x_quasi", "quasi_j0", 0.25, tol.bl_quasi_slope);
            s.slope_check("quasi_j1", "x_quasi", "quasi_j1", 0.75, tol.bl_quasi_slope);
        }
        Kind::ResonantGrowth => {
            for p in s.points.clone().iter().filter(|p| p.error.is_none()) {
                s.checks.push(Check::near(format!("{}.slope", p.dir), p.values["slope"], 0.25, tol.resonant_slope));
                s.checks.push(Check::above(format!("{}.interior_fraction", p.dir), p.values["interior_fraction"], tol.resonant_fraction));
            }
        }
        Kind::WindConvergence => {
            s.slope_check("sup_app", "x", "sup_app_per_beta", 0.75, tol.wind_slope);
            for p in s.points.clone().iter().filter(|p| p.values.contains_key("direct_ratio")) {
                s.checks.push(Check::below(format!("{}.direct_ratio", p.dir), p.values["direct_ratio"], tol.wind_direct_ratio));
                s.checks.push(Check::below(format!("{}.divergence", p.dir), p.values["divergence"], tol.divergence));
            }
        }
        Kind::DirichletConvergence => dirichlet_checks(&mut s),
        Kind::EkmanRate => {
            for p in s.points.clone().iter().filter(|p| p.error.is_none()) {
                s.checks.push(Check::below(format!("{}.rate_rel_error", p.dir), p.values["rate_rel_error"], tol.ekman_rate));
            }
        }
        Kind::Destabilization => {
            for p in s.points.clone().iter().filter(|p| p.error.is_none()) {
                s.checks.push(Check::below(format!("{}.rel_error", p.dir), p.values["rel_error"], tol.destabilization));
                let (f, g) = (p.values["interior_fraction"], p.values["interior_fraction_strip"]);
                s.checks.push(Check::below(format!("{}.interior_fraction_rel_error", p.dir), (f - g).abs() / g, tol.destabilization));
            }
        }
    }
    s.finish();
    Ok(s)
}

/// Per series: errors strictly decrease as ε shrinks, the smallest-ε error is below tolerance.
fn dirichlet_checks(s: &mut RunSummary) {
    let tol = s.spec.tolerances.dirichlet_error;
    let series: std::collections::BTreeSet<usize> = s.points.iter().map(|p| p.point.series).collect();
    for sr in series {
        let mut pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|p| p.point.series == sr)
            .filter_map(|p| Some((p.point.epsilon, *p.values.get("error")?)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| b.0.total_cmp(&a.0));
        let worst_step = pts.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
        let label = if s.points.iter().any(|p| p.point.series > 0) { format!("series{sr}.") } else { String::new() };
        if pts.len() > 1 {
            s.checks.push(Check {
                name: format!("{label}error_decreasing"),
                value: worst_step,
                tolerance: 0.0,
                rule: "max over consecutive ε of error(next) - error(prev) < tolerance".into(),
                passed: worst_step < 0.0,
            });
        }
        s.checks.push(Check::below(format!("{label}error_smallest_epsilon"), pts.last().unwrap().1, tol));
    }
}

fn bl_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let kh = spec.kh();
    let mu_c = spec.mu.filter(|m| !crate::boundary_layers::is_unit_frequency(*m)).unwrap_or(2.0);
    let mut v = Values::new();
    let mut f = create(&dir.join("profiles.csv"))?;
    writeln!(f, "part,j,zeta,abs_uh")?;
    for (name, mu, part) in [("classical", mu_c, Part::Classical), ("quasi", 1.0, Part::QuasiResonant)] {
        let b0 = build_b(&BoundaryTrace::single(Side::Bottom, mu, kh, unit_h(1.0)), &BoundaryTrace::empty(Side::Top), &p)?;
        let b1 = build_b(&BoundaryTrace::empty(Side::Bottom), &BoundaryTrace::single(Side::Top, mu, kh, unit_h(g.beta)), &p)?;
        for (j, b) in [(0, &b0), (1, &b1)] {
            let view = b.view(part);
            let n = norms(&view, 0.0).horizontal;
            v.insert(format!("{name}_j{j}"), if j == 1 { n / g.beta } else { n });
            let d = view.min_scale();
            for i in 0..=100 {
                let zeta = i as f64 * 0.1;
                let z = if j == 0 { zeta * d } else { 1.0 - zeta * d };
                let u = view.profile(kh, 0.0, z.clamp(0.0, 1.0));
                writeln!(f, "{name},{j},{zeta:.4},{:.10e}", (u[0].norm_sqr() + u[1].norm_sqr()).sqrt())?;
            }
        }
    }
    let en = p.epsilon * p.nu;
    v.insert("x_classical".into(), en);
    v.insert("x_quasi".into(), en / (p.epsilon + p.sqrt_en()));
    Ok(v)
}

/// Fraction of ∫|v|² carried by z < 1/2 for a resonant top-wall profile.
pub fn interior_fraction(shape: impl Fn(f64) -> f64) -> f64 {
    let rule = ZRule::uniform(64, 16);
    let (mut lower, mut total) = (0.0, 0.0);
    for (&z, &w) in rule.z.iter().zip(&rule.w) {
        let s = shape(z).powi(2) * w;
        total += s;
        if z < 0.5 {
            lower += s;
        }
    }
    lower / total
}

fn resonant_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let b = build_b(&BoundaryTrace::single(Side::Bottom, 1.0, [0, 0], unit_h(1.0)), &BoundaryTrace::empty(Side::Top), &p)?;
    if b.resonant.is_empty() {
        return Err(Error::Incompatible("no resonant layer produced at mu = 1, k_h = 0".into()));
    }
    let view = b.view(Part::Resonant);
    let mut f = create(&dir.join("growth.csv"))?;
    writeln!(f, "nu_t,t,norm_h")?;
    let mut pts = vec![];
    for nt in logspace(1e-4, 1e-2, 9) {
        let t = nt / p.nu;
        let n = norms(&view, t).horizontal;
        writeln!(f, "{nt:.10e},{t:.10e},{n:.10e}")?;
        pts.push((nt, n));
    }
    let r = regress_loglog(&pts)?;
    let t1 = 1.0 / p.nu;
    let mut v = Values::new();
    v.insert("slope".into(), r.slope);
    v.insert("r_squared".into(), r.r_squared);
    v.insert("interior_fraction".into(), interior_fraction(|z| resonant_shape(Side::Top, p.nu, t1, z).0));
    v.insert(
        "interior_fraction_strip".into(),
        interior_fraction(|z| crate::boundary_layers::heat_strip_shape(Side::Top, p.nu, t1, z).0),
    );
    Ok(v)
}

fn wind_trace(spec: &ExperimentSpec, beta: f64) -> BoundaryTrace {
    let mu = spec.mu.unwrap_or(2.0);
    BoundaryTrace::single(Side::Top, mu, spec.kh(), unit_h(beta))
}

fn wind_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let mu = spec.mu.unwrap_or(2.0);
    if crate::boundary_layers::is_unit_frequency(mu) {
        return Err(Error::Spec("wind convergence needs a non-resonant frequency |mu| != 1".into()));
    }
    let sigma = wind_trace(spec, g.beta);
    let t_end = spec.t_end.unwrap_or(0.2);
    let opts = AssemblyOptions { times: (0..=8).map(|i| i as f64 * t_end / 8.0).collect(), ..Default::default() };
    let app = assemble_wind_approx(&sigma, &p, &opts)?;
    write_json(&dir.join("ledger.json"), &app.ledger)?;
    let mut v = Values::new();
    let sup = app.sup_norm();
    v.insert("x".into(), p.epsilon * p.nu);
    v.insert("sup_app".into(), sup);
    v.insert("sup_app_per_beta".into(), sup / g.beta);
    v.insert("truncation_k".into(), app.ledger.k as f64);
    if spec.is_direct_epsilon(g.epsilon) {
        let cfg = direct_config(spec, &p, t_end);
        let sol = solve_direct(&SpectralField::new(), &sigma, &p, &cfg)?;
        write_direct(&sol, dir)?;
        let c = compare(&sol, &app, None)?;
        c.write_csv(create(&dir.join("compare.csv"))?)?;
        v.insert("sup_direct".into(), sol.sup_norm());
        v.insert("direct_ratio".into(), sol.sup_norm() / sup);
        v.insert("sup_difference".into(), c.sup);
        v.insert("divergence".into(), sol.max_divergence());
    }
    Ok(v)
}

fn dirichlet_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let k = spec.mode_index();
    let gamma = SpectralField::single(k, C64::new(g.beta, 0.0));
    let t_end = spec.t_end.unwrap_or(0.5);
    let sol = solve_direct(&gamma, &BoundaryTrace::empty(Side::Top), &p, &direct_config(spec, &p, t_end))?;
    write_direct(&sol, dir)?;
    let opts = AssemblyOptions { times: vec![0.0, 0.5 * t_end, t_end], ..Default::default() };
    let app = assemble_dirichlet_approx(&gamma, &p, &opts)?;
    write_json(&dir.join("ledger.json"), &app.ledger)?;
    let c = compare(&sol, &app, Some(&["interior"]))?;
    c.write_csv(create(&dir.join("compare_interior.csv"))?)?;
    let full = compare(&sol, &app, None)?;
    full.write_csv(create(&dir.join("compare.csv"))?)?;
    let mut v = Values::new();
    v.insert("error".into(), c.sup / gamma.norm());
    v.insert("error_full_approx".into(), full.sup / gamma.norm());
    v.insert("attribution_ok".into(), full.attribution_ok as u8 as f64);
    v.insert("divergence".into(), sol.max_divergence());
    Ok(v)
}

fn ekman_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let k = spec.mode_index();
    let gamma = SpectralField::single(k, C64::new(g.beta, 0.0));
    let t_end = spec.t_end.unwrap_or(1.0);
    let sol = solve_direct(&gamma, &BoundaryTrace::empty(Side::Top), &p, &direct_config(spec, &p, t_end))?;
    write_direct(&sol, dir)?;
    let m = &sol.modes[&k.kh()];
    let amps = m.amplitudes(k)?;
    let mut f = create(&dir.join("amplitude.csv"))?;
    writeln!(f, "t,re,im,abs")?;
    for (t, a) in m.times.iter().zip(&amps) {
        writeln!(f, "{t:.10e},{:.10e},{:.10e},{:.10e}", a.re, a.im, a.norm())?;
    }
    let fit = m.fit_decay(k, (0.05 * t_end, t_end))?;
    let predicted = k.kh_norm().powi(2) + (p.nu / p.epsilon).sqrt() * ekman_coefficient(k, &p)?.a.re;
    let mut v = Values::new();
    v.insert("fitted_rate".into(), fit.rate.re);
    v.insert("fitted_rate_im".into(), fit.rate.im);
    v.insert("fit_residual".into(), fit.residual);
    v.insert("predicted_rate".into(), predicted);
    v.insert("rate_rel_error".into(), (fit.rate.re - predicted).abs() / predicted);
    v.insert("divergence".into(), sol.max_divergence());
    Ok(v)
}

/// Fraction of the energy of mode k_h on z < 1/2 for a direct snapshot.
fn direct_interior_fraction(sol: &DirectSolution, kh: [i64; 2], i: usize) -> f64 {
    let m = &sol.modes[&kh];
    let w = node_weights(&m.z);
    let (mut lower, mut total) = (0.0, 0.0);
    for ((z, w), u) in m.z.iter().zip(&w).zip(&m.snapshots[i].u) {
        let e = w * (u[0].norm_sqr() + u[1].norm_sqr() + u[2].norm_sqr());
        total += e;
        if *z < 0.5 {
            lower += e;
        }
    }
    lower / total
}

fn destabilization_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let mu = spec.mu.unwrap_or(1.0);
    if !crate::boundary_layers::is_unit_frequency(mu) {
        return Err(Error::Spec("destabilization needs a resonant frequency |mu| = 1".into()));
    }
    let sigma = BoundaryTrace::single(Side::Top, mu, [0, 0], unit_h(g.beta));
    let b: BoundaryLayerSolution = build_b(&BoundaryTrace::empty(Side::Bottom), &sigma, &p)?;
    let t_end = spec.t_end.unwrap_or(1.0 / p.nu);
    let sol = solve_direct(&SpectralField::new(), &sigma, &p, &direct_config(spec, &p, t_end))?;
    write_direct(&sol, dir)?;
    let strip = crate::boundary_layers::StripView { sol: &b };
    let local = b.view(Part::All);
    let mut f = create(&dir.join("compare.csv"))?;
    writeln!(f, "t,direct_norm,approx_norm,error_strip,error_self_similar,interior_fraction")?;
    let (mut sup_n, mut sup_e, mut sup_l) = (0.0f64, 0.0f64, 0.0f64);
    let n = sol.times().len();
    for (i, &t) in sol.times().iter().enumerate() {
        let a = norms(&strip, t).total;
        let e = sol.l2_difference(i, &strip);
        let l = sol.l2_difference(i, &local);
        let fr = direct_interior_fraction(&sol, [0, 0], i);
        writeln!(f, "{t:.10e},{:.10e},{a:.10e},{e:.10e},{l:.10e},{fr:.10e}", sol.l2_norm(i))?;
        sup_n = sup_n.max(a);
        sup_e = sup_e.max(e);
        sup_l = sup_l.max(l);
    }
    let mut v = Values::new();
    v.insert("nu_t_end".into(), p.nu * t_end);
    v.insert("rel_error".into(), sup_e / sup_n);
    v.insert("rel_error_self_similar".into(), sup_l / sup_n);
    v.insert("interior_fraction".into(), direct_interior_fraction(&sol, [0, 0], n - 1));
    v.insert("interior_fraction_strip".into(), interior_fraction(|z| crate::boundary_layers::heat_strip_shape(Side::Top, p.nu, t_end, z).0));
    v.insert("divergence".into(), sol.max_divergence());
    Ok(v)
}
