//! Single-purpose commands (`modes`, `bl`, `envelope`, `direct`, `compare`) and `sweep`.

use super::kinds::direct_config;
use super::{compare, create, eigen_suite, run, run_points, Check, ExperimentSpec, GridPoint, RunSummary};
use crate::boundary_layers::{build_b, BoundaryTrace, Part, Side};
use crate::correctors::{assemble_dirichlet_approx, AssemblyOptions};
use crate::direct::solve_direct;
use crate::envelope::{damping_rate, ekman_coefficient, ekman_limit_coefficient, envelope_solve, evolve_c, trace_bounds, Pumping, Variant};
use crate::error::Result;
use crate::exec::Execution;
use crate::field::{max_divergence, rule_for, ModeField};
use crate::spectral::{eigenvalue, ModeIndex, SpectralField};
use crate::C64;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Modes,
    Bl,
    Envelope,
    Direct,
    Compare,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Modes => "modes",
            Command::Bl => "bl",
            Command::Envelope => "envelope",
            Command::Direct => "direct",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
        }
    }
}

type Values = BTreeMap<String, f64>;

/// Runs one command over the spec's grid and writes the bundle under `out`.
pub fn run_command(cmd: Command, spec: &ExperimentSpec, out: &Path, exec: Execution) -> Result<RunSummary> {
    if cmd == Command::Sweep {
        return run(spec, out, exec);
    }
    spec.validate()?;
    let f: &super::PointFn = match cmd {
        Command::Modes => &modes_point,
        Command::Bl => &bl_point,
        Command::Envelope => &envelope_point,
        Command::Direct => &direct_point,
        _ => &compare_point,
    };
    let points = run_points(spec, out, exec, f)?;
    let mut s = RunSummary::new(cmd.name(), spec, points);
    let tol = spec.tolerances.clone();
    if cmd == Command::Modes {
        let r = eigen_suite(spec.radius, exec)?;
        s.checks.push(Check::below("eigen_suite.max_error", r.max_error(), tol.eigen));
    }
    for p in s.points.clone().iter().filter(|p| p.error.is_none()) {
        let d = &p.dir;
        let v = &p.values;
        match cmd {
            Command::Bl => {
                s.checks.push(Check::below(format!("{d}.trace_error"), v["trace_error"], tol.traces));
                s.checks.push(Check::below(format!("{d}.divergence"), v["divergence"], tol.divergence));
            }
            Command::Envelope => {
                s.checks.push(Check::holds(format!("{d}.trace_bounds"), v["trace_bounds_hold"] == 1.0, "trace bounds hold at every sampled time"));
                s.checks.push(Check::below(format!("{d}.composition_error"), v["composition_error"], 1e-12));
                s.checks.push(Check::above(format!("{d}.decay"), v["rate_re"], 0.0));
            }
            Command::Direct => {
                s.checks.push(Check::below(format!("{d}.divergence"), v["divergence"], tol.divergence));
                if let Some(&g) = v.get("energy_growth") {
                    s.checks.push(Check::below(format!("{d}.energy_growth"), g, 1e-12));
                }
            }
            Command::Compare => {
                s.checks.push(Check::holds(format!("{d}.attribution"), v["attribution_ok"] == 1.0, "per-part norms bound the direct norm"));
            }
            _ => {}
        }
    }
    s.finish();
    s.write(out)?;
    Ok(s)
}

fn modes_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let mut f = create(&dir.join("modes.csv"))?;
    writeln!(f, "k1,k2,k3,lambda,damping_re,damping_im,a_re,a_im,limit_r,limit_i")?;
    let modes = ModeIndex::ball(spec.radius);
    for k in &modes {
        let lam = eigenvalue(*k)?;
        let d = damping_rate(*k, &p)?;
        let a = ekman_coefficient(*k, &p)?.a;
        let (r, i) = if k.kh_is_zero() { (0.0, 0.0) } else { ekman_limit_coefficient(*k)? };
        writeln!(f, "{},{},{},{lam:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{r:.10e},{i:.10e}", k.k1, k.k2, k.k3, d.re, d.im, a.re, a.im)?;
    }
    Ok(Values::from([("modes".into(), modes.len() as f64)]))
}

fn bl_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let kh = spec.kh();
    let mu = spec.mu.unwrap_or(2.0);
    let d0 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let d1 = [C64::new(g.beta, 0.0), C64::new(0.0, 0.0)];
    let b = build_b(&BoundaryTrace::single(Side::Bottom, mu, kh, d0), &BoundaryTrace::single(Side::Top, mu, kh, d1), &p)?;
    let view = b.view(Part::All);
    let t = 0.0;
    let mut f = create(&dir.join("profile.csv"))?;
    writeln!(f, "z,u1_re,u1_im,u2_re,u2_im,u3_re,u3_im")?;
    let mut zs = rule_for(view.min_scale()).z;
    zs.insert(0, 0.0);
    zs.push(1.0);
    for z in &zs {
        let u = view.profile(kh, t, *z);
        writeln!(f, "{z:.12e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}", u[0].re, u[0].im, u[1].re, u[1].im, u[2].re, u[2].im)?;
    }
    // traces are reproduced up to the opposite layer's exponentially small tail
    let bottom = view.profile(kh, t, 0.0);
    let top = view.profile_dz(kh, t, 1.0);
    let opp = b.trace_residuals(t);
    let tail_b: f64 = opp.classical.iter().chain(&opp.quasi_resonant).chain(&opp.resonant).map(|o| o.magnitude()).sum();
    let err = ((bottom[0] - d0[0]).norm() + (bottom[1] - d0[1]).norm() + (top[0] - d1[0]).norm() + (top[1] - d1[1]).norm() - tail_b).max(0.0);
    let n = crate::field::norms(&view, t);
    Ok(Values::from([
        ("trace_error".into(), err),
        ("divergence".into(), max_divergence(&view, t)),
        ("norm".into(), n.total),
        ("norm_h".into(), n.horizontal),
        ("norm_v".into(), n.vertical),
    ]))
}

fn envelope_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let k = spec.mode_index();
    let gamma = SpectralField::single(k, C64::new(g.beta, 0.0));
    let t_end = spec.t_end.unwrap_or(1.0);
    let times: Vec<f64> = (0..=20).map(|i| i as f64 * t_end / 20.0).collect();
    let exact = envelope_solve(&gamma, &p, &times, Variant::NoVertical, Pumping::Exact)?;
    let limit = envelope_solve(&gamma, &p, &times, Variant::NoVertical, Pumping::Limit)?;
    let mut f = create(&dir.join("envelope.csv"))?;
    writeln!(f, "t,c_re,c_im,abs_c,abs_c_limit")?;
    let (mut comp, mut bounds) = (0.0f64, true);
    for ((t, c), l) in times.iter().zip(&exact).zip(&limit) {
        let a = c.get(&k);
        writeln!(f, "{t:.10e},{:.10e},{:.10e},{:.10e},{:.10e}", a.re, a.im, a.norm(), l.get(&k).norm())?;
        comp = comp.max((evolve_c(&gamma, &p, *t, Variant::NoVertical)?.get(&k) - a).norm());
        bounds &= trace_bounds(&gamma, c, 2.0, &p)?.holds();
    }
    let r = crate::envelope::envelope_rate(k, &p, Variant::NoVertical, Pumping::Exact)?;
    Ok(Values::from([
        ("rate_re".into(), r.re),
        ("rate_im".into(), r.im),
        ("composition_error".into(), comp),
        ("trace_bounds_hold".into(), bounds as u8 as f64),
    ]))
}

fn direct_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let k = spec.mode_index();
    // a forcing frequency selects the wind-driven problem, otherwise the Dirichlet one
    let (gamma, sigma) = match spec.mu {
        Some(mu) => (SpectralField::new(), BoundaryTrace::single(Side::Top, mu, k.kh(), [C64::new(g.beta, 0.0), C64::new(0.0, 0.0)])),
        None => (SpectralField::single(k, C64::new(g.beta, 0.0)), BoundaryTrace::empty(Side::Top)),
    };
    let t_end = spec.t_end.unwrap_or(0.1);
    let sol = solve_direct(&gamma, &sigma, &p, &direct_config(spec, &p, t_end))?;
    for (kh, m) in &sol.modes {
        m.write_csv(create(&dir.join(format!("direct_{}_{}.csv", kh[0], kh[1])))?)?;
        m.write_diagnostics_csv(create(&dir.join(format!("diagnostics_{}_{}.csv", kh[0], kh[1])))?)?;
    }
    let mut v = Values::from([("divergence".into(), sol.max_divergence()), ("sup_norm".into(), sol.sup_norm())]);
    if spec.mu.is_none() {
        // unforced: energy may not grow once the initial data has been projected
        let growth = sol
            .modes
            .values()
            .flat_map(|m| m.diagnostics.windows(2).skip(1).map(|w| (w[1].energy - w[0].energy) / w[0].energy.max(1e-300)))
            .fold(f64::NEG_INFINITY, f64::max);
        v.insert("energy_growth".into(), growth);
    }
    Ok(v)
}

fn compare_point(g: &GridPoint, spec: &ExperimentSpec, dir: &Path) -> Result<Values> {
    let p = g.params(spec);
    p.validate()?;
    let k = spec.mode_index();
    let gamma = SpectralField::single(k, C64::new(g.beta, 0.0));
    let t_end = spec.t_end.unwrap_or(0.5);
    let sol = solve_direct(&gamma, &BoundaryTrace::empty(Side::Top), &p, &direct_config(spec, &p, t_end))?;
    let opts = AssemblyOptions { times: vec![0.0, 0.5 * t_end, t_end], ..Default::default() };
    let app = assemble_dirichlet_approx(&gamma, &p, &opts)?;
    let c = compare(&sol, &app, None)?;
    c.write_csv(create(&dir.join("compare.csv"))?)?;
    let ci = compare(&sol, &app, Some(&["interior"]))?;
    Ok(Values::from([
        ("sup_error".into(), c.sup),
        ("sup_error_interior".into(), ci.sup),
        ("attribution_ok".into(), c.attribution_ok as u8 as f64),
    ]))
}
