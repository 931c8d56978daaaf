//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use ekman_core::boundary_layers::decay_rates;
use ekman_core::correctors::{
    duhamel_quadrature, scalar_product_forms, scalar_product_quadrature, small_divisor_corrector, stopping_lift, InitialCondition, Poly,
    SourceEntry, SourceTable, WallData,
};
use ekman_core::exec::Execution;
use ekman_core::harness::{eigen_suite, regress_loglog, run, ExperimentSpec, Kind, RunSummary};
use ekman_core::quad::ZRule;
use ekman_core::spectral::HORIZONTAL_AREA;
use ekman_core::{ModeIndex, Params, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sweep(kind: Kind, edit: impl FnOnce(&mut ExperimentSpec)) -> RunSummary {
    let mut spec = ExperimentSpec { kind, ..Default::default() };
    edit(&mut spec);
    let dir = tempfile::tempdir().expect("temp dir");
    run(&spec, dir.path(), Execution::default()).expect("sweep runs")
}

fn describe(s: &RunSummary) -> String {
    s.checks.iter().map(|c| format!("{}={:.4e}{}", c.name, c.value, if c.passed { "" } else { "(!)" })).collect::<Vec<_>>().join(" ")
}

fn eigenbasis() -> Outcome {
    let r = eigen_suite(4.0, Execution::default()).expect("suite");
    outcome(r.max_error() < 1e-8, format!("{} modes, max error {:.2e}", r.modes, r.max_error()))
}

fn ekman_roots() -> Outcome {
    let r = decay_rates(0.0, [1, 0], &Params::new(1e-6, 1e-6)).expect("roots");
    let s = C64::from_polar(1.0, PI / 4.0);
    let (em, ep) = ((r.lambda_minus - s).norm(), (r.lambda_plus - s.conj()).norm());
    outcome(em < 1e-2 && ep < 1e-2, format!("|λ⁻ − e^(iπ/4)| = {em:.2e}, |λ⁺ − e^(−iπ/4)| = {ep:.2e}"))
}

fn quasi_resonant_rate() -> Outcome {
    let mut pts = vec![];
    let mut ratios = vec![];
    for e in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
        let p = Params::new(e, e);
        let lam = decay_rates(1.0, [1, 0], &p).expect("roots").lambda_plus.norm();
        let x = e + p.sqrt_en();
        pts.push((x, lam));
        ratios.push(lam / x.sqrt());
    }
    let r = regress_loglog(&pts).expect("regression");
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome((r.slope - 0.5).abs() <= 0.05 && spread < 10.0, format!("slope {:.4}, ratio spread {spread:.3}", r.slope))
}

fn bl_scaling() -> Outcome {
    let s = sweep(Kind::BlScaling, |_| {});
    outcome(s.passed, describe(&s))
}

fn resonant_growth() -> Outcome {
    let s = sweep(Kind::ResonantGrowth, |s| s.epsilon = vec![1e-3]);
    outcome(s.passed, describe(&s))
}

fn dirichlet_convergence() -> Outcome {
    let s = sweep(Kind::DirichletConvergence, |s| {
        s.epsilon = vec![1e-2, 3e-3, 1e-3];
        s.nz = Some(512);
        s.t_end = Some(0.5);
    });
    let errs: Vec<String> = s.points.iter().map(|p| format!("{:.0e}:{:.4}", p.point.epsilon, p.values.get("error").copied().unwrap_or(f64::NAN))).collect();
    outcome(s.passed, format!("errors {} | {}", errs.join(" "), describe(&s)))
}

fn ekman_rate() -> Outcome {
    let s = sweep(Kind::EkmanRate, |s| {
        s.epsilon = vec![1e-3];
        s.t_end = Some(1.0);
    });
    let v = &s.points[0].values;
    outcome(
        s.passed,
        format!(
            "fitted {:.5} vs predicted {:.5} | {}",
            v.get("fitted_rate").copied().unwrap_or(f64::NAN),
            v.get("predicted_rate").copied().unwrap_or(f64::NAN),
            describe(&s)
        ),
    )
}

/// Σ_{a+b≤2} |k_h|^{2a} ‖∂z^b w‖² over the strip, times the horizontal area.
fn h2_norm_sqr(kh: [i64; 2], w: &Poly) -> f64 {
    let k2 = (kh[0] * kh[0] + kh[1] * kh[1]) as f64;
    let rule = ZRule::gauss(8);
    let ders = [*w, w.dz(), w.dz().dz()];
    let mut s = 0.0;
    for (b, d) in ders.iter().enumerate() {
        let weight: f64 = (0..=(2 - b)).map(|a| k2.powi(a as i32)).sum();
        s += weight * rule.integrate(|z| d.eval(z).iter().map(|c| c.norm_sqr()).sum());
    }
    HORIZONTAL_AREA * s
}

fn h3_weight(kh: [i64; 2]) -> f64 {
    let k2 = (kh[0] * kh[0] + kh[1] * kh[1]) as f64;
    HORIZONTAL_AREA.sqrt() * (1.0 + k2).powf(1.5)
}

/// Orthonormal basis of admissible wall data; k_h = 0 ties the two vertical traces.
fn unit_data(kh: [i64; 2]) -> Vec<(WallData, WallData)> {
    let mut out = vec![];
    for i in 0..6 {
        let mut v = [C64::new(0.0, 0.0); 6];
        v[i] = C64::new(1.0, 0.0);
        if kh == [0, 0] {
            match i {
                2 => v[5] = v[2],
                5 => continue,
                _ => {}
            }
            let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|c| *c /= n);
        }
        out.push((WallData { h: [v[0], v[1]], v: v[2] }, WallData { h: [v[3], v[4]], v: v[5] }));
    }
    out
}

/// Largest ‖w‖_{H²} / ‖(δ⁰, δ¹)‖_{H³} for one horizontal mode, from the Gram matrix of the lift.
fn lift_operator_norm(kh: [i64; 2]) -> f64 {
    let cols: Vec<Poly> = unit_data(kh).into_iter().map(|(a, b)| stopping_lift(kh, a, b).expect("lift")).collect();
    let n = cols.len();
    // ⟨u, v⟩ polarized from the quadratic form
    let gram = DMatrix::from_fn(n, n, |i, j| {
        let q = |a: C64| {
            let mut p = cols[i];
            let s = cols[j].scaled(a);
            for d in 0..5 {
                p.h[d][0] += s.h[d][0];
                p.h[d][1] += s.h[d][1];
                p.v[d] += s.v[d];
            }
            h2_norm_sqr(kh, &p)
        };
        let one = C64::new(1.0, 0.0);
        let i_ = C64::new(0.0, 1.0);
        (C64::new(q(one) - q(-one), 0.0) + i_ * (q(i_) - q(-i_))) / 4.0
    });
    let lmax = gram.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max);
    lmax.sqrt() / h3_weight(kh)
}

fn stopping_lift_bound() -> Outcome {
    let kmax = 3i64;
    let modes: Vec<[i64; 2]> = (-kmax..=kmax).flat_map(|a| (-kmax..=kmax).map(move |b| [a, b])).collect();
    let c = modes.iter().map(|&kh| lift_operator_norm(kh)).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rnd = |rng: &mut ChaCha8Rng| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (mut worst_ratio, mut worst_div, mut worst_trace) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        // distinct modes keep the pieces orthogonal
        let n = rng.gen_range(1..=5);
        let picked = rand::seq::index::sample(&mut rng, modes.len(), n).into_vec();
        let (mut w2, mut d0n, mut d1n) = (0.0, 0.0, 0.0);
        for idx in picked {
            let kh = modes[idx];
            let d0 = WallData { h: [rnd(&mut rng), rnd(&mut rng)], v: rnd(&mut rng) };
            let mut d1 = WallData { h: [rnd(&mut rng), rnd(&mut rng)], v: rnd(&mut rng) };
            if kh == [0, 0] {
                d1.v = d0.v;
            }
            let w = stopping_lift(kh, d0, d1).expect("lift");
            // pointwise divergence and traces
            let ik = [C64::new(0.0, kh[0] as f64), C64::new(0.0, kh[1] as f64)];
            let dz = w.dz();
            for i in 0..=64 {
                let z = i as f64 / 64.0;
                let (u, d) = (w.eval(z), dz.eval(z));
                worst_div = worst_div.max((ik[0] * u[0] + ik[1] * u[1] + d[2]).norm());
            }
            let (b, t, tz) = (w.eval(0.0), w.eval(1.0), dz.eval(1.0));
            let e = [b[0] - d0.h[0], b[1] - d0.h[1], b[2] - d0.v, tz[0] - d1.h[0], tz[1] - d1.h[1], t[2] - d1.v];
            worst_trace = worst_trace.max(e.iter().map(|c| c.norm()).fold(0.0, f64::max));
            w2 += h2_norm_sqr(kh, &w);
            let hw = h3_weight(kh).powi(2);
            d0n += hw * d0.norm_sqr();
            d1n += hw * d1.norm_sqr();
        }
        worst_ratio = worst_ratio.max(w2.sqrt() / (c * (d0n.sqrt() + d1n.sqrt())));
    }
    outcome(
        worst_div < 1e-12 && worst_trace < 1e-12 && worst_ratio <= 1.0 + 1e-12,
        format!("C = {c:.4}, worst ‖w‖/(C·‖δ‖) = {worst_ratio:.4}, divergence {worst_div:.1e}, trace error {worst_trace:.1e}"),
    )
}

fn source_table() -> SourceTable {
    let e = |mu, l: (i64, i64, i64), s0, c| SourceEntry { mu, l: ModeIndex::new(l.0, l.1, l.2), s0, c };
    SourceTable {
        entries: vec![
            e(0.5, (1, 0, 1), C64::new(1.0, 0.0), C64::new(0.3, 0.0)),
            e(2.0, (1, 1, 2), C64::new(0.0, 0.5), C64::new(0.0, 0.0)),
            e(-0.3, (0, 1, -1), C64::new(0.2, -0.4), C64::new(0.1, 0.2)),
            e(0.0, (2, -1, 1), C64::new(-0.7, 0.1), C64::new(0.0, 0.0)),
        ],
    }
}

fn small_divisor() -> Outcome {
    let src = source_table();
    let mut pts = vec![];
    let mut worst_rel: f64 = 0.0;
    for e in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let p = Params::new(e, e);
        let w = small_divisor_corrector(&src, 8, &p, 0.0, InitialCondition::Special).expect("corrector");
        pts.push((e, w.norm()));
        let t = 0.01;
        let z = small_divisor_corrector(&src, 8, &p, t, InitialCondition::Zero).expect("corrector");
        for en in &src.entries {
            let q = duhamel_quadrature(en, &p, t, C64::new(0.0, 0.0)).expect("quadrature");
            worst_rel = worst_rel.max((z.get(&en.l) - q).norm() / q.norm());
        }
    }
    let r = regress_loglog(&pts).expect("regression");
    outcome((r.slope - 1.0).abs() <= 0.05 && worst_rel < 1e-10, format!("slope {:.4}, closed form vs quadrature {worst_rel:.1e}", r.slope))
}

fn scalar_products() -> Outcome {
    let mut worst: f64 = 0.0;
    let modes = ModeIndex::ball(6.0);
    for l in &modes {
        let (a, b) = scalar_product_forms(*l).expect("forms");
        let (qa, qb) = scalar_product_quadrature(*l).expect("quadrature");
        worst = worst.max((a - qa).norm()).max((b - qb).norm());
    }
    outcome(worst < 1e-10, format!("{} modes, max difference {worst:.1e}", modes.len()))
}

fn wind_smallness() -> Outcome {
    let s = sweep(Kind::WindConvergence, |s| {
        s.epsilon = vec![1e-2, 1e-3, 1e-4, 1e-5];
        s.direct_epsilon = vec![1e-3];
    });
    outcome(s.passed, describe(&s))
}

type Criterion = (&'static str, Option<f64>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 eigenbasis suite", Some(10.0), eigenbasis),
        ("2 Ekman root recovery", Some(1.0), ekman_roots),
        ("3 quasi-resonant rate scaling", Some(1.0), quasi_resonant_rate),
        ("4 boundary-layer norm scalings", Some(10.0), bl_scaling),
        ("5 resonant growth", Some(10.0), resonant_growth),
        ("6 Dirichlet convergence", None, dirichlet_convergence),
        ("7 Ekman pumping rate", None, ekman_rate),
        ("8 stopping lift bound", Some(5.0), stopping_lift_bound),
        ("9 small-divisor bound", Some(5.0), small_divisor),
        ("10 scalar-product closed forms", Some(5.0), scalar_products),
        ("11 wind-driven smallness", None, wind_smallness),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let t0 = Instant::now();
        let o = f();
        let secs = t0.elapsed().as_secs_f64();
        let in_time = budget.is_none_or(|b| secs < b);
        let ok = o.passed && in_time;
        if !ok {
            failed += 1;
        }
        let limit = budget.map(|b| format!(" (limit {b} s)")).unwrap_or_default();
        println!("{} criterion {name}: {} [{secs:.2} s{limit}]", if ok { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
