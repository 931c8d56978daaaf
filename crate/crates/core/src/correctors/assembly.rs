use super::{
    corrector_terms, lift_interior_vint0, lift_interior_vint1, stopping_lift, truncation_choice, wind_regime,
    InitialCondition, Regime, Shape, SourceEntry, SourceTable, Term, TermField, WallData,
};
use crate::boundary_layers::{build_b, BoundaryLayerSolution, BoundaryTrace, Side};
use crate::envelope::{envelope_rates, Pumping, Variant};
use crate::error::{Error, Result};
use crate::field::{max_divergence, norms, rule_for, ModeField, SumField, Vec3};
use crate::quad::ZRule;
use crate::spectral::{basis_profile, eigenvalue, n_vector, project_profile, ModeIndex, Params, SpectralField, HORIZONTAL_AREA};
use crate::C64;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
pub struct AssemblyOptions {
    pub times: Vec<f64>,
    pub k_override: Option<usize>,
    pub s0: f64,
    pub init: InitialCondition,
    pub variant: Variant,
    /// Extra vertical modes beyond K used when projecting the equation residual.
    pub residual_margin: i64,
    /// (C, α₀) for the scaling hypothesis.
    pub scaling: (f64, f64),
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            times: vec![0.0, 0.1, 0.25, 0.5],
            k_override: None,
            s0: 2.0,
            init: InitialCondition::Special,
            variant: Variant::NoVertical,
            residual_margin: 4,
            scaling: (1.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedPart {
    pub name: String,
    pub field: TermField,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Ledger {
    pub k: usize,
    pub times: Vec<f64>,
    pub part_norms: BTreeMap<String, Vec<f64>>,
    /// Traces handed to the stopping lift, L²(T²) at each time.
    pub lifted_bottom: Vec<f64>,
    pub lifted_top: Vec<f64>,
    /// Boundary residuals of the assembled sum (η₀ at z=0, η₁ at z=1).
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
    /// Vertical bottom trace of the first boundary layer plus its interior lift.
    pub eta0_3_pre: Vec<f64>,
    /// Equation residual projected on {N_l : |l3| ≤ K + margin}.
    pub equation_residual: Vec<f64>,
    /// ‖∂t(amplitude)·profile‖ from freezing slow amplitudes in layers.
    pub frozen_error: Vec<f64>,
    pub max_divergence: f64,
    pub delta_gamma: Option<f64>,
    pub scaling: Option<ScalingReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxSolution {
    pub params: Params,
    pub parts: Vec<NamedPart>,
    pub ledger: Ledger,
}

impl ApproxSolution {
    pub fn part(&self, name: &str) -> Option<&TermField> {
        self.parts.iter().find(|p| p.name == name).map(|p| &p.field)
    }

    /// Sum of the parts whose name starts with `prefix`.
    pub fn group(&self, prefix: &str) -> TermField {
        let mut f = TermField::default();
        for p in self.parts.iter().filter(|p| p.name.starts_with(prefix)) {
            f.extend(p.field.clone());
        }
        f
    }

    pub fn total(&self) -> TermField {
        self.group("")
    }

    pub fn without(&self, name: &str) -> TermField {
        let mut f = TermField::default();
        for p in self.parts.iter().filter(|p| p.name != name) {
            f.extend(p.field.clone());
        }
        f
    }

    pub fn eval(&self, t: f64, x: [f64; 3]) -> Vec3 {
        self.total().eval(t, x)
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().all(|p| p.field.is_empty())
    }

    pub fn sup_norm(&self) -> f64 {
        let total = self.total();
        self.ledger.times.iter().map(|&t| norms(&total, t).total).fold(0.0, f64::max)
    }
}

/// Terms of a boundary-layer solution, split by part.
pub fn bl_terms(sol: &BoundaryLayerSolution, p: &Params) -> (TermField, TermField, TermField) {
    let layer = |l: &crate::boundary_layers::LayerProfile| Term {
        kh: l.kh,
        coef: l.alpha,
        omega: C64::new(0.0, l.mu / p.epsilon) - l.rate,
        mu: l.mu,
        shape: Shape::Layer(*l),
    };
    let c = TermField::new(sol.classical.iter().map(layer).collect());
    let q = TermField::new(sol.quasi_resonant.iter().map(layer).collect());
    let r = TermField::new(
        sol.resonant
            .iter()
            .map(|r| Term { kh: [0, 0], coef: C64::new(1.0, 0.0), omega: C64::new(0.0, 0.0), mu: r.mu, shape: Shape::Resonant(*r) })
            .collect(),
    );
    (c, q, r)
}

#[derive(Debug, Clone, Copy)]
struct Group {
    kh: [i64; 2],
    omega: C64,
    mu: f64,
    bottom: WallData,
    top: WallData,
}

fn accumulate(groups: &mut Vec<Group>, kh: [i64; 2], omega: C64, mu: f64, bottom: WallData, top: WallData) {
    let g = match groups.iter_mut().find(|g| g.kh == kh && g.omega == omega && g.mu == mu) {
        Some(g) => g,
        None => {
            groups.push(Group { kh, omega, mu, bottom: WallData::default(), top: WallData::default() });
            groups.last_mut().unwrap()
        }
    };
    for c in 0..2 {
        g.bottom.h[c] += bottom.h[c];
        g.top.h[c] += top.h[c];
    }
    g.bottom.v += bottom.v;
    g.top.v += top.v;
}

/// Wall traces of the exponential terms, grouped by (k_h, ω), at t = 0 scale:
/// bottom (u at z=0), top (∂z u_h and u_3 at z=1).
fn wall_groups(f: &TermField) -> Vec<Group> {
    let mut groups = Vec::new();
    for t in f.terms.iter().filter(|t| t.is_exponential()) {
        let b = t.value(0.0, 0.0);
        let d = t.dz(0.0, 1.0);
        let v1 = t.value(0.0, 1.0);
        accumulate(
            &mut groups,
            t.kh,
            t.omega,
            t.mu,
            WallData { h: [b[0], b[1]], v: b[2] },
            WallData { h: [d[0], d[1]], v: v1[2] },
        );
    }
    groups
}

/// Removes prescribed top stress from the traces so only the defect is lifted.
fn subtract_forcing(groups: &mut Vec<Group>, forcing: &BoundaryTrace, p: &Params) {
    for e in &forcing.entries {
        let omega = C64::new(0.0, e.mu / p.epsilon) - e.rate;
        let top = WallData { h: [-e.value[0], -e.value[1]], v: C64::new(0.0, 0.0) };
        accumulate(groups, e.kh, omega, e.mu, WallData::default(), top);
    }
}

fn forcing_at(forcing: Option<&BoundaryTrace>, kh: [i64; 2], t: f64, p: &Params) -> [C64; 2] {
    let mut g = [C64::new(0.0, 0.0); 2];
    for e in forcing.iter().flat_map(|f| f.entries.iter()).filter(|e| e.kh == kh) {
        let f = (C64::new(0.0, e.mu / p.epsilon) - e.rate) * t;
        g[0] += e.value[0] * f.exp();
        g[1] += e.value[1] * f.exp();
    }
    g
}

fn lift_all(groups: &[Group]) -> Result<TermField> {
    let mut terms = Vec::new();
    for g in groups {
        let neg = |w: WallData| WallData { h: [-w.h[0], -w.h[1]], v: -w.v };
        let poly = stopping_lift(g.kh, neg(g.bottom), neg(g.top))?;
        if !poly.is_zero() {
            terms.push(Term { kh: g.kh, coef: C64::new(1.0, 0.0), omega: g.omega, mu: g.mu, shape: Shape::Poly(poly) });
        }
    }
    Ok(TermField::new(terms))
}

fn groups_norm(groups: &[Group], t: f64, top: bool) -> f64 {
    let mut per: BTreeMap<[i64; 2], WallData> = BTreeMap::new();
    for g in groups {
        let e = (g.omega * t).exp();
        let src = if top { g.top } else { g.bottom };
        let w = per.entry(g.kh).or_default();
        w.h[0] += e * src.h[0];
        w.h[1] += e * src.h[1];
        w.v += e * src.v;
    }
    (HORIZONTAL_AREA * per.values().map(|w| w.norm_sqr()).sum::<f64>()).sqrt()
}

/// Sources ⟨N_l, defect⟩ of the polynomial lift terms for all |l| ≤ K with
/// λ_l + μ ≠ 0; resonant pairs are dropped (they feed the envelope).
fn lift_sources(lift: &TermField, k: usize, p: &Params) -> Result<SourceTable> {
    let rule = ZRule::uniform(k / 2 + 8, 16);
    let mut entries = Vec::new();
    for term in &lift.terms {
        let mu = term.mu;
        let c = C64::new(0.0, mu / p.epsilon) - term.omega;
        let kh = term.kh;
        let kmax = k as i64;
        for l3 in -kmax..=kmax {
            let l = ModeIndex::new(kh[0], kh[1], l3);
            if l.is_zero() || l.norm() > k as f64 + 1e-12 {
                continue;
            }
            if (eigenvalue(l)? + mu).abs() < 1e-9 {
                continue;
            }
            let d = project_profile(l, &rule, |z| term.defect(0.0, z, p.epsilon, p.nu));
            entries.push(SourceEntry { mu, l, s0: -d, c });
        }
    }
    Ok(SourceTable { entries })
}

fn corrector_field(src: &SourceTable, k: usize, p: &Params, init: InitialCondition) -> Result<TermField> {
    let mut terms = Vec::new();
    for (l, coef, expo, mu) in corrector_terms(src, k, p, init)? {
        let lam = eigenvalue(l)?;
        terms.push(Term { kh: l.kh(), coef, omega: expo - C64::new(0.0, lam / p.epsilon), mu, shape: Shape::Basis(l) });
    }
    Ok(TermField::new(terms))
}

fn bottom_trace_of(f: &TermField, p: &Params) -> BoundaryTrace {
    let mut tr = BoundaryTrace::empty(Side::Bottom);
    for g in wall_groups(f) {
        let v = [-g.bottom.h[0], -g.bottom.h[1]];
        if v[0].norm() + v[1].norm() > 0.0 {
            tr.push(g.mu, g.kh, v, C64::new(0.0, g.mu / p.epsilon) - g.omega);
        }
    }
    tr
}

fn push_bl(parts: &mut Vec<NamedPart>, name: &str, sol: &BoundaryLayerSolution, p: &Params) {
    let (c, q, r) = bl_terms(sol, p);
    for (suffix, f) in [("classical", c), ("quasi", q), ("resonant", r)] {
        if !f.is_empty() {
            parts.push(NamedPart { name: format!("{name}.{suffix}"), field: f });
        }
    }
}

fn projected_residual(total: &TermField, lmax: i64, t: f64, p: &Params) -> f64 {
    let rule = rule_for(total.min_scale());
    let mut s = 0.0;
    for kh in total.modes() {
        let defect: Vec<Vec3> = rule.z.iter().map(|&z| total.defect(kh, t, z, p.epsilon, p.nu)).collect();
        for l3 in -lmax..=lmax {
            let l = ModeIndex::new(kh[0], kh[1], l3);
            if l.is_zero() {
                continue;
            }
            let mut r = C64::new(0.0, 0.0);
            for ((&z, &w), d) in rule.z.iter().zip(&rule.w).zip(&defect) {
                let n = basis_profile(l, z).expect("nonzero");
                r += w * (n[0].conj() * d[0] + n[1].conj() * d[1] + n[2].conj() * d[2]);
            }
            s += (HORIZONTAL_AREA * r).norm_sqr();
        }
    }
    s.sqrt()
}

fn frozen_field(f: &TermField) -> TermField {
    TermField::new(
        f.terms
            .iter()
            .filter_map(|t| match &t.shape {
                Shape::Layer(l) if l.rate.norm() > 0.0 => {
                    let mut u = t.clone();
                    u.coef = -l.rate * t.coef;
                    Some(u)
                }
                _ => None,
            })
            .collect(),
    )
}

fn boundary_residuals(total: &TermField, forcing: Option<&BoundaryTrace>, t: f64, p: &Params) -> (f64, f64) {
    let (mut b, mut tp) = (0.0, 0.0);
    for kh in total.modes() {
        let v0 = total.profile(kh, t, 0.0);
        let d1 = total.profile_dz(kh, t, 1.0);
        let v1 = total.profile(kh, t, 1.0);
        let g = forcing_at(forcing, kh, t, p);
        b += v0.iter().map(|c| c.norm_sqr()).sum::<f64>();
        tp += (d1[0] - g[0]).norm_sqr() + (d1[1] - g[1]).norm_sqr() + v1[2].norm_sqr();
    }
    ((HORIZONTAL_AREA * b).sqrt(), (HORIZONTAL_AREA * tp).sqrt())
}

fn fill_ledger(
    parts: &[NamedPart],
    lifted: &[Group],
    forcing: Option<&BoundaryTrace>,
    k: usize,
    opts: &AssemblyOptions,
    p: &Params,
) -> Ledger {
    let mut total = TermField::default();
    for part in parts {
        total.extend(part.field.clone());
    }
    let mut ledger = Ledger { k, times: opts.times.clone(), ..Default::default() };
    for part in parts {
        let v = opts.times.iter().map(|&t| norms(&part.field, t).total).collect();
        ledger.part_norms.insert(part.name.clone(), v);
    }
    let frozen = frozen_field(&total);
    let lmax = k as i64 + opts.residual_margin;
    for &t in &opts.times {
        ledger.lifted_bottom.push(groups_norm(lifted, t, false));
        ledger.lifted_top.push(groups_norm(lifted, t, true));
        let (e0, e1) = boundary_residuals(&total, forcing, t, p);
        ledger.eta0.push(e0);
        ledger.eta1.push(e1);
        ledger.equation_residual.push(projected_residual(&total, lmax, t, p));
        ledger.frozen_error.push(norms(&frozen, t).total);
        ledger.max_divergence = ledger.max_divergence.max(max_divergence(&total, t));
    }
    ledger
}

/// Wind-driven approximation: u^{BL,1} = ℬ(0, βσ), v^{int,1}, δu^{int,1}_K,
/// δu^{BL,1}, then the stopping lift.
pub fn assemble_wind_approx(sigma: &BoundaryTrace, p: &Params, opts: &AssemblyOptions) -> Result<ApproxSolution> {
    p.validate()?;
    let k = opts.k_override.unwrap_or_else(|| truncation_choice(p, wind_regime(p), opts.s0));
    let forcing = BoundaryTrace { side: Side::Top, entries: sigma.scaled(C64::new(p.beta, 0.0)).entries };
    let bl1 = build_b(&BoundaryTrace::empty(Side::Bottom), &forcing, p)?;
    let mut parts = Vec::new();
    push_bl(&mut parts, "u_bl1", &bl1, p);

    let (_, quasi, _) = bl_terms(&bl1, p);
    let mut vint = Vec::new();
    for g in wall_groups(&quasi) {
        if g.kh == [0, 0] {
            continue;
        }
        let poly = lift_interior_vint1(g.kh, g.top.v)?;
        vint.push(Term { kh: g.kh, coef: C64::new(1.0, 0.0), omega: g.omega, mu: g.mu, shape: Shape::Poly(poly) });
    }
    let vint = TermField::new(vint);
    let src = lift_sources(&vint, k, p)?;
    let du = corrector_field(&src, k, p, InitialCondition::Zero)?;

    let mut inner = vint.clone();
    inner.extend(du.clone());
    let dbl = build_b(&bottom_trace_of(&inner, p), &BoundaryTrace::empty(Side::Top), p)?;
    if !vint.is_empty() {
        parts.push(NamedPart { name: "v_int1".into(), field: vint });
    }
    if !du.is_empty() {
        parts.push(NamedPart { name: "du_int1".into(), field: du });
    }
    push_bl(&mut parts, "du_bl1", &dbl, p);

    let mut all = TermField::default();
    for part in &parts {
        all.extend(part.field.clone());
    }
    let mut groups = wall_groups(&all);
    subtract_forcing(&mut groups, &forcing, p);
    let w = lift_all(&groups)?;
    if !w.is_empty() {
        parts.push(NamedPart { name: "w".into(), field: w });
    }
    let mut ledger = fill_ledger(&parts, &groups, Some(&forcing), k, opts, p);
    ledger.scaling = Some(scaling_check(p, opts.scaling.0, opts.scaling.1));
    Ok(ApproxSolution { params: p.clone(), parts, ledger })
}

/// Dirichlet / initial-value approximation around the damped envelope.
pub fn assemble_dirichlet_approx(gamma: &SpectralField, p: &Params, opts: &AssemblyOptions) -> Result<ApproxSolution> {
    p.validate()?;
    let k = opts.k_override.unwrap_or_else(|| truncation_choice(p, Regime::Dirichlet, opts.s0));
    let rates = envelope_rates(gamma, p, opts.variant, Pumping::Exact)?;
    let mut interior = Vec::new();
    let mut d0 = BoundaryTrace::empty(Side::Bottom);
    for (kk, r) in &rates {
        let g = gamma.get(kk);
        if g.norm() == 0.0 {
            continue;
        }
        let lam = eigenvalue(*kk)?;
        interior.push(Term { kh: kk.kh(), coef: g, omega: C64::new(0.0, -lam / p.epsilon) - r, mu: -lam, shape: Shape::Basis(*kk) });
        let n = n_vector(*kk)?;
        d0.push(-lam, kk.kh(), [-g * n[0], -g * n[1]], *r);
    }
    let mut parts = Vec::new();
    let interior = TermField::new(interior);
    if !interior.is_empty() {
        parts.push(NamedPart { name: "interior".into(), field: interior });
    }
    let bl0 = build_b(&d0, &BoundaryTrace::empty(Side::Top), p)?;
    push_bl(&mut parts, "u_bl0", &bl0, p);

    let (c0, q0, _) = bl_terms(&bl0, p);
    let mut layers = c0;
    layers.extend(q0);
    let mut vint = Vec::new();
    for g in wall_groups(&layers) {
        if g.kh == [0, 0] {
            continue;
        }
        let d03 = -g.bottom.v / p.sqrt_en();
        let poly = lift_interior_vint0(g.kh, d03, C64::new(0.0, 0.0), p)?;
        vint.push(Term { kh: g.kh, coef: C64::new(1.0, 0.0), omega: g.omega, mu: g.mu, shape: Shape::Poly(poly) });
    }
    let vint = TermField::new(vint);
    let mut pre = layers.clone();
    pre.extend(vint.clone());

    let src = lift_sources(&vint, k, p)?;
    let du = corrector_field(&src, k, p, opts.init)?;
    let mut inner = vint.clone();
    inner.extend(du.clone());
    let dbl = build_b(&bottom_trace_of(&inner, p), &BoundaryTrace::empty(Side::Top), p)?;
    if !vint.is_empty() {
        parts.push(NamedPart { name: "v_int0".into(), field: vint });
    }
    if !du.is_empty() {
        parts.push(NamedPart { name: "du_int0".into(), field: du });
    }
    push_bl(&mut parts, "du_bl0", &dbl, p);

    let mut all = TermField::default();
    for part in &parts {
        all.extend(part.field.clone());
    }
    let groups = wall_groups(&all);
    let w = lift_all(&groups)?;
    if !w.is_empty() {
        parts.push(NamedPart { name: "w".into(), field: w });
    }
    let mut ledger = fill_ledger(&parts, &groups, None, k, opts, p);
    for &t in &opts.times {
        let s: f64 = pre.modes().iter().map(|&kh| pre.profile(kh, t, 0.0)[2].norm_sqr()).sum();
        ledger.eta0_3_pre.push((HORIZONTAL_AREA * s).sqrt());
    }
    let mut corr = TermField::default();
    for part in parts.iter().filter(|p| p.name != "interior") {
        corr.extend(part.field.clone());
    }
    ledger.delta_gamma = Some(norms(&corr, 0.0).total);
    Ok(ApproxSolution { params: p.clone(), parts, ledger })
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivedCondition {
    pub applies: bool,
    pub alpha0: f64,
    pub alpha1: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub holds: bool,
    pub alpha0_admissible: bool,
    pub ratio: f64,
    pub small_nu: DerivedCondition,
    pub large_nu: DerivedCondition,
    /// β ν^{3/4} ε^{-1/4}, which must vanish in the limit.
    pub pumping_ratio: f64,
    pub pumping_small: bool,
}

/// β ≤ C ν^{-α₀} ε^{1/4} with α₀ < 7/12, plus the derived conditions.
pub fn scaling_check(p: &Params, c: f64, alpha0: f64) -> ScalingReport {
    let (e, n, b) = (p.epsilon, p.nu, p.beta);
    let admissible = alpha0 > 0.0 && alpha0 < 7.0 / 12.0;
    let ratio = b / (c * n.powf(-alpha0) * e.powf(0.25));
    // α₀' − α₁' = α₀ − 1/4 with α₀' < 5/7, α₁' > 2/7
    let a1 = 0.5 * (2.0 / 7.0 + (5.0 / 7.0 - alpha0 + 0.25));
    let a0 = alpha0 - 0.25 + a1;
    let small_nu = DerivedCondition { applies: n <= e, alpha0: a0, alpha1: a1, holds: b <= c * n.powf(-a0) * e.powf(a1) };
    // α₀'' < 5/9, 2/9 < α₁'' < 1/4
    let hi = (0.25f64).min(5.0 / 9.0 - alpha0 + 0.25);
    let b1 = 0.5 * (2.0 / 9.0 + hi);
    let b0 = alpha0 - 0.25 + b1;
    let large_nu = DerivedCondition { applies: n >= e, alpha0: b0, alpha1: b1, holds: b <= c * n.powf(-b0) * e.powf(b1) };
    let pumping_ratio = b * n.powf(0.75) * e.powf(-0.25);
    ScalingReport {
        holds: admissible && ratio <= 1.0,
        alpha0_admissible: admissible,
        ratio,
        small_nu,
        large_nu,
        pumping_ratio,
        pumping_small: pumping_ratio < 1.0,
    }
}

pub fn validate_gamma(gamma: &SpectralField) -> Result<()> {
    if gamma.coeffs.keys().any(|k| k.is_zero()) {
        return Err(Error::ZeroMode);
    }
    Ok(())
}

/// Sum of selected fields, for comparisons.
pub fn sum_fields<'a>(parts: Vec<&'a dyn ModeField>) -> SumField<'a> {
    SumField { parts }
}
