//! The boundary-layer operator: decay rates from the cleared dispersion cubic,
//! kernel vectors, exponential profiles W⁰/W¹, self-similar resonant profiles,
//! and the classical / quasi-resonant / resonant split.

use crate::error::{Error, Result};
use crate::field::{ModeField, Vec3, ZERO3};
use crate::spectral::{Params, HORIZONTAL_AREA};
use crate::C64;
use nalgebra::Matrix3;
use serde::Serialize;
use std::f64::consts::PI;

pub type Mat2 = [[C64; 2]; 2];

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn is_unit_frequency(mu: f64) -> bool {
    (mu.abs() - 1.0).abs() < 1e-14
}

fn kh2(kh: [i64; 2]) -> f64 {
    (kh[0] * kh[0] + kh[1] * kh[1]) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Bottom,
    Top,
}

/// A_λ(μ, k_h).
pub fn a_lambda_matrix(lambda: C64, mu: f64, kh: [i64; 2], p: &Params) -> Result<Mat2> {
    let s = lambda * lambda;
    let a = I * mu - s;
    if kh == [0, 0] {
        return Ok([[a, c(-1.0)], [c(1.0), a]]);
    }
    let (k1, k2) = (kh[0] as f64, kh[1] as f64);
    let en = p.epsilon * p.nu;
    let d = s - en * kh2(kh);
    if d.norm() <= 1e-14 * (s.norm() + en * kh2(kh)) {
        return Err(Error::Pole);
    }
    let diag = a + p.epsilon * kh2(kh);
    let q = en / d;
    Ok([
        [diag + q * k1 * k2, -1.0 - q * k1 * k1],
        [1.0 + q * k2 * k2, diag - q * k1 * k2],
    ])
}

pub fn det2(m: &Mat2) -> C64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// |det A| relative to the size of its two products.
pub fn relative_det(m: &Mat2) -> f64 {
    let scale = (m[0][0] * m[1][1]).norm() + (m[0][1] * m[1][0]).norm();
    det2(m).norm() / scale.max(f64::MIN_POSITIVE)
}

/// Monic coefficients [a0, a1, a2] of s³ + a2 s² + a1 s + a0, the dispersion
/// relation with the pole s = εν|k_h|² cleared.
pub fn cleared_cubic(mu: f64, kh: [i64; 2], p: &Params) -> [C64; 3] {
    let a = c(p.epsilon * p.nu * kh2(kh));
    let b = I * mu + p.epsilon * kh2(kh);
    [-a * b * b, b * b + 1.0 + 2.0 * a * b, -2.0 * b - a]
}

fn cubic_eval(co: &[C64; 3], s: C64) -> (C64, C64) {
    let f = ((s + co[2]) * s + co[1]) * s + co[0];
    let df = (3.0 * s + 2.0 * co[2]) * s + co[1];
    (f, df)
}

/// Roots of the cleared cubic: companion-matrix eigenvalues, Newton-polished.
pub fn cubic_roots(mu: f64, kh: [i64; 2], p: &Params) -> [C64; 3] {
    let co = cleared_cubic(mu, kh, p);
    let z = C64::new(0.0, 0.0);
    let m = Matrix3::new(z, z, -co[0], c(1.0), z, -co[1], z, c(1.0), -co[2]);
    let ev = m.schur().eigenvalues().expect("3x3 complex Schur");
    let mut r = [ev[0], ev[1], ev[2]];
    for s in r.iter_mut() {
        for _ in 0..4 {
            let (f, df) = cubic_eval(&co, *s);
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            *s -= step;
            if step.norm() <= 1e-17 * s.norm() {
                break;
            }
        }
    }
    r
}

/// Square root with nonnegative real part.
pub fn branch_sqrt(s: C64) -> C64 {
    let r = s.sqrt();
    if r.re < 0.0 {
        -r
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayRates {
    pub lambda_minus: C64,
    pub lambda_plus: C64,
    /// Resonant k_h = 0, |μ| = 1: one of the two rates is exactly zero.
    pub degenerate_zero: bool,
    /// Unused cubic root (s = λ²), for diagnostics.
    pub third: Option<C64>,
    /// For |μ| = 1, k_h ≠ 0: sign of Re(s) of the selected small root.
    pub small_root_sign: Option<f64>,
}

impl DecayRates {
    pub fn get(&self, sigma: Sign) -> C64 {
        match sigma {
            Sign::Minus => self.lambda_minus,
            Sign::Plus => self.lambda_plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Minus, Sign::Plus];
}

fn nearest(roots: &[C64; 3], target: C64, taken: Option<usize>) -> Result<usize> {
    let mut d: Vec<(f64, usize)> =
        (0..3).filter(|&i| Some(i) != taken).map(|i| ((roots[i] - target).norm(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    if d.len() > 1 && (d[1].0 - d[0].0).abs() <= 1e-9 * d[1].0.max(1e-300) {
        return Err(Error::AmbiguousRoot {
            target: format!("{target}"),
            a: format!("{}", roots[d[0].1]),
            b: format!("{}", roots[d[1].1]),
        });
    }
    Ok(d[0].1)
}

/// λ∓ with (λ⁻)² continuing i(μ+1) and (λ⁺)² continuing i(μ−1).
///
/// When a target is zero (|μ| = 1, k_h ≠ 0) two small roots compete; the one
/// with the larger Re √s (thinner layer) is taken.
pub fn decay_rates(mu: f64, kh: [i64; 2], p: &Params) -> Result<DecayRates> {
    let tm = I * (mu + 1.0);
    let tp = I * (mu - 1.0);
    if kh == [0, 0] {
        return Ok(DecayRates {
            lambda_minus: branch_sqrt(tm),
            lambda_plus: branch_sqrt(tp),
            degenerate_zero: is_unit_frequency(mu),
            third: None,
            small_root_sign: None,
        });
    }
    let r = cubic_roots(mu, kh, p);
    let pick_small = |taken: Option<usize>| -> usize {
        let mut best = None;
        let mut order: Vec<usize> = (0..3).filter(|&i| Some(i) != taken).collect();
        order.sort_by(|&a, &b| r[a].norm().total_cmp(&r[b].norm()));
        for &i in order.iter().take(2) {
            let re = branch_sqrt(r[i]).re;
            if best.is_none_or(|(_, b)| re > b) {
                best = Some((i, re));
            }
        }
        best.unwrap().0
    };
    let unit = is_unit_frequency(mu);
    let (im, ip, sign) = if unit && mu > 0.0 {
        let im = nearest(&r, tm, None)?;
        let ip = pick_small(Some(im));
        (im, ip, Some(r[ip].re.signum()))
    } else if unit {
        let ip = nearest(&r, tp, None)?;
        let im = pick_small(Some(ip));
        (im, ip, Some(r[im].re.signum()))
    } else {
        let im = nearest(&r, tm, None)?;
        let ip = nearest(&r, tp, Some(im))?;
        (im, ip, None)
    };
    let third = (0..3).find(|&i| i != im && i != ip).map(|i| r[i]);
    Ok(DecayRates {
        lambda_minus: branch_sqrt(r[im]),
        lambda_plus: branch_sqrt(r[ip]),
        degenerate_zero: false,
        third,
        small_root_sign: sign,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelVector {
    pub w: [C64; 2],
    /// First component vanished; normalized by the second instead.
    pub second_normalized: bool,
}

pub fn kernel_vector(lambda: C64, mu: f64, kh: [i64; 2], p: &Params) -> Result<KernelVector> {
    let a = a_lambda_matrix(lambda, mu, kh, p)?;
    let rel = relative_det(&a);
    if rel > 1e-8 {
        return Err(Error::NotOnVariety(rel));
    }
    let n0 = a[0][0].norm_sqr() + a[0][1].norm_sqr();
    let n1 = a[1][0].norm_sqr() + a[1][1].norm_sqr();
    let row = if n0 >= n1 { a[0] } else { a[1] };
    let v = [-row[1], row[0]];
    let scale = v[0].norm().max(v[1].norm());
    if v[0].norm() > 1e-12 * scale {
        Ok(KernelVector { w: [c(1.0), v[1] / v[0]], second_normalized: false })
    } else {
        Ok(KernelVector { w: [v[0] / v[1], c(1.0)], second_normalized: true })
    }
}

/// Columns w_{λ⁻}, w_{λ⁺} and the rates they belong to.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Transition {
    pub rates: DecayRates,
    pub w_minus: [C64; 2],
    pub w_plus: [C64; 2],
}

impl Transition {
    pub fn new(mu: f64, kh: [i64; 2], p: &Params) -> Result<Self> {
        let rates = decay_rates(mu, kh, p)?;
        let w_minus = kernel_vector(rates.lambda_minus, mu, kh, p)?.w;
        let w_plus = kernel_vector(rates.lambda_plus, mu, kh, p)?.w;
        Ok(Transition { rates, w_minus, w_plus })
    }

    pub fn det(&self) -> C64 {
        self.w_minus[0] * self.w_plus[1] - self.w_plus[0] * self.w_minus[1]
    }

    pub fn w(&self, s: Sign) -> [C64; 2] {
        match s {
            Sign::Minus => self.w_minus,
            Sign::Plus => self.w_plus,
        }
    }

    /// (α⁻, α⁺) = P⁻¹ δ̂.
    pub fn solve(&self, d: [C64; 2]) -> Result<(C64, C64)> {
        let det = self.det();
        if det.norm() < 1e-6 {
            return Err(Error::SingularTransition(det.norm()));
        }
        let am = (self.w_plus[1] * d[0] - self.w_plus[0] * d[1]) / det;
        let ap = (-self.w_minus[1] * d[0] + self.w_minus[0] * d[1]) / det;
        Ok((am, ap))
    }
}

pub fn transition_coeffs(delta: [C64; 2], mu: f64, kh: [i64; 2], p: &Params) -> Result<(C64, C64)> {
    Transition::new(mu, kh, p)?.solve(delta)
}

/// α·W^j(λ, w) for one (μ, k_h), with optional slow amplitude decay e^{-rate t}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LayerProfile {
    pub side: Side,
    pub mu: f64,
    pub kh: [i64; 2],
    pub lambda: C64,
    pub w: [C64; 2],
    pub alpha: C64,
    pub rate: C64,
    pub epsilon: f64,
    pub nu: f64,
}

impl LayerProfile {
    pub fn new(side: Side, lambda: C64, w: [C64; 2], mu: f64, kh: [i64; 2], p: &Params) -> Self {
        LayerProfile { side, mu, kh, lambda, w, alpha: c(1.0), rate: c(0.0), epsilon: p.epsilon, nu: p.nu }
    }

    fn sen(&self) -> f64 {
        (self.epsilon * self.nu).sqrt()
    }

    fn ikw(&self) -> C64 {
        I * (self.kh[0] as f64 * self.w[0] + self.kh[1] as f64 * self.w[1])
    }

    /// d/dz acting on the exponential.
    pub fn dz_factor(&self) -> C64 {
        match self.side {
            Side::Bottom => -self.lambda / self.sen(),
            Side::Top => self.lambda / self.sen(),
        }
    }

    fn expo(&self, z: f64) -> C64 {
        match self.side {
            Side::Bottom => (-self.lambda * z / self.sen()).exp(),
            Side::Top => (-self.lambda * (1.0 - z) / self.sen()).exp(),
        }
    }

    /// W^j(z) without amplitude, time or horizontal phase.
    pub fn shape(&self, z: f64) -> Vec3 {
        let e = self.expo(z);
        let sl = self.sen() / self.lambda;
        match self.side {
            Side::Bottom => [self.w[0] * e, self.w[1] * e, sl * self.ikw() * e],
            Side::Top => [sl * self.w[0] * e, sl * self.w[1] * e, -sl * sl * self.ikw() * e],
        }
    }

    pub fn shape_dz(&self, z: f64) -> Vec3 {
        let f = self.dz_factor();
        let s = self.shape(z);
        [f * s[0], f * s[1], f * s[2]]
    }

    /// Companion pressure of the shape.
    pub fn pressure(&self, z: f64) -> C64 {
        let s = self.lambda * self.lambda;
        let a = I * self.mu - s + self.epsilon * kh2(self.kh);
        let sl = self.sen() / self.lambda;
        let p0 = sl * sl * (a / self.epsilon) * self.ikw();
        match self.side {
            Side::Bottom => p0 * self.expo(z),
            Side::Top => sl * p0 * self.expo(z),
        }
    }

    /// Complex time factor α e^{-rate t} e^{iμt/ε}.
    pub fn amplitude(&self, t: f64) -> C64 {
        self.alpha * (-self.rate * t).exp() * C64::from_polar(1.0, self.mu * t / self.epsilon)
    }

    pub fn thickness(&self) -> f64 {
        self.sen() / self.lambda.re.max(1e-300)
    }

    /// Residual of ∂t + (1/ε)e3∧ + ∇p − Δ_h − ν∂zz on the frozen-amplitude shape
    /// (coefficient of e^{ik_h·x} e^{iμt/ε}).
    pub fn momentum_residual(&self, z: f64) -> Vec3 {
        let v = self.shape(z);
        let f = self.dz_factor();
        let pr = self.pressure(z);
        let k2 = kh2(self.kh);
        let lin = |x: C64| (I * self.mu / self.epsilon + k2 - self.nu * f * f) * x;
        [
            lin(v[0]) - v[1] / self.epsilon + I * self.kh[0] as f64 * pr,
            lin(v[1]) + v[0] / self.epsilon + I * self.kh[1] as f64 * pr,
            lin(v[2]) + f * pr,
        ]
    }
}

/// Self-similar resonant layer (k_h = 0, |μ| = 1) along direction (1, ±i).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResonantRecord {
    pub side: Side,
    pub mu: f64,
    pub delta: [C64; 2],
    pub epsilon: f64,
    pub nu: f64,
}

pub fn ierfc(x: f64) -> f64 {
    (-x * x).exp() / PI.sqrt() - x * libm::erfc(x)
}

/// Scalar heat profile: bottom erfc(z/(2√(νt))), top 2√(νt)·ierfc((1−z)/(2√(νt))).
/// Returns (value, ∂z value).
pub fn resonant_shape(side: Side, nu: f64, t: f64, z: f64) -> (f64, f64) {
    if t <= 0.0 {
        return match side {
            Side::Bottom => (if z == 0.0 { 1.0 } else { 0.0 }, 0.0),
            Side::Top => (0.0, if z == 1.0 { 1.0 } else { 0.0 }),
        };
    }
    let r = (nu * t).sqrt();
    match side {
        Side::Bottom => {
            let x = z / (2.0 * r);
            (libm::erfc(x), -(-x * x).exp() / (PI.sqrt() * r))
        }
        Side::Top => {
            let x = (1.0 - z) / (2.0 * r);
            (2.0 * r * ierfc(x), libm::erfc(x))
        }
    }
}

/// Heat equation on the whole strip, v(0)=0 / ∂z v(1)=0 on the undriven wall,
/// unit data on the driven wall, zero initial data; sine series in
/// ω_n = (n+½)π. Returns (value, ∂z value).
pub fn heat_strip_shape(side: Side, nu: f64, t: f64, z: f64) -> (f64, f64) {
    if t <= 0.0 {
        return resonant_shape(side, nu, t, z);
    }
    let terms = ((50.0 / (nu * t)).sqrt() / PI).ceil().min(1e6) as usize + 10;
    let (mut v, mut d) = match side {
        Side::Bottom => (1.0, 0.0),
        Side::Top => (z, 1.0),
    };
    for n in 0..terms {
        let w = (n as f64 + 0.5) * PI;
        let e = (-nu * w * w * t).exp();
        if e == 0.0 {
            break;
        }
        let b = match side {
            Side::Bottom => 2.0 / w,
            Side::Top => 2.0 * if n % 2 == 0 { 1.0 } else { -1.0 } / (w * w),
        };
        v -= b * e * (w * z).sin();
        d -= b * e * w * (w * z).cos();
    }
    (v, d)
}

/// Resonant profile with amplitude δ (2-vector), filtered variables.
pub fn resonant_profile(side: Side, delta: [C64; 2], nu: f64, t: f64, z: f64) -> [C64; 2] {
    let (v, _) = resonant_shape(side, nu, t, z);
    [delta[0] * v, delta[1] * v]
}

impl ResonantRecord {
    pub fn profile(&self, t: f64, z: f64) -> Vec3 {
        let (v, _) = resonant_shape(self.side, self.nu, t, z);
        let ph = C64::from_polar(1.0, self.mu * t / self.epsilon);
        [self.delta[0] * v * ph, self.delta[1] * v * ph, c(0.0)]
    }

    pub fn profile_dz(&self, t: f64, z: f64) -> Vec3 {
        let (_, d) = resonant_shape(self.side, self.nu, t, z);
        let ph = C64::from_polar(1.0, self.mu * t / self.epsilon);
        [self.delta[0] * d * ph, self.delta[1] * d * ph, c(0.0)]
    }
}

/// ½⟨(1,i)|u⟩(1,i)e^{-it/ε} + ½⟨(1,−i)|u⟩(1,−i)e^{it/ε}.
pub fn filter_resonant(u: [C64; 2], t: f64, epsilon: f64) -> [C64; 2] {
    let a = 0.5 * (u[0] - I * u[1]);
    let b = 0.5 * (u[0] + I * u[1]);
    let em = C64::from_polar(1.0, -t / epsilon);
    let ep = C64::from_polar(1.0, t / epsilon);
    [a * em + b * ep, I * a * em - I * b * ep]
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceEntry {
    pub mu: f64,
    pub kh: [i64; 2],
    pub value: [C64; 2],
    /// Slow decay of the amplitude: value·e^{-rate t}.
    pub rate: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryTrace {
    pub side: Side,
    pub entries: Vec<TraceEntry>,
}

impl BoundaryTrace {
    pub fn empty(side: Side) -> Self {
        BoundaryTrace { side, entries: vec![] }
    }

    pub fn single(side: Side, mu: f64, kh: [i64; 2], value: [C64; 2]) -> Self {
        BoundaryTrace { side, entries: vec![TraceEntry { mu, kh, value, rate: c(0.0) }] }
    }

    pub fn push(&mut self, mu: f64, kh: [i64; 2], value: [C64; 2], rate: C64) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.mu == mu && e.kh == kh && e.rate == rate) {
            e.value[0] += value[0];
            e.value[1] += value[1];
        } else {
            self.entries.push(TraceEntry { mu, kh, value, rate });
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.value = [s * e.value[0], s * e.value[1]];
        }
        out
    }

    /// √(Σ|δ̂|²).
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.value[0].norm_sqr() + e.value[1].norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Classical,
    QuasiResonant,
    Resonant,
    All,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BoundaryLayerSolution {
    pub classical: Vec<LayerProfile>,
    pub quasi_resonant: Vec<LayerProfile>,
    pub resonant: Vec<ResonantRecord>,
}

fn route(sol: &mut BoundaryLayerSolution, trace: &BoundaryTrace, p: &Params) -> Result<()> {
    for e in &trace.entries {
        if e.value[0].norm() == 0.0 && e.value[1].norm() == 0.0 {
            continue;
        }
        let tr = Transition::new(e.mu, e.kh, p)?;
        let (am, ap) = tr.solve(e.value)?;
        let unit = is_unit_frequency(e.mu);
        for (s, alpha) in [(Sign::Minus, am), (Sign::Plus, ap)] {
            if alpha == c(0.0) {
                continue;
            }
            let lam = tr.rates.get(s);
            let w = tr.w(s);
            if tr.rates.degenerate_zero && lam.norm() == 0.0 {
                sol.resonant.push(ResonantRecord {
                    side: trace.side,
                    mu: e.mu,
                    delta: [alpha * w[0], alpha * w[1]],
                    epsilon: p.epsilon,
                    nu: p.nu,
                });
                continue;
            }
            let mut lp = LayerProfile::new(trace.side, lam, w, e.mu, e.kh, p);
            lp.alpha = alpha;
            lp.rate = e.rate;
            if unit && e.kh != [0, 0] {
                sol.quasi_resonant.push(lp);
            } else {
                sol.classical.push(lp);
            }
        }
    }
    Ok(())
}

/// ℬ(δ⁰_h, δ¹_h).
pub fn build_b(delta0: &BoundaryTrace, delta1: &BoundaryTrace, p: &Params) -> Result<BoundaryLayerSolution> {
    let mut sol = BoundaryLayerSolution::default();
    let mut d0 = delta0.clone();
    d0.side = Side::Bottom;
    let mut d1 = delta1.clone();
    d1.side = Side::Top;
    route(&mut sol, &d0, p)?;
    route(&mut sol, &d1, p)?;
    Ok(sol)
}

/// All parts, with resonant records on the finite strip (see `heat_strip_shape`).
pub struct StripView<'a> {
    pub sol: &'a BoundaryLayerSolution,
}

impl ModeField for StripView<'_> {
    fn modes(&self) -> Vec<[i64; 2]> {
        self.sol.view(Part::All).modes()
    }

    fn profile(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        let mut out = self.sol.view(Part::Classical).profile(kh, t, z);
        out = crate::field::add3(out, self.sol.view(Part::QuasiResonant).profile(kh, t, z));
        if kh == [0, 0] {
            for r in &self.sol.resonant {
                let (v, _) = heat_strip_shape(r.side, r.nu, t, z);
                let ph = C64::from_polar(v, r.mu * t / r.epsilon);
                out[0] += r.delta[0] * ph;
                out[1] += r.delta[1] * ph;
            }
        }
        out
    }

    fn profile_dz(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        let mut out = self.sol.view(Part::Classical).profile_dz(kh, t, z);
        out = crate::field::add3(out, self.sol.view(Part::QuasiResonant).profile_dz(kh, t, z));
        if kh == [0, 0] {
            for r in &self.sol.resonant {
                let (_, d) = heat_strip_shape(r.side, r.nu, t, z);
                let ph = C64::from_polar(d, r.mu * t / r.epsilon);
                out[0] += r.delta[0] * ph;
                out[1] += r.delta[1] * ph;
            }
        }
        out
    }

    fn min_scale(&self) -> f64 {
        self.sol.view(Part::All).min_scale()
    }
}

/// View of one part of a boundary-layer solution as a mode field.
pub struct PartView<'a> {
    pub sol: &'a BoundaryLayerSolution,
    pub part: Part,
}

impl BoundaryLayerSolution {
    pub fn view(&self, part: Part) -> PartView<'_> {
        PartView { sol: self, part }
    }

    pub fn is_empty(&self) -> bool {
        self.classical.is_empty() && self.quasi_resonant.is_empty() && self.resonant.is_empty()
    }

    fn layers(&self, part: Part) -> impl Iterator<Item = &LayerProfile> {
        let a: &[LayerProfile] = if matches!(part, Part::Classical | Part::All) { &self.classical } else { &[] };
        let b: &[LayerProfile] = if matches!(part, Part::QuasiResonant | Part::All) { &self.quasi_resonant } else { &[] };
        a.iter().chain(b.iter())
    }

    fn res(&self, part: Part) -> &[ResonantRecord] {
        if matches!(part, Part::Resonant | Part::All) {
            &self.resonant
        } else {
            &[]
        }
    }

    /// Opposite-wall traces for the next corrector generation.
    pub fn trace_residuals(&self, t: f64) -> TraceResiduals {
        let mut out = TraceResiduals::default();
        for (part, list) in [(Part::Classical, &self.classical), (Part::QuasiResonant, &self.quasi_resonant)] {
            for lp in list {
                let a = lp.amplitude(t);
                let (z, dz) = match lp.side {
                    Side::Bottom => (1.0, true),
                    Side::Top => (0.0, false),
                };
                let v = lp.shape(z);
                let d = lp.shape_dz(z);
                let rec = OppositeTrace {
                    side: lp.side,
                    mu: lp.mu,
                    kh: lp.kh,
                    horizontal: if dz { [a * d[0], a * d[1]] } else { [a * v[0], a * v[1]] },
                    vertical: a * v[2],
                };
                out.push(part, rec);
            }
        }
        for r in &self.resonant {
            let (z, dz) = match r.side {
                Side::Bottom => (1.0, true),
                Side::Top => (0.0, false),
            };
            let v = if dz { r.profile_dz(t, z) } else { r.profile(t, z) };
            out.push(Part::Resonant, OppositeTrace { side: r.side, mu: r.mu, kh: [0, 0], horizontal: [v[0], v[1]], vertical: c(0.0) });
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OppositeTrace {
    pub side: Side,
    pub mu: f64,
    pub kh: [i64; 2],
    /// Bottom layers: ∂z v_h at z=1; top layers: v_h at z=0.
    pub horizontal: [C64; 2],
    pub vertical: C64,
}

impl OppositeTrace {
    pub fn magnitude(&self) -> f64 {
        (self.horizontal[0].norm_sqr() + self.horizontal[1].norm_sqr() + self.vertical.norm_sqr()).sqrt()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TraceResiduals {
    pub classical: Vec<OppositeTrace>,
    pub quasi_resonant: Vec<OppositeTrace>,
    pub resonant: Vec<OppositeTrace>,
}

impl TraceResiduals {
    fn push(&mut self, part: Part, r: OppositeTrace) {
        match part {
            Part::Classical => self.classical.push(r),
            Part::QuasiResonant => self.quasi_resonant.push(r),
            _ => self.resonant.push(r),
        }
    }

    /// Largest magnitude per part and side (√ of the Parseval sum).
    pub fn magnitude(&self, part: Part, side: Side) -> f64 {
        let list = match part {
            Part::Classical => &self.classical,
            Part::QuasiResonant => &self.quasi_resonant,
            _ => &self.resonant,
        };
        list.iter().filter(|r| r.side == side).map(|r| r.magnitude().powi(2)).sum::<f64>().sqrt() * HORIZONTAL_AREA.sqrt()
    }
}

impl ModeField for PartView<'_> {
    fn modes(&self) -> Vec<[i64; 2]> {
        let mut v: Vec<[i64; 2]> = self.sol.layers(self.part).map(|l| l.kh).collect();
        if !self.sol.res(self.part).is_empty() {
            v.push([0, 0]);
        }
        v.sort();
        v.dedup();
        v
    }

    fn profile(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        let mut out = ZERO3;
        for l in self.sol.layers(self.part).filter(|l| l.kh == kh) {
            let a = l.amplitude(t);
            let s = l.shape(z);
            for j in 0..3 {
                out[j] += a * s[j];
            }
        }
        if kh == [0, 0] {
            for r in self.sol.res(self.part) {
                let s = r.profile(t, z);
                for j in 0..3 {
                    out[j] += s[j];
                }
            }
        }
        out
    }

    fn profile_dz(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        let mut out = ZERO3;
        for l in self.sol.layers(self.part).filter(|l| l.kh == kh) {
            let a = l.amplitude(t);
            let s = l.shape_dz(z);
            for j in 0..3 {
                out[j] += a * s[j];
            }
        }
        if kh == [0, 0] {
            for r in self.sol.res(self.part) {
                let s = r.profile_dz(t, z);
                for j in 0..3 {
                    out[j] += s[j];
                }
            }
        }
        out
    }

    fn min_scale(&self) -> f64 {
        let l = self.sol.layers(self.part).map(|l| l.thickness()).fold(1.0, f64::min);
        if self.sol.res(self.part).is_empty() {
            l
        } else {
            l.min(1e-7)
        }
    }
}
