//! Interior lifts, small-divisor correctors, the stopping lift, and assembly
//! of approximate solutions.
//!
//! Every part is a list of `Term`s: coef·e^{ωt}·e^{ik_h·x_h}·S(t,z) with S an
//! eigenmode, an exponential layer, a self-similar resonant layer, or a
//! polynomial lift.

mod assembly;
mod lifts;
mod small_divisor;

pub use assembly::*;
pub use lifts::*;
pub use small_divisor::*;

use crate::boundary_layers::{LayerProfile, ResonantRecord, Side};
use crate::field::{ModeField, Vec3, ZERO3};
use crate::spectral::{basis_profile, basis_profile_dz, basis_profile_dzz, ModeIndex};
use crate::C64;
use serde::Serialize;
use std::f64::consts::PI;

/// u_h = Σ h_j z^j, u_3 = Σ v_j z^j.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Poly {
    pub h: [[C64; 2]; 5],
    pub v: [C64; 5],
}

fn horner(c: &[C64], z: f64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |a, &b| a * z + b)
}

fn deriv(c: &[C64; 5]) -> [C64; 5] {
    let mut d = [C64::new(0.0, 0.0); 5];
    for j in 1..5 {
        d[j - 1] = c[j] * j as f64;
    }
    d
}

impl Poly {
    fn comps(&self) -> [[C64; 5]; 3] {
        let mut a = [[C64::new(0.0, 0.0); 5]; 3];
        for j in 0..5 {
            a[0][j] = self.h[j][0];
            a[1][j] = self.h[j][1];
            a[2][j] = self.v[j];
        }
        a
    }

    fn from_comps(a: [[C64; 5]; 3]) -> Self {
        let mut p = Poly::default();
        for j in 0..5 {
            p.h[j] = [a[0][j], a[1][j]];
            p.v[j] = a[2][j];
        }
        p
    }

    pub fn eval(&self, z: f64) -> Vec3 {
        let a = self.comps();
        [horner(&a[0], z), horner(&a[1], z), horner(&a[2], z)]
    }

    pub fn dz(&self) -> Poly {
        let a = self.comps();
        Poly::from_comps([deriv(&a[0]), deriv(&a[1]), deriv(&a[2])])
    }

    pub fn scaled(&self, s: C64) -> Poly {
        let a = self.comps();
        Poly::from_comps(a.map(|r| r.map(|c| c * s)))
    }

    pub fn is_zero(&self) -> bool {
        self.comps().iter().all(|r| r.iter().all(|c| c.norm() == 0.0))
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum Shape {
    Basis(ModeIndex),
    Layer(LayerProfile),
    /// Carries its own fast phase; the term's ω is 0.
    Resonant(ResonantRecord),
    Poly(Poly),
}

#[derive(Debug, Clone, Serialize)]
pub struct Term {
    pub kh: [i64; 2],
    pub coef: C64,
    /// iμ/ε minus the slow rate.
    pub omega: C64,
    /// Fast frequency, kept exactly for resonance tests.
    pub mu: f64,
    pub shape: Shape,
}

fn kh2(kh: [i64; 2]) -> f64 {
    (kh[0] * kh[0] + kh[1] * kh[1]) as f64
}

impl Term {
    pub fn time_factor(&self, t: f64) -> C64 {
        self.coef * (self.omega * t).exp()
    }

    pub fn is_exponential(&self) -> bool {
        !matches!(self.shape, Shape::Resonant(_))
    }

    fn raw(&self, t: f64, z: f64, order: u8) -> Vec3 {
        match &self.shape {
            Shape::Basis(k) => match order {
                0 => basis_profile(*k, z),
                1 => basis_profile_dz(*k, z),
                _ => basis_profile_dzz(*k, z),
            }
            .expect("nonzero mode"),
            Shape::Layer(l) => {
                let f = l.dz_factor();
                let s = l.shape(z);
                let m = match order {
                    0 => C64::new(1.0, 0.0),
                    1 => f,
                    _ => f * f,
                };
                [m * s[0], m * s[1], m * s[2]]
            }
            Shape::Resonant(r) => match order {
                0 => r.profile(t, z),
                1 => r.profile_dz(t, z),
                _ => {
                    let d = resonant_dzz(r.side, r.nu, t, z) * C64::from_polar(1.0, r.mu * t / r.epsilon);
                    [r.delta[0] * d, r.delta[1] * d, C64::new(0.0, 0.0)]
                }
            },
            Shape::Poly(p) => match order {
                0 => p.eval(z),
                1 => p.dz().eval(z),
                _ => p.dz().dz().eval(z),
            },
        }
    }

    pub fn value(&self, t: f64, z: f64) -> Vec3 {
        let a = self.time_factor(t);
        self.raw(t, z, 0).map(|c| a * c)
    }

    pub fn dz(&self, t: f64, z: f64) -> Vec3 {
        let a = self.time_factor(t);
        self.raw(t, z, 1).map(|c| a * c)
    }

    pub fn dzz(&self, t: f64, z: f64) -> Vec3 {
        let a = self.time_factor(t);
        self.raw(t, z, 2).map(|c| a * c)
    }

    /// (∂t + (1/ε)e3∧ − Δ_h − ν∂zz) applied to the term, pressure omitted.
    pub fn defect(&self, t: f64, z: f64, epsilon: f64, nu: f64) -> Vec3 {
        let v = self.value(t, z);
        if let Shape::Resonant(r) = &self.shape {
            let im = C64::new(0.0, r.mu);
            return [(im * v[0] - v[1]) / epsilon, (im * v[1] + v[0]) / epsilon, C64::new(0.0, 0.0)];
        }
        let d2 = self.dzz(t, z);
        let lin = self.omega + kh2(self.kh);
        [
            lin * v[0] - v[1] / epsilon - nu * d2[0],
            lin * v[1] + v[0] / epsilon - nu * d2[1],
            lin * v[2] - nu * d2[2],
        ]
    }

    pub fn scale(&self) -> f64 {
        match &self.shape {
            Shape::Layer(l) => l.thickness(),
            Shape::Resonant(_) => 1e-7,
            _ => 1.0,
        }
    }
}

fn resonant_dzz(side: Side, nu: f64, t: f64, z: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r = (nu * t).sqrt();
    match side {
        Side::Bottom => {
            let x = z / (2.0 * r);
            z / (2.0 * r * r) * (-x * x).exp() / (PI.sqrt() * r)
        }
        Side::Top => {
            let x = (1.0 - z) / (2.0 * r);
            (-x * x).exp() / (PI.sqrt() * r)
        }
    }
}

/// A list of terms viewed as a mode field.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TermField {
    pub terms: Vec<Term>,
}

impl TermField {
    pub fn new(terms: Vec<Term>) -> Self {
        TermField { terms }
    }

    pub fn extend(&mut self, other: TermField) {
        self.terms.extend(other.terms);
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn defect(&self, kh: [i64; 2], t: f64, z: f64, epsilon: f64, nu: f64) -> Vec3 {
        let mut out = ZERO3;
        for term in self.terms.iter().filter(|x| x.kh == kh) {
            let d = term.defect(t, z, epsilon, nu);
            for j in 0..3 {
                out[j] += d[j];
            }
        }
        out
    }
}

impl ModeField for TermField {
    fn modes(&self) -> Vec<[i64; 2]> {
        let mut v: Vec<[i64; 2]> = self.terms.iter().map(|t| t.kh).collect();
        v.sort();
        v.dedup();
        v
    }

    fn profile(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        let mut out = ZERO3;
        for term in self.terms.iter().filter(|x| x.kh == kh) {
            let v = term.value(t, z);
            for j in 0..3 {
                out[j] += v[j];
            }
        }
        out
    }

    fn profile_dz(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        let mut out = ZERO3;
        for term in self.terms.iter().filter(|x| x.kh == kh) {
            let v = term.dz(t, z);
            for j in 0..3 {
                out[j] += v[j];
            }
        }
        out
    }

    fn min_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.scale()).fold(1.0, f64::min)
    }
}
