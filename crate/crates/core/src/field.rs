//! Fields that decouple by horizontal Fourier mode: u = Σ_{k_h} e^{ik_h·x_h} U_{k_h}(t,z).
//! Norms use Parseval in x_h (factor 4π²) and layered Gauss-Legendre in z.

use crate::quad::ZRule;
use crate::spectral::{horizontal_phase, HORIZONTAL_AREA};
use crate::C64;

pub type Vec3 = [C64; 3];

pub const ZERO3: Vec3 = [C64 { re: 0.0, im: 0.0 }; 3];

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale3(s: C64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn norm3_sqr(a: &Vec3) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum()
}

/// A field given mode-by-mode as z-profiles with exact z-derivatives.
pub trait ModeField {
    fn modes(&self) -> Vec<[i64; 2]>;
    fn profile(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3;
    fn profile_dz(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3;
    /// Thinnest z-structure, used to grade the quadrature.
    fn min_scale(&self) -> f64 {
        1e-3
    }

    fn eval(&self, t: f64, x: [f64; 3]) -> Vec3 {
        let mut out = ZERO3;
        for kh in self.modes() {
            out = add3(out, scale3(horizontal_phase(kh, x[0], x[1]), self.profile(kh, t, x[2])));
        }
        out
    }

    fn divergence(&self, kh: [i64; 2], t: f64, z: f64) -> C64 {
        let p = self.profile(kh, t, z);
        let d = self.profile_dz(kh, t, z);
        C64::i() * (kh[0] as f64 * p[0] + kh[1] as f64 * p[1]) + d[2]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Norms {
    pub total: f64,
    pub horizontal: f64,
    pub vertical: f64,
}

pub fn rule_for(min_scale: f64) -> ZRule {
    ZRule::layered((min_scale * 0.02).min(0.01), 16)
}

/// L² norms over the strip at time t.
pub fn norms<F: ModeField + ?Sized>(f: &F, t: f64) -> Norms {
    let rule = rule_for(f.min_scale());
    let (mut h, mut v) = (0.0, 0.0);
    for kh in f.modes() {
        for (&z, &w) in rule.z.iter().zip(&rule.w) {
            let p = f.profile(kh, t, z);
            h += w * (p[0].norm_sqr() + p[1].norm_sqr());
            v += w * p[2].norm_sqr();
        }
    }
    let (h, v) = (HORIZONTAL_AREA * h, HORIZONTAL_AREA * v);
    Norms { total: (h + v).sqrt(), horizontal: h.sqrt(), vertical: v.sqrt() }
}

/// Largest pointwise |∇·u| over the quadrature nodes and modes.
pub fn max_divergence<F: ModeField + ?Sized>(f: &F, t: f64) -> f64 {
    let rule = rule_for(f.min_scale());
    let mut m: f64 = 0.0;
    for kh in f.modes() {
        for &z in &rule.z {
            m = m.max(f.divergence(kh, t, z).norm());
        }
    }
    m
}

/// Sum of several mode fields.
pub struct SumField<'a> {
    pub parts: Vec<&'a dyn ModeField>,
}

impl ModeField for SumField<'_> {
    fn modes(&self) -> Vec<[i64; 2]> {
        let mut v: Vec<[i64; 2]> = self.parts.iter().flat_map(|p| p.modes()).collect();
        v.sort();
        v.dedup();
        v
    }
    fn profile(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        self.parts.iter().filter(|p| p.modes().contains(&kh)).fold(ZERO3, |a, p| add3(a, p.profile(kh, t, z)))
    }
    fn profile_dz(&self, kh: [i64; 2], t: f64, z: f64) -> Vec3 {
        self.parts.iter().filter(|p| p.modes().contains(&kh)).fold(ZERO3, |a, p| add3(a, p.profile_dz(kh, t, z)))
    }
    fn min_scale(&self) -> f64 {
        self.parts.iter().map(|p| p.min_scale()).fold(1.0, f64::min)
    }
}

/// Time-independent field.
impl ModeField for crate::spectral::SpectralField {
    fn modes(&self) -> Vec<[i64; 2]> {
        self.horizontal_modes()
    }
    fn profile(&self, kh: [i64; 2], _t: f64, z: f64) -> Vec3 {
        crate::spectral::SpectralField::profile(self, kh, z)
    }
    fn profile_dz(&self, kh: [i64; 2], _t: f64, z: f64) -> Vec3 {
        let mut out = ZERO3;
        for (k, c) in self.coeffs.iter().filter(|(k, _)| k.kh() == kh) {
            let d = crate::spectral::basis_profile_dz(*k, z).expect("nonzero mode");
            out = add3(out, scale3(*c, d));
        }
        out
    }
    fn min_scale(&self) -> f64 {
        let k3 = self.coeffs.keys().map(|k| k.k3.unsigned_abs()).max().unwrap_or(0);
        1.0 / (1.0 + k3 as f64)
    }
}
