use super::{Poly, Term, TermField, Shape};
use crate::error::{Error, Result};
use crate::quad::ZRule;
use crate::spectral::{basis_profile, ModeIndex, Params};
use crate::C64;
use serde::Serialize;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Wall data of one horizontal mode: (horizontal, vertical).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct WallData {
    pub h: [C64; 2],
    pub v: C64,
}

impl WallData {
    pub fn norm_sqr(&self) -> f64 {
        self.h[0].norm_sqr() + self.h[1].norm_sqr() + self.v.norm_sqr()
    }
}

/// Divergence-free w with w|_{z=0} = δ⁰, ∂z w_h|_{z=1} = δ¹_h, w_3|_{z=1} = δ¹_3.
pub fn stopping_lift(kh: [i64; 2], d0: WallData, d1: WallData) -> Result<Poly> {
    let (k1, k2) = (kh[0] as f64, kh[1] as f64);
    let k2n = k1 * k1 + k2 * k2;
    let ikd0 = I * (k1 * d0.h[0] + k2 * d0.h[1]);
    let ikd1 = I * (k1 * d1.h[0] + k2 * d1.h[1]);
    let phi = if kh == [0, 0] {
        let gap = (d1.v - d0.v).norm();
        if gap > 1e-12 * (1.0 + d0.v.norm().max(d1.v.norm())) {
            return Err(Error::Incompatible(format!("mean vertical traces differ by {gap:e}")));
        }
        zero()
    } else {
        // (1/12)Δ_hφ = −∇·δ⁰_h − ½∇·δ¹_h − δ¹_3 + δ⁰_3
        12.0 / k2n * (ikd0 + 0.5 * ikd1 + d1.v - d0.v)
    };
    let mut p = Poly::default();
    // w_h = δ⁰_h + δ¹_h z + ik φ (z − 2z² + z³)
    let g = [I * k1 * phi, I * k2 * phi];
    for c in 0..2 {
        p.h[0][c] = d0.h[c];
        p.h[1][c] = d1.h[c] + g[c];
        p.h[2][c] = -2.0 * g[c];
        p.h[3][c] = g[c];
    }
    // w_3 = δ⁰_3 − ∫₀^z ik·w_h
    let ikg = I * (k1 * g[0] + k2 * g[1]);
    p.v[0] = d0.v;
    p.v[1] = -ikd0;
    p.v[2] = -0.5 * ikd1 - 0.5 * ikg;
    p.v[3] = 2.0 / 3.0 * ikg;
    p.v[4] = -0.25 * ikg;
    Ok(p)
}

/// Stopping lift over a set of modes, as a field.
pub fn stopping_lift_field(traces: &[([i64; 2], WallData, WallData)]) -> Result<TermField> {
    let mut terms = Vec::new();
    for &(kh, d0, d1) in traces {
        let p = stopping_lift(kh, d0, d1)?;
        if !p.is_zero() {
            terms.push(Term { kh, coef: C64::new(1.0, 0.0), omega: zero(), mu: 0.0, shape: Shape::Poly(p) });
        }
    }
    Ok(TermField::new(terms))
}

fn inv_lap_grad(kh: [i64; 2], s: C64) -> [C64; 2] {
    let k2 = (kh[0] * kh[0] + kh[1] * kh[1]) as f64;
    [-I * kh[0] as f64 * s / k2, -I * kh[1] as f64 * s / k2]
}

/// v_3 = √(εν)[δ¹_3 z + δ⁰_3(1−z)], v_h = √(εν)∇_hΔ_h⁻¹[δ⁰_3 − δ¹_3].
pub fn lift_interior_vint0(kh: [i64; 2], d0_3: C64, d1_3: C64, p: &Params) -> Result<Poly> {
    if kh == [0, 0] {
        if d0_3.norm() > 0.0 || d1_3.norm() > 0.0 {
            return Err(Error::Incompatible("nonzero mean trace in interior lift".into()));
        }
        return Ok(Poly::default());
    }
    let s = p.sqrt_en();
    let mut out = Poly::default();
    out.h[0] = inv_lap_grad(kh, s * (d0_3 - d1_3));
    out.v[0] = s * d0_3;
    out.v[1] = s * (d1_3 - d0_3);
    Ok(out)
}

/// v_3 = −T z, v_h = ∇_hΔ_h⁻¹ T; restores zero flux at z=1.
pub fn lift_interior_vint1(kh: [i64; 2], trace: C64) -> Result<Poly> {
    if kh == [0, 0] {
        if trace.norm() > 0.0 {
            return Err(Error::Incompatible("nonzero mean trace in interior lift".into()));
        }
        return Ok(Poly::default());
    }
    let mut out = Poly::default();
    out.h[0] = inv_lap_grad(kh, trace);
    out.v[1] = -trace;
    Ok(out)
}

/// Printed closed forms, horizontally averaged pairing:
/// ⟨N_l | (il₁, il₂, |l_h|²z)e^{il_h·x}⟩ and ⟨N_l | (−il₂, il₁, 0)e^{il_h·x}⟩.
pub fn scalar_product_forms(l: ModeIndex) -> Result<(C64, C64)> {
    if l.is_zero() {
        return Err(Error::ZeroMode);
    }
    let lh = l.kh_norm();
    let first = if l.k3 != 0 {
        let sign = if l.k3 % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(0.0, lh.powi(3) * sign / (2.0 * PI * PI * l.norm_pi() * l.k3 as f64))
    } else {
        zero()
    };
    let second = if l.k3 == 0 { C64::new(-lh / (2.0 * PI), 0.0) } else { zero() };
    Ok((first, second))
}

/// Same two pairings by quadrature against the basis (the horizontal
/// average of |e^{il_h·x}|² is 1).
pub fn scalar_product_quadrature(l: ModeIndex) -> Result<(C64, C64)> {
    if l.is_zero() {
        return Err(Error::ZeroMode);
    }
    let rule = ZRule::uniform(8 + l.k3.unsigned_abs() as usize, 20);
    let (l1, l2) = (l.k1 as f64, l.k2 as f64);
    let lh2 = l1 * l1 + l2 * l2;
    let mut a = zero();
    let mut b = zero();
    for (&z, &w) in rule.z.iter().zip(&rule.w) {
        let n = basis_profile(l, z)?;
        a += w * (n[0].conj() * I * l1 + n[1].conj() * I * l2 + n[2].conj() * lh2 * z);
        b += w * (n[0].conj() * (-I * l2) + n[1].conj() * I * l1);
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{max_divergence, ModeField};

    fn wd(h0: f64, h1: f64, v: f64) -> WallData {
        WallData { h: [C64::new(h0, 0.3 * h0), C64::new(h1, -h1)], v: C64::new(v, 0.5 * v) }
    }

    #[test]
    fn stopping_lift_traces_and_divergence() {
        for kh in [[1, 0], [2, -1], [0, 3]] {
            let d0 = wd(0.7, -0.2, 0.4);
            let d1 = wd(-0.1, 0.9, -0.6);
            let p = stopping_lift(kh, d0, d1).unwrap();
            let w0 = p.eval(0.0);
            let w1 = p.eval(1.0);
            let dw1 = p.dz().eval(1.0);
            assert!((w0[0] - d0.h[0]).norm() + (w0[1] - d0.h[1]).norm() + (w0[2] - d0.v).norm() < 1e-14);
            assert!((dw1[0] - d1.h[0]).norm() + (dw1[1] - d1.h[1]).norm() < 1e-13);
            assert!((w1[2] - d1.v).norm() < 1e-13);
            let f = stopping_lift_field(&[(kh, d0, d1)]).unwrap();
            assert!(max_divergence(&f, 0.0) < 1e-12);
        }
    }

    #[test]
    fn stopping_lift_examples() {
        assert!(stopping_lift([1, 1], WallData::default(), WallData::default()).unwrap().is_zero());
        let c = C64::new(0.4, -0.2);
        let d = WallData { h: [zero(); 2], v: c };
        let p = stopping_lift([0, 0], d, d).unwrap();
        for z in [0.0, 0.3, 1.0] {
            let v = p.eval(z);
            assert!(v[0].norm() + v[1].norm() < 1e-16 && (v[2] - c).norm() < 1e-16);
        }
        let bad = WallData { h: [zero(); 2], v: C64::new(1.0, 0.0) };
        assert!(stopping_lift([0, 0], bad, WallData::default()).is_err());
        // δ⁰_3 = e^{ix1}: φ = 12/|k|²·(−δ⁰_3) = −12
        let p = stopping_lift([1, 0], WallData { h: [zero(); 2], v: C64::new(1.0, 0.0) }, WallData::default()).unwrap();
        assert!((p.h[1][0] - I * (-12.0)).norm() < 1e-14);
    }

    #[test]
    fn vint0_single_mode() {
        let p = Params::new(1e-4, 1e-4);
        let v = lift_interior_vint0([1, 0], C64::new(1.0, 0.0), zero(), &p).unwrap();
        let s = p.sqrt_en();
        assert!((v.h[0][0] - C64::new(0.0, -s)).norm() < 1e-18);
        assert!((v.eval(0.0)[2] - s).norm() < 1e-18 && v.eval(1.0)[2].norm() < 1e-18);
        let f = TermField::new(vec![Term { kh: [1, 0], coef: C64::new(1.0, 0.0), omega: zero(), mu: 0.0, shape: Shape::Poly(v) }]);
        assert!(max_divergence(&f, 0.0) < 1e-12);
        assert!(lift_interior_vint0([0, 0], C64::new(1.0, 0.0), zero(), &p).is_err());
    }

    #[test]
    fn vint1_restores_flux() {
        let t = C64::new(0.2, 0.7);
        let v = lift_interior_vint1([1, 2], t).unwrap();
        assert!((v.eval(1.0)[2] + t).norm() < 1e-16 && v.eval(0.0)[2].norm() == 0.0);
        let f = TermField::new(vec![Term { kh: [1, 2], coef: C64::new(1.0, 0.0), omega: zero(), mu: 0.0, shape: Shape::Poly(v) }]);
        assert!(max_divergence(&f, 0.0) < 1e-14);
        assert!(f.profile([1, 2], 0.0, 0.5)[0].norm() > 0.0);
        assert!(lift_interior_vint1([0, 0], zero()).unwrap().is_zero());
    }

    #[test]
    fn scalar_product_examples() {
        let (_, b) = scalar_product_forms(ModeIndex::new(3, 4, 0)).unwrap();
        assert!((b - C64::new(-5.0 / (2.0 * PI), 0.0)).norm() < 1e-15);
        let (_, b) = scalar_product_forms(ModeIndex::new(3, 4, 2)).unwrap();
        assert_eq!(b, zero());
    }
}
