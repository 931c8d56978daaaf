//! Coriolis eigenbasis of the zero-flux divergence-free space, projections
//! and the rotation semigroup.
//!
//! Inner products are plain L² integrals over [0,2π)² × [0,1], in which the
//! N_k are orthonormal. `HORIZONTAL_AREA` converts to horizontally averaged
//! pairings where those are needed.

use crate::error::{Error, Result};
use crate::quad::ZRule;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const HORIZONTAL_AREA: f64 = 4.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub k1: i64,
    pub k2: i64,
    pub k3: i64,
}

impl ModeIndex {
    pub const fn new(k1: i64, k2: i64, k3: i64) -> Self {
        ModeIndex { k1, k2, k3 }
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0 && self.k2 == 0 && self.k3 == 0
    }

    pub fn kh(&self) -> [i64; 2] {
        [self.k1, self.k2]
    }

    pub fn kh_is_zero(&self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }

    /// |k_h|.
    pub fn kh_norm(&self) -> f64 {
        ((self.k1 * self.k1 + self.k2 * self.k2) as f64).sqrt()
    }

    /// Euclidean |k| on the integer lattice.
    pub fn norm(&self) -> f64 {
        ((self.k1 * self.k1 + self.k2 * self.k2 + self.k3 * self.k3) as f64).sqrt()
    }

    /// √(|k_h|² + (πk3)²), the norm that appears in the eigenbasis.
    pub fn norm_pi(&self) -> f64 {
        let kh2 = (self.k1 * self.k1 + self.k2 * self.k2) as f64;
        (kh2 + (PI * self.k3 as f64).powi(2)).sqrt()
    }

    /// All nonzero modes with Euclidean norm ≤ r, lexicographic.
    pub fn ball(r: f64) -> Vec<ModeIndex> {
        let m = r.floor() as i64;
        let mut out = Vec::new();
        for k1 in -m..=m {
            for k2 in -m..=m {
                for k3 in -m..=m {
                    let k = ModeIndex::new(k1, k2, k3);
                    if !k.is_zero() && k.norm() <= r + 1e-12 {
                        out.push(k);
                    }
                }
            }
        }
        out
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.k1, self.k2, self.k3)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub nu: f64,
    pub beta: f64,
    pub n_cut: usize,
    pub m0: Vec<f64>,
}

impl Params {
    pub fn new(epsilon: f64, nu: f64) -> Self {
        Params { epsilon, nu, beta: 1.0, n_cut: 8, m0: vec![] }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v <= 1.0;
        if !ok(self.epsilon) || !ok(self.nu) {
            return Err(Error::InvalidParams(format!(
                "epsilon={} nu={} must lie in (0,1]",
                self.epsilon, self.nu
            )));
        }
        if self.beta < 0.0 || self.n_cut == 0 {
            return Err(Error::InvalidParams("beta >= 0 and N >= 1 required".into()));
        }
        Ok(())
    }

    pub fn sqrt_en(&self) -> f64 {
        (self.epsilon * self.nu).sqrt()
    }

    /// ν' = π²ν.
    pub fn nu_prime(&self) -> f64 {
        PI * PI * self.nu
    }
}

pub fn eigenvalue(k: ModeIndex) -> Result<f64> {
    if k.is_zero() {
        return Err(Error::ZeroMode);
    }
    Ok(-(k.k3 as f64) * PI / k.norm_pi())
}

/// Amplitudes (n1, n2, n3) of N_k.
pub fn n_vector(k: ModeIndex) -> Result<[C64; 3]> {
    if k.is_zero() {
        return Err(Error::ZeroMode);
    }
    if k.kh_is_zero() {
        let s = k.k3.signum() as f64;
        return Ok([C64::new(s / (2.0 * PI), 0.0), C64::new(0.0, 1.0 / (2.0 * PI)), C64::new(0.0, 0.0)]);
    }
    let lam = eigenvalue(k)?;
    let kh = k.kh_norm();
    let (k1, k2) = (k.k1 as f64, k.k2 as f64);
    let d = 2.0 * PI * kh;
    Ok([
        C64::new(k1 * lam, k2) / d,
        C64::new(k2 * lam, -k1) / d,
        C64::new(0.0, kh / (2.0 * PI * k.norm_pi())),
    ])
}

/// z-structure of N_k (the factor multiplying e^{ik_h·x_h}).
pub fn basis_profile(k: ModeIndex, z: f64) -> Result<[C64; 3]> {
    let n = n_vector(k)?;
    let a = PI * k.k3 as f64 * z;
    let (c, s) = (a.cos(), a.sin());
    Ok([n[0] * c, n[1] * c, n[2] * s])
}

pub fn basis_profile_dz(k: ModeIndex, z: f64) -> Result<[C64; 3]> {
    let n = n_vector(k)?;
    let q = PI * k.k3 as f64;
    let (c, s) = ((q * z).cos(), (q * z).sin());
    Ok([-n[0] * q * s, -n[1] * q * s, n[2] * q * c])
}

pub fn basis_profile_dzz(k: ModeIndex, z: f64) -> Result<[C64; 3]> {
    let p = basis_profile(k, z)?;
    let q2 = (PI * k.k3 as f64).powi(2);
    Ok([-p[0] * q2, -p[1] * q2, -p[2] * q2])
}

pub fn horizontal_phase(kh: [i64; 2], x: f64, y: f64) -> C64 {
    C64::from_polar(1.0, kh[0] as f64 * x + kh[1] as f64 * y)
}

/// N_k at x = (x1, x2, z).
pub fn basis_vector(k: ModeIndex, x: [f64; 3]) -> Result<[C64; 3]> {
    let p = basis_profile(k, x[2])?;
    let e = horizontal_phase(k.kh(), x[0], x[1]);
    Ok([p[0] * e, p[1] * e, p[2] * e])
}

/// ∇·N_k evaluated from exact derivatives.
pub fn basis_divergence(k: ModeIndex, x: [f64; 3]) -> Result<C64> {
    let p = basis_profile(k, x[2])?;
    let d = basis_profile_dz(k, x[2])?;
    let e = horizontal_phase(k.kh(), x[0], x[1]);
    let i = C64::i();
    Ok((i * k.k1 as f64 * p[0] + i * k.k2 as f64 * p[1] + d[2]) * e)
}

/// Finite expansion Σ c_k N_k.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub coeffs: BTreeMap<ModeIndex, C64>,
}

impl SpectralField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(k: ModeIndex, c: C64) -> Self {
        let mut f = Self::new();
        f.coeffs.insert(k, c);
        f
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (ModeIndex, C64)>) -> Self {
        let mut f = Self::new();
        for (k, c) in pairs {
            *f.coeffs.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
        }
        f
    }

    pub fn get(&self, k: &ModeIndex) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self, other⟩, conjugate-linear in self.
    pub fn inner(&self, other: &SpectralField) -> C64 {
        self.coeffs.iter().map(|(k, a)| a.conj() * other.get(k)).sum()
    }

    pub fn map(&self, f: impl Fn(&ModeIndex, C64) -> C64) -> SpectralField {
        SpectralField { coeffs: self.coeffs.iter().map(|(k, c)| (*k, f(k, *c))).collect() }
    }

    pub fn axpy(&mut self, a: C64, other: &SpectralField) {
        for (k, c) in &other.coeffs {
            *self.coeffs.entry(*k).or_insert(C64::new(0.0, 0.0)) += a * c;
        }
    }

    pub fn horizontal_modes(&self) -> Vec<[i64; 2]> {
        let mut v: Vec<[i64; 2]> = self.coeffs.keys().map(|k| k.kh()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Profile of the e^{ik_h·x_h} component at height z.
    pub fn profile(&self, kh: [i64; 2], z: f64) -> [C64; 3] {
        let mut out = [C64::new(0.0, 0.0); 3];
        for (k, c) in self.coeffs.range(ModeIndex::new(kh[0], kh[1], i64::MIN)..=ModeIndex::new(kh[0], kh[1], i64::MAX)) {
            let p = basis_profile(*k, z).expect("nonzero mode");
            for j in 0..3 {
                out[j] += c * p[j];
            }
        }
        out
    }

    pub fn eval(&self, x: [f64; 3]) -> [C64; 3] {
        let mut out = [C64::new(0.0, 0.0); 3];
        for kh in self.horizontal_modes() {
            let p = self.profile(kh, x[2]);
            let e = horizontal_phase(kh, x[0], x[1]);
            for j in 0..3 {
                out[j] += p[j] * e;
            }
        }
        out
    }
}

/// L u: c_k ↦ iλ_k c_k.
pub fn coriolis_apply(u: &SpectralField) -> SpectralField {
    u.map(|k, c| C64::new(0.0, eigenvalue(*k).unwrap_or(0.0)) * c)
}

/// exp(-τL): c_k ↦ e^{-iλ_k τ} c_k.
pub fn semigroup(tau: f64, u: &SpectralField) -> SpectralField {
    u.map(|k, c| C64::from_polar(1.0, -eigenvalue(*k).unwrap_or(0.0) * tau) * c)
}

/// Tensor grid on [0,2π)² × [0,1]: uniform trapezoid in x_h, Gauss-Legendre in z.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    pub nx: usize,
    pub ny: usize,
    pub zr: ZRule,
}

impl TensorGrid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        TensorGrid { nx, ny, zr: ZRule::gauss(nz) }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.zr.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in (ix, iy, iz) order.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let mut v = Vec::with_capacity(self.len());
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                for &z in &self.zr.z {
                    v.push([2.0 * PI * ix as f64 / self.nx as f64, 2.0 * PI * iy as f64 / self.ny as f64, z]);
                }
            }
        }
        v
    }

    pub fn weights(&self) -> Vec<f64> {
        let wh = HORIZONTAL_AREA / (self.nx * self.ny) as f64;
        let mut v = Vec::with_capacity(self.len());
        for _ in 0..self.nx * self.ny {
            for &w in &self.zr.w {
                v.push(wh * w);
            }
        }
        v
    }

    pub fn sample(&self, f: impl Fn([f64; 3]) -> [C64; 3]) -> Vec<[C64; 3]> {
        self.points().into_iter().map(f).collect()
    }

    /// Quadrature of ∫ conj(a)·b.
    pub fn inner(&self, a: &[[C64; 3]], b: &[[C64; 3]]) -> C64 {
        self.weights()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (a, b))| (a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2]) * *w)
            .sum()
    }

    pub fn check_resolves(&self, modes: &[ModeIndex]) -> Result<()> {
        for k in modes {
            let need_x = 4 * k.k1.unsigned_abs().max(1) as usize;
            let need_y = 4 * k.k2.unsigned_abs().max(1) as usize;
            let need_z = 2 * k.k3.unsigned_abs() as usize + 2;
            if self.nx < need_x || self.ny < need_y || self.zr.z.len() < need_z {
                return Err(Error::UnderResolved(format!(
                    "mode {k} needs nx>={need_x}, ny>={need_y}, nz>={need_z}"
                )));
            }
        }
        Ok(())
    }
}

/// c_k = ⟨N_k, field⟩ by quadrature on `grid`.
pub fn project_v0(grid: &TensorGrid, samples: &[[C64; 3]], modes: &[ModeIndex]) -> Result<SpectralField> {
    grid.check_resolves(modes)?;
    if samples.len() != grid.len() {
        return Err(Error::UnderResolved("sample count does not match grid".into()));
    }
    let mut out = SpectralField::new();
    for &k in modes {
        let nk = grid.sample(|x| basis_vector(k, x).expect("nonzero"));
        out.coeffs.insert(k, grid.inner(&nk, samples));
    }
    Ok(out)
}

/// ⟨N_k, e^{ik_h·x_h} F(z)⟩ for a single horizontal mode, by Gauss-Legendre in z.
pub fn project_profile(k: ModeIndex, rule: &ZRule, f: impl Fn(f64) -> [C64; 3]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (&z, &w) in rule.z.iter().zip(&rule.w) {
        let n = basis_profile(k, z).expect("nonzero");
        let v = f(z);
        s += (n[0].conj() * v[0] + n[1].conj() * v[1] + n[2].conj() * v[2]) * w;
    }
    s * HORIZONTAL_AREA
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(ModeIndex::new(1, 0, 0)).unwrap(), 0.0);
        assert!((eigenvalue(ModeIndex::new(0, 0, 1)).unwrap() + 1.0).abs() < 1e-15);
        let l = eigenvalue(ModeIndex::new(1, 0, 1)).unwrap();
        assert!((l + PI / (1.0 + PI * PI).sqrt()).abs() < 1e-15);
        assert!((l + 0.95289).abs() < 1e-5);
        assert_eq!(eigenvalue(ModeIndex::new(0, 0, 0)), Err(Error::ZeroMode));
    }

    #[test]
    fn basis_vector_examples() {
        let v = basis_vector(ModeIndex::new(0, 0, 1), [0.3, 0.1, 0.5]).unwrap();
        assert!(v.iter().all(|c| c.norm() < 1e-16));
        let n = n_vector(ModeIndex::new(1, 0, 1)).unwrap();
        assert!((n[2] - C64::new(0.0, 1.0 / (2.0 * PI * (1.0 + PI * PI).sqrt()))).norm() < 1e-16);
    }

    #[test]
    fn unit_norm_including_k3_zero() {
        let rule = ZRule::gauss(48);
        for k in [ModeIndex::new(1, 0, 0), ModeIndex::new(2, -1, 0), ModeIndex::new(0, 0, -3), ModeIndex::new(1, 2, 3)] {
            let n2 = project_profile(k, &rule, |z| basis_profile(k, z).unwrap());
            assert!((n2 - 1.0).norm() < 1e-13, "{k}: {n2}");
        }
    }

    #[test]
    fn coriolis_and_semigroup_examples() {
        let u = SpectralField::single(ModeIndex::new(0, 0, 1), C64::new(1.0, 0.0));
        let lu = coriolis_apply(&u);
        assert!((lu.get(&ModeIndex::new(0, 0, 1)) - C64::new(0.0, -1.0)).norm() < 1e-15);
        let g = SpectralField::single(ModeIndex::new(1, 0, 0), C64::new(1.0, 0.0));
        assert_eq!(coriolis_apply(&g).get(&ModeIndex::new(1, 0, 0)), C64::new(0.0, 0.0));
        let s = semigroup(2.0 * PI, &SpectralField::from_pairs([
            (ModeIndex::new(0, 0, 1), C64::new(0.3, 0.1)),
            (ModeIndex::new(0, 0, -2), C64::new(-1.0, 2.0)),
        ]));
        assert!((s.get(&ModeIndex::new(0, 0, 1)) - C64::new(0.3, 0.1)).norm() < 1e-14);
        assert!((s.get(&ModeIndex::new(0, 0, -2)) - C64::new(-1.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn projection_of_gradient_vanishes() {
        // φ = e^{i(x1+2x2)} cos(πz)·z² has no zero-flux restriction on ∇φ
        let grid = TensorGrid::new(8, 8, 40);
        let modes: Vec<ModeIndex> = (-3..=3).map(|k3| ModeIndex::new(1, 2, k3)).collect();
        let samples = grid.sample(|x| {
            let e = horizontal_phase([1, 2], x[0], x[1]);
            let z = x[2];
            let phi = (PI * z).cos() * z * z;
            let dphi = -PI * (PI * z).sin() * z * z + 2.0 * z * (PI * z).cos();
            [C64::i() * phi * e, C64::i() * 2.0 * phi * e, e * dphi]
        });
        let c = project_v0(&grid, &samples, &modes).unwrap();
        assert!(c.norm() < 1e-12, "{}", c.norm());
    }

    #[test]
    fn projection_rejects_coarse_grid() {
        let grid = TensorGrid::new(2, 2, 4);
        let modes = [ModeIndex::new(3, 0, 1)];
        let s = vec![[C64::new(0.0, 0.0); 3]; grid.len()];
        assert!(matches!(project_v0(&grid, &s, &modes), Err(Error::UnderResolved(_))));
    }
}
