//! Quadrature checks of the eigenbasis on a ball of modes.

use crate::error::Result;
use crate::exec::Execution;
use crate::spectral::{basis_profile, basis_profile_dz, eigenvalue, horizontal_phase, ModeIndex, TensorGrid, HORIZONTAL_AREA};
use crate::C64;
use serde::Serialize;

#[derive(Debug, Clone, Default, Serialize)]
pub struct EigenReport {
    pub modes: usize,
    /// max |⟨N_l, N_k⟩ − δ_kl|
    pub orthonormality: f64,
    /// max |⟨N_l, e3∧N_k⟩ − iλ_k δ_kl|
    pub eigen_relation: f64,
    /// e3∧N_k − iλ_k N_k must be a gradient (pointwise check).
    pub gradient_residual: f64,
    pub divergence: f64,
    /// N_3 at the walls and the mean horizontal flux of k_h = 0 modes.
    pub flux: f64,
}

impl EigenReport {
    pub fn max_error(&self) -> f64 {
        [self.orthonormality, self.eigen_relation, self.gradient_residual, self.divergence, self.flux].into_iter().fold(0.0, f64::max)
    }
}

fn cross_e3(v: [C64; 3]) -> [C64; 3] {
    [-v[1], v[0], C64::new(0.0, 0.0)]
}

pub fn eigen_suite(radius: f64, exec: Execution) -> Result<EigenReport> {
    let modes = ModeIndex::ball(radius);
    let m = radius.floor() as usize;
    let grid = TensorGrid::new(4 * m + 4, 4 * m + 4, 8 * m + 24);
    grid.check_resolves(&modes)?;
    let lambdas: Vec<f64> = modes.iter().map(|k| eigenvalue(*k)).collect::<Result<_>>()?;
    // the grid weights are a tensor product and N_k = e^{ik_h·x}·profile(z), so every
    // grid pairing is (horizontal sum) × (vertical sum)
    let mut khs: Vec<[i64; 2]> = modes.iter().map(|k| k.kh()).collect();
    khs.sort();
    khs.dedup();
    let pts = grid.points();
    let wh = HORIZONTAL_AREA / (grid.nx * grid.ny) as f64;
    let nz = grid.zr.z.len();
    let phases: Vec<Vec<C64>> = exec.map(&khs, |kh| pts.iter().step_by(nz).map(|x| horizontal_phase(*kh, x[0], x[1])).collect());
    let hsum = |a: usize, b: usize| phases[a].iter().zip(&phases[b]).map(|(p, q)| p.conj() * q).sum::<C64>() * wh;
    let hmat: Vec<Vec<C64>> = (0..khs.len()).map(|a| (0..khs.len()).map(|b| hsum(a, b)).collect()).collect();
    let kpos: Vec<usize> = modes.iter().map(|k| khs.binary_search(&k.kh()).expect("listed")).collect();
    let profiles: Vec<Vec<[C64; 3]>> = exec.map(&modes, |k| grid.zr.z.iter().map(|&z| basis_profile(*k, z).expect("nonzero")).collect());
    let zpair = |a: &[[C64; 3]], b: &[[C64; 3]], rot: bool| {
        a.iter()
            .zip(b)
            .zip(&grid.zr.w)
            .map(|((u, v), w)| {
                let v = if rot { cross_e3(*v) } else { *v };
                (u[0].conj() * v[0] + u[1].conj() * v[1] + u[2].conj() * v[2]) * *w
            })
            .sum::<C64>()
    };
    let idx: Vec<usize> = (0..modes.len()).collect();
    let rows: Vec<(f64, f64)> = exec.map(&idx, |&i| {
        let (mut o, mut e) = (0.0f64, 0.0f64);
        for j in 0..modes.len() {
            let d = if i == j { 1.0 } else { 0.0 };
            let h = hmat[kpos[j]][kpos[i]];
            o = o.max((h * zpair(&profiles[j], &profiles[i], false) - d).norm());
            let target = C64::new(0.0, lambdas[i] * d);
            e = e.max((h * zpair(&profiles[j], &profiles[i], true) - target).norm());
        }
        (o, e)
    });
    let mut rep = EigenReport { modes: modes.len(), ..Default::default() };
    for (o, e) in rows {
        rep.orthonormality = rep.orthonormality.max(o);
        rep.eigen_relation = rep.eigen_relation.max(e);
    }
    let zs: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
    for (k, lam) in modes.iter().zip(&lambdas) {
        let kh = [k.k1 as f64, k.k2 as f64];
        let k2 = kh[0] * kh[0] + kh[1] * kh[1];
        let i = C64::new(0.0, 1.0);
        for &z in &zs {
            let n = basis_profile(*k, z)?;
            let dn = basis_profile_dz(*k, z)?;
            let rn = cross_e3(n);
            let r: Vec<C64> = (0..3).map(|c| rn[c] - i * lam * n[c]).collect();
            let g = if k2 == 0.0 {
                r[0].norm() + r[1].norm() + r[2].norm()
            } else {
                // r = ∇φ with φ = −i k·r_h/|k|²: r_h ∥ k and r_3 = ∂zφ
                let par = (r[0] * kh[1] - r[1] * kh[0]).norm();
                let rd: Vec<C64> = (0..3).map(|c| cross_e3(dn)[c] - i * lam * dn[c]).collect();
                let dphi = -i * (kh[0] * rd[0] + kh[1] * rd[1]) / k2;
                par + (r[2] - dphi).norm()
            };
            rep.gradient_residual = rep.gradient_residual.max(g);
            let div = i * (kh[0] * n[0] + kh[1] * n[1]) + dn[2];
            rep.divergence = rep.divergence.max(div.norm());
        }
        let walls = basis_profile(*k, 0.0)?[2].norm().max(basis_profile(*k, 1.0)?[2].norm());
        rep.flux = rep.flux.max(walls);
        if k.kh_is_zero() {
            let zr = crate::quad::ZRule::gauss(8 * m + 24);
            let mean = |c: usize| zr.z.iter().zip(&zr.w).map(|(&z, w)| basis_profile(*k, z).expect("nonzero")[c] * w).sum::<C64>();
            rep.flux = rep.flux.max(mean(0).norm()).max(mean(1).norm());
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ball_passes() {
        let r = eigen_suite(2.0, Execution::Sequential).unwrap();
        assert!(r.modes > 10);
        assert!(r.max_error() < 1e-10, "{r:?}");
    }

    #[test]
    fn factored_pairing_matches_full_grid() {
        use crate::spectral::basis_vector;
        let grid = TensorGrid::new(8, 8, 24);
        let (a, b) = (ModeIndex::new(1, 0, 2), ModeIndex::new(1, 0, -1));
        let sa = grid.sample(|x| basis_vector(a, x).unwrap());
        let sb = grid.sample(|x| basis_vector(b, x).unwrap());
        let full = grid.inner(&sa, &sa);
        assert!((full - 1.0).norm() < 1e-12);
        assert!(grid.inner(&sa, &sb).norm() < 1e-12);
    }
}
