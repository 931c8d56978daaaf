//! Ekman pumping: the damping coefficient A_k, its limit R_k + iI_k, and the
//! diagonal envelope equation for the filtered interior amplitudes.
//!
//! A_k is normalized for the L² pairing in which N_k is orthonormal, so its
//! limit is |T²|·(R_k + iI_k) with R_k, I_k the horizontally averaged
//! coefficients (at λ_k = 0 this is the classical spin-down rate 1/√2).

use crate::boundary_layers::{Sign, Transition};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::spectral::{eigenvalue, n_vector, ModeIndex, Params, SpectralField, HORIZONTAL_AREA};
use crate::C64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EkmanCoefficient {
    pub a: C64,
    pub k: ModeIndex,
}

/// (n_−, n_+) = P⁻¹(n1, n2) at μ = −λ_k, with the transition data used.
pub fn n_sigma(k: ModeIndex, p: &Params) -> Result<(Transition, C64, C64)> {
    let lam = eigenvalue(k)?;
    let tr = Transition::new(-lam, k.kh(), p)?;
    let n = n_vector(k)?;
    let (nm, np) = tr.solve([n[0], n[1]])?;
    Ok((tr, nm, np))
}

/// Σ_σ (n_σ/λ^σ)(i k_h·w_σ): δ⁰_3 per unit c_k.
pub fn suction_factor(k: ModeIndex, p: &Params) -> Result<C64> {
    if k.kh_is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    let (tr, nm, np) = n_sigma(k, p)?;
    let mut s = C64::new(0.0, 0.0);
    for (sig, n) in [(Sign::Minus, nm), (Sign::Plus, np)] {
        let w = tr.w(sig);
        let ikw = C64::i() * (k.k1 as f64 * w[0] + k.k2 as f64 * w[1]);
        s += n / tr.rates.get(sig) * ikw;
    }
    Ok(s)
}

/// 2π|k_h|/|k|², |k|² = |k_h|² + (πk3)²: the pumping weight of a unit
/// bottom suction on mode k.
pub fn pumping_weight(k: ModeIndex) -> f64 {
    if k.kh_is_zero() {
        0.0
    } else {
        2.0 * PI * k.kh_norm() / k.norm_pi().powi(2)
    }
}

pub fn ekman_coefficient(k: ModeIndex, p: &Params) -> Result<EkmanCoefficient> {
    if k.is_zero() {
        return Err(Error::ZeroMode);
    }
    let a = pumping_weight(k) * suction_factor(k, p)?;
    Ok(EkmanCoefficient { a, k })
}

/// Horizontally averaged limit coefficients (R_k, I_k).
pub fn ekman_limit_averaged(k: ModeIndex) -> Result<(f64, f64)> {
    let lam = eigenvalue(k)?;
    if lam.abs() >= 1.0 {
        return Err(Error::InvalidParams(format!("|lambda_k| = 1 for {k}: no limit pumping")));
    }
    let pre = (1.0 - lam * lam) / (8.0 * 2f64.sqrt() * PI * PI);
    let a = (1.0 + lam) / (1.0 - lam).sqrt();
    let b = (1.0 - lam) / (1.0 + lam).sqrt();
    Ok((pre * (a + b), pre * (a - b)))
}

/// Limit of A_k as ε, ν → 0, in the same normalization as `ekman_coefficient`.
pub fn ekman_limit_coefficient(k: ModeIndex) -> Result<(f64, f64)> {
    let (r, i) = ekman_limit_averaged(k)?;
    Ok((HORIZONTAL_AREA * r, HORIZONTAL_AREA * i))
}

/// |k_h|² + ν'k3² + √(ν/ε)A_k.
pub fn damping_rate(k: ModeIndex, p: &Params) -> Result<C64> {
    let a = ekman_coefficient(k, p)?.a;
    Ok(k.kh_norm().powi(2) + p.nu_prime() * (k.k3 as f64).powi(2) + (p.nu / p.epsilon).sqrt() * a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Variant {
    /// Vertical viscosity in the interior dropped.
    #[default]
    NoVertical,
    WithVertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Pumping {
    #[default]
    Exact,
    /// R_k + iI_k in place of A_k.
    Limit,
}

/// Slow rate r_k with c_k(t) = γ̂_k e^{-r_k t}.
pub fn envelope_rate(k: ModeIndex, p: &Params, variant: Variant, pumping: Pumping) -> Result<C64> {
    let a = match pumping {
        Pumping::Exact => ekman_coefficient(k, p)?.a,
        Pumping::Limit if k.kh_is_zero() => C64::new(0.0, 0.0),
        Pumping::Limit => {
            let (r, i) = ekman_limit_coefficient(k)?;
            C64::new(r, i)
        }
    };
    let vert = match variant {
        Variant::NoVertical => 0.0,
        Variant::WithVertical => p.nu_prime() * (k.k3 as f64).powi(2),
    };
    Ok(k.kh_norm().powi(2) + vert + (p.nu / p.epsilon).sqrt() * a)
}

pub fn envelope_rates(gamma: &SpectralField, p: &Params, variant: Variant, pumping: Pumping) -> Result<Vec<(ModeIndex, C64)>> {
    let modes: Vec<ModeIndex> = gamma.coeffs.keys().copied().collect();
    Execution::default()
        .map(&modes, |k| envelope_rate(*k, p, variant, pumping).map(|r| (*k, r)))
        .into_iter()
        .collect()
}

/// Closed form c_k(t) = γ̂_k e^{-r_k t}.
pub fn evolve_c(gamma: &SpectralField, p: &Params, t: f64, variant: Variant) -> Result<SpectralField> {
    let rates = envelope_rates(gamma, p, variant, Pumping::Exact)?;
    Ok(SpectralField::from_pairs(rates.into_iter().map(|(k, r)| (k, gamma.get(&k) * (-r * t).exp()))))
}

/// Trajectory at the requested times, composing per-interval propagators.
pub fn envelope_solve(
    gamma: &SpectralField,
    p: &Params,
    times: &[f64],
    variant: Variant,
    pumping: Pumping,
) -> Result<Vec<SpectralField>> {
    let rates = envelope_rates(gamma, p, variant, pumping)?;
    let mut state: Vec<C64> = rates.iter().map(|(k, _)| gamma.get(k)).collect();
    let mut t_prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - t_prev;
        for (c, (_, r)) in state.iter_mut().zip(&rates) {
            *c *= (-r * dt).exp();
        }
        t_prev = t;
        out.push(SpectralField::from_pairs(rates.iter().map(|(k, _)| *k).zip(state.iter().copied())));
    }
    Ok(out)
}

/// S[u] = Σ A_k ⟨N_k,u⟩ N_k.
pub fn ekman_operator(u: &SpectralField, p: &Params, pumping: Pumping) -> Result<SpectralField> {
    let mut out = SpectralField::new();
    for (k, c) in &u.coeffs {
        let a = match pumping {
            Pumping::Exact => ekman_coefficient(*k, p)?.a,
            Pumping::Limit if k.kh_is_zero() => C64::new(0.0, 0.0),
            Pumping::Limit => {
                let (r, i) = ekman_limit_coefficient(*k)?;
                C64::new(r, i)
            }
        };
        out.coeffs.insert(*k, a * c);
    }
    Ok(out)
}

pub fn sobolev_norm(gamma: &SpectralField, s: f64) -> f64 {
    gamma.coeffs.iter().map(|(k, c)| (1.0 + k.norm_pi().powi(2)).powf(s) * c.norm_sqr()).sum::<f64>().sqrt()
}

pub const TRACE_CONST_H: f64 = std::f64::consts::SQRT_2;
pub const TRACE_CONST_3: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceBounds {
    pub bound_h: f64,
    pub bound_3: f64,
    pub actual_h: f64,
    pub actual_3: f64,
}

impl TraceBounds {
    pub fn holds(&self) -> bool {
        self.actual_h <= self.bound_h * (1.0 + 1e-12) && self.actual_3 <= self.bound_3 * (1.0 + 1e-12)
    }
}

/// H^s norms on T² of the bottom traces generated by c(t), against
/// C‖γ‖_{H^{s+1}} and C‖γ‖_{H^{s+2}}.
pub fn trace_bounds(gamma: &SpectralField, c_t: &SpectralField, s: f64, p: &Params) -> Result<TraceBounds> {
    let mut h = 0.0;
    let mut v = 0.0;
    for (k, c) in &c_t.coeffs {
        if k.kh_is_zero() {
            let n = n_vector(*k)?;
            h += (n[0].norm_sqr() + n[1].norm_sqr()) * c.norm_sqr();
            continue;
        }
        let w = (1.0 + k.kh_norm().powi(2)).powf(s);
        let n = n_vector(*k)?;
        h += w * (n[0].norm_sqr() + n[1].norm_sqr()) * c.norm_sqr();
        v += w * (suction_factor(*k, p)? * c).norm_sqr();
    }
    Ok(TraceBounds {
        bound_h: TRACE_CONST_H * sobolev_norm(gamma, s + 1.0),
        bound_3: TRACE_CONST_3 * sobolev_norm(gamma, s + 2.0),
        actual_h: (HORIZONTAL_AREA * h).sqrt(),
        actual_3: (HORIZONTAL_AREA * v).sqrt(),
    })
}
