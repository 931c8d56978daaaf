use crate::error::{Error, Result};
use crate::quad::integrate_complex;
use crate::spectral::{eigenvalue, ModeIndex, Params, SpectralField};
use crate::C64;
use serde::{Deserialize, Serialize};

/// s(t) = s0·e^{-ct} at frequency μ, forcing mode l.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SourceEntry {
    pub mu: f64,
    pub l: ModeIndex,
    pub s0: C64,
    pub c: C64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SourceTable {
    pub entries: Vec<SourceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Exponential special solution (keeps the e^{-ct} decay).
    #[default]
    Special,
    Zero,
}

/// |l_h|² + ν'l3².
pub fn mode_damping(l: ModeIndex, p: &Params) -> f64 {
    l.kh_norm().powi(2) + p.nu_prime() * (l.k3 as f64).powi(2)
}

/// The divisor i(λ_l+μ)/ε − c + |l_h|² + ν'l3², after resonance checks.
pub fn divisor(e: &SourceEntry, p: &Params) -> Result<C64> {
    let lam = eigenvalue(e.l)?;
    if (lam + e.mu).abs() < 1e-12 {
        return Err(Error::ResonantSource { mu: e.mu, l: e.l.to_string() });
    }
    let d = C64::new(mode_damping(e.l, p), (lam + e.mu) / p.epsilon) - e.c;
    if d.norm() < 1e-14 / p.epsilon {
        return Err(Error::ResonantSource { mu: e.mu, l: e.l.to_string() });
    }
    Ok(d)
}

/// Terms (l, coefficient, exponent, μ) with w_l(t) = Σ coefficient·e^{exponent·t};
/// μ is the fast frequency of the term in unfiltered variables.
pub fn corrector_terms(src: &SourceTable, k: usize, p: &Params, init: InitialCondition) -> Result<Vec<(ModeIndex, C64, C64, f64)>> {
    let mut out = Vec::new();
    for e in &src.entries {
        if e.l.norm() > k as f64 + 1e-12 {
            continue;
        }
        let d = divisor(e, p)?;
        let lam = eigenvalue(e.l)?;
        let coef = e.s0 / d;
        out.push((e.l, coef, C64::new(0.0, (lam + e.mu) / p.epsilon) - e.c, e.mu));
        if init == InitialCondition::Zero {
            out.push((e.l, -coef, C64::new(-mode_damping(e.l, p), 0.0), -lam));
        }
    }
    Ok(out)
}

/// Filtered coefficients w_l(t), |l| ≤ K.
pub fn small_divisor_corrector(src: &SourceTable, k: usize, p: &Params, t: f64, init: InitialCondition) -> Result<SpectralField> {
    let terms = corrector_terms(src, k, p, init)?;
    Ok(SpectralField::from_pairs(terms.into_iter().map(|(l, c, w, _)| (l, c * (w * t).exp()))))
}

/// Duhamel integral for one entry by composite Gauss-Legendre, from w(0) = w0.
pub fn duhamel_quadrature(e: &SourceEntry, p: &Params, t: f64, w0: C64) -> Result<C64> {
    let lam = eigenvalue(e.l)?;
    let d = mode_damping(e.l, p);
    let om = (lam + e.mu) / p.epsilon;
    let panels = ((om.abs() * t / 2.0).ceil() as usize).max(16);
    let integral = integrate_complex(0.0, t, panels, 20, |u| {
        (-d * (t - u)) .exp() * e.s0 * (C64::new(-e.c.re, om - e.c.im) * u).exp()
    });
    Ok(w0 * (-d * t).exp() + integral)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DivisorBound {
    pub inverse: f64,
    /// Case reference: 1, |l|/|l3| or |l|²/|l_h|².
    pub reference: f64,
    pub ratio: f64,
}

pub fn divisor_bounds(l: ModeIndex, mu: f64) -> Result<DivisorBound> {
    let lam = eigenvalue(l)?;
    if (lam + mu).abs() < 1e-14 {
        return Err(Error::ResonantSource { mu, l: l.to_string() });
    }
    let inverse = 1.0 / (lam + mu).abs();
    let reference = if mu == 0.0 {
        l.norm_pi() / (l.k3 as f64).abs().max(1e-300)
    } else if (mu.abs() - 1.0).abs() < 1e-14 {
        l.norm_pi().powi(2) / l.kh_norm().powi(2).max(1e-300)
    } else {
        1.0
    };
    Ok(DivisorBound { inverse, reference, ratio: inverse / reference })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    WindSmallNu,
    WindLargeNu,
    Dirichlet,
}

pub fn truncation_choice(p: &Params, regime: Regime, s0: f64) -> usize {
    let x = match regime {
        Regime::WindSmallNu => (p.epsilon * p.nu).powf(-1.0 / (2.0 * (s0 + 2.0))),
        Regime::WindLargeNu => (p.nu * p.epsilon.sqrt()).powf(-1.0 / (s0 + 3.0)),
        Regime::Dirichlet => p.epsilon.powf(-0.5),
    };
    ((x - 1e-9).ceil() as usize).max(1)
}

pub fn wind_regime(p: &Params) -> Regime {
    if p.nu <= p.epsilon {
        Regime::WindSmallNu
    } else {
        Regime::WindLargeNu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_choice(&Params::new(1e-4, 1e-4), Regime::Dirichlet, 2.0), 100);
        assert_eq!(truncation_choice(&Params::new(1e-4, 1e-4), Regime::WindSmallNu, 2.0), 10);
        for r in [Regime::WindSmallNu, Regime::WindLargeNu, Regime::Dirichlet] {
            let a = truncation_choice(&Params::new(1e-2, 1e-2), r, 2.0);
            let b = truncation_choice(&Params::new(1e-5, 1e-5), r, 2.0);
            assert!(b > a);
        }
    }

    #[test]
    fn divisor_examples() {
        let b = divisor_bounds(ModeIndex::new(1, 0, 1), 1.0).unwrap();
        let exact = 1.0 / (1.0 - std::f64::consts::PI / (1.0 + std::f64::consts::PI.powi(2)).sqrt());
        assert!((b.inverse - exact).abs() < 1e-12 && (b.inverse - 21.2).abs() < 0.05);
        assert!(divisor_bounds(ModeIndex::new(2, 1, 5), 2.0).unwrap().inverse <= 1.0);
        assert!(divisor_bounds(ModeIndex::new(0, 0, 1), 1.0).is_err());
    }

    #[test]
    fn rejects_resonant_source() {
        let src = SourceTable {
            entries: vec![SourceEntry { mu: 1.0, l: ModeIndex::new(0, 0, 1), s0: C64::new(1.0, 0.0), c: C64::new(0.0, 0.0) }],
        };
        assert!(small_divisor_corrector(&src, 5, &Params::new(1e-2, 1e-2), 0.1, InitialCondition::Special).is_err());
        assert_eq!(small_divisor_corrector(&SourceTable::default(), 5, &Params::new(1e-2, 1e-2), 0.1, InitialCondition::Special).unwrap().norm(), 0.0);
    }

    #[test]
    fn two_paths_agree() {
        let p = Params::new(1e-3, 1e-3);
        let e = SourceEntry { mu: 0.5, l: ModeIndex::new(1, 1, 2), s0: C64::new(0.3, -0.7), c: C64::new(0.4, 0.1) };
        let src = SourceTable { entries: vec![e] };
        let t = 0.05;
        let w0 = small_divisor_corrector(&src, 10, &p, 0.0, InitialCondition::Special).unwrap().get(&e.l);
        let closed = small_divisor_corrector(&src, 10, &p, t, InitialCondition::Special).unwrap().get(&e.l);
        let quad = duhamel_quadrature(&e, &p, t, w0).unwrap();
        assert!((closed - quad).norm() < 1e-12 * closed.norm());
        let zero = small_divisor_corrector(&src, 10, &p, t, InitialCondition::Zero).unwrap().get(&e.l);
        let quad0 = duhamel_quadrature(&e, &p, t, C64::new(0.0, 0.0)).unwrap();
        assert!((zero - quad0).norm() < 1e-12 * zero.norm());
    }
}
