use ekman_core::boundary_layers::{build_b, is_unit_frequency, BoundaryTrace, Part, Side};
use ekman_core::field::{norm3_sqr, ModeField};
use ekman_core::{Params, C64};
use proptest::prelude::*;

fn c2() -> impl Strategy<Value = [C64; 2]> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c, d)| [C64::new(a, b), C64::new(c, d)])
}

fn kh() -> impl Strategy<Value = [i64; 2]> {
    (-3i64..=3, -3i64..=3).prop_filter("k_h != 0", |k| *k != (0, 0)).prop_map(|(a, b)| [a, b])
}

/// Non-unit frequencies, classical regime.
fn mu() -> impl Strategy<Value = f64> {
    (-3.0..3.0f64).prop_filter("non-unit", |m| (m.abs() - 1.0).abs() > 0.05)
}

fn params() -> impl Strategy<Value = Params> {
    (-5.0..-2.0f64, -5.0..-2.0f64).prop_map(|(a, b)| Params::new(10f64.powf(a), 10f64.powf(b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn traces_are_exact(d0 in c2(), d1 in c2(), mu in mu(), kh in kh(), p in params()) {
        let b = build_b(&BoundaryTrace::single(Side::Bottom, mu, kh, d0), &BoundaryTrace::empty(Side::Top), &p).unwrap();
        let v = b.view(Part::All).profile(kh, 0.0, 0.0);
        let b1 = build_b(&BoundaryTrace::empty(Side::Bottom), &BoundaryTrace::single(Side::Top, mu, kh, d1), &p).unwrap();
        let w = b1.view(Part::All).profile_dz(kh, 0.0, 1.0);
        for c in 0..2 {
            prop_assert!((v[c] - d0[c]).norm() < 1e-12);
            prop_assert!((w[c] - d1[c]).norm() < 1e-10 * (1.0 + d1[c].norm()));
        }
    }

    #[test]
    fn layer_is_linear(d in c2(), e in c2(), a in -2.0..2.0f64, mu in mu(), kh in kh(), p in params(), z in 0.0..1.0f64) {
        let one = C64::new(1.0, 0.0);
        let combo = [d[0] * a + e[0], d[1] * a + e[1]];
        let b = |x: [C64; 2]| build_b(&BoundaryTrace::single(Side::Bottom, mu, kh, x), &BoundaryTrace::empty(Side::Top), &p).unwrap();
        let (bd, be, bc) = (b(d), b(e), b(combo));
        let zz = z * 10.0 * p.sqrt_en();
        let (vd, ve, vc) = (bd.view(Part::All).profile(kh, 0.0, zz), be.view(Part::All).profile(kh, 0.0, zz), bc.view(Part::All).profile(kh, 0.0, zz));
        for c in 0..3 {
            let expect = vd[c] * a + ve[c] * one;
            prop_assert!((vc[c] - expect).norm() < 1e-10 * (1.0 + expect.norm()));
        }
    }

    #[test]
    fn profiles_solve_the_layer_equations(d in c2(), mu in mu(), kh in kh(), p in params(), z in 0.0..5.0f64) {
        prop_assume!(!is_unit_frequency(mu));
        let b = build_b(&BoundaryTrace::single(Side::Bottom, mu, kh, d), &BoundaryTrace::empty(Side::Top), &p).unwrap();
        for l in &b.classical {
            let zz = z * l.thickness();
            let r = l.momentum_residual(zz);
            let scale = norm3_sqr(&l.shape(zz)).sqrt() / p.epsilon + 1e-300;
            prop_assert!(norm3_sqr(&r).sqrt() / scale < 1e-8);
            let div = b.view(Part::All).divergence(kh, 0.0, zz);
            prop_assert!(div.norm() < 1e-10 * (1.0 + norm3_sqr(&l.shape_dz(zz)).sqrt()));
        }
    }
}
