use ekman_core::spectral::{basis_divergence, basis_profile, coriolis_apply, semigroup};
use ekman_core::{ModeIndex, SpectralField, C64};
use proptest::prelude::*;

fn mode(r: i64) -> impl Strategy<Value = ModeIndex> {
    (-r..=r, -r..=r, -r..=r).prop_filter("nonzero", |k| *k != (0, 0, 0)).prop_map(|(a, b, c)| ModeIndex::new(a, b, c))
}

fn field() -> impl Strategy<Value = SpectralField> {
    prop::collection::vec((mode(4), -1.0..1.0f64, -1.0..1.0f64), 1..12)
        .prop_map(|v| SpectralField::from_pairs(v.into_iter().map(|(k, a, b)| (k, C64::new(a, b)))))
}

proptest! {
    #[test]
    fn coriolis_is_skew_adjoint(u in field()) {
        let lu = coriolis_apply(&u);
        prop_assert!(lu.inner(&u).re.abs() < 1e-12 * (1.0 + u.norm().powi(2)));
    }

    #[test]
    fn semigroup_composes_and_is_unitary(u in field(), a in -50.0..50.0f64, b in -50.0..50.0f64) {
        let two = semigroup(a, &semigroup(b, &u));
        let one = semigroup(a + b, &u);
        let mut d = two.clone();
        d.axpy(C64::new(-1.0, 0.0), &one);
        prop_assert!(d.norm() < 1e-10 * (1.0 + u.norm()));
        prop_assert!((one.norm() - u.norm()).abs() < 1e-12 * (1.0 + u.norm()));
    }

    #[test]
    fn basis_has_zero_wall_flux(k in mode(8)) {
        prop_assert!(basis_profile(k, 0.0).unwrap()[2].norm() < 1e-14);
        prop_assert!(basis_profile(k, 1.0).unwrap()[2].norm() < 1e-13);
    }

    #[test]
    fn basis_is_divergence_free(k in mode(6), x in 0.0..std::f64::consts::TAU, y in 0.0..std::f64::consts::TAU, z in 0.0..1.0f64) {
        prop_assert!(basis_divergence(k, [x, y, z]).unwrap().norm() < 1e-10);
    }
}
