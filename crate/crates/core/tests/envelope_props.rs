use ekman_core::envelope::{ekman_coefficient, ekman_limit_averaged, envelope_solve, evolve_c, Pumping, Variant};
use ekman_core::spectral::eigenvalue;
use ekman_core::{ModeIndex, Params, SpectralField, C64};
use proptest::prelude::*;

fn mode_h(r: i64) -> impl Strategy<Value = ModeIndex> {
    (-r..=r, -r..=r, -r..=r).prop_filter("k_h != 0", |k| (k.0, k.1) != (0, 0)).prop_map(|(a, b, c)| ModeIndex::new(a, b, c))
}

fn gamma() -> impl Strategy<Value = SpectralField> {
    prop::collection::vec((mode_h(3), -1.0..1.0f64, -1.0..1.0f64), 1..8)
        .prop_map(|v| SpectralField::from_pairs(v.into_iter().map(|(k, a, b)| (k, C64::new(a, b)))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Positivity is asymptotic: at ε = 1e-2 near-resonant modes with |k| ~ 4 still pump negatively.
    #[test]
    fn pumping_is_dissipative(k in mode_h(4), le in -8.0..-3.0f64, lr in -1.0..1.0f64) {
        let (e, n) = (10f64.powf(le), 10f64.powf((le + lr).min(-3.0)));
        let a = ekman_coefficient(k, &Params::new(e, n)).unwrap().a;
        prop_assert!(a.re >= 0.5 * k.kh_norm() / k.norm_pi(), "{k}: {a}");
    }

    #[test]
    fn closed_form_matches_composed_propagators(g in gamma(), t in 0.0..3.0f64) {
        let p = Params::new(1e-3, 1e-3);
        let times: Vec<f64> = (1..=7).map(|i| t * i as f64 / 7.0).collect();
        let traj = envelope_solve(&g, &p, &times, Variant::NoVertical, Pumping::Exact).unwrap();
        let direct = evolve_c(&g, &p, t, Variant::NoVertical).unwrap();
        let last = traj.last().unwrap();
        for (k, c) in &direct.coeffs {
            prop_assert!((last.get(k) - c).norm() <= 1e-10 * c.norm().max(1e-300));
        }
        // energy never grows between output times
        let mut prev = g.norm();
        for f in &traj {
            prop_assert!(f.norm() <= prev * (1.0 + 1e-14));
            prev = f.norm();
        }
    }
}

#[test]
fn limit_real_part_positive_below_unit_frequency() {
    for k in ModeIndex::ball(50.0) {
        if eigenvalue(k).unwrap().abs() < 1.0 {
            assert!(ekman_limit_averaged(k).unwrap().0 > 0.0, "{k}");
        }
    }
}

#[test]
fn pumping_approaches_its_limit_monotonically() {
    let k = ModeIndex::new(1, 0, 1);
    let (r, i) = ekman_defaults(k);
    let mut prev = f64::INFINITY;
    for e in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
        let a = ekman_coefficient(k, &Params::new(e, e)).unwrap().a;
        let gap = (a - C64::new(r, i)).norm();
        assert!(gap < prev, "e={e}: {gap} >= {prev}");
        prev = gap;
    }
}

fn ekman_defaults(k: ModeIndex) -> (f64, f64) {
    ekman_core::envelope::ekman_limit_coefficient(k).unwrap()
}
