//! Big-M, hull and brute-force enumeration agree; the hull relaxation is
//! never weaker than big-M.

use gdp_core::milp::relaxation_bound;
use gdp_core::reformulate::{to_bigm, to_hull, BigMStrategy};
use gdp_core::suite::{check_instance, check_models, random_instance, random_suite, SuiteLimits};
use gdp_core::thermostat::{
    build_thermostat_mpc, BuildingModel, RelayState, ThermostatParams, ThermostatVariant,
    DEFAULT_BIG_M,
};
use proptest::prelude::*;

#[test]
fn random_suite_is_equivalent_and_hull_is_tighter() {
    let models = random_suite(2024, 100, &SuiteLimits::default());
    let report = check_models(&models, DEFAULT_BIG_M).unwrap();
    assert!(report.equivalence_failures.is_empty(), "{report:?}");
    assert!(report.tightness_failures.is_empty(), "{report:?}");
    assert!(report.strict_fraction() >= 0.3, "{report:?}");
    // the suite should not be dominated by infeasible instances
    assert!(report.feasible >= 50, "{report:?}");
}

fn thermostat_model(x0: &[f64], s0: RelayState, n: usize) -> gdp_core::model::GdpModel {
    build_thermostat_mpc(
        &BuildingModel::reference(),
        x0,
        s0,
        n,
        &ThermostatParams::default(),
        ThermostatVariant::GdpHull,
    )
    .unwrap()
    .model
}

#[test]
fn thermostat_short_horizons_match_enumeration() {
    for t in [19.0, 19.9, 20.0, 21.0, 22.0, 23.5] {
        let x0 = [t, t + 0.3, t - 0.2, t];
        for s0 in [RelayState::Off, RelayState::On] {
            for n in 1..=3 {
                let c = check_instance(&thermostat_model(&x0, s0, n), DEFAULT_BIG_M).unwrap();
                assert!(c.equivalent(), "T={t} s0={s0} N={n}: {c:?}");
                assert!(c.brute.is_some(), "slack keeps the MPC feasible");
                assert!(c.hull_at_least_as_tight(), "T={t} s0={s0} N={n}: {c:?}");
            }
        }
    }
}

#[test]
fn thermostat_horizon_ten_hull_bound_dominates() {
    for t in [19.5, 20.5, 21.0, 22.5] {
        let model = thermostat_model(&[t; 4], RelayState::Off, 10);
        let hull = relaxation_bound(&to_hull(&model).unwrap().problem).unwrap();
        let bigm =
            relaxation_bound(&to_bigm(&model, BigMStrategy::Fixed(DEFAULT_BIG_M)).unwrap().problem)
                .unwrap();
        assert!(hull >= bigm - 1e-9, "T={t}: hull {hull} < big-M {bigm}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_seeded_instance_is_equivalent(seed in 0u64..1_000_000, index in 0u64..1000) {
        let model = random_instance(seed, index, &SuiteLimits::default());
        let c = check_instance(&model, DEFAULT_BIG_M).unwrap();
        prop_assert!(c.equivalent(), "{:?}", c);
        prop_assert!(c.hull_at_least_as_tight(), "{:?}", c);
    }
}
