//! Rolling the plant with the solver's inputs and selected regimes
//! reproduces the planned state trajectory.

use gdp_core::milp::{solve, SolveOptions, SolveStatus};
use gdp_core::pwa::simulate_pwa_step;
use gdp_core::thermostat::{
    build_thermostat_mpc, thermostat_pwa_system, BuildingModel, RelayState, ThermostatParams,
    ThermostatVariant, OPERATING_MODES,
};

#[test]
fn optimal_plan_matches_plant_rollout() {
    let building = BuildingModel::reference();
    let params = ThermostatParams::default();
    let system = thermostat_pwa_system(&building, &params);
    for (x0, s0) in [
        ([21.0; 4], RelayState::Off),
        ([20.2, 20.5, 20.1, 20.3], RelayState::On),
        ([22.5, 22.0, 22.0, 22.4], RelayState::On),
    ] {
        for variant in [ThermostatVariant::GdpHull, ThermostatVariant::GdpBigM(1e4)] {
            let mpc = build_thermostat_mpc(&building, &x0, s0, 6, &params, variant).unwrap();
            let res = solve(mpc.problem(), &SolveOptions::default());
            assert_eq!(res.status, SolveStatus::Optimal);
            let plan = mpc.plan(res.incumbent.as_ref().unwrap());
            for t in 0..6 {
                let regime = usize::from(plan.modes[t] - 1);
                let u = [plan.heating[t], plan.setpoints[t]];
                let step = simulate_pwa_step(&system, &plan.states[t], &u, &[], regime).unwrap();
                for (k, (a, b)) in step.next_state.iter().zip(&plan.states[t + 1]).enumerate() {
                    assert!((a - b).abs() <= 1e-6, "{variant:?} t={t} k={k}: {a} vs {b}");
                }
                // the heating level is the one the mode prescribes
                let mode = OPERATING_MODES[regime];
                assert!((plan.heating[t] - mode.heating_now(params.u_max)).abs() <= 1e-6);
            }
            // consecutive modes chain through the relay state
            for t in 1..6 {
                let prev = OPERATING_MODES[usize::from(plan.modes[t - 1] - 1)];
                let cur = OPERATING_MODES[usize::from(plan.modes[t] - 1)];
                assert_eq!(prev.s_next, cur.s_now);
            }
            assert_eq!(OPERATING_MODES[usize::from(plan.modes[0] - 1)].s_now, s0);
        }
    }
}
