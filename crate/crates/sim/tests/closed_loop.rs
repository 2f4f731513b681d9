//! Closed-loop behavior: energy accounting, relay recursion, comfort
//! accounting and reproducibility.

use gdp_core::thermostat::{RelayState, ThermostatVariant};
use gdp_sim::trace::{audit_csv, comfort_violation, CSV_HEADER};
use gdp_sim::{simulate_dmpc, simulate_rtc, DmpcConfig, Scenario};

#[test]
fn relay_that_never_switches_uses_no_energy() {
    let mut sc = Scenario::default();
    sc.params.gamma = f64::INFINITY;
    let trace = simulate_rtc(&sc).unwrap();
    assert_eq!(trace.rows.len(), 480);
    assert!(trace.rows.iter().all(|r| r.heating == 0.0));
    assert_eq!(trace.energy_kwh(), 0.0);
    audit_csv(&trace.to_csv(), &sc.audit_spec()).unwrap();
}

#[test]
fn relay_forced_on_uses_full_power_energy() {
    let mut sc = Scenario::default();
    sc.params.gamma = f64::INFINITY;
    sc.params.s0 = RelayState::On;
    let trace = simulate_rtc(&sc).unwrap();
    assert!(trace.rows.iter().all(|r| r.heating == 4000.0));
    assert!((trace.energy_kwh() - 8.0).abs() < 1e-9, "{}", trace.energy_kwh());
    audit_csv(&trace.to_csv(), &sc.audit_spec()).unwrap();
}

#[test]
fn default_rtc_trace_passes_the_audit() {
    let sc = Scenario::default();
    let trace = simulate_rtc(&sc).unwrap();
    let csv = trace.to_csv();
    assert_eq!(csv.lines().count(), 481);
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    let audit = audit_csv(&csv, &sc.audit_spec()).unwrap();
    assert_eq!(audit.energy_kwh, trace.energy_kwh());
    // setpoint is held at the comfort target throughout
    assert!(trace.rows.iter().all(|r| r.setpoint == 21.0));
    // the first rows follow the hand-computed free response
    assert!((trace.rows[1].indoor - 20.9013).abs() < 1e-12);
    assert_eq!(csv, simulate_rtc(&sc).unwrap().to_csv());
}

#[test]
fn comfort_accounting_matches_the_temperature_column() {
    let sc = Scenario {
        periods: 60,
        x0: vec![19.0, 19.0, 19.0, 19.5],
        ..Scenario::default()
    };
    let trace = simulate_rtc(&sc).unwrap();
    let recomputed: f64 = trace
        .rows
        .iter()
        .map(|r| comfort_violation(r.indoor, 21.0, 1.0))
        .sum();
    assert!(recomputed > 0.0);
    assert!((recomputed - trace.total_slack()).abs() <= 1e-6);
}

fn short_scenario() -> Scenario {
    Scenario {
        periods: 40,
        ..Scenario::default()
    }
}

#[test]
fn dmpc_trace_is_consistent_and_reproducible() {
    let sc = short_scenario();
    for variant in [ThermostatVariant::GdpHull, ThermostatVariant::GdpBigM(1e4)] {
        let cfg = DmpcConfig::new(5, 1, variant);
        let a = simulate_dmpc(&sc, &cfg).unwrap();
        assert_eq!(a.rows.len(), 40);
        assert_eq!(a.solves.len(), 40);
        assert!(a.solves.iter().all(|s| s.status == "Optimal"));
        audit_csv(&a.to_csv(), &sc.audit_spec()).unwrap();
        let b = simulate_dmpc(&sc, &cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}

#[test]
fn hull_and_bigm_agree_on_the_first_evaluation() {
    // Both reformulations are exact, so the first MPC objective coincides;
    // later evaluations may diverge when ties pick different optimal modes.
    let sc = short_scenario();
    let hull = simulate_dmpc(&sc, &DmpcConfig::new(5, 1, ThermostatVariant::GdpHull)).unwrap();
    let bigm = simulate_dmpc(&sc, &DmpcConfig::new(5, 1, ThermostatVariant::GdpBigM(1e4))).unwrap();
    let (zh, zb) = (
        hull.solves[0].objective.unwrap(),
        bigm.solves[0].objective.unwrap(),
    );
    assert!((zh - zb).abs() <= 1e-6 * zh.abs().max(1.0), "{zh} vs {zb}");
}

#[test]
fn evaluations_follow_the_interval() {
    let sc = short_scenario();
    let cfg = DmpcConfig::new(5, 15, ThermostatVariant::GdpHull);
    let trace = simulate_dmpc(&sc, &cfg).unwrap();
    let periods: Vec<usize> = trace.solves.iter().map(|s| s.period).collect();
    assert_eq!(periods, vec![0, 15, 30]);
    // the setpoint is held between evaluations
    for w in trace.rows.windows(2) {
        if w[1].t % 15 != 0 {
            assert_eq!(w[0].setpoint, w[1].setpoint);
        }
    }
    audit_csv(&trace.to_csv(), &sc.audit_spec()).unwrap();
}

#[test]
fn apply_sequence_realizes_planned_modes() {
    let sc = short_scenario();
    let mut cfg = DmpcConfig::new(5, 5, ThermostatVariant::GdpHull);
    cfg.apply_sequence = true;
    let trace = simulate_dmpc(&sc, &cfg).unwrap();
    assert_eq!(trace.solves.len(), 8);
    audit_csv(&trace.to_csv(), &sc.audit_spec()).unwrap();
}

#[test]
fn single_evaluation_decays_toward_relay_behavior() {
    let sc = Scenario {
        periods: 120,
        ..Scenario::default()
    };
    let cfg = DmpcConfig::new(5, 1000, ThermostatVariant::GdpHull);
    let dmpc = simulate_dmpc(&sc, &cfg).unwrap();
    assert_eq!(dmpc.solves.len(), 1);
    let rtc = simulate_rtc(&sc).unwrap();
    // one held setpoint: the relay is the only thing switching afterwards
    let held = dmpc.rows[0].setpoint;
    assert!(dmpc.rows.iter().all(|r| r.setpoint == held));
    if held == sc.params.t_set {
        assert_eq!(dmpc.to_csv(), rtc.to_csv());
    }
}

#[test]
fn invalid_settings_are_errors() {
    let sc = Scenario {
        periods: 0,
        ..Scenario::default()
    };
    assert!(simulate_rtc(&sc).is_err());
    let sc = Scenario::default();
    assert!(simulate_dmpc(&sc, &DmpcConfig::new(0, 1, ThermostatVariant::GdpHull)).is_err());
    assert!(simulate_dmpc(&sc, &DmpcConfig::new(5, 0, ThermostatVariant::GdpHull)).is_err());
    let sc = Scenario {
        x0: vec![21.0; 3],
        ..Scenario::default()
    };
    assert!(simulate_rtc(&sc).is_err());
}
