//! Oracle-equivalence and tightness suites, runnable from the command line.

use gdp_core::suite::{check_instance, check_models, random_suite, CheckError, SuiteLimits};
use gdp_core::thermostat::{
    build_thermostat_mpc, BuildingModel, RelayState, ThermostatParams, ThermostatVariant,
};

/// Seed of the random suite used by `selftest`.
pub const SUITE_SEED: u64 = 2024;
/// Instances in the random suite.
pub const SUITE_SIZE: usize = 100;
/// Required share of instances where the hull bound is strictly tighter.
pub const STRICT_SHARE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct SelftestReport {
    pub instances: usize,
    pub equivalence_failures: Vec<String>,
    pub tightness_failures: Vec<String>,
    pub strictly_tighter: usize,
    pub random_instances: usize,
}

impl SelftestReport {
    pub fn equivalence_ok(&self) -> bool {
        self.equivalence_failures.is_empty()
    }

    pub fn tightness_ok(&self) -> bool {
        self.tightness_failures.is_empty()
            && self.strictly_tighter as f64 >= STRICT_SHARE * self.random_instances as f64
    }
}

/// Thermostat cases checked next to the random suite: short horizons from a
/// few initial temperatures and both relay states.
pub fn thermostat_cases() -> Vec<(f64, RelayState, usize)> {
    let mut cases = Vec::new();
    for t in [19.5, 20.0, 21.0, 22.5] {
        for s0 in [RelayState::Off, RelayState::On] {
            for n in 1..=3 {
                cases.push((t, s0, n));
            }
        }
    }
    cases
}

/// Runs big-M, hull and brute force on the random suite and on short-horizon
/// thermostat models; strictness is counted over the random suite only.
pub fn run_selftest(big_m: f64) -> Result<SelftestReport, CheckError> {
    let models = random_suite(SUITE_SEED, SUITE_SIZE, &SuiteLimits::default());
    let suite = check_models(&models, big_m)?;
    let mut report = SelftestReport {
        instances: models.len(),
        equivalence_failures: suite
            .equivalence_failures
            .iter()
            .map(|i| format!("random instance {i}"))
            .collect(),
        tightness_failures: suite
            .tightness_failures
            .iter()
            .map(|i| format!("random instance {i}"))
            .collect(),
        strictly_tighter: suite.strictly_tighter,
        random_instances: models.len(),
    };
    let building = BuildingModel::reference();
    let params = ThermostatParams::default();
    for (t, s0, n) in thermostat_cases() {
        let mpc = build_thermostat_mpc(
            &building,
            &[t; 4],
            s0,
            n,
            &params,
            ThermostatVariant::GdpHull,
        )?;
        let c = check_instance(&mpc.model, big_m)?;
        report.instances += 1;
        let label = format!("thermostat T0={t} s0={s0} N={n}");
        if !c.equivalent() {
            report.equivalence_failures.push(label.clone());
        }
        if !c.hull_at_least_as_tight() {
            report.tightness_failures.push(label);
        }
    }
    Ok(report)
}
