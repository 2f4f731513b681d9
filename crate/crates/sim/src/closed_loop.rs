//! Relay-only (RTC) and receding-horizon (D-MPC) closed loops.
//!
//! In both loops the relay executes switching: period `t` heats at
//! `u_max` iff the relay is on, the plant advances through the regime of the
//! realized transition, and the next relay state is the hysteresis response
//! to `(T_t, r_t)`. The controllers only choose the setpoint.

use std::time::Instant;

use gdp_core::milp::{solve, SolveOptions, SolveStatus};
use gdp_core::pwa::{simulate_pwa_step, PwaSystem};
use gdp_core::thermostat::{
    build_thermostat_mpc, mode_of, relay_switch, setpoint_for_mode, thermostat_pwa_system,
    RelayState, ThermostatVariant,
};

use crate::scenario::Scenario;
use crate::trace::{comfort_violation, period_energy_kwh, ClosedLoopTrace, SolveRecord, TraceRow};
use crate::SimError;

/// Receding-horizon settings.
#[derive(Clone, Debug)]
pub struct DmpcConfig {
    /// Prediction periods `N`.
    pub horizon: usize,
    /// Periods between evaluations `M`.
    pub interval: usize,
    pub variant: ThermostatVariant,
    /// Between evaluations, realize the planned mode sequence instead of
    /// holding the first setpoint.
    pub apply_sequence: bool,
    pub solve: SolveOptions,
}

impl DmpcConfig {
    pub fn new(horizon: usize, interval: usize, variant: ThermostatVariant) -> Self {
        DmpcConfig {
            horizon,
            interval,
            variant,
            apply_sequence: false,
            solve: SolveOptions::default(),
        }
    }
}

/// Plant and relay bookkeeping shared by both loops.
struct Plant<'a> {
    scenario: &'a Scenario,
    system: PwaSystem,
    x: Vec<f64>,
    relay: RelayState,
    energy: f64,
    trace: ClosedLoopTrace,
}

impl<'a> Plant<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        Ok(Plant {
            scenario,
            system: thermostat_pwa_system(&scenario.building, &scenario.params),
            x: scenario.x0.clone(),
            relay: scenario.params.s0,
            energy: 0.0,
            trace: ClosedLoopTrace {
                rows: Vec::with_capacity(scenario.periods),
                solves: Vec::new(),
                sample_minutes: scenario.building.sample_minutes,
            },
        })
    }

    fn indoor(&self) -> f64 {
        self.scenario.building.indoor(&self.x)
    }

    /// Holds `setpoint` over period `t` and advances the plant.
    fn advance(&mut self, t: usize, setpoint: f64) -> Result<(), SimError> {
        let p = &self.scenario.params;
        let dt = self.scenario.building.sample_minutes;
        let indoor = self.indoor();
        let heating = if self.relay.is_on() { p.u_max } else { 0.0 };
        self.energy += period_energy_kwh(heating, dt);
        self.trace.rows.push(TraceRow {
            t,
            minutes: t as f64 * dt,
            indoor,
            setpoint,
            relay: self.relay,
            heating,
            slack: comfort_violation(indoor, p.t_set, p.theta),
            energy_kwh_cum: self.energy,
        });
        let next = relay_switch(self.relay, indoor, setpoint, p.gamma);
        let regime = usize::from(mode_of(self.relay, next) - 1);
        let step = simulate_pwa_step(&self.system, &self.x, &[heating, setpoint], &[], regime)?;
        self.x = step.next_state;
        self.relay = next;
        Ok(())
    }
}

/// Relay control around the fixed setpoint `r = t_set`.
pub fn simulate_rtc(scenario: &Scenario) -> Result<ClosedLoopTrace, SimError> {
    let mut plant = Plant::new(scenario)?;
    for t in 0..scenario.periods {
        plant.advance(t, scenario.params.t_set)?;
    }
    Ok(plant.trace)
}

/// Receding-horizon control: every `M` periods the thermostat MPC is solved
/// from the current state and relay state. By default the setpoint realizing
/// the first planned mode is applied and held until the next evaluation;
/// with `apply_sequence` the planned modes are realized one per period.
pub fn simulate_dmpc(scenario: &Scenario, cfg: &DmpcConfig) -> Result<ClosedLoopTrace, SimError> {
    if cfg.horizon == 0 || cfg.interval == 0 {
        return Err(SimError::Scenario("N and M must be at least 1".into()));
    }
    let mut plant = Plant::new(scenario)?;
    let params = &scenario.params;
    let mut modes: Vec<u8> = Vec::new();
    let mut solved_at = 0;
    let mut held = params.t_set;
    for t in 0..scenario.periods {
        if t % cfg.interval == 0 {
            let started = Instant::now();
            let mpc = build_thermostat_mpc(
                &scenario.building,
                &plant.x,
                plant.relay,
                cfg.horizon,
                params,
                cfg.variant,
            )?;
            let res = solve(mpc.problem(), &cfg.solve);
            let point = match (&res.status, &res.incumbent) {
                (SolveStatus::Optimal | SolveStatus::FeasibleLimit, Some(x)) => x,
                _ => {
                    return Err(SimError::Solve {
                        period: t,
                        status: format!("{:?}", res.status),
                    })
                }
            };
            modes = mpc.plan(point).modes;
            solved_at = t;
            held = setpoint_for_mode(modes[0], plant.indoor(), params);
            plant.trace.solves.push(SolveRecord {
                period: t,
                status: format!("{:?}", res.status),
                objective: res.objective,
                gap_percent: res.gap_percent,
                nodes: res.nodes_explored,
                first_mode: modes[0],
                wall_seconds: started.elapsed().as_secs_f64(),
            });
        }
        let setpoint = if cfg.apply_sequence {
            let k = (t - solved_at).min(modes.len() - 1);
            setpoint_for_mode(modes[k], plant.indoor(), params)
        } else {
            held
        };
        plant.advance(t, setpoint)?;
    }
    Ok(plant.trace)
}

