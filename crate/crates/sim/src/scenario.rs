//! Closed-loop scenarios.

use gdp_core::thermostat::{BuildingModel, ThermostatParams};

use crate::trace::AuditSpec;
use crate::SimError;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub building: BuildingModel,
    pub params: ThermostatParams,
    /// Initial state, °C.
    pub x0: Vec<f64>,
    /// Number of simulated sampling periods.
    pub periods: usize,
    /// Wall-clock label of period 0; it has no effect on the dynamics.
    pub start_time: String,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            building: BuildingModel::reference(),
            params: ThermostatParams::default(),
            x0: vec![21.0; 4],
            periods: 480,
            start_time: "07:00".to_string(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.periods == 0 {
            return Err(SimError::Scenario("periods must be at least 1".into()));
        }
        if self.x0.len() != self.building.a.rows() {
            return Err(SimError::Scenario(format!(
                "x0 has {} components, the building has {} states",
                self.x0.len(),
                self.building.a.rows()
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Scenario("x0 must be finite".into()));
        }
        self.params.validate()?;
        Ok(())
    }

    pub fn audit_spec(&self) -> AuditSpec {
        AuditSpec {
            gamma: self.params.gamma,
            u_max: self.params.u_max,
            t_set: self.params.t_set,
            theta: self.params.theta,
            sample_minutes: self.building.sample_minutes,
        }
    }
}
