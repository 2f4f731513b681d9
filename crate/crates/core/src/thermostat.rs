//! Thermostat case study: a four-state building thermal model heated by a
//! relay with hysteresis, and the disjunctive MPC that chooses the relay
//! setpoint.
//!
//! The relay state `s_t` fixes the heating power (`u_max` when on, zero when
//! off) and switches according to the indoor temperature `T_t` and setpoint
//! `r_t`. The MPC reasons over four operating modes, each an ordered pair of
//! consecutive relay states with its temperature condition and heating levels.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{AffineExpr, CnfClause, GdpModel, IndicatorRef, LinConstraint, Literal, VarRef};
use crate::problem::MilpProblem;
use crate::pwa::{
    build_disjunctive_mpc, Mat, MpcLayout, PwaError, PwaRegime, PwaSystem, SwitchingContext,
    SwitchingSpec,
};
use crate::reformulate::{to_bigm, to_hull, BigMStrategy, ReformulateError, Reformulation};

/// Index of the indoor temperature in the state vector.
pub const INDOOR: usize = 3;
/// Big-M used for the big-M variants unless stated otherwise.
pub const DEFAULT_BIG_M: f64 = 1e4;
/// Temperature range applied to every state, °C.
pub const TEMPERATURE_BOUNDS: (f64, f64) = (0.0, 45.0);
/// Setpoints may deviate from the comfort setpoint by this much, °C.
pub const SETPOINT_SPAN: f64 = 5.0;
/// Upper bound on the comfort slack, °C.
pub const SLACK_MAX: f64 = 20.0;

/// Discrete-time building model, `x+ = A x + B u + E d`, `T = C x`, with
/// states (floor, internal facade, external facade, indoor air) in °C and
/// heating power in W.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildingModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub e: Mat,
    pub sample_minutes: f64,
}

impl BuildingModel {
    /// The identified single-zone model sampled every 15 seconds.
    pub fn reference() -> Self {
        BuildingModel {
            a: Mat::from_rows(&[
                &[99.97, 0.0, 0.0, 0.0],
                &[0.0, 99.98, 0.0, 0.0],
                &[0.0, 0.0, 99.92, 0.0],
                &[1.77, 4.28, 0.0, 93.48],
            ])
            .scaled(1e-2),
            b: Mat::from_rows(&[&[0.0001], &[0.0001], &[0.0], &[0.4421]]).scaled(1e-4),
            c: Mat::from_rows(&[&[0.0, 0.0, 0.0, 1.0]]),
            e: Mat::from_rows(&[
                &[0.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0],
                &[0.08, 0.0, 0.0],
                &[0.47, 0.0, 0.0],
            ])
            .scaled(1e-2),
            sample_minutes: 0.25,
        }
    }

    /// One step with heating power `u` W and no disturbance.
    pub fn step(&self, x: &[f64], u: f64) -> Vec<f64> {
        let ax = self.a.mul_vec(x);
        (0..ax.len()).map(|i| ax[i] + self.b.get(i, 0) * u).collect()
    }

    pub fn indoor(&self, x: &[f64]) -> f64 {
        self.c.mul_vec(x)[0]
    }

    /// Energy in kWh of `u` W held for one sampling period.
    pub fn energy_kwh(&self, u: f64) -> f64 {
        u * (self.sample_minutes / 60.0) / 1000.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelayState {
    Off,
    On,
}

impl RelayState {
    pub fn is_on(self) -> bool {
        self == RelayState::On
    }
}

impl fmt::Display for RelayState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelayState::On => "on",
            RelayState::Off => "off",
        })
    }
}

/// Relay with hysteresis: an active relay turns off once `T >= r + γ`; an
/// idle relay turns on once `T <= r - γ`.
// Written as "stays on unless the off condition holds", so an incomparable
// reading never turns an active relay off.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn relay_switch(s: RelayState, temperature: f64, setpoint: f64, gamma: f64) -> RelayState {
    let on = match s {
        RelayState::On => !(temperature >= setpoint + gamma),
        RelayState::Off => temperature <= setpoint - gamma,
    };
    if on {
        RelayState::On
    } else {
        RelayState::Off
    }
}

/// Which side of a switching threshold a mode requires; thresholds are
/// `r + γ` for modes leaving an active relay and `r - γ` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemperatureCondition {
    /// `T < r + γ` (enforced as `<=` in the optimization model).
    BelowUpper,
    /// `T >= r + γ`.
    AtOrAboveUpper,
    /// `T <= r - γ`.
    AtOrBelowLower,
    /// `T > r - γ` (enforced as `>=` in the optimization model).
    AboveLower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OperatingMode {
    pub id: u8,
    pub s_now: RelayState,
    pub s_next: RelayState,
    pub condition: TemperatureCondition,
}

impl OperatingMode {
    pub fn heating_now(&self, u_max: f64) -> f64 {
        if self.s_now.is_on() {
            u_max
        } else {
            0.0
        }
    }

    pub fn heating_next(&self, u_max: f64) -> f64 {
        if self.s_next.is_on() {
            u_max
        } else {
            0.0
        }
    }

    /// Local row `±(T - r) + c <= 0` of the mode's temperature condition,
    /// over local variables (state `k` = `VarRef(k)`, heating = `VarRef(4)`,
    /// setpoint = `VarRef(5)`).
    fn condition_row(&self, gamma: f64) -> LinConstraint {
        let diff = AffineExpr::var(VarRef(INDOOR)).with_term(VarRef(SETPOINT_LOCAL), -1.0);
        match self.condition {
            TemperatureCondition::BelowUpper => LinConstraint::le(diff.with_constant(-gamma)),
            TemperatureCondition::AtOrAboveUpper => LinConstraint::ge(diff.with_constant(-gamma)),
            TemperatureCondition::AtOrBelowLower => LinConstraint::le(diff.with_constant(gamma)),
            TemperatureCondition::AboveLower => LinConstraint::ge(diff.with_constant(gamma)),
        }
    }
}

const HEAT_LOCAL: usize = 4;
const SETPOINT_LOCAL: usize = 5;

/// The four operating modes, indexed by `id - 1`.
pub const OPERATING_MODES: [OperatingMode; 4] = [
    OperatingMode {
        id: 1,
        s_now: RelayState::On,
        s_next: RelayState::On,
        condition: TemperatureCondition::BelowUpper,
    },
    OperatingMode {
        id: 2,
        s_now: RelayState::On,
        s_next: RelayState::Off,
        condition: TemperatureCondition::AtOrAboveUpper,
    },
    OperatingMode {
        id: 3,
        s_now: RelayState::Off,
        s_next: RelayState::On,
        condition: TemperatureCondition::AtOrBelowLower,
    },
    OperatingMode {
        id: 4,
        s_now: RelayState::Off,
        s_next: RelayState::Off,
        condition: TemperatureCondition::AboveLower,
    },
];

/// Operating-mode id (1..=4) of a pair of consecutive relay states.
pub fn mode_of(s_now: RelayState, s_next: RelayState) -> u8 {
    match (s_now, s_next) {
        (RelayState::On, RelayState::On) => 1,
        (RelayState::On, RelayState::Off) => 2,
        (RelayState::Off, RelayState::On) => 3,
        (RelayState::Off, RelayState::Off) => 4,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermostatParams {
    /// Comfort setpoint, °C.
    pub t_set: f64,
    /// Comfort half-band, °C.
    pub theta: f64,
    /// Relay hysteresis half-band, °C.
    pub gamma: f64,
    /// Heating power when the relay is on, W.
    pub u_max: f64,
    /// Weight on heating power.
    pub alpha: f64,
    /// Weight on comfort violation.
    pub beta: f64,
    pub s0: RelayState,
}

impl Default for ThermostatParams {
    fn default() -> Self {
        ThermostatParams {
            t_set: 21.0,
            theta: 1.0,
            gamma: 1.0,
            u_max: 4000.0,
            alpha: 1.0,
            beta: 1e5,
            s0: RelayState::Off,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermostatError {
    #[error("invalid thermostat parameter: {0}")]
    Params(String),
    #[error("horizon must be at least 1")]
    Horizon,
    #[error(transparent)]
    Pwa(#[from] PwaError),
    #[error(transparent)]
    Reformulate(#[from] ReformulateError),
}

impl ThermostatParams {
    /// Checks sign conditions. `gamma` may be `+inf` (a relay that never
    /// switches) for simulation, but the MPC requires it finite.
    pub fn validate(&self) -> Result<(), ThermostatError> {
        let checks = [
            (self.t_set.is_finite(), "t_set must be finite"),
            (self.theta > 0.0 && self.theta.is_finite(), "theta must be positive"),
            (self.gamma > 0.0, "gamma must be positive"),
            (self.u_max > 0.0 && self.u_max.is_finite(), "u_max must be positive"),
            (self.alpha >= 0.0 && self.alpha.is_finite(), "alpha must be nonnegative"),
            (self.beta >= 0.0 && self.beta.is_finite(), "beta must be nonnegative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ThermostatError::Params((*msg).to_string())),
            None => Ok(()),
        }
    }

    pub fn setpoint_bounds(&self) -> (f64, f64) {
        (self.t_set - SETPOINT_SPAN, self.t_set + SETPOINT_SPAN)
    }
}

/// Switching rule of the thermostat: each mode also pins the heating power
/// of the following period, so consecutive modes must agree on the relay
/// state they share.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermostatSwitching {
    pub u_max: f64,
}

impl SwitchingSpec for ThermostatSwitching {
    fn emit(&self, ctx: &mut SwitchingContext<'_>) {
        for (i, mode) in OPERATING_MODES.iter().enumerate() {
            let row = AffineExpr::var(ctx.next_input(0)).with_constant(-mode.heating_next(self.u_max));
            ctx.add_local(i, LinConstraint::eq(row));
        }
    }
}

/// The building as a four-regime PWA system with inputs (heating, setpoint).
pub fn thermostat_pwa_system(building: &BuildingModel, params: &ThermostatParams) -> PwaSystem {
    let n = building.a.rows();
    let mut b_rows = Vec::with_capacity(n);
    for i in 0..n {
        b_rows.push([building.b.get(i, 0), 0.0]);
    }
    let b_refs: Vec<&[f64]> = b_rows.iter().map(|r| r.as_slice()).collect();
    let b = Mat::from_rows(&b_refs);
    let regimes = OPERATING_MODES
        .iter()
        .map(|mode| PwaRegime {
            name: format!("mode{}", mode.id),
            a: building.a.clone(),
            b: b.clone(),
            e: building.e.clone(),
            c: building.c.clone(),
            f: Mat::zeros(building.c.rows(), 0),
            local_constraints: vec![
                mode.condition_row(params.gamma),
                LinConstraint::eq(
                    AffineExpr::var(VarRef(HEAT_LOCAL)).with_constant(-mode.heating_now(params.u_max)),
                ),
            ],
            // stage cost over (output T, heating, setpoint)
            stage_cost: AffineExpr::new().with_term(VarRef(1), params.alpha),
        })
        .collect();
    let (rlo, rhi) = params.setpoint_bounds();
    let (tlo, thi) = TEMPERATURE_BOUNDS;
    PwaSystem {
        regimes,
        state_bounds: (vec![tlo; n], vec![thi; n]),
        input_bounds: (vec![0.0, rlo], vec![params.u_max, rhi]),
        switching: Arc::new(ThermostatSwitching {
            u_max: params.u_max,
        }),
    }
}

/// Which MILP the thermostat MPC is turned into.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThermostatVariant {
    /// Convex-hull reformulation of the disjunctive model.
    GdpHull,
    /// Big-M reformulation of the disjunctive model.
    GdpBigM(f64),
    /// Stand-in for a conventional mixed-logical MILP: the big-M model.
    MilpBaseline(f64),
}

impl ThermostatVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ThermostatVariant::GdpHull => "hull",
            ThermostatVariant::GdpBigM(_) => "bigm",
            ThermostatVariant::MilpBaseline(_) => "milp-baseline",
        }
    }
}

/// The thermostat MPC model and its reformulation.
#[derive(Clone, Debug)]
pub struct ThermostatMpc {
    pub model: GdpModel,
    pub layout: MpcLayout,
    /// Comfort slack `m_t` for `t = 1..=N` (index `t - 1`).
    pub slack: Vec<VarRef>,
    pub reformulation: Reformulation,
    pub variant: ThermostatVariant,
}

/// Decoded optimal plan.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermostatPlan {
    /// Mode id (1..=4) per period `t = 0..N-1`.
    pub modes: Vec<u8>,
    /// Indoor temperature `T_0..T_N`.
    pub temperatures: Vec<f64>,
    /// Full states `x_0..x_N`.
    pub states: Vec<Vec<f64>>,
    /// Setpoints `r_0..r_{N-1}` as returned by the solver.
    pub setpoints: Vec<f64>,
    /// Heating `u_0..u_N`.
    pub heating: Vec<f64>,
    /// Comfort slack `m_1..m_N`.
    pub slack: Vec<f64>,
}

impl ThermostatMpc {
    pub fn problem(&self) -> &MilpProblem {
        &self.reformulation.problem
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    /// Reads the plan out of a MILP point of [`Self::problem`].
    pub fn plan(&self, point: &[f64]) -> ThermostatPlan {
        let y = self.reformulation.original_point(point);
        let sel = self.reformulation.selection(point);
        let n = self.layout.horizon;
        ThermostatPlan {
            modes: sel.iter().map(|&i| OPERATING_MODES[i].id).collect(),
            temperatures: (0..=n).map(|t| y[self.layout.x[t][INDOOR].0]).collect(),
            states: (0..=n)
                .map(|t| self.layout.x[t].iter().map(|v| y[v.0]).collect())
                .collect(),
            setpoints: (0..n).map(|t| y[self.layout.u[t][1].0]).collect(),
            heating: (0..=n).map(|t| y[self.layout.u[t][0].0]).collect(),
            slack: self.slack.iter().map(|v| y[v.0]).collect(),
        }
    }
}

/// Builds the thermostat MPC from state `x0` and relay state `s0` over `n`
/// periods. Comfort rows `t_set - θ - m_t <= T_t <= t_set + θ + m_t` apply
/// for `t = 1..=N`; the objective is `α Σ_{t<N} u_t + β Σ_{t>=1} m_t`.
pub fn build_thermostat_mpc(
    building: &BuildingModel,
    x0: &[f64],
    s0: RelayState,
    n: usize,
    params: &ThermostatParams,
    variant: ThermostatVariant,
) -> Result<ThermostatMpc, ThermostatError> {
    params.validate()?;
    if !params.gamma.is_finite() {
        return Err(ThermostatError::Params("gamma must be finite for the MPC".into()));
    }
    if n == 0 {
        return Err(ThermostatError::Horizon);
    }
    let system = thermostat_pwa_system(building, params);
    let (mut model, layout) = build_disjunctive_mpc(&system, n, x0, None, &[])?;

    // the initial relay state admits the two modes that start from it
    let lits = OPERATING_MODES
        .iter()
        .enumerate()
        .filter(|(_, m)| m.s_now == s0)
        .map(|(i, _)| Literal::pos(IndicatorRef::new(layout.disjunction[0], i)))
        .collect();
    model.add_clause(CnfClause::new(lits));

    let mut objective = model.objective.clone();
    let mut slack = Vec::with_capacity(n);
    for t in 1..=n {
        let m = model.add_var(format!("m_{t}"), 0.0, SLACK_MAX);
        let temp = AffineExpr::var(layout.x[t][INDOOR]);
        // T_t + m_t >= t_set - θ
        model.add_constraint(LinConstraint::ge(
            temp.clone()
                .with_term(m, 1.0)
                .with_constant(-(params.t_set - params.theta)),
        ));
        // T_t - m_t <= t_set + θ
        model.add_constraint(LinConstraint::le(
            temp.with_term(m, -1.0)
                .with_constant(-(params.t_set + params.theta)),
        ));
        objective.add_term(m, params.beta);
        slack.push(m);
    }
    model.set_objective(objective);

    let reformulation = match variant {
        ThermostatVariant::GdpHull => to_hull(&model)?,
        ThermostatVariant::GdpBigM(m) | ThermostatVariant::MilpBaseline(m) => {
            to_bigm(&model, BigMStrategy::Fixed(m))?
        }
    };
    Ok(ThermostatMpc {
        model,
        layout,
        slack,
        reformulation,
        variant,
    })
}

/// Margin keeping the applied setpoint strictly inside a mode's interval so
/// the relay reproduces the planned transition despite strict comparisons.
pub const SETPOINT_MARGIN: f64 = 1e-7;

/// Setpoint that realizes `mode` at indoor temperature `temperature`, chosen
/// as close to `t_set` as the mode's condition allows and clipped to the
/// setpoint bounds.
pub fn setpoint_for_mode(mode: u8, temperature: f64, params: &ThermostatParams) -> f64 {
    let (g, w, eps) = (params.gamma, params.t_set, SETPOINT_MARGIN);
    let r = match mode {
        1 => w.max(temperature - g + eps),
        2 => w.min(temperature - g - eps),
        3 => w.max(temperature + g + eps),
        4 => w.min(temperature + g - eps),
        _ => panic!("operating mode ids are 1..=4, got {mode}"),
    };
    let (lo, hi) = params.setpoint_bounds();
    r.clamp(lo, hi)
}
