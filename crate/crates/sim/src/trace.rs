//! Closed-loop traces, their CSV form, and an auditor that re-derives the
//! energy and relay invariants from the raw columns.

use std::fmt::Write as _;

use gdp_core::thermostat::{relay_switch, RelayState};
use serde::Serialize;
use thiserror::Error;

/// CSV header of a trace.
pub const CSV_HEADER: &str = "t,minutes,T_indoor,r,s,u_watts,slack,energy_kwh_cum";

/// One sampling period: the state at its start and the action held over it.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub minutes: f64,
    /// Indoor temperature at the start of the period, °C.
    pub indoor: f64,
    /// Setpoint applied during the period, °C.
    pub setpoint: f64,
    pub relay: RelayState,
    /// Heating power during the period, W.
    pub heating: f64,
    /// Comfort-band violation of `indoor`, °C.
    pub slack: f64,
    /// Energy consumed up to the end of this period, kWh.
    pub energy_kwh_cum: f64,
}

/// Outcome of one MPC evaluation inside a closed loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveRecord {
    pub period: usize,
    pub status: String,
    pub objective: Option<f64>,
    pub gap_percent: Option<f64>,
    pub nodes: usize,
    pub first_mode: u8,
    /// Wall time in seconds; informative only, never part of the CSV.
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClosedLoopTrace {
    pub rows: Vec<TraceRow>,
    pub solves: Vec<SolveRecord>,
    /// Sampling period, minutes.
    pub sample_minutes: f64,
}

/// Energy of `watts` held for `sample_minutes`, kWh.
pub fn period_energy_kwh(watts: f64, sample_minutes: f64) -> f64 {
    watts * (sample_minutes / 60.0) / 1000.0
}

/// Violation of the comfort band `[t_set - θ, t_set + θ]`, °C.
pub fn comfort_violation(indoor: f64, t_set: f64, theta: f64) -> f64 {
    ((t_set - theta) - indoor).max(indoor - (t_set + theta)).max(0.0)
}

impl ClosedLoopTrace {
    pub fn energy_kwh(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.energy_kwh_cum)
    }

    pub fn total_slack(&self) -> f64 {
        self.rows.iter().map(|r| r.slack).sum()
    }

    pub fn switch_count(&self) -> usize {
        self.rows.windows(2).filter(|w| w[0].relay != w[1].relay).count()
    }

    /// CSV text with [`CSV_HEADER`]. Numbers use the shortest representation
    /// that parses back to the same `f64`, so the text is both stable and
    /// exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let s = if r.relay.is_on() { 1 } else { 0 };
            writeln!(
                out,
                "{},{:?},{:?},{:?},{},{:?},{:?},{:?}",
                r.t, r.minutes, r.indoor, r.setpoint, s, r.heating, r.slack, r.energy_kwh_cum
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("header is `{0}`, expected `{CSV_HEADER}`")]
    Header(String),
    #[error("period {t}: logged cumulative energy {logged} differs from recomputed {recomputed}")]
    Energy { t: usize, logged: f64, recomputed: f64 },
    #[error("period {t}: heating {watts} W is not u_max times the relay state")]
    Heating { t: usize, watts: f64 },
    #[error("period {t}: relay went {from} -> {to} but hysteresis gives {expected}")]
    Relay {
        t: usize,
        from: RelayState,
        to: RelayState,
        expected: RelayState,
    },
    #[error("period {t}: logged slack {logged} but the comfort violation is {recomputed}")]
    Slack { t: usize, logged: f64, recomputed: f64 },
    #[error("period index {found} where {expected} was expected")]
    Index { found: usize, expected: usize },
}

/// What the auditor needs beyond the CSV itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditSpec {
    pub gamma: f64,
    pub u_max: f64,
    pub t_set: f64,
    pub theta: f64,
    pub sample_minutes: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub periods: usize,
    pub energy_kwh: f64,
    pub total_slack: f64,
    pub switches: usize,
}

struct RawRow {
    t: usize,
    indoor: f64,
    setpoint: f64,
    on: bool,
    watts: f64,
    slack: f64,
    energy: f64,
}

fn parse_rows(csv: &str) -> Result<Vec<RawRow>, AuditError> {
    let mut lines = csv.lines();
    let header = lines.next().unwrap_or_default();
    if header != CSV_HEADER {
        return Err(AuditError::Header(header.to_string()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let err = |message: String| AuditError::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64, AuditError> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| err(format!("field {}: {e}", i + 1)))
        };
        let on = match fields[4] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("relay state `{other}` is not 0 or 1"))),
        };
        rows.push(RawRow {
            t: fields[0]
                .parse()
                .map_err(|e| err(format!("field 1: {e}")))?,
            indoor: num(2)?,
            setpoint: num(3)?,
            on,
            watts: num(5)?,
            slack: num(6)?,
            energy: num(7)?,
        });
    }
    Ok(rows)
}

fn state(on: bool) -> RelayState {
    if on {
        RelayState::On
    } else {
        RelayState::Off
    }
}

/// Re-derives, from the CSV columns alone, that heating equals `u_max` times
/// the relay state, that cumulative energy is the running sum of per-period
/// energy (bit-exact), that each relay transition follows the hysteresis
/// rule, and that the slack column is the comfort violation (within 1e-6).
pub fn audit_csv(csv: &str, spec: &AuditSpec) -> Result<AuditReport, AuditError> {
    let rows = parse_rows(csv)?;
    let mut energy = 0.0;
    let mut slack_sum = 0.0;
    let mut switches = 0;
    for (k, r) in rows.iter().enumerate() {
        if r.t != k {
            return Err(AuditError::Index {
                found: r.t,
                expected: k,
            });
        }
        let expected_watts = if r.on { spec.u_max } else { 0.0 };
        if r.watts != expected_watts {
            return Err(AuditError::Heating {
                t: r.t,
                watts: r.watts,
            });
        }
        energy += period_energy_kwh(r.watts, spec.sample_minutes);
        if r.energy != energy {
            return Err(AuditError::Energy {
                t: r.t,
                logged: r.energy,
                recomputed: energy,
            });
        }
        let violation = comfort_violation(r.indoor, spec.t_set, spec.theta);
        if (violation - r.slack).abs() > 1e-6 {
            return Err(AuditError::Slack {
                t: r.t,
                logged: r.slack,
                recomputed: violation,
            });
        }
        slack_sum += r.slack;
        if let Some(next) = rows.get(k + 1) {
            let expected = relay_switch(state(r.on), r.indoor, r.setpoint, spec.gamma);
            if state(next.on) != expected {
                return Err(AuditError::Relay {
                    t: r.t,
                    from: state(r.on),
                    to: state(next.on),
                    expected,
                });
            }
            if next.on != r.on {
                switches += 1;
            }
        }
    }
    Ok(AuditReport {
        periods: rows.len(),
        energy_kwh: energy,
        total_slack: slack_sum,
        switches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> AuditSpec {
        AuditSpec {
            gamma: 1.0,
            u_max: 4000.0,
            t_set: 21.0,
            theta: 1.0,
            sample_minutes: 0.25,
        }
    }

    fn row(t: usize, indoor: f64, on: bool, cum: f64) -> TraceRow {
        TraceRow {
            t,
            minutes: t as f64 * 0.25,
            indoor,
            setpoint: 21.0,
            relay: state(on),
            heating: if on { 4000.0 } else { 0.0 },
            slack: comfort_violation(indoor, 21.0, 1.0),
            energy_kwh_cum: cum,
        }
    }

    #[test]
    fn consistent_trace_passes() {
        let e = period_energy_kwh(4000.0, 0.25);
        let trace = ClosedLoopTrace {
            rows: vec![
                row(0, 20.5, false, 0.0),
                row(1, 19.9, false, 0.0),
                row(2, 19.8, true, e),
                row(3, 22.1, true, e + e),
                row(4, 21.9, false, e + e),
            ],
            solves: Vec::new(),
            sample_minutes: 0.25,
        };
        let report = audit_csv(&trace.to_csv(), &spec()).unwrap();
        assert_eq!(report.periods, 5);
        assert_eq!(report.switches, 2);
        assert_eq!(report.energy_kwh, trace.energy_kwh());
        assert!((report.total_slack - trace.total_slack()).abs() < 1e-12);
    }

    #[test]
    fn wrong_relay_step_is_caught() {
        let trace = ClosedLoopTrace {
            rows: vec![row(0, 20.5, false, 0.0), row(1, 20.4, true, 1.0 / 60.0)],
            solves: Vec::new(),
            sample_minutes: 0.25,
        };
        let err = audit_csv(&trace.to_csv(), &spec()).unwrap_err();
        assert!(matches!(err, AuditError::Relay { t: 0, .. }), "{err}");
    }

    #[test]
    fn energy_drift_is_caught() {
        let trace = ClosedLoopTrace {
            rows: vec![row(0, 19.0, true, 0.0166)],
            solves: Vec::new(),
            sample_minutes: 0.25,
        };
        assert!(matches!(
            audit_csv(&trace.to_csv(), &spec()),
            Err(AuditError::Energy { .. })
        ));
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(matches!(
            audit_csv("t,T\n0,1\n", &spec()),
            Err(AuditError::Header(_))
        ));
    }
}
