use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gdp_core::milp::export_mps;
use gdp_core::thermostat::{
    build_thermostat_mpc, RelayState, ThermostatParams, ThermostatVariant, DEFAULT_BIG_M,
};
use gdp_sim::config::KeyValues;
use gdp_sim::gapstudy::{threads_from_env, LONG_HORIZONS};
use gdp_sim::selftest::run_selftest;
use gdp_sim::trace::audit_csv;
use gdp_sim::{run_gap_study, simulate_dmpc, simulate_rtc, DmpcConfig, GapStudyConfig, Scenario};

#[derive(Parser, Debug)]
#[command(name = "gdp-sim", version, about = "Disjunctive MPC thermostat simulation and studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rtc,
    Dmpc,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    Hull,
    Bigm,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a closed-loop simulation and write its trace as CSV.
    Simulate {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Prediction periods of the MPC.
        #[arg(long = "N")]
        n: Option<usize>,
        /// Periods between MPC evaluations.
        #[arg(long = "M")]
        m: Option<usize>,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        #[arg(long)]
        periods: Option<usize>,
        /// Trace destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Realize the planned mode sequence between evaluations instead of
        /// holding the first setpoint.
        #[arg(long)]
        apply_sequence: bool,
    },
    /// Run the optimality-gap study and write a JSON report.
    Gapstudy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        instances: Option<usize>,
        /// Comma-separated horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long)]
        node_limit: Option<usize>,
        /// Node budget of the reference solves that prove the optimum.
        #[arg(long)]
        optimal_node_limit: Option<usize>,
        /// Also run the long horizons 120 and 200.
        #[arg(long)]
        long_horizons: bool,
    },
    /// Export a thermostat MPC model as fixed-format MPS.
    Export {
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check big-M, hull and brute force against each other.
    Selftest,
}

const SCENARIO_KEYS: [&str; 11] = [
    "t_set", "theta", "gamma", "u_max", "alpha", "beta", "s0", "x0", "big_m", "periods",
    "start_time",
];

fn load_config(path: Option<&Path>, extra: &[&str]) -> Result<KeyValues> {
    let Some(path) = path else {
        return Ok(KeyValues::default());
    };
    let kv = KeyValues::load(path)?;
    let allowed: Vec<&str> = SCENARIO_KEYS.iter().chain(extra).copied().collect();
    kv.check_keys(&allowed)?;
    Ok(kv)
}

fn parse_relay(s: &str) -> Result<RelayState> {
    match s.to_ascii_lowercase().as_str() {
        "off" | "0" => Ok(RelayState::Off),
        "on" | "1" => Ok(RelayState::On),
        other => bail!("relay state must be on or off, got `{other}`"),
    }
}

fn params_from(kv: &KeyValues) -> Result<ThermostatParams> {
    let mut p = ThermostatParams::default();
    for (key, slot) in [
        ("t_set", &mut p.t_set),
        ("theta", &mut p.theta),
        ("gamma", &mut p.gamma),
        ("u_max", &mut p.u_max),
        ("alpha", &mut p.alpha),
        ("beta", &mut p.beta),
    ] {
        if let Some(v) = kv.get::<f64>(key)? {
            *slot = v;
        }
    }
    if let Some(s) = kv.get::<String>("s0")? {
        p.s0 = parse_relay(&s)?;
    }
    Ok(p)
}

fn scenario_from(kv: &KeyValues, periods: Option<usize>) -> Result<Scenario> {
    let mut sc = Scenario {
        params: params_from(kv)?,
        ..Scenario::default()
    };
    if let Some(x0) = kv.get_list::<f64>("x0")? {
        sc.x0 = x0;
    }
    if let Some(label) = kv.get::<String>("start_time")? {
        sc.start_time = label;
    }
    if let Some(p) = periods.or(kv.get("periods")?) {
        sc.periods = p;
    }
    sc.validate()?;
    Ok(sc)
}

fn variant_from(flag: Option<Variant>, kv: &KeyValues) -> Result<ThermostatVariant> {
    let v = match flag {
        Some(v) => v,
        None => match kv.get::<String>("variant")?.as_deref() {
            None | Some("hull") => Variant::Hull,
            Some("bigm") => Variant::Bigm,
            Some(other) => bail!("variant must be hull or bigm, got `{other}`"),
        },
    };
    Ok(match v {
        Variant::Hull => ThermostatVariant::GdpHull,
        Variant::Bigm => ThermostatVariant::GdpBigM(kv.get("big_m")?.unwrap_or(DEFAULT_BIG_M)),
    })
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    mode: Option<Mode>,
    n: Option<usize>,
    m: Option<usize>,
    variant: Option<Variant>,
    periods: Option<usize>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
    apply_sequence: bool,
) -> Result<()> {
    let kv = load_config(
        config.as_deref(),
        &["mode", "n", "m", "variant", "out", "apply_sequence", "node_limit"],
    )?;
    let scenario = scenario_from(&kv, periods)?;
    let mode = match mode {
        Some(m) => m,
        None => match kv.get::<String>("mode")?.as_deref() {
            None | Some("rtc") => Mode::Rtc,
            Some("dmpc") => Mode::Dmpc,
            Some(other) => bail!("mode must be rtc or dmpc, got `{other}`"),
        },
    };
    let out = out.or(kv.get::<PathBuf>("out")?);
    let started = Instant::now();
    let trace = match mode {
        Mode::Rtc => simulate_rtc(&scenario)?,
        Mode::Dmpc => {
            let mut cfg = DmpcConfig::new(
                n.or(kv.get("n")?).unwrap_or(10),
                m.or(kv.get("m")?).unwrap_or(1),
                variant_from(variant, &kv)?,
            );
            cfg.apply_sequence = apply_sequence || kv.get("apply_sequence")?.unwrap_or(false);
            cfg.solve.node_limit = kv.get("node_limit")?;
            simulate_dmpc(&scenario, &cfg)?
        }
    };
    let csv = trace.to_csv();
    let audit = audit_csv(&csv, &scenario.audit_spec()).context("trace audit failed")?;
    write_output(out.as_deref(), &csv)?;
    eprintln!(
        "{:?}: {} periods from {}, energy {:.4} kWh, discomfort {:.4} °C·periods, {} relay switches, {} MPC solves, {:.2} s (audit passed)",
        mode,
        audit.periods,
        scenario.start_time,
        audit.energy_kwh,
        audit.total_slack,
        audit.switches,
        trace.solves.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gapstudy(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    instances: Option<usize>,
    horizons: Option<Vec<usize>>,
    node_limit: Option<usize>,
    optimal_node_limit: Option<usize>,
    long_horizons: bool,
) -> Result<()> {
    let kv = load_config(
        config.as_deref(),
        &[
            "seed",
            "out",
            "instances",
            "horizons",
            "node_limit",
            "optimal_node_limit",
            "long_horizons",
            "x0_low",
            "x0_high",
        ],
    )?;
    let defaults = GapStudyConfig::default();
    let mut cfg = GapStudyConfig {
        instance_count: instances.or(kv.get("instances")?).unwrap_or(defaults.instance_count),
        horizons: horizons
            .or(kv.get_list("horizons")?)
            .unwrap_or(defaults.horizons.clone()),
        node_limit: node_limit.or(kv.get("node_limit")?).unwrap_or(defaults.node_limit),
        optimal_node_limit: optimal_node_limit
            .or(kv.get("optimal_node_limit")?)
            .unwrap_or(defaults.optimal_node_limit),
        x0_range: (
            kv.get("x0_low")?.unwrap_or(defaults.x0_range.0),
            kv.get("x0_high")?.unwrap_or(defaults.x0_range.1),
        ),
        seed: seed.or(kv.get("seed")?).unwrap_or(defaults.seed),
        big_m: kv.get("big_m")?.unwrap_or(DEFAULT_BIG_M),
        params: params_from(&kv)?,
        ..defaults
    };
    if long_horizons || kv.get("long_horizons")?.unwrap_or(false) {
        for h in LONG_HORIZONS {
            if !cfg.horizons.contains(&h) {
                cfg.horizons.push(h);
            }
        }
    }
    let out = out.or(kv.get::<PathBuf>("out")?);
    let started = Instant::now();
    let report = run_gap_study(&cfg, threads_from_env())?;
    write_output(out.as_deref(), &report.to_json())?;
    for a in &report.aggregate {
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |g| format!("{g:.3}%"));
        eprintln!(
            "N={:<4} {:<5} included {:>3} (excluded {:>3}) incumbent {:>3}  mean gap {:>9}  max {:>9}  mean gap where both found one {:>9}",
            a.horizon,
            a.variant,
            a.included,
            a.excluded,
            a.with_incumbent,
            show(a.mean_gap),
            show(a.max_gap),
            show(a.mean_gap_both_incumbent)
        );
    }
    eprintln!("seed {}, {:.1} s", cfg.seed, started.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_export(
    variant: Option<Variant>,
    n: Option<usize>,
    out: PathBuf,
    config: Option<PathBuf>,
) -> Result<()> {
    let kv = load_config(config.as_deref(), &["variant", "n"])?;
    let scenario = scenario_from(&kv, None)?;
    let variant = variant_from(variant, &kv)?;
    let n = n.or(kv.get("n")?).unwrap_or(10);
    let mpc = build_thermostat_mpc(
        &scenario.building,
        &scenario.x0,
        scenario.params.s0,
        n,
        &scenario.params,
        variant,
    )?;
    export_mps(mpc.problem(), &out).with_context(|| format!("cannot export to {}", out.display()))?;
    eprintln!(
        "{} model, N = {n}: {} columns ({} integer), {} rows -> {}",
        variant.name(),
        mpc.problem().num_cols(),
        mpc.problem().num_integer(),
        mpc.problem().num_rows(),
        out.display()
    );
    Ok(())
}

fn cmd_selftest() -> Result<()> {
    let report = run_selftest(DEFAULT_BIG_M)?;
    println!(
        "oracle equivalence: {} ({} instances, {} failures)",
        if report.equivalence_ok() { "pass" } else { "FAIL" },
        report.instances,
        report.equivalence_failures.len()
    );
    println!(
        "hull tightness:     {} ({} weaker, strictly tighter on {}/{} random instances)",
        if report.tightness_ok() { "pass" } else { "FAIL" },
        report.tightness_failures.len(),
        report.strictly_tighter,
        report.random_instances
    );
    for f in report.equivalence_failures.iter().chain(&report.tightness_failures) {
        println!("  failed: {f}");
    }
    if !(report.equivalence_ok() && report.tightness_ok()) {
        bail!("selftest failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            mode,
            n,
            m,
            variant,
            periods,
            out,
            config,
            apply_sequence,
        } => cmd_simulate(mode, n, m, variant, periods, out, config, apply_sequence),
        Command::Gapstudy {
            config,
            seed,
            out,
            instances,
            horizons,
            node_limit,
            optimal_node_limit,
            long_horizons,
        } => cmd_gapstudy(
            config,
            seed,
            out,
            instances,
            horizons,
            node_limit,
            optimal_node_limit,
            long_horizons,
        ),
        Command::Export {
            variant,
            n,
            out,
            config,
        } => cmd_export(variant, n, out, config),
        Command::Selftest => cmd_selftest(),
    }
}
