//! Open-loop optimality-gap study: node-limited hull vs big-M solves of the
//! thermostat MPC from random initial states, measured against the proven
//! optimum of each instance.

use gdp_core::milp::{solve, SolveOptions, SolveResult, SolveStatus};
use gdp_core::thermostat::{
    build_thermostat_mpc, BuildingModel, RelayState, ThermostatParams, ThermostatVariant,
    DEFAULT_BIG_M,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::SimError;

/// Gap assigned to a node-limited solve that ends without an incumbent, and
/// the cap applied to every gap against the optimum.
pub const NO_INCUMBENT_GAP: f64 = 100.0;

const AGREEMENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GapStudyConfig {
    pub instance_count: usize,
    pub horizons: Vec<usize>,
    /// Node limit of the solves being evaluated.
    pub node_limit: usize,
    /// Node budget of the reference solves that establish `z*`.
    pub optimal_node_limit: usize,
    /// Each component of `x0` is drawn uniformly from this interval, °C.
    pub x0_range: (f64, f64),
    pub seed: u64,
    pub big_m: f64,
    pub params: ThermostatParams,
    pub building: BuildingModel,
}

impl Default for GapStudyConfig {
    fn default() -> Self {
        GapStudyConfig {
            instance_count: 50,
            horizons: vec![30, 60],
            node_limit: 30,
            optimal_node_limit: 400,
            x0_range: (19.0, 23.0),
            seed: 7,
            big_m: DEFAULT_BIG_M,
            params: ThermostatParams::default(),
            building: BuildingModel::reference(),
        }
    }
}

/// Horizons added by the long-horizon option.
pub const LONG_HORIZONS: [usize; 2] = [120, 200];

impl GapStudyConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Scenario(m.to_string()));
        if self.instance_count == 0 {
            return bad("instance_count must be at least 1");
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be a nonempty list of positive integers");
        }
        if self.node_limit == 0 || self.optimal_node_limit == 0 {
            return bad("node limits must be at least 1");
        }
        let (lo, hi) = self.x0_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("x0 range must be a finite interval with low < high");
        }
        self.params.validate()?;
        Ok(())
    }

    /// Initial states of all instances, in order.
    pub fn sample_initial_states(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.building.a.rows();
        let (lo, hi) = self.x0_range;
        (0..self.instance_count)
            .map(|_| (0..n).map(|_| rng.gen_range(lo..hi)).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub instance_count: usize,
    pub horizons: Vec<usize>,
    pub node_limit: usize,
    pub optimal_node_limit: usize,
    pub x0_low: f64,
    pub x0_high: f64,
    pub seed: u64,
    pub big_m: f64,
    pub t_set: f64,
    pub theta: f64,
    pub gamma: f64,
    pub u_max: f64,
    pub alpha: f64,
    pub beta: f64,
    pub s0: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveSummary {
    pub status: String,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub nodes: usize,
    /// Bound-based gap reported by the solver itself.
    pub solver_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantOutcome {
    #[serde(flatten)]
    pub solve: SolveSummary,
    /// `100 (z̃ - z*) / |z*|`, capped at [`NO_INCUMBENT_GAP`]; the cap
    /// itself when there is no incumbent; absent for excluded instances.
    pub gap_to_optimum: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceRow {
    pub instance: usize,
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub z_star: Option<f64>,
    /// Which reference solve proved `z*`.
    pub z_star_source: Option<String>,
    pub reference_hull: SolveSummary,
    pub reference_bigm: SolveSummary,
    pub excluded: bool,
    pub diagnostics: Vec<String>,
    pub hull: VariantOutcome,
    pub bigm: VariantOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub variant: String,
    pub horizon: usize,
    /// Instances with a proven optimum.
    pub included: usize,
    pub excluded: usize,
    pub with_incumbent: usize,
    /// Mean and max of `gap_to_optimum` over included instances.
    pub mean_gap: Option<f64>,
    pub max_gap: Option<f64>,
    /// Included instances where both variants found an incumbent.
    pub both_incumbent: usize,
    pub mean_gap_both_incumbent: Option<f64>,
    /// Mean solver gap over included instances with an incumbent.
    pub mean_solver_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapStudyReport {
    pub config: ConfigEcho,
    pub gap_convention: String,
    pub instances: Vec<InstanceRow>,
    pub aggregate: Vec<AggregateRow>,
}

impl GapStudyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn aggregate_for(&self, variant: &str, horizon: usize) -> Option<&AggregateRow> {
        self.aggregate
            .iter()
            .find(|a| a.variant == variant && a.horizon == horizon)
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn summarize(res: &SolveResult) -> SolveSummary {
    SolveSummary {
        status: format!("{:?}", res.status),
        objective: res.objective,
        best_bound: finite(res.best_bound),
        nodes: res.nodes_explored,
        solver_gap: res.gap_percent,
    }
}

/// Gap of incumbent objective `z` against the optimum `z_star`, capped.
pub fn gap_to_optimum(z: Option<f64>, z_star: f64) -> f64 {
    match z {
        None => NO_INCUMBENT_GAP,
        Some(z) => {
            let g = 100.0 * (z - z_star) / z_star.abs().max(1e-12);
            g.clamp(0.0, NO_INCUMBENT_GAP)
        }
    }
}

fn proven(res: &SolveResult) -> Option<f64> {
    (res.status == SolveStatus::Optimal).then_some(res.objective).flatten()
}

fn run_instance(
    cfg: &GapStudyConfig,
    instance: usize,
    x0: &[f64],
    horizon: usize,
) -> Result<InstanceRow, SimError> {
    let build = |variant| {
        build_thermostat_mpc(
            &cfg.building,
            x0,
            cfg.params.s0,
            horizon,
            &cfg.params,
            variant,
        )
    };
    let hull = build(ThermostatVariant::GdpHull)?;
    let bigm = build(ThermostatVariant::GdpBigM(cfg.big_m))?;
    let reference = SolveOptions::default().with_node_limit(cfg.optimal_node_limit);
    let limited = SolveOptions::default().with_node_limit(cfg.node_limit);

    let ref_hull = solve(hull.problem(), &reference);
    let ref_bigm = solve(bigm.problem(), &reference);
    let mut diagnostics = Vec::new();
    let (z_star, source) = match (proven(&ref_hull), proven(&ref_bigm)) {
        (Some(a), Some(b)) => {
            if (a - b).abs() > AGREEMENT_TOL * a.abs().max(1.0) {
                diagnostics.push(format!("reference optima disagree: hull {a}, big-M {b}"));
            }
            (Some(a), Some("hull"))
        }
        (Some(a), None) => (Some(a), Some("hull")),
        (None, Some(b)) => (Some(b), Some("bigm")),
        (None, None) => {
            diagnostics.push(format!(
                "no optimum proven within {} nodes (hull {:?}, big-M {:?}); excluded",
                cfg.optimal_node_limit, ref_hull.status, ref_bigm.status
            ));
            (None, None)
        }
    };

    let lim_hull = solve(hull.problem(), &limited);
    let lim_bigm = solve(bigm.problem(), &limited);
    let outcome = |res: &SolveResult, name: &str, diagnostics: &mut Vec<String>| {
        if let (Some(z), Some(zs)) = (res.objective, z_star) {
            if z < zs - AGREEMENT_TOL * zs.abs().max(1.0) {
                diagnostics.push(format!("{name} incumbent {z} is below the optimum {zs}"));
            }
        }
        VariantOutcome {
            solve: summarize(res),
            gap_to_optimum: z_star.map(|zs| gap_to_optimum(res.objective, zs)),
        }
    };
    let hull_outcome = outcome(&lim_hull, "hull", &mut diagnostics);
    let bigm_outcome = outcome(&lim_bigm, "big-M", &mut diagnostics);
    Ok(InstanceRow {
        instance,
        horizon,
        x0: x0.to_vec(),
        z_star,
        z_star_source: source.map(str::to_string),
        reference_hull: summarize(&ref_hull),
        reference_bigm: summarize(&ref_bigm),
        excluded: z_star.is_none(),
        diagnostics,
        hull: hull_outcome,
        bigm: bigm_outcome,
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn aggregate(rows: &[InstanceRow], horizons: &[usize]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for &h in horizons {
        let at_h: Vec<&InstanceRow> = rows.iter().filter(|r| r.horizon == h).collect();
        let included: Vec<&&InstanceRow> = at_h.iter().filter(|r| !r.excluded).collect();
        let both: Vec<&&InstanceRow> = included
            .iter()
            .copied()
            .filter(|r| r.hull.solve.objective.is_some() && r.bigm.solve.objective.is_some())
            .collect();
        for variant in ["hull", "bigm"] {
            let pick = |r: &InstanceRow| -> VariantOutcome {
                if variant == "hull" {
                    r.hull.clone()
                } else {
                    r.bigm.clone()
                }
            };
            let gaps: Vec<f64> = included
                .iter()
                .filter_map(|r| pick(r).gap_to_optimum)
                .collect();
            let with_inc: Vec<VariantOutcome> = included
                .iter()
                .map(|r| pick(r))
                .filter(|o| o.solve.objective.is_some())
                .collect();
            let both_gaps: Vec<f64> = both.iter().filter_map(|r| pick(r).gap_to_optimum).collect();
            let solver_gaps: Vec<f64> = with_inc.iter().filter_map(|o| o.solve.solver_gap).collect();
            out.push(AggregateRow {
                variant: variant.to_string(),
                horizon: h,
                included: included.len(),
                excluded: at_h.len() - included.len(),
                with_incumbent: with_inc.len(),
                mean_gap: mean(&gaps),
                max_gap: gaps.iter().copied().reduce(f64::max),
                both_incumbent: both.len(),
                mean_gap_both_incumbent: mean(&both_gaps),
                mean_solver_gap: mean(&solver_gaps),
            });
        }
    }
    out
}

/// Worker count from `SIM_THREADS` (unset, empty or 0 means rayon's default).
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs the study. Instances are processed in parallel (capped by
/// `threads`), but rows are reported in instance-then-horizon order, so the
/// report depends only on the configuration.
pub fn run_gap_study(
    cfg: &GapStudyConfig,
    threads: Option<usize>,
) -> Result<GapStudyReport, SimError> {
    cfg.validate()?;
    let states = cfg.sample_initial_states();
    let units: Vec<(usize, usize)> = (0..states.len())
        .flat_map(|i| cfg.horizons.iter().map(move |&h| (i, h)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| SimError::Scenario(format!("thread pool: {e}")))?;
    let rows: Vec<InstanceRow> = pool.install(|| {
        units
            .par_iter()
            .map(|&(i, h)| run_instance(cfg, i, &states[i], h))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let p = &cfg.params;
    Ok(GapStudyReport {
        config: ConfigEcho {
            instance_count: cfg.instance_count,
            horizons: cfg.horizons.clone(),
            node_limit: cfg.node_limit,
            optimal_node_limit: cfg.optimal_node_limit,
            x0_low: cfg.x0_range.0,
            x0_high: cfg.x0_range.1,
            seed: cfg.seed,
            big_m: cfg.big_m,
            t_set: p.t_set,
            theta: p.theta,
            gamma: p.gamma,
            u_max: p.u_max,
            alpha: p.alpha,
            beta: p.beta,
            s0: match p.s0 {
                RelayState::Off => "off".into(),
                RelayState::On => "on".into(),
            },
        },
        gap_convention: format!(
            "gap_to_optimum = 100 (z - z*) / max(|z*|, 1e-12), clamped to [0, {NO_INCUMBENT_GAP}]; \
             a node-limited solve without an incumbent counts as {NO_INCUMBENT_GAP}; \
             instances without a proven optimum are excluded from the means"
        ),
        aggregate: aggregate(&rows, &cfg.horizons),
        instances: rows,
    })
}
