//! Disjunctive MPC for piecewise-affine (PWA) systems.
//!
//! A PWA system switches among affine regimes
//! `x+ = A_i x + B_i u + E_i d`, `y = C_i x + F_i w`. Over a horizon of `N`
//! periods the MPC model holds one disjunction per period whose disjuncts are
//! the regimes; mode indicator `δ_t^i` selects regime `i` at period `t`.
//! How consecutive modes may follow each other is supplied by a
//! [`SwitchingSpec`], which may add gated rows, global rows and CNF clauses.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{
    AffineExpr, CnfClause, Disjunct, Disjunction, GdpModel, IndicatorRef, LinConstraint, Literal,
    VarRef,
};

/// Small dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally long rows.
    ///
    /// # Panics
    /// If the rows have different lengths.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix rows");
        Mat {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= factor);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// One affine regime. `local_constraints` use a local variable space in
/// which `VarRef(k)` is state `k` for `k < n` and input `k - n` otherwise;
/// `stage_cost` uses output `k` for `k < outputs` and input `k - outputs`
/// otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct PwaRegime {
    pub name: String,
    pub a: Mat,
    pub b: Mat,
    pub e: Mat,
    pub c: Mat,
    pub f: Mat,
    pub local_constraints: Vec<LinConstraint>,
    pub stage_cost: AffineExpr,
}

/// Variables and indicators of periods `t` and `t + 1` handed to a
/// [`SwitchingSpec`].
pub struct SwitchingContext<'a> {
    period: usize,
    layout: &'a MpcLayout,
    locals: Vec<(usize, LinConstraint)>,
    globals: Vec<LinConstraint>,
    clauses: Vec<CnfClause>,
}

impl SwitchingContext<'_> {
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn num_regimes(&self) -> usize {
        self.layout.regimes
    }

    pub fn state(&self, k: usize) -> VarRef {
        self.layout.x[self.period][k]
    }

    pub fn input(&self, j: usize) -> VarRef {
        self.layout.u[self.period][j]
    }

    pub fn next_state(&self, k: usize) -> VarRef {
        self.layout.x[self.period + 1][k]
    }

    /// Inputs exist for `t = 0..=N`, so this is defined in the last period too.
    pub fn next_input(&self, j: usize) -> VarRef {
        self.layout.u[self.period + 1][j]
    }

    pub fn indicator(&self, regime: usize) -> IndicatorRef {
        IndicatorRef::new(self.layout.disjunction[self.period], regime)
    }

    /// Indicator of `regime` at `t + 1`; `None` in the last period.
    pub fn next_indicator(&self, regime: usize) -> Option<IndicatorRef> {
        self.layout
            .disjunction
            .get(self.period + 1)
            .map(|&d| IndicatorRef::new(d, regime))
    }

    /// Adds a row enforced only when `regime` is active at `t`.
    pub fn add_local(&mut self, regime: usize, c: LinConstraint) {
        self.locals.push((regime, c));
    }

    pub fn add_global(&mut self, c: LinConstraint) {
        self.globals.push(c);
    }

    pub fn add_clause(&mut self, c: CnfClause) {
        self.clauses.push(c);
    }
}

/// Rule linking the mode at `t + 1` to the mode, state and input at `t`.
pub trait SwitchingSpec: Send + Sync + fmt::Debug {
    fn emit(&self, ctx: &mut SwitchingContext<'_>);
}

/// No restriction: any regime may follow any other.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeSwitching;

impl SwitchingSpec for FreeSwitching {
    fn emit(&self, _ctx: &mut SwitchingContext<'_>) {}
}

/// Allowed-successor table: regime `i` at `t` may only be followed by the
/// regimes in `successors[i]`, as CNF clauses `¬δ_t^i ∨ ⋁ δ_{t+1}^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionClauses {
    pub successors: Vec<Vec<usize>>,
}

impl SwitchingSpec for TransitionClauses {
    fn emit(&self, ctx: &mut SwitchingContext<'_>) {
        if ctx.next_indicator(0).is_none() {
            return;
        }
        for (i, next) in self.successors.iter().enumerate() {
            let mut lits = vec![Literal::neg(ctx.indicator(i))];
            lits.extend(
                next.iter()
                    .filter_map(|&j| ctx.next_indicator(j).map(Literal::pos)),
            );
            ctx.add_clause(CnfClause::new(lits));
        }
    }
}

#[derive(Clone, Debug)]
pub struct PwaSystem {
    pub regimes: Vec<PwaRegime>,
    pub state_bounds: (Vec<f64>, Vec<f64>),
    pub input_bounds: (Vec<f64>, Vec<f64>),
    pub switching: Arc<dyn SwitchingSpec>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PwaError {
    #[error("system has no regimes")]
    NoRegimes,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bounds of {what} {index} are not finite and ordered: [{lower}, {upper}]")]
    Bounds {
        what: &'static str,
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("initial state component {index} = {value} lies outside [{lower}, {upper}]")]
    InitialState {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("regime {regime} out of range for {count} regimes")]
    Regime { regime: usize, count: usize },
    #[error("switching rule at period {period} references variables outside periods t and t+1")]
    SwitchingScope { period: usize },
}

/// Where the MPC builder put everything.
#[derive(Clone, Debug, PartialEq)]
pub struct MpcLayout {
    pub horizon: usize,
    pub regimes: usize,
    /// `x[t][k]` for `t = 0..=N`.
    pub x: Vec<Vec<VarRef>>,
    /// `u[t][j]` for `t = 0..=N`; `u[N]` carries no cost or dynamics and exists
    /// so that switching rules can reference the input after the horizon.
    pub u: Vec<Vec<VarRef>>,
    /// Stage-cost variables `γ_t`; empty when all regimes share one stage
    /// cost (it is then placed in the objective directly).
    pub gamma: Vec<VarRef>,
    /// Disjunction index of period `t`.
    pub disjunction: Vec<usize>,
    /// Whether the dynamics are common to all regimes (and hence global rows).
    pub shared_dynamics: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PwaStep {
    pub next_state: Vec<f64>,
    /// `C x` of the current state (noise taken as zero).
    pub output: Vec<f64>,
}

impl PwaSystem {
    pub fn num_states(&self) -> usize {
        self.regimes.first().map_or(0, |r| r.a.rows())
    }

    pub fn num_inputs(&self) -> usize {
        self.regimes.first().map_or(0, |r| r.b.cols())
    }

    pub fn num_disturbances(&self) -> usize {
        self.regimes.first().map_or(0, |r| r.e.cols())
    }

    pub fn num_outputs(&self) -> usize {
        self.regimes.first().map_or(0, |r| r.c.rows())
    }

    /// Checks matrix shapes and bounds.
    pub fn check(&self) -> Result<(), PwaError> {
        let first = self.regimes.first().ok_or(PwaError::NoRegimes)?;
        let (n, m, v, k, h) = (
            first.a.rows(),
            first.b.cols(),
            first.e.cols(),
            first.c.rows(),
            first.f.cols(),
        );
        for (i, r) in self.regimes.iter().enumerate() {
            let shapes = [
                ("A", r.a.rows(), r.a.cols(), n, n),
                ("B", r.b.rows(), r.b.cols(), n, m),
                ("E", r.e.rows(), r.e.cols(), n, v),
                ("C", r.c.rows(), r.c.cols(), k, n),
                ("F", r.f.rows(), r.f.cols(), k, h),
            ];
            for (name, rr, cc, er, ec) in shapes {
                if (rr, cc) != (er, ec) {
                    return Err(PwaError::Dimension(format!(
                        "regime {i}: {name} is {rr}x{cc}, expected {er}x{ec}"
                    )));
                }
            }
            for c in &r.local_constraints {
                if c.expr.max_var_index().is_some_and(|j| j >= n + m) {
                    return Err(PwaError::Dimension(format!(
                        "regime {i}: local constraint references local variable beyond {}",
                        n + m
                    )));
                }
            }
            if r.stage_cost.max_var_index().is_some_and(|j| j >= k + m) {
                return Err(PwaError::Dimension(format!(
                    "regime {i}: stage cost references local variable beyond {}",
                    k + m
                )));
            }
        }
        for (what, (lo, hi), len) in [
            ("state", &self.state_bounds, n),
            ("input", &self.input_bounds, m),
        ] {
            if lo.len() != len || hi.len() != len {
                return Err(PwaError::Dimension(format!("{what} bounds need {len} entries")));
            }
            for idx in 0..len {
                if !(lo[idx].is_finite() && hi[idx].is_finite() && lo[idx] <= hi[idx]) {
                    return Err(PwaError::Bounds {
                        what,
                        index: idx,
                        lower: lo[idx],
                        upper: hi[idx],
                    });
                }
            }
        }
        Ok(())
    }

    fn shared_dynamics(&self) -> bool {
        let f = &self.regimes[0];
        self.regimes
            .iter()
            .all(|r| r.a == f.a && r.b == f.b && r.e == f.e)
    }
}

/// Exact regime update `x+ = A_i x + B_i u + E_i d`.
pub fn simulate_pwa_step(
    system: &PwaSystem,
    x: &[f64],
    u: &[f64],
    d: &[f64],
    regime: usize,
) -> Result<PwaStep, PwaError> {
    let r = system.regimes.get(regime).ok_or(PwaError::Regime {
        regime,
        count: system.regimes.len(),
    })?;
    if x.len() != r.a.cols() || u.len() != r.b.cols() || (!d.is_empty() && d.len() != r.e.cols()) {
        return Err(PwaError::Dimension(format!(
            "step expects |x| = {}, |u| = {}, |d| = {} (or empty)",
            r.a.cols(),
            r.b.cols(),
            r.e.cols()
        )));
    }
    let ax = r.a.mul_vec(x);
    let bu = r.b.mul_vec(u);
    let ed = if d.is_empty() {
        vec![0.0; ax.len()]
    } else {
        r.e.mul_vec(d)
    };
    Ok(PwaStep {
        next_state: (0..ax.len()).map(|i| ax[i] + bu[i] + ed[i]).collect(),
        output: r.c.mul_vec(x),
    })
}

/// Maps a local-space expression onto the period's state/input variables.
fn map_state_input(expr: &AffineExpr, xs: &[VarRef], us: &[VarRef]) -> AffineExpr {
    let n = xs.len();
    AffineExpr::from_terms(
        expr.terms()
            .iter()
            .map(|&(v, c)| (if v.0 < n { xs[v.0] } else { us[v.0 - n] }, c)),
        expr.constant_term(),
    )
}

/// Maps a stage cost over (output, input) onto state/input variables by
/// substituting `y = C x`.
fn map_output_input(expr: &AffineExpr, c: &Mat, xs: &[VarRef], us: &[VarRef]) -> AffineExpr {
    let k = c.rows();
    let mut out = AffineExpr::constant(expr.constant_term());
    for &(v, coef) in expr.terms() {
        if v.0 < k {
            for (i, &a) in c.row(v.0).iter().enumerate() {
                if a != 0.0 {
                    out.add_term(xs[i], coef * a);
                }
            }
        } else {
            out.add_term(us[v.0 - k], coef);
        }
    }
    AffineExpr::from_terms(out.terms().iter().copied(), out.constant_term())
}

/// Dynamics rows `x_{t+1} - A x_t - B u_t = E d_t` for one regime.
fn dynamics_rows(r: &PwaRegime, x: &[VarRef], u: &[VarRef], xn: &[VarRef], d: &[f64]) -> Vec<LinConstraint> {
    let ed = if d.is_empty() {
        vec![0.0; r.a.rows()]
    } else {
        r.e.mul_vec(d)
    };
    (0..r.a.rows())
        .map(|i| {
            let mut e = AffineExpr::var(xn[i]);
            for (k, &a) in r.a.row(i).iter().enumerate() {
                e.add_term(x[k], -a);
            }
            for (j, &b) in r.b.row(i).iter().enumerate() {
                e.add_term(u[j], -b);
            }
            e.add_constant(-ed[i]);
            LinConstraint::eq(AffineExpr::from_terms(e.terms().iter().copied(), e.constant_term()))
        })
        .collect()
}

/// Builds the disjunctive MPC model over `horizon` periods from state `x0`.
/// `disturbances[t]` is `d_t` (missing entries mean zero). When `mode0` is
/// given, the regime at `t = 0` is fixed by a unit clause.
pub fn build_disjunctive_mpc(
    system: &PwaSystem,
    horizon: usize,
    x0: &[f64],
    mode0: Option<usize>,
    disturbances: &[Vec<f64>],
) -> Result<(GdpModel, MpcLayout), PwaError> {
    system.check()?;
    if horizon == 0 {
        return Err(PwaError::Horizon);
    }
    let n = system.num_states();
    let m = system.num_inputs();
    let s_count = system.regimes.len();
    if x0.len() != n {
        return Err(PwaError::Dimension(format!("x0 has {} entries, expected {n}", x0.len())));
    }
    if let Some(r) = mode0 {
        if r >= s_count {
            return Err(PwaError::Regime {
                regime: r,
                count: s_count,
            });
        }
    }
    for d in disturbances {
        if !d.is_empty() && d.len() != system.num_disturbances() {
            return Err(PwaError::Dimension("disturbance length".into()));
        }
    }
    let (xlo, xhi) = &system.state_bounds;
    let (ulo, uhi) = &system.input_bounds;
    for i in 0..n {
        if !(x0[i] >= xlo[i] && x0[i] <= xhi[i]) {
            return Err(PwaError::InitialState {
                index: i,
                value: x0[i],
                lower: xlo[i],
                upper: xhi[i],
            });
        }
    }

    let mut model = GdpModel::new();
    let x: Vec<Vec<VarRef>> = (0..=horizon)
        .map(|t| {
            (0..n)
                .map(|i| {
                    let (lo, hi) = if t == 0 { (x0[i], x0[i]) } else { (xlo[i], xhi[i]) };
                    model.add_var(format!("x{}_{t}", i + 1), lo, hi)
                })
                .collect()
        })
        .collect();
    let u: Vec<Vec<VarRef>> = (0..=horizon)
        .map(|t| {
            (0..m)
                .map(|j| model.add_var(format!("u{}_{t}", j + 1), ulo[j], uhi[j]))
                .collect()
        })
        .collect();

    let shared_dynamics = system.shared_dynamics();
    let first_cost = &system.regimes[0].stage_cost;
    let shared_cost = system
        .regimes
        .iter()
        .all(|r| r.stage_cost == *first_cost && r.c == system.regimes[0].c);
    let no_d: Vec<f64> = Vec::new();
    let dist = |t: usize| disturbances.get(t).unwrap_or(&no_d);

    let mut objective = AffineExpr::new();
    let mut gamma = Vec::new();
    if shared_dynamics {
        for t in 0..horizon {
            for row in dynamics_rows(&system.regimes[0], &x[t], &u[t], &x[t + 1], dist(t)) {
                model.add_constraint(row);
            }
        }
    }
    let lower = model.lower_bounds();
    let upper = model.upper_bounds();
    for t in 0..horizon {
        if shared_cost {
            let c = map_output_input(first_cost, &system.regimes[0].c, &x[t], &u[t]);
            for &(v, coef) in c.terms() {
                objective.add_term(v, coef);
            }
            objective.add_constant(c.constant_term());
        } else {
            let costs: Vec<AffineExpr> = system
                .regimes
                .iter()
                .map(|r| map_output_input(&r.stage_cost, &r.c, &x[t], &u[t]))
                .collect();
            let lo = costs
                .iter()
                .map(|c| c.inf_over_box(&lower, &upper))
                .fold(f64::INFINITY, f64::min);
            let hi = costs
                .iter()
                .map(|c| c.sup_over_box(&lower, &upper))
                .fold(f64::NEG_INFINITY, f64::max);
            let g = model.add_var(format!("gamma_{t}"), lo, hi);
            objective.add_term(g, 1.0);
            gamma.push(g);
        }
    }

    let mut disjunction = Vec::with_capacity(horizon);
    let mut disjuncts_per_t: Vec<Vec<Disjunct>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut ds = Vec::with_capacity(s_count);
        for (i, r) in system.regimes.iter().enumerate() {
            let mut dj = Disjunct::new(format!("{}_{t}", r.name));
            for c in &r.local_constraints {
                dj = dj.with_constraint(LinConstraint::new(
                    map_state_input(&c.expr, &x[t], &u[t]),
                    c.relation,
                ));
            }
            if !shared_dynamics {
                for row in dynamics_rows(r, &x[t], &u[t], &x[t + 1], dist(t)) {
                    dj = dj.with_constraint(row);
                }
            }
            if !shared_cost {
                let c = map_output_input(&r.stage_cost, &r.c, &x[t], &u[t]);
                dj = dj.with_constraint(LinConstraint::eq_between(&AffineExpr::var(gamma[t]), &c));
            }
            let _ = i;
            ds.push(dj);
        }
        disjuncts_per_t.push(ds);
        // disjunctions are numbered in period order
        disjunction.push(t);
    }

    let layout = MpcLayout {
        horizon,
        regimes: s_count,
        x,
        u,
        gamma,
        disjunction,
        shared_dynamics,
    };

    let mut clauses = Vec::new();
    for t in 0..horizon {
        let mut ctx = SwitchingContext {
            period: t,
            layout: &layout,
            locals: Vec::new(),
            globals: Vec::new(),
            clauses: Vec::new(),
        };
        system.switching.emit(&mut ctx);
        let allowed: HashSet<VarRef> = layout.x[t]
            .iter()
            .chain(&layout.x[t + 1])
            .chain(&layout.u[t])
            .chain(&layout.u[t + 1])
            .copied()
            .collect();
        let in_scope = |c: &LinConstraint| c.expr.terms().iter().all(|(v, _)| allowed.contains(v));
        let allowed_disj = [Some(t), (t + 1 < horizon).then_some(t + 1)];
        let clause_ok = |c: &CnfClause| {
            c.literals
                .iter()
                .all(|l| allowed_disj.contains(&Some(l.indicator.disjunction)))
        };
        if !ctx.locals.iter().all(|(r, c)| *r < s_count && in_scope(c))
            || !ctx.globals.iter().all(in_scope)
            || !ctx.clauses.iter().all(clause_ok)
        {
            return Err(PwaError::SwitchingScope { period: t });
        }
        for (r, c) in ctx.locals {
            let dj = &mut disjuncts_per_t[t][r];
            dj.constraints.push(c);
        }
        for c in ctx.globals {
            model.add_constraint(c);
        }
        clauses.extend(ctx.clauses);
    }
    for ds in disjuncts_per_t {
        model.add_disjunction(Disjunction::new(ds));
    }
    for c in clauses {
        model.add_clause(c);
    }
    if let Some(r) = mode0 {
        model.add_clause(CnfClause::unit(Literal::pos(IndicatorRef::new(0, r))));
    }
    model.set_objective(objective);
    Ok((model, layout))
}
