//! Bounded-variable revised simplex for the continuous relaxation of a
//! [`MilpProblem`].
//!
//! Every row receives a slack column (`[0, +inf)` for `<=` rows, `[0, 0]` for
//! equalities), so the slack basis is always available as a starting point.
//! Phase 1 minimizes the total bound violation of the basic variables; once
//! the basis is primal feasible the true objective takes over. Because phase 1
//! works from any basis, warm starts from a parent node's basis need no
//! special handling.

mod lu;

use crate::problem::{MilpProblem, RowRelation};
use lu::{BasisFactor, SparseLu};

/// Tuning knobs of the simplex method.
#[derive(Clone, Debug, PartialEq)]
pub struct LpOptions {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots after which Bland's rule takes over.
    pub bland_after: usize,
    /// Basis updates between refactorizations.
    pub refactor_interval: usize,
    /// Stop early with [`LpStatus::CutOff`] once a Lagrangian bound proves the
    /// optimum exceeds this value.
    pub objective_cutoff: Option<f64>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iterations: 50_000,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            pivot_tol: 1e-9,
            bland_after: 1_000,
            refactor_interval: 64,
            objective_cutoff: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic with no finite bound, held at zero.
    Free,
}

/// Status of every structural column followed by every row slack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The objective cutoff was proven unreachable before optimality.
    CutOff,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Structural values of the final basic solution. Meaningful as an optimum
    /// only when `status` is `Optimal`.
    pub point: Vec<f64>,
    /// Objective (including the constant) at `point`.
    pub objective: f64,
    pub iterations: usize,
    pub basis: Basis,
    /// Best Lagrangian lower bound seen during phase 2 (`-inf` if none).
    pub dual_bound: f64,
    /// Phase-1 objective at termination: total bound violation of the basic
    /// variables. Positive for an infeasible result.
    pub infeasibility: f64,
    /// Improving direction over structural columns when unbounded.
    pub ray: Option<Vec<f64>>,
}

/// Column-compressed copy of a problem prepared for repeated solves with
/// varying column bounds (as branch-and-bound requires).
#[derive(Clone, Debug)]
pub struct SimplexSolver {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    objective_constant: f64,
    rhs: Vec<f64>,
    slack_upper: Vec<f64>,
}

struct State<'a> {
    solver: &'a SimplexSolver,
    opts: &'a LpOptions,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basic: Vec<usize>,
    factor: BasisFactor,
}

enum Leave {
    Flip,
    Pivot { pos: usize, to_upper: bool },
}

impl SimplexSolver {
    pub fn new(problem: &MilpProblem) -> Self {
        let n = problem.num_cols();
        let m = problem.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in &problem.rows {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = counts;
        for (i, row) in problem.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = v;
                fill[j] += 1;
            }
        }
        SimplexSolver {
            n,
            m,
            col_start,
            col_row,
            col_val,
            cost: problem.objective.clone(),
            objective_constant: problem.objective_constant,
            rhs: problem.rows.iter().map(|r| r.rhs).collect(),
            slack_upper: problem
                .rows
                .iter()
                .map(|r| match r.relation {
                    RowRelation::Le => f64::INFINITY,
                    RowRelation::Eq => 0.0,
                })
                .collect(),
        }
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = if j < self.n {
            self.col_start[j]..self.col_start[j + 1]
        } else {
            0..0
        };
        let slack = j.checked_sub(self.n).map(|i| (i, 1.0));
        range
            .map(move |e| (self.col_row[e], self.col_val[e]))
            .chain(slack)
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|e| self.col_val[e] * y[self.col_row[e]])
                .sum()
        } else {
            y[j - self.n]
        }
    }

    /// Solves the LP with structural bounds `lower`/`upper` (replacing the
    /// problem's own), optionally starting from `warm`.
    pub fn solve(
        &self,
        lower: &[f64],
        upper: &[f64],
        warm: Option<&Basis>,
        opts: &LpOptions,
    ) -> LpResult {
        assert_eq!(lower.len(), self.n, "lower bound vector has wrong length");
        assert_eq!(upper.len(), self.n, "upper bound vector has wrong length");
        let total = self.n + self.m;
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        lo.extend(std::iter::repeat_n(0.0, self.m));
        hi.extend(self.slack_upper.iter().copied());

        if (0..self.n).any(|j| lo[j] > hi[j]) {
            let infeasibility = (0..self.n).map(|j| (lo[j] - hi[j]).max(0.0)).sum();
            let mut status = vec![VarStatus::AtLower; total];
            status[self.n..].iter_mut().for_each(|s| *s = VarStatus::Basic);
            return LpResult {
                status: LpStatus::Infeasible,
                point: lo[..self.n].to_vec(),
                objective: f64::NAN,
                iterations: 0,
                basis: Basis { status },
                dual_bound: f64::NEG_INFINITY,
                infeasibility,
                ray: None,
            };
        }

        let mut status = match warm {
            Some(b)
                if b.status.len() == total
                    && b.status.iter().filter(|&&s| s == VarStatus::Basic).count() == self.m =>
            {
                b.status.clone()
            }
            _ => {
                let mut s = vec![VarStatus::AtLower; total];
                s[self.n..].iter_mut().for_each(|v| *v = VarStatus::Basic);
                s
            }
        };
        for j in 0..total {
            status[j] = normalized(status[j], lo[j], hi[j]);
        }
        let basic: Vec<usize> = (0..total).filter(|&j| status[j] == VarStatus::Basic).collect();
        let factor = BasisFactor::new(
            SparseLu::factorize(0, &[]).expect("empty factorization cannot fail"),
        );
        let mut st = State {
            solver: self,
            opts,
            lo,
            hi,
            x: vec![0.0; total],
            status,
            basic,
            factor,
        };
        st.refactor();
        st.run()
    }
}

fn normalized(s: VarStatus, lo: f64, hi: f64) -> VarStatus {
    if s == VarStatus::Basic {
        return s;
    }
    let prefer_upper = s == VarStatus::AtUpper;
    if lo == hi {
        VarStatus::AtLower
    } else if prefer_upper && hi.is_finite() {
        VarStatus::AtUpper
    } else if lo.is_finite() {
        VarStatus::AtLower
    } else if hi.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::Free
    }
}

impl State<'_> {
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.hi[j],
            VarStatus::Free | VarStatus::Basic => 0.0,
        }
    }

    /// Rebuilds the factorization from scratch, swapping slacks in for any
    /// columns that make the basis singular, then recomputes basic values.
    fn refactor(&mut self) {
        let s = self.solver;
        let m = s.m;
        for _attempt in 0..4 {
            let cols: Vec<Vec<(usize, f64)>> =
                self.basic.iter().map(|&j| s.column(j).collect()).collect();
            match SparseLu::factorize(m, &cols) {
                Ok(lu) => {
                    self.factor = BasisFactor::new(lu);
                    self.recompute_basics();
                    return;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basic[pos];
                        self.status[out] =
                            normalized(VarStatus::AtLower, self.lo[out], self.hi[out]);
                        let slack = s.n + row;
                        self.status[slack] = VarStatus::Basic;
                        self.basic[pos] = slack;
                    }
                }
            }
        }
        // Last resort: the all-slack basis is the identity.
        for j in 0..s.n {
            self.status[j] = normalized(VarStatus::AtLower, self.lo[j], self.hi[j]);
        }
        for i in 0..m {
            self.status[s.n + i] = VarStatus::Basic;
        }
        self.basic = (s.n..s.n + m).collect();
        let cols: Vec<Vec<(usize, f64)>> = (0..m).map(|i| vec![(i, 1.0)]).collect();
        self.factor = BasisFactor::new(SparseLu::factorize(m, &cols).expect("identity basis"));
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let s = self.solver;
        let total = s.n + s.m;
        let mut rhs = s.rhs.clone();
        for j in 0..total {
            if self.status[j] != VarStatus::Basic {
                let v = self.nonbasic_value(j);
                self.x[j] = v;
                if v != 0.0 {
                    for (i, a) in s.column(j) {
                        rhs[i] -= a * v;
                    }
                }
            }
        }
        let mut xb = vec![0.0; s.m];
        self.factor.ftran(&mut rhs, &mut xb);
        for (p, &j) in self.basic.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    /// Phase-1 cost of a basic variable: the gradient of its bound violation.
    fn infeasibility_cost(&self, j: usize) -> f64 {
        let tol = self.opts.feasibility_tol;
        if self.x[j] < self.lo[j] - tol {
            -1.0
        } else if self.x[j] > self.hi[j] + tol {
            1.0
        } else {
            0.0
        }
    }

    fn total_infeasibility(&self) -> f64 {
        self.basic
            .iter()
            .map(|&j| (self.lo[j] - self.x[j]).max(0.0) + (self.x[j] - self.hi[j]).max(0.0))
            .sum()
    }

    fn objective(&self) -> f64 {
        let s = self.solver;
        s.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum::<f64>() + s.objective_constant
    }

    fn result(&self, status: LpStatus, iterations: usize, dual_bound: f64, ray: Option<Vec<f64>>) -> LpResult {
        LpResult {
            status,
            point: self.x[..self.solver.n].to_vec(),
            objective: self.objective(),
            iterations,
            basis: Basis {
                status: self.status.clone(),
            },
            dual_bound,
            infeasibility: self.total_infeasibility(),
            ray,
        }
    }

    fn run(&mut self) -> LpResult {
        let s = self.solver;
        let n = s.n;
        let m = s.m;
        let total = n + m;
        let opts = self.opts;
        let otol = opts.optimality_tol;

        let mut iterations = 0usize;
        let mut degenerate_run = 0usize;
        let mut fresh = true;
        let mut dual_bound = f64::NEG_INFINITY;
        let mut rejected = vec![false; total];
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        let mut alpha = vec![0.0; m];

        loop {
            // phase selection and basic costs
            let mut phase_one = false;
            for (p, &j) in self.basic.iter().enumerate() {
                let c = self.infeasibility_cost(j);
                cb[p] = c;
                phase_one |= c != 0.0;
            }
            if !phase_one {
                for (p, &j) in self.basic.iter().enumerate() {
                    cb[p] = if j < n { s.cost[j] } else { 0.0 };
                }
            }
            rhs.copy_from_slice(&cb);
            self.factor.btran(&mut rhs, &mut y);

            // pricing; in phase 2 also accumulate the Lagrangian bound
            let bland = degenerate_run >= opts.bland_after;
            let mut entering: Option<(usize, f64, f64)> = None;
            let mut lagrangian = if phase_one {
                f64::NEG_INFINITY
            } else {
                s.objective_constant + y.iter().zip(&s.rhs).map(|(a, b)| a * b).sum::<f64>()
            };
            for j in 0..total {
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                let c = if !phase_one && j < n { s.cost[j] } else { 0.0 };
                let d = c - s.dot_column(j, &y);
                if !phase_one && lagrangian > f64::NEG_INFINITY && d.abs() > otol {
                    let bound = if d > 0.0 { self.lo[j] } else { self.hi[j] };
                    if bound.is_finite() {
                        lagrangian += d * bound;
                    } else {
                        lagrangian = f64::NEG_INFINITY;
                    }
                }
                if rejected[j] || self.lo[j] == self.hi[j] {
                    continue;
                }
                let dir = match self.status[j] {
                    VarStatus::AtLower if d < -otol => 1.0,
                    VarStatus::AtUpper if d > otol => -1.0,
                    VarStatus::Free if d.abs() > otol => -d.signum(),
                    _ => continue,
                };
                let better = match entering {
                    None => true,
                    Some((_, _, best)) => !bland && d.abs() > best,
                };
                if better {
                    entering = Some((j, dir, d.abs()));
                }
            }
            if !phase_one && lagrangian > dual_bound {
                dual_bound = lagrangian;
                if let Some(cut) = opts.objective_cutoff {
                    if dual_bound > cut {
                        return self.result(LpStatus::CutOff, iterations, dual_bound, None);
                    }
                }
            }

            let Some((q, dir, _)) = entering else {
                if !fresh {
                    self.refactor();
                    fresh = true;
                    rejected.iter_mut().for_each(|r| *r = false);
                    continue;
                }
                let status = if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
                return self.result(status, iterations, dual_bound, None);
            };

            if iterations >= opts.max_iterations {
                return self.result(LpStatus::IterationLimit, iterations, dual_bound, None);
            }

            rhs.iter_mut().for_each(|v| *v = 0.0);
            for (i, a) in s.column(q) {
                rhs[i] = a;
            }
            self.factor.ftran(&mut rhs, &mut alpha);

            let (step, leave) = match self.ratio_test(q, dir, &alpha, bland) {
                Some(r) => r,
                None if !phase_one && fresh => {
                    let mut ray = vec![0.0; n];
                    if q < n {
                        ray[q] = dir;
                    }
                    for (p, &j) in self.basic.iter().enumerate() {
                        if j < n {
                            ray[j] = -dir * alpha[p];
                        }
                    }
                    return self.result(LpStatus::Unbounded, iterations, dual_bound, Some(ray));
                }
                None => {
                    // numerical trouble: retry from a fresh factorization
                    // without this column
                    if !fresh {
                        self.refactor();
                        fresh = true;
                    } else {
                        rejected[q] = true;
                    }
                    continue;
                }
            };

            iterations += 1;
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            rejected.iter_mut().for_each(|r| *r = false);

            self.x[q] += dir * step;
            for (p, &j) in self.basic.iter().enumerate() {
                self.x[j] -= dir * step * alpha[p];
            }
            match leave {
                Leave::Flip => {
                    self.status[q] = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.x[q] = self.nonbasic_value(q);
                }
                Leave::Pivot { pos, to_upper } => {
                    let out = self.basic[pos];
                    self.status[out] = normalized(
                        if to_upper {
                            VarStatus::AtUpper
                        } else {
                            VarStatus::AtLower
                        },
                        self.lo[out],
                        self.hi[out],
                    );
                    self.x[out] = self.nonbasic_value(out);
                    self.status[q] = VarStatus::Basic;
                    self.basic[pos] = q;
                    self.factor.update(pos, &alpha);
                    fresh = false;
                    let lu_nz = self.factor.lu_nonzeros();
                    if self.factor.num_updates() >= opts.refactor_interval
                        || self.factor.update_nonzeros() > 4 * lu_nz + 4 * m
                    {
                        self.refactor();
                        fresh = true;
                    }
                }
            }
        }
    }

    /// Harris two-pass ratio test (plain minimum ratio under Bland's rule).
    /// Returns `None` when the entering direction is unbounded.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<(f64, Leave)> {
        let tol = self.opts.feasibility_tol;
        let ptol = self.opts.pivot_tol;
        // (position, exact ratio, relaxed ratio, leaves at upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &j) in self.basic.iter().enumerate() {
            let a = alpha[p];
            if a.abs() <= ptol {
                continue;
            }
            let rate = -dir * a;
            let (xj, l, u) = (self.x[j], self.lo[j], self.hi[j]);
            let cand = if xj < l - tol {
                (rate > 0.0).then(|| ((l - xj) / rate, (l - xj + tol) / rate, false))
            } else if xj > u + tol {
                (rate < 0.0).then(|| ((xj - u) / -rate, (xj - u + tol) / -rate, true))
            } else if rate < 0.0 && l.is_finite() {
                Some(((xj - l) / -rate, (xj - l + tol) / -rate, false))
            } else if rate > 0.0 && u.is_finite() {
                Some(((u - xj) / rate, (u - xj + tol) / rate, true))
            } else {
                None
            };
            if let Some((exact, relaxed, up)) = cand {
                cands.push((p, exact.max(0.0), relaxed.max(0.0), up));
            }
        }
        let flip = self.hi[q] - self.lo[q];

        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(p, exact, _, up) in &cands {
                let better = match best {
                    None => true,
                    Some((bp, br, _)) => {
                        exact < br - 1e-12
                            || (exact <= br + 1e-12 && self.basic[p] < self.basic[bp])
                    }
                };
                if better {
                    best = Some((p, exact, up));
                }
            }
            return match best {
                Some((_, r, _)) if flip <= r => Some((flip, Leave::Flip)),
                Some((p, r, up)) => Some((r, Leave::Pivot { pos: p, to_upper: up })),
                None if flip.is_finite() => Some((flip, Leave::Flip)),
                None => None,
            };
        }

        let t_max = cands
            .iter()
            .map(|c| c.2)
            .fold(f64::INFINITY, f64::min);
        if flip <= t_max {
            return flip.is_finite().then_some((flip, Leave::Flip));
        }
        if !t_max.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for &(p, exact, _, up) in &cands {
            if exact <= t_max {
                let mag = alpha[p].abs();
                if best.is_none_or(|b| mag > b.3) {
                    best = Some((p, exact, up, mag));
                }
            }
        }
        let (p, r, up, _) = best.expect("the relaxed minimum has a candidate");
        Some((r, Leave::Pivot { pos: p, to_upper: up }))
    }
}

/// Solves the continuous relaxation of `problem` with its own bounds.
pub fn solve_lp(problem: &MilpProblem, warm: Option<&Basis>, opts: &LpOptions) -> LpResult {
    SimplexSolver::new(problem).solve(&problem.lower, &problem.upper, warm, opts)
}

/// Largest signed violation over all rows and column bounds of `problem` at
/// `point`; a value `<= 0` means feasible. Returns `-inf` for a problem with
/// no rows and no columns.
pub fn check_point(problem: &MilpProblem, point: &[f64]) -> f64 {
    assert_eq!(point.len(), problem.num_cols(), "point has wrong dimension");
    let mut worst = f64::NEG_INFINITY;
    for row in &problem.rows {
        let a = row.activity(point);
        let v = match row.relation {
            RowRelation::Le => a - row.rhs,
            RowRelation::Eq => (a - row.rhs).abs(),
        };
        worst = worst.max(v);
    }
    for (j, &x) in point.iter().enumerate() {
        worst = worst.max(problem.lower[j] - x).max(x - problem.upper[j]);
    }
    worst
}
