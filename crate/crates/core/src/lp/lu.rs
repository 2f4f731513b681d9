//! Sparse LU factorization of basis matrices (Markowitz pivoting with a
//! threshold test) and product-form updates for basis changes.

/// Relative threshold a pivot must reach against the largest entry of its column.
const THRESHOLD: f64 = 0.01;
/// Entries below this magnitude are never accepted as pivots.
const ABS_PIVOT_TOL: f64 = 1e-11;
/// Columns and rows inspected per Markowitz search once a candidate exists.
const SEARCH_DEPTH: usize = 4;
const NONE: usize = usize::MAX;

/// `P B Q = L U` for an `m x m` basis whose columns are indexed by basis
/// position. Elimination step `k` pivots on row `piv_row[k]` and position
/// `piv_col[k]`.
#[derive(Clone, Debug)]
pub(crate) struct SparseLu {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    piv_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    work: Vec<f64>,
}

/// Positions and rows left without a pivot when the basis is singular.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Doubly linked lists of items grouped by their current nonzero count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    count: Vec<usize>,
    active: Vec<bool>,
}

impl Buckets {
    fn new(items: usize, max_count: usize) -> Self {
        Buckets {
            head: vec![NONE; max_count + 2],
            next: vec![NONE; items],
            prev: vec![NONE; items],
            count: vec![0; items],
            active: vec![false; items],
        }
    }

    fn insert(&mut self, i: usize, k: usize) {
        let k = k.min(self.head.len() - 1);
        self.count[i] = k;
        self.active[i] = true;
        self.prev[i] = NONE;
        self.next[i] = self.head[k];
        if self.head[k] != NONE {
            self.prev[self.head[k]] = i;
        }
        self.head[k] = i;
    }

    fn remove(&mut self, i: usize) {
        if !self.active[i] {
            return;
        }
        let (p, n) = (self.prev[i], self.next[i]);
        if p != NONE {
            self.next[p] = n;
        } else {
            self.head[self.count[i]] = n;
        }
        if n != NONE {
            self.prev[n] = p;
        }
        self.active[i] = false;
    }

    fn set(&mut self, i: usize, k: usize) {
        if self.active[i] && self.count[i] == k {
            return;
        }
        self.remove(i);
        self.insert(i, k);
    }
}

struct Active {
    rows: Vec<Vec<(usize, f64)>>,
    col_rows: Vec<Vec<usize>>,
    row_b: Buckets,
    col_b: Buckets,
    col_max: Vec<f64>,
    col_dirty: Vec<bool>,
}

impl Active {
    fn value(&self, r: usize, c: usize) -> f64 {
        self.rows[r]
            .iter()
            .find(|&&(j, _)| j == c)
            .map_or(0.0, |&(_, v)| v)
    }

    fn col_max(&mut self, c: usize) -> f64 {
        if self.col_dirty[c] {
            let mut mx = 0.0f64;
            for &r in &self.col_rows[c] {
                mx = mx.max(self.value(r, c).abs());
            }
            self.col_max[c] = mx;
            self.col_dirty[c] = false;
        }
        self.col_max[c]
    }

    /// Markowitz search over the sparsest columns and rows; returns the
    /// pivot `(row, column, value)`.
    fn choose_pivot(&mut self) -> Option<(usize, usize, f64)> {
        // (cost, magnitude, row, col)
        let mut best: Option<(usize, f64, usize, usize)> = None;
        let mut examined = 0usize;
        let offer = |best: &mut Option<(usize, f64, usize, usize)>, cost: usize, mag: f64, r: usize, c: usize| {
            let better = match *best {
                None => true,
                Some((bc, bm, _, _)) => cost < bc || (cost == bc && mag > bm),
            };
            if better {
                *best = Some((cost, mag, r, c));
            }
        };
        let max_k = self.col_b.head.len() - 1;
        for k in 1..=max_k {
            let mut c = self.col_b.head[k];
            while c != NONE {
                let next = self.col_b.next[c];
                let cmax = self.col_max(c);
                if cmax >= ABS_PIVOT_TOL {
                    for idx in 0..self.col_rows[c].len() {
                        let r = self.col_rows[c][idx];
                        let a = self.value(r, c).abs();
                        if a >= THRESHOLD * cmax && a >= ABS_PIVOT_TOL {
                            let cost = (self.rows[r].len() - 1) * (k - 1);
                            offer(&mut best, cost, a, r, c);
                        }
                    }
                    examined += 1;
                }
                if let Some((bc, ..)) = best {
                    if bc <= (k - 1) * (k - 1) || examined >= SEARCH_DEPTH {
                        return best.map(|(_, _, r, c)| (r, c, self.value(r, c)));
                    }
                }
                c = next;
            }
            let mut r = self.row_b.head[k];
            while r != NONE {
                let next = self.row_b.next[r];
                for idx in 0..self.rows[r].len() {
                    let (c, v) = self.rows[r][idx];
                    let a = v.abs();
                    if a >= ABS_PIVOT_TOL && a >= THRESHOLD * self.col_max(c) {
                        let cost = (k - 1) * (self.col_rows[c].len() - 1);
                        offer(&mut best, cost, a, r, c);
                    }
                }
                examined += 1;
                if let Some((bc, ..)) = best {
                    if bc <= k * (k - 1) || examined >= SEARCH_DEPTH {
                        return best.map(|(_, _, r, c)| (r, c, self.value(r, c)));
                    }
                }
                r = next;
            }
        }
        best.map(|(_, _, r, c)| (r, c, self.value(r, c)))
    }
}

impl SparseLu {
    /// Factorizes the basis whose position `p` holds the sparse column
    /// `cols[p]` (row index, value).
    pub fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<SparseLu, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut act = Active {
            rows: vec![Vec::new(); m],
            col_rows: vec![Vec::new(); m],
            row_b: Buckets::new(m, m),
            col_b: Buckets::new(m, m),
            col_max: vec![0.0; m],
            col_dirty: vec![true; m],
        };
        for (p, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    act.rows[r].push((p, v));
                    act.col_rows[p].push(r);
                }
            }
        }
        for i in 0..m {
            act.row_b.insert(i, act.rows[i].len());
            act.col_b.insert(i, act.col_rows[i].len());
        }

        let nnz: usize = cols.iter().map(Vec::len).sum();
        let mut lu = SparseLu {
            m,
            piv_row: Vec::with_capacity(m),
            piv_col: Vec::with_capacity(m),
            piv_val: Vec::with_capacity(m),
            l_start: Vec::with_capacity(m + 1),
            l_idx: Vec::with_capacity(nnz),
            l_val: Vec::with_capacity(nnz),
            u_start: Vec::with_capacity(m + 1),
            u_idx: Vec::with_capacity(nnz),
            u_val: Vec::with_capacity(nnz),
            work: vec![0.0; m],
        };
        lu.l_start.push(0);
        lu.u_start.push(0);
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut slot = vec![NONE; m];

        while lu.piv_row.len() < m {
            let Some((r, c, pv)) = act.choose_pivot() else { break };

            let urow = std::mem::take(&mut act.rows[r]);
            act.row_b.remove(r);
            for &(j, _) in &urow {
                let list = &mut act.col_rows[j];
                if let Some(pos) = list.iter().position(|&i| i == r) {
                    list.swap_remove(pos);
                }
                if j != c {
                    let k = act.col_rows[j].len();
                    act.col_b.set(j, k);
                    act.col_dirty[j] = true;
                }
            }

            let others = std::mem::take(&mut act.col_rows[c]);
            act.col_b.remove(c);
            for &i in &others {
                let at = act.rows[i]
                    .iter()
                    .position(|&(j, _)| j == c)
                    .expect("column pattern out of sync");
                let (_, aic) = act.rows[i].swap_remove(at);
                let l = aic / pv;
                lu.l_idx.push(i);
                lu.l_val.push(l);
                for (idx, &(j, _)) in act.rows[i].iter().enumerate() {
                    slot[j] = idx;
                }
                for &(j, uv) in &urow {
                    if j == c {
                        continue;
                    }
                    if slot[j] != NONE {
                        act.rows[i][slot[j]].1 -= l * uv;
                    } else {
                        act.rows[i].push((j, -l * uv));
                        act.col_rows[j].push(i);
                        let k = act.col_rows[j].len();
                        act.col_b.set(j, k);
                    }
                    act.col_dirty[j] = true;
                }
                for &(j, _) in &act.rows[i] {
                    slot[j] = NONE;
                }
                let k = act.rows[i].len();
                act.row_b.set(i, k);
            }
            lu.l_start.push(lu.l_idx.len());
            for &(j, v) in &urow {
                if j != c {
                    lu.u_idx.push(j);
                    lu.u_val.push(v);
                }
            }
            lu.u_start.push(lu.u_idx.len());
            lu.piv_row.push(r);
            lu.piv_col.push(c);
            lu.piv_val.push(pv);
            row_done[r] = true;
            col_done[c] = true;
        }

        if lu.piv_row.len() < m {
            return Err(Singular {
                positions: (0..m).filter(|&p| !col_done[p]).collect(),
                rows: (0..m).filter(|&r| !row_done[r]).collect(),
            });
        }
        Ok(lu)
    }

    /// Solves `B x = rhs`. `rhs` is indexed by row and is overwritten; the
    /// result, indexed by basis position, goes to `out`.
    pub fn solve(&self, rhs: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let v = rhs[self.piv_row[k]];
            if v != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[e]] -= self.l_val[e] * v;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut sum = rhs[self.piv_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                sum -= self.u_val[e] * out[self.u_idx[e]];
            }
            out[self.piv_col[k]] = sum / self.piv_val[k];
        }
    }

    /// Solves `B^T y = rhs`. `rhs` is indexed by basis position and is
    /// overwritten; the result, indexed by row, goes to `out`.
    pub fn solve_transposed(&mut self, rhs: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let z = rhs[self.piv_col[k]] / self.piv_val[k];
            self.work[self.piv_row[k]] = z;
            if z != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.u_idx[e]] -= self.u_val[e] * z;
                }
            }
        }
        out.copy_from_slice(&self.work);
        for k in (0..self.m).rev() {
            let r = self.piv_row[k];
            let mut y = out[r];
            for e in self.l_start[k]..self.l_start[k + 1] {
                y -= self.l_val[e] * out[self.l_idx[e]];
            }
            out[r] = y;
        }
    }

    pub fn nonzeros(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }
}

/// Elementary column transform recording one basis change.
#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Basis inverse as an LU factorization followed by a file of eta updates.
#[derive(Clone, Debug)]
pub(crate) struct BasisFactor {
    lu: SparseLu,
    etas: Vec<Eta>,
    eta_nonzeros: usize,
}

impl BasisFactor {
    pub fn new(lu: SparseLu) -> Self {
        BasisFactor {
            lu,
            etas: Vec::new(),
            eta_nonzeros: 0,
        }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn update_nonzeros(&self) -> usize {
        self.eta_nonzeros
    }

    pub fn lu_nonzeros(&self) -> usize {
        self.lu.nonzeros()
    }

    /// `out = B^{-1} rhs`; `rhs` (row space) is clobbered.
    pub fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        self.lu.solve(rhs, out);
        for eta in &self.etas {
            let xp = out[eta.pos] / eta.pivot;
            out[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    out[i] -= a * xp;
                }
            }
        }
    }

    /// `out = B^{-T} rhs`; `rhs` (position space) is clobbered.
    pub fn btran(&mut self, rhs: &mut [f64], out: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut v = rhs[eta.pos];
            for &(i, a) in &eta.entries {
                v -= a * rhs[i];
            }
            rhs[eta.pos] = v / eta.pivot;
        }
        self.lu.solve_transposed(rhs, out);
    }

    /// Records that position `pos` now holds the column whose FTRAN image is
    /// `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.eta_nonzeros += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(m: usize, cols: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (p, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out[r] += v * x[p];
            }
        }
        out
    }

    fn dense_mul_t(m: usize, cols: &[Vec<(usize, f64)>], y: &[f64]) -> Vec<f64> {
        (0..m)
            .map(|p| cols[p].iter().map(|&(r, v)| v * y[r]).sum())
            .collect()
    }

    fn diag_dominant(m: usize, extra: &[(usize, usize, f64)]) -> Vec<Vec<(usize, f64)>> {
        let mut cols: Vec<Vec<(usize, f64)>> = (0..m).map(|p| vec![((p + 3) % m, 10.0)]).collect();
        for &(r, p, v) in extra {
            let (r, p) = (r % m, p % m);
            if cols[p].iter().all(|&(i, _)| i != r) {
                cols[p].push((r, v));
            }
        }
        cols
    }

    #[test]
    fn identity_and_permutation() {
        let cols = vec![vec![(2, 1.0)], vec![(0, 2.0)], vec![(1, 4.0)]];
        let lu = SparseLu::factorize(3, &cols).unwrap();
        let mut rhs = vec![2.0, 4.0, 3.0];
        let mut x = vec![0.0; 3];
        lu.solve(&mut rhs, &mut x);
        assert_eq!(x, vec![3.0, 1.0, 1.0]);
    }

    #[test]
    fn singular_basis_reports_leftovers() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)], vec![(2, 1.0)]];
        let err = SparseLu::factorize(3, &cols).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let m = 5;
        let mut cols = diag_dominant(m, &[(0, 1, 3.0), (2, 4, -1.0), (3, 0, 2.5), (1, 2, 1.0)]);
        let mut f = BasisFactor::new(SparseLu::factorize(m, &cols).unwrap());
        let newcol = vec![(0, 1.0), (1, -2.0), (4, 5.0)];
        let mut rhs = vec![0.0; m];
        for &(r, v) in &newcol {
            rhs[r] = v;
        }
        let mut alpha = vec![0.0; m];
        f.ftran(&mut rhs, &mut alpha);
        f.update(2, &alpha);
        cols[2] = newcol;

        let b = vec![1.0, 2.0, -1.0, 0.5, 3.0];
        let mut r1 = b.clone();
        let mut x1 = vec![0.0; m];
        f.ftran(&mut r1, &mut x1);
        let back = dense_mul(m, &cols, &x1);
        for i in 0..m {
            assert!((back[i] - b[i]).abs() < 1e-10);
        }
        let mut r2 = b.clone();
        let mut y = vec![0.0; m];
        f.btran(&mut r2, &mut y);
        let back = dense_mul_t(m, &cols, &y);
        for i in 0..m {
            assert!((back[i] - b[i]).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn solves_random_sparse_systems(
            m in 1usize..30,
            extra in proptest::collection::vec((0usize..64, 0usize..64, -5.0f64..5.0), 0..80),
            b in proptest::collection::vec(-10.0f64..10.0, 30),
        ) {
            let cols = diag_dominant(m, &extra);
            let mut lu = SparseLu::factorize(m, &cols).unwrap();
            let mut rhs = b[..m].to_vec();
            let mut x = vec![0.0; m];
            lu.solve(&mut rhs, &mut x);
            let back = dense_mul(m, &cols, &x);
            for i in 0..m {
                prop_assert!((back[i] - b[i]).abs() < 1e-8 * (1.0 + b[i].abs()));
            }
            let mut rhs = b[..m].to_vec();
            let mut y = vec![0.0; m];
            lu.solve_transposed(&mut rhs, &mut y);
            let back = dense_mul_t(m, &cols, &y);
            for i in 0..m {
                prop_assert!((back[i] - b[i]).abs() < 1e-8 * (1.0 + b[i].abs()));
            }
        }
    }
}
