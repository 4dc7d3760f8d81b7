//! Dense bounded-variable primal simplex (two phases).
//!
//! Solves `min c·x` subject to rows `a·x (<=|=|>=) b` and `l <= x <= u`
//! with finite `l`. Artificial columns are never materialised: once an
//! artificial leaves the basis it cannot re-enter.

use super::Relation;

pub(crate) const EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-9;
const BLAND_AFTER: usize = 50;
const MAX_ITER_FACTOR: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

pub(crate) struct LpRow<'a> {
    pub coeffs: &'a [(usize, f64)],
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Var {
    /// Column index in the tableau (structural or slack).
    Column(usize),
    Artificial,
}

#[derive(Clone)]
pub(crate) struct Tableau {
    m: usize,
    n: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<Var>,
    /// For nonbasic columns: whether the variable sits at its upper bound.
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
    d: Vec<f64>,
    objective: f64,
    artificial_upper: f64,
}

impl Tableau {
    fn basis_order(&self, i: usize) -> usize {
        match self.basis[i] {
            Var::Column(c) => c,
            Var::Artificial => usize::MAX,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.n..(i + 1) * self.n]
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let piv = self.t[r * n + j];
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[j] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        };
        for row in before.chunks_mut(n) {
            eliminate(row);
        }
        for row in after.chunks_mut(n) {
            eliminate(row);
        }
        let f = self.d[j];
        if f != 0.0 {
            for (v, p) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            self.d[j] = 0.0;
        }
        if let Var::Column(old) = self.basis[r] {
            self.is_basic[old] = false;
        }
        self.basis[r] = Var::Column(j);
        self.is_basic[j] = true;
        self.at_upper[j] = false;
    }

    /// Runs simplex iterations on the current reduced-cost row.
    /// Returns `false` if unbounded.
    fn iterate(&mut self) -> bool {
        let max_iter = MAX_ITER_FACTOR * (self.m + self.n) + 1000;
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate > BLAND_AFTER;
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let dj = self.d[j];
                let gain = if self.at_upper[j] {
                    dj
                } else if self.upper[j] > EPS {
                    -dj
                } else {
                    // fixed at zero
                    continue;
                };
                if gain > EPS {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if gain > best {
                        best = gain;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else {
                return true;
            };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.m {
                let a = dir * self.t[i * self.n + j];
                if a.abs() <= PIVOT_EPS {
                    continue;
                }
                let (limit, to_upper) = if a > 0.0 {
                    (self.beta[i].max(0.0) / a, false)
                } else {
                    let ub = match self.basis[i] {
                        Var::Column(c) => self.upper[c],
                        Var::Artificial => self.artificial_upper,
                    };
                    if ub.is_infinite() {
                        continue;
                    }
                    ((ub - self.beta[i]).max(0.0) / -a, true)
                };
                let take = if limit < theta - EPS {
                    true
                } else if limit <= theta + EPS {
                    match leave {
                        // prefer a bound flip over a tied pivot
                        None => false,
                        Some((r, _)) if bland => self.basis_order(i) < self.basis_order(r),
                        Some(_) => a.abs() > leave_mag,
                    }
                } else {
                    false
                };
                if take {
                    theta = limit;
                    leave = Some((i, to_upper));
                    leave_mag = a.abs();
                }
            }
            if theta.is_infinite() {
                return false;
            }
            if theta <= EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..self.m {
                let a = self.t[i * self.n + j];
                if a != 0.0 {
                    self.beta[i] -= dir * theta * a;
                }
            }
            self.objective += self.d[j] * dir * theta;
            match leave {
                None => {
                    // bound flip
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let entering_value = if self.at_upper[j] {
                        self.upper[j] - theta
                    } else {
                        theta
                    };
                    let leaving = self.basis[r];
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                    if let Var::Column(c) = leaving {
                        self.at_upper[c] = to_upper;
                    }
                }
            }
        }
        // iteration limit: treat the current point as final
        true
    }

    fn value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn basic_upper(&self, i: usize) -> f64 {
        match self.basis[i] {
            Var::Column(c) => self.upper[c],
            Var::Artificial => self.artificial_upper,
        }
    }

    /// Dual simplex from a dual-feasible basis. `Some(true)` once primal
    /// feasible, `Some(false)` if infeasible, `None` on the iteration limit.
    fn dual_iterate(&mut self) -> Option<bool> {
        let max_iter = MAX_ITER_FACTOR * (self.m + self.n) + 1000;
        for _ in 0..max_iter {
            let mut leave = None;
            let mut worst = 1e-7;
            for i in 0..self.m {
                let b = self.beta[i];
                let viol = if b < 0.0 { -b } else { b - self.basic_upper(i) };
                if viol > worst {
                    worst = viol;
                    leave = Some(i);
                }
            }
            let Some(r) = leave else {
                return Some(true);
            };
            let to_upper = self.beta[r] > 0.0;
            let target = if to_upper { self.basic_upper(r) } else { 0.0 };
            let mut enter = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_mag = 0.0;
            for j in 0..self.n {
                if self.is_basic[j] || self.upper[j] <= EPS {
                    continue;
                }
                let a = self.t[r * self.n + j];
                if a.abs() <= PIVOT_EPS {
                    continue;
                }
                // x_Br moves by -a per unit of x_j; x_j rises from lower, falls from upper
                let rises = !self.at_upper[j];
                if (a > 0.0) != (rises == to_upper) {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                if ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && a.abs() > best_mag) {
                    best_ratio = ratio;
                    best_mag = a.abs();
                    enter = Some(j);
                }
            }
            let Some(j) = enter else {
                return Some(false);
            };
            let delta = (self.beta[r] - target) / self.t[r * self.n + j];
            for i in 0..self.m {
                let a = self.t[i * self.n + j];
                if a != 0.0 {
                    self.beta[i] -= a * delta;
                }
            }
            let entering_value = self.value(j) + delta;
            let leaving = self.basis[r];
            self.pivot(r, j);
            self.beta[r] = entering_value;
            if let Var::Column(c) = leaving {
                self.at_upper[c] = to_upper;
            }
        }
        None
    }
}

/// An optimal tableau kept for re-solving after bound changes.
#[derive(Clone)]
pub(crate) struct LpState {
    tab: Tableau,
    lower: Vec<f64>,
}

impl LpState {
    pub(crate) fn size(&self) -> usize {
        self.tab.t.len()
    }

    /// Re-optimises with structural column `j` restricted to `[lo, hi]`,
    /// which must lie within its current bounds. `None` when the column is
    /// nonbasic or the dual simplex stalls; the caller then solves cold.
    pub(crate) fn rebound(&self, cost: &[f64], j: usize, lo: f64, hi: f64) -> Option<(LpOutcome, Option<LpState>)> {
        let r = (0..self.tab.m).find(|i| self.tab.basis[*i] == Var::Column(j))?;
        let mut next = self.clone();
        next.tab.beta[r] -= lo - next.lower[j];
        next.lower[j] = lo;
        next.tab.upper[j] = (hi - lo).max(0.0);
        if !next.tab.dual_iterate()? {
            return Some((LpOutcome::Infeasible, None));
        }
        next.tab.iterate();
        Some((next.extract(cost), Some(next)))
    }

    fn extract(&self, cost: &[f64]) -> LpOutcome {
        let nv = cost.len();
        let tab = &self.tab;
        let mut x: Vec<f64> = (0..nv).map(|j| tab.value(j)).collect();
        for i in 0..tab.m {
            if let Var::Column(c) = tab.basis[i] {
                if c < nv {
                    x[c] = tab.beta[i];
                }
            }
        }
        for ((v, lo), ub) in x.iter_mut().zip(&self.lower).zip(&tab.upper) {
            *v = (*v + lo).clamp(*lo, lo + ub);
        }
        let objective = x.iter().zip(cost).map(|(v, c)| v * c).sum();
        LpOutcome::Optimal { x, objective }
    }
}

/// `cost` is minimised. `lower` must be finite; `upper` may be infinite.
pub(crate) fn solve_lp(cost: &[f64], rows: &[LpRow<'_>], lower: &[f64], upper: &[f64]) -> LpOutcome {
    solve_lp_state(cost, rows, lower, upper).0
}

/// Like [`solve_lp`], also returning the optimal tableau.
pub(crate) fn solve_lp_state(
    cost: &[f64],
    rows: &[LpRow<'_>],
    lower: &[f64],
    upper: &[f64],
) -> (LpOutcome, Option<LpState>) {
    let nv = cost.len();
    for j in 0..nv {
        if upper[j] < lower[j] - EPS {
            return (LpOutcome::Infeasible, None);
        }
    }
    let m = rows.len();
    let slack_count = rows
        .iter()
        .filter(|r| r.relation != Relation::Eq)
        .count();
    let n = nv + slack_count;
    let mut t = vec![0.0; m * n];
    let mut beta = vec![0.0; m];
    let mut ub = Vec::with_capacity(n);
    for j in 0..nv {
        ub.push((upper[j] - lower[j]).max(0.0));
    }
    ub.extend(std::iter::repeat_n(f64::INFINITY, slack_count));
    let mut basis = vec![Var::Artificial; m];
    let mut is_basic = vec![false; n];
    let mut next_slack = nv;
    for (i, row) in rows.iter().enumerate() {
        let mut rhs = row.rhs;
        for &(j, a) in row.coeffs {
            t[i * n + j] += a;
            rhs -= a * lower[j];
        }
        let slack = match row.relation {
            Relation::Le => Some(1.0),
            Relation::Ge => Some(-1.0),
            Relation::Eq => None,
        };
        let slack_col = slack.map(|s| {
            let c = next_slack;
            t[i * n + c] = s;
            next_slack += 1;
            c
        });
        if rhs < 0.0 {
            for v in &mut t[i * n..(i + 1) * n] {
                *v = -*v;
            }
            rhs = -rhs;
        }
        beta[i] = rhs;
        if let Some(c) = slack_col {
            if t[i * n + c] > 0.0 {
                basis[i] = Var::Column(c);
                is_basic[c] = true;
            }
        }
    }

    let mut tab = Tableau {
        m,
        n,
        t,
        beta,
        basis,
        at_upper: vec![false; n],
        is_basic,
        upper: ub,
        d: vec![0.0; n],
        objective: 0.0,
        artificial_upper: f64::INFINITY,
    };

    // phase 1: minimise the sum of artificials
    let artificial_rows: Vec<usize> = (0..m)
        .filter(|i| tab.basis[*i] == Var::Artificial)
        .collect();
    if !artificial_rows.is_empty() {
        for &i in &artificial_rows {
            for j in 0..n {
                tab.d[j] -= tab.t[i * n + j];
            }
            tab.objective += tab.beta[i];
        }
        tab.iterate();
        let infeasibility: f64 = (0..m)
            .filter(|i| tab.basis[*i] == Var::Artificial)
            .map(|i| tab.beta[i])
            .sum();
        let scale = 1.0 + rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > 1e-7 * scale {
            return (LpOutcome::Infeasible, None);
        }
        for r in 0..m {
            if tab.basis[r] != Var::Artificial {
                continue;
            }
            let candidate = (0..n)
                .filter(|j| !tab.is_basic[*j])
                .max_by(|a, b| {
                    tab.row(r)[*a]
                        .abs()
                        .partial_cmp(&tab.row(r)[*b].abs())
                        .unwrap()
                })
                .filter(|j| tab.row(r)[*j].abs() > PIVOT_EPS);
            if let Some(j) = candidate {
                let v = tab.value(j);
                tab.pivot(r, j);
                tab.beta[r] = v;
            }
        }
    }

    // phase 2: remaining artificials are pinned at zero
    tab.artificial_upper = 0.0;
    tab.objective = 0.0;
    let mut full_cost = vec![0.0; n];
    full_cost[..nv].copy_from_slice(cost);
    tab.d.copy_from_slice(&full_cost);
    for i in 0..m {
        if let Var::Column(c) = tab.basis[i] {
            let cb = full_cost[c];
            if cb != 0.0 {
                for j in 0..n {
                    tab.d[j] -= cb * tab.t[i * n + j];
                }
            }
        }
    }
    for j in 0..n {
        if tab.is_basic[j] {
            tab.d[j] = 0.0;
        }
    }
    if !tab.iterate() {
        return (LpOutcome::Unbounded, None);
    }
    let state = LpState {
        tab,
        lower: lower.to_vec(),
    };
    (state.extract(cost), Some(state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], relation: Relation, rhs: f64) -> (Vec<(usize, f64)>, Relation, f64) {
        (coeffs.to_vec(), relation, rhs)
    }

    fn solve(cost: &[f64], rows: &[(Vec<(usize, f64)>, Relation, f64)], lo: &[f64], hi: &[f64]) -> LpOutcome {
        let rows: Vec<LpRow> = rows
            .iter()
            .map(|(c, r, b)| LpRow {
                coeffs: c,
                relation: *r,
                rhs: *b,
            })
            .collect();
        solve_lp(cost, &rows, lo, hi)
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  => (2, 6), 36
        let rows = [
            row(&[(0, 1.0)], Relation::Le, 4.0),
            row(&[(1, 2.0)], Relation::Le, 12.0),
            row(&[(0, 3.0), (1, 2.0)], Relation::Le, 18.0),
        ];
        let inf = f64::INFINITY;
        match solve(&[-3.0, -5.0], &rows, &[0.0, 0.0], &[inf, inf]) {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
                assert!((objective + 36.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounds_equalities_and_infeasibility() {
        // min x + y s.t. x + y = 3, x in [0, 1], y in [1, 5] => 3
        let rows = [row(&[(0, 1.0), (1, 1.0)], Relation::Eq, 3.0)];
        match solve(&[1.0, 1.0], &rows, &[0.0, 1.0], &[1.0, 5.0]) {
            LpOutcome::Optimal { objective, .. } => assert!((objective - 3.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        // max x with x <= 1.5 by bound => bound flip
        match solve(&[-1.0], &[], &[0.0], &[1.5]) {
            LpOutcome::Optimal { x, .. } => assert!((x[0] - 1.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let rows = [row(&[(0, 1.0)], Relation::Ge, 2.0), row(&[(0, 1.0)], Relation::Le, 1.0)];
        assert_eq!(solve(&[1.0], &rows, &[0.0], &[10.0]), LpOutcome::Infeasible);
        assert_eq!(solve(&[-1.0], &[], &[0.0], &[f64::INFINITY]), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows() {
        let rows = [
            row(&[(0, 1.0), (1, 1.0)], Relation::Eq, 2.0),
            row(&[(0, 2.0), (1, 2.0)], Relation::Eq, 4.0),
        ];
        match solve(&[1.0, 2.0], &rows, &[0.0, 0.0], &[5.0, 5.0]) {
            LpOutcome::Optimal { objective, .. } => assert!((objective - 2.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
