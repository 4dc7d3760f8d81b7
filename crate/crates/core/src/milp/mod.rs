//! Small exact MILP solver: dense simplex relaxations inside best-bound
//! branch and bound, most-fractional branching.
//!
//! Every integer variable needs a finite upper bound or a cap. A cap is an
//! artificial limit supplied by the caller; when the optimum sits on a cap the
//! solution is reported as [`MilpStatus::CapReached`], since a larger value
//! might have led to a better objective.

mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use thiserror::Error;

use simplex::{solve_lp, solve_lp_state, LpOutcome, LpRow, LpState, EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Integer,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Variable {
    kind: VarKind,
    objective: f64,
    lower: i64,
    upper: Option<i64>,
    cap: Option<i64>,
}

impl Variable {
    fn effective_upper(&self) -> Option<i64> {
        match (self.upper, self.cap) {
            (Some(u), Some(c)) => Some(u.min(c)),
            (u, c) => u.or(c),
        }
    }

    fn cap_binding(&self) -> Option<i64> {
        match (self.upper, self.cap) {
            (Some(u), Some(c)) if c < u => Some(c),
            (None, Some(c)) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    sense: Sense,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("integer variable {0} has neither an upper bound nor a cap")]
    Uncapped(usize),
    #[error("constraint {constraint} references unknown variable {var}")]
    UnknownVariable { constraint: usize, var: usize },
    #[error("non-finite coefficient in constraint {0}")]
    NonFinite(usize),
    #[error("variable {0} has lower bound above its upper bound")]
    EmptyDomain(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Optimal within the capped region, with some capped variable at its cap.
    CapReached,
    /// Node limit hit; `bound` still bounds the optimum and `values` holds the
    /// incumbent, if any.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Vec<i64>,
    pub objective_value: f64,
    /// Objective of the root relaxation (a bound on the optimum).
    pub root_bound: f64,
    /// Best proven bound on the optimum.
    pub bound: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub feasible: bool,
    pub values: Vec<f64>,
    pub objective_value: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_nodes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_nodes: 20_000 }
    }
}

impl MilpProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            vars: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_int_vars(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Integer).count()
    }

    pub fn num_bin_vars(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add_integer(&mut self, objective: f64, lower: i64, upper: Option<i64>, cap: Option<i64>) -> VarId {
        self.vars.push(Variable {
            kind: VarKind::Integer,
            objective,
            lower,
            upper,
            cap,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, objective: f64) -> VarId {
        self.vars.push(Variable {
            kind: VarKind::Binary,
            objective,
            lower: 0,
            upper: Some(1),
            cap: None,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(VarId, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn objective(&self, v: VarId) -> f64 {
        self.vars[v.0].objective
    }

    fn validate(&self) -> Result<(), MilpError> {
        for (i, v) in self.vars.iter().enumerate() {
            let Some(u) = v.effective_upper() else {
                return Err(MilpError::Uncapped(i));
            };
            if v.lower > u && v.cap.is_none() {
                return Err(MilpError::EmptyDomain(i));
            }
            if !v.objective.is_finite() {
                return Err(MilpError::NonFinite(usize::MAX));
            }
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(MilpError::NonFinite(ci));
            }
            for (v, a) in &c.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(MilpError::UnknownVariable {
                        constraint: ci,
                        var: v.0,
                    });
                }
                if !a.is_finite() {
                    return Err(MilpError::NonFinite(ci));
                }
            }
        }
        Ok(())
    }

    /// Internal minimisation costs.
    fn min_costs(&self) -> Vec<f64> {
        let s = if self.sense == Sense::Minimize { 1.0 } else { -1.0 };
        self.vars.iter().map(|v| s * v.objective).collect()
    }

    fn to_user(&self, internal: f64) -> f64 {
        if self.sense == Sense::Minimize {
            internal
        } else {
            -internal
        }
    }

    /// Whether an integral point satisfies every constraint and bound.
    pub fn is_feasible(&self, values: &[i64]) -> bool {
        if values.len() != self.vars.len() {
            return false;
        }
        for (v, x) in self.vars.iter().zip(values) {
            if *x < v.lower || v.effective_upper().is_some_and(|u| *x > u) {
                return false;
            }
        }
        self.constraints.iter().all(|c| {
            let lhs: f64 = c.coeffs.iter().map(|(v, a)| a * values[v.0] as f64).sum();
            let tol = 1e-9 * (1.0 + c.rhs.abs());
            match c.relation {
                Relation::Le => lhs <= c.rhs + tol,
                Relation::Ge => lhs >= c.rhs - tol,
                Relation::Eq => (lhs - c.rhs).abs() <= tol,
            }
        })
    }

    pub fn evaluate(&self, values: &[i64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .map(|(v, x)| v.objective * *x as f64)
            .sum()
    }

    fn lp_rows(&self) -> Rows {
        self.constraints
            .iter()
            .map(|c| {
                (
                    c.coeffs.iter().map(|(v, a)| (v.0, *a)).collect(),
                    c.relation,
                    c.rhs,
                )
            })
            .collect()
    }
}

type Rows = Vec<(Vec<(usize, f64)>, Relation, f64)>;

fn lp_rows(rows: &Rows) -> Vec<LpRow<'_>> {
    rows.iter()
        .map(|(c, r, b)| LpRow {
            coeffs: c,
            relation: *r,
            rhs: *b,
        })
        .collect()
}

fn run_lp(cost: &[f64], rows: &Rows, lower: &[f64], upper: &[f64]) -> LpOutcome {
    solve_lp(cost, &lp_rows(rows), lower, upper)
}

// Warm-start tableaux kept alive at once, in floats.
const WARM_START_BUDGET: usize = 1 << 23;

/// Solves the continuous relaxation (integrality dropped, bounds and caps kept).
pub fn solve_relaxation(problem: &MilpProblem) -> Result<LpSolution, MilpError> {
    problem.validate()?;
    let lower: Vec<f64> = problem.vars.iter().map(|v| v.lower as f64).collect();
    let upper: Vec<f64> = problem
        .vars
        .iter()
        .map(|v| v.effective_upper().unwrap() as f64)
        .collect();
    match run_lp(&problem.min_costs(), &problem.lp_rows(), &lower, &upper) {
        LpOutcome::Optimal { x, objective } => Ok(LpSolution {
            feasible: true,
            values: x,
            objective_value: problem.to_user(objective),
        }),
        _ => Ok(LpSolution {
            feasible: false,
            values: Vec::new(),
            objective_value: f64::NAN,
        }),
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    /// Optimal tableau of this node's relaxation, for its children.
    state: Option<Rc<LpState>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: smallest bound first, then deepest, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

pub fn solve(problem: &MilpProblem) -> Result<MilpSolution, MilpError> {
    solve_with(problem, SolveOptions::default())
}

pub fn solve_with(problem: &MilpProblem, options: SolveOptions) -> Result<MilpSolution, MilpError> {
    problem.validate()?;
    let n = problem.vars.len();
    let cost = problem.min_costs();
    let rows = problem.lp_rows();
    let lower: Vec<f64> = problem.vars.iter().map(|v| v.lower as f64).collect();
    let upper: Vec<f64> = problem
        .vars
        .iter()
        .map(|v| v.effective_upper().unwrap() as f64)
        .collect();

    let infeasible = |nodes| MilpSolution {
        status: MilpStatus::Infeasible,
        values: Vec::new(),
        objective_value: f64::NAN,
        root_bound: f64::NAN,
        bound: f64::NAN,
        nodes,
    };

    // with integral costs every integer point has an integral objective, so
    // relaxation bounds can be rounded up
    let integral_objective = cost.iter().all(|c| (c - c.round()).abs() < 1e-12);
    let tighten = |b: f64| {
        if integral_objective {
            (b - 1e-6).ceil()
        } else {
            b
        }
    };

    let lp = lp_rows(&rows);
    let root = match solve_lp_state(&cost, &lp, &lower, &upper) {
        (LpOutcome::Optimal { x, objective }, state) => Node {
            bound: tighten(objective),
            depth: 0,
            seq: 0,
            lower,
            upper,
            x,
            state: state.map(Rc::new),
        },
        _ => return Ok(infeasible(1)),
    };
    let root_bound = root.bound;

    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut incumbent: Option<(Vec<i64>, f64)> = None;
    let mut nodes = 1usize;
    let mut seq = 1usize;
    let prune_tol = |v: f64| 1e-9 * (1.0 + v.abs());

    while let Some(node) = heap.pop() {
        if let Some((_, best)) = &incumbent {
            if node.bound >= best - prune_tol(*best) {
                continue;
            }
        }
        if nodes >= options.max_nodes {
            heap.push(node);
            break;
        }
        let branch_var = (0..n)
            .filter_map(|j| {
                let f = node.x[j] - node.x[j].floor();
                let frac = f.min(1.0 - f);
                (frac > 1e-6).then_some((j, frac))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match branch_var {
            None => {
                let values: Vec<i64> = node.x.iter().map(|v| v.round() as i64).collect();
                if problem.is_feasible(&values) {
                    let obj: f64 = values.iter().zip(&cost).map(|(x, c)| *x as f64 * c).sum();
                    if incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
                        incumbent = Some((values, obj));
                    }
                }
            }
            Some((j, _)) => {
                let v = node.x[j];
                for down in [true, false] {
                    let mut lo = node.lower.clone();
                    let mut hi = node.upper.clone();
                    if down {
                        hi[j] = v.floor();
                    } else {
                        lo[j] = v.ceil();
                    }
                    if lo[j] > hi[j] + EPS {
                        continue;
                    }
                    nodes += 1;
                    let warm = node.state.as_ref().and_then(|s| s.rebound(&cost, j, lo[j], hi[j]));
                    let (outcome, state) = warm.unwrap_or_else(|| solve_lp_state(&cost, &lp, &lo, &hi));
                    let keep = state.filter(|s| s.size() * (heap.len() + 1) <= WARM_START_BUDGET);
                    if let LpOutcome::Optimal { x, objective } = outcome {
                        let objective = tighten(objective);
                        if incumbent
                            .as_ref()
                            .is_some_and(|(_, best)| objective >= best - prune_tol(*best))
                        {
                            continue;
                        }
                        heap.push(Node {
                            bound: objective.max(node.bound),
                            depth: node.depth + 1,
                            seq,
                            lower: lo,
                            upper: hi,
                            x,
                            state: keep.map(Rc::new),
                        });
                        seq += 1;
                    }
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let hit_limit = !heap.is_empty()
        && incumbent
            .as_ref()
            .is_none_or(|(_, best)| open_bound < best - prune_tol(*best));
    match incumbent {
        None if !hit_limit => Ok(MilpSolution {
            root_bound: problem.to_user(root_bound),
            ..infeasible(nodes)
        }),
        None => Ok(MilpSolution {
            status: MilpStatus::NodeLimit,
            values: Vec::new(),
            objective_value: f64::NAN,
            root_bound: problem.to_user(root_bound),
            bound: problem.to_user(open_bound),
            nodes,
        }),
        Some((values, obj)) => {
            let status = if hit_limit {
                MilpStatus::NodeLimit
            } else if problem
                .vars
                .iter()
                .zip(&values)
                .any(|(v, x)| v.cap_binding() == Some(*x))
            {
                MilpStatus::CapReached
            } else {
                MilpStatus::Optimal
            };
            let bound = if hit_limit { open_bound.min(obj) } else { obj };
            Ok(MilpSolution {
                status,
                objective_value: problem.to_user(obj),
                values,
                root_bound: problem.to_user(root_bound),
                bound: problem.to_user(bound),
                nodes,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_lower_bound() {
        let mut p = MilpProblem::new(Sense::Minimize);
        let x = p.add_integer(1.0, 0, None, Some(100));
        p.add_constraint(vec![(x, 1.0)], Relation::Ge, 3.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.values, vec![3]);
        assert_eq!(s.objective_value, 3.0);
    }

    #[test]
    fn fractional_capacity() {
        // brute force over {0,1,2}^2 with x + y <= 2.5 gives 2
        let mut brute = f64::NEG_INFINITY;
        for x in 0..=2 {
            for y in 0..=2 {
                if f64::from(x + y) <= 2.5 {
                    brute = brute.max(f64::from(x + y));
                }
            }
        }
        let mut p = MilpProblem::new(Sense::Maximize);
        let x = p.add_integer(1.0, 0, Some(2), None);
        let y = p.add_integer(1.0, 0, Some(2), None);
        p.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 2.5);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.objective_value, brute);
        assert!(s.root_bound >= s.objective_value);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = MilpProblem::new(Sense::Minimize);
        let x = p.add_integer(1.0, 0, Some(10), None);
        p.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0);
        p.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve(&p).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn uncapped_integers_are_refused() {
        let mut p = MilpProblem::new(Sense::Minimize);
        p.add_integer(1.0, 0, None, None);
        assert_eq!(solve(&p), Err(MilpError::Uncapped(0)));
        let mut p = MilpProblem::new(Sense::Minimize);
        let x = p.add_binary(1.0);
        p.add_constraint(vec![(x, 1.0), (VarId(4), 1.0)], Relation::Le, 1.0);
        assert!(matches!(solve(&p), Err(MilpError::UnknownVariable { .. })));
    }

    #[test]
    fn cap_reached_is_reported() {
        let mut p = MilpProblem::new(Sense::Maximize);
        let x = p.add_integer(1.0, 0, None, Some(4));
        p.add_constraint(vec![(x, 1.0)], Relation::Le, 10.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, MilpStatus::CapReached);
        assert_eq!(s.values, vec![4]);
        // a natural bound below the cap is not a cap hit
        let mut p = MilpProblem::new(Sense::Maximize);
        p.add_integer(1.0, 0, Some(3), Some(4));
        assert_eq!(solve(&p).unwrap().status, MilpStatus::Optimal);
    }

    #[test]
    fn big_m_disjunction() {
        // x in [0, 10], either x <= 2 or x >= 7 (binary y); minimise |x - 5| via max obj
        // maximize -x with x >= 3 => only x >= 7 branch works => x = 7
        let mut p = MilpProblem::new(Sense::Maximize);
        let x = p.add_integer(-1.0, 0, Some(10), None);
        let y = p.add_binary(0.0);
        p.add_constraint(vec![(x, 1.0), (y, -10.0)], Relation::Le, 2.0);
        p.add_constraint(vec![(x, 1.0), (y, -7.0)], Relation::Ge, 0.0);
        p.add_constraint(vec![(x, 1.0)], Relation::Ge, 3.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.values[0], 7);
    }

    #[derive(Debug, Clone)]
    struct RandomProblem {
        maximize: bool,
        uppers: Vec<i64>,
        objective: Vec<i64>,
        rows: Vec<(Vec<i64>, u8, i64)>,
    }

    fn random_problem() -> impl Strategy<Value = RandomProblem> {
        (1usize..=6).prop_flat_map(|n| {
            (
                any::<bool>(),
                proptest::collection::vec(0i64..=5, n),
                proptest::collection::vec(-4i64..=4, n),
                proptest::collection::vec(
                    (proptest::collection::vec(-3i64..=3, n), 0u8..3, -6i64..=12),
                    0..5,
                ),
            )
                .prop_map(|(maximize, uppers, objective, rows)| RandomProblem {
                    maximize,
                    uppers,
                    objective,
                    rows,
                })
        })
    }

    fn build(rp: &RandomProblem) -> MilpProblem {
        let sense = if rp.maximize { Sense::Maximize } else { Sense::Minimize };
        let mut p = MilpProblem::new(sense);
        let vars: Vec<VarId> = rp
            .uppers
            .iter()
            .zip(&rp.objective)
            .map(|(u, c)| p.add_integer(*c as f64, 0, Some(*u), None))
            .collect();
        for (coeffs, rel, rhs) in &rp.rows {
            let relation = [Relation::Le, Relation::Eq, Relation::Ge][*rel as usize];
            p.add_constraint(
                vars.iter().zip(coeffs).map(|(v, a)| (*v, *a as f64)).collect(),
                relation,
                *rhs as f64,
            );
        }
        p
    }

    /// Exhaustive search over the integer box.
    fn enumerate(p: &MilpProblem, uppers: &[i64]) -> Option<f64> {
        let n = uppers.len();
        let mut x = vec![0i64; n];
        let mut best: Option<f64> = None;
        loop {
            if p.is_feasible(&x) {
                let v = p.evaluate(&x);
                best = Some(match (best, p.sense()) {
                    (None, _) => v,
                    (Some(b), Sense::Maximize) => b.max(v),
                    (Some(b), Sense::Minimize) => b.min(v),
                });
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                if x[i] < uppers[i] {
                    x[i] += 1;
                    break;
                }
                x[i] = 0;
                i += 1;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn agrees_with_enumeration(rp in random_problem()) {
            let p = build(&rp);
            let s = solve(&p).unwrap();
            match enumerate(&p, &rp.uppers) {
                None => prop_assert_eq!(s.status, MilpStatus::Infeasible),
                Some(best) => {
                    prop_assert_eq!(s.status, MilpStatus::Optimal);
                    prop_assert!((s.objective_value - best).abs() < 1e-6, "{} vs {}", s.objective_value, best);
                    prop_assert!(p.is_feasible(&s.values));
                    match p.sense() {
                        Sense::Maximize => prop_assert!(s.root_bound >= best - 1e-6),
                        Sense::Minimize => prop_assert!(s.root_bound <= best + 1e-6),
                    }
                }
            }
        }
    }
}
