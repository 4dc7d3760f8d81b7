//! MILP bounds used by the search: a lower bound on the remaining edit
//! distance and an upper bound on the remaining probability gain.
//!
//! Both solve over a Parikh vector `x` of product transitions with the
//! marking equation `M_d = M + I·x`, `M_d >= 0`, and `M_d` a deadlock. The
//! deadlock condition says every transition has some preset place holding
//! fewer tokens than its arc weight; for presets spanning several places this
//! is a big-M disjunction over binary indicators.
//!
//! Only transitions with a minimal preset get deadlock constraints: if
//! `•u ⊆ •t` then `u` disabled implies `t` disabled. In particular every
//! synchronous move is covered by its model move.

use crate::milp::{self, MilpProblem, MilpStatus, Relation, Sense, SolveOptions, VarId};
use crate::multiset::Multiset;
use crate::net::{Marking, PlaceId, TransitionId};
use crate::product::SyncProduct;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicConfig {
    /// Per-variable cap on model-move firings; `None` uses the default
    /// `|σ| + |P| + |M0| + loop_allowance`.
    pub cap: Option<i64>,
    /// Extra cap headroom for loops; `None` means `2·|T|` of the model.
    pub loop_allowance: Option<i64>,
    /// Drop integrality and solve the LP relaxation only.
    pub relax_integrality: bool,
    /// Branch-and-bound node limit per solve. On hitting it the best open
    /// bound is used, which is still a valid bound, only a weaker one.
    pub max_nodes: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            cap: None,
            loop_allowance: None,
            relax_integrality: false,
            max_nodes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicResult {
    /// `h_d`, or `log10 h_p`.
    pub value: f64,
    /// Raw solver objective behind `value` (before rounding or clamping).
    pub objective: f64,
    /// Firing counts per product transition (rounded in relaxed mode).
    pub parikh: Vec<u32>,
    /// Whether the value came from a proven optimum of the uncapped problem
    /// (as far as caps can tell), so `parikh` may be a real firing sequence.
    pub exact_hint: bool,
    pub status: HeuristicStatus,
    /// `M + I·x` for the returned `x`.
    pub final_marking: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicStatus {
    Solved,
    /// Solver failed or hit a cap; the conservative fallback was returned.
    Fallback,
}

/// `log10 h_p` from a raw maximisation objective: padded against rounding and
/// clamped to a probability.
pub fn gain_value(objective: f64) -> f64 {
    (objective + 1e-9).min(0.0)
}

/// Binary indicators for one transition with a multi-place preset: at least one
/// indicator is set, and a set indicator caps its place below the arc weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadlockEncoding {
    pub transition: TransitionId,
    /// (place, required tokens, indicator, big-M)
    pub places: Vec<(PlaceId, u32, VarId, f64)>,
}

/// Static per-product data shared by every heuristic evaluation.
#[derive(Debug, Clone)]
pub struct Heuristics {
    num_places: usize,
    num_model_places: usize,
    /// (place, delta) per transition.
    columns: Vec<Vec<(usize, i64)>>,
    costs: Vec<f64>,
    log_gain_bounds: Vec<f64>,
    /// Transitions needing a deadlock constraint, with their presets.
    minimal_presets: Vec<(TransitionId, Vec<(PlaceId, u32)>)>,
    has_source_transition: bool,
    trace_pos: Vec<Option<usize>>,
    cap: i64,
    config: HeuristicConfig,
}

/// Static upper bound on each product transition's probability gain:
/// 1 for trace moves; otherwise `w(t) / Σ w(u)` over model transitions `u`
/// whose preset is contained in `t`'s (those are enabled whenever `t` is).
pub fn build_gain_bounds(sp: &SyncProduct) -> Vec<f64> {
    let model = sp.model();
    let presets: Vec<Multiset<PlaceId>> = model
        .transitions()
        .iter()
        .map(|t| Multiset::from_counts(t.inputs.iter().map(|(p, w)| (*p, u64::from(*w)))))
        .collect();
    let model_bound: Vec<f64> = (0..model.num_transitions())
        .map(|j| {
            let denom: f64 = (0..model.num_transitions())
                .filter(|k| presets[*k].is_subset_of(&presets[j]))
                .map(|k| model.weight(TransitionId(k)).value())
                .sum();
            model.weight(TransitionId(j)).value() / denom
        })
        .collect();
    sp.moves()
        .iter()
        .map(|m| m.model.map_or(1.0, |ts| model_bound[ts.0]))
        .collect()
}

impl Heuristics {
    pub fn new(sp: &SyncProduct, config: HeuristicConfig) -> Self {
        let net = sp.net();
        let nt = net.num_transitions();
        let mut columns = Vec::with_capacity(nt);
        for t in net.transitions() {
            let mut col: Vec<(usize, i64)> = Vec::new();
            for (p, w) in &t.inputs {
                col.push((p.0, -i64::from(*w)));
            }
            for (p, w) in &t.outputs {
                match col.iter_mut().find(|(q, _)| *q == p.0) {
                    Some(entry) => entry.1 += i64::from(*w),
                    None => col.push((p.0, i64::from(*w))),
                }
            }
            col.retain(|(_, d)| *d != 0);
            columns.push(col);
        }
        let costs = (0..nt)
            .map(|t| f64::from(sp.move_cost(TransitionId(t))))
            .collect();
        let log_gain_bounds = build_gain_bounds(sp).iter().map(|p| p.log10()).collect();

        let presets: Vec<Multiset<PlaceId>> = net
            .transitions()
            .iter()
            .map(|t| Multiset::from_counts(t.inputs.iter().map(|(p, w)| (*p, u64::from(*w)))))
            .collect();
        let mut minimal_presets = Vec::new();
        for t in 0..nt {
            let covered = (0..nt).any(|u| {
                u != t
                    && presets[u].is_subset_of(&presets[t])
                    && (presets[u] != presets[t] || u < t)
            });
            if !covered {
                minimal_presets.push((TransitionId(t), net.transitions()[t].inputs.clone()));
            }
        }
        let has_source_transition = presets.iter().any(|p| p.is_empty());

        let model = sp.model();
        let loop_allowance = config
            .loop_allowance
            .unwrap_or(2 * model.num_transitions() as i64);
        let cap = config.cap.unwrap_or(
            sp.trace_len() as i64
                + model.num_places() as i64
                + model.initial_marking().total() as i64
                + loop_allowance,
        );
        Self {
            num_places: net.num_places(),
            num_model_places: model.num_places(),
            columns,
            costs,
            log_gain_bounds,
            minimal_presets,
            has_source_transition,
            trace_pos: sp.moves().iter().map(|m| m.trace_pos).collect(),
            cap,
            config,
        }
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cap(&self) -> i64 {
        self.cap
    }

    pub fn log_gain_bounds(&self) -> &[f64] {
        &self.log_gain_bounds
    }

    /// Lower bound on the edit distance still to be paid from `m`.
    pub fn edit_distance(&self, m: &Marking) -> HeuristicResult {
        let built = self.build(m, Sense::Minimize, &self.costs);
        let fallback = |fm| HeuristicResult {
            value: 0.0,
            objective: 0.0,
            parikh: vec![0; self.columns.len()],
            exact_hint: false,
            status: HeuristicStatus::Fallback,
            final_marking: fm,
        };
        let Some((problem, vars)) = built else {
            return fallback(self.final_marking(m, &vec![0; self.columns.len()]));
        };
        match self.run(&problem, &vars) {
            Some((objective, parikh, exact)) => {
                let value = if self.config.relax_integrality {
                    (objective - 1e-9).max(0.0)
                } else {
                    objective.round().max(0.0)
                };
                let final_marking = self.final_marking(m, &parikh);
                HeuristicResult {
                    value,
                    objective,
                    parikh,
                    exact_hint: exact,
                    status: HeuristicStatus::Solved,
                    final_marking,
                }
            }
            None => fallback(self.final_marking(m, &vec![0; self.columns.len()])),
        }
    }

    /// Upper bound on `log10` of the probability gain still to be collected from `m`.
    pub fn probability_gain(&self, m: &Marking) -> HeuristicResult {
        let built = self.build(m, Sense::Maximize, &self.log_gain_bounds);
        let fallback = |fm| HeuristicResult {
            value: 0.0,
            objective: 0.0,
            parikh: vec![0; self.columns.len()],
            exact_hint: false,
            status: HeuristicStatus::Fallback,
            final_marking: fm,
        };
        let Some((problem, vars)) = built else {
            return fallback(self.final_marking(m, &vec![0; self.columns.len()]));
        };
        match self.run(&problem, &vars) {
            Some((objective, parikh, exact)) => {
                let final_marking = self.final_marking(m, &parikh);
                HeuristicResult {
                    value: gain_value(objective),
                    objective,
                    parikh,
                    exact_hint: exact,
                    status: HeuristicStatus::Solved,
                    final_marking,
                }
            }
            None => fallback(self.final_marking(m, &vec![0; self.columns.len()])),
        }
    }

    fn final_marking(&self, m: &Marking, parikh: &[u32]) -> Vec<i64> {
        let mut out: Vec<i64> = m.counts().iter().map(|c| i64::from(*c)).collect();
        for (t, x) in parikh.iter().enumerate() {
            if *x > 0 {
                for (p, d) in &self.columns[t] {
                    out[*p] += d * i64::from(*x);
                }
            }
        }
        out
    }

    /// Solves and returns (objective, parikh over all transitions, exact).
    fn run(&self, problem: &MilpProblem, vars: &[Option<VarId>]) -> Option<(f64, Vec<u32>, bool)> {
        let scatter = |get: &dyn Fn(VarId) -> f64| -> Vec<u32> {
            vars.iter()
                .map(|v| v.map_or(0, |v| get(v).round().max(0.0) as u32))
                .collect()
        };
        if self.config.relax_integrality {
            let lp = milp::solve_relaxation(problem).ok()?;
            if !lp.feasible {
                return None;
            }
            let parikh = scatter(&|v| lp.values[v.0]);
            return Some((lp.objective_value, parikh, false));
        }
        let sol = milp::solve_with(
            problem,
            SolveOptions {
                max_nodes: self.config.max_nodes,
            },
        )
        .ok()?;
        match sol.status {
            MilpStatus::Optimal => {
                let parikh = scatter(&|v| sol.values[v.0] as f64);
                Some((sol.objective_value, parikh, true))
            }
            MilpStatus::NodeLimit if sol.bound.is_finite() => {
                let parikh = if sol.values.is_empty() {
                    vec![0; vars.len()]
                } else {
                    scatter(&|v| sol.values[v.0] as f64)
                };
                Some((sol.bound, parikh, false))
            }
            _ => None,
        }
    }

    /// The MILP for marking `m`, or `None` when it is trivially infeasible.
    /// `vars[t]` is the variable of product transition `t`, if it can fire at all.
    pub fn build(
        &self,
        m: &Marking,
        sense: Sense,
        objective: &[f64],
    ) -> Option<(MilpProblem, Vec<Option<VarId>>)> {
        if self.has_source_transition {
            return None;
        }
        let pos = m.counts()[self.num_model_places..]
            .iter()
            .position(|c| *c > 0)
            .unwrap_or(usize::MAX);
        let mut problem = MilpProblem::new(sense);
        let mut vars: Vec<Option<VarId>> = Vec::with_capacity(self.columns.len());
        let mut upper_of: Vec<i64> = Vec::with_capacity(self.columns.len());
        for (t, tp) in self.trace_pos.iter().enumerate() {
            match tp {
                Some(i) if *i < pos => {
                    vars.push(None);
                    upper_of.push(0);
                }
                Some(_) => {
                    vars.push(Some(problem.add_integer(objective[t], 0, Some(1), None)));
                    upper_of.push(1);
                }
                None => {
                    vars.push(Some(problem.add_integer(objective[t], 0, None, Some(self.cap))));
                    upper_of.push(self.cap);
                }
            }
        }

        // rows[p] = Σ I(p,t) x_t ; max_tokens[p] bounds M_d(p) from above
        let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); self.num_places];
        let mut max_tokens: Vec<i64> = m.counts().iter().map(|c| i64::from(*c)).collect();
        for (t, col) in self.columns.iter().enumerate() {
            let Some(v) = vars[t] else { continue };
            for (p, d) in col {
                rows[*p].push((v, *d as f64));
                if *d > 0 {
                    max_tokens[*p] += d * upper_of[t];
                }
            }
        }

        // single-place minimal presets give plain upper bounds on M_d(p)
        let mut place_ub: Vec<Option<i64>> = vec![None; self.num_places];
        let mut disjunctions: Vec<&(TransitionId, Vec<(PlaceId, u32)>)> = Vec::new();
        for entry in &self.minimal_presets {
            let (_, preset) = entry;
            // already disabled for good if some place can never hold enough
            if preset
                .iter()
                .any(|(p, w)| max_tokens[p.0] < i64::from(*w))
            {
                continue;
            }
            if preset.len() == 1 {
                let (p, w) = preset[0];
                let ub = i64::from(w) - 1;
                place_ub[p.0] = Some(place_ub[p.0].map_or(ub, |u| u.min(ub)));
            } else {
                disjunctions.push(entry);
            }
        }

        for p in 0..self.num_places {
            let tokens = i64::from(m.counts()[p]);
            let lo = -(tokens as f64);
            let hi = place_ub[p].map(|u| (u - tokens) as f64);
            if rows[p].is_empty() {
                if hi.is_some_and(|h| h < 0.0) {
                    return None;
                }
                continue;
            }
            match hi {
                Some(h) if h == lo => problem.add_constraint(rows[p].clone(), Relation::Eq, lo),
                Some(h) => {
                    if h < lo {
                        return None;
                    }
                    problem.add_constraint(rows[p].clone(), Relation::Ge, lo);
                    problem.add_constraint(rows[p].clone(), Relation::Le, h);
                }
                None => problem.add_constraint(rows[p].clone(), Relation::Ge, lo),
            }
        }

        for (_, preset) in disjunctions {
            let mut indicators = Vec::with_capacity(preset.len());
            for (p, w) in preset {
                let y = problem.add_binary(0.0);
                indicators.push((y, 1.0));
                let tokens = i64::from(m.counts()[p.0]);
                let big_m = max_tokens[p.0] as f64;
                // M_d(p) <= w - 1 + bigM (1 - y)
                let mut coeffs = rows[p.0].clone();
                coeffs.push((y, big_m));
                problem.add_constraint(
                    coeffs,
                    Relation::Le,
                    f64::from(*w) - 1.0 - tokens as f64 + big_m,
                );
            }
            problem.add_constraint(indicators, Relation::Ge, 1.0);
        }
        Some((problem, vars))
    }

    /// Deadlock encodings the MILP for `m` would contain (for inspection).
    pub fn deadlock_encodings(&self, m: &Marking) -> Vec<DeadlockEncoding> {
        let Some((problem, vars)) = self.build(m, Sense::Minimize, &self.costs) else {
            return Vec::new();
        };
        let first_binary = vars.len();
        let mut out = Vec::new();
        let mut next = first_binary;
        // binaries were added in the same order as below
        let mut max_tokens: Vec<i64> = m.counts().iter().map(|c| i64::from(*c)).collect();
        for (t, col) in self.columns.iter().enumerate() {
            if vars[t].is_none() {
                continue;
            }
            let ub = if self.trace_pos[t].is_some() { 1 } else { self.cap };
            for (p, d) in col {
                if *d > 0 {
                    max_tokens[*p] += d * ub;
                }
            }
        }
        for (t, preset) in &self.minimal_presets {
            if preset.len() < 2 || preset.iter().any(|(p, w)| max_tokens[p.0] < i64::from(*w)) {
                continue;
            }
            let places = preset
                .iter()
                .map(|(p, w)| {
                    let v = VarId(next);
                    next += 1;
                    (*p, *w, v, max_tokens[p.0] as f64)
                })
                .collect();
            out.push(DeadlockEncoding {
                transition: *t,
                places,
            });
        }
        debug_assert!(next <= problem.num_vars());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Label, NetBuilder, Weight};
    use crate::product::build_sync_product;
    use crate::samples::{running_example, trace};

    #[test]
    fn running_example_initial_bounds() {
        let sp = build_sync_product(&trace(&["a", "d", "c"]), &running_example());
        let h = Heuristics::new(&sp, HeuristicConfig::default());
        let hd = h.edit_distance(sp.initial_marking());
        assert_eq!(hd.status, HeuristicStatus::Solved);
        assert!(hd.value <= 1.0);
        let hp = h.probability_gain(sp.initial_marking());
        assert!(hp.value >= (297.0f64 / 500.0).log10() - 1e-12);
        assert!(hp.value <= 0.0);
    }

    #[test]
    fn deadlocked_marking_has_zero_heuristics() {
        let sp = build_sync_product(&trace(&["a"]), &running_example());
        let h = Heuristics::new(&sp, HeuristicConfig::default());
        // after (a,t1) then (>>,t3): model [p4], trace at end
        let m = Marking::from_counts(vec![0, 0, 0, 1, 0, 1]);
        assert!(sp.is_deadlock(&m));
        assert_eq!(h.edit_distance(&m).value, 0.0);
        assert_eq!(h.probability_gain(&m).value, 0.0);
    }

    #[test]
    fn trace_only_product() {
        let mut b = NetBuilder::new();
        let p = b.add_place("p");
        b.mark(p, 1);
        let empty_model = b.build().unwrap();
        let sp = build_sync_product(&trace(&["a"]), &empty_model);
        let h = Heuristics::new(&sp, HeuristicConfig::default());
        let hd = h.edit_distance(sp.initial_marking());
        assert_eq!(hd.value, 1.0);
        assert_eq!(hd.parikh, vec![1]);
    }

    #[test]
    fn gain_bounds() {
        let sp = build_sync_product(&trace(&["a", "d", "c"]), &running_example());
        let g = build_gain_bounds(&sp);
        assert!((g[1] - 0.99).abs() < 1e-15);
        assert_eq!(g[4], 1.0);
        // t3 and t4 have distinct single-place presets: no peers
        assert_eq!(g[2], 1.0);
        assert_eq!(g[3], 1.0);
    }

    #[test]
    fn join_transitions_get_disjunctions() {
        let mut b = NetBuilder::new();
        let p = b.add_places(3);
        let w = Weight::from_integer(1);
        b.add_transition("split", Label::Silent, w.clone(), &[p[0]], &[p[1], p[2]]);
        b.add_transition("join", Label::Activity("j".into()), w, &[p[1], p[2]], &[p[0]]);
        b.mark(p[1], 1);
        let net = b.build().unwrap();
        let sp = build_sync_product(&[], &net);
        let h = Heuristics::new(&sp, HeuristicConfig::default());
        let enc = h.deadlock_encodings(sp.initial_marking());
        assert_eq!(enc.len(), 1);
        assert_eq!(enc[0].places.len(), 2);
        // only p1 is marked: the join is disabled already, distance 0
        let hd = h.edit_distance(sp.initial_marking());
        assert_eq!(hd.value, 0.0);
        assert_eq!(hd.status, HeuristicStatus::Solved);
    }
}
