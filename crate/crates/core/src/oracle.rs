//! Brute-force ground truth for small nets: every model path with its exact
//! probability, insert/delete edit distance, and the loss minimiser found by
//! exhaustion.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::One;

use crate::loss::{loss, LossParams};
use crate::net::{ratio_log10, Marking, ModelPath, NetError, PathProbability, StochasticNet, TransitionId};
use crate::product::SyncProduct;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationBudget {
    /// Longest path explored, silent transitions included.
    pub max_path_len: usize,
    /// Prefixes less likely than `10^min_log_prob` are abandoned.
    pub min_log_prob: f64,
    pub max_paths: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_path_len: 64,
            min_log_prob: -30.0,
            max_paths: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub paths: Vec<(ModelPath, PathProbability)>,
    /// Some budget limit cut the enumeration short.
    pub truncated: bool,
}

impl Enumeration {
    pub fn total_probability(&self) -> BigRational {
        self.paths
            .iter()
            .fold(BigRational::from_integer(0.into()), |acc, (_, p)| acc + &p.exact)
    }
}

/// Deadlock-terminated firing sequences from `start`, depth first in
/// transition order, with exact probabilities.
pub fn enumerate_from(
    net: &StochasticNet,
    start: &Marking,
    budget: &EnumerationBudget,
) -> (Vec<(Vec<TransitionId>, PathProbability)>, bool) {
    struct Walk<'a> {
        net: &'a StochasticNet,
        budget: &'a EnumerationBudget,
        out: Vec<(Vec<TransitionId>, PathProbability)>,
        truncated: bool,
    }
    impl Walk<'_> {
        fn go(&mut self, m: &Marking, prefix: &mut Vec<TransitionId>, prob: &PathProbability) {
            if self.out.len() >= self.budget.max_paths {
                self.truncated = true;
                return;
            }
            let enabled = self.net.enabled_transitions(m);
            if enabled.is_empty() {
                self.out.push((prefix.clone(), prob.clone()));
                return;
            }
            if prefix.len() >= self.budget.max_path_len {
                self.truncated = true;
                return;
            }
            for t in enabled {
                let step = self
                    .net
                    .transition_probability_exact(m, t)
                    .expect("enabled transition");
                let mut next_prob = prob.clone();
                next_prob.push(&step);
                if next_prob.log10 < self.budget.min_log_prob {
                    self.truncated = true;
                    continue;
                }
                let next = self.net.fire(m, t).expect("enabled transition");
                prefix.push(t);
                self.go(&next, prefix, &next_prob);
                prefix.pop();
            }
        }
    }
    let mut walk = Walk {
        net,
        budget,
        out: Vec::new(),
        truncated: false,
    };
    walk.go(start, &mut Vec::new(), &PathProbability::one());
    (walk.out, walk.truncated)
}

/// All model paths of `net` within the budget.
pub fn enumerate_paths(net: &StochasticNet, budget: &EnumerationBudget) -> Enumeration {
    let (raw, truncated) = enumerate_from(net, net.initial_marking(), budget);
    let paths = raw
        .into_iter()
        .map(|(seq, p)| {
            let path = ModelPath::replay(net, &seq).expect("enumerated sequences are model paths");
            (path, p)
        })
        .collect();
    Enumeration { paths, truncated }
}

/// Edit distance with insertions and deletions only: `|a| + |b| - 2·LCS(a, b)`.
pub fn lcs_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> u32 {
    let mut row = vec![0u32; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    (a.len() + b.len()) as u32 - 2 * row[b.len()]
}

#[derive(Debug, Clone)]
pub struct ScoredPath {
    pub path: ModelPath,
    pub distance: u32,
    pub probability: PathProbability,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct OracleBest {
    pub best: ScoredPath,
    /// The enumeration was cut short, so `best` may not be the true optimum.
    pub truncated: bool,
}

fn score_paths(net: &StochasticNet, trace: &[String], e: Enumeration, params: LossParams) -> Vec<ScoredPath> {
    e.paths
        .into_iter()
        .map(|(path, probability)| {
            let distance = lcs_edit_distance(&path.visible_labels(net), trace);
            let loss = loss(distance, probability.log10, params).expect("valid loss inputs");
            ScoredPath {
                path,
                distance,
                probability,
                loss,
            }
        })
        .collect()
}

/// The loss-minimising model path by exhaustion; ties go to the first path in
/// enumeration order. `None` if no path was found within the budget.
pub fn oracle_best(
    net: &StochasticNet,
    trace: &[String],
    alpha: f64,
    budget: &EnumerationBudget,
) -> Result<Option<OracleBest>, crate::loss::LossError> {
    let params = LossParams::new(alpha)?;
    let e = enumerate_paths(net, budget);
    let truncated = e.truncated;
    let scored = score_paths(net, trace, e, params);
    let best = scored
        .into_iter()
        .reduce(|best, p| if p.loss < best.loss { p } else { best });
    let out = best.map(|best| OracleBest { best, truncated });
    if let Some(o) = &out {
        debug_assert!(o.best.loss.is_finite());
    }
    Ok(out)
}

/// Paths not dominated in (smaller distance, larger probability), by
/// ascending distance. Equal pairs are all kept.
pub fn pareto_front(
    net: &StochasticNet,
    trace: &[String],
    budget: &EnumerationBudget,
) -> (Vec<ScoredPath>, bool) {
    let e = enumerate_paths(net, budget);
    let truncated = e.truncated;
    let scored = score_paths(net, trace, e, LossParams::new(1.0).unwrap());
    let dominated = |a: &ScoredPath, b: &ScoredPath| {
        b.distance <= a.distance
            && b.probability.exact >= a.probability.exact
            && (b.distance < a.distance || b.probability.exact > a.probability.exact)
    };
    let mut front: Vec<ScoredPath> = scored
        .iter()
        .filter(|a| !scored.iter().any(|b| dominated(a, b)))
        .cloned()
        .collect();
    front.sort_by(|a, b| {
        a.distance
            .cmp(&b.distance)
            .then(b.probability.exact.cmp(&a.probability.exact))
    });
    (front, truncated)
}

/// Pareto front of `(cost, gain)` over all completions of a product marking
/// to a deadlock, with exact gains. Memoised per marking; the product's
/// reachable graph from `m` must be acyclic.
#[derive(Debug, Default)]
pub struct CompletionOracle {
    memo: HashMap<Marking, Vec<(u32, BigRational)>>,
}

impl CompletionOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn front(&mut self, sp: &SyncProduct, m: &Marking) -> Result<Vec<(u32, BigRational)>, NetError> {
        self.front_at(sp, m, 0)
    }

    fn front_at(
        &mut self,
        sp: &SyncProduct,
        m: &Marking,
        depth: usize,
    ) -> Result<Vec<(u32, BigRational)>, NetError> {
        if let Some(f) = self.memo.get(m) {
            return Ok(f.clone());
        }
        // a cycle would recurse without bound
        assert!(depth <= 10_000, "completion oracle needs an acyclic state graph");
        let enabled = sp.enabled(m);
        let mut cands: Vec<(u32, BigRational)> = Vec::new();
        if enabled.is_empty() {
            cands.push((0, BigRational::one()));
        }
        for t in enabled {
            let gain = sp.probability_gain_exact(m, t)?;
            let cost = sp.move_cost(t);
            let next = sp.fire(m, t)?;
            for (d, p) in self.front_at(sp, &next, depth + 1)? {
                cands.push((d + cost, p * &gain));
            }
        }
        let front = pareto_filter(cands);
        self.memo.insert(m.clone(), front.clone());
        Ok(front)
    }

    /// Smallest remaining cost from `m`.
    pub fn min_cost(&mut self, sp: &SyncProduct, m: &Marking) -> Result<u32, NetError> {
        Ok(self.front(sp, m)?.iter().map(|(d, _)| *d).min().unwrap_or(u32::MAX))
    }

    /// Largest remaining gain from `m`.
    pub fn max_gain(&mut self, sp: &SyncProduct, m: &Marking) -> Result<BigRational, NetError> {
        Ok(self
            .front(sp, m)?
            .into_iter()
            .map(|(_, p)| p)
            .max()
            .unwrap_or_else(|| BigRational::from_integer(0.into())))
    }

    /// Best loss of any completion from `m` given accumulated `(g_d, log g_p)`.
    pub fn best_loss(
        &mut self,
        sp: &SyncProduct,
        m: &Marking,
        g_d: u32,
        log_g_p: f64,
        params: LossParams,
    ) -> Result<f64, NetError> {
        Ok(self
            .front(sp, m)?
            .iter()
            .map(|(d, p)| loss(g_d + d, log_g_p + ratio_log10(p), params).expect("valid loss inputs"))
            .fold(f64::INFINITY, f64::min))
    }
}

fn pareto_filter(mut cands: Vec<(u32, BigRational)>) -> Vec<(u32, BigRational)> {
    // by cost ascending, gain descending; keep strictly improving gains
    cands.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut front: Vec<(u32, BigRational)> = Vec::new();
    for c in cands {
        if front.last().is_none_or(|last| c.1 > last.1) {
            front.push(c);
        }
    }
    front
}
