//! Best-first search over product markings.
//!
//! Nodes are scored by `f = loss(g_d + h_d, g_p · h_p)`. Because the loss mixes
//! two accumulators, a marking may be reached with several incomparable
//! `(g_d, log g_p)` pairs; all of them stay alive and only dominated arrivals
//! are dropped. The search stops at the first deadlock taken off the queue.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::num::NonZeroUsize;
use std::rc::Rc;
use std::time::{Duration, Instant};

use lru::LruCache;
use thiserror::Error;

use crate::alignment::Alignment;
use crate::heuristics::{gain_value, HeuristicConfig, HeuristicResult, HeuristicStatus, Heuristics};
use crate::loss::{f_score, loss, LossError, LossParams};
use crate::net::{Marking, StochasticNet, TransitionId};
use crate::product::{build_sync_product, SyncProduct};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub node_budget: usize,
    pub cache_size: usize,
    pub heuristic: HeuristicConfig,
    /// Log every expanded node with its scores.
    pub record_expansions: bool,
    /// Pairs closer than this in `log g_p` count as equal for dominance.
    pub dominance_tolerance: f64,
    /// When a parent's optimal solution fires the move taken, derive the
    /// child's bound from it (exactly) instead of solving again.
    pub reuse_parent_solutions: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            node_budget: 5_000_000,
            cache_size: 100_000,
            heuristic: HeuristicConfig::default(),
            record_expansions: false,
            dominance_tolerance: 1e-12,
            reuse_parent_solutions: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("no deadlock marking is reachable in the product (expanded {expanded} nodes)")]
    NoDeadlockReachable { expanded: usize },
    #[error("node budget of {budget} exceeded")]
    BudgetExceeded {
        budget: usize,
        /// Best complete alignment generated before giving up.
        incumbent: Option<Box<Alignment>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchNode {
    /// Interned marking, see [`Search::marking`].
    pub state: usize,
    pub g_d: u32,
    pub log_g_p: f64,
    pub f: f64,
    pub parent: Option<(usize, TransitionId)>,
    pub seq: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionRecord {
    pub marking: Marking,
    pub g_d: u32,
    pub log_g_p: f64,
    pub h_d: f64,
    pub log_h_p: f64,
    pub f: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub pruned: usize,
    pub heuristic_solves: usize,
    /// Bounds derived from a parent's solution without solving.
    pub heuristic_reuses: usize,
    pub cache_hits: usize,
    pub distinct_markings: usize,
    pub runtime: Duration,
    /// Largest `f` taken off the queue.
    pub max_dequeued_f: f64,
    pub expansions: Vec<ExpansionRecord>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub alignment: Alignment,
    pub stats: SearchStats,
}

/// Non-dominated `(g_d, log g_p)` pairs seen per marking.
#[derive(Debug, Default)]
pub struct DominanceStore {
    pairs: HashMap<usize, Vec<(u32, f64)>>,
    tolerance: f64,
}

impl DominanceStore {
    pub fn new(tolerance: f64) -> Self {
        Self {
            pairs: HashMap::new(),
            tolerance,
        }
    }

    fn dominates(&self, a: (u32, f64), b: (u32, f64)) -> bool {
        a.0 <= b.0 && a.1 >= b.1 - self.tolerance
    }

    /// Records the pair unless something stored already dominates or equals it;
    /// returns whether it was recorded.
    pub fn insert(&mut self, state: usize, pair: (u32, f64)) -> bool {
        let tol = self.tolerance;
        let entry = self.pairs.entry(state).or_default();
        if entry
            .iter()
            .any(|q| q.0 <= pair.0 && q.1 >= pair.1 - tol)
        {
            return false;
        }
        entry.retain(|q| !(pair.0 <= q.0 && pair.1 >= q.1 - tol));
        entry.push(pair);
        true
    }

    /// Whether the pair is still on the front (it may have been displaced by a
    /// later, better arrival).
    pub fn contains(&self, state: usize, pair: (u32, f64)) -> bool {
        self.pairs
            .get(&state)
            .is_some_and(|v| v.iter().any(|q| q.0 == pair.0 && q.1 == pair.1))
    }

    pub fn front(&self, state: usize) -> &[(u32, f64)] {
        self.pairs.get(&state).map_or(&[], Vec::as_slice)
    }

    pub fn is_antichain(&self, state: usize) -> bool {
        let v = self.front(state);
        v.iter().enumerate().all(|(i, a)| {
            v.iter()
                .enumerate()
                .all(|(j, b)| i == j || !self.dominates(*a, *b))
        })
    }
}

#[derive(Debug, PartialEq)]
struct QueueEntry {
    f: f64,
    g_d: u32,
    seq: usize,
    node: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    // BinaryHeap pops the greatest: smallest f, then largest g_d, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g_d.cmp(&other.g_d))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// An optimal solution kept for reuse by children: raw objective and the
/// sparse Parikh vector.
#[derive(Debug, Clone)]
struct Solution {
    objective: f64,
    parikh: Rc<[(u32, u32)]>,
}

impl Solution {
    fn from_result(r: &HeuristicResult) -> Option<Self> {
        r.exact_hint.then(|| Self {
            objective: r.objective,
            parikh: r
                .parikh
                .iter()
                .enumerate()
                .filter(|(_, x)| **x > 0)
                .map(|(t, x)| (t as u32, *x))
                .collect(),
        })
    }

    /// The solution after firing `t` once, if it fires `t` at all.
    fn after(&self, t: TransitionId, coefficient: f64) -> Option<Self> {
        let i = self.parikh.iter().position(|(u, _)| *u as usize == t.0)?;
        let mut parikh = self.parikh.to_vec();
        if parikh[i].1 == 1 {
            parikh.remove(i);
        } else {
            parikh[i].1 -= 1;
        }
        Some(Self {
            objective: self.objective - coefficient,
            parikh: parikh.into(),
        })
    }
}

#[derive(Debug, Clone)]
struct HeuristicEntry {
    h_d: f64,
    log_h_p: f64,
    distance: Option<Solution>,
    gain: Option<Solution>,
}

/// State of one search over a fixed product.
pub struct Search<'a> {
    sp: &'a SyncProduct,
    heuristics: Heuristics,
    params: LossParams,
    config: SearchConfig,
    markings: Vec<Marking>,
    index: HashMap<Marking, usize>,
    nodes: Vec<SearchNode>,
    store: DominanceStore,
    cache: LruCache<usize, HeuristicEntry>,
    stats: SearchStats,
    initial_fallback: bool,
}

impl<'a> Search<'a> {
    pub fn new(sp: &'a SyncProduct, params: LossParams, config: SearchConfig) -> Self {
        let cap = NonZeroUsize::new(config.cache_size.max(1)).unwrap();
        Self {
            sp,
            heuristics: Heuristics::new(sp, config.heuristic.clone()),
            params,
            store: DominanceStore::new(config.dominance_tolerance),
            config,
            markings: Vec::new(),
            index: HashMap::new(),
            nodes: Vec::new(),
            cache: LruCache::new(cap),
            stats: SearchStats {
                max_dequeued_f: f64::NEG_INFINITY,
                ..SearchStats::default()
            },
            initial_fallback: false,
        }
    }

    pub fn marking(&self, state: usize) -> &Marking {
        &self.markings[state]
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn heuristics(&self) -> &Heuristics {
        &self.heuristics
    }

    fn intern(&mut self, m: Marking) -> usize {
        if let Some(&id) = self.index.get(&m) {
            return id;
        }
        let id = self.markings.len();
        self.index.insert(m.clone(), id);
        self.markings.push(m);
        id
    }

    /// `(h_d, log h_p)` at an interned marking; only the bounds the loss
    /// actually uses are solved for.
    pub fn heuristic(&mut self, state: usize) -> (f64, f64) {
        let e = self.entry(state, None);
        (e.h_d, e.log_h_p)
    }

    /// Heuristic entry for `state`, reached from `via = (parent state, move)`.
    fn entry(&mut self, state: usize, via: Option<(usize, TransitionId)>) -> HeuristicEntry {
        if let Some(h) = self.cache.get(&state) {
            self.stats.cache_hits += 1;
            return h.clone();
        }
        let m = &self.markings[state];
        if self.sp.is_deadlock(m) {
            let e = HeuristicEntry {
                h_d: 0.0,
                log_h_p: 0.0,
                distance: None,
                gain: None,
            };
            self.cache.put(state, e.clone());
            return e;
        }
        let parent = match via {
            Some((p, t)) if self.config.reuse_parent_solutions => {
                self.cache.peek(&p).cloned().map(|e| (e, t))
            }
            _ => None,
        };

        let mut distance = None;
        let mut h_d = 0.0;
        if self.params.uses_distance() {
            let derived = parent.as_ref().and_then(|(e, t)| {
                e.distance
                    .as_ref()
                    .and_then(|s| s.after(*t, self.heuristics.costs()[t.0]))
            });
            if let Some(sol) = derived {
                self.stats.heuristic_reuses += 1;
                h_d = sol.objective.round().max(0.0);
                distance = Some(sol);
            } else {
                self.stats.heuristic_solves += 1;
                let r = self.heuristics.edit_distance(&self.markings[state]);
                h_d = r.value;
                distance = Solution::from_result(&r);
            }
        }
        let mut gain = None;
        let mut log_h_p = 0.0;
        if self.params.uses_probability() {
            let derived = parent.as_ref().and_then(|(e, t)| {
                e.gain
                    .as_ref()
                    .and_then(|s| s.after(*t, self.heuristics.log_gain_bounds()[t.0]))
            });
            if let Some(sol) = derived {
                self.stats.heuristic_reuses += 1;
                log_h_p = gain_value(sol.objective);
                gain = Some(sol);
            } else {
                self.stats.heuristic_solves += 1;
                let r = self.heuristics.probability_gain(&self.markings[state]);
                log_h_p = r.value;
                gain = Solution::from_result(&r);
            }
        }
        let e = HeuristicEntry {
            h_d,
            log_h_p,
            distance,
            gain,
        };
        self.cache.put(state, e.clone());
        e
    }

    fn score(
        &mut self,
        state: usize,
        via: Option<(usize, TransitionId)>,
        g_d: u32,
        log_g_p: f64,
    ) -> (f64, f64, f64) {
        let HeuristicEntry { h_d, log_h_p, .. } = self.entry(state, via);
        let f = f_score(f64::from(g_d), h_d, log_g_p, log_h_p, self.params)
            .expect("accumulated log probability is <= 0");
        (h_d, log_h_p, f)
    }

    fn push_node(&mut self, node: SearchNode) -> usize {
        let id = self.nodes.len();
        self.nodes.push(node);
        id
    }

    fn root(&mut self) -> SearchNode {
        let state = self.intern(self.sp.initial_marking().clone());
        self.initial_fallback = self.params.uses_distance()
            && !self.sp.is_deadlock(&self.markings[state])
            && self.heuristics.edit_distance(&self.markings[state]).status
                == HeuristicStatus::Fallback;
        let (_, _, f) = self.score(state, None, 0, 0.0);
        self.store.insert(state, (0, 0.0));
        SearchNode {
            state,
            g_d: 0,
            log_g_p: 0.0,
            f,
            parent: None,
            seq: 0,
        }
    }

    /// Children of `node` (stored under id `node_id`) over every enabled
    /// product transition, minus arrivals dominated at their marking.
    pub fn expand(&mut self, node_id: usize) -> Vec<SearchNode> {
        let node = self.nodes[node_id];
        let m = self.markings[node.state].clone();
        let enabled = self.sp.enabled(&m);
        assert!(!enabled.is_empty(), "expand called on a deadlock marking");
        let mut children = Vec::with_capacity(enabled.len());
        for t in enabled {
            let g_d = node.g_d + self.sp.move_cost(t);
            let log_g_p = node.log_g_p + self.sp.gain_unchecked(&m, t).log10();
            let next = self.sp.fire_unchecked(&m, t);
            let state = self.intern(next);
            self.stats.generated += 1;
            if !self.store.insert(state, (g_d, log_g_p)) {
                self.stats.pruned += 1;
                continue;
            }
            let (_, _, f) = self.score(state, Some((node.state, t)), g_d, log_g_p);
            children.push(SearchNode {
                state,
                g_d,
                log_g_p,
                f,
                parent: Some((node_id, t)),
                seq: self.nodes.len() + children.len(),
            });
        }
        children
    }

    fn firing_sequence(&self, mut id: usize) -> Vec<TransitionId> {
        let mut seq = Vec::new();
        while let Some((parent, t)) = self.nodes[id].parent {
            seq.push(t);
            id = parent;
        }
        seq.reverse();
        seq
    }

    fn alignment_of(&self, id: usize) -> Alignment {
        Alignment::from_firing_sequence(self.sp, &self.firing_sequence(id), self.params)
            .expect("search nodes replay in the product")
    }

    pub fn run(mut self) -> Result<SearchOutcome, SearchError> {
        let start = Instant::now();
        let root = self.root();
        let root_id = self.push_node(root);
        let mut queue = BinaryHeap::new();
        queue.push(QueueEntry {
            f: root.f,
            g_d: 0,
            seq: 0,
            node: root_id,
        });
        // best complete alignment generated so far: (loss, node)
        let mut incumbent: Option<(f64, usize)> = None;

        while let Some(entry) = queue.pop() {
            let node = self.nodes[entry.node];
            if !self.store.contains(node.state, (node.g_d, node.log_g_p)) {
                continue;
            }
            self.stats.max_dequeued_f = self.stats.max_dequeued_f.max(node.f);
            if self.sp.is_deadlock(&self.markings[node.state]) {
                let alignment = self.alignment_of(entry.node);
                self.stats.distinct_markings = self.markings.len();
                self.stats.runtime = start.elapsed();
                return Ok(SearchOutcome {
                    alignment,
                    stats: self.stats,
                });
            }
            if self.stats.expanded >= self.config.node_budget {
                return Err(self.give_up(incumbent.map(|(_, id)| id)));
            }
            self.stats.expanded += 1;
            if self.config.record_expansions {
                let (h_d, log_h_p) = self.heuristic(node.state);
                self.stats.expansions.push(ExpansionRecord {
                    marking: self.markings[node.state].clone(),
                    g_d: node.g_d,
                    log_g_p: node.log_g_p,
                    h_d,
                    log_h_p,
                    f: node.f,
                });
            }
            for child in self.expand(entry.node) {
                let id = self.push_node(child);
                if self.sp.is_deadlock(&self.markings[child.state]) {
                    let l = loss(child.g_d, child.log_g_p, self.params)?;
                    if incumbent.is_none_or(|(best, _)| l < best) {
                        incumbent = Some((l, id));
                    }
                }
                queue.push(QueueEntry {
                    f: child.f,
                    g_d: child.g_d,
                    seq: child.seq,
                    node: id,
                });
            }
        }
        Err(SearchError::NoDeadlockReachable {
            expanded: self.stats.expanded,
        })
    }

    fn give_up(&self, incumbent: Option<usize>) -> SearchError {
        if incumbent.is_none() && self.initial_fallback {
            return SearchError::NoDeadlockReachable {
                expanded: self.stats.expanded,
            };
        }
        SearchError::BudgetExceeded {
            budget: self.config.node_budget,
            incumbent: incumbent.map(|id| Box::new(self.alignment_of(id))),
        }
    }
}

/// Optimal stochastic alignment of `trace` against `net` under balance factor `alpha`.
pub fn stochastic_alignment(
    net: &StochasticNet,
    trace: &[String],
    alpha: f64,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let params = LossParams::new(alpha)?;
    let sp = build_sync_product(trace, net);
    align_product(&sp, params, config)
}

/// As [`stochastic_alignment`], reusing an already built product.
pub fn align_product(
    sp: &SyncProduct,
    params: LossParams,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    Search::new(sp, params, config.clone()).run()
}
