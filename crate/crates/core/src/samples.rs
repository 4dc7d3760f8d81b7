//! Sample nets and traces: the four-transition running example, plus seeded
//! random generators used by the test suites and the benchmark harness.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::net::{Label, NetBuilder, PlaceId, StochasticNet, TransitionId, Weight};

/// The running example: `t1` (a, weight 1) and `t2` (b, weight 99) compete for
/// the initial token; `t2` forks into the pre-places of `t3` (c, 3) and `t4` (d, 2);
/// `t1` only feeds `t3`.
pub fn running_example() -> StochasticNet {
    let mut b = NetBuilder::new();
    let p = b.add_places(4);
    let w = Weight::from_integer;
    b.add_transition("t1", act("a"), w(1), &[p[0]], &[p[1]]);
    b.add_transition("t2", act("b"), w(99), &[p[0]], &[p[1], p[2]]);
    b.add_transition("t3", act("c"), w(3), &[p[1]], &[p[3]]);
    b.add_transition("t4", act("d"), w(2), &[p[2]], &[p[3]]);
    b.mark(p[0], 1);
    b.build().expect("running example is well formed")
}

/// The running example in the textual model format.
pub const RUNNING_EXAMPLE_SLPN: &str = "\
# running example: a/b choice, b forks into c and d
stochastic labeled petri net
places 4
initial marking
1 0 0 0
transitions 4
label a
weight 1
inputs 0
outputs 1
label b
weight 99
inputs 0
outputs 1 2
label c
weight 3
inputs 1
outputs 3
label d
weight 2
inputs 2
outputs 3
";

pub fn act(a: &str) -> Label {
    Label::Activity(a.to_owned())
}

pub fn trace(s: &[&str]) -> Vec<String> {
    s.iter().map(|a| a.to_string()).collect()
}

/// Block-structured process tree; converted to a sound, bounded net.
#[derive(Debug, Clone)]
pub enum ProcessTree {
    Leaf(Option<String>),
    Seq(Vec<ProcessTree>),
    Xor(Vec<ProcessTree>),
    And(Vec<ProcessTree>),
    /// Body, then repeatedly (redo, body), then exit.
    Loop(Box<ProcessTree>, Box<ProcessTree>),
}

#[derive(Debug, Clone)]
pub struct TreeParams {
    pub leaves: usize,
    pub silent_prob: f64,
    pub allow_and: bool,
    pub allow_loop: bool,
    pub alphabet: Vec<String>,
}

impl TreeParams {
    pub fn small(allow_loop: bool) -> Self {
        Self {
            leaves: 4,
            silent_prob: 0.15,
            allow_and: true,
            allow_loop,
            alphabet: ["a", "b", "c", "d", "e", "f"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn random_tree<R: Rng>(rng: &mut R, params: &TreeParams) -> ProcessTree {
    fn go<R: Rng>(rng: &mut R, leaves: usize, params: &TreeParams) -> ProcessTree {
        if leaves <= 1 {
            if rng.gen_bool(params.silent_prob) {
                return ProcessTree::Leaf(None);
            }
            return ProcessTree::Leaf(params.alphabet.choose(rng).cloned());
        }
        let left = rng.gen_range(1..leaves);
        let a = go(rng, left, params);
        let b = go(rng, leaves - left, params);
        let roll: f64 = rng.gen();
        if params.allow_loop && roll < 0.15 {
            ProcessTree::Loop(Box::new(a), Box::new(b))
        } else if params.allow_and && roll < 0.35 {
            ProcessTree::And(vec![a, b])
        } else if roll < 0.65 {
            ProcessTree::Xor(vec![a, b])
        } else {
            ProcessTree::Seq(vec![a, b])
        }
    }
    go(rng, params.leaves.max(1), params)
}

/// Converts a process tree to a net whose single sink place has no outgoing arcs.
pub fn tree_to_net<R: Rng>(rng: &mut R, tree: &ProcessTree, max_weight: u64) -> StochasticNet {
    struct Ctx<'a, R> {
        b: NetBuilder,
        rng: &'a mut R,
        max_weight: u64,
        places: usize,
        transitions: usize,
    }
    impl<R: Rng> Ctx<'_, R> {
        fn place(&mut self) -> PlaceId {
            self.places += 1;
            self.b.add_place(format!("p{}", self.places))
        }
        fn transition(&mut self, label: Label, i: &[PlaceId], o: &[PlaceId]) -> TransitionId {
            self.transitions += 1;
            let w = Weight::from_integer(self.rng.gen_range(1..=self.max_weight));
            self.b
                .add_transition(format!("t{}", self.transitions), label, w, i, o)
        }
        fn emit(&mut self, tree: &ProcessTree, entry: PlaceId, exit: PlaceId) {
            match tree {
                ProcessTree::Leaf(a) => {
                    let label = a.clone().map(Label::Activity).unwrap_or(Label::Silent);
                    self.transition(label, &[entry], &[exit]);
                }
                ProcessTree::Seq(children) => {
                    let mut cur = entry;
                    for (i, c) in children.iter().enumerate() {
                        let next = if i + 1 == children.len() {
                            exit
                        } else {
                            self.place()
                        };
                        self.emit(c, cur, next);
                        cur = next;
                    }
                }
                ProcessTree::Xor(children) => {
                    for c in children {
                        self.emit(c, entry, exit);
                    }
                }
                ProcessTree::And(children) => {
                    let mut starts = Vec::new();
                    let mut ends = Vec::new();
                    for _ in children {
                        starts.push(self.place());
                        ends.push(self.place());
                    }
                    self.transition(Label::Silent, &[entry], &starts);
                    for (i, c) in children.iter().enumerate() {
                        self.emit(c, starts[i], ends[i]);
                    }
                    self.transition(Label::Silent, &ends, &[exit]);
                }
                ProcessTree::Loop(body, redo) => {
                    let start = self.place();
                    let mid = self.place();
                    self.transition(Label::Silent, &[entry], &[start]);
                    self.emit(body, start, mid);
                    self.emit(redo, mid, start);
                    self.transition(Label::Silent, &[mid], &[exit]);
                }
            }
        }
    }
    let mut ctx = Ctx {
        b: NetBuilder::new(),
        rng,
        max_weight,
        places: 0,
        transitions: 0,
    };
    let source = ctx.place();
    let sink = ctx.place();
    ctx.emit(tree, source, sink);
    ctx.b.mark(source, 1);
    ctx.b.build().expect("generated nets are well formed")
}

#[derive(Debug, Clone, Copy)]
pub struct SizeLimits {
    pub min_places: usize,
    pub max_places: usize,
    pub min_transitions: usize,
    pub max_transitions: usize,
    pub max_silent_ratio: f64,
}

impl SizeLimits {
    pub fn small() -> Self {
        Self {
            min_places: 2,
            max_places: 8,
            min_transitions: 1,
            max_transitions: 8,
            max_silent_ratio: 0.3,
        }
    }

    pub fn admits(&self, net: &StochasticNet) -> bool {
        let silent = net.transitions().iter().filter(|t| t.label.is_silent()).count();
        (self.min_places..=self.max_places).contains(&net.num_places())
            && (self.min_transitions..=self.max_transitions).contains(&net.num_transitions())
            && silent as f64 <= self.max_silent_ratio * net.num_transitions() as f64
    }
}

/// Draws block-structured nets until one fits `limits`.
pub fn random_block_net<R: Rng>(
    rng: &mut R,
    params: &TreeParams,
    limits: &SizeLimits,
    max_weight: u64,
) -> StochasticNet {
    loop {
        let tree = random_tree(rng, params);
        let net = tree_to_net(rng, &tree, max_weight);
        if limits.admits(&net) {
            return net;
        }
    }
}

/// Random acyclic net: every arc goes from a lower-indexed place to a strictly
/// higher-indexed one, so all firing sequences are finite. Joins may deadlock
/// with tokens left behind.
pub fn random_dag_net<R: Rng>(rng: &mut R, limits: &SizeLimits, max_weight: u64) -> StochasticNet {
    let alphabet = ["a", "b", "c", "d", "e"];
    loop {
        let np = rng.gen_range(limits.min_places.max(3)..=limits.max_places);
        let nt = rng.gen_range(limits.min_transitions.max(2)..=limits.max_transitions);
        let max_silent = (limits.max_silent_ratio * nt as f64).floor() as usize;
        let silent = rng.gen_range(0..=max_silent);
        let mut b = NetBuilder::new();
        let p = b.add_places(np);
        for i in 0..nt {
            let first = rng.gen_range(0..np - 1);
            let mut inputs = vec![p[first]];
            if rng.gen_bool(0.3) {
                let second = rng.gen_range(0..np - 1);
                if second != first {
                    inputs.push(p[second]);
                }
            }
            let lowest_out = inputs.iter().map(|q| q.0).max().unwrap() + 1;
            let mut outputs = vec![p[rng.gen_range(lowest_out..np)]];
            if rng.gen_bool(0.3) {
                let q = p[rng.gen_range(lowest_out..np)];
                if !outputs.contains(&q) {
                    outputs.push(q);
                }
            }
            let label = if i < silent {
                Label::Silent
            } else {
                act(alphabet.choose(rng).unwrap())
            };
            let w = Weight::from_integer(rng.gen_range(1..=max_weight));
            b.add_transition(format!("t{}", i + 1), label, w, &inputs, &outputs);
        }
        b.mark(p[0], 1);
        if rng.gen_bool(0.2) {
            b.mark(p[0], 2);
        }
        let net = b.build().expect("generated nets are well formed");
        if limits.admits(&net) {
            return net;
        }
    }
}

/// Simulates the net by weighted choice; `None` if no deadlock within `max_steps`.
pub fn simulate<R: Rng>(rng: &mut R, net: &StochasticNet, max_steps: usize) -> Option<Vec<TransitionId>> {
    let mut m = net.initial_marking().clone();
    let mut path = Vec::new();
    for _ in 0..=max_steps {
        let enabled = net.enabled_transitions(&m);
        if enabled.is_empty() {
            return Some(path);
        }
        let total: f64 = enabled.iter().map(|t| net.weight(*t).value()).sum();
        let mut roll = rng.gen::<f64>() * total;
        let mut pick = *enabled.last().unwrap();
        for t in &enabled {
            roll -= net.weight(*t).value();
            if roll <= 0.0 {
                pick = *t;
                break;
            }
        }
        m = net.fire_unchecked(&m, pick);
        path.push(pick);
    }
    None
}

/// Applies per-event noise with probability `noise`: deletion, replacement, or
/// insertion of a random activity (possibly one unknown to the model).
pub fn add_noise<R: Rng>(rng: &mut R, trace: &[String], alphabet: &[String], noise: f64) -> Vec<String> {
    let mut pool: Vec<String> = alphabet.to_vec();
    pool.push("x".to_owned());
    let mut out = Vec::with_capacity(trace.len() + 2);
    for a in trace {
        if !rng.gen_bool(noise) {
            out.push(a.clone());
            continue;
        }
        match rng.gen_range(0..3) {
            0 => {}
            1 => out.push(pool.choose(rng).unwrap().clone()),
            _ => {
                out.push(a.clone());
                out.push(pool.choose(rng).unwrap().clone());
            }
        }
    }
    out
}

/// A noisy trace derived from one simulated model path, cut to `max_len`.
pub fn random_trace<R: Rng>(rng: &mut R, net: &StochasticNet, max_len: usize, noise: f64) -> Vec<String> {
    let labels: Vec<String> = simulate(rng, net, 200)
        .map(|path| {
            path.iter()
                .filter_map(|t| net.label(*t).activity().map(str::to_owned))
                .collect()
        })
        .unwrap_or_default();
    let mut t = add_noise(rng, &labels, &net.alphabet(), noise);
    t.truncate(max_len);
    t
}

/// A trace of exactly `len` events: the prefix of a simulated run at least
/// that long (the model then has to finish the run with model moves). Runs
/// are concatenated only if no single run gets long enough.
pub fn fixed_length_trace<R: Rng>(rng: &mut R, net: &StochasticNet, len: usize, noise: f64) -> Vec<String> {
    let visible = |path: Vec<TransitionId>| -> Vec<String> {
        path.iter()
            .filter_map(|t| net.label(*t).activity().map(str::to_owned))
            .collect()
    };
    let alphabet = net.alphabet();
    let mut labels: Vec<String> = Vec::new();
    for _ in 0..2000 {
        if let Some(path) = simulate(rng, net, 10 * len) {
            let run = visible(path);
            if run.len() >= len {
                labels = run;
                break;
            }
        }
    }
    let mut attempts = 0;
    while labels.len() < len && attempts < 1000 {
        attempts += 1;
        if let Some(path) = simulate(rng, net, 10 * len) {
            labels.extend(visible(path));
        }
    }
    while labels.len() < len {
        labels.push(alphabet.choose(rng).cloned().unwrap_or_else(|| "x".into()));
    }
    labels.truncate(len);
    for a in labels.iter_mut() {
        if rng.gen_bool(noise) {
            *a = alphabet.choose(rng).cloned().unwrap_or_else(|| "x".into());
        }
    }
    labels
}

/// Desk-scale benchmark net: a block-structured body inside an outer loop,
/// 28–32 places and 38–42 transitions.
pub fn benchmark_net<R: Rng>(rng: &mut R) -> StochasticNet {
    let alphabet: Vec<String> = (0..16).map(|i| format!("a{i}")).collect();
    let params = TreeParams {
        leaves: 22,
        silent_prob: 0.05,
        allow_and: true,
        allow_loop: true,
        alphabet,
    };
    let limits = SizeLimits {
        min_places: 28,
        max_places: 32,
        min_transitions: 38,
        max_transitions: 42,
        max_silent_ratio: 0.45,
    };
    loop {
        let body = random_tree(rng, &params);
        let tree = ProcessTree::Loop(Box::new(body), Box::new(ProcessTree::Leaf(None)));
        let net = tree_to_net(rng, &tree, 10);
        if limits.admits(&net) {
            return net;
        }
    }
}
