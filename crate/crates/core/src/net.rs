//! Stochastic labeled Petri nets: markings, enabling, firing, deadlocks,
//! trace nets, consumption/incidence matrices and path probabilities.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::multiset::Multiset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("transition {0} is not enabled")]
    NotEnabled(usize),
    #[error("transition index {0} out of range")]
    UnknownTransition(usize),
    #[error("place index {0} out of range")]
    UnknownPlace(usize),
    #[error("weight of transition {0} must be strictly positive")]
    NonPositiveWeight(usize),
    #[error("initial marking is empty")]
    EmptyInitialMarking,
    #[error("arc weight must be at least 1 (transition {0})")]
    ZeroArcWeight(usize),
    #[error("marking has {got} entries, net has {expected} places")]
    MarkingSize { expected: usize, got: usize },
    #[error("path does not end in a deadlock marking")]
    NotDeadlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionId(pub usize);

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Activity(String),
    Silent,
}

impl Label {
    pub fn activity(&self) -> Option<&str> {
        match self {
            Label::Activity(a) => Some(a),
            Label::Silent => None,
        }
    }

    pub fn is_silent(&self) -> bool {
        matches!(self, Label::Silent)
    }
}

/// A strictly positive transition weight, kept exactly and as a float.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    exact: BigRational,
    approx: f64,
}

impl Weight {
    pub fn from_ratio(exact: BigRational) -> Self {
        let approx = exact.to_f64().unwrap_or(f64::NAN);
        Self { exact, approx }
    }

    pub fn from_integer(w: u64) -> Self {
        Self::from_ratio(BigRational::from_integer(BigInt::from(w)))
    }

    /// Converts a float weight; the binary expansion is kept exactly.
    pub fn from_f64(w: f64) -> Option<Self> {
        BigRational::from_float(w).map(Self::from_ratio)
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn value(&self) -> f64 {
        self.approx
    }

    pub fn is_positive(&self) -> bool {
        self.exact.is_positive()
    }
}

/// Token counts over the places of one net, indexed densely by place.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(Vec<u32>);

impl Marking {
    pub fn empty(places: usize) -> Self {
        Self(vec![0; places])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn from_multiset(places: usize, m: &Multiset<PlaceId>) -> Result<Self, NetError> {
        let mut out = vec![0u32; places];
        for (p, c) in m.iter() {
            let slot = out.get_mut(p.0).ok_or(NetError::UnknownPlace(p.0))?;
            *slot = c as u32;
        }
        Ok(Self(out))
    }

    pub fn to_multiset(&self) -> Multiset<PlaceId> {
        Multiset::from_counts(
            self.0
                .iter()
                .enumerate()
                .map(|(p, c)| (PlaceId(p), u64::from(*c))),
        )
    }

    pub fn tokens(&self, p: PlaceId) -> u32 {
        self.0[p.0]
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|c| u64::from(*c)).sum()
    }
}

impl fmt::Debug for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        let mut first = true;
        for (p, c) in self.0.iter().enumerate().filter(|(_, c)| **c > 0) {
            if !first {
                write!(f, ",")?;
            }
            first = false;
            write!(f, "p{p}^{c}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub name: String,
    pub label: Label,
    pub weight: Weight,
    /// Preset as (place, arc weight), sorted by place, arc weights >= 1.
    pub inputs: Vec<(PlaceId, u32)>,
    pub outputs: Vec<(PlaceId, u32)>,
}

/// Either endpoint pair of the flow relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arc {
    PlaceToTransition(PlaceId, TransitionId),
    TransitionToPlace(TransitionId, PlaceId),
}

/// A stochastic labeled Petri net. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticNet {
    place_names: Vec<String>,
    transitions: Vec<Transition>,
    initial: Marking,
}

/// Incrementally assembles a [`StochasticNet`].
#[derive(Debug, Default)]
pub struct NetBuilder {
    place_names: Vec<String>,
    transitions: Vec<Transition>,
    initial: Vec<u32>,
}

fn collapse_arcs(places: &[PlaceId]) -> Vec<(PlaceId, u32)> {
    let ms: Multiset<PlaceId> = places.iter().copied().collect();
    ms.iter().map(|(p, c)| (*p, c as u32)).collect()
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_place(&mut self, name: impl Into<String>) -> PlaceId {
        self.place_names.push(name.into());
        self.initial.push(0);
        PlaceId(self.place_names.len() - 1)
    }

    pub fn add_places(&mut self, n: usize) -> Vec<PlaceId> {
        (0..n)
            .map(|_| {
                let i = self.place_names.len();
                self.add_place(format!("p{}", i + 1))
            })
            .collect()
    }

    /// Adds a transition; repeated places in `inputs`/`outputs` become arc weights.
    pub fn add_transition(
        &mut self,
        name: impl Into<String>,
        label: Label,
        weight: Weight,
        inputs: &[PlaceId],
        outputs: &[PlaceId],
    ) -> TransitionId {
        self.transitions.push(Transition {
            name: name.into(),
            label,
            weight,
            inputs: collapse_arcs(inputs),
            outputs: collapse_arcs(outputs),
        });
        TransitionId(self.transitions.len() - 1)
    }

    pub fn mark(&mut self, p: PlaceId, tokens: u32) {
        self.initial[p.0] = tokens;
    }

    pub fn build(self) -> Result<StochasticNet, NetError> {
        StochasticNet::new(self.place_names, self.transitions, Marking(self.initial))
    }
}

impl StochasticNet {
    pub fn new(
        place_names: Vec<String>,
        transitions: Vec<Transition>,
        initial: Marking,
    ) -> Result<Self, NetError> {
        if initial.len() != place_names.len() {
            return Err(NetError::MarkingSize {
                expected: place_names.len(),
                got: initial.len(),
            });
        }
        if initial.total() == 0 {
            return Err(NetError::EmptyInitialMarking);
        }
        for (i, t) in transitions.iter().enumerate() {
            if !t.weight.is_positive() {
                return Err(NetError::NonPositiveWeight(i));
            }
            for (p, w) in t.inputs.iter().chain(t.outputs.iter()) {
                if p.0 >= place_names.len() {
                    return Err(NetError::UnknownPlace(p.0));
                }
                if *w == 0 {
                    return Err(NetError::ZeroArcWeight(i));
                }
            }
        }
        Ok(Self {
            place_names,
            transitions,
            initial,
        })
    }

    pub fn num_places(&self) -> usize {
        self.place_names.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.place_names[p.0]
    }

    pub fn place_names(&self) -> &[String] {
        &self.place_names
    }

    pub fn transition(&self, t: TransitionId) -> &Transition {
        &self.transitions[t.0]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition_ids(&self) -> impl Iterator<Item = TransitionId> {
        (0..self.transitions.len()).map(TransitionId)
    }

    pub fn label(&self, t: TransitionId) -> &Label {
        &self.transitions[t.0].label
    }

    pub fn weight(&self, t: TransitionId) -> &Weight {
        &self.transitions[t.0].weight
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    /// The flow relation as a multiset of arcs.
    pub fn flow(&self) -> Multiset<Arc> {
        let mut f = Multiset::new();
        for (i, t) in self.transitions.iter().enumerate() {
            for (p, w) in &t.inputs {
                f.insert(Arc::PlaceToTransition(*p, TransitionId(i)), u64::from(*w));
            }
            for (p, w) in &t.outputs {
                f.insert(Arc::TransitionToPlace(TransitionId(i), *p), u64::from(*w));
            }
        }
        f
    }

    /// Distinct activities, in first-occurrence order.
    pub fn alphabet(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.transitions {
            if let Label::Activity(a) = &t.label {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
        }
        out
    }

    fn check_marking(&self, m: &Marking) -> Result<(), NetError> {
        if m.len() != self.num_places() {
            return Err(NetError::MarkingSize {
                expected: self.num_places(),
                got: m.len(),
            });
        }
        Ok(())
    }

    pub fn is_enabled(&self, m: &Marking, t: TransitionId) -> bool {
        self.transitions[t.0]
            .inputs
            .iter()
            .all(|(p, w)| m.0[p.0] >= *w)
    }

    pub fn enabled_transitions(&self, m: &Marking) -> Vec<TransitionId> {
        self.transition_ids()
            .filter(|t| self.is_enabled(m, *t))
            .collect()
    }

    pub fn is_deadlock(&self, m: &Marking) -> bool {
        !self.transition_ids().any(|t| self.is_enabled(m, t))
    }

    /// `(m ∖ •t) ⊎ t•`.
    pub fn fire(&self, m: &Marking, t: TransitionId) -> Result<Marking, NetError> {
        self.check_marking(m)?;
        if t.0 >= self.num_transitions() {
            return Err(NetError::UnknownTransition(t.0));
        }
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled(t.0));
        }
        Ok(self.fire_unchecked(m, t))
    }

    pub(crate) fn fire_unchecked(&self, m: &Marking, t: TransitionId) -> Marking {
        let tr = &self.transitions[t.0];
        let mut out = m.0.clone();
        for (p, w) in &tr.inputs {
            out[p.0] -= w;
        }
        for (p, w) in &tr.outputs {
            out[p.0] += w;
        }
        Marking(out)
    }

    fn enabled_weight_sum(&self, m: &Marking) -> f64 {
        self.transition_ids()
            .filter(|t| self.is_enabled(m, *t))
            .map(|t| self.transitions[t.0].weight.approx)
            .sum()
    }

    /// Firing probability `w(t) / Σ w(enabled)`.
    pub fn transition_probability(&self, m: &Marking, t: TransitionId) -> Result<f64, NetError> {
        self.check_marking(m)?;
        if t.0 >= self.num_transitions() {
            return Err(NetError::UnknownTransition(t.0));
        }
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled(t.0));
        }
        Ok(self.transitions[t.0].weight.approx / self.enabled_weight_sum(m))
    }

    pub fn transition_probability_exact(
        &self,
        m: &Marking,
        t: TransitionId,
    ) -> Result<BigRational, NetError> {
        self.check_marking(m)?;
        if t.0 >= self.num_transitions() {
            return Err(NetError::UnknownTransition(t.0));
        }
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled(t.0));
        }
        let total = self
            .transition_ids()
            .filter(|u| self.is_enabled(m, *u))
            .fold(BigRational::zero(), |acc, u| {
                acc + &self.transitions[u.0].weight.exact
            });
        Ok(&self.transitions[t.0].weight.exact / total)
    }

    pub fn matrices(&self) -> Matrices {
        let (np, nt) = (self.num_places(), self.num_transitions());
        let mut consumption = vec![vec![0i64; nt]; np];
        let mut incidence = vec![vec![0i64; nt]; np];
        for (j, t) in self.transitions.iter().enumerate() {
            for (p, w) in &t.inputs {
                incidence[p.0][j] -= i64::from(*w);
            }
            for (p, w) in &t.outputs {
                incidence[p.0][j] += i64::from(*w);
            }
            for (p, w) in &t.inputs {
                if !t.outputs.iter().any(|(q, _)| q == p) {
                    consumption[p.0][j] = -i64::from(*w);
                }
            }
        }
        Matrices {
            consumption,
            incidence,
        }
    }
}

/// Consumption and incidence matrices, `|P|` rows by `|T|` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrices {
    pub consumption: Vec<Vec<i64>>,
    pub incidence: Vec<Vec<i64>>,
}

impl Matrices {
    pub fn consumption(&self, p: PlaceId, t: TransitionId) -> i64 {
        self.consumption[p.0][t.0]
    }

    pub fn incidence(&self, p: PlaceId, t: TransitionId) -> i64 {
        self.incidence[p.0][t.0]
    }
}

/// A firing sequence from the initial marking to a deadlock marking.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPath {
    transitions: Vec<TransitionId>,
    markings: Vec<Marking>,
}

impl ModelPath {
    /// Replays `transitions` from the initial marking, requiring each step to be
    /// enabled and the final marking to be a deadlock.
    pub fn replay(net: &StochasticNet, transitions: &[TransitionId]) -> Result<Self, NetError> {
        let mut markings = vec![net.initial_marking().clone()];
        for t in transitions {
            let next = net.fire(markings.last().unwrap(), *t)?;
            markings.push(next);
        }
        if !net.is_deadlock(markings.last().unwrap()) {
            return Err(NetError::NotDeadlocked);
        }
        Ok(Self {
            transitions: transitions.to_vec(),
            markings,
        })
    }

    pub fn transitions(&self) -> &[TransitionId] {
        &self.transitions
    }

    pub fn markings(&self) -> &[Marking] {
        &self.markings
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Labels of the non-silent transitions, in order.
    pub fn visible_labels(&self, net: &StochasticNet) -> Vec<String> {
        self.transitions
            .iter()
            .filter_map(|t| net.label(*t).activity().map(str::to_owned))
            .collect()
    }
}

/// A path probability held exactly and as a base-10 logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProbability {
    pub exact: BigRational,
    pub log10: f64,
}

impl PathProbability {
    pub fn one() -> Self {
        Self {
            exact: BigRational::one(),
            log10: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.exact.to_f64().unwrap_or(0.0)
    }

    /// Multiplies in one step factor.
    pub fn push(&mut self, factor: &BigRational) {
        self.exact *= factor;
        self.log10 += ratio_log10(factor);
    }
}

/// `log10` of a positive rational without going through a possibly
/// underflowing float quotient.
pub fn ratio_log10(r: &BigRational) -> f64 {
    fn big_log10(b: &BigInt) -> f64 {
        let bits = b.bits();
        if bits < 1000 {
            b.to_f64().unwrap().log10()
        } else {
            let shift = bits - 900;
            let top: BigInt = b >> shift;
            top.to_f64().unwrap().log10() + shift as f64 * std::f64::consts::LOG10_2
        }
    }
    big_log10(r.numer()) - big_log10(r.denom())
}

/// Probability of a model path: the product of its stepwise firing probabilities.
pub fn path_probability(net: &StochasticNet, path: &ModelPath) -> PathProbability {
    let mut prob = PathProbability::one();
    for (t, m) in path.transitions.iter().zip(path.markings.iter()) {
        let step = net
            .transition_probability_exact(m, *t)
            .expect("model path steps are enabled");
        prob.push(&step);
    }
    prob
}

/// Validates `transitions` as a model path and returns its probability.
pub fn path_probability_of(
    net: &StochasticNet,
    transitions: &[TransitionId],
) -> Result<PathProbability, NetError> {
    let path = ModelPath::replay(net, transitions)?;
    Ok(path_probability(net, &path))
}

/// Chain-shaped net of a trace: `|σ|+1` places, one transition per event.
pub fn build_trace_net(trace: &[String]) -> StochasticNet {
    let mut b = NetBuilder::new();
    let places: Vec<PlaceId> = (0..=trace.len())
        .map(|i| b.add_place(format!("s{i}")))
        .collect();
    for (i, a) in trace.iter().enumerate() {
        b.add_transition(
            format!("e{}", i + 1),
            Label::Activity(a.clone()),
            Weight::from_integer(1),
            &[places[i]],
            &[places[i + 1]],
        );
    }
    b.mark(places[0], 1);
    b.build().expect("trace nets are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::running_example;

    fn t(i: usize) -> TransitionId {
        TransitionId(i)
    }

    fn marking(net: &StochasticNet, tokens: &[(usize, u32)]) -> Marking {
        let mut m = Marking::empty(net.num_places());
        for (p, c) in tokens {
            m.0[*p] = *c;
        }
        m
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn enabled_at_initial_and_deadlock() {
        let net = running_example();
        assert_eq!(net.enabled_transitions(net.initial_marking()), vec![t(0), t(1)]);
        assert!(net.enabled_transitions(&Marking::empty(4)).is_empty());
        let end = marking(&net, &[(3, 1)]);
        assert!(net.enabled_transitions(&end).is_empty());
        assert!(net.is_deadlock(&end));
    }

    #[test]
    fn firing_follows_the_structure() {
        let net = running_example();
        let m0 = net.initial_marking();
        let after_t2 = net.fire(m0, t(1)).unwrap();
        assert_eq!(net.enabled_transitions(&after_t2), vec![t(2), t(3)]);
        assert_eq!(after_t2.total(), 2);
        let after_t1 = net.fire(m0, t(0)).unwrap();
        let end = net.fire(&after_t1, t(2)).unwrap();
        assert_eq!(end, marking(&net, &[(3, 1)]));
        assert_eq!(net.fire(m0, t(2)), Err(NetError::NotEnabled(2)));
    }

    #[test]
    fn self_loop_preserves_token() {
        let mut b = NetBuilder::new();
        let p = b.add_place("p");
        let tt = b.add_transition("t", Label::Silent, Weight::from_integer(1), &[p], &[p]);
        b.mark(p, 1);
        let net = b.build().unwrap();
        let m = net.initial_marking().clone();
        assert_eq!(net.fire(&m, tt).unwrap(), m);
        let mx = net.matrices();
        assert_eq!(mx.consumption(p, tt), 0);
        assert_eq!(mx.incidence(p, tt), 0);
    }

    #[test]
    fn transition_probabilities() {
        let net = running_example();
        let m0 = net.initial_marking();
        assert_eq!(net.transition_probability_exact(m0, t(1)).unwrap(), ratio(99, 100));
        let after_t1 = net.fire(m0, t(0)).unwrap();
        assert_eq!(net.transition_probability(&after_t1, t(2)).unwrap(), 1.0);
        let after_t2 = net.fire(m0, t(1)).unwrap();
        // weights 3 and 2 are the only enabled ones
        let expected = 3.0 / (3.0 + 2.0);
        assert_eq!(net.transition_probability_exact(&after_t2, t(2)).unwrap(), ratio(3, 5));
        assert!((net.transition_probability(&after_t2, t(2)).unwrap() - expected).abs() < 1e-15);
        assert_eq!(net.transition_probability(m0, t(3)), Err(NetError::NotEnabled(3)));
    }

    #[test]
    fn path_probabilities_of_running_example() {
        let net = running_example();
        let p13 = path_probability_of(&net, &[t(0), t(2)]).unwrap();
        assert_eq!(p13.exact, ratio(5, 500));
        let p234 = path_probability_of(&net, &[t(1), t(2), t(3)]).unwrap();
        assert_eq!(p234.exact, ratio(297, 500));
        assert!((p234.value() - 10f64.powf(p234.log10)).abs() < 1e-9);
        assert_eq!(
            path_probability_of(&net, &[t(1), t(2)]),
            Err(NetError::NotDeadlocked)
        );
    }

    #[test]
    fn empty_path_at_deadlock_has_probability_one() {
        let mut b = NetBuilder::new();
        let p = b.add_place("p");
        b.mark(p, 1);
        let net = b.build().unwrap();
        let prob = path_probability_of(&net, &[]).unwrap();
        assert!(prob.exact.is_one());
        assert_eq!(prob.log10, 0.0);
    }

    #[test]
    fn trace_nets() {
        let tn = build_trace_net(&["a".into(), "d".into(), "c".into()]);
        assert_eq!(tn.num_places(), 4);
        assert_eq!(tn.num_transitions(), 3);
        assert_eq!(tn.initial_marking().counts(), &[1, 0, 0, 0]);
        let path = ModelPath::replay(&tn, &[t(0), t(1), t(2)]).unwrap();
        assert_eq!(path.markings().last().unwrap().counts(), &[0, 0, 0, 1]);
        assert_eq!(path.visible_labels(&tn), vec!["a", "d", "c"]);

        let empty = build_trace_net(&[]);
        assert_eq!((empty.num_places(), empty.num_transitions()), (1, 0));
        assert!(empty.is_deadlock(empty.initial_marking()));

        let aa = build_trace_net(&["a".into(), "a".into()]);
        assert!(aa.transitions().iter().all(|t| t.label == Label::Activity("a".into())));
    }

    #[test]
    fn matrices_of_running_example() {
        let net = running_example();
        let mx = net.matrices();
        assert_eq!(mx.consumption(PlaceId(0), t(0)), -1);
        assert_eq!(mx.incidence(PlaceId(0), t(0)), -1);
        assert_eq!(mx.incidence(PlaceId(3), t(2)), 1);
        assert_eq!(mx.consumption(PlaceId(3), t(2)), 0);

        let mut b = NetBuilder::new();
        let p = b.add_place("p");
        let lonely = b.add_place("isolated");
        b.add_transition("t", Label::Silent, Weight::from_integer(1), &[p, p], &[]);
        b.mark(p, 2);
        let net = b.build().unwrap();
        let mx = net.matrices();
        assert_eq!(mx.consumption[lonely.0], vec![0]);
        assert_eq!(mx.incidence[lonely.0], vec![0]);
        assert_eq!(mx.consumption(p, t(0)), -2);
    }

    #[test]
    fn construction_is_validated() {
        let mut b = NetBuilder::new();
        let p = b.add_place("p");
        b.add_transition("t", Label::Silent, Weight::from_integer(0), &[p], &[]);
        b.mark(p, 1);
        assert_eq!(b.build(), Err(NetError::NonPositiveWeight(0)));

        let mut b = NetBuilder::new();
        b.add_place("p");
        assert_eq!(b.build(), Err(NetError::EmptyInitialMarking));
    }
}
