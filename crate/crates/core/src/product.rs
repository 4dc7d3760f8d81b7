//! Synchronous product of a trace net and a stochastic net.
//!
//! Place layout: the model's places keep their indices `0..|P_model|`; the
//! trace net's places follow. Transition layout: model moves (same index as
//! the model transition), then trace moves (one per trace position), then
//! synchronous moves ordered by trace position and model transition.

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::net::{Label, Marking, NetBuilder, NetError, PlaceId, StochasticNet, TransitionId, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Sync,
    Model,
    SilentModel,
    Trace,
}

impl MoveKind {
    pub fn cost(self) -> u32 {
        match self {
            MoveKind::Sync | MoveKind::SilentModel => 0,
            MoveKind::Model | MoveKind::Trace => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Sync => "sync",
            MoveKind::Model => "model",
            MoveKind::SilentModel => "silent",
            MoveKind::Trace => "trace",
        }
    }

    pub fn has_model_part(self) -> bool {
        !matches!(self, MoveKind::Trace)
    }
}

/// What a product transition stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMove {
    pub kind: MoveKind,
    /// Trace position consumed (trace and sync moves).
    pub trace_pos: Option<usize>,
    /// Model transition fired (model and sync moves); this is `r_t`.
    pub model: Option<TransitionId>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProductError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("alignment does not end in a deadlock of the product")]
    NotDeadlocked,
}

/// Product net plus move tables. Product transitions carry unit weights that
/// are never read; probabilities are derived from the model through `r_t`.
#[derive(Debug, Clone)]
pub struct SyncProduct {
    net: StochasticNet,
    model: StochasticNet,
    trace: Vec<String>,
    moves: Vec<ProductMove>,
}

pub fn build_sync_product(trace: &[String], model: &StochasticNet) -> SyncProduct {
    let np = model.num_places();
    let mut b = NetBuilder::new();
    for name in model.place_names() {
        b.add_place(name.clone());
    }
    let trace_places: Vec<PlaceId> = (0..=trace.len())
        .map(|i| b.add_place(format!("s{i}")))
        .collect();
    let unit = || Weight::from_integer(1);
    let places_of = |arcs: &[(PlaceId, u32)]| -> Vec<PlaceId> {
        arcs.iter()
            .flat_map(|(p, w)| std::iter::repeat_n(*p, *w as usize))
            .collect()
    };

    let mut moves = Vec::new();
    for (j, t) in model.transitions().iter().enumerate() {
        let kind = if t.label.is_silent() {
            MoveKind::SilentModel
        } else {
            MoveKind::Model
        };
        b.add_transition(
            format!("(>>,{})", t.name),
            t.label.clone(),
            unit(),
            &places_of(&t.inputs),
            &places_of(&t.outputs),
        );
        moves.push(ProductMove {
            kind,
            trace_pos: None,
            model: Some(TransitionId(j)),
        });
    }
    for (i, a) in trace.iter().enumerate() {
        b.add_transition(
            format!("(e{},>>)", i + 1),
            Label::Activity(a.clone()),
            unit(),
            &[trace_places[i]],
            &[trace_places[i + 1]],
        );
        moves.push(ProductMove {
            kind: MoveKind::Trace,
            trace_pos: Some(i),
            model: None,
        });
    }
    for (i, a) in trace.iter().enumerate() {
        for (j, t) in model.transitions().iter().enumerate() {
            if t.label.activity() != Some(a.as_str()) {
                continue;
            }
            let mut inputs = places_of(&t.inputs);
            inputs.push(trace_places[i]);
            let mut outputs = places_of(&t.outputs);
            outputs.push(trace_places[i + 1]);
            b.add_transition(
                format!("(e{},{})", i + 1, t.name),
                Label::Activity(a.clone()),
                unit(),
                &inputs,
                &outputs,
            );
            moves.push(ProductMove {
                kind: MoveKind::Sync,
                trace_pos: Some(i),
                model: Some(TransitionId(j)),
            });
        }
    }
    for (p, c) in model.initial_marking().counts().iter().enumerate() {
        b.mark(PlaceId(p), *c);
    }
    b.mark(trace_places[0], 1);
    let net = b.build().expect("product of well-formed nets is well formed");
    debug_assert_eq!(net.num_places(), np + trace.len() + 1);
    SyncProduct {
        net,
        model: model.clone(),
        trace: trace.to_vec(),
        moves,
    }
}

impl SyncProduct {
    pub fn net(&self) -> &StochasticNet {
        &self.net
    }

    pub fn model(&self) -> &StochasticNet {
        &self.model
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn trace_len(&self) -> usize {
        self.trace.len()
    }

    pub fn num_model_places(&self) -> usize {
        self.model.num_places()
    }

    pub fn is_model_place(&self, p: PlaceId) -> bool {
        p.0 < self.model.num_places()
    }

    /// Product place holding the token before trace position `i`.
    pub fn trace_place(&self, i: usize) -> PlaceId {
        PlaceId(self.model.num_places() + i)
    }

    pub fn moves(&self) -> &[ProductMove] {
        &self.moves
    }

    pub fn product_move(&self, t: TransitionId) -> &ProductMove {
        &self.moves[t.0]
    }

    pub fn classify(&self, t: TransitionId) -> MoveKind {
        self.moves[t.0].kind
    }

    pub fn move_cost(&self, t: TransitionId) -> u32 {
        self.moves[t.0].kind.cost()
    }

    /// `r_t`: the model transition behind a model or sync move.
    pub fn to_model(&self, t: TransitionId) -> Option<TransitionId> {
        self.moves[t.0].model
    }

    /// `r_m`: restriction of a product marking to the model places.
    pub fn to_model_marking(&self, m: &Marking) -> Marking {
        Marking::from_counts(m.counts()[..self.model.num_places()].to_vec())
    }

    /// Trace position reached by marking `m`: the index of the marked trace place.
    pub fn trace_position(&self, m: &Marking) -> usize {
        m.counts()[self.model.num_places()..]
            .iter()
            .position(|c| *c > 0)
            .unwrap_or(self.trace.len())
    }

    pub fn initial_marking(&self) -> &Marking {
        self.net.initial_marking()
    }

    pub fn enabled(&self, m: &Marking) -> Vec<TransitionId> {
        self.net.enabled_transitions(m)
    }

    pub fn is_deadlock(&self, m: &Marking) -> bool {
        self.net.is_deadlock(m)
    }

    pub fn fire(&self, m: &Marking, t: TransitionId) -> Result<Marking, NetError> {
        self.net.fire(m, t)
    }

    pub(crate) fn fire_unchecked(&self, m: &Marking, t: TransitionId) -> Marking {
        self.net.fire_unchecked(m, t)
    }

    fn model_enabled_weight(&self, m: &Marking) -> f64 {
        // model places share indices with the product, so the model preset can
        // be checked directly on the product marking
        self.model
            .transition_ids()
            .filter(|u| self.model.is_enabled_prefix(m, *u))
            .map(|u| self.model.weight(u).value())
            .sum()
    }

    fn check_enabled(&self, m: &Marking, t: TransitionId) -> Result<(), NetError> {
        if t.0 >= self.moves.len() {
            return Err(NetError::UnknownTransition(t.0));
        }
        if m.len() != self.net.num_places() {
            return Err(NetError::MarkingSize {
                expected: self.net.num_places(),
                got: m.len(),
            });
        }
        if !self.net.is_enabled(m, t) {
            return Err(NetError::NotEnabled(t.0));
        }
        Ok(())
    }

    /// Probability gain of firing `t` at product marking `m`: 1 for trace
    /// moves, otherwise the model's firing probability of `r_t(t)` at `r_m(m)`.
    pub fn probability_gain(&self, m: &Marking, t: TransitionId) -> Result<f64, NetError> {
        self.check_enabled(m, t)?;
        Ok(self.gain_unchecked(m, t))
    }

    pub(crate) fn gain_unchecked(&self, m: &Marking, t: TransitionId) -> f64 {
        match self.moves[t.0].model {
            None => 1.0,
            Some(ts) => self.model.weight(ts).value() / self.model_enabled_weight(m),
        }
    }

    pub fn probability_gain_exact(&self, m: &Marking, t: TransitionId) -> Result<BigRational, NetError> {
        self.check_enabled(m, t)?;
        match self.moves[t.0].model {
            None => Ok(BigRational::one()),
            Some(ts) => {
                let total = self
                    .model
                    .transition_ids()
                    .filter(|u| self.model.is_enabled_prefix(m, *u))
                    .fold(BigRational::zero(), |acc, u| acc + self.model.weight(u).exact());
                Ok(self.model.weight(ts).exact() / total)
            }
        }
    }
}

impl StochasticNet {
    /// Enabledness judged on a marking whose first `|P|` entries are this net's
    /// places (a product marking).
    pub(crate) fn is_enabled_prefix(&self, m: &Marking, t: TransitionId) -> bool {
        self.transition(t)
            .inputs
            .iter()
            .all(|(p, w)| m.counts()[p.0] >= *w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{running_example, trace};

    fn kinds(sp: &SyncProduct) -> Vec<MoveKind> {
        sp.moves().iter().map(|m| m.kind).collect()
    }

    #[test]
    fn running_example_product() {
        let sp = build_sync_product(&trace(&["a", "d", "c"]), &running_example());
        assert_eq!(sp.net().num_places(), 8);
        let k = kinds(&sp);
        assert_eq!(k.iter().filter(|k| **k == MoveKind::Sync).count(), 3);
        assert_eq!(k.iter().filter(|k| **k == MoveKind::Model).count(), 4);
        assert_eq!(k.iter().filter(|k| **k == MoveKind::Trace).count(), 3);
        let syncs: Vec<(usize, usize)> = sp
            .moves()
            .iter()
            .filter(|m| m.kind == MoveKind::Sync)
            .map(|m| (m.trace_pos.unwrap(), m.model.unwrap().0))
            .collect();
        assert_eq!(syncs, vec![(0, 0), (1, 3), (2, 2)]);
        assert_eq!(sp.initial_marking().counts(), &[1, 0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn empty_and_unmatched_traces() {
        let net = running_example();
        let sp = build_sync_product(&[], &net);
        assert!(kinds(&sp).iter().all(|k| *k == MoveKind::Model));
        let sp = build_sync_product(&trace(&["x"]), &net);
        let k = kinds(&sp);
        assert_eq!(k.iter().filter(|k| **k == MoveKind::Trace).count(), 1);
        assert_eq!(k.iter().filter(|k| **k == MoveKind::Model).count(), 4);
        assert_eq!(k.iter().filter(|k| **k == MoveKind::Sync).count(), 0);
    }

    #[test]
    fn gains_at_initial_marking() {
        let sp = build_sync_product(&trace(&["a", "d", "c"]), &running_example());
        let m0 = sp.initial_marking().clone();
        let enabled = sp.enabled(&m0);
        // (>>,t1), (>>,t2), (e1,>>), (e1,t1)
        assert_eq!(enabled, vec![TransitionId(0), TransitionId(1), TransitionId(4), TransitionId(7)]);
        let gain = |t| sp.probability_gain_exact(&m0, TransitionId(t)).unwrap();
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(gain(4), r(1, 1));
        assert_eq!(gain(1), r(99, 100));
        assert_eq!(gain(7), r(1, 100));
        assert_eq!(gain(0), r(1, 100));
        assert!((sp.probability_gain(&m0, TransitionId(1)).unwrap() - 0.99).abs() < 1e-15);
        assert_eq!(sp.probability_gain(&m0, TransitionId(2)), Err(NetError::NotEnabled(2)));
    }

    #[test]
    fn reverse_marking() {
        let sp = build_sync_product(&trace(&["a", "d", "c"]), &running_example());
        assert_eq!(sp.to_model_marking(sp.initial_marking()).counts(), &[1, 0, 0, 0]);
        let only_trace = Marking::from_counts(vec![0, 0, 0, 0, 0, 1, 0, 0]);
        assert_eq!(sp.to_model_marking(&only_trace).total(), 0);
        let m = Marking::from_counts(vec![0, 0, 0, 2, 0, 0, 0, 1]);
        assert_eq!(sp.to_model_marking(&m).counts(), &[0, 0, 0, 2]);
        assert_eq!(sp.trace_position(&m), 3);
    }

    #[test]
    fn classification_and_costs() {
        let mut b = NetBuilder::new();
        let p = b.add_places(2);
        b.add_transition("tau", Label::Silent, Weight::from_integer(1), &[p[0]], &[p[1]]);
        b.mark(p[0], 1);
        let silent_net = b.build().unwrap();
        let sp = build_sync_product(&[], &silent_net);
        assert_eq!(sp.classify(TransitionId(0)), MoveKind::SilentModel);
        assert_eq!(sp.move_cost(TransitionId(0)), 0);

        let sp = build_sync_product(&trace(&["a", "d", "c"]), &running_example());
        let sync_d = sp
            .moves()
            .iter()
            .position(|m| m.kind == MoveKind::Sync && m.model == Some(TransitionId(3)))
            .unwrap();
        assert_eq!(sp.classify(TransitionId(sync_d)), MoveKind::Sync);
        assert_eq!(sp.move_cost(TransitionId(sync_d)), 0);
        assert_eq!(sp.classify(TransitionId(1)), MoveKind::Model);
        assert_eq!(sp.move_cost(TransitionId(1)), 1);
        assert_eq!(sp.to_model(TransitionId(4)), None);
        assert_eq!(sp.to_model(TransitionId(sync_d)), Some(TransitionId(3)));
    }
}
