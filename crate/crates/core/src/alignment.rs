//! Alignments: firing sequences of the product from its initial marking to a
//! deadlock, with per-move annotations and recomputable totals.

use num_rational::BigRational;

use crate::loss::{loss, LossParams};
use crate::net::{ratio_log10, PathProbability, TransitionId};
use crate::product::{MoveKind, ProductError, SyncProduct};

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMove {
    pub kind: MoveKind,
    pub product_transition: TransitionId,
    pub trace_pos: Option<usize>,
    pub model_transition: Option<TransitionId>,
    /// Trace activity for trace/sync moves, model label for model moves,
    /// `None` for silent moves.
    pub activity: Option<String>,
    pub gain: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub moves: Vec<AlignmentMove>,
    pub cost: u32,
    pub probability: PathProbability,
    pub loss: f64,
    pub alpha: f64,
}

/// Reasons an alignment fails [`Alignment::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlignmentDefect {
    TraceProjection,
    ModelPathInvalid,
    Totals,
}

impl Alignment {
    /// Replays a product firing sequence and annotates every move.
    pub fn from_firing_sequence(
        sp: &SyncProduct,
        sequence: &[TransitionId],
        params: LossParams,
    ) -> Result<Self, ProductError> {
        let mut m = sp.initial_marking().clone();
        let mut moves = Vec::with_capacity(sequence.len());
        let mut probability = PathProbability::one();
        let mut cost = 0;
        for &t in sequence {
            let gain = sp.probability_gain_exact(&m, t)?;
            let pm = sp.product_move(t);
            let activity = match pm.trace_pos {
                Some(i) => Some(sp.trace()[i].clone()),
                None => pm
                    .model
                    .and_then(|ts| sp.model().label(ts).activity().map(str::to_owned)),
            };
            probability.push(&gain);
            cost += pm.kind.cost();
            moves.push(AlignmentMove {
                kind: pm.kind,
                product_transition: t,
                trace_pos: pm.trace_pos,
                model_transition: pm.model,
                activity,
                gain,
            });
            m = sp.fire_unchecked(&m, t);
        }
        if !sp.is_deadlock(&m) {
            return Err(ProductError::NotDeadlocked);
        }
        let loss = loss(cost, probability.log10, params).expect("log probability of a path is <= 0");
        Ok(Self {
            moves,
            cost,
            probability,
            loss,
            alpha: params.alpha(),
        })
    }

    pub fn product_sequence(&self) -> Vec<TransitionId> {
        self.moves.iter().map(|m| m.product_transition).collect()
    }

    /// Trace side with `>>` dropped.
    pub fn trace_projection(&self, sp: &SyncProduct) -> Vec<String> {
        self.moves
            .iter()
            .filter_map(|m| m.trace_pos.map(|i| sp.trace()[i].clone()))
            .collect()
    }

    /// Model side with `>>` dropped.
    pub fn model_projection(&self) -> Vec<TransitionId> {
        self.moves.iter().filter_map(|m| m.model_transition).collect()
    }

    /// Checks both projections and that the totals match the moves.
    pub fn validate(&self, sp: &SyncProduct) -> Result<(), AlignmentDefect> {
        if self.trace_projection(sp) != sp.trace() {
            return Err(AlignmentDefect::TraceProjection);
        }
        let path = crate::net::ModelPath::replay(sp.model(), &self.model_projection())
            .map_err(|_| AlignmentDefect::ModelPathInvalid)?;
        let exact = crate::net::path_probability(sp.model(), &path);
        let cost: u32 = self.moves.iter().map(|m| m.kind.cost()).sum();
        let product: BigRational = self
            .moves
            .iter()
            .fold(BigRational::from_integer(1.into()), |acc, m| acc * &m.gain);
        let params = LossParams::new(self.alpha).map_err(|_| AlignmentDefect::Totals)?;
        let recomputed = loss(cost, ratio_log10(&product), params).map_err(|_| AlignmentDefect::Totals)?;
        if cost != self.cost
            || product != self.probability.exact
            || exact.exact != product
            || (recomputed - self.loss).abs() > 1e-12
        {
            return Err(AlignmentDefect::Totals);
        }
        Ok(())
    }

    pub fn kind_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for m in &self.moves {
            let i = match m.kind {
                MoveKind::Sync => 0,
                MoveKind::Model => 1,
                MoveKind::SilentModel => 2,
                MoveKind::Trace => 3,
            };
            c[i] += 1;
        }
        c
    }
}
