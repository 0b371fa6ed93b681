//! The hypothesis pool: majority voting with base-rating tie-breaks, the
//! 50% accuracy filter into a discard buffer, and recall of buffered
//! hypotheses when every active one misses. Buffered hypotheses are out of
//! the vote but never destroyed, so previously acquired knowledge stays
//! recoverable.

use std::collections::BTreeMap;

use crate::data::Instance;
use crate::learner::TreeNode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("cannot classify with an empty active set")]
    EmptyActiveSet,
    #[error("accuracy list covers {got} hypotheses, expected {expected}")]
    AccuracyCountMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Buffered,
}

/// One trained base classifier plus its lifecycle state. `base_rating`
/// counts correct individual predictions made during learning-mode
/// evaluation and never decreases.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub id: u64,
    pub phase_origin: usize,
    pub cluster_origin: usize,
    pub model: TreeNode,
    pub base_rating: u64,
    pub status: Status,
    pub accuracy_record: BTreeMap<String, f64>,
}

impl Hypothesis {
    pub fn new(id: u64, phase_origin: usize, cluster_origin: usize, model: TreeNode) -> Self {
        Self {
            id,
            phase_origin,
            cluster_origin,
            model,
            base_rating: 0,
            status: Status::Active,
            accuracy_record: BTreeMap::new(),
        }
    }

    pub fn predict(&self, x: &Instance) -> usize {
        self.model.predict(x)
    }
}

/// Outcome of one majority vote. `votes` maps each class that received at
/// least one vote to its count; the counts sum to the number of active
/// hypotheses consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub predicted: usize,
    pub votes: BTreeMap<usize, usize>,
    pub tie_broken: bool,
    pub deciding_hypothesis: Option<u64>,
}

/// Which hypotheses went where during a filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub activated: Vec<u64>,
    pub buffered: Vec<u64>,
}

/// The active hypothesis pool plus the discard buffer. Both lists stay
/// ordered by id; a hypothesis is always in exactly one of them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleState {
    active: Vec<Hypothesis>,
    buffer: Vec<Hypothesis>,
    next_id: u64,
}

impl EnsembleState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active(&self) -> &[Hypothesis] {
        &self.active
    }

    pub fn buffer(&self) -> &[Hypothesis] {
        &self.buffer
    }

    /// Ids are monotonically assigned across the whole experiment.
    pub fn mint_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn roster(&self) -> impl Iterator<Item = &Hypothesis> {
        // Ids in the two lists are disjoint; a merged walk yields id order.
        let mut all: Vec<&Hypothesis> = self.active.iter().chain(&self.buffer).collect();
        all.sort_by_key(|h| h.id);
        all.into_iter()
    }

    /// Majority vote over the active hypotheses. The plurality class wins;
    /// a tie goes to the vote of the highest-rated hypothesis among those
    /// voting for tied classes (rating ties toward the lowest id).
    pub fn classify_majority(&self, x: &Instance) -> Result<VoteOutcome, EnsembleError> {
        if self.active.is_empty() {
            return Err(EnsembleError::EmptyActiveSet);
        }
        let predictions: Vec<usize> = self.active.iter().map(|h| h.predict(x)).collect();
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for &p in &predictions {
            *votes.entry(p).or_insert(0) += 1;
        }
        let top = *votes.values().max().expect("non-empty votes");
        let tied: Vec<usize> = votes
            .iter()
            .filter(|(_, &count)| count == top)
            .map(|(&class, _)| class)
            .collect();

        if tied.len() == 1 {
            return Ok(VoteOutcome {
                predicted: tied[0],
                votes,
                tie_broken: false,
                deciding_hypothesis: None,
            });
        }

        let mut decider: Option<(&Hypothesis, usize)> = None;
        for (h, &vote) in self.active.iter().zip(&predictions) {
            if !tied.contains(&vote) {
                continue;
            }
            // Strictly-greater keeps the lowest id on rating ties (the
            // active list is ordered by id).
            if decider.is_none_or(|(best, _)| h.base_rating > best.base_rating) {
                decider = Some((h, vote));
            }
        }
        let (decider, vote) = decider.expect("tied class has at least one voter");
        Ok(VoteOutcome {
            predicted: vote,
            votes,
            tie_broken: true,
            deciding_hypothesis: Some(decider.id),
        })
    }

    /// Increments the rating of every active hypothesis whose individual
    /// prediction matches `true_label`. Buffered hypotheses are untouched.
    /// Returns how many ratings were incremented.
    pub fn update_ratings(&mut self, x: &Instance, true_label: usize) -> usize {
        let mut bumped = 0;
        for h in &mut self.active {
            if h.model.predict(x) == true_label {
                h.base_rating += 1;
                bumped += 1;
            }
        }
        bumped
    }

    /// Routes freshly trained hypotheses by their accuracy on the phase test
    /// set (recorded under `set_name`): strictly above 50% joins the active
    /// pool, 50% or below goes to the buffer.
    pub fn filter_to_buffer(
        &mut self,
        new_hypotheses: Vec<Hypothesis>,
        accuracies: &[f64],
        set_name: &str,
    ) -> Result<FilterOutcome, EnsembleError> {
        if accuracies.len() != new_hypotheses.len() {
            return Err(EnsembleError::AccuracyCountMismatch {
                expected: new_hypotheses.len(),
                got: accuracies.len(),
            });
        }
        let mut outcome = FilterOutcome {
            activated: Vec::new(),
            buffered: Vec::new(),
        };
        for (mut h, &acc) in new_hypotheses.into_iter().zip(accuracies) {
            h.accuracy_record.insert(set_name.to_owned(), acc);
            debug_assert!(self.active.last().is_none_or(|last| last.id < h.id));
            debug_assert!(self.buffer.last().is_none_or(|last| last.id < h.id));
            if acc > 0.5 {
                h.status = Status::Active;
                outcome.activated.push(h.id);
                self.active.push(h);
            } else {
                h.status = Status::Buffered;
                outcome.buffered.push(h.id);
                self.buffer.push(h);
            }
        }
        Ok(outcome)
    }

    /// Called when every active hypothesis mispredicted a labeled instance:
    /// reinstates the buffered hypothesis that predicts it correctly,
    /// preferring the highest rating (ties toward the lowest id). The
    /// reinstated hypothesis stays active from then on. Returns its id, or
    /// `None` when no buffered hypothesis qualifies.
    pub fn recall_from_buffer(&mut self, x: &Instance, true_label: usize) -> Option<u64> {
        let mut best: Option<usize> = None;
        for (pos, h) in self.buffer.iter().enumerate() {
            if h.model.predict(x) != true_label {
                continue;
            }
            if best.is_none_or(|b| h.base_rating > self.buffer[b].base_rating) {
                best = Some(pos);
            }
        }
        let pos = best?;
        let mut h = self.buffer.remove(pos);
        h.status = Status::Active;
        let id = h.id;
        let at = self.active.partition_point(|a| a.id < id);
        self.active.insert(at, h);
        Some(id)
    }
}
