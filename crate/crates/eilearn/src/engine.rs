//! End-to-end experiment driver: split the data into phases, cluster each
//! phase's training records, train one tree per cluster, filter weak
//! hypotheses into the buffer, and evaluate the growing ensemble on the
//! phase test set, the fixed validation set, and the previous phase's test
//! set (retention). Everything stochastic derives from one master seed so a
//! config reproduces its report byte for byte.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{
    self, ClusterError, MIN_CLUSTER_SIZE,
};
use crate::data::{DataError, Dataset, SplitPlan};
use crate::ensemble::{EnsembleError, EnsembleState, Hypothesis, Status};
use crate::learner::{train_tree, TreeError, TreeParams};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("clustering: {0}")]
    Cluster(#[from] ClusterError),
    #[error("learner: {0}")]
    Tree(#[from] TreeError),
    #[error("ensemble: {0}")]
    Ensemble(#[from] EnsembleError),
    #[error("phase {phase}: every new hypothesis was buffered and no active hypothesis exists; the ensemble cannot vote")]
    EmptyEnsemble { phase: usize },
    #[error("cannot evaluate on an empty set")]
    EmptyEvaluationSet,
    #[error("phase {phase}: {source}")]
    InPhase {
        phase: usize,
        #[source]
        source: Box<EngineError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClustererKind {
    Em,
    KMeans,
}

/// Everything a run needs. Identical configs (including `master_seed`)
/// produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data_path: PathBuf,
    pub label_column: String,
    pub plan: SplitPlan,
    pub clusterer: ClustererKind,
    /// Clusters (and hence hypotheses) requested per phase.
    pub clusters: usize,
    pub cluster_max_iters: usize,
    pub cluster_tol: f64,
    pub tree: TreeParams,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdAccuracy {
    pub id: u64,
    pub accuracy: f64,
}

/// A buffered hypothesis reinstated during learning-mode evaluation.
/// `predicted` is the recalled hypothesis's vote on the triggering instance
/// and always equals `true_label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallEvent {
    pub instance_index: usize,
    pub hypothesis_id: u64,
    pub true_label: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterSnapshot {
    pub id: u64,
    pub status: Status,
    pub rating: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: usize,
    pub part_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Cluster parts after small-cluster merging = hypotheses trained.
    pub cluster_count: usize,
    pub new_hypotheses: Vec<u64>,
    /// Per new hypothesis, accuracy on this phase's test set.
    pub q_individual: Vec<IdAccuracy>,
    pub q_mean_individual: f64,
    pub q_ensemble: f64,
    /// Per new hypothesis, accuracy on the validation set (record only).
    pub v_individual: Vec<IdAccuracy>,
    pub v_mean_individual: f64,
    pub v_ensemble: f64,
    /// Ensemble accuracy on the previous phase's test set; absent in phase 1.
    pub retention_q_prev: Option<f64>,
    pub buffered: Vec<u64>,
    pub recalls: Vec<RecallEvent>,
    /// Status and rating of every hypothesis at the end of the phase.
    pub roster_after: Vec<RosterSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: u64,
    pub phase_origin: usize,
    pub cluster_origin: usize,
    pub rating: u64,
    pub status: Status,
    pub accuracy_record: BTreeMap<String, f64>,
}

/// Which operation consumed which set; the audit trail that validation data
/// never reaches training, clustering, rating updates, or recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub phase: usize,
    pub operation: TraceOp,
    pub set: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOp {
    Cluster,
    TrainHypothesis,
    IndividualEval,
    EnsembleEvalLearning,
    EnsembleEvalFrozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seed_derivation: String,
    pub phase_seeds: Vec<u64>,
    pub phases: Vec<PhaseReport>,
    pub roster: Vec<RosterEntry>,
    pub trace: Vec<TraceEvent>,
}

/// Whether an ensemble evaluation may mutate state (rating updates and
/// buffer recalls) or must leave it untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Learning,
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEvaluation {
    pub accuracy: f64,
    pub recalls: Vec<RecallEvent>,
}

const SEED_DERIVATION: &str = "seed[i] = splitmix64(master_seed ^ (i * 0x9E3779B97F4A7C15))";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-phase seed (phases are 1-based).
pub fn phase_seed(master_seed: u64, phase: usize) -> u64 {
    splitmix64(master_seed ^ (phase as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Fraction of `set` the hypothesis classifies correctly.
pub fn evaluate_individual(h: &Hypothesis, set: &Dataset) -> Result<f64, EngineError> {
    if set.is_empty() {
        return Err(EngineError::EmptyEvaluationSet);
    }
    let correct = set
        .instances()
        .iter()
        .filter(|x| h.predict(x) == x.label)
        .count();
    Ok(correct as f64 / set.len() as f64)
}

/// Instance-by-instance majority vote over `set`. In `Learning` mode every
/// instance also updates ratings and, when all active hypotheses miss,
/// attempts a buffer recall; state changes take effect for the following
/// instances. In `Frozen` mode the state is left untouched.
pub fn evaluate_ensemble(
    state: &mut EnsembleState,
    set: &Dataset,
    mode: EvalMode,
) -> Result<EnsembleEvaluation, EngineError> {
    if set.is_empty() {
        return Err(EngineError::EmptyEvaluationSet);
    }
    let mut correct = 0usize;
    let mut recalls = Vec::new();
    for (index, x) in set.instances().iter().enumerate() {
        let outcome = state.classify_majority(x)?;
        if outcome.predicted == x.label {
            correct += 1;
        }
        if mode == EvalMode::Learning {
            let any_right = state.update_ratings(x, x.label) > 0;
            if !any_right {
                if let Some(id) = state.recall_from_buffer(x, x.label) {
                    recalls.push(RecallEvent {
                        instance_index: index,
                        hypothesis_id: id,
                        true_label: x.label,
                        predicted: x.label,
                    });
                }
            }
        }
    }
    Ok(EnsembleEvaluation {
        accuracy: correct as f64 / set.len() as f64,
        recalls,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// One phase of the incremental loop. Returns the phase report and this
/// phase's test set (the next phase's retention set).
#[allow(clippy::too_many_arguments)]
pub fn run_phase(
    phase: usize,
    part: &Dataset,
    validation: &Dataset,
    q_prev: Option<&Dataset>,
    state: &mut EnsembleState,
    cfg: &ExperimentConfig,
    seed: u64,
    trace: &mut Vec<TraceEvent>,
) -> Result<(PhaseReport, Dataset), EngineError> {
    let (train, test) = part.split_train_test(cfg.plan.train_fraction)?;
    let q_name = format!("Q{phase}");
    let p_name = format!("P{phase}");

    // Cluster the phase training records and train one tree per part.
    let encoded = clustering::encode(&train)?;
    let model = match cfg.clusterer {
        ClustererKind::Em => clustering::em_fit(
            &encoded,
            cfg.clusters,
            cfg.cluster_max_iters,
            cfg.cluster_tol,
            seed,
        )?,
        ClustererKind::KMeans => {
            clustering::kmeans_fit(&encoded, cfg.clusters, cfg.cluster_max_iters, seed)?
        }
    };
    trace.push(TraceEvent {
        phase,
        operation: TraceOp::Cluster,
        set: p_name.clone(),
    });
    let parts = clustering::partition_by_cluster(&train, &model, MIN_CLUSTER_SIZE)?;

    let mut new_hypotheses = Vec::with_capacity(parts.len());
    for (cluster, cluster_data) in parts.iter().enumerate() {
        let tree = train_tree(cluster_data, &cfg.tree)?;
        new_hypotheses.push(Hypothesis::new(state.mint_id(), phase, cluster, tree));
        trace.push(TraceEvent {
            phase,
            operation: TraceOp::TrainHypothesis,
            set: p_name.clone(),
        });
    }

    // Test each new hypothesis on the phase test set, then filter by the
    // 50% rule; validation accuracies are recorded but never filter.
    let mut q_accuracies = Vec::with_capacity(new_hypotheses.len());
    for h in &new_hypotheses {
        q_accuracies.push(evaluate_individual(h, &test)?);
    }
    trace.push(TraceEvent {
        phase,
        operation: TraceOp::IndividualEval,
        set: q_name.clone(),
    });
    let mut v_accuracies = Vec::with_capacity(new_hypotheses.len());
    for h in &mut new_hypotheses {
        let acc = evaluate_individual(h, validation)?;
        h.accuracy_record.insert("V".to_owned(), acc);
        v_accuracies.push(acc);
    }
    trace.push(TraceEvent {
        phase,
        operation: TraceOp::IndividualEval,
        set: "V".to_owned(),
    });

    let ids: Vec<u64> = new_hypotheses.iter().map(|h| h.id).collect();
    let q_individual: Vec<IdAccuracy> = ids
        .iter()
        .zip(&q_accuracies)
        .map(|(&id, &accuracy)| IdAccuracy { id, accuracy })
        .collect();
    let v_individual: Vec<IdAccuracy> = ids
        .iter()
        .zip(&v_accuracies)
        .map(|(&id, &accuracy)| IdAccuracy { id, accuracy })
        .collect();

    let filter = state.filter_to_buffer(new_hypotheses, &q_accuracies, &q_name)?;
    if state.active().is_empty() {
        return Err(EngineError::EmptyEnsemble { phase });
    }

    // Ensemble passes: learning on Q_i, frozen on V, frozen retention on
    // the previous phase's test set.
    let q_eval = evaluate_ensemble(state, &test, EvalMode::Learning)?;
    trace.push(TraceEvent {
        phase,
        operation: TraceOp::EnsembleEvalLearning,
        set: q_name.clone(),
    });
    let v_eval = evaluate_ensemble(state, validation, EvalMode::Frozen)?;
    trace.push(TraceEvent {
        phase,
        operation: TraceOp::EnsembleEvalFrozen,
        set: "V".to_owned(),
    });
    let retention_q_prev = match q_prev {
        Some(prev) => {
            let eval = evaluate_ensemble(state, prev, EvalMode::Frozen)?;
            trace.push(TraceEvent {
                phase,
                operation: TraceOp::EnsembleEvalFrozen,
                set: format!("Q{}", phase - 1),
            });
            Some(eval.accuracy)
        }
        None => None,
    };

    let roster_after = state
        .roster()
        .map(|h| RosterSnapshot {
            id: h.id,
            status: h.status,
            rating: h.base_rating,
        })
        .collect();

    let report = PhaseReport {
        phase,
        part_size: part.len(),
        train_size: train.len(),
        test_size: test.len(),
        cluster_count: parts.len(),
        new_hypotheses: ids,
        q_mean_individual: mean(&q_accuracies),
        q_individual,
        q_ensemble: q_eval.accuracy,
        v_mean_individual: mean(&v_accuracies),
        v_individual,
        v_ensemble: v_eval.accuracy,
        retention_q_prev,
        buffered: filter.buffered,
        recalls: q_eval.recalls,
        roster_after,
    };
    Ok((report, test))
}

/// Loads the dataset, builds the split hierarchy, folds [`run_phase`] over
/// all phases, and assembles the full report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, EngineError> {
    let dataset = Dataset::load_csv(&cfg.data_path, &cfg.label_column, &BTreeMap::new())?;
    let (pool, validation) = dataset.split_holdout(&cfg.plan)?;
    let parts = pool.partition_phases(cfg.plan.phases)?;

    let phase_seeds: Vec<u64> = (1..=cfg.plan.phases)
        .map(|i| phase_seed(cfg.master_seed, i))
        .collect();

    let mut state = EnsembleState::new();
    let mut trace = Vec::new();
    let mut phases = Vec::with_capacity(parts.len());
    let mut q_prev: Option<Dataset> = None;

    for (idx, part) in parts.iter().enumerate() {
        let phase = idx + 1;
        let (report, test) = run_phase(
            phase,
            part,
            &validation,
            q_prev.as_ref(),
            &mut state,
            cfg,
            phase_seeds[idx],
            &mut trace,
        )
        .map_err(|source| match source {
            // Already phase-tagged; wrapping again would stutter.
            e @ EngineError::EmptyEnsemble { .. } => e,
            source => EngineError::InPhase {
                phase,
                source: Box::new(source),
            },
        })?;
        phases.push(report);
        q_prev = Some(test);
    }

    let roster = state
        .roster()
        .map(|h| RosterEntry {
            id: h.id,
            phase_origin: h.phase_origin,
            cluster_origin: h.cluster_origin,
            rating: h.base_rating,
            status: h.status,
            accuracy_record: h.accuracy_record.clone(),
        })
        .collect();

    Ok(ExperimentReport {
        config: cfg.clone(),
        seed_derivation: SEED_DERIVATION.to_owned(),
        phase_seeds,
        phases,
        roster,
        trace,
    })
}
