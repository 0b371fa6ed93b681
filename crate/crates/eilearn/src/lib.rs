//! Incremental ensemble learning over phased data streams.
//!
//! Each learning phase clusters its training records, trains one decision
//! tree per cluster, filters hypotheses at or below 50% test accuracy into a
//! recall buffer, and classifies by majority vote with base-rating
//! tie-breaks. Hypotheses carry forward across phases, so the ensemble's
//! accuracy on a fixed validation set measures how much knowledge
//! accumulates; accuracy on earlier phases' test sets measures how much is
//! retained. Distribution drift between phases is tolerated by the
//! buffer-and-recall mechanism rather than detected explicitly.
//!
//! ```no_run
//! use eilearn::data::SplitPlan;
//! use eilearn::engine::{run_experiment, ClustererKind, ExperimentConfig};
//! use eilearn::learner::TreeParams;
//!
//! let cfg = ExperimentConfig {
//!     data_path: "data/diabetes.csv".into(),
//!     label_column: "class".into(),
//!     plan: SplitPlan {
//!         holdout_size: 400,
//!         phases: 4,
//!         train_fraction: 0.66,
//!         shuffle_seed: None,
//!     },
//!     clusterer: ClustererKind::Em,
//!     clusters: 3,
//!     cluster_max_iters: 200,
//!     cluster_tol: 1e-6,
//!     tree: TreeParams::default(),
//!     master_seed: 7,
//! };
//! let report = run_experiment(&cfg).unwrap();
//! println!("{}", eilearn::report::render_markdown(&report));
//! ```

pub mod clustering;
pub mod data;
pub mod engine;
pub mod ensemble;
pub mod learner;
pub mod report;

pub use data::{Dataset, SplitPlan};
pub use engine::{run_experiment, ExperimentConfig, ExperimentReport};
