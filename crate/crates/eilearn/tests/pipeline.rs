//! Cross-module pipeline tests over the bundled benchmark data: split
//! arithmetic feeding the engine, report-renderer agreement, and the
//! stability of a full run's JSON round trip.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eilearn::data::{Dataset, SplitPlan};
use eilearn::engine::{run_experiment, ClustererKind, ExperimentConfig, ExperimentReport};
use eilearn::learner::TreeParams;
use eilearn::report::{expected_csv_rows, render_csv, render_json, render_markdown};

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn diabetes_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        data_path: data_file("diabetes.csv"),
        label_column: "class".into(),
        plan: SplitPlan {
            holdout_size: 400,
            phases: 4,
            train_fraction: 0.66,
            shuffle_seed: None,
        },
        clusterer: ClustererKind::Em,
        clusters: 3,
        cluster_max_iters: 200,
        cluster_tol: 1e-6,
        tree: TreeParams::default(),
        master_seed: seed,
    }
}

#[test]
fn bundled_dataset_loads_with_expected_shape() {
    let d = Dataset::load_csv(data_file("diabetes.csv"), "class", &BTreeMap::new()).unwrap();
    assert_eq!(d.len(), 768);
    assert_eq!(d.schema().attributes.len(), 8);
    assert_eq!(d.schema().class_count(), 2);

    let chess = Dataset::load_csv(data_file("krkp.csv"), "class", &BTreeMap::new()).unwrap();
    assert_eq!(chess.len(), 3196);
    assert_eq!(chess.schema().attributes.len(), 36);

    // All-categorical data one-hot encodes into one dim per category.
    let category_total: usize = chess
        .schema()
        .attributes
        .iter()
        .map(|a| match &a.kind {
            eilearn::data::AttrKind::Categorical(cats) => cats.len(),
            eilearn::data::AttrKind::Numeric => panic!("chess data is categorical"),
        })
        .sum();
    // Dims follow the schema's category lists, so any sample encodes into
    // the full one-hot width.
    let sample = chess.partition_phases(16).unwrap().remove(0);
    let encoded = eilearn::clustering::encode(&sample).unwrap();
    assert_eq!(encoded.dims(), category_total);
    assert_eq!(category_total, 35 * 2 + 3);
}

#[test]
fn full_run_produces_consistent_renderings() {
    let cfg = diabetes_config(7);
    let report = run_experiment(&cfg).unwrap();

    // Cluster merging can only shrink the per-phase hypothesis count.
    for phase in &report.phases {
        assert!(phase.cluster_count >= 1 && phase.cluster_count <= cfg.clusters);
        assert_eq!(phase.new_hypotheses.len(), phase.cluster_count);
    }

    // Markdown shape: header + rule + one row per phase + validation row.
    let md = render_markdown(&report);
    assert_eq!(md.lines().count(), 2 + report.phases.len() + 1);

    // Every diagonal and validation percentage in the table matches the
    // JSON value rounded to two decimals.
    for phase in &report.phases {
        let row = md.lines().nth(1 + phase.phase).unwrap();
        assert!(row.contains(&format!("{:.2}%", phase.q_ensemble * 100.0)), "{row}");
        assert!(row.contains(&format!("{:.2}%", phase.q_mean_individual * 100.0)), "{row}");
        let validation = md.lines().last().unwrap();
        assert!(validation.contains(&format!("{:.2}%", phase.v_ensemble * 100.0)));
    }

    // JSON round-trips to an equal report.
    let parsed: ExperimentReport = serde_json::from_str(&render_json(&report)).unwrap();
    assert_eq!(parsed, report);

    // CSV rows match the declared count and every value parses in [0, 1].
    let csv = render_csv(&report);
    assert_eq!(csv.lines().count() - 1, expected_csv_rows(&report));
    for line in csv.lines().skip(1) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&value), "{line}");
    }
}

#[test]
fn reruns_are_equal_and_seeds_differ() {
    let a = run_experiment(&diabetes_config(7)).unwrap();
    let b = run_experiment(&diabetes_config(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(render_json(&a), render_json(&b));

    let c = run_experiment(&diabetes_config(8)).unwrap();
    assert_ne!(a.phase_seeds, c.phase_seeds);
}

#[test]
fn shuffled_plan_changes_splits_deterministically() {
    let mut cfg = diabetes_config(7);
    cfg.plan.shuffle_seed = Some(42);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let unshuffled = run_experiment(&diabetes_config(7)).unwrap();
    assert_ne!(a.phases[0].q_ensemble, unshuffled.phases[0].q_ensemble);
}
