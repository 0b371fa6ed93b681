//! Report renderers: the phase-by-phase accuracy table as markdown, a
//! lossless JSON dump, and a long-format CSV. JSON is the source of truth;
//! the markdown table rounds to two-decimal percentages.

use std::fmt::Write;

use crate::engine::ExperimentReport;

fn pct(value: f64) -> String {
    format!("{:.2}%", value * 100.0)
}

/// The accuracy table: one row per phase test set with that phase's mean
/// individual accuracy and the diagonal ensemble cell, then a validation row
/// carrying the ensemble accuracy after every phase.
pub fn render_markdown(report: &ExperimentReport) -> String {
    let k = report.phases.len();
    let mut out = String::new();

    let mut header = String::from("| Dataset/Incremental Training | Average/Learner |");
    let mut rule = String::from("| --- | --- |");
    for i in 1..=k {
        write!(header, " Training{i} |").unwrap();
        rule.push_str(" --- |");
    }
    out.push_str(&header);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');

    for phase in &report.phases {
        write!(out, "| Q_{} | {} |", phase.phase, pct(phase.q_mean_individual)).unwrap();
        for i in 1..=k {
            if i == phase.phase {
                write!(out, " {} |", pct(phase.q_ensemble)).unwrap();
            } else {
                out.push_str("  |");
            }
        }
        out.push('\n');
    }

    // Mean of every individual validation accuracy across all phases.
    let v_accs: Vec<f64> = report
        .phases
        .iter()
        .flat_map(|p| p.v_individual.iter().map(|a| a.accuracy))
        .collect();
    let v_mean = v_accs.iter().sum::<f64>() / v_accs.len() as f64;
    write!(out, "| **Validation** | **{}** |", pct(v_mean)).unwrap();
    for phase in &report.phases {
        write!(out, " **{}** |", pct(phase.v_ensemble)).unwrap();
    }
    out.push('\n');
    out
}

/// Full-fidelity JSON: config echo, seeds, every per-hypothesis accuracy,
/// ratings, statuses, recall events, and the operation trace. Stable key
/// order and exact numbers, so identical runs serialize byte-identically.
pub fn render_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Long-format CSV: one `(phase, metric, subject, set, value)` row per
/// recorded accuracy.
pub fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("phase,metric,subject,set,value\n");
    for phase in &report.phases {
        let q = format!("Q{}", phase.phase);
        for acc in &phase.q_individual {
            writeln!(out, "{},individual_accuracy,{},{},{}", phase.phase, acc.id, q, acc.accuracy)
                .unwrap();
        }
        writeln!(
            out,
            "{},mean_individual_accuracy,new_hypotheses,{},{}",
            phase.phase, q, phase.q_mean_individual
        )
        .unwrap();
        writeln!(out, "{},ensemble_accuracy,ensemble,{},{}", phase.phase, q, phase.q_ensemble).unwrap();
        for acc in &phase.v_individual {
            writeln!(out, "{},individual_accuracy,{},V,{}", phase.phase, acc.id, acc.accuracy).unwrap();
        }
        writeln!(
            out,
            "{},mean_individual_accuracy,new_hypotheses,V,{}",
            phase.phase, phase.v_mean_individual
        )
        .unwrap();
        writeln!(out, "{},ensemble_accuracy,ensemble,V,{}", phase.phase, phase.v_ensemble).unwrap();
        if let Some(retention) = phase.retention_q_prev {
            writeln!(
                out,
                "{},retention_accuracy,ensemble,Q{},{}",
                phase.phase,
                phase.phase - 1,
                retention
            )
            .unwrap();
        }
    }
    out
}

/// Rows [`render_csv`] emits for a given report; kept in lockstep with the
/// renderer so consumers can cross-check row counts.
pub fn expected_csv_rows(report: &ExperimentReport) -> usize {
    report
        .phases
        .iter()
        .map(|p| p.q_individual.len() + p.v_individual.len() + 4 + usize::from(p.retention_q_prev.is_some()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitPlan;
    use crate::engine::{
        ClustererKind, ExperimentConfig, ExperimentReport, IdAccuracy, PhaseReport, RosterEntry,
        RosterSnapshot,
    };
    use crate::ensemble::Status;
    use crate::learner::TreeParams;
    use std::collections::BTreeMap;

    fn sample_report(k: usize) -> ExperimentReport {
        let phases = (1..=k)
            .map(|phase| PhaseReport {
                phase,
                part_size: 100,
                train_size: 66,
                test_size: 34,
                cluster_count: 2,
                new_hypotheses: vec![2 * phase as u64 - 2, 2 * phase as u64 - 1],
                q_individual: vec![
                    IdAccuracy { id: 2 * phase as u64 - 2, accuracy: 0.5 + 0.01 * phase as f64 },
                    IdAccuracy { id: 2 * phase as u64 - 1, accuracy: 0.6 },
                ],
                q_mean_individual: 0.55 + 0.005 * phase as f64,
                q_ensemble: 0.7272,
                v_individual: vec![
                    IdAccuracy { id: 2 * phase as u64 - 2, accuracy: 0.52 },
                    IdAccuracy { id: 2 * phase as u64 - 1, accuracy: 0.58 },
                ],
                v_mean_individual: 0.55,
                v_ensemble: 0.4 + 0.1 * phase as f64,
                retention_q_prev: (phase > 1).then_some(0.61),
                buffered: vec![],
                recalls: vec![],
                roster_after: vec![RosterSnapshot {
                    id: 0,
                    status: Status::Active,
                    rating: phase as u64,
                }],
            })
            .collect();
        ExperimentReport {
            config: ExperimentConfig {
                data_path: "data/example.csv".into(),
                label_column: "class".into(),
                plan: SplitPlan {
                    holdout_size: 400,
                    phases: k,
                    train_fraction: 0.66,
                    shuffle_seed: None,
                },
                clusterer: ClustererKind::Em,
                clusters: 3,
                cluster_max_iters: 200,
                cluster_tol: 1e-6,
                tree: TreeParams::default(),
                master_seed: 7,
            },
            seed_derivation: "test".into(),
            phase_seeds: (0..k as u64).collect(),
            phases,
            roster: vec![RosterEntry {
                id: 0,
                phase_origin: 1,
                cluster_origin: 0,
                rating: 3,
                status: Status::Active,
                accuracy_record: BTreeMap::from([("Q1".to_owned(), 0.51), ("V".to_owned(), 0.52)]),
            }],
            trace: vec![],
        }
    }

    #[test]
    fn four_phase_table_has_expected_shape() {
        let md = render_markdown(&sample_report(4));
        let lines: Vec<&str> = md.lines().collect();
        // Header + separator + 4 test rows + validation row.
        assert_eq!(lines.len(), 7);
        let columns = lines[0].matches('|').count() - 1;
        assert_eq!(columns, 6);
        assert!(lines[0].starts_with("| Dataset/Incremental Training | Average/Learner | Training1 |"));
        assert!(lines[2].starts_with("| Q_1 |"));
        assert!(lines[6].starts_with("| **Validation** |"));
        // Diagonal populated, off-diagonal blank.
        assert!(lines[2].contains("72.72%"));
        let q1_cells: Vec<&str> = lines[2].split('|').map(str::trim).collect();
        assert_eq!(q1_cells[3], "72.72%");
        assert_eq!(q1_cells[4], "");
        assert_eq!(q1_cells[5], "");
        assert_eq!(q1_cells[6], "");
    }

    #[test]
    fn single_phase_table_has_two_data_rows() {
        let md = render_markdown(&sample_report(1));
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn percent_formatting_is_two_decimals() {
        assert_eq!(pct(0.7272), "72.72%");
        assert_eq!(pct(1.0), "100.00%");
        assert_eq!(pct(0.0), "0.00%");
        assert_eq!(pct(0.3315), "33.15%");
        assert_eq!(pct(1.0 / 3.0), "33.33%");
    }

    #[test]
    fn json_round_trips_losslessly() {
        let report = sample_report(4);
        let json = render_json(&report);
        let parsed: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
        // Rendering twice is byte-identical.
        assert_eq!(render_json(&report), json);
    }

    #[test]
    fn csv_rows_match_the_declared_count_and_parse() {
        let report = sample_report(4);
        let csv = render_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "phase,metric,subject,set,value");
        assert_eq!(lines.len() - 1, expected_csv_rows(&report));
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            let value: f64 = fields[4].parse().unwrap();
            assert!((0.0..=1.0).contains(&value), "{line}");
        }
    }

    #[test]
    fn markdown_cells_equal_json_values_rounded() {
        let report = sample_report(4);
        let md = render_markdown(&report);
        let json: serde_json::Value = serde_json::from_str(&render_json(&report)).unwrap();
        for (i, phase) in json["phases"].as_array().unwrap().iter().enumerate() {
            let q_mean = phase["q_mean_individual"].as_f64().unwrap();
            let q_ens = phase["q_ensemble"].as_f64().unwrap();
            let v_ens = phase["v_ensemble"].as_f64().unwrap();
            let row = md.lines().nth(2 + i).unwrap();
            assert!(row.contains(&pct(q_mean)));
            assert!(row.contains(&pct(q_ens)));
            let validation = md.lines().last().unwrap();
            assert!(validation.contains(&pct(v_ens)));
        }
    }
}
