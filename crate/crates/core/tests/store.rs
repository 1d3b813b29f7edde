use std::path::Path;

use landscape_core::design::lhs_sample;
use landscape_core::store::{
    load_study, write_study, OutcomeRow, OutcomeTable, RunManifest, DESIGN_FILE, OUTCOMES_FILE,
};
use landscape_core::{DesignMatrix, Error};
use proptest::prelude::*;

fn table(n_rows: usize, reps: usize, salt: f64) -> OutcomeTable {
    let mut rows = Vec::new();
    for row_id in 0..n_rows {
        for replicate in 0..reps {
            let t = (row_id * 31 + replicate) as f64 + salt;
            rows.push(OutcomeRow {
                row_id,
                replicate,
                n_agents: 10_000,
                cumulative_infections: 1000 + (row_id * 7 + replicate) as u64,
                cumulative_diagnoses: 250 + replicate as u64,
                attack_svi: [0.1 + t / 1e4, 0.2 / 3.0, 1.0 / 7.0 + t * 1e-9, 0.3],
                svi_variance: 1e-3 * (t.sin() + 1.5),
                boosted_fraction: 0.1234567890123456,
            });
        }
    }
    OutcomeTable::new(rows)
}

fn manifest() -> RunManifest {
    let mut m = RunManifest::new(
        "design+simulate",
        serde_json::json!({"reps": 3}),
        vec![1, 2],
    );
    m.created_unix = 0;
    m
}

#[test]
fn write_then_read_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("s");
    let d = lhs_sample(8, 10, 3);
    let t = table(8, 3, 0.5);
    let m = write_study(&study, &d, &t, &manifest()).unwrap();
    let s = load_study(&study).unwrap();
    assert_eq!(s.design, d);
    assert_eq!(s.outcomes, t);
    assert_eq!(s.manifest, m);
    assert_eq!(s.replicates, 3);
    assert_eq!(s.row_ids, (0..8).collect::<Vec<_>>());
    let td = s.training_data().unwrap();
    assert_eq!(td.attack_rate.len(), 8);
    assert_eq!(
        td.attack_rate[2][1],
        t.rows[7].cumulative_infections as f64 / 10_000.0
    );
}

#[test]
fn replicate_count_inferred() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("s");
    write_study(
        &study,
        &lhs_sample(5, 10, 1),
        &table(5, 20, 0.0),
        &manifest(),
    )
    .unwrap();
    assert_eq!(load_study(&study).unwrap().replicates, 20);
}

#[test]
fn same_content_same_run_id() {
    let dir = tempfile::tempdir().unwrap();
    let d = lhs_sample(6, 10, 9);
    let t = table(6, 2, 0.0);
    let a = write_study(&dir.path().join("a"), &d, &t, &manifest()).unwrap();
    let mut later = manifest();
    later.created_unix = 99;
    let b = write_study(&dir.path().join("b"), &d, &t, &later).unwrap();
    assert_eq!(a.run_id, b.run_id);
    // Re-serializing the manifest keeps the id.
    let back = RunManifest::from_json(&b.to_json().unwrap()).unwrap();
    assert_eq!(back.compute_run_id(), b.run_id);
    let c = write_study(&dir.path().join("c"), &d, &table(6, 2, 1.0), &manifest()).unwrap();
    assert_ne!(a.run_id, c.run_id);
}

#[test]
fn mismatched_row_ids_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("s");
    let err = write_study(
        &study,
        &lhs_sample(6, 10, 1),
        &table(5, 2, 0.0),
        &manifest(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::RowIdMismatch(_)), "{err}");
    assert!(!study.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_outcomes_named() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("s");
    write_study(
        &study,
        &lhs_sample(4, 10, 1),
        &table(4, 2, 0.0),
        &manifest(),
    )
    .unwrap();
    std::fs::remove_file(study.join(OUTCOMES_FILE)).unwrap();
    let err = load_study(&study).unwrap_err();
    assert!(err.to_string().contains("outcomes.csv"), "{err}");
}

fn truncate_line(path: &Path, line: usize) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let l = &mut lines[line - 1];
    let cut = l.rfind(',').unwrap();
    l.truncate(cut);
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn truncated_row_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("s");
    write_study(
        &study,
        &lhs_sample(4, 10, 1),
        &table(4, 2, 0.0),
        &manifest(),
    )
    .unwrap();
    truncate_line(&study.join(OUTCOMES_FILE), 5);
    let err = load_study(&study).unwrap_err();
    match &err {
        Error::Csv { line, file, .. } => {
            assert_eq!(*line, 5);
            assert!(file.ends_with(OUTCOMES_FILE));
        }
        other => panic!("unexpected {other}"),
    }
    truncate_line(&study.join(DESIGN_FILE), 3);
    assert!(load_study(&study)
        .unwrap_err()
        .to_string()
        .contains("line 3"));
}

#[test]
fn future_schema_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("s");
    write_study(
        &study,
        &lhs_sample(4, 10, 1),
        &table(4, 2, 0.0),
        &manifest(),
    )
    .unwrap();
    let p = study.join("manifest.json");
    let text = std::fs::read_to_string(&p)
        .unwrap()
        .replace("\"schema_version\": 1", "\"schema_version\": 7");
    std::fs::write(&p, text).unwrap();
    assert!(matches!(
        load_study(&study),
        Err(Error::SchemaVersion {
            found: 7,
            supported: 1
        })
    ));
}

#[test]
fn uneven_replicates_rejected() {
    let mut t = table(3, 2, 0.0);
    t.rows.pop();
    assert!(t.replicates().is_err());
    let mut t = table(3, 2, 0.0);
    t.rows[1].replicate = 0;
    assert!(t.replicates().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn outcome_csv_round_trips_full_precision(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6)) {
        let dir = tempfile::tempdir().unwrap();
        let mut t = table(2, 1, 0.0);
        t.rows[0].svi_variance = vals[0];
        t.rows[0].attack_svi = [vals[1], vals[2], vals[3], vals[4]];
        t.rows[1].boosted_fraction = vals[5];
        let p = dir.path().join("o.csv");
        t.write_csv(&p).unwrap();
        prop_assert_eq!(OutcomeTable::read_csv(&p).unwrap(), t);
    }

    #[test]
    fn design_csv_round_trips(seed in any::<u64>(), n in 1usize..30) {
        let dir = tempfile::tempdir().unwrap();
        let d = lhs_sample(n, 10, seed);
        let p = dir.path().join("d.csv");
        d.write_csv(&p, false).unwrap();
        let (ids, back): (Vec<usize>, DesignMatrix) = DesignMatrix::read_csv(&p).unwrap();
        prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(back, d);
    }
}
