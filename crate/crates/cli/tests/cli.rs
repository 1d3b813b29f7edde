mod common;

use std::path::Path;
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::Request;
use landscape_cli::service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn landscape(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landscape"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn landscape")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = landscape(args, cwd);
    assert!(
        out.status.success(),
        "landscape {args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = landscape(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = landscape(
        &["design", "--n", "5", "--out", "d.csv", "--colour", "red"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("d.csv").exists());

    let out = landscape(&[], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = landscape(
        &[
            "fit",
            "--design",
            "nope.csv",
            "--outcomes",
            "nope.csv",
            "--out",
            "m.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let f = common::fixture();
    let model = f.model.to_str().unwrap();
    let out = landscape(
        &["predict", "--model", model, "--policy", "pcr_mult=11"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1x - 10x"));
}

#[test]
fn design_reproduces_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["design", "--n", "25", "--seed", "3", "--out", "a.csv"], p);
    ok(&["design", "--n", "25", "--seed", "3", "--out", "b.csv"], p);
    ok(&["design", "--n", "25", "--seed", "4", "--out", "c.csv"], p);
    ok(
        &[
            "design", "--n", "25", "--seed", "3", "--out", "s.csv", "--scaled",
        ],
        p,
    );
    let read = |f: &str| std::fs::read_to_string(p.join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert!(read("s.csv")
        .lines()
        .next()
        .unwrap()
        .contains("ct_capacity"));
    assert_eq!(read("a.csv").lines().count(), 26);
}

/// CLI `predict` and `POST /predict` must agree bit for bit.
#[tokio::test]
async fn cli_and_service_predictions_identical() {
    let f = common::fixture();
    let app = router(AppState::from_config(&ServiceConfig {
        model: Some(f.model.clone()),
        ..Default::default()
    }));
    let policies = [
        json!({}),
        json!({"pcr_mult": 4.5, "ct_capacity": 21000}),
        json!({"vaccine_threshold": 0.75, "mask_adherence": 0.2, "mask_duration_ct": 14}),
        json!({"antigen_mult": 9.99, "booster_threshold": 0.123456789, "quarantine_adherence_ct": 0.91}),
    ];
    for pol in policies {
        let inline: Vec<String> = pol
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let inline = if inline.is_empty() {
            "pcr_mult=1".to_string()
        } else {
            inline.join(",")
        };
        let cli: Value = serde_json::from_str(&ok(
            &[
                "predict",
                "--model",
                f.model.to_str().unwrap(),
                "--policy",
                &inline,
            ],
            f.dir.path(),
        ))
        .unwrap();
        let req = Request::builder()
            .method("POST")
            .uri("/predict")
            .header("content-type", "application/json")
            .body(Body::from(json!({ "policy": pol }).to_string()))
            .unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
            .await
            .unwrap();
        let svc: Value = serde_json::from_slice(&bytes).unwrap();
        for outcome in ["attack_rate", "cumulative_infections", "svi_variance"] {
            for field in ["mean", "sd", "lo90", "hi90"] {
                let a = cli[outcome][field].as_f64().unwrap();
                let b = svc[outcome][field].as_f64().unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "{inline}: {outcome}.{field}");
            }
        }
    }
}

/// popgen → design → simulate → fit → explore → rank → validate.
#[test]
fn pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        &[
            "popgen", "--agents", "10000", "--tracts", "20", "--seed", "5", "--out", "pop.json",
        ],
        p,
    );
    ok(
        &["design", "--n", "60", "--seed", "2", "--out", "design.csv"],
        p,
    );
    ok(
        &[
            "simulate",
            "--pop",
            "pop.json",
            "--design",
            "design.csv",
            "--reps",
            "5",
            "--seed",
            "1",
            "--out",
            "outcomes.csv",
        ],
        p,
    );
    let outcomes = std::fs::read_to_string(p.join("outcomes.csv")).unwrap();
    assert_eq!(outcomes.lines().count(), 1 + 60 * 5);
    assert!(p.join("outcomes.daily.csv").exists());

    ok(
        &[
            "fit",
            "--design",
            "design.csv",
            "--outcomes",
            "outcomes.csv",
            "--out",
            "model.json",
            "--starts",
            "2",
        ],
        p,
    );
    ok(
        &[
            "simulate", "--pop", "pop.json", "--reps", "5", "--seed", "900", "--study", "baseline",
        ],
        p,
    );
    let explore = ok(
        &[
            "explore",
            "--model",
            "model.json",
            "--k",
            "10",
            "--n-per-combo",
            "10000",
            "--goal-baseline-fraction",
            "0.7",
            "--baseline",
            "baseline",
            "--constrain",
            "ct_capacity=33000",
            "--constrain",
            "mask_adherence=0.1",
            "--out",
            "cands.csv",
        ],
        p,
    );
    assert!(explore.contains("sampled 10000"), "{explore}");
    assert!(p.join("cands.summary.json").exists());
    ok(
        &[
            "rank",
            "--candidates",
            "cands.csv",
            "--count",
            "10",
            "--out",
            "winners.csv",
        ],
        p,
    );
    let winners = std::fs::read_to_string(p.join("winners.csv")).unwrap();
    let n_winners = winners.lines().count() - 1;
    assert!(n_winners > 0 && n_winners <= 10, "{winners}");

    let val = ok(
        &[
            "validate",
            "--policies",
            "winners.csv",
            "--pop",
            "pop.json",
            "--reps",
            "3",
            "--model",
            "model.json",
            "--baseline",
            "baseline",
            "--out",
            "validation.csv",
        ],
        p,
    );
    assert!(val.contains("below baseline"), "{val}");
    assert_eq!(
        std::fs::read_to_string(p.join("validation.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + n_winners
    );

    // Same request, same candidates.
    ok(
        &[
            "explore",
            "--model",
            "model.json",
            "--k",
            "10",
            "--n-per-combo",
            "10000",
            "--goal-baseline-fraction",
            "0.7",
            "--baseline",
            "baseline",
            "--constrain",
            "ct_capacity=33000,mask_adherence=0.1",
            "--out",
            "cands2.csv",
        ],
        p,
    );
    assert_eq!(
        std::fs::read(p.join("cands.csv")).unwrap(),
        std::fs::read(p.join("cands2.csv")).unwrap()
    );
}

#[test]
fn calibrate_subcommands_run() {
    let f = common::fixture();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let pop = f.pop.to_str().unwrap();
    std::fs::write(
        p.join("obs.csv"),
        "day,diagnoses,tests\n0,3,50\n1,4,60\n2,5,55\n",
    )
    .unwrap();
    let t = ok(
        &[
            "calibrate",
            "targets",
            "--pop",
            pop,
            "--reps",
            "4",
            "--observed",
            "obs.csv",
            "--out",
            "curves.csv",
        ],
        p,
    );
    assert!(
        t.contains("underreport ratio") && t.contains("vs observed"),
        "{t}"
    );
    ok(
        &[
            "calibrate",
            "r0",
            "--pop",
            pop,
            "--sims",
            "200",
            "--out",
            "r0.csv",
        ],
        p,
    );
    assert_eq!(
        std::fs::read_to_string(p.join("r0.csv"))
            .unwrap()
            .lines()
            .count(),
        201
    );
    ok(
        &[
            "calibrate",
            "surface",
            "--pop",
            pop,
            "--pair",
            "beta,symp_or",
            "--lhs",
            "20",
            "--reps",
            "2",
            "--grid",
            "4",
            "--starts",
            "1",
            "--out",
            "surface.csv",
        ],
        p,
    );
    assert_eq!(
        std::fs::read_to_string(p.join("surface.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 16
    );
}
