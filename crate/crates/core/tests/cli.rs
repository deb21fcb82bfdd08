use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sibrar::data::{synth_generate, SyntheticModality, SyntheticSpec};
use sibrar::evaluation::{EvalReport, SignificanceReport};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn sibrar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sibrar"))
        .args(args)
        .env("SIBRAR_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = sibrar(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn lines(path: impl AsRef<Path>) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

fn split_fixture(dir: &Path, kind: &str, out: &str) -> PathBuf {
    ok(&["split", "--interactions", &fixture("interactions.csv"), "--kind", kind, "--seed", "2", "--out", &p(dir, out)]);
    dir.join(out)
}

#[test]
fn warm_split_conserves_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = split_fixture(dir.path(), "warm", "a");
    let b = split_fixture(dir.path(), "warm", "b");
    let input = lines(fixture("interactions.csv")).len() - 1;
    let mut total = 0;
    for f in ["train.csv", "valid.csv", "test.csv"] {
        total += lines(a.join(f)).iter().filter(|l| !l.starts_with("user_id")).count();
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    assert_eq!(total, input);
}

#[test]
fn split_manifest_records_the_kind() {
    let dir = tempfile::tempdir().unwrap();
    let s = split_fixture(dir.path(), "item_cold", "s");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(s.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "item_cold");
}

#[test]
fn bad_ratios_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sibrar(&["split", "--interactions", &fixture("interactions.csv"), "--kind", "warm", "--ratios", "0.9,0.2,0.1", "--out", &p(dir.path(), "x")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn unknown_modality_lists_the_known_ones() {
    let dir = tempfile::tempdir().unwrap();
    let s = split_fixture(dir.path(), "warm", "s");
    let genre = format!("genre=categorical:{}", fixture("genre.csv"));
    let out = sibrar(&["train", "--split-dir", s.to_str().unwrap(), "--features", &genre, "--modalities", "genre,lyrics", "--out", &p(dir.path(), "run")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lyrics") && err.contains("genre"), "{err}");
}

/// Splits the fixture item-cold and trains on genre + audio.
fn trained_run(dir: &Path) -> PathBuf {
    let s = split_fixture(dir, "item_cold", "split");
    let cfg = p(dir, "cfg.json");
    fs::write(&cfg, r#"{"d_emb":8,"branch_hidden":[8],"counterpart_hidden":[8],"n_neg":2,"batch_size":16,"lr":0.01}"#).unwrap();
    let genre = format!("genre=categorical:{}", fixture("genre.csv"));
    let audio = format!("audio=vector:{}", fixture("audio.csv"));
    ok(&["train", "--split-dir", s.to_str().unwrap(), "--features", &genre, "--features", &audio, "--modalities", "genre,audio", "--config", &cfg, "--out", &p(dir, "run")]);
    dir.join("run")
}

#[test]
fn train_writes_a_complete_run_and_eval_defaults_to_ten() {
    let dir = tempfile::tempdir().unwrap();
    let run = trained_run(dir.path());
    for f in ["config.json", "metrics.csv", "checkpoint.json", "manifest.json", "model.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let metrics = lines(run.join("metrics.csv"));
    assert_eq!(metrics[0], "epoch,train_loss,val_ndcg@10");
    assert!((2..=51).contains(&metrics.len()));

    ok(&["eval", "--run-dir", run.to_str().unwrap()]);
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(run.join("eval_test.json")).unwrap()).unwrap();
    assert_eq!(report.k, 10);
    assert_eq!(report.context.modalities, Some(vec!["genre".to_string(), "audio".to_string()]));
    let users = lines(run.join("eval_test_users.csv"));
    assert_eq!(users[0], "user,ndcg,precision,recall,ap");
    assert!(users[1].starts_with("user"));

    ok(&["gap", "--run-dir", run.to_str().unwrap(), "--sample-size", "50"]);
    assert!(lines(run.join("projections.csv"))[0].starts_with("entity_id,modality,c1,"));
    let gap: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("gap_report.json")).unwrap()).unwrap();
    assert_eq!(gap["requested_sample_size"], 50);
}

#[test]
fn tampered_inputs_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let run = trained_run(dir.path());
    let train = dir.path().join("split/train.csv");
    let mut text = fs::read_to_string(&train).unwrap();
    text.push('\n');
    fs::write(&train, text).unwrap();
    let out = sibrar(&["eval", "--run-dir", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.csv"));
    assert!(!run.join("eval_test.json").exists());
}

#[test]
fn edited_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let run = trained_run(dir.path());
    let cfg = run.join("config.json");
    let text = fs::read_to_string(&cfg).unwrap().replace("\"n_neg\": 2", "\"n_neg\": 3");
    fs::write(&cfg, text).unwrap();
    let out = sibrar(&["sweep", "--run-dir", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
}

#[test]
fn compare_against_itself_is_not_significant() {
    let dir = tempfile::tempdir().unwrap();
    let run = trained_run(dir.path());
    ok(&["eval", "--run-dir", run.to_str().unwrap()]);
    let report = p(&run, "eval_test.json");
    let out = p(dir.path(), "cmp.json");
    ok(&["compare", "--reports", &format!("a={report}"), &format!("b={report}"), "--out", &out]);
    let sig: SignificanceReport = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(sig.comparisons.len(), 1);
    let t = &sig.comparisons[0].test;
    assert_eq!(t.p, 1.0);
    assert!(!t.significant);
}

#[test]
fn sweep_over_five_modalities_has_31_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_users: 40,
        n_items: 30,
        latent_dim: 3,
        interactions_per_user: 5,
        modalities: (0..5).map(|m| SyntheticModality::item(format!("m{m}"), 3, 0.5)).collect(),
        seed: 1,
    };
    fs::write(p(dir.path(), "spec.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    ok(&["synth", "--spec", &p(dir.path(), "spec.json"), "--out", &p(dir.path(), "data")]);
    let data = synth_generate(&spec).unwrap();
    assert_eq!(
        lines(dir.path().join("data/interactions.csv")).len(),
        data.interactions.nnz() + 1
    );
    ok(&["split", "--interactions", &p(dir.path(), "data/interactions.csv"), "--kind", "warm", "--out", &p(dir.path(), "split")]);
    let cfg = p(dir.path(), "cfg.json");
    fs::write(&cfg, r#"{"training_modalities":["m0","m1","m2","m3","m4"],"d_emb":4,"max_epochs":1}"#).unwrap();
    let feats: Vec<String> = (0..5).map(|m| format!("m{m}=vector:{}", p(dir.path(), &format!("data/m{m}.csv")))).collect();
    let mut args = vec!["train", "--split-dir", &p(dir.path(), "split")].into_iter().map(String::from).collect::<Vec<_>>();
    for f in &feats {
        args.push("--features".into());
        args.push(f.clone());
    }
    args.extend(["--config".into(), cfg, "--out".into(), p(dir.path(), "run")]);
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    ok(&["sweep", "--run-dir", &p(dir.path(), "run"), "--split", "valid"]);
    let rows = lines(dir.path().join("run/sweep_valid.csv"));
    assert_eq!(rows[0], "mask,modalities,ndcg,precision,recall,ap,coverage");
    assert_eq!(rows.len(), 32);
}

#[test]
fn search_resumes_and_refits_the_best() {
    let dir = tempfile::tempdir().unwrap();
    let s = split_fixture(dir.path(), "item_cold", "split");
    let space = p(dir.path(), "space.json");
    fs::write(
        &space,
        r#"{"base":{"d_emb":4,"branch_hidden":[4],"counterpart_hidden":[4],"n_neg":2,"max_epochs":2},
            "params":{"lr":{"log_uniform":[0.001,0.05]}},
            "modalities":["genre","audio"],"policy":"one_or_more"}"#,
    )
    .unwrap();
    let genre = format!("genre=categorical:{}", fixture("genre.csv"));
    let audio = format!("audio=vector:{}", fixture("audio.csv"));
    let run = |budget: &str| {
        ok(&["search", "--split-dir", s.to_str().unwrap(), "--features", &genre, "--features", &audio, "--space", &space, "--budget", budget, "--seed", "3", "--out", &p(dir.path(), "search")]);
        fs::read_to_string(dir.path().join("search/leaderboard.csv")).unwrap()
    };
    let two = run("2");
    assert_eq!(two.lines().count(), 3);
    let four = run("4");
    assert_eq!(four.lines().count(), 5);
    // the first two trials are kept, not rerun; only ranks may shift
    let unranked = |r: &str| r.split_once(',').unwrap().1.to_string();
    for row in two.lines().skip(1).map(unranked) {
        let trial = row.split(',').next().unwrap().to_string();
        let again = four.lines().skip(1).map(unranked).find(|r| r.split(',').next() == Some(&trial)).unwrap();
        assert_eq!(row, again);
    }
    assert!(dir.path().join("search/best/checkpoint.json").exists());
}
