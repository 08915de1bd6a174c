use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qidfair::fixtures::{two_path_dataset, two_path_net, two_path_schema};
use qidfair::report::ReportFile;
use qidfair::Network;

fn qidfair(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qidfair"))
        .current_dir(dir)
        .env_remove("QIDFAIR_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Fixture schema, data and hand-built model, plus a config with short search budgets.
fn fixture_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let schema = two_path_schema();
    schema.save(p.join("schema.toml")).unwrap();
    two_path_dataset().write_csv(p.join("data.csv"), &schema).unwrap();
    two_path_net().save(p.join("model.json")).unwrap();
    fs::write(
        p.join("run.toml"),
        "[paths]\ndataset = \"data.csv\"\nschema = \"schema.toml\"\nmodel = \"model.json\"\noutput_dir = \"out\"\n\n\
         [train]\nhidden_layers = [8, 4]\nepochs = 20\n\n[search]\ntimeout_secs = 10.0\nmax_seeds = 40\nmax_local = 100\n",
    )
    .unwrap();
    dir
}

fn out(dir: &Path) -> PathBuf {
    dir.join("out")
}

#[test]
fn help_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = qidfair(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for cmd in ["train", "search", "localize", "mitigate", "report"] {
        assert!(stdout(&o).contains(cmd), "{cmd}");
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qidfair(dir.path(), &["search", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_schema_names_path() {
    let dir = fixture_dir();
    let o = qidfair(dir.path(), &["--config", "run.toml", "--schema", "nope.toml", "train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.toml"), "{}", stderr(&o));
}

#[test]
fn bad_config_value_is_usage_error() {
    let dir = fixture_dir();
    let o = qidfair(dir.path(), &["--config", "run.toml", "search", "--timeout", "0"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "[search]\nmax_local = -3\n").unwrap();
    let o = qidfair(dir.path(), &["--config", "bad.toml", "search"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("search.max_local"), "{}", stderr(&o));
}

#[test]
fn train_round_trips_and_is_seeded() {
    let dir = fixture_dir();
    let p = dir.path();
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let o = qidfair(
            p,
            &["--config", "run.toml", "--seed", "7", "--model", &format!("{sub}/model.json"), "--output-dir", sub, "train"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("accuracy"));
        files.push(fs::read(p.join(sub).join("model.json")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let net = Network::load(p.join("a/model.json")).unwrap();
    assert_eq!(net.layer_dims(), &[3, 8, 4, 2]);
    let report = ReportFile::load(p.join("a/train.json")).unwrap();
    assert_eq!(report.kind, "train");
    assert_eq!(report.config.seed, 7);
}

#[test]
fn untrained_model_shape_mismatch() {
    let dir = fixture_dir();
    Network::zeros(&[5, 2]).unwrap().save(dir.path().join("wrong.json")).unwrap();
    let o = qidfair(dir.path(), &["--config", "run.toml", "--model", "wrong.json", "search"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wrong.json"));
}

#[test]
fn search_writes_versioned_reports() {
    let dir = fixture_dir();
    let o = qidfair(dir.path(), &["--config", "run.toml", "search"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["K_I", "K_F", "Q_inf", "Q_1", "#I", "severity"] {
        assert!(text.contains(key), "{key}");
    }
    let run = out(dir.path()).join("search/run_000");
    let report = ReportFile::load(run.join("report.json")).unwrap();
    assert_eq!(report.kind, "search");
    assert!(report.payload["k_max"].as_u64().unwrap() >= 2);
    assert!(report.payload.get("elapsed").is_none());
    assert!(report.timing.get("elapsed").is_some());
    let csv = fs::read_to_string(run.join("test_cases.csv")).unwrap();
    assert!(csv.starts_with("# format_version = 1\n"));
    assert!(csv.contains("# config = "));
    assert!(fs::read_to_string(run.join("id_instances.csv")).unwrap().contains("unfavorable_z,favorable_z"));
}

#[test]
fn repeats_write_runs_and_summary() {
    let dir = fixture_dir();
    let o = qidfair(dir.path(), &["--config", "run.toml", "search", "--repeats", "3", "--max-seeds", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for r in 0..3 {
        assert!(out(dir.path()).join(format!("search/run_{r:03}/report.json")).exists());
    }
    let summary = ReportFile::load(out(dir.path()).join("search/summary.json")).unwrap();
    assert_eq!(summary.payload["runs"], 3);
    assert!(summary.payload["k_max"]["std"].as_f64().unwrap() >= 0.0);
}

#[test]
fn output_dir_env_override() {
    let dir = fixture_dir();
    let o = Command::new(env!("CARGO_BIN_EXE_qidfair"))
        .current_dir(dir.path())
        .env("QIDFAIR_OUTPUT_DIR", dir.path().join("elsewhere"))
        .args(["--config", "run.toml", "search", "--max-seeds", "5"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("elsewhere/search/run_000/report.json").exists());
    assert!(!out(dir.path()).exists());
}

#[test]
fn localize_and_mitigate_fixture() {
    let dir = fixture_dir();
    let p = dir.path();
    let base = ["--config", "run.toml"];
    let run = |extra: &[&str]| qidfair(p, &[&base[..], extra].concat());

    let o = run(&["localize"]);
    assert_eq!(o.status.code(), Some(2), "localize before search");

    assert_eq!(run(&["search"]).status.code(), Some(0));
    let o = run(&["localize"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("layer 1 "), "{text}");
    assert!(text.contains("neuron-1  N_1 "), "{text}");
    assert!(text.contains("neuron+1  N/A"), "{text}");

    let o = run(&["mitigate", "--neuron", "9"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["mitigate", "--mode", "both"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = ReportFile::load(out(p).join("mitigate.json")).unwrap();
    let r = &m.payload["results"][0];
    assert_eq!(r["mode"], "deactivate");
    assert!(r["mean_k_after"].as_f64().unwrap() < r["mean_k_before"].as_f64().unwrap());
    let drop = r["accuracy_before"].as_f64().unwrap() - r["accuracy_after"].as_f64().unwrap();
    assert!(drop.abs() <= 0.05);
    assert_eq!(m.payload["not_applicable"][0], "activate");
    assert!(m.timing["t_i"].as_f64().unwrap() >= 0.0);

    let o = run(&["report"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for section in ["== search run 0", "== localize", "== mitigate", "K^=0", "T_I"] {
        assert!(text.contains(section), "{section}");
    }
    let o = run(&["report", "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["localize"]["payload"]["sensitivity"]["chosen"], 1);
}

#[test]
fn inadmissible_neuron_is_runtime_error() {
    let dir = fixture_dir();
    let p = dir.path();
    let base = ["--config", "run.toml"];
    assert_eq!(qidfair(p, &[&base[..], &["search"]].concat()).status.code(), Some(0));
    assert_eq!(qidfair(p, &[&base[..], &["localize"]].concat()).status.code(), Some(0));
    // the label-carrying neuron has no admissible value
    let o = qidfair(p, &[&base[..], &["mitigate", "--neuron", "0"]].concat());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("inadmissible"));
}

#[test]
fn report_without_outputs_fails() {
    let dir = fixture_dir();
    assert_eq!(qidfair(dir.path(), &["--config", "run.toml", "report"]).status.code(), Some(1));
}
