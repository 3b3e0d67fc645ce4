//! End-to-end runs of the `activeprune` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use activeprune::corpus::write_jsonl;
use activeprune::ngram::arpa;
use activeprune::synth::{self, SynthConfig};
use activeprune::tokenizer::Vocabulary;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_activeprune"));
    c.env_remove("ACTIVEPRUNE_SCORER_URL");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Train/test JSONL, a reference corpus and a config in `dir`.
fn workspace(dir: &Path, train_docs: usize) -> PathBuf {
    let (train, _) = synth::generate("train", &SynthConfig { docs: train_docs, noise_fraction: 0.1, seed: 1, ..SynthConfig::default() });
    let (test, _) = synth::generate("test", &SynthConfig { docs: 300, seed: 2, first_id: 900_000, ..SynthConfig::default() });
    write_jsonl(&dir.join("train.jsonl"), train.documents()).unwrap();
    write_jsonl(&dir.join("test.jsonl"), test.documents()).unwrap();
    fs::write(dir.join("reference.txt"), synth::reference_corpus(2000, 3).join("\n")).unwrap();
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        r#"output_dir = "runs"

[data]
train = "train.jsonl"
test = "test.jsonl"
lm_corpus = "reference.txt"

[lm]
order = 3

[sim]
iterations = 5
feature_dim = 4096

[sim.train]
epochs = 5

[run]
modes = ["active_prune", "random"]
seeds = [1, 2, 3]
"#,
    )
    .unwrap();
    cfg
}

#[test]
fn train_lm_writes_importable_model() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, synth::reference_corpus(500, 9).join("\n")).unwrap();
    let out = dir.path().join("lm");
    let o = run(bin().args(["train-lm", "--order", "4", "--corpus"]).arg(&corpus).arg("--out").arg(&out));
    assert!(o.status.success());
    for f in ["model.bin", "model.arpa", "vocab.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let vocab = Vocabulary::load(&out.join("vocab.txt")).unwrap();
    let text = fs::read_to_string(out.join("model.arpa")).unwrap();
    let model = arpa::parse_arpa(&text, &vocab, true).unwrap();
    assert_eq!(model.order(), 4);
    assert!(model.perplexity(&vocab.tokenize("the movie was great")).is_finite());
}

#[test]
fn train_lm_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let o = run(bin().args(["train-lm", "--corpus"]).arg(&missing).arg("--out").arg(dir.path()));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope.txt"), "{}", stderr(&o));

    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, "a b c\n").unwrap();
    let o = run(bin().args(["train-lm", "--order", "6", "--corpus"]).arg(&corpus).arg("--out").arg(dir.path()));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("order"), "{}", stderr(&o));
}

fn trained_model(dir: &Path) -> PathBuf {
    let corpus = dir.join("reference.txt");
    let out = dir.join("lm");
    assert!(run(bin().args(["train-lm", "--order", "3", "--corpus"]).arg(&corpus).arg("--out").arg(&out)).status.success());
    out.join("model.bin")
}

fn pool_ids(dir: &Path) -> Vec<u64> {
    fs::read_to_string(dir.join("pool.txt")).unwrap().lines().map(|l| l.parse().unwrap()).collect()
}

#[test]
fn prune_keeps_a_quarter_and_random_mode_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path(), 1000);
    let model = trained_model(dir.path());
    let train = dir.path().join("train.jsonl");

    let out = dir.path().join("p");
    assert!(run(bin().arg("prune").arg("--dataset").arg(&train).arg("--model").arg(&model).arg("--out").arg(&out)).status.success());
    let ids = pool_ids(&out);
    assert_eq!(ids.len(), 250);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("prune_report.json")).unwrap()).unwrap();
    assert_eq!(report["kept"], 250);
    assert_eq!(report["from_quality"], 50);
    assert_eq!(report["scorer_calls"], 100);

    let random = |seed: &str, name: &str| {
        let o = dir.path().join(name);
        let cmd = bin()
            .args(["prune", "--mode", "random", "--seed", seed, "--dataset"])
            .arg(&train)
            .arg("--model")
            .arg(&model)
            .arg("--out")
            .arg(&o)
            .output()
            .unwrap();
        assert!(cmd.status.success());
        pool_ids(&o)
    };
    let a = random("5", "r1");
    assert_eq!(a, random("5", "r2"));
    assert_ne!(a, random("6", "r3"));
}

#[test]
fn infeasible_split_fails_before_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace(dir.path(), 1000);
    let model = trained_model(dir.path());
    let mut text = fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[prune]\nm = 10\n");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("p");
    let o = run(bin().arg("--config").arg(&cfg).arg("prune").arg("--dataset").arg(dir.path().join("train.jsonl")).arg("--model").arg(&model).arg("--out").arg(&out));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("m = 10") || stderr(&o).contains("infeasible"), "{}", stderr(&o));
    assert!(!out.join("pool.txt").exists());
}

fn metric_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    let keep: Vec<usize> = ["iteration", "f1_macro", "labeled_count", "scorer_calls"]
        .iter()
        .map(|h| headers.iter().position(|x| x == *h).unwrap())
        .collect();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            keep.iter().map(|&i| rec[i].to_string()).collect()
        })
        .collect()
}

#[test]
fn run_resume_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace(dir.path(), 2000);
    let full = dir.path().join("full");
    assert!(run(bin().arg("--config").arg(&cfg).arg("--out").arg(&full).arg("run")).status.success());
    let agg = fs::read_to_string(full.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 10, "{agg}");
    assert!(full.join("manifest.json").is_file());
    for mode in ["active_prune", "random"] {
        for seed in 1..=3 {
            assert!(full.join(mode).join(format!("seed_{seed}")).join("metrics.csv").is_file());
        }
    }

    let resumed = dir.path().join("resumed");
    let o = run(bin().arg("--config").arg(&cfg).arg("--out").arg(&resumed).args(["run", "--stop-after", "2"]));
    assert!(o.status.success());
    assert!(!resumed.join("aggregate.csv").exists());
    assert!(resumed.join("random/seed_2/checkpoint/state.json").is_file());
    assert!(run(bin().arg("--config").arg(&cfg).arg("--out").arg(&resumed).arg("run")).status.success());
    for mode in ["active_prune", "random"] {
        for seed in 1..=3 {
            let p = format!("{mode}/seed_{seed}/metrics.csv");
            assert_eq!(metric_rows(&full.join(&p)), metric_rows(&resumed.join(&p)), "{p}");
        }
    }

    let rep = dir.path().join("rep");
    assert!(run(bin().arg("report").arg(&full).arg("--out").arg(&rep)).status.success());
    let eff = fs::read_to_string(rep.join("efficiency.csv")).unwrap();
    assert_eq!(eff.lines().count(), 3, "{eff}");
    assert!(rep.join("tradeoff.csv").is_file());

    let o = run(bin().arg("report").arg(dir.path().join("empty")));
    assert!(!o.status.success());
}

#[test]
fn effective_config_reflects_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace(dir.path(), 100);
    let o = run(bin()
        .env("ACTIVEPRUNE_SCORER_URL", "http://localhost:1234/score")
        .arg("--config")
        .arg(&cfg)
        .args(["--seed", "42", "--threads", "3", "--print-effective-config", "run"]));
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let v: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(v["run"]["seeds"].as_array().unwrap().len(), 1);
    assert_eq!(v["run"]["seeds"][0].as_integer(), Some(42));
    assert_eq!(v["scorer"]["parallelism"].as_integer(), Some(3));
    assert_eq!(v["scorer"]["url"].as_str(), Some("http://localhost:1234/score"));
    assert_eq!(v["lm"]["order"].as_integer(), Some(3));
}

#[test]
fn score_prints_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path(), 50);
    let o = run(bin().arg("score").arg(dir.path().join("test.jsonl")));
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 300);
    assert!(lines.iter().all(|v| (0.0..=1.0).contains(&v["q"].as_f64().unwrap())));
}
