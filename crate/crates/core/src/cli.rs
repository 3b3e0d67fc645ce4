//! The `activeprune` command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::al_sim::{self, RunOptions, SimInputs};
use crate::config::{RunConfig, ScorerKind, ScorerSettings};
use crate::corpus::{load_dataset, Dataset, DatasetFormat, DocId, RunState};
use crate::ngram::{arpa, binary, train_from_text, NGramModel};
use crate::prune::{PruneMode, Pruner};
use crate::quality::{self, HttpScorer, MockScorer, Scorer, ScorerBudget, TaskType};
use crate::report::{self, RunRecord};
use crate::tokenizer::Vocabulary;

pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Parser)]
#[command(name = "activeprune", version, about = "Two-stage pool pruning for active learning")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run with this single seed instead of the configured list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for scoring and featurization.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print the configuration after overrides and exit.
    #[arg(long, global = true)]
    pub print_effective_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an n-gram model; writes model.bin, model.arpa and vocab.txt.
    TrainLm {
        /// UTF-8 text, one sentence per line.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = 1)]
        min_count: u32,
    },
    /// Build one filtered pool; writes pool.txt and prune_report.json.
    Prune {
        #[arg(long)]
        dataset: PathBuf,
        /// Binary model from `train-lm`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        mode: Option<PruneMode>,
    },
    /// Run the configured simulations for every mode and seed.
    Run {
        /// Stop every run after this many iterations (resume by rerunning).
        #[arg(long, hide = true)]
        stop_after: Option<u64>,
    },
    /// Efficiency and tradeoff tables for a finished run directory.
    Report { run_dir: PathBuf },
    /// Quality-score a JSONL file; writes scores.jsonl (stdout without --out).
    Score {
        input: PathBuf,
        /// Binary model whose vocabulary the mock scorer uses.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let mut c = RunConfig::default();
            c.apply_env();
            c
        }
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.run.seeds = vec![seed];
        cfg.prune.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.scorer.parallelism = t;
    }
    Ok(cfg)
}

fn build_scorer(settings: &ScorerSettings, vocab: Arc<Vocabulary>) -> Result<Box<dyn Scorer>> {
    Ok(match settings.kind {
        ScorerKind::Mock => Box::new(MockScorer::new(vocab)),
        ScorerKind::Http => {
            let url = settings
                .url
                .clone()
                .ok_or_else(|| anyhow!("http scorer needs scorer.url"))?;
            Box::new(HttpScorer::new(url, settings.timeout()))
        }
    })
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    load_dataset(path, DatasetFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))
}

fn perplexities(model: &NGramModel, vocab: &Vocabulary, ds: &Dataset) -> BTreeMap<DocId, f64> {
    model
        .score_pool(ds, vocab)
        .into_iter()
        .map(|(id, s)| (id, s.ppl))
        .collect()
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_train_lm(corpus: &Path, order: usize, min_count: u32, out: &Path) -> Result<()> {
    if !(1..=crate::ngram::MAX_ORDER).contains(&order) {
        bail!("order must be 1..5, got {order}");
    }
    let text = fs::read_to_string(corpus).with_context(|| format!("cannot read corpus {}", corpus.display()))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let started = Instant::now();
    let (model, vocab, stats) =
        train_from_text(&lines, order, min_count).with_context(|| format!("training on {}", corpus.display()))?;
    let secs = started.elapsed().as_secs_f64();
    fs::create_dir_all(out)?;
    binary::save(&model, &vocab, &out.join("model.bin"))?;
    arpa::export_arpa(&model, &vocab, &out.join("model.arpa"))?;
    vocab.save(&out.join("vocab.txt"))?;
    println!(
        "sentences {}  tokens {}  types {}  ngrams {:?}  built in {secs:.3}s",
        stats.sentences,
        stats.tokens,
        vocab.len(),
        stats.ngrams
    );
    if !stats.fallback_orders.is_empty() {
        println!("orders using the fallback discount: {:?}", stats.fallback_orders);
    }
    Ok(())
}

pub fn cmd_prune(cfg: &RunConfig, dataset: &Path, model: &Path, mode: Option<PruneMode>, out: &Path) -> Result<()> {
    let mut pcfg = cfg.prune.clone();
    if let Some(m) = mode {
        pcfg.mode = m;
    }
    let ds = read_dataset(dataset)?;
    // Fail on an infeasible split before any scoring happens.
    pcfg.validate()?;
    pcfg.effective().sizes(ds.len())?;
    let (lm, vocab) = binary::load(model).with_context(|| format!("loading model {}", model.display()))?;
    let vocab = Arc::new(vocab);
    let state = RunState::new(perplexities(&lm, &vocab, &ds), pcfg.seed);
    let scorer = build_scorer(&cfg.scorer, vocab.clone())?;
    let mut pruner = Pruner::new(pcfg, cfg.scorer.task.clone(), cfg.scorer.scoring_options()?)?;
    let (pool, report) = pruner.prune(&state, &ds, &scorer)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("pool.txt"), pool.to_id_lines())?;
    write_json(&out.join("prune_report.json"), &report)?;
    println!(
        "kept {} of {} ({} by perplexity, {} by quality, {} scorer calls)",
        report.kept, report.unlabeled, report.from_perplexity, report.from_quality, report.scorer_calls
    );
    Ok(())
}

#[derive(Serialize)]
struct FileHash {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    created_unix: u64,
    host: String,
    activeprune_version: &'static str,
    modes: Vec<PruneMode>,
    seeds: Vec<u64>,
    inputs: BTreeMap<&'static str, FileHash>,
    config: RunConfig,
}

fn host_name() -> String {
    std::env::var("HOSTNAME")
        .ok()
        .or_else(|| fs::read_to_string("/etc/hostname").ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn run_dir(out: &Path, mode: PruneMode, seed: u64) -> PathBuf {
    out.join(mode.name()).join(format!("seed_{seed}"))
}

pub fn cmd_run(cfg: &RunConfig, stop_after: Option<u64>) -> Result<()> {
    cfg.validate(true)?;
    let out = &cfg.output_dir;
    let train_path = cfg.data.train.as_ref().expect("validated");
    let test_path = cfg.data.test.as_ref().expect("validated");
    let train = read_dataset(train_path)?;
    let test = read_dataset(test_path)?;

    cfg.sim.validate(train.len())?;
    for &mode in &cfg.run.modes {
        let mut p = cfg.prune.clone();
        p.mode = mode;
        p.effective().sizes(train.len())?;
    }
    fs::create_dir_all(out)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("train", FileHash { path: train_path.clone(), sha256: sha256_file(train_path)? });
    inputs.insert("test", FileHash { path: test_path.clone(), sha256: sha256_file(test_path)? });
    let (lm, vocab) = match (&cfg.data.lm_model, &cfg.data.lm_corpus) {
        (Some(m), _) => {
            inputs.insert("lm_model", FileHash { path: m.clone(), sha256: sha256_file(m)? });
            binary::load(m).with_context(|| format!("loading model {}", m.display()))?
        }
        (None, Some(c)) => {
            inputs.insert("lm_corpus", FileHash { path: c.clone(), sha256: sha256_file(c)? });
            let lm_dir = out.join("lm");
            cmd_train_lm(c, cfg.lm.order, cfg.lm.min_count, &lm_dir)?;
            binary::load(&lm_dir.join("model.bin"))?
        }
        (None, None) => unreachable!("validated"),
    };
    let manifest = Manifest {
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        host: host_name(),
        activeprune_version: env!("CARGO_PKG_VERSION"),
        modes: cfg.run.modes.clone(),
        seeds: cfg.run.seeds.clone(),
        inputs,
        config: cfg.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    let vocab = Arc::new(vocab);
    let started = Instant::now();
    let ppl = perplexities(&lm, &vocab, &train);
    log::info!("scored {} training documents in {:.2?}", ppl.len(), started.elapsed());
    let scorer = build_scorer(&cfg.scorer, vocab.clone())?;
    let sim_inputs = SimInputs {
        train: &train,
        test: &test,
        vocab: &vocab,
        perplexity: &ppl,
        scorer: &scorer,
        task: cfg.scorer.task.clone(),
        scoring: cfg.scorer.scoring_options()?,
    };

    let mut records = Vec::new();
    let mut finished = true;
    for &mode in &cfg.run.modes {
        let mut pcfg = cfg.prune.clone();
        pcfg.mode = mode;
        for &seed in &cfg.run.seeds {
            let dir = run_dir(out, mode, seed);
            let metrics_path = dir.join("metrics.csv");
            if metrics_path.exists() && !dir.join(FAILED_MARKER).exists() {
                log::info!("{mode} seed {seed}: already complete");
                records.push(RunRecord { mode, seed, metrics: al_sim::read_metrics_csv(&metrics_path)? });
                continue;
            }
            fs::create_dir_all(&dir)?;
            let opts = RunOptions {
                checkpoint_dir: Some(dir.join("checkpoint")),
                stop_after,
            };
            match al_sim::run_active_learning(&sim_inputs, &pcfg, &cfg.sim, seed, &opts) {
                Ok(outcome) if outcome.completed => {
                    al_sim::write_metrics_csv(&metrics_path, &outcome.metrics)?;
                    let mut lines = String::new();
                    for r in &outcome.reports {
                        lines.push_str(&serde_json::to_string(r)?);
                        lines.push('\n');
                    }
                    fs::write(dir.join("prune_reports.jsonl"), lines)?;
                    let _ = fs::remove_file(dir.join(FAILED_MARKER));
                    println!(
                        "{mode} seed {seed}: final f1 {:.4}",
                        outcome.metrics.last().map_or(f64::NAN, |m| m.f1_macro)
                    );
                    records.push(RunRecord { mode, seed, metrics: outcome.metrics });
                }
                Ok(outcome) => {
                    finished = false;
                    println!("{mode} seed {seed}: stopped after iteration {}", outcome.state.iteration);
                }
                Err(e) => {
                    let msg = format!("{mode} seed {seed}: {e}\n");
                    fs::write(dir.join(FAILED_MARKER), &msg)?;
                    fs::write(out.join(FAILED_MARKER), &msg)?;
                    return Err(anyhow!(e).context(format!("run {mode} seed {seed} failed")));
                }
            }
        }
    }
    if finished {
        report::write_csv(&out.join("aggregate.csv"), &report::aggregate(&records))?;
        let _ = fs::remove_file(out.join(FAILED_MARKER));
    }
    Ok(())
}

/// Completed runs under `run_dir`, in mode then seed order.
pub fn collect_runs(run_dir: &Path) -> Result<Vec<RunRecord>> {
    let mut runs = Vec::new();
    for mode in PruneMode::ALL {
        let mode_dir = run_dir.join(mode.name());
        let Ok(entries) = fs::read_dir(&mode_dir) else { continue };
        let mut seeds: Vec<(u64, PathBuf)> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let seed = name.strip_prefix("seed_")?.parse().ok()?;
                Some((seed, e.path()))
            })
            .filter(|(_, p)| p.join("metrics.csv").exists() && !p.join(FAILED_MARKER).exists())
            .collect();
        seeds.sort();
        for (seed, p) in seeds {
            let metrics = al_sim::read_metrics_csv(&p.join("metrics.csv"))?;
            runs.push(RunRecord { mode, seed, metrics });
        }
    }
    Ok(runs)
}

pub fn cmd_report(run_dir: &Path, out: &Path) -> Result<()> {
    let runs = collect_runs(run_dir)?;
    if runs.is_empty() {
        bail!("no completed run found under {}", run_dir.display());
    }
    fs::create_dir_all(out)?;
    report::write_csv(&out.join("efficiency.csv"), &report::efficiency(&runs))?;
    report::write_csv(&out.join("tradeoff.csv"), &report::tradeoff(&runs))?;
    println!("{} runs summarized into {}", runs.len(), out.display());
    Ok(())
}

pub fn cmd_score(cfg: &RunConfig, input: &Path, model: Option<&Path>, task: Option<TaskType>, out: Option<&Path>) -> Result<()> {
    let ds = read_dataset(input)?;
    let vocab = match model {
        Some(m) => binary::load(m).with_context(|| format!("loading model {}", m.display()))?.1,
        None => Vocabulary::build(ds.documents().iter().map(|d| d.text.as_str()), 2)
            .or_else(|_| Vocabulary::build(ds.documents().iter().map(|d| d.text.as_str()), 1))?,
    };
    let scorer = build_scorer(&cfg.scorer, Arc::new(vocab))?;
    let task = task.unwrap_or_else(|| cfg.scorer.task.clone());
    let docs: Vec<_> = ds.documents().iter().collect();
    let mut budget = ScorerBudget::unlimited();
    let scores = quality::score_documents(&scorer, &docs, &task, &mut budget, &cfg.scorer.scoring_options()?)?;
    let mut text = String::new();
    for s in &scores {
        text.push_str(&serde_json::to_string(s)?);
        text.push('\n');
    }
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("scores.jsonl"), text)?;
            println!("{} documents scored", scores.len());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // A second call within one process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load_config(&cli)?;
    if cli.print_effective_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    match &cli.command {
        Command::TrainLm { corpus, order, min_count } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("lm"));
            cmd_train_lm(corpus, *order, *min_count, &out)
        }
        Command::Prune { dataset, model, mode } => cmd_prune(&cfg, dataset, model, *mode, &cfg.output_dir),
        Command::Run { stop_after } => {
            if cli.config.is_none() {
                bail!("run needs --config");
            }
            cmd_run(&cfg, *stop_after)
        }
        Command::Report { run_dir } => {
            let out = cli.out.clone().unwrap_or_else(|| run_dir.clone());
            cmd_report(run_dir, &out)
        }
        Command::Score { input, model, task } => cmd_score(
            &cfg,
            input,
            model.as_deref(),
            task.clone().map(TaskType::from),
            cli.out.as_deref(),
        ),
    }
}
