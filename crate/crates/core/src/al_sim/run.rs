use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::acquire::{acquire_coreset, acquire_least_confidence, acquire_random, macro_f1, AcquisitionStrategy};
use super::classifier::{train_classifier, Example, LinearModel, TrainParams};
use super::features::{FeatureHasher, SparseVec, DEFAULT_DIM};
use super::SimError;
use crate::corpus::{load_state, save_state, Dataset, DocId, RunState};
use crate::prune::{FilteredPool, PruneConfig, PruneReport, Pruner};
use crate::quality::{Scorer, ScoringOptions, TaskType};
use crate::seed::{self, Stream};
use crate::tokenizer::Vocabulary;

const STATE_FILE: &str = "state.json";
const PROGRESS_FILE: &str = "progress.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub strategy: AcquisitionStrategy,
    pub iterations: usize,
    /// Batch size per iteration as a share of the full training set.
    pub label_fraction: f64,
    pub feature_dim: usize,
    pub train: TrainParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            strategy: AcquisitionStrategy::LeastConfidence,
            iterations: 5,
            label_fraction: 0.01,
            feature_dim: DEFAULT_DIM,
            train: TrainParams::default(),
        }
    }
}

impl SimConfig {
    /// Documents labeled per iteration for a training set of `n`.
    pub fn batch_size(&self, n: usize) -> usize {
        (self.label_fraction * n as f64).round() as usize
    }

    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.iterations == 0 {
            return Err(SimError::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "label_fraction must be in (0, 1], got {}",
                self.label_fraction
            )));
        }
        if self.batch_size(n) == 0 {
            return Err(SimError::InvalidConfig(format!(
                "label_fraction {} labels no documents out of {n}",
                self.label_fraction
            )));
        }
        FeatureHasher::new(self.feature_dim)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub f1_macro: f64,
    pub labeled_count: usize,
    pub pruning_ms: u64,
    pub scoring_ms: u64,
    pub acquisition_ms: u64,
    pub training_ms: u64,
    pub scorer_calls: usize,
}

pub fn write_metrics_csv(path: &Path, metrics: &[IterationMetrics]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<IterationMetrics>, SimError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Everything a simulation reads but never changes.
pub struct SimInputs<'a, S: ?Sized> {
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub vocab: &'a Vocabulary,
    /// Stage-1 perplexity of every training document, computed once.
    pub perplexity: &'a BTreeMap<DocId, f64>,
    pub scorer: &'a S,
    pub task: TaskType,
    pub scoring: ScoringOptions,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where to write and resume checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
    /// Return after this many completed iterations, as if interrupted.
    pub stop_after: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    /// One entry per completed iteration, including resumed ones.
    pub metrics: Vec<IterationMetrics>,
    pub reports: Vec<PruneReport>,
    /// Filtered pools of the iterations run by this call.
    pub pools: Vec<FilteredPool>,
    pub state: RunState,
    pub completed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Progress {
    seed: u64,
    metrics: Vec<IterationMetrics>,
    reports: Vec<PruneReport>,
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

fn labels_of(ds: &Dataset) -> Result<Vec<u32>, SimError> {
    ds.documents()
        .iter()
        .map(|d| d.label.ok_or(SimError::Unlabeled(d.id)))
        .collect()
}

/// Train on every labeled document. `None` while some class has no
/// labeled example yet.
fn fit(
    state: &RunState,
    train: &Dataset,
    feats: &[SparseVec],
    gold: &[u32],
    classes: usize,
    params: &TrainParams,
    seed: u64,
) -> Result<Option<LinearModel>, SimError> {
    let examples: Vec<Example<'_>> = state
        .labeled_ids
        .iter()
        .map(|&id| {
            let i = train.position(id).expect("labeled id is in the dataset");
            (&feats[i], gold[i])
        })
        .collect();
    match train_classifier(&examples, classes, params, seed::derive(seed, state.iteration, Stream::Train)) {
        Ok(m) => Ok(Some(m)),
        Err(SimError::MissingClass(c)) => {
            log::info!("iteration {}: class {c} not labeled yet, model stays at zero", state.iteration);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn load_checkpoint(dir: &Path, seed: u64) -> Result<Option<(RunState, Progress)>, SimError> {
    let state_path = dir.join(STATE_FILE);
    if !state_path.exists() {
        return Ok(None);
    }
    let state = load_state(&state_path)?;
    let text = fs::read_to_string(dir.join(PROGRESS_FILE))?;
    let mut progress: Progress =
        serde_json::from_str(&text).map_err(|e| SimError::Checkpoint(e.to_string()))?;
    if progress.seed != seed || state.rng_seed != seed {
        return Err(SimError::Checkpoint(format!(
            "checkpoint in {} belongs to seed {}, not {seed}",
            dir.display(),
            progress.seed
        )));
    }
    // Progress is written before state, so it may be one iteration ahead.
    let done = state.iteration as usize;
    if progress.metrics.len() < done || progress.reports.len() < done {
        return Err(SimError::Checkpoint("progress file is behind the run state".into()));
    }
    progress.metrics.truncate(done);
    progress.reports.truncate(done);
    Ok(Some((state, progress)))
}

fn save_checkpoint(dir: &Path, state: &RunState, progress: &Progress) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!("{PROGRESS_FILE}.tmp"));
    fs::write(&tmp, serde_json::to_string_pretty(progress).expect("progress serializes"))?;
    fs::rename(&tmp, dir.join(PROGRESS_FILE))?;
    save_state(state, &dir.join(STATE_FILE))?;
    Ok(())
}

/// Run (or resume) one seeded active-learning simulation. Each iteration
/// prunes the unlabeled pool, acquires a batch from the filtered pool,
/// labels it from the gold labels, retrains from scratch, evaluates on
/// `test` and reweights the remaining perplexities. `prune.seed` is
/// replaced by `seed`.
///
/// Until every class has been labeled at least once there is no model to
/// be uncertain about, so acquisition falls back to random sampling.
pub fn run_active_learning<S: Scorer + ?Sized>(
    inputs: &SimInputs<'_, S>,
    prune: &PruneConfig,
    sim: &SimConfig,
    seed: u64,
    opts: &RunOptions,
) -> Result<SimOutcome, SimError> {
    let train = inputs.train;
    let n = train.len();
    sim.validate(n)?;
    let batch_size = sim.batch_size(n);
    let classes = train.num_classes().max(inputs.test.num_classes());
    if classes < 2 {
        return Err(SimError::InvalidConfig(format!("need at least 2 classes, found {classes}")));
    }
    let gold = labels_of(train)?;
    let test_gold = labels_of(inputs.test)?;

    let hasher = FeatureHasher::new(sim.feature_dim)?;
    let featurize = |ds: &Dataset| -> Vec<SparseVec> {
        ds.documents()
            .par_iter()
            .map(|d| hasher.featurize(d, inputs.vocab))
            .collect()
    };
    let feats = featurize(train);
    let test_feats = featurize(inputs.test);

    let mut pcfg = prune.clone();
    pcfg.seed = seed;
    let mut pruner = Pruner::new(pcfg, inputs.task.clone(), inputs.scoring.clone())?;

    let resumed = match &opts.checkpoint_dir {
        Some(dir) => load_checkpoint(dir, seed)?,
        None => None,
    };
    let (mut state, mut progress) = match resumed {
        Some((state, progress)) => {
            log::info!("resuming seed {seed} after iteration {}", state.iteration);
            (state, progress)
        }
        None => (
            RunState::new(inputs.perplexity.clone(), seed),
            Progress {
                seed,
                metrics: Vec::new(),
                reports: Vec::new(),
            },
        ),
    };
    state.validate_against(train)?;

    let mut model = if state.labeled_ids.is_empty() {
        None
    } else {
        fit(&state, train, &feats, &gold, classes, &sim.train, seed)?
    };
    let mut pools = Vec::new();

    while (state.iteration as usize) < sim.iterations {
        if opts.stop_after.is_some_and(|s| state.iteration >= s) {
            break;
        }
        if state.unlabeled_ids.is_empty() {
            return Err(SimError::UnlabeledExhausted);
        }
        let t = state.iteration + 1;
        let (pool, report) = pruner.prune(&state, train, inputs.scorer)?;

        let started = Instant::now();
        let pool_ids: Vec<DocId> = pool.ids.iter().copied().collect();
        let b = batch_size.min(pool_ids.len());
        let pos = |id: DocId| train.position(id).expect("pool id is in the dataset");
        let picked = match (sim.strategy, &model) {
            (AcquisitionStrategy::Random, _) | (_, None) => {
                acquire_random(&pool_ids, b, &mut seed::rng(seed, t, Stream::Acquire))?
            }
            (AcquisitionStrategy::LeastConfidence, Some(m)) => {
                let probs = pool_ids
                    .par_iter()
                    .map(|&id| Ok((id, m.predict_proba(&feats[pos(id)])?)))
                    .collect::<Result<Vec<_>, SimError>>()?;
                acquire_least_confidence(&probs, b)?
            }
            (AcquisitionStrategy::Coreset, Some(_)) => {
                let cands: Vec<(DocId, &SparseVec)> = pool_ids.iter().map(|&id| (id, &feats[pos(id)])).collect();
                let labeled: Vec<&SparseVec> = state.labeled_ids.iter().map(|&id| &feats[pos(id)]).collect();
                acquire_coreset(&cands, &labeled, b)?
            }
        };
        let acquisition_ms = elapsed_ms(started);
        state.label(&picked)?;

        let started = Instant::now();
        // The new model is fitted under the iteration it will serve.
        state.iteration = t;
        model = fit(&state, train, &feats, &gold, classes, &sim.train, seed)?;
        let training_ms = elapsed_ms(started);

        let zero = LinearModel::zeros(classes, sim.feature_dim);
        let eval = model.as_ref().unwrap_or(&zero);
        let predictions = test_feats
            .par_iter()
            .map(|x| eval.predict(x))
            .collect::<Result<Vec<_>, _>>()?;
        let f1 = macro_f1(&predictions, &test_gold, classes)?;

        pruner.reweight(&mut state)?;

        let metrics = IterationMetrics {
            iteration: t,
            f1_macro: f1,
            labeled_count: state.labeled_ids.len(),
            pruning_ms: report.wallclock_ms.perplexity_ms + report.wallclock_ms.merge_ms,
            scoring_ms: report.wallclock_ms.scoring_ms,
            acquisition_ms,
            training_ms,
            scorer_calls: report.scorer_calls,
        };
        log::info!(
            "seed {seed} iteration {t}: f1 {:.4}, |L| {}, pool {}",
            metrics.f1_macro,
            metrics.labeled_count,
            pool.len()
        );
        progress.metrics.push(metrics);
        progress.reports.push(report);
        pools.push(pool);
        if let Some(dir) = &opts.checkpoint_dir {
            save_checkpoint(dir, &state, &progress)?;
        }
    }

    let completed = state.iteration as usize >= sim.iterations;
    Ok(SimOutcome {
        metrics: progress.metrics,
        reports: progress.reports,
        pools,
        state,
        completed,
    })
}
