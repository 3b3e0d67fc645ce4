//! Filtered-pool construction and perplexity reweighting.
//!
//! Stage 1 keeps the `k_p` lowest-perplexity unlabeled documents. Stage 2
//! sends the `m` highest-perplexity documents outside that set to a quality
//! scorer and keeps the `k_q` best of them. After each labeling round every
//! unlabeled perplexity is pulled down by `β` times its mean absolute
//! distance to the freshly labeled batch, which favours documents unlike
//! anything labeled so far.
//!
//! Every ranking breaks ties by ascending document id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, DocId, RunState};
use crate::quality::{self, QualityError, QualityScore, Scorer, ScorerBudget, ScoringOptions, TaskType};
use crate::seed::{self, Stream};

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("k = {k} exceeds the {available} available documents")]
    KTooLarge { k: usize, available: usize },
    #[error("infeasible prune config: {0}")]
    ConfigInfeasible(String),
    #[error("reweighting needs a non-empty labeled batch")]
    EmptyLabelBatch,
    #[error("delta ({delta}) must exceed epsilon ({epsilon})")]
    InvalidGap { delta: f64, epsilon: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("document {0} has no recorded perplexity")]
    MissingPerplexity(DocId),
    #[error("document {0} is not in the dataset")]
    UnknownDocument(DocId),
    #[error("quality scores do not match the candidate set: {0}")]
    ScoreMismatch(String),
    #[error(transparent)]
    Quality(#[from] QualityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMode {
    #[default]
    ActivePrune,
    Random,
    PerplexityOnly,
    QualityOnly,
}

impl PruneMode {
    pub const ALL: [PruneMode; 4] = [
        PruneMode::ActivePrune,
        PruneMode::Random,
        PruneMode::PerplexityOnly,
        PruneMode::QualityOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PruneMode::ActivePrune => "active_prune",
            PruneMode::Random => "random",
            PruneMode::PerplexityOnly => "perplexity_only",
            PruneMode::QualityOnly => "quality_only",
        }
    }
}

impl std::fmt::Display for PruneMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PruneMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PruneMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown prune mode {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    /// Share of the unlabeled pool handed to acquisition.
    pub keep_fraction: f64,
    /// Share of the kept pool chosen by quality score.
    pub quality_share: f64,
    /// High-perplexity candidates rescored per iteration; `None` means
    /// twice the number of quality picks.
    pub m: Option<usize>,
    pub beta: f64,
    pub mode: PruneMode,
    pub seed: u64,
    /// Reweight against every labeled document instead of the latest batch.
    pub cumulative_reweight: bool,
    /// Reuse quality scores across iterations.
    pub cache_scores: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            keep_fraction: 0.25,
            quality_share: 0.2,
            m: None,
            beta: 0.1,
            mode: PruneMode::ActivePrune,
            seed: 0,
            cumulative_reweight: false,
            cache_scores: false,
        }
    }
}

/// Concrete stage sizes for one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSizes {
    pub kept: usize,
    pub k_quality: usize,
    pub k_perplexity: usize,
    pub m: usize,
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), PruneError> {
        let bad = |msg: String| Err(PruneError::InvalidArgument(msg));
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return bad(format!("keep_fraction must be in (0, 1], got {}", self.keep_fraction));
        }
        if !(0.0..=1.0).contains(&self.quality_share) {
            return bad(format!("quality_share must be in [0, 1], got {}", self.quality_share));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        Ok(())
    }

    /// The knobs that actually apply under `mode`: the perplexity baseline
    /// has no quality stage and no reweighting, quality-only ranks by `q`
    /// alone.
    pub fn effective(&self) -> PruneConfig {
        let mut c = self.clone();
        match self.mode {
            PruneMode::ActivePrune => {}
            PruneMode::PerplexityOnly | PruneMode::Random => {
                c.quality_share = 0.0;
                c.beta = 0.0;
            }
            PruneMode::QualityOnly => {
                c.quality_share = 1.0;
                c.beta = 0.0;
            }
        }
        c
    }

    /// Stage sizes for an unlabeled pool of `unlabeled` documents. Fails
    /// when more quality picks are requested than candidates are scored.
    pub fn sizes(&self, unlabeled: usize) -> Result<PoolSizes, PruneError> {
        let kept = (self.keep_fraction * unlabeled as f64).round() as usize;
        let kept = kept.min(unlabeled);
        let k_quality = (self.quality_share * kept as f64).round() as usize;
        let m = match self.m {
            Some(m) => m,
            None => (2 * k_quality).max((self.quality_share * kept as f64).ceil() as usize),
        };
        if self.mode == PruneMode::ActivePrune && self.quality_share * kept as f64 > m as f64 {
            return Err(PruneError::ConfigInfeasible(format!(
                "quality_share * kept = {} * {kept} exceeds m = {m}",
                self.quality_share
            )));
        }
        Ok(PoolSizes {
            kept,
            k_quality,
            k_perplexity: kept - k_quality,
            m,
        })
    }
}

/// The pool handed to acquisition. `from_perplexity` and `from_quality` are
/// disjoint, kept in selection order, and together make up `ids`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilteredPool {
    pub ids: BTreeSet<DocId>,
    pub from_perplexity: Vec<DocId>,
    pub from_quality: Vec<DocId>,
}

impl FilteredPool {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: DocId) -> bool {
        self.ids.contains(&id)
    }

    /// One id per line, ascending.
    pub fn to_id_lines(&self) -> String {
        let mut out = String::with_capacity(self.ids.len() * 8);
        for id in &self.ids {
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }

    fn from_parts(from_perplexity: Vec<DocId>, from_quality: Vec<DocId>) -> Self {
        let ids = from_perplexity.iter().chain(&from_quality).copied().collect();
        FilteredPool {
            ids,
            from_perplexity,
            from_quality,
        }
    }
}

fn ascending(a: &(DocId, f64), b: &(DocId, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

fn descending(a: &(DocId, f64), b: &(DocId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The first `k` of `items` under `cmp`, in order. Partial selection keeps
/// this O(n + k log k).
fn first_k(mut items: Vec<(DocId, f64)>, k: usize, cmp: fn(&(DocId, f64), &(DocId, f64)) -> Ordering) -> Vec<DocId> {
    let k = k.min(items.len());
    if k == 0 {
        return Vec::new();
    }
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, cmp);
        items.truncate(k);
    }
    items.sort_unstable_by(cmp);
    items.into_iter().map(|(id, _)| id).collect()
}

/// The `k` lowest-perplexity ids, ascending.
pub fn select_bottom_k_perplexity(ppl: &BTreeMap<DocId, f64>, k: usize) -> Result<Vec<DocId>, PruneError> {
    if k > ppl.len() {
        return Err(PruneError::KTooLarge {
            k,
            available: ppl.len(),
        });
    }
    Ok(first_k(ppl.iter().map(|(&id, &p)| (id, p)).collect(), k, ascending))
}

/// Up to `m` highest-perplexity ids outside `exclude`, descending.
pub fn select_top_m_high_perplexity(
    ppl: &BTreeMap<DocId, f64>,
    exclude: &BTreeSet<DocId>,
    m: usize,
) -> Vec<DocId> {
    let items = ppl
        .iter()
        .filter(|(id, _)| !exclude.contains(id))
        .map(|(&id, &p)| (id, p))
        .collect();
    first_k(items, m, descending)
}

/// Up to `k` ids with the highest quality score, descending.
pub fn select_top_k_quality(scores: &[QualityScore], k: usize) -> Vec<DocId> {
    first_k(scores.iter().map(|s| (s.doc_id, s.q)).collect(), k, descending)
}

/// Combine quality scores for this iteration's candidates with the current
/// perplexities. Quality picks are made first; perplexity picks are the
/// lowest-perplexity documents among the rest.
pub fn build_filtered_pool(
    state: &RunState,
    scores: &[QualityScore],
    cfg: &PruneConfig,
) -> Result<FilteredPool, PruneError> {
    cfg.validate()?;
    let sizes = cfg.sizes(state.unlabeled_ids.len())?;
    if let Some(s) = scores.iter().find(|s| !state.unlabeled_ids.contains(&s.doc_id)) {
        return Err(PruneError::ScoreMismatch(format!(
            "document {} is not unlabeled",
            s.doc_id
        )));
    }
    if scores.len() < sizes.k_quality {
        return Err(PruneError::ConfigInfeasible(format!(
            "{} quality picks requested but only {} candidates scored",
            sizes.k_quality,
            scores.len()
        )));
    }
    let from_quality = select_top_k_quality(scores, sizes.k_quality);
    let taken: BTreeSet<DocId> = from_quality.iter().copied().collect();
    let rest: Vec<(DocId, f64)> = state
        .unlabeled_ids
        .iter()
        .filter(|id| !taken.contains(id))
        .map(|&id| {
            state
                .perplexity
                .get(&id)
                .map(|&p| (id, p))
                .ok_or(PruneError::MissingPerplexity(id))
        })
        .collect::<Result<_, _>>()?;
    let from_perplexity = first_k(rest, sizes.k_perplexity, ascending);
    Ok(FilteredPool::from_parts(from_perplexity, from_quality))
}

/// Mean absolute distance from each value in `ppl` to `labeled`, applied as
/// `P - beta * A`. All adjustments use the pre-update values.
pub fn reweight_values(
    ppl: &BTreeMap<DocId, f64>,
    labeled: &[f64],
    beta: f64,
) -> Result<BTreeMap<DocId, f64>, PruneError> {
    if labeled.is_empty() {
        return Err(PruneError::EmptyLabelBatch);
    }
    if beta == 0.0 {
        return Ok(ppl.clone());
    }
    let n = labeled.len() as f64;
    let entries: Vec<(DocId, f64)> = ppl.iter().map(|(&id, &p)| (id, p)).collect();
    Ok(entries
        .into_par_iter()
        .map(|(id, p)| {
            let a = labeled.iter().map(|&l| (p - l).abs()).sum::<f64>() / n;
            (id, p - beta * a)
        })
        .collect())
}

/// Reweight the unlabeled perplexities of `state` against `newly_labeled`,
/// using the perplexity each of those documents had when it was acquired.
pub fn reweight(
    state: &RunState,
    newly_labeled: &[DocId],
    beta: f64,
) -> Result<BTreeMap<DocId, f64>, PruneError> {
    let labeled = newly_labeled
        .iter()
        .map(|id| {
            state
                .labeled_perplexity
                .get(id)
                .copied()
                .ok_or(PruneError::MissingPerplexity(*id))
        })
        .collect::<Result<Vec<_>, _>>()?;
    reweight_values(&state.perplexity, &labeled, beta)
}

/// Iterations after which an item at perplexity distance `d0` above the
/// labeled cluster has caught up, when every step closes the gap by at
/// least `beta * (delta - epsilon)`.
pub fn convergence_bound(d0: f64, delta: f64, epsilon: f64, beta: f64) -> Result<u64, PruneError> {
    // Written negated so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(delta > epsilon) {
        return Err(PruneError::InvalidGap { delta, epsilon });
    }
    if !(epsilon >= 0.0 && beta > 0.0 && d0 >= 0.0 && d0.is_finite()) {
        return Err(PruneError::InvalidArgument(format!(
            "need epsilon >= 0, beta > 0, finite d0 >= 0; got epsilon={epsilon}, beta={beta}, d0={d0}"
        )));
    }
    let q = d0 / (beta * (delta - epsilon));
    // 7 / (0.1 * 7) evaluates to 9.999999999999998; snap near-integers so
    // rounding noise cannot move the ceiling.
    let snapped = if (q - q.round()).abs() < 1e-9 { q.round() } else { q.ceil() };
    Ok(snapped as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub perplexity_ms: u64,
    pub scoring_ms: u64,
    pub merge_ms: u64,
}

/// One line of the per-iteration pruning log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub iteration: u64,
    pub mode: PruneMode,
    pub unlabeled: usize,
    pub kept: usize,
    pub from_perplexity: usize,
    pub from_quality: usize,
    pub candidates: usize,
    pub scorer_calls: usize,
    pub wallclock_ms: StageTimes,
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

/// Runs one pruning round per call, holding the quality-score cache between
/// rounds when caching is enabled.
#[derive(Debug, Clone)]
pub struct Pruner {
    cfg: PruneConfig,
    task: TaskType,
    scoring: ScoringOptions,
    cache: BTreeMap<DocId, QualityScore>,
}

impl Pruner {
    pub fn new(cfg: PruneConfig, task: TaskType, scoring: ScoringOptions) -> Result<Self, PruneError> {
        cfg.validate()?;
        Ok(Pruner {
            cfg: cfg.effective(),
            task,
            scoring,
            cache: BTreeMap::new(),
        })
    }

    /// The configuration after mode-specific overrides.
    pub fn config(&self) -> &PruneConfig {
        &self.cfg
    }

    fn score<S: Scorer + ?Sized>(
        &mut self,
        ids: &[DocId],
        dataset: &Dataset,
        scorer: &S,
        budget: &mut ScorerBudget,
    ) -> Result<Vec<QualityScore>, PruneError> {
        let missing: Vec<_> = ids
            .iter()
            .filter(|id| !self.cfg.cache_scores || !self.cache.contains_key(id))
            .map(|&id| dataset.get(id).ok_or(PruneError::UnknownDocument(id)))
            .collect::<Result<_, _>>()?;
        let fresh = quality::score_documents(scorer, &missing, &self.task, budget, &self.scoring)?;
        if !self.cfg.cache_scores {
            return Ok(fresh);
        }
        self.cache.extend(fresh.into_iter().map(|s| (s.doc_id, s)));
        Ok(ids.iter().map(|id| self.cache[id]).collect())
    }

    /// Build this iteration's filtered pool from `state`.
    pub fn prune<S: Scorer + ?Sized>(
        &mut self,
        state: &RunState,
        dataset: &Dataset,
        scorer: &S,
    ) -> Result<(FilteredPool, PruneReport), PruneError> {
        let sizes = self.cfg.sizes(state.unlabeled_ids.len())?;
        let mut times = StageTimes::default();
        let mut calls = 0;
        let mut candidates = 0;

        let pool = match self.cfg.mode {
            PruneMode::Random => {
                let t = Instant::now();
                let ids: Vec<DocId> = state.unlabeled_ids.iter().copied().collect();
                let mut rng = seed::rng(self.cfg.seed, state.iteration, Stream::Prune);
                let picked = index::sample(&mut rng, ids.len(), sizes.kept)
                    .into_iter()
                    .map(|i| ids[i])
                    .collect();
                times.perplexity_ms = elapsed_ms(t);
                FilteredPool::from_parts(picked, Vec::new())
            }
            PruneMode::QualityOnly => {
                let t = Instant::now();
                let ids: Vec<DocId> = state.unlabeled_ids.iter().copied().collect();
                let mut budget = ScorerBudget::unlimited();
                let scores = self.score(&ids, dataset, scorer, &mut budget)?;
                calls = budget.calls_made();
                candidates = ids.len();
                times.scoring_ms = elapsed_ms(t);
                let t = Instant::now();
                let picked = select_top_k_quality(&scores, sizes.kept);
                times.merge_ms = elapsed_ms(t);
                FilteredPool::from_parts(Vec::new(), picked)
            }
            PruneMode::ActivePrune | PruneMode::PerplexityOnly => {
                let t = Instant::now();
                let stage1: BTreeSet<DocId> = select_bottom_k_perplexity(&state.perplexity, sizes.k_perplexity)?
                    .into_iter()
                    .collect();
                let cands = if sizes.k_quality == 0 {
                    Vec::new()
                } else {
                    select_top_m_high_perplexity(&state.perplexity, &stage1, sizes.m)
                };
                times.perplexity_ms = elapsed_ms(t);
                candidates = cands.len();

                let t = Instant::now();
                let mut budget = ScorerBudget::new(sizes.m);
                let scores = self.score(&cands, dataset, scorer, &mut budget)?;
                calls = budget.calls_made();
                times.scoring_ms = elapsed_ms(t);

                let t = Instant::now();
                let pool = build_filtered_pool(state, &scores, &self.cfg)?;
                times.merge_ms = elapsed_ms(t);
                pool
            }
        };

        let report = PruneReport {
            iteration: state.iteration,
            mode: self.cfg.mode,
            unlabeled: state.unlabeled_ids.len(),
            kept: pool.len(),
            from_perplexity: pool.from_perplexity.len(),
            from_quality: pool.from_quality.len(),
            candidates,
            scorer_calls: calls,
            wallclock_ms: times,
        };
        log::debug!(
            "iteration {}: kept {} of {} ({} by quality, {} scorer calls)",
            report.iteration,
            report.kept,
            report.unlabeled,
            report.from_quality,
            report.scorer_calls
        );
        Ok((pool, report))
    }

    /// Apply the reweighting step for the batch just labeled in `state`.
    pub fn reweight(&self, state: &mut RunState) -> Result<(), PruneError> {
        if self.cfg.beta == 0.0 || state.unlabeled_ids.is_empty() {
            return Ok(());
        }
        let batch: Vec<DocId> = if self.cfg.cumulative_reweight {
            state.labeled_ids.iter().copied().collect()
        } else {
            state.last_batch.clone()
        };
        state.perplexity = reweight(state, &batch, self.cfg.beta)?;
        Ok(())
    }
}
