//! LLM data-quality scores: `q(x)` is the softmax probability of the token
//! "yes" when a model is asked whether `x` belongs in the training set for
//! a task.
//!
//! Scoring goes through the [`Scorer`] trait. [`HttpScorer`] talks to a
//! remote host over a small JSON protocol and [`MockScorer`] is a
//! deterministic local stand-in.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DocId, Document};

mod http;
mod mock;

pub use http::{HttpScorer, ScoreWireRequest, ScoreWireResponse, PROTOCOL_VERSION};
pub use mock::{mock_score, CountingScorer, MockScorer};

const DEFAULT_TEMPLATE: &str = include_str!("../../templates/quality_prompt_v1.txt");

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("logits do not contain \"yes\"")]
    MissingYesLogit,
    #[error("logit for {0:?} is not finite")]
    NonFiniteLogit(String),
    #[error("scorer returned q = {0}, outside [0, 1]")]
    InvalidQ(f64),
    #[error("scorer budget exceeded: {requested} calls requested, {remaining} remaining")]
    BudgetExceeded { requested: usize, remaining: usize },
    #[error("scorer unavailable for document {doc_id} after {attempts} attempts: {last_error}")]
    ScorerUnavailable {
        doc_id: DocId,
        attempts: u32,
        last_error: String,
    },
    #[error("scorer rejected document {doc_id}: {reason}")]
    Rejected { doc_id: DocId, reason: String },
    #[error("prompt template: {0}")]
    Template(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum TaskType {
    Translation,
    Sentiment,
    Topic,
    Summarization,
    Custom(String),
}

impl TaskType {
    pub fn name(&self) -> &str {
        match self {
            TaskType::Translation => "translation",
            TaskType::Sentiment => "sentiment",
            TaskType::Topic => "topic",
            TaskType::Summarization => "summarization",
            TaskType::Custom(name) => name,
        }
    }
}

impl From<String> for TaskType {
    fn from(s: String) -> Self {
        match s.as_str() {
            "translation" => TaskType::Translation,
            "sentiment" => TaskType::Sentiment,
            "topic" => TaskType::Topic,
            "summarization" => TaskType::Summarization,
            _ => TaskType::Custom(s),
        }
    }
}

impl From<TaskType> for String {
    fn from(t: TaskType) -> Self {
        t.name().to_string()
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which normalization produced a score. Hosts may return the full logit
/// vector, just `{yes, no}`, or a ready-made probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    YesNoLogits,
    MultiLogits,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub doc_id: DocId,
    pub q: f64,
    pub variant: ScoreVariant,
}

/// Calls allowed against calls made within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerBudget {
    calls_made: usize,
    calls_allowed: usize,
}

impl ScorerBudget {
    pub fn new(calls_allowed: usize) -> Self {
        ScorerBudget {
            calls_made: 0,
            calls_allowed,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(usize::MAX)
    }

    pub fn calls_made(&self) -> usize {
        self.calls_made
    }

    pub fn calls_allowed(&self) -> usize {
        self.calls_allowed
    }

    pub fn remaining(&self) -> usize {
        self.calls_allowed - self.calls_made
    }
}

/// Prompt text with `{TASK}` and `{TEXT}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate(String);

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate(DEFAULT_TEMPLATE.to_string())
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, QualityError> {
        let text = text.into();
        for ph in ["{TASK}", "{TEXT}"] {
            if !text.contains(ph) {
                return Err(QualityError::Template(format!("missing {ph} placeholder")));
            }
        }
        Ok(PromptTemplate(text))
    }

    pub fn from_file(path: &Path) -> Result<Self, QualityError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QualityError::Template(format!("{}: {e}", path.display())))?;
        Self::new(text)
    }

    /// `{TEXT}` is substituted last so document text is never re-scanned.
    pub fn render(&self, doc: &Document, task: &TaskType) -> String {
        let (head, tail) = self.0.split_once("{TEXT}").expect("checked at construction");
        let mut out = head.replace("{TASK}", task.name());
        out.push_str(&doc.text);
        out.push_str(&tail.replace("{TASK}", task.name()).replace("{TEXT}", &doc.text));
        out
    }
}

pub fn build_prompt(doc: &Document, task: &TaskType) -> String {
    PromptTemplate::default().render(doc, task)
}

/// Numerically stable softmax over the supplied logits, "yes" component.
pub fn score_from_logits(logits: &BTreeMap<String, f64>) -> Result<f64, QualityError> {
    if let Some((k, _)) = logits.iter().find(|(_, v)| !v.is_finite()) {
        return Err(QualityError::NonFiniteLogit(k.clone()));
    }
    let yes = *logits.get("yes").ok_or(QualityError::MissingYesLogit)?;
    let max = logits.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = logits.values().map(|v| (v - max).exp()).sum();
    Ok((yes - max).exp() / denom)
}

/// What a single scorer call sends.
#[derive(Debug, Clone)]
pub struct ScoreRequest<'a> {
    pub doc: &'a Document,
    pub task: &'a TaskType,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreResponse {
    Logits(BTreeMap<String, f64>),
    Q(f64),
}

impl ScoreResponse {
    pub fn into_score(self, doc_id: DocId) -> Result<QualityScore, QualityError> {
        let (q, variant) = match self {
            ScoreResponse::Q(q) => {
                if !(0.0..=1.0).contains(&q) {
                    return Err(QualityError::InvalidQ(q));
                }
                (q, ScoreVariant::Direct)
            }
            ScoreResponse::Logits(l) => {
                let variant = if l.len() == 2 && l.contains_key("no") {
                    ScoreVariant::YesNoLogits
                } else {
                    ScoreVariant::MultiLogits
                };
                (score_from_logits(&l)?, variant)
            }
        };
        Ok(QualityScore { doc_id, q, variant })
    }
}

#[derive(Debug, Clone, Error)]
pub enum ScorerError {
    /// Worth retrying: timeouts, connection resets, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

/// Anything that can turn a prompt into a quality score. Implementations
/// must tolerate concurrent calls.
pub trait Scorer: Send + Sync {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        (**self).score(request)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        (**self).score(request)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScoringOptions {
    /// Concurrent scorer calls; 0 and 1 both mean sequential.
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub template: PromptTemplate,
}

fn score_one<S: Scorer + ?Sized>(
    scorer: &S,
    doc: &Document,
    task: &TaskType,
    opts: &ScoringOptions,
) -> Result<QualityScore, QualityError> {
    let request = ScoreRequest {
        doc,
        task,
        prompt: opts.template.render(doc, task),
    };
    let attempts = opts.retry.attempts.max(1);
    let mut backoff = opts.retry.initial_backoff;
    let mut last_error = String::new();
    for attempt in 1..=attempts {
        match scorer.score(&request) {
            Ok(resp) => return resp.into_score(doc.id),
            Err(ScorerError::Fatal(reason)) => {
                return Err(QualityError::Rejected {
                    doc_id: doc.id,
                    reason,
                })
            }
            Err(ScorerError::Transient(e)) => {
                log::warn!("scorer attempt {attempt}/{attempts} for doc {} failed: {e}", doc.id);
                last_error = e;
                if attempt < attempts {
                    thread::sleep(backoff);
                    backoff *= 2;
                }
            }
        }
    }
    Err(QualityError::ScorerUnavailable {
        doc_id: doc.id,
        attempts,
        last_error,
    })
}

/// Score `docs` in order. Fails with `BudgetExceeded` before any call when
/// the budget cannot cover every document; otherwise `calls_made` grows by
/// one per successfully scored document (retries are not counted twice).
pub fn score_documents<S: Scorer + ?Sized>(
    scorer: &S,
    docs: &[&Document],
    task: &TaskType,
    budget: &mut ScorerBudget,
    opts: &ScoringOptions,
) -> Result<Vec<QualityScore>, QualityError> {
    if docs.len() > budget.remaining() {
        return Err(QualityError::BudgetExceeded {
            requested: docs.len(),
            remaining: budget.remaining(),
        });
    }
    let workers = opts.parallelism.clamp(1, docs.len().max(1));
    let succeeded = AtomicUsize::new(0);

    let result = if workers == 1 {
        docs.iter()
            .map(|d| {
                let s = score_one(scorer, d, task, opts)?;
                succeeded.fetch_add(1, Ordering::Relaxed);
                Ok(s)
            })
            .collect::<Result<Vec<_>, _>>()
    } else {
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let slots: Mutex<Vec<Option<QualityScore>>> = Mutex::new(vec![None; docs.len()]);
        let first_error: Mutex<Option<(usize, QualityError)>> = Mutex::new(None);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(doc) = docs.get(i) else { break };
                    match score_one(scorer, doc, task, opts) {
                        Ok(score) => {
                            succeeded.fetch_add(1, Ordering::Relaxed);
                            slots.lock().unwrap()[i] = Some(score);
                        }
                        Err(e) => {
                            failed.store(true, Ordering::Relaxed);
                            let mut fe = first_error.lock().unwrap();
                            // Report the lowest-index failure for a stable message.
                            if fe.as_ref().is_none_or(|(j, _)| i < *j) {
                                *fe = Some((i, e));
                            }
                        }
                    }
                });
            }
        });
        match first_error.into_inner().unwrap() {
            Some((_, e)) => Err(e),
            None => Ok(slots
                .into_inner()
                .unwrap()
                .into_iter()
                .map(|s| s.expect("every slot scored"))
                .collect()),
        }
    };
    budget.calls_made += succeeded.load(Ordering::Relaxed);
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    fn logits(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn softmax_fixtures() {
        assert_eq!(score_from_logits(&logits(&[("yes", 0.0), ("no", 0.0)])).unwrap(), 0.5);
        let q = score_from_logits(&logits(&[("yes", 3f64.ln()), ("no", 0.0)])).unwrap();
        assert!((q - 0.75).abs() < 1e-15);
        let q = score_from_logits(&logits(&[("yes", 1000.0), ("no", 0.0)])).unwrap();
        assert!(q.is_finite() && (q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_errors() {
        assert!(matches!(
            score_from_logits(&logits(&[("no", 1.0)])),
            Err(QualityError::MissingYesLogit)
        ));
        assert!(matches!(
            score_from_logits(&logits(&[("yes", f64::NAN), ("no", 1.0)])),
            Err(QualityError::NonFiniteLogit(_))
        ));
    }

    #[test]
    fn prompt_is_stable_and_names_task() {
        let doc = Document::new(3, "Das ist ein Test.", None);
        let a = build_prompt(&doc, &TaskType::Translation);
        assert_eq!(a, build_prompt(&doc, &TaskType::Translation));
        assert!(a.contains("translation"));
        assert!(a.contains("Das ist ein Test."));
        assert!(a.contains("\"yes\" or \"no\""));
        assert!(build_prompt(&doc, &TaskType::Custom("ner".into())).contains("ner"));
    }

    #[test]
    fn placeholders_inside_document_text_are_left_alone() {
        let t = PromptTemplate::new("[{TASK}] {TEXT}").unwrap();
        let doc = Document::new(1, "literal {TASK}", None);
        assert_eq!(t.render(&doc, &TaskType::Topic), "[topic] literal {TASK}");
        assert!(PromptTemplate::new("no placeholders").is_err());
    }

    #[test]
    fn task_names_round_trip() {
        for t in ["translation", "sentiment", "topic", "summarization", "ner"] {
            assert_eq!(TaskType::from(t.to_string()).name(), t);
        }
    }

    struct Flaky {
        failures_left: AtomicU32,
        calls: AtomicU32,
    }

    impl Scorer for Flaky {
        fn score(&self, _: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self
                .failures_left
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                return Err(ScorerError::Transient("flaky".into()));
            }
            Ok(ScoreResponse::Q(0.25))
        }
    }

    fn fast_opts() -> ScoringOptions {
        ScoringOptions {
            retry: RetryPolicy {
                attempts: 3,
                initial_backoff: Duration::from_millis(1),
            },
            ..Default::default()
        }
    }

    #[test]
    fn retried_call_counts_once() {
        let s = Flaky {
            failures_left: AtomicU32::new(2),
            calls: AtomicU32::new(0),
        };
        let doc = Document::new(1, "x", None);
        let mut budget = ScorerBudget::new(1);
        let out = score_documents(&s, &[&doc], &TaskType::Topic, &mut budget, &fast_opts()).unwrap();
        assert_eq!(out[0].q, 0.25);
        assert_eq!(budget.calls_made(), 1);
        assert_eq!(s.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let s = Flaky {
            failures_left: AtomicU32::new(10),
            calls: AtomicU32::new(0),
        };
        let doc = Document::new(9, "x", None);
        let mut budget = ScorerBudget::new(5);
        let err = score_documents(&s, &[&doc], &TaskType::Topic, &mut budget, &fast_opts());
        assert!(matches!(
            err,
            Err(QualityError::ScorerUnavailable {
                doc_id: 9,
                attempts: 3,
                ..
            })
        ));
        assert_eq!(budget.calls_made(), 0);
    }

    #[test]
    fn invalid_direct_q_rejected() {
        assert!(matches!(
            ScoreResponse::Q(1.5).into_score(1),
            Err(QualityError::InvalidQ(_))
        ));
        let s = ScoreResponse::Logits(logits(&[("yes", 0.0), ("no", 0.0), ("maybe", 0.0)]))
            .into_score(1)
            .unwrap();
        assert_eq!(s.variant, ScoreVariant::MultiLogits);
        assert!((s.q - 1.0 / 3.0).abs() < 1e-15);
    }
}
