//! Documents, datasets and the resumable run state.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type DocId = u64;

/// Version written into every checkpoint file.
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: parse error on line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("duplicate document id {0}")]
    DuplicateId(DocId),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("document {id}: label {label} has no entry in label_names ({known} known)")]
    UnknownLabel { id: DocId, label: u32, known: usize },
    #[error("document {0} has no non-whitespace text")]
    EmptyText(DocId),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt run state: {0}")]
    CorruptState(String),
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
}

impl Document {
    pub fn new(id: DocId, text: impl Into<String>, label: Option<u32>) -> Self {
        Document {
            id,
            text: text.into(),
            label,
        }
    }
}

/// An immutable, ordered collection of documents with unique ids.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    documents: Vec<Document>,
    label_names: Option<Vec<String>>,
    index: HashMap<DocId, usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        documents: Vec<Document>,
        label_names: Option<Vec<String>>,
    ) -> Result<Self, CorpusError> {
        if documents.is_empty() {
            return Err(CorpusError::EmptyDataset);
        }
        let mut index = HashMap::with_capacity(documents.len());
        for (pos, doc) in documents.iter().enumerate() {
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(doc.id));
            }
            if index.insert(doc.id, pos).is_some() {
                return Err(CorpusError::DuplicateId(doc.id));
            }
            if let (Some(names), Some(label)) = (&label_names, doc.label) {
                if label as usize >= names.len() {
                    return Err(CorpusError::UnknownLabel {
                        id: doc.id,
                        label,
                        known: names.len(),
                    });
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            documents,
            label_names,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: DocId) -> Option<&Document> {
        self.index.get(&id).map(|&pos| &self.documents[pos])
    }

    pub fn position(&self, id: DocId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = DocId> + '_ {
        self.documents.iter().map(|d| d.id)
    }

    /// Number of label classes: `label_names.len()` when known, otherwise
    /// one past the largest label id seen.
    pub fn num_classes(&self) -> usize {
        match &self.label_names {
            Some(names) => names.len(),
            None => self
                .documents
                .iter()
                .filter_map(|d| d.label)
                .max()
                .map_or(0, |m| m as usize + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Tsv,
}

impl DatasetFormat {
    /// Guess from the file extension; anything that is not `.tsv` is read as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => DatasetFormat::Tsv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: DocId,
    text: String,
    #[serde(default)]
    label: Option<u32>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, reason: String| CorpusError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut documents = Vec::new();
    let mut label_names: Option<Vec<String>> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match format {
            DatasetFormat::Jsonl => {
                let rec: JsonlRecord =
                    serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
                if rec.text.trim().is_empty() {
                    return Err(parse_err(line_no, "empty text".into()));
                }
                documents.push(Document::new(rec.id, rec.text, rec.label));
            }
            DatasetFormat::Tsv => {
                if let Some(header) = line.strip_prefix('#') {
                    if let Some(list) = header.trim().strip_prefix("labels:") {
                        label_names = Some(list.split(',').map(|s| s.trim().to_string()).collect());
                    }
                    continue;
                }
                let mut cols = line.splitn(3, '\t');
                let id_col = cols.next().unwrap_or_default();
                let text = cols
                    .next()
                    .ok_or_else(|| parse_err(line_no, "missing text column".into()))?;
                let id: DocId = id_col
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad id {id_col:?}")))?;
                if text.trim().is_empty() {
                    return Err(parse_err(line_no, "empty text".into()));
                }
                let label = match cols.next().map(str::trim).filter(|s| !s.is_empty()) {
                    None => None,
                    Some(raw) => Some(tsv_label(raw, label_names.as_deref()).ok_or_else(|| {
                        parse_err(line_no, format!("unknown label {raw:?}"))
                    })?),
                };
                documents.push(Document::new(id, text, label));
            }
        }
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    Dataset::new(name, documents, label_names)
}

fn tsv_label(raw: &str, names: Option<&[String]>) -> Option<u32> {
    if let Some(pos) = names.and_then(|n| n.iter().position(|x| x == raw)) {
        return Some(pos as u32);
    }
    raw.parse().ok()
}

/// Write documents as JSONL, one object per line.
pub fn write_jsonl(path: &Path, docs: &[Document]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CorpusError::io(path, e))
}

/// The evolving active-learning state. Only the orchestrator mutates it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub iteration: u64,
    pub labeled_ids: BTreeSet<DocId>,
    pub unlabeled_ids: BTreeSet<DocId>,
    /// Current (reweighted) perplexity of every unlabeled document.
    pub perplexity: BTreeMap<DocId, f64>,
    /// Perplexity of each labeled document at the moment it was acquired.
    pub labeled_perplexity: BTreeMap<DocId, f64>,
    /// The batch acquired in the most recent iteration, in acquisition order.
    pub last_batch: Vec<DocId>,
    pub rng_seed: u64,
}

impl RunState {
    /// Fresh state: everything unlabeled, iteration 0.
    pub fn new(perplexity: BTreeMap<DocId, f64>, rng_seed: u64) -> Self {
        RunState {
            iteration: 0,
            labeled_ids: BTreeSet::new(),
            unlabeled_ids: perplexity.keys().copied().collect(),
            perplexity,
            labeled_perplexity: BTreeMap::new(),
            last_batch: Vec::new(),
            rng_seed,
        }
    }

    pub fn total(&self) -> usize {
        self.labeled_ids.len() + self.unlabeled_ids.len()
    }

    /// Move `batch` from U to L, snapshotting each document's current perplexity.
    pub fn label(&mut self, batch: &[DocId]) -> Result<(), CorpusError> {
        for &id in batch {
            if !self.unlabeled_ids.remove(&id) {
                return Err(CorpusError::CorruptState(format!(
                    "document {id} is not in the unlabeled pool"
                )));
            }
            let ppl = self.perplexity.remove(&id).ok_or_else(|| {
                CorpusError::CorruptState(format!("document {id} has no perplexity"))
            })?;
            self.labeled_ids.insert(id);
            self.labeled_perplexity.insert(id, ppl);
        }
        self.last_batch = batch.to_vec();
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if let Some(id) = self.labeled_ids.intersection(&self.unlabeled_ids).next() {
            return Err(CorpusError::CorruptState(format!(
                "document {id} is both labeled and unlabeled"
            )));
        }
        if let Some(id) = self
            .unlabeled_ids
            .iter()
            .find(|id| !self.perplexity.contains_key(id))
        {
            return Err(CorpusError::CorruptState(format!(
                "unlabeled document {id} has no perplexity"
            )));
        }
        if let Some(id) = self
            .perplexity
            .keys()
            .find(|id| !self.unlabeled_ids.contains(id))
        {
            return Err(CorpusError::CorruptState(format!(
                "perplexity recorded for {id}, which is not unlabeled"
            )));
        }
        if let Some((id, _)) = self.perplexity.iter().find(|(_, p)| !p.is_finite()) {
            return Err(CorpusError::CorruptState(format!(
                "non-finite perplexity for {id}"
            )));
        }
        if let Some(id) = self.last_batch.iter().find(|id| !self.labeled_ids.contains(id)) {
            return Err(CorpusError::CorruptState(format!(
                "last batch member {id} is not labeled"
            )));
        }
        Ok(())
    }

    /// Check that L ∪ U is exactly the dataset's id set.
    pub fn validate_against(&self, dataset: &Dataset) -> Result<(), CorpusError> {
        self.validate()?;
        if self.total() != dataset.len() {
            return Err(CorpusError::CorruptState(format!(
                "state covers {} documents, dataset has {}",
                self.total(),
                dataset.len()
            )));
        }
        if let Some(id) = dataset
            .ids()
            .find(|id| !self.labeled_ids.contains(id) && !self.unlabeled_ids.contains(id))
        {
            return Err(CorpusError::CorruptState(format!(
                "dataset document {id} missing from state"
            )));
        }
        Ok(())
    }
}

/// On-disk checkpoint layout. Floats are shortest round-trip decimal strings.
#[derive(Serialize, Deserialize)]
struct StateFile {
    state_version: u32,
    iteration: u64,
    rng_seed: u64,
    labeled_ids: Vec<DocId>,
    unlabeled_ids: Vec<DocId>,
    last_batch: Vec<DocId>,
    perplexity: BTreeMap<DocId, String>,
    labeled_perplexity: BTreeMap<DocId, String>,
}

fn encode_floats(map: &BTreeMap<DocId, f64>) -> BTreeMap<DocId, String> {
    map.iter().map(|(&k, v)| (k, format!("{v:?}"))).collect()
}

fn decode_floats(map: BTreeMap<DocId, String>) -> Result<BTreeMap<DocId, f64>, CorpusError> {
    map.into_iter()
        .map(|(k, v)| {
            v.parse::<f64>()
                .map(|f| (k, f))
                .map_err(|_| CorpusError::CorruptState(format!("bad float {v:?} for {k}")))
        })
        .collect()
}

pub fn state_to_json(state: &RunState) -> String {
    let file = StateFile {
        state_version: STATE_VERSION,
        iteration: state.iteration,
        rng_seed: state.rng_seed,
        labeled_ids: state.labeled_ids.iter().copied().collect(),
        unlabeled_ids: state.unlabeled_ids.iter().copied().collect(),
        last_batch: state.last_batch.clone(),
        perplexity: encode_floats(&state.perplexity),
        labeled_perplexity: encode_floats(&state.labeled_perplexity),
    };
    serde_json::to_string_pretty(&file).expect("state serializes")
}

pub fn state_from_json(json: &str) -> Result<RunState, CorpusError> {
    let file: StateFile =
        serde_json::from_str(json).map_err(|e| CorpusError::CorruptState(e.to_string()))?;
    if file.state_version != STATE_VERSION {
        return Err(CorpusError::CorruptState(format!(
            "unsupported state_version {}",
            file.state_version
        )));
    }
    let state = RunState {
        iteration: file.iteration,
        labeled_ids: file.labeled_ids.into_iter().collect(),
        unlabeled_ids: file.unlabeled_ids.into_iter().collect(),
        perplexity: decode_floats(file.perplexity)?,
        labeled_perplexity: decode_floats(file.labeled_perplexity)?,
        last_batch: file.last_batch,
        rng_seed: file.rng_seed,
    };
    state.validate()?;
    Ok(state)
}

pub fn save_state(state: &RunState, path: &Path) -> Result<(), CorpusError> {
    state.validate()?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, state_to_json(state)).map_err(|e| CorpusError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CorpusError::io(path, e))
}

pub fn load_state(path: &Path) -> Result<RunState, CorpusError> {
    let json = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    state_from_json(&json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_jsonl_lines() {
        let f = write_tmp(
            "{\"id\":1,\"text\":\"a b\"}\n{\"id\":2,\"text\":\"c\",\"label\":1}\n{\"id\":3,\"text\":\"d\"}\n",
            ".jsonl",
        );
        let ds = load_dataset(f.path(), DatasetFormat::Jsonl).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.documents()[1].label, Some(1));
        assert_eq!(ds.get(3).unwrap().text, "d");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let f = write_tmp(
            "{\"id\":7,\"text\":\"a\"}\n{\"id\":8,\"text\":\"b\"}\n{\"id\":7,\"text\":\"c\"}\n",
            ".jsonl",
        );
        assert!(matches!(
            load_dataset(f.path(), DatasetFormat::Jsonl),
            Err(CorpusError::DuplicateId(7))
        ));
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let f = write_tmp("", ".jsonl");
        assert!(matches!(
            load_dataset(f.path(), DatasetFormat::Jsonl),
            Err(CorpusError::EmptyDataset)
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("{\"id\":1,\"text\":\"a\"}\n{\"id\":oops}\n", ".jsonl");
        match load_dataset(f.path(), DatasetFormat::Jsonl) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tsv_labels_map_through_header() {
        let f = write_tmp(
            "# labels: neg,pos\n1\tgood movie\tpos\n2\tbad movie\t0\n3\tno label\n",
            ".tsv",
        );
        let ds = load_dataset(f.path(), DatasetFormat::Tsv).unwrap();
        assert_eq!(ds.label_names().unwrap(), ["neg", "pos"]);
        let labels: Vec<_> = ds.documents().iter().map(|d| d.label).collect();
        assert_eq!(labels, [Some(1), Some(0), None]);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn whitespace_text_rejected() {
        let docs = vec![Document::new(1, "  \t", None)];
        assert!(matches!(
            Dataset::new("x", docs, None),
            Err(CorpusError::EmptyText(1))
        ));
    }

    #[test]
    fn fresh_state_round_trips() {
        let ppl: BTreeMap<_, _> = (0..10).map(|i| (i, 1.0 + i as f64 / 3.0)).collect();
        let state = RunState::new(ppl, 42);
        let back = state_from_json(&state_to_json(&state)).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn overlapping_sets_are_corrupt() {
        let ppl: BTreeMap<_, _> = (0..4).map(|i| (i, 2.0)).collect();
        let mut state = RunState::new(ppl, 1);
        state.labeled_ids.insert(2);
        let json = state_to_json(&state);
        assert!(matches!(
            state_from_json(&json),
            Err(CorpusError::CorruptState(_))
        ));
    }

    #[test]
    fn label_moves_ids_and_snapshots() {
        let ppl: BTreeMap<_, _> = (0..5).map(|i| (i, i as f64 + 0.5)).collect();
        let mut state = RunState::new(ppl, 1);
        state.label(&[3, 1]).unwrap();
        assert_eq!(state.total(), 5);
        assert_eq!(state.labeled_perplexity[&3], 3.5);
        assert!(!state.perplexity.contains_key(&1));
        assert!(state.label(&[3]).is_err());
    }
}
