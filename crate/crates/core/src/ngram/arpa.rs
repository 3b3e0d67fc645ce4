//! ARPA text import and export.
//!
//! Export writes every value with Rust's shortest round-trip float
//! formatting, so `import(export(m))` reproduces `m` bit for bit. Files
//! from other toolkits (usually 7 significant digits) import fine.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{LmError, NGramModel, Weights, MAX_ORDER};
use crate::tokenizer::{TokenId, Vocabulary};

/// Log10 probability given to vocabulary words an imported file does not list.
pub const MISSING_LOG_PROB: f64 = -99.0;

pub fn to_arpa_string(model: &NGramModel, vocab: &Vocabulary) -> String {
    assert_eq!(model.vocab_size(), vocab.len());
    let order = model.order();
    let counts = model.counts();
    let mut out = String::from("\n\\data\\\n");
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(out, "ngram {}={}", i + 1, c);
    }

    let name = |ids: &[TokenId]| {
        ids.iter()
            .map(|&t| vocab.token(t).expect("id in vocabulary"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let line = |out: &mut String, ids: &[TokenId], w: Weights, n: usize| {
        let _ = write!(out, "{}\t{}", w.prob, name(ids));
        if n < order {
            let _ = write!(out, "\t{}", w.backoff);
        }
        out.push('\n');
    };

    out.push_str("\n\\1-grams:\n");
    for id in 0..model.vocab_size() as TokenId {
        line(&mut out, &[id], model.unigram(id), 1);
    }
    for n in 2..=order {
        let _ = write!(out, "\n\\{n}-grams:\n");
        for (g, w) in model.entries(n) {
            line(&mut out, g, w, n);
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn export_arpa(model: &NGramModel, vocab: &Vocabulary, path: &Path) -> Result<(), LmError> {
    fs::write(path, to_arpa_string(model, vocab))?;
    Ok(())
}

pub fn import_arpa(path: &Path, vocab: &Vocabulary, strict: bool) -> Result<NGramModel, LmError> {
    parse_arpa(&fs::read_to_string(path)?, vocab, strict)
}

fn format_err(line: usize, reason: impl Into<String>) -> LmError {
    LmError::ArpaFormat {
        line,
        reason: reason.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64, LmError> {
    s.trim()
        .parse()
        .map_err(|_| format_err(line, format!("bad number {s:?}")))
}

/// Parse ARPA text. Tokens missing from `vocab` are an error when `strict`,
/// otherwise they map to `<unk>` (first entry wins on a clash).
pub fn parse_arpa(text: &str, vocab: &Vocabulary, strict: bool) -> Result<NGramModel, LmError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    match lines.next() {
        Some((_, "\\data\\")) => {}
        Some((no, _)) => return Err(format_err(no, "expected \\data\\ header")),
        None => return Err(format_err(1, "empty file")),
    }

    let mut declared: Vec<usize> = Vec::new();
    while let Some(&(no, l)) = lines.peek() {
        let Some(rest) = l.strip_prefix("ngram ") else {
            break;
        };
        let (n, c) = rest
            .split_once('=')
            .ok_or_else(|| format_err(no, "expected ngram N=count"))?;
        let n: usize = n.trim().parse().map_err(|_| format_err(no, "bad order"))?;
        let c: usize = c.trim().parse().map_err(|_| format_err(no, "bad count"))?;
        if n != declared.len() + 1 {
            return Err(format_err(no, "ngram orders must be listed in sequence"));
        }
        declared.push(c);
        lines.next();
    }
    let order = declared.len();
    if !(1..=MAX_ORDER).contains(&order) {
        let no = lines.peek().map_or(1, |&(n, _)| n);
        return Err(format_err(no, format!("order must be 1..5, got {order}")));
    }

    let unk = vocab.id(crate::tokenizer::UNK);
    let map_token = |tok: &str, no: usize| -> Result<TokenId, LmError> {
        match vocab.id(tok) {
            Some(id) => Ok(id),
            None if strict => Err(LmError::UnknownToken(tok.to_string())),
            None => unk.ok_or_else(|| format_err(no, "no <unk> to map unknown token to")),
        }
    };

    let mut unigrams: Vec<Option<Weights>> = vec![None; vocab.len()];
    let mut higher: Vec<(Vec<TokenId>, Vec<Weights>)> = vec![(Vec::new(), Vec::new()); order - 1];
    let mut seen: Vec<std::collections::HashSet<Vec<TokenId>>> = vec![Default::default(); order - 1];

    for n in 1..=order {
        let (no, header) = lines
            .next()
            .ok_or_else(|| format_err(text.lines().count(), format!("missing \\{n}-grams: section")))?;
        if header != format!("\\{n}-grams:") {
            return Err(format_err(no, format!("expected \\{n}-grams:")));
        }
        let mut parsed = 0usize;
        while let Some(&(no, l)) = lines.peek() {
            if l.starts_with('\\') {
                break;
            }
            lines.next();
            let (prob, words, backoff) = if l.contains('\t') {
                let mut f = l.split('\t');
                let prob = f.next().unwrap_or_default();
                let words = f.next().ok_or_else(|| format_err(no, "missing n-gram field"))?;
                (prob, words.split(' ').collect::<Vec<_>>(), f.next())
            } else {
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() < n + 1 {
                    return Err(format_err(no, "too few fields"));
                }
                (f[0], f[1..=n].to_vec(), f.get(n + 1).copied())
            };
            if words.len() != n {
                return Err(format_err(no, format!("expected {n} words")));
            }
            let w = Weights {
                prob: parse_f64(prob, no)?,
                backoff: backoff.map(|b| parse_f64(b, no)).transpose()?.unwrap_or(0.0),
            };
            if w.prob > 0.0 {
                return Err(format_err(no, "log probability above zero"));
            }
            let ids = words
                .iter()
                .map(|t| map_token(t, no))
                .collect::<Result<Vec<_>, _>>()?;
            if n == 1 {
                unigrams[ids[0] as usize].get_or_insert(w);
            } else if seen[n - 2].insert(ids.clone()) {
                higher[n - 2].0.extend_from_slice(&ids);
                higher[n - 2].1.push(w);
            }
            parsed += 1;
        }
        if parsed != declared[n - 1] {
            let no = lines.peek().map_or(0, |&(n, _)| n);
            return Err(format_err(
                no,
                format!("{n}-grams: declared {} entries, found {parsed}", declared[n - 1]),
            ));
        }
    }
    match lines.next() {
        Some((_, "\\end\\")) => {}
        Some((no, _)) => return Err(format_err(no, "expected \\end\\")),
        None => return Err(format_err(text.lines().count(), "missing \\end\\")),
    }

    let fallback = unk
        .and_then(|u| unigrams[u as usize])
        .unwrap_or(Weights {
            prob: MISSING_LOG_PROB,
            backoff: 0.0,
        });
    let unigrams = unigrams
        .into_iter()
        .map(|w| w.unwrap_or(Weights { backoff: 0.0, ..fallback }))
        .collect();
    NGramModel::from_parts(order, vocab.len(), unigrams, higher, Vec::new())
}
