//! Versioned binary cache for trained models.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        b"APLM1"
//! version      u32 (= 1)
//! order        u32
//! min_count    u32              vocabulary build threshold
//! vocab_len    u32, then per token: u32 byte length + UTF-8 bytes
//! discounts    u32 count, then count x 3 f64
//! unigrams     vocab_len x (f64 log10 prob, f64 log10 backoff)
//! orders 2..N  u64 entries, then entries x (n x u32 ids, f64, f64)
//! ```
//!
//! The hash tables are rebuilt on load.

use std::fs;
use std::path::Path;

use super::{Discounts, LmError, NGramModel, Weights};
use crate::tokenizer::{TokenId, Vocabulary};

pub const MAGIC: &[u8; 5] = b"APLM1";
pub const VERSION: u32 = 1;

pub fn to_bytes(model: &NGramModel, vocab: &Vocabulary) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&(model.order() as u32).to_le_bytes());
    b.extend_from_slice(&vocab.min_count().to_le_bytes());
    b.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
    for tok in vocab.tokens() {
        b.extend_from_slice(&(tok.len() as u32).to_le_bytes());
        b.extend_from_slice(tok.as_bytes());
    }
    b.extend_from_slice(&(model.discounts().len() as u32).to_le_bytes());
    for d in model.discounts() {
        for x in d.0 {
            b.extend_from_slice(&x.to_le_bytes());
        }
    }
    let put_w = |b: &mut Vec<u8>, w: Weights| {
        b.extend_from_slice(&w.prob.to_le_bytes());
        b.extend_from_slice(&w.backoff.to_le_bytes());
    };
    for id in 0..model.vocab_size() as TokenId {
        put_w(&mut b, model.unigram(id));
    }
    for n in 2..=model.order() {
        let entries: Vec<_> = model.entries(n).collect();
        b.extend_from_slice(&(entries.len() as u64).to_le_bytes());
        for (g, w) in entries {
            for &t in g {
                b.extend_from_slice(&t.to_le_bytes());
            }
            put_w(&mut b, w);
        }
    }
    b
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LmError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| LmError::BinaryFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, LmError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LmError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, LmError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn weights(&mut self) -> Result<Weights, LmError> {
        Ok(Weights {
            prob: self.f64()?,
            backoff: self.f64()?,
        })
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<(NGramModel, Vocabulary), LmError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(LmError::BinaryFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(LmError::BinaryFormat(format!("unsupported version {version}")));
    }
    let order = r.u32()? as usize;
    if !(1..=super::MAX_ORDER).contains(&order) {
        return Err(LmError::InvalidOrder(order));
    }
    let min_count = r.u32()?;
    let vocab_len = r.u32()? as usize;
    let mut text = format!("#activeprune-vocab min_count={min_count}\n");
    for _ in 0..vocab_len {
        let len = r.u32()? as usize;
        let tok = std::str::from_utf8(r.take(len)?)
            .map_err(|_| LmError::BinaryFormat("token is not UTF-8".into()))?;
        text.push_str(tok);
        text.push('\n');
    }
    let vocab = Vocabulary::from_text(&text)?;
    let nd = r.u32()? as usize;
    let mut discounts = Vec::with_capacity(nd);
    for _ in 0..nd {
        discounts.push(Discounts([r.f64()?, r.f64()?, r.f64()?]));
    }
    let unigrams = (0..vocab_len)
        .map(|_| r.weights())
        .collect::<Result<Vec<_>, _>>()?;
    let mut higher = Vec::new();
    for n in 2..=order {
        let count = r.u64()? as usize;
        let mut grams = Vec::with_capacity(count.min(buf.len()) * n);
        let mut weights = Vec::with_capacity(count.min(buf.len()));
        for _ in 0..count {
            for _ in 0..n {
                grams.push(r.u32()?);
            }
            weights.push(r.weights()?);
        }
        higher.push((grams, weights));
    }
    if r.pos != buf.len() {
        return Err(LmError::BinaryFormat("trailing bytes".into()));
    }
    let model = NGramModel::from_parts(order, vocab_len, unigrams, higher, discounts)?;
    Ok((model, vocab))
}

pub fn save(model: &NGramModel, vocab: &Vocabulary, path: &Path) -> Result<(), LmError> {
    fs::write(path, to_bytes(model, vocab))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(NGramModel, Vocabulary), LmError> {
    from_bytes(&fs::read(path)?)
}
