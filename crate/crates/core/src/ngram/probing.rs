//! Linear-probing hash table keyed by 64-bit n-gram fingerprints.
//!
//! Only the fingerprint is stored, never the id sequence itself. Keys are
//! built right-to-left (word first, then context words backwards) so a
//! query can extend the match one context word at a time.

use super::Weights;
use crate::tokenizer::TokenId;

const EMPTY: u64 = 0;
const MUL: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn finalize(mut x: u64) -> u64 {
    x = (x ^ (x >> 33)).wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x = (x ^ (x >> 33)).wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    x ^ (x >> 33)
}

#[inline]
fn nonzero(x: u64) -> u64 {
    if x == EMPTY {
        1
    } else {
        x
    }
}

/// Fingerprint of the one-word n-gram `word`.
#[inline]
pub fn start(word: TokenId) -> u64 {
    nonzero(finalize((word as u64 + 1).wrapping_mul(MUL)))
}

/// Fingerprint of `prev · g` given the fingerprint of `g`.
#[inline]
pub fn extend(key: u64, prev: TokenId) -> u64 {
    nonzero(finalize(key.rotate_left(23) ^ (prev as u64 + 1).wrapping_mul(MUL)))
}

/// Fingerprint of a whole n-gram, oldest word first.
pub fn fingerprint(gram: &[TokenId]) -> u64 {
    let (&last, rest) = gram.split_last().expect("n-gram is non-empty");
    rest.iter().rev().fold(start(last), |k, &w| extend(k, w))
}

#[derive(Debug, Clone, Copy)]
#[repr(C)]
struct Slot {
    key: u64,
    weights: Weights,
}

#[derive(Debug, Clone)]
pub struct ProbingTable {
    slots: Vec<Slot>,
    mask: usize,
    len: usize,
}

/// Two entries were given the same fingerprint.
#[derive(Debug)]
pub struct Collision(pub u64);

impl ProbingTable {
    /// Capacity is the next power of two at or above 1.5x the entry count.
    pub fn with_entries(n: usize) -> Self {
        let cap = ((n * 3) / 2 + 1).next_power_of_two().max(8);
        ProbingTable {
            slots: vec![
                Slot {
                    key: EMPTY,
                    weights: Weights::default()
                };
                cap
            ],
            mask: cap - 1,
            len: 0,
        }
    }

    pub fn insert(&mut self, key: u64, weights: Weights) -> Result<(), Collision> {
        debug_assert_ne!(key, EMPTY);
        assert!(self.len < self.slots.len() - 1, "probing table is full");
        let mut i = key as usize & self.mask;
        loop {
            let slot = &mut self.slots[i];
            if slot.key == EMPTY {
                *slot = Slot { key, weights };
                self.len += 1;
                return Ok(());
            }
            if slot.key == key {
                return Err(Collision(key));
            }
            i = (i + 1) & self.mask;
        }
    }

    #[inline]
    pub fn get(&self, key: u64) -> Option<&Weights> {
        let mut i = key as usize & self.mask;
        loop {
            // SAFETY: i is always masked into bounds.
            let slot = unsafe { self.slots.get_unchecked(i) };
            if slot.key == key {
                return Some(&slot.weights);
            }
            if slot.key == EMPTY {
                return None;
            }
            i = (i + 1) & self.mask;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}
