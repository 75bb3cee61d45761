//! A fixed bijection between `u128` indices and finite sequences over ℕ.
//!
//! Sequences are ordered by weight `sum + length`, then lexicographically.
//! Weight `w ≥ 1` has `2^(w-1)` sequences occupying indices
//! `2^(w-1) .. 2^w`; the empty sequence has index 0. Indices stay within
//! `u128` up to weight 128.

/// Largest weight whose block fits in `u128`.
pub const MAX_WEIGHT: u64 = 128;

pub fn weight(seq: &[u64]) -> Option<u64> {
    seq.iter()
        .try_fold(seq.len() as u64, |acc, &x| acc.checked_add(x))
}

/// Number of sequences of weight exactly `w`.
fn count(w: u64) -> u128 {
    if w == 0 {
        1
    } else {
        1u128 << (w - 1)
    }
}

/// Index of a sequence, or `None` if it is beyond `u128`.
pub fn index_of(seq: &[u64]) -> Option<u128> {
    let w = weight(seq)?;
    if w == 0 {
        return Some(0);
    }
    if w > MAX_WEIGHT {
        return None;
    }
    let mut rank = 0u128;
    let mut rest = w;
    for &x in seq {
        for v in 0..x {
            rank += count(rest - v - 1);
        }
        rest -= x + 1;
    }
    Some((1u128 << (w - 1)) + rank)
}

/// Inverse of [`index_of`].
pub fn seq_of(index: u128) -> Vec<u64> {
    if index == 0 {
        return Vec::new();
    }
    let w = 128 - index.leading_zeros() as u64;
    let mut rank = index - (1u128 << (w - 1));
    let mut rest = w;
    let mut out = Vec::new();
    while rest > 0 {
        let mut v = 0;
        loop {
            let c = count(rest - v - 1);
            if rank < c {
                break;
            }
            rank -= c;
            v += 1;
        }
        out.push(v);
        rest -= v + 1;
    }
    out
}

/// Length of the sequence with this index, without decoding it fully.
pub fn len_of(index: u128) -> usize {
    seq_of(index).len()
}

pub fn is_prefix(prefix: &[u64], seq: &[u64]) -> bool {
    prefix.len() <= seq.len() && seq[..prefix.len()] == *prefix
}
