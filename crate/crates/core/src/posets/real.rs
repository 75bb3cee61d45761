//! Computable stand-ins for reals in ω^ω and the sets of naturals built
//! from them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::seq::{index_of, is_prefix, seq_of};
use super::PosetError;

/// A real given by a prefix oracle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealHandle {
    /// `head` followed by `cycle` repeated forever (`cycle` non-empty).
    Periodic { head: Vec<u64>, cycle: Vec<u64> },
    /// Only a finite prefix is known.
    Known(Vec<u64>),
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl RealHandle {
    pub fn constant(v: u64) -> Self {
        RealHandle::Periodic {
            head: vec![],
            cycle: vec![v],
        }
    }

    pub fn eventually(head: Vec<u64>, v: u64) -> Self {
        RealHandle::Periodic { head, cycle: vec![v] }
    }

    pub fn periodic(head: Vec<u64>, cycle: Vec<u64>) -> Self {
        assert!(!cycle.is_empty(), "empty cycle");
        RealHandle::Periodic { head, cycle }
    }

    /// Value at position `i`, if the oracle knows it.
    pub fn get(&self, i: usize) -> Option<u64> {
        match self {
            RealHandle::Periodic { head, cycle } => Some(if i < head.len() {
                head[i]
            } else {
                cycle[(i - head.len()) % cycle.len()]
            }),
            RealHandle::Known(p) => p.get(i).copied(),
        }
    }

    /// First `k` values, if known.
    pub fn prefix(&self, k: usize) -> Option<Vec<u64>> {
        (0..k).map(|i| self.get(i)).collect()
    }

    /// Positions beyond which two handles that agree so far agree forever.
    fn agreement_bound(&self, other: &RealHandle) -> Option<usize> {
        match (self, other) {
            (RealHandle::Periodic { head: h1, cycle: c1 }, RealHandle::Periodic { head: h2, cycle: c2 }) => {
                let lcm = c1.len() / gcd(c1.len(), c2.len()) * c2.len();
                Some(h1.len().max(h2.len()) + lcm)
            }
            _ => None,
        }
    }

    /// Whether the real lies in the basic open `U_s`.
    pub fn in_open(&self, s: &[u64], id: usize) -> Result<bool, PosetError> {
        let p = self.prefix(s.len()).ok_or(PosetError::InsufficientPrefix {
            real: id,
            needed: s.len(),
        })?;
        Ok(p == s)
    }
}

/// Length of the longest common initial segment, `None` if the handles are
/// provably identical.
pub fn common_prefix(a: &RealHandle, b: &RealHandle, ids: (usize, usize)) -> Result<Option<usize>, PosetError> {
    let bound = a.agreement_bound(b);
    for n in 0.. {
        if bound.is_some_and(|b| n >= b) {
            return Ok(None);
        }
        match (a.get(n), b.get(n)) {
            (Some(x), Some(y)) if x != y => return Ok(Some(n)),
            (Some(_), Some(_)) => {}
            _ => return Err(PosetError::Inseparable(ids.0, ids.1)),
        }
    }
    unreachable!()
}

/// Remark-style avoidance relative to `base`: every real in `reals` must
/// extend `base`. Returns `t⌢⟨j⟩` where `t ⊵ base` is the longest segment
/// common to the reals (`base` itself for a single real) and `j` is the
/// least value differing from each real's next entry.
pub fn avoid_extending(base: &[u64], reals: &[(usize, &RealHandle)]) -> Result<Vec<u64>, PosetError> {
    let Some(&(id0, first)) = reals.first() else {
        return Err(PosetError::NoReals);
    };
    let n = if reals.len() == 1 {
        base.len()
    } else {
        let mut best: Option<usize> = None;
        let mut blocker = None;
        for &(id, r) in &reals[1..] {
            match common_prefix(first, r, (id0, id))? {
                Some(l) => best = Some(best.map_or(l, |b| b.min(l))),
                None => blocker = Some(id),
            }
        }
        match (best, blocker) {
            (Some(l), _) => l.max(base.len()),
            (None, Some(id)) => return Err(PosetError::Inseparable(id0, id)),
            (None, None) => unreachable!("at least two reals"),
        }
    };
    let mut t = first.prefix(n).ok_or(PosetError::InsufficientPrefix { real: id0, needed: n })?;
    debug_assert!(is_prefix(base, &t));
    let next: BTreeSet<u64> = reals
        .iter()
        .map(|&(id, r)| r.get(n).ok_or(PosetError::InsufficientPrefix { real: id, needed: n + 1 }))
        .collect::<Result<_, _>>()?;
    let j = (0..).find(|j| !next.contains(j)).expect("finite set");
    t.push(j);
    Ok(t)
}

/// A finite sequence `s` such that no listed real lies in `U_s`.
pub fn avoid_basic_open(reals: &[RealHandle]) -> Result<Vec<u64>, PosetError> {
    let tagged: Vec<(usize, &RealHandle)> = reals.iter().enumerate().collect();
    avoid_extending(&[], &tagged)
}

/// The first `count` elements of the almost-disjoint code
/// `S(f) = {i | seq_of(i) is an initial segment of f}`, ascending.
pub fn ad_code(f: &RealHandle, count: usize) -> Result<Vec<u128>, PosetError> {
    (0..count)
        .map(|len| {
            let p = f.prefix(len).ok_or(PosetError::InsufficientPrefix { real: 0, needed: len })?;
            index_of(&p).ok_or(PosetError::IndexOverflow)
        })
        .collect()
}

/// A subset of ℕ with decidable membership.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetHandle {
    /// The code `S(f)`.
    Code(RealHandle),
    Explicit(BTreeSet<u128>),
}

impl SetHandle {
    pub fn contains(&self, i: u128, id: usize) -> Result<bool, PosetError> {
        match self {
            SetHandle::Explicit(s) => Ok(s.contains(&i)),
            SetHandle::Code(f) => {
                let s = seq_of(i);
                let p = f.prefix(s.len()).ok_or(PosetError::InsufficientPrefix {
                    real: id,
                    needed: s.len(),
                })?;
                Ok(p == s)
            }
        }
    }
}
