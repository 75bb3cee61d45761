//! ℙ_Y: conditions `⟨s, t⟩` with `s` a finite set of naturals and `t` a
//! finite set of handles into `Y`; `⟨s', t'⟩ ≤ ⟨s, t⟩` iff `s ⊆ s'`,
//! `t ⊆ t'` and `s' ∩ A = s ∩ A` for every `A ∈ t`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::real::SetHandle;
use super::seq::index_of;
use super::{Chain, DenseSet, Poset, PosetError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PYCondition {
    pub s: BTreeSet<u128>,
    /// Indices into the poset's handle list.
    pub t: BTreeSet<usize>,
}

impl PYCondition {
    pub fn new<S: IntoIterator<Item = u128>, T: IntoIterator<Item = usize>>(s: S, t: T) -> Self {
        Self {
            s: s.into_iter().collect(),
            t: t.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyPoset {
    pub handles: Vec<SetHandle>,
}

impl PyPoset {
    pub fn new(handles: Vec<SetHandle>) -> Self {
        Self { handles }
    }

    fn handle(&self, i: usize) -> Result<&SetHandle, PosetError> {
        self.handles.get(i).ok_or(PosetError::UnknownHandle(i))
    }

    pub fn member(&self, i: usize, n: u128) -> Result<bool, PosetError> {
        self.handle(i)?.contains(n, i)
    }

    /// `s ∩ handles[i]`.
    pub fn meet(&self, s: &BTreeSet<u128>, i: usize) -> Result<BTreeSet<u128>, PosetError> {
        let mut out = BTreeSet::new();
        for &n in s {
            if self.member(i, n)? {
                out.insert(n);
            }
        }
        Ok(out)
    }

    /// Whether `n` may be added to `c.s` without breaking a frozen
    /// intersection.
    pub fn addable(&self, c: &PYCondition, n: u128) -> Result<bool, PosetError> {
        if c.s.contains(&n) {
            return Ok(false);
        }
        for &a in &c.t {
            if self.member(a, n)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl Poset for PyPoset {
    type Cond = PYCondition;

    fn extends(&self, q: &PYCondition, p: &PYCondition) -> Result<bool, PosetError> {
        if !p.s.is_subset(&q.s) || !p.t.is_subset(&q.t) {
            return Ok(false);
        }
        for &a in &p.t {
            for &n in q.s.difference(&p.s) {
                if self.member(a, n)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// `c2 ≤ c1` in ℙ_Y.
pub fn py_extends(handles: &[SetHandle], c2: &PYCondition, c1: &PYCondition) -> Result<bool, PosetError> {
    PyPoset::new(handles.to_vec()).extends(c2, c1)
}

/// Common extension `⟨s, t₁ ∪ … ∪ tₙ⟩` of conditions sharing `s`.
pub fn py_merge(conditions: &[PYCondition]) -> Result<PYCondition, PosetError> {
    let first = conditions.first().ok_or(PosetError::Empty)?;
    if conditions.iter().any(|c| c.s != first.s) {
        return Err(PosetError::Mismatch("s"));
    }
    Ok(PYCondition {
        s: first.s.clone(),
        t: conditions.iter().flat_map(|c| c.t.iter().copied()).collect(),
    })
}

/// Conditions whose `t` contains a given handle.
#[derive(Debug, Clone)]
pub struct InT(pub usize);

impl DenseSet<PyPoset> for InT {
    fn name(&self) -> String {
        format!("t contains {}", self.0)
    }

    fn hits(&self, _: &PyPoset, c: &PYCondition) -> Result<bool, PosetError> {
        Ok(c.t.contains(&self.0))
    }

    fn extend(&self, poset: &PyPoset, c: &PYCondition) -> Result<PYCondition, PosetError> {
        poset.handle(self.0)?;
        let mut out = c.clone();
        out.t.insert(self.0);
        Ok(out)
    }
}

/// Conditions with `|s| ≥ k`.
#[derive(Debug, Clone)]
pub struct SizeAtLeast(pub usize);

const SEARCH_LIMIT: u128 = 1 << 20;

impl DenseSet<PyPoset> for SizeAtLeast {
    fn name(&self) -> String {
        format!("|s| >= {}", self.0)
    }

    fn hits(&self, _: &PyPoset, c: &PYCondition) -> Result<bool, PosetError> {
        Ok(c.s.len() >= self.0)
    }

    fn extend(&self, poset: &PyPoset, c: &PYCondition) -> Result<PYCondition, PosetError> {
        let mut out = c.clone();
        let mut n = 0u128;
        while out.s.len() < self.0 {
            if n > SEARCH_LIMIT {
                return Err(PosetError::Stuck(format!("no room to grow s to size {}", self.0)));
            }
            if poset.addable(&out, n)? {
                out.s.insert(n);
            }
            n += 1;
        }
        Ok(out)
    }
}

/// Conditions with `|s ∩ handles[i]| ≥ k`.
#[derive(Debug, Clone)]
pub struct Meets {
    pub handle: usize,
    pub k: usize,
}

impl DenseSet<PyPoset> for Meets {
    fn name(&self) -> String {
        format!("|s & {}| >= {}", self.handle, self.k)
    }

    fn hits(&self, poset: &PyPoset, c: &PYCondition) -> Result<bool, PosetError> {
        Ok(poset.meet(&c.s, self.handle)?.len() >= self.k)
    }

    fn extend(&self, poset: &PyPoset, c: &PYCondition) -> Result<PYCondition, PosetError> {
        let mut out = c.clone();
        let mut have = poset.meet(&out.s, self.handle)?.len();
        let stuck = || PosetError::Stuck(format!("handle {} cannot meet s {} times", self.handle, self.k));
        match poset.handle(self.handle)? {
            SetHandle::Code(f) => {
                let mut len = 0;
                while have < self.k {
                    if len > 4096 {
                        return Err(stuck());
                    }
                    let p = f.prefix(len).ok_or(PosetError::InsufficientPrefix {
                        real: self.handle,
                        needed: len,
                    })?;
                    let n = index_of(&p).ok_or(PosetError::IndexOverflow)?;
                    if poset.addable(&out, n)? {
                        out.s.insert(n);
                        have += 1;
                    }
                    len += 1;
                }
            }
            SetHandle::Explicit(set) => {
                for &n in set {
                    if have >= self.k {
                        break;
                    }
                    if poset.addable(&out, n)? {
                        out.s.insert(n);
                        have += 1;
                    }
                }
                if have < self.k {
                    return Err(stuck());
                }
            }
        }
        Ok(out)
    }
}

/// Dense sets for coding `a`: rounds of "handle `i` enters `t`" for
/// `i ∈ a`, "`s` meets handle `i` at least `r` times" for `i ∉ a`, and
/// "`|s| ≥ r`", truncated to `steps` sets.
pub fn coding_schedule(handles: usize, a: &BTreeSet<usize>, steps: usize) -> Vec<Box<dyn DenseSet<PyPoset>>> {
    let mut out: Vec<Box<dyn DenseSet<PyPoset>>> = Vec::with_capacity(steps);
    let mut round = 1;
    while out.len() < steps {
        for i in 0..handles {
            if a.contains(&i) {
                out.push(Box::new(InT(i)));
            } else {
                out.push(Box::new(Meets { handle: i, k: round }));
            }
        }
        out.push(Box::new(SizeAtLeast(round)));
        round += 1;
    }
    out.truncate(steps);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrozenEntry {
    pub handle: usize,
    /// Chain position where the handle entered `t`.
    pub entered_at: usize,
    /// `x ∩ handle`, fixed from that point on.
    pub elements: Vec<u128>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrowthEntry {
    pub handle: usize,
    /// Elements of `x ∩ handle` witnessed by the last condition.
    pub witnesses: Vec<u128>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodingReport {
    pub steps: usize,
    pub coded: Vec<usize>,
    pub frozen: Vec<FrozenEntry>,
    pub growth: Vec<GrowthEntry>,
    pub problems: Vec<String>,
    pub certified: bool,
}

/// Reads off, from a finite chain, the approximation to "x codes A":
/// intersections with coded handles freeze once the handle enters `t`,
/// the others keep growing.
pub fn coding_certificate(
    poset: &PyPoset,
    chain: &Chain<PYCondition>,
    a: &BTreeSet<usize>,
    growth_steps: usize,
) -> Result<CodingReport, PosetError> {
    let cs = &chain.conditions;
    let last = chain.last();
    let mut frozen = Vec::new();
    let mut growth = Vec::new();
    let mut problems = Vec::new();
    for i in 0..poset.handles.len() {
        let entered = cs.iter().position(|c| c.t.contains(&i));
        if a.contains(&i) {
            let Some(at) = entered else {
                problems.push(format!("handle {i} never entered t"));
                continue;
            };
            let fixed = poset.meet(&cs[at].s, i)?;
            for (k, c) in cs.iter().enumerate().skip(at + 1) {
                if poset.meet(&c.s, i)? != fixed {
                    problems.push(format!("intersection with handle {i} changed at step {k}"));
                    break;
                }
            }
            frozen.push(FrozenEntry {
                handle: i,
                entered_at: at,
                elements: fixed.into_iter().collect(),
            });
        } else {
            if let Some(at) = entered {
                problems.push(format!("handle {i} is not coded but entered t at step {at}"));
            }
            let witnesses: Vec<u128> = poset.meet(&last.s, i)?.into_iter().collect();
            if witnesses.len() < growth_steps {
                problems.push(format!(
                    "handle {i}: only {} growth witnesses, wanted {growth_steps}",
                    witnesses.len()
                ));
            }
            growth.push(GrowthEntry { handle: i, witnesses });
        }
    }
    Ok(CodingReport {
        steps: cs.len() - 1,
        coded: a.iter().copied().collect(),
        frozen,
        growth,
        certified: problems.is_empty(),
        problems,
    })
}
