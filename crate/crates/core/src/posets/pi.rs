//! ℙ_i: conditions are finite sets of basic opens `U_s` and reals;
//! `q ≤ p` iff `p ⊆ q` and no open of `q ∖ p` contains a real of `p`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::real::{avoid_extending, RealHandle};
use super::seq::is_prefix;
use super::{DenseSet, Poset, PosetError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PICondition {
    /// Each sequence `s` names the basic open `U_s`.
    pub opens: BTreeSet<Vec<u64>>,
    /// Indices into the poset's real list.
    pub reals: BTreeSet<usize>,
}

impl PICondition {
    pub fn new<O: IntoIterator<Item = Vec<u64>>, R: IntoIterator<Item = usize>>(opens: O, reals: R) -> Self {
        Self {
            opens: opens.into_iter().collect(),
            reals: reals.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiPoset {
    pub reals: Vec<RealHandle>,
}

impl PiPoset {
    pub fn new(reals: Vec<RealHandle>) -> Self {
        Self { reals }
    }

    pub fn real(&self, id: usize) -> Result<&RealHandle, PosetError> {
        self.reals.get(id).ok_or(PosetError::UnknownHandle(id))
    }
}

impl Poset for PiPoset {
    type Cond = PICondition;

    fn extends(&self, q: &PICondition, p: &PICondition) -> Result<bool, PosetError> {
        pi_extends(q, p, &self.reals)
    }
}

/// `q ≤ p` in ℙ_i. Membership of a real in a new open is decided from its
/// prefix; a prefix that is too short is an error, never a guess.
pub fn pi_extends(q: &PICondition, p: &PICondition, reals: &[RealHandle]) -> Result<bool, PosetError> {
    if !p.opens.is_subset(&q.opens) || !p.reals.is_subset(&q.reals) {
        return Ok(false);
    }
    for &a in &p.reals {
        let real = reals.get(a).ok_or(PosetError::UnknownHandle(a))?;
        for s in q.opens.difference(&p.opens) {
            if real.in_open(s, a)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Union of conditions sharing their opens; it extends each of them.
pub fn pi_merge_class(conditions: &[PICondition]) -> Result<PICondition, PosetError> {
    let first = conditions.first().ok_or(PosetError::Empty)?;
    if conditions.iter().any(|c| c.opens != first.opens) {
        return Err(PosetError::Mismatch("opens"));
    }
    Ok(PICondition {
        opens: first.opens.clone(),
        reals: conditions.iter().flat_map(|c| c.reals.iter().copied()).collect(),
    })
}

/// `D_α`: conditions containing a given real.
#[derive(Debug, Clone)]
pub struct DAlpha(pub usize);

impl DenseSet<PiPoset> for DAlpha {
    fn name(&self) -> String {
        format!("D_alpha({})", self.0)
    }

    fn hits(&self, _: &PiPoset, c: &PICondition) -> Result<bool, PosetError> {
        Ok(c.reals.contains(&self.0))
    }

    fn extend(&self, poset: &PiPoset, c: &PICondition) -> Result<PICondition, PosetError> {
        poset.real(self.0)?;
        let mut out = c.clone();
        out.reals.insert(self.0);
        Ok(out)
    }
}

/// `D_{s,N}`: conditions containing some `U_t` with `t ⊵ s` and `ℓ(t) > N`.
#[derive(Debug, Clone)]
pub struct DsN {
    pub s: Vec<u64>,
    pub n: usize,
}

impl DsN {
    /// The sequence `t` added by [`DenseSet::extend`]: reals of `c` that
    /// extend `s` are avoided by one step of the remark construction, then
    /// the result is padded with zeros past length `N`.
    pub fn witness(&self, poset: &PiPoset, c: &PICondition) -> Result<Vec<u64>, PosetError> {
        let mut inside = Vec::new();
        for &id in &c.reals {
            let r = poset.real(id)?;
            if r.in_open(&self.s, id)? {
                inside.push((id, r));
            }
        }
        let mut t = if inside.is_empty() {
            self.s.clone()
        } else {
            avoid_extending(&self.s, &inside)?
        };
        while t.len() <= self.n {
            t.push(0);
        }
        Ok(t)
    }
}

impl DenseSet<PiPoset> for DsN {
    fn name(&self) -> String {
        format!("D_{{{:?},{}}}", self.s, self.n)
    }

    fn hits(&self, _: &PiPoset, c: &PICondition) -> Result<bool, PosetError> {
        Ok(c.opens.iter().any(|t| t.len() > self.n && is_prefix(&self.s, t)))
    }

    fn extend(&self, poset: &PiPoset, c: &PICondition) -> Result<PICondition, PosetError> {
        if self.hits(poset, c)? {
            return Ok(c.clone());
        }
        let mut out = c.clone();
        out.opens.insert(self.witness(poset, c)?);
        Ok(out)
    }
}

/// For each real, the chain position where it entered; checks that no open
/// added afterwards contains it.
pub fn avoidance_audit(poset: &PiPoset, chain: &[PICondition]) -> Result<Vec<String>, PosetError> {
    let mut problems = Vec::new();
    for (id, real) in poset.reals.iter().enumerate() {
        let Some(at) = chain.iter().position(|c| c.reals.contains(&id)) else {
            continue;
        };
        let before = &chain[at].opens;
        for s in chain.last().map(|c| &c.opens).into_iter().flatten() {
            if !before.contains(s) && real.in_open(s, id)? {
                problems.push(format!("real {id} lies in U_{s:?}, added after step {at}"));
            }
        }
    }
    Ok(problems)
}
