//! Finite-scale combinatorics of the almost-disjoint poset ℙ_Y and the
//! basic-open poset ℙ_i: extension relations, centered merges, dense sets
//! and Rasiowa–Sikorski chains approximating generic filters.

pub mod pi;
pub mod py;
pub mod real;
pub mod seq;

use serde::Serialize;
use thiserror::Error;

pub use pi::{pi_extends, pi_merge_class, DAlpha, DsN, PICondition, PiPoset};
pub use py::{coding_certificate, coding_schedule, py_extends, py_merge, CodingReport, PYCondition, PyPoset};
pub use real::{ad_code, avoid_basic_open, RealHandle, SetHandle};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum PosetError {
    #[error("real {real} needs a known prefix of length {needed}")]
    InsufficientPrefix { real: usize, needed: usize },
    #[error("reals {0} and {1} cannot be separated with the available prefixes")]
    Inseparable(usize, usize),
    #[error("no reals given")]
    NoReals,
    #[error("sequence index exceeds 128 bits")]
    IndexOverflow,
    #[error("conditions do not share their {0} component")]
    Mismatch(&'static str),
    #[error("no conditions given")]
    Empty,
    #[error("unknown handle {0}")]
    UnknownHandle(usize),
    #[error("dense set {name} not met at step {step}")]
    DenseMissed { name: String, step: usize },
    #[error("step {step} does not extend its predecessor")]
    NotExtension { step: usize },
    #[error("{0}")]
    Stuck(String),
}

/// A poset given by its extension relation: `extends(q, p)` iff `q ≤ p`.
pub trait Poset {
    type Cond: Clone;

    fn extends(&self, q: &Self::Cond, p: &Self::Cond) -> Result<bool, PosetError>;
}

/// A dense subset with a witness for density.
pub trait DenseSet<P: Poset> {
    fn name(&self) -> String;

    fn hits(&self, poset: &P, c: &P::Cond) -> Result<bool, PosetError>;

    /// Some `d ≤ c` inside the set (`c` itself if it already is).
    fn extend(&self, poset: &P, c: &P::Cond) -> Result<P::Cond, PosetError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chain<C> {
    pub conditions: Vec<C>,
    /// Name of the dense set met at each step.
    pub met: Vec<String>,
}

impl<C> Chain<C> {
    pub fn last(&self) -> &C {
        self.conditions.last().expect("chain starts with a condition")
    }
}

/// `c₀ = start`, `cᵢ₊₁ = denses[i].extend(cᵢ)`; each step is checked to
/// extend its predecessor and to meet its dense set.
pub fn rasiowa_sikorski<P: Poset>(
    poset: &P,
    start: P::Cond,
    denses: &[Box<dyn DenseSet<P> + '_>],
) -> Result<Chain<P::Cond>, PosetError> {
    let mut conditions = vec![start];
    let mut met = Vec::with_capacity(denses.len());
    for (step, d) in denses.iter().enumerate() {
        let c = conditions.last().expect("non-empty");
        let next = d.extend(poset, c)?;
        if !poset.extends(&next, c)? {
            return Err(PosetError::NotExtension { step: step + 1 });
        }
        if !d.hits(poset, &next)? {
            return Err(PosetError::DenseMissed {
                name: d.name(),
                step: step + 1,
            });
        }
        met.push(d.name());
        conditions.push(next);
    }
    Ok(Chain { conditions, met })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainAudit {
    pub steps: usize,
    /// Pairs `(i, j)`, `i < j`, with `cⱼ` not extending `cᵢ`.
    pub non_extensions: Vec<(usize, usize)>,
    pub missed: Vec<usize>,
}

impl ChainAudit {
    pub fn ok(&self) -> bool {
        self.non_extensions.is_empty() && self.missed.is_empty()
    }
}

/// Re-verifies a chain: every later condition extends every earlier one, and
/// step `i + 1` meets `denses[i]`.
pub fn audit_chain<P: Poset>(
    poset: &P,
    chain: &Chain<P::Cond>,
    denses: &[Box<dyn DenseSet<P> + '_>],
) -> Result<ChainAudit, PosetError> {
    let cs = &chain.conditions;
    let mut non_extensions = Vec::new();
    for j in 1..cs.len() {
        for i in 0..j {
            if !poset.extends(&cs[j], &cs[i])? {
                non_extensions.push((i, j));
            }
        }
    }
    let mut missed = Vec::new();
    for (i, d) in denses.iter().enumerate() {
        if let Some(c) = cs.get(i + 1) {
            if !d.hits(poset, c)? {
                missed.push(i + 1);
            }
        }
    }
    Ok(ChainAudit {
        steps: cs.len() - 1,
        non_extensions,
        missed,
    })
}
