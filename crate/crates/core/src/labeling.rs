//! Labelings of pre-Boolean-algebras by control statements, their
//! verification against a multiverse, and the translation of pBA valuations
//! into substitutions.

use std::collections::{BTreeMap, HashMap};

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{Formula, Substitution};
use crate::kripke::{Frame, Model, PbaStructure};
use crate::multiverse::{ControlFamily, MState, Multiverse, MultiverseError, Obs, RatchetBounds, Regime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelingError {
    #[error("family mismatch: {0}")]
    FamilyMismatch(String),
    #[error("ratchet bounds leave no headroom: need k_max >= {needed}, got {got}")]
    NoHeadroom { needed: u16, got: u16 },
    #[error("an n-switch needs n >= 2 (or m >= 1 switches), got {0}")]
    TooSmall(u32),
    #[error("{0} statements for {1} worlds")]
    StatementCount(usize, usize),
    #[error(transparent)]
    Multiverse(#[from] MultiverseError),
}

/// A statement attached to every world of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub frame: Frame,
    /// Indexed by world.
    pub statements: Vec<Formula>,
    pub initial_world: usize,
}

impl Labeling {
    pub fn new(frame: Frame, statements: Vec<Formula>, initial_world: usize) -> Result<Self, LabelingError> {
        if statements.len() != frame.len() {
            return Err(LabelingError::StatementCount(statements.len(), frame.len()));
        }
        Ok(Self {
            frame,
            statements,
            initial_world,
        })
    }

    pub fn statement(&self, w: usize) -> &Formula {
        &self.statements[w]
    }

    /// Replaces every occurrence of one atom in every statement.
    pub fn map_atom(&self, from: &str, to: &Formula) -> Labeling {
        let sigma: Substitution = [(from.to_string(), to.clone())].into_iter().collect();
        Labeling {
            frame: self.frame.clone(),
            statements: self.statements.iter().map(|f| f.substitute(&sigma)).collect(),
            initial_world: self.initial_world,
        }
    }
}

#[derive(Serialize)]
struct LabelEntry<'a> {
    world: &'a str,
    statement: String,
}

impl Serialize for Labeling {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            frame: &'a Frame,
            initial_world: &'a str,
            statements: Vec<LabelEntry<'a>>,
        }
        let worlds = self.frame.worlds();
        Repr {
            frame: &self.frame,
            initial_world: &worlds[self.initial_world],
            statements: worlds
                .iter()
                .zip(&self.statements)
                .map(|(w, f)| LabelEntry {
                    world: w,
                    statement: f.to_string(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

fn atom(o: Obs) -> Formula {
    Formula::Atom(o.to_string())
}

/// `2^m` statements over switches `s:0..s:m-1`; statement `j` fixes the
/// switches to the binary digits of `j` (bit `i` ↔ `s:i`).
pub fn binary_nswitch(m: u32) -> Result<Vec<Formula>, LabelingError> {
    if m == 0 {
        return Err(LabelingError::TooSmall(m));
    }
    Ok((0..1u32 << m)
        .map(|j| {
            Formula::conj((0..m).map(|i| {
                let s = atom(Obs::Switch(i));
                if j >> i & 1 == 1 {
                    s
                } else {
                    Formula::not(s)
                }
            }))
        })
        .collect())
}

/// `n` statements over the ratchet: statement `j` says the current ratchet
/// value `(α, k)` has `k mod n = j`.
pub fn ratchet_nswitch(n: u32, bounds: RatchetBounds) -> Result<Vec<Formula>, LabelingError> {
    if n < 2 {
        return Err(LabelingError::TooSmall(n));
    }
    let needed = (2 * n) as u16;
    if bounds.k_max < needed {
        return Err(LabelingError::NoHeadroom {
            needed,
            got: bounds.k_max,
        });
    }
    let values: Vec<(u16, u16)> = (0..bounds.alpha_max)
        .flat_map(|a| (0..bounds.k_max).map(move |k| (a, k)))
        .collect();
    let exact = |i: usize| {
        let (a, k) = values[i];
        match values.get(i + 1) {
            Some(&(na, nk)) => Formula::and(atom(Obs::RGeq(a, k)), Formula::not(atom(Obs::RGeq(na, nk)))),
            None => atom(Obs::RGeq(a, k)),
        }
    };
    Ok((0..n)
        .map(|j| Formula::disj((0..values.len()).filter(|&i| values[i].1 as u32 % n == j).map(exact)))
        .collect())
}

/// Adds dummy worlds so that every cluster has exactly `n` members.
pub fn pad_clusters(pba: &PbaStructure, n: usize) -> PbaStructure {
    let sizes: Vec<usize> = pba.cluster_sizes().iter().map(|&c| c.max(n)).collect();
    let mut out = crate::kripke::pba_frame(pba.base_size, &sizes);
    // Keep the original ids for the original worlds.
    for (mask, members) in pba.cluster_members.iter().enumerate() {
        for (i, &w) in members.iter().enumerate() {
            let new = out.cluster_members[mask][i];
            out.worlds[new] = pba.worlds[w].clone();
        }
    }
    out
}

/// Statement index `i` of a cluster with `c` members over an `n`-valued
/// switch: the last member absorbs the unused values `c-1 .. n`.
fn slot(i: usize, c: usize, n: usize, f: impl Fn(u32) -> Formula) -> Formula {
    if i + 1 < c {
        f(i as u32)
    } else {
        Formula::disj((i..n).map(|j| f(j as u32)))
    }
}

fn button_pattern(subset: u32, m: usize) -> Vec<Formula> {
    (0..m as u32)
        .map(|b| {
            let a = atom(Obs::Button(b));
            if subset >> b & 1 == 1 {
                a
            } else {
                Formula::not(a)
            }
        })
        .collect()
}

fn check_arity(pba: &PbaStructure, fam: &ControlFamily) -> Result<usize, LabelingError> {
    let n = pba.cluster_sizes().into_iter().max().unwrap_or(1);
    if fam.buttons as usize != pba.base_size {
        return Err(LabelingError::FamilyMismatch(format!(
            "{} buttons for base size {}",
            fam.buttons, pba.base_size
        )));
    }
    if fam.nswitch_values() as usize != n {
        return Err(LabelingError::FamilyMismatch(format!(
            "n-switch has {} values for clusters of size at most {n}",
            fam.nswitch_values()
        )));
    }
    Ok(n)
}

/// `Φ(w_i^A) = ⋀_{j∈A} b:j ∧ ⋀_{j∉A} ¬b:j ∧ sw:i`, with the switch arity the
/// largest cluster size; in smaller clusters the last member takes the
/// remaining switch values.
pub fn product_labeling(pba: &PbaStructure, fam: &ControlFamily) -> Result<Labeling, LabelingError> {
    if fam.regime != Regime::Independent {
        return Err(LabelingError::FamilyMismatch("product labeling needs the independent regime".into()));
    }
    let n = check_arity(pba, fam)?;
    let sizes = pba.cluster_sizes();
    let statements = (0..pba.worlds.len())
        .map(|w| {
            let c = sizes[pba.cluster_of[w] as usize];
            let mut parts = button_pattern(pba.cluster_of[w], pba.base_size);
            parts.push(slot(pba.index_in_cluster(w), c, n, |j| atom(Obs::Sw(j))));
            Formula::conj(parts)
        })
        .collect();
    Labeling::new(pba.to_frame(), statements, pba.initial_world())
}

/// `Θ_j`: the T-button supremum is finite and `≡ j (mod n)`.
pub fn theta(j: u32, n: u32, t_count: u32) -> Formula {
    Formula::disj((0..=t_count).filter(|k| k % n == j).map(|k| atom(Obs::Rk(k))))
}

/// Below the top cluster `Φ(w_j^C) = Ψ_C ∧ Θ_j`; in the top cluster
/// `Φ(w_j^B) = (Ψ_B ∧ Θ_j) ∨ (supinf ∧ sw:j)`, where `Ψ_C` fixes the pushed
/// buttons to exactly `C`.
pub fn hybrid_labeling(pba: &PbaStructure, fam: &ControlFamily) -> Result<Labeling, LabelingError> {
    if !matches!(fam.regime, Regime::HybridAdversarial { .. }) {
        return Err(LabelingError::FamilyMismatch("hybrid labeling needs the hybrid regime".into()));
    }
    let n = check_arity(pba, fam)?;
    let sizes = pba.cluster_sizes();
    let t = fam
        .t_buttons
        .filter(|t| t.unbounded)
        .ok_or_else(|| LabelingError::FamilyMismatch("hybrid labeling needs unbounded T-buttons".into()))?;
    let top = (1u32 << pba.base_size) - 1;
    let statements = (0..pba.worlds.len())
        .map(|w| {
            let c = pba.cluster_of[w];
            let j = pba.index_in_cluster(w);
            let size = sizes[c as usize];
            let psi = Formula::conj(button_pattern(c, pba.base_size));
            let main = Formula::and(psi, slot(j, size, n, |j| theta(j, n as u32, t.count)));
            if c == top {
                let sw = slot(j, size, n, |j| atom(Obs::Sw(j)));
                Formula::or(main, Formula::and(atom(Obs::SupInf), sw))
            } else {
                main
            }
        })
        .collect();
    Labeling::new(pba.to_frame(), statements, pba.initial_world())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub clause: u8,
    pub state: String,
    pub worlds: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub partition_ok: bool,
    pub correspondence_ok: bool,
    pub initial_ok: bool,
    pub states: usize,
    /// States without headroom, where the "reachable if related" direction
    /// is not asserted.
    pub boundary_states: usize,
    /// Related pairs not realized at boundary states (informational).
    pub boundary_gaps: usize,
    pub failure_count: usize,
    /// First failures (at most [`MAX_WITNESSES`]).
    pub witnesses: Vec<Witness>,
}

pub const MAX_WITNESSES: usize = 64;

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.partition_ok && self.correspondence_ok && self.initial_ok
    }
}

/// Checks the three labeling clauses over the reachable multiverse.
pub fn verify_labeling(lab: &Labeling, fam: &ControlFamily, initial: MState) -> Result<VerificationReport, LabelingError> {
    let mv = Multiverse::build(fam, initial)?;
    verify_on(lab, &mv)
}

pub fn verify_on(lab: &Labeling, mv: &Multiverse) -> Result<VerificationReport, LabelingError> {
    let fam = &mv.family;
    let worlds = lab.frame.worlds();
    let mut truth = Vec::with_capacity(lab.statements.len());
    let mut reach = Vec::with_capacity(lab.statements.len());
    for f in &lab.statements {
        truth.push(mv.truth_set(f)?);
        reach.push(mv.truth_set(&Formula::poss(f.clone()))?);
    }

    let mut failures: Vec<Witness> = Vec::new();
    let (mut clause1, mut clause2) = (0usize, 0usize);
    let mut boundary_states = 0;
    let mut boundary_gaps = 0;
    for s in 0..mv.len() {
        let holding: Vec<usize> = (0..truth.len()).filter(|&w| truth[w].contains(s)).collect();
        if holding.len() != 1 {
            clause1 += 1;
            failures.push(Witness {
                clause: 1,
                state: mv.state_id(s),
                worlds: holding.iter().map(|&w| worlds[w].clone()).collect(),
                detail: format!("{} labels hold", holding.len()),
            });
        }
        let interior = fam.is_interior(&mv.states[s]);
        if !interior {
            boundary_states += 1;
        }
        for &w in &holding {
            for u in 0..truth.len() {
                let possible = reach[u].contains(s);
                let related = lab.frame.related(w, u);
                if possible && !related {
                    clause2 += 1;
                    failures.push(Witness {
                        clause: 2,
                        state: mv.state_id(s),
                        worlds: vec![worlds[w].clone(), worlds[u].clone()],
                        detail: "label reachable but worlds unrelated".into(),
                    });
                } else if related && !possible {
                    if interior {
                        clause2 += 1;
                        failures.push(Witness {
                            clause: 2,
                            state: mv.state_id(s),
                            worlds: vec![worlds[w].clone(), worlds[u].clone()],
                            detail: "worlds related but label unreachable".into(),
                        });
                    } else {
                        boundary_gaps += 1;
                    }
                }
            }
        }
    }
    let initial_ok = truth[lab.initial_world].contains(mv.initial);
    if !initial_ok {
        failures.push(Witness {
            clause: 3,
            state: mv.state_id(mv.initial),
            worlds: vec![worlds[lab.initial_world].clone()],
            detail: "initial state does not satisfy the initial world's label".into(),
        });
    }
    Ok(VerificationReport {
        partition_ok: clause1 == 0,
        correspondence_ok: clause2 == 0,
        initial_ok,
        states: mv.len(),
        boundary_states,
        boundary_gaps,
        failure_count: failures.len(),
        witnesses: failures.into_iter().take(MAX_WITNESSES).collect(),
    })
}

/// `ψ_p = ⋁_{w ∈ v(p)} Φ_w` (the empty disjunction is `⊥`).
pub fn translate_valuation(lab: &Labeling, valuation: &BTreeMap<String, FixedBitSet>) -> Substitution {
    valuation
        .iter()
        .map(|(p, set)| (p.clone(), Formula::disj(set.ones().map(|w| lab.statements[w].clone()))))
        .collect()
}

/// Compares a pBA model at the initial world with the multiverse at the
/// initial state under the translated substitution. The two sides are
/// computed by different engines (local recursion vs. global truth sets).
pub fn check_translation(
    lab: &Labeling,
    fam: &ControlFamily,
    initial: MState,
    model: &Model,
    f: &Formula,
) -> Result<bool, LabelingError> {
    Ok(TranslationChecker::new(lab.clone(), fam, initial)?.check(model, f))
}

/// Reusable translation checker for one labeling and multiverse.
#[derive(Debug, Clone)]
pub struct TranslationChecker {
    pub labeling: Labeling,
    pub multiverse: Multiverse,
    state_label: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClosureReport {
    /// Distinct (pBA, multiverse) truth-set pairs examined, over all levels.
    pub classes: usize,
    /// Classes whose truth differs between the initial world and state.
    pub initial_failures: usize,
    /// Labeled states whose truth differs from their world's somewhere.
    pub state_failures: usize,
    /// Stopped early because the classes failed to collapse.
    pub truncated: bool,
}

impl ClosureReport {
    pub fn ok(&self) -> bool {
        self.initial_failures == 0 && !self.truncated
    }
}

impl TranslationChecker {
    pub fn new(labeling: Labeling, fam: &ControlFamily, initial: MState) -> Result<Self, LabelingError> {
        let multiverse = Multiverse::build(fam, initial)?;
        Self::on(labeling, multiverse)
    }

    pub fn on(labeling: Labeling, multiverse: Multiverse) -> Result<Self, LabelingError> {
        let mut state_label = vec![None; multiverse.len()];
        for (w, f) in labeling.statements.iter().enumerate() {
            for s in multiverse.truth_set(f)?.ones() {
                state_label[s] = Some(w);
            }
        }
        Ok(Self {
            labeling,
            multiverse,
            state_label,
        })
    }

    pub fn substitution_for(&self, model: &Model, f: &Formula) -> Substitution {
        let mut sigma = translate_valuation(&self.labeling, model.valuation());
        for a in f.atoms() {
            sigma.bindings.entry(a).or_insert(Formula::Bot);
        }
        sigma
    }

    /// `model` must live on the labeling's frame.
    pub fn check(&self, model: &Model, f: &Formula) -> bool {
        let left = model
            .satisfies(self.labeling.initial_world, f)
            .expect("initial world in range");
        let translated = f.substitute(&self.substitution_for(model, f));
        let right = self.multiverse.model.truth_set(&translated).contains(self.multiverse.initial);
        left == right
    }

    /// Checks the translation for every formula of modal depth `≤ depth`
    /// over the model's atoms at once, by closing the pairs of truth sets
    /// (pBA side, multiverse side) under the Boolean and modal operations.
    pub fn check_all_formulas(&self, model: &Model, depth: usize) -> ClosureReport {
        const MAX_CLASSES: usize = 16;
        let pba = &self.labeling.frame;
        let mv = &self.multiverse.model;
        let nw = pba.len();
        let ns = mv.frame.len();
        let sigma = translate_valuation(&self.labeling, model.valuation());
        let atoms: Vec<(FixedBitSet, FixedBitSet)> = model
            .valuation()
            .iter()
            .map(|(p, set)| (set.clone(), mv.truth_set(&sigma.bindings[p])))
            .collect();

        let mut report = ClosureReport::default();
        let mut generators = atoms.clone();
        for level in 0..=depth {
            // Points are pBA worlds followed by multiverse states; each gets
            // its signature over the generators.
            let points = nw + ns;
            let mut sig_class: HashMap<Vec<bool>, usize> = HashMap::new();
            let mut class_of = Vec::with_capacity(points);
            for x in 0..points {
                let sig: Vec<bool> = generators
                    .iter()
                    .map(|(a, m)| if x < nw { a.contains(x) } else { m.contains(x - nw) })
                    .collect();
                let next = sig_class.len();
                class_of.push(*sig_class.entry(sig).or_insert(next));
            }
            let classes = sig_class.len();
            let w0 = self.labeling.initial_world;
            let s0 = nw + self.multiverse.initial;
            if class_of[w0] != class_of[s0] {
                report.initial_failures += 1;
            }
            report.state_failures += (0..ns)
                .filter(|&s| self.state_label[s].is_some_and(|w| class_of[w] != class_of[nw + s]))
                .count();
            if classes > MAX_CLASSES {
                report.truncated = true;
                return report;
            }
            let elements: Vec<(FixedBitSet, FixedBitSet)> = (0u32..1 << classes)
                .map(|pick| {
                    let mut a = FixedBitSet::with_capacity(nw);
                    let mut m = FixedBitSet::with_capacity(ns);
                    for x in 0..points {
                        if pick >> class_of[x] & 1 == 1 {
                            if x < nw {
                                a.insert(x);
                            } else {
                                m.insert(x - nw);
                            }
                        }
                    }
                    (a, m)
                })
                .collect();
            report.classes += elements.len();
            if level == depth {
                break;
            }
            generators = atoms.clone();
            for (a, m) in &elements {
                generators.push((boxed(pba, a), boxed(&mv.frame, m)));
                generators.push((diamond(pba, a), diamond(&mv.frame, m)));
            }
        }
        report
    }
}

fn boxed(fr: &Frame, set: &FixedBitSet) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(fr.len());
    for w in 0..fr.len() {
        out.set(w, fr.successors(w).is_subset(set));
    }
    out
}

fn diamond(fr: &Frame, set: &FixedBitSet) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(fr.len());
    for w in 0..fr.len() {
        out.set(w, !fr.successors(w).is_disjoint(set));
    }
    out
}
