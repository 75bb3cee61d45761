//! Finite Kripke frames and models, satisfaction, frame-class predicates and
//! recognition/enumeration of pre-Boolean-algebras (preorders whose quotient
//! by mutual accessibility is a finite Boolean algebra).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KripkeError {
    #[error("unknown world {0:?}")]
    UnknownWorld(String),
    #[error("world index {index} out of range (frame has {len} worlds)")]
    WorldOutOfRange { index: usize, len: usize },
    #[error("duplicate world id {0:?}")]
    DuplicateWorld(String),
    #[error("frame is not a preorder (reflexive: {reflexive}, transitive: {transitive})")]
    NotPreorder { reflexive: bool, transitive: bool },
}

/// A finite frame. Worlds are addressed by position; ids are kept for I/O.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    worlds: Vec<String>,
    succ: Vec<FixedBitSet>,
}

impl Frame {
    pub fn new<I>(worlds: Vec<String>, relation: I) -> Result<Self, KripkeError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut seen = HashMap::new();
        for (i, w) in worlds.iter().enumerate() {
            if seen.insert(w.as_str(), i).is_some() {
                return Err(KripkeError::DuplicateWorld(w.clone()));
            }
        }
        let n = worlds.len();
        let mut succ = vec![FixedBitSet::with_capacity(n); n];
        for (a, b) in relation {
            for idx in [a, b] {
                if idx >= n {
                    return Err(KripkeError::WorldOutOfRange { index: idx, len: n });
                }
            }
            succ[a].insert(b);
        }
        Ok(Self { worlds, succ })
    }

    /// Frame on worlds `0..n` named by their index.
    pub fn indexed<I>(n: usize, relation: I) -> Result<Self, KripkeError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::new((0..n).map(|i| i.to_string()).collect(), relation)
    }

    pub fn from_named<S: AsRef<str>>(worlds: &[S], relation: &[(S, S)]) -> Result<Self, KripkeError> {
        let names: Vec<String> = worlds.iter().map(|w| w.as_ref().to_string()).collect();
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let lookup = |w: &S| {
            index
                .get(w.as_ref())
                .copied()
                .ok_or_else(|| KripkeError::UnknownWorld(w.as_ref().to_string()))
        };
        let pairs = relation
            .iter()
            .map(|(a, b)| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>, KripkeError>>()?;
        Self::new(names, pairs)
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn world_index(&self, id: &str) -> Result<usize, KripkeError> {
        self.worlds
            .iter()
            .position(|w| w == id)
            .ok_or_else(|| KripkeError::UnknownWorld(id.to_string()))
    }

    pub fn related(&self, w: usize, u: usize) -> bool {
        self.succ[w].contains(u)
    }

    pub fn successors(&self, w: usize) -> &FixedBitSet {
        &self.succ[w]
    }

    pub fn relation(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(w, row)| row.ones().map(move |u| (w, u)))
    }

    fn check_world(&self, w: usize) -> Result<(), KripkeError> {
        if w < self.len() {
            Ok(())
        } else {
            Err(KripkeError::WorldOutOfRange {
                index: w,
                len: self.len(),
            })
        }
    }

    /// Successor rows as `u64` masks, for frames of at most 64 worlds.
    pub fn masks(&self) -> Option<Vec<u64>> {
        if self.len() > 64 {
            return None;
        }
        Some(
            self.succ
                .iter()
                .map(|row| row.ones().fold(0u64, |m, u| m | (1 << u)))
                .collect(),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    worlds: Vec<String>,
    relation: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valuation: Option<BTreeMap<String, Vec<String>>>,
}

impl Serialize for Frame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FrameJson {
            worlds: self.worlds.clone(),
            relation: self
                .relation()
                .map(|(a, b)| (self.worlds[a].clone(), self.worlds[b].clone()))
                .collect(),
            valuation: None,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Frame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = FrameJson::deserialize(d)?;
        Frame::from_named(&raw.worlds, &raw.relation).map_err(serde::de::Error::custom)
    }
}

/// A frame plus a valuation. Atoms absent from the valuation are false
/// everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub frame: Frame,
    valuation: BTreeMap<String, FixedBitSet>,
}

impl Model {
    pub fn new(frame: Frame) -> Self {
        Self {
            frame,
            valuation: BTreeMap::new(),
        }
    }

    pub fn with_valuation<I, W>(frame: Frame, valuation: I) -> Result<Self, KripkeError>
    where
        I: IntoIterator<Item = (String, W)>,
        W: IntoIterator<Item = usize>,
    {
        let mut model = Self::new(frame);
        for (atom, worlds) in valuation {
            model.set(&atom, worlds)?;
        }
        Ok(model)
    }

    pub fn set<W: IntoIterator<Item = usize>>(&mut self, atom: &str, worlds: W) -> Result<(), KripkeError> {
        let mut set = FixedBitSet::with_capacity(self.frame.len());
        for w in worlds {
            self.frame.check_world(w)?;
            set.insert(w);
        }
        self.valuation.insert(atom.to_string(), set);
        Ok(())
    }

    pub fn set_bits(&mut self, atom: &str, set: FixedBitSet) {
        assert_eq!(set.len(), self.frame.len(), "valuation set has wrong width");
        self.valuation.insert(atom.to_string(), set);
    }

    pub fn holds_atom(&self, atom: &str, w: usize) -> bool {
        self.valuation.get(atom).is_some_and(|s| s.contains(w))
    }

    pub fn valuation(&self) -> &BTreeMap<String, FixedBitSet> {
        &self.valuation
    }

    /// World-local satisfaction, evaluated by direct recursion on the
    /// semantic clauses.
    pub fn satisfies(&self, w: usize, f: &Formula) -> Result<bool, KripkeError> {
        self.frame.check_world(w)?;
        Ok(self.sat(w, f))
    }

    fn sat(&self, w: usize, f: &Formula) -> bool {
        match f {
            Formula::Atom(a) => self.holds_atom(a, w),
            Formula::Top => true,
            Formula::Bot => false,
            Formula::Not(g) => !self.sat(w, g),
            Formula::And(a, b) => self.sat(w, a) && self.sat(w, b),
            Formula::Or(a, b) => self.sat(w, a) || self.sat(w, b),
            Formula::Implies(a, b) => !self.sat(w, a) || self.sat(w, b),
            Formula::Iff(a, b) => self.sat(w, a) == self.sat(w, b),
            Formula::Box(g) => self.frame.succ[w].ones().all(|u| self.sat(u, g)),
            Formula::Diamond(g) => self.frame.succ[w].ones().any(|u| self.sat(u, g)),
        }
    }

    /// Set of worlds satisfying `f`, computed bottom-up over the whole model.
    pub fn truth_set(&self, f: &Formula) -> FixedBitSet {
        let n = self.frame.len();
        let full = || {
            let mut s = FixedBitSet::with_capacity(n);
            s.insert_range(..);
            s
        };
        match f {
            Formula::Atom(a) => self
                .valuation
                .get(a)
                .cloned()
                .unwrap_or_else(|| FixedBitSet::with_capacity(n)),
            Formula::Top => full(),
            Formula::Bot => FixedBitSet::with_capacity(n),
            Formula::Not(g) => {
                let mut s = self.truth_set(g);
                s.toggle_range(..);
                s
            }
            Formula::And(a, b) => {
                let mut s = self.truth_set(a);
                s.intersect_with(&self.truth_set(b));
                s
            }
            Formula::Or(a, b) => {
                let mut s = self.truth_set(a);
                s.union_with(&self.truth_set(b));
                s
            }
            Formula::Implies(a, b) => {
                let mut s = self.truth_set(a);
                s.toggle_range(..);
                s.union_with(&self.truth_set(b));
                s
            }
            Formula::Iff(a, b) => {
                let mut s = self.truth_set(a);
                s.symmetric_difference_with(&self.truth_set(b));
                s.toggle_range(..);
                s
            }
            Formula::Box(g) => {
                let inner = self.truth_set(g);
                let mut s = FixedBitSet::with_capacity(n);
                for w in 0..n {
                    if self.frame.succ[w].is_subset(&inner) {
                        s.insert(w);
                    }
                }
                s
            }
            Formula::Diamond(g) => {
                let inner = self.truth_set(g);
                let mut s = FixedBitSet::with_capacity(n);
                for w in 0..n {
                    if !self.frame.succ[w].is_disjoint(&inner) {
                        s.insert(w);
                    }
                }
                s
            }
        }
    }
}

impl Serialize for Model {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let names = &self.frame.worlds;
        FrameJson {
            worlds: names.clone(),
            relation: self
                .frame
                .relation()
                .map(|(a, b)| (names[a].clone(), names[b].clone()))
                .collect(),
            valuation: Some(
                self.valuation
                    .iter()
                    .map(|(k, v)| (k.clone(), v.ones().map(|w| names[w].clone()).collect()))
                    .collect(),
            ),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = FrameJson::deserialize(d)?;
        let frame = Frame::from_named(&raw.worlds, &raw.relation).map_err(serde::de::Error::custom)?;
        let mut model = Model::new(frame);
        for (atom, worlds) in raw.valuation.unwrap_or_default() {
            let idx = worlds
                .iter()
                .map(|w| model.frame.world_index(w))
                .collect::<Result<Vec<_>, _>>()
                .map_err(serde::de::Error::custom)?;
            model.set(&atom, idx).map_err(serde::de::Error::custom)?;
        }
        Ok(model)
    }
}

pub fn satisfies(m: &Model, w: usize, f: &Formula) -> Result<bool, KripkeError> {
    m.satisfies(w, f)
}

/// Formula compiled to a post-order node list, evaluated over `u64` world
/// masks. Used for the valuation sweeps on small frames.
#[derive(Debug, Clone)]
pub struct MaskFormula {
    nodes: Vec<MaskNode>,
    atoms: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
enum MaskNode {
    Atom(usize),
    Top,
    Bot,
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Implies(usize, usize),
    Iff(usize, usize),
    Box(usize),
    Diamond(usize),
}

impl MaskFormula {
    /// Atoms are numbered in sorted order.
    pub fn compile(f: &Formula) -> Self {
        let atoms: Vec<String> = f.atoms().into_iter().collect();
        let mut out = Self { nodes: Vec::new(), atoms };
        out.push(f);
        out
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    fn push(&mut self, f: &Formula) -> usize {
        let node = match f {
            Formula::Atom(a) => MaskNode::Atom(self.atoms.binary_search(a).expect("atom collected")),
            Formula::Top => MaskNode::Top,
            Formula::Bot => MaskNode::Bot,
            Formula::Not(g) => MaskNode::Not(self.push(g)),
            Formula::And(a, b) => {
                let (a, b) = (self.push(a), self.push(b));
                MaskNode::And(a, b)
            }
            Formula::Or(a, b) => {
                let (a, b) = (self.push(a), self.push(b));
                MaskNode::Or(a, b)
            }
            Formula::Implies(a, b) => {
                let (a, b) = (self.push(a), self.push(b));
                MaskNode::Implies(a, b)
            }
            Formula::Iff(a, b) => {
                let (a, b) = (self.push(a), self.push(b));
                MaskNode::Iff(a, b)
            }
            Formula::Box(g) => MaskNode::Box(self.push(g)),
            Formula::Diamond(g) => MaskNode::Diamond(self.push(g)),
        };
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Truth mask over worlds `0..succ.len()`; `atom_masks[i]` is the
    /// extension of `atoms()[i]`. `buf` is scratch space.
    pub fn eval(&self, succ: &[u64], atom_masks: &[u64], buf: &mut Vec<u64>) -> u64 {
        let n = succ.len();
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        buf.clear();
        for node in &self.nodes {
            let v = match *node {
                MaskNode::Atom(i) => atom_masks[i],
                MaskNode::Top => full,
                MaskNode::Bot => 0,
                MaskNode::Not(a) => !buf[a] & full,
                MaskNode::And(a, b) => buf[a] & buf[b],
                MaskNode::Or(a, b) => buf[a] | buf[b],
                MaskNode::Implies(a, b) => (!buf[a] | buf[b]) & full,
                MaskNode::Iff(a, b) => !(buf[a] ^ buf[b]) & full,
                MaskNode::Box(a) => {
                    let inner = buf[a];
                    let mut m = 0;
                    for (w, &row) in succ.iter().enumerate() {
                        if row & !inner == 0 {
                            m |= 1 << w;
                        }
                    }
                    m
                }
                MaskNode::Diamond(a) => {
                    let inner = buf[a];
                    let mut m = 0;
                    for (w, &row) in succ.iter().enumerate() {
                        if row & inner != 0 {
                            m |= 1 << w;
                        }
                    }
                    m
                }
            };
            buf.push(v);
        }
        *buf.last().expect("non-empty formula")
    }
}

/// A valuation refuting a formula somewhere on a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refutation {
    /// `(atom, worlds)` in sorted atom order.
    pub valuation: Vec<(String, Vec<usize>)>,
    pub world: usize,
}

impl Refutation {
    pub fn into_model(self, frame: Frame) -> (Model, usize) {
        let world = self.world;
        let model = Model::with_valuation(frame, self.valuation).expect("refutation worlds in range");
        (model, world)
    }
}

/// First refuting valuation in lexicographic order, together with the least
/// refuting world. Valuations are enumerated as a counter whose bit
/// `a * |W| + w` says whether atom `a` (sorted) holds at world `w`.
pub fn find_refutation(fr: &Frame, f: &Formula) -> Option<Refutation> {
    let compiled = MaskFormula::compile(f);
    let k = compiled.atoms().len();
    let n = fr.len();
    if n == 0 {
        return None;
    }
    let succ = fr
        .masks()
        .unwrap_or_else(|| panic!("valuation sweep needs at most 64 worlds, frame has {n}"));
    let bits = k * n;
    assert!(bits < 64, "valuation sweep over 2^{bits} valuations is not supported");
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut buf = Vec::new();
    let mut atom_masks = vec![0u64; k];
    for counter in 0u64..(1u64 << bits) {
        for (a, mask) in atom_masks.iter_mut().enumerate() {
            *mask = (counter >> (a * n)) & full;
        }
        let truth = compiled.eval(&succ, &atom_masks, &mut buf);
        if truth != full {
            let world = (!truth & full).trailing_zeros() as usize;
            let valuation = compiled
                .atoms()
                .iter()
                .zip(&atom_masks)
                .map(|(a, &m)| (a.clone(), (0..n).filter(|w| m >> w & 1 == 1).collect()))
                .collect();
            return Some(Refutation { valuation, world });
        }
    }
    None
}

/// `f` holds at every world under every valuation of its atoms.
pub fn valid_on_frame(fr: &Frame, f: &Formula) -> bool {
    find_refutation(fr, f).is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameProperties {
    pub reflexive: bool,
    pub transitive: bool,
    /// `wRv ∧ wRu → ∃z (vRz ∧ uRz)`.
    pub directed: bool,
}

pub fn frame_properties(fr: &Frame) -> FrameProperties {
    let n = fr.len();
    let reflexive = (0..n).all(|w| fr.related(w, w));
    let transitive = (0..n).all(|w| fr.succ[w].ones().all(|v| fr.succ[v].is_subset(&fr.succ[w])));
    let directed = (0..n).all(|w| {
        fr.succ[w]
            .ones()
            .all(|v| fr.succ[w].ones().all(|u| !fr.succ[v].is_disjoint(&fr.succ[u])))
    });
    FrameProperties {
        reflexive,
        transitive,
        directed,
    }
}

/// Clusters of mutually accessible worlds with the induced partial order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quotient {
    /// Classes ordered by their least member; members ascending.
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
    /// `le[i][j]` iff class `i` sees class `j`.
    pub le: Vec<Vec<bool>>,
}

pub fn quotient_clusters(fr: &Frame) -> Result<Quotient, KripkeError> {
    let props = frame_properties(fr);
    if !(props.reflexive && props.transitive) {
        return Err(KripkeError::NotPreorder {
            reflexive: props.reflexive,
            transitive: props.transitive,
        });
    }
    let n = fr.len();
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for w in 0..n {
        if class_of[w] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let members: Vec<usize> = (w..n).filter(|&u| fr.related(w, u) && fr.related(u, w)).collect();
        for &u in &members {
            class_of[u] = id;
        }
        classes.push(members);
    }
    let le = classes
        .iter()
        .map(|a| classes.iter().map(|b| fr.related(a[0], b[0])).collect())
        .collect();
    Ok(Quotient { classes, class_of, le })
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum PbaRejection {
    #[error(transparent)]
    Frame(#[from] KripkeError),
    #[error("empty frame")]
    Empty,
    #[error("quotient has {0} clusters, not a power of two")]
    NotPowerOfTwo(usize),
    #[error("quotient has no least cluster")]
    NoBottom,
    #[error("expected {expected} atoms above the bottom cluster, found {found}")]
    AtomCount { expected: usize, found: usize },
    #[error("quotient is not isomorphic to a powerset: {0}")]
    NotIsomorphic(String),
}

impl Serialize for KripkeError {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// A frame certified to be a pre-Boolean-algebra: clusters indexed by
/// subsets of `{0..base_size-1}` (as bitmasks).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PbaStructure {
    pub base_size: usize,
    pub worlds: Vec<String>,
    /// Subset mask of each world's cluster.
    pub cluster_of: Vec<u32>,
    /// Members of the cluster for each subset mask `0..2^base_size`.
    pub cluster_members: Vec<Vec<usize>>,
}

impl PbaStructure {
    /// The frame `w R u iff cluster_of(w) ⊆ cluster_of(u)`.
    pub fn to_frame(&self) -> Frame {
        let n = self.worlds.len();
        let pairs = (0..n).flat_map(|w| {
            (0..n)
                .filter(move |&u| self.cluster_of[w] & !self.cluster_of[u] == 0)
                .map(move |u| (w, u))
        });
        Frame::new(self.worlds.clone(), pairs).expect("structure worlds are distinct")
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.cluster_members.iter().map(Vec::len).collect()
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster_members.len()
    }

    /// World `w_i^A`.
    pub fn world(&self, subset: u32, i: usize) -> usize {
        self.cluster_members[subset as usize][i]
    }

    /// Any world of the bottom cluster.
    pub fn initial_world(&self) -> usize {
        self.cluster_members[0][0]
    }

    /// Position of `w` inside its cluster.
    pub fn index_in_cluster(&self, w: usize) -> usize {
        let members = &self.cluster_members[self.cluster_of[w] as usize];
        members.iter().position(|&u| u == w).expect("world in its cluster")
    }
}

/// Recognizes a pre-Boolean-algebra and returns its certified structure.
pub fn as_pba(fr: &Frame) -> Result<PbaStructure, PbaRejection> {
    if fr.is_empty() {
        return Err(PbaRejection::Empty);
    }
    let q = quotient_clusters(fr)?;
    let k = q.classes.len();
    if !k.is_power_of_two() {
        return Err(PbaRejection::NotPowerOfTwo(k));
    }
    let m = k.trailing_zeros() as usize;
    let preds: Vec<usize> = (0..k).map(|j| (0..k).filter(|&i| q.le[i][j]).count()).collect();

    let bottoms: Vec<usize> = (0..k).filter(|&j| preds[j] == 1).collect();
    let [bottom] = bottoms[..] else {
        return Err(PbaRejection::NoBottom);
    };
    if !(0..k).all(|j| q.le[bottom][j]) {
        return Err(PbaRejection::NoBottom);
    }
    let atoms: Vec<usize> = (0..k).filter(|&j| preds[j] == 2).collect();
    if atoms.len() != m {
        return Err(PbaRejection::AtomCount {
            expected: m,
            found: atoms.len(),
        });
    }
    let image: Vec<u32> = (0..k)
        .map(|c| {
            atoms
                .iter()
                .enumerate()
                .filter(|&(_, &a)| q.le[a][c])
                .fold(0u32, |acc, (bit, _)| acc | (1 << bit))
        })
        .collect();
    let mut class_for_subset = vec![usize::MAX; k];
    for (c, &img) in image.iter().enumerate() {
        if class_for_subset[img as usize] != usize::MAX {
            return Err(PbaRejection::NotIsomorphic(format!(
                "two clusters share the atom set {img:#b}"
            )));
        }
        class_for_subset[img as usize] = c;
    }
    for a in 0..k {
        for b in 0..k {
            let subset = image[a] & !image[b] == 0;
            if q.le[a][b] != subset {
                return Err(PbaRejection::NotIsomorphic(format!(
                    "order between clusters {a} and {b} disagrees with inclusion of their atom sets"
                )));
            }
        }
    }
    Ok(PbaStructure {
        base_size: m,
        worlds: fr.worlds.clone(),
        cluster_of: q.class_of.iter().map(|&c| image[c]).collect(),
        cluster_members: class_for_subset.iter().map(|&c| q.classes[c].clone()).collect(),
    })
}

fn subset_label(mask: u32, m: usize) -> String {
    let items: Vec<String> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| b.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

/// Canonical pBA with base size `m` and `sizes[A]` worlds in cluster `A`
/// (subsets as bitmasks). Worlds are ordered by subset mask, then index, and
/// named `w<i>^{<A>}`.
pub fn pba_frame(m: usize, sizes: &[usize]) -> PbaStructure {
    assert_eq!(sizes.len(), 1 << m, "one size per subset");
    assert!(sizes.iter().all(|&c| c >= 1), "clusters are non-empty");
    let mut worlds = Vec::new();
    let mut cluster_of = Vec::new();
    let mut cluster_members = Vec::new();
    for (mask, &c) in sizes.iter().enumerate() {
        let mut members = Vec::new();
        for i in 0..c {
            members.push(worlds.len());
            worlds.push(format!("w{i}^{}", subset_label(mask as u32, m)));
            cluster_of.push(mask as u32);
        }
        cluster_members.push(members);
    }
    PbaStructure {
        base_size: m,
        worlds,
        cluster_of,
        cluster_members,
    }
}

/// Iterator over cluster-size functions `c: P({0..m-1}) → {1..cluster_max}`
/// in lexicographic order (`c(∅)` most significant).
#[derive(Debug, Clone)]
pub struct PbaEnumeration {
    m: usize,
    cluster_max: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for PbaEnumeration {
    type Item = PbaStructure;

    fn next(&mut self) -> Option<PbaStructure> {
        let sizes = self.next.take()?;
        let out = pba_frame(self.m, &sizes);
        let mut succ = sizes;
        let mut pos = succ.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if succ[pos] < self.cluster_max {
                succ[pos] += 1;
                self.next = Some(succ);
                break;
            }
            succ[pos] = 1;
        }
        Some(out)
    }
}

/// One representative per cluster-size function over a base set of exactly
/// `m` elements.
pub fn enumerate_pba_structures(m: usize, cluster_max: usize) -> PbaEnumeration {
    PbaEnumeration {
        m,
        cluster_max,
        next: (cluster_max >= 1).then(|| vec![1; 1 << m]),
    }
}

/// Frames of [`enumerate_pba_structures`].
pub fn enumerate_pbas(m: usize, cluster_max: usize) -> impl Iterator<Item = Frame> {
    enumerate_pba_structures(m, cluster_max).map(|s| s.to_frame())
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering. Preorders are drawn as cluster boxes joined by the
/// covering relation of the quotient; other frames edge by edge.
pub fn to_dot(fr: &Frame) -> String {
    let mut out = String::from("digraph frame {\n  compound=true;\n  node [shape=circle];\n");
    match quotient_clusters(fr) {
        Ok(q) => {
            for (c, members) in q.classes.iter().enumerate() {
                let _ = writeln!(out, "  subgraph cluster_{c} {{\n    style=rounded;");
                for &w in members {
                    let _ = writeln!(out, "    {};", dot_id(&fr.worlds[w]));
                }
                out.push_str("  }\n");
            }
            let k = q.classes.len();
            for a in 0..k {
                for b in 0..k {
                    if a == b || !q.le[a][b] {
                        continue;
                    }
                    let covered = (0..k).any(|c| c != a && c != b && q.le[a][c] && q.le[c][b]);
                    if !covered {
                        let _ = writeln!(
                            out,
                            "  {} -> {} [ltail=cluster_{a}, lhead=cluster_{b}];",
                            dot_id(&fr.worlds[q.classes[a][0]]),
                            dot_id(&fr.worlds[q.classes[b][0]])
                        );
                    }
                }
            }
        }
        Err(_) => {
            for w in &fr.worlds {
                let _ = writeln!(out, "  {};", dot_id(w));
            }
            for (a, b) in fr.relation() {
                let _ = writeln!(out, "  {} -> {};", dot_id(&fr.worlds[a]), dot_id(&fr.worlds[b]));
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    fn two_chain() -> Frame {
        Frame::indexed(2, [(0, 0), (0, 1), (1, 1)]).unwrap()
    }

    fn fork() -> Frame {
        // r=0, a=1, b=2
        Frame::indexed(3, [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2)]).unwrap()
    }

    #[test]
    fn satisfaction_on_two_chain() {
        let m = Model::with_valuation(two_chain(), [("p".to_string(), vec![1])]).unwrap();
        assert!(m.satisfies(0, &f("<>p")).unwrap());
        assert!(!m.satisfies(0, &f("[]p")).unwrap());
        assert!(m.satisfies(5, &f("p")).is_err());
    }

    #[test]
    fn t_axiom_on_reflexive_point() {
        let m = Model::new(Frame::indexed(1, [(0, 0)]).unwrap());
        assert!(m.satisfies(0, &f("[]p -> p")).unwrap());
    }

    #[test]
    fn frame_validity_examples() {
        let point = Frame::indexed(1, [(0, 0)]).unwrap();
        assert!(valid_on_frame(&point, &f("[]p -> p")));
        let antichain = Frame::indexed(2, [(0, 0), (1, 1)]).unwrap();
        assert!(valid_on_frame(&antichain, &f("[]p -> [][]p")));
        let refutation = find_refutation(&fork(), &f("<>[]p -> []<>p")).unwrap();
        // The refuting valuation must actually refute.
        let (model, w) = refutation.clone().into_model(fork());
        assert!(!model.satisfies(w, &f("<>[]p -> []<>p")).unwrap());
        // p = {a} refutes at r.
        let m = Model::with_valuation(fork(), [("p".to_string(), vec![1])]).unwrap();
        assert!(!m.satisfies(0, &f("<>[]p -> []<>p")).unwrap());
    }

    #[test]
    fn properties_examples() {
        let id = Frame::indexed(3, [(0, 0), (1, 1), (2, 2)]).unwrap();
        let p = frame_properties(&id);
        assert!(p.reflexive && p.transitive && p.directed);
        let empty = Frame::indexed(2, []).unwrap();
        assert_eq!(
            frame_properties(&empty),
            FrameProperties {
                reflexive: false,
                transitive: true,
                directed: true
            }
        );
        assert_eq!(
            frame_properties(&fork()),
            FrameProperties {
                reflexive: true,
                transitive: true,
                directed: false
            }
        );
    }

    #[test]
    fn quotient_examples() {
        let id = Frame::indexed(2, [(0, 0), (1, 1)]).unwrap();
        assert_eq!(quotient_clusters(&id).unwrap().classes, vec![vec![0], vec![1]]);
        let total = Frame::indexed(2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(quotient_clusters(&total).unwrap().classes, vec![vec![0, 1]]);

        // Two 2-clusters {0,1} below {2,3}.
        let mut rel = vec![];
        for a in 0..4 {
            for b in 0..4 {
                if a / 2 <= b / 2 {
                    rel.push((a, b));
                }
            }
        }
        let q = quotient_clusters(&Frame::indexed(4, rel).unwrap()).unwrap();
        assert_eq!(q.classes, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(q.le, vec![vec![true, true], vec![false, true]]);
        assert!(quotient_clusters(&Frame::indexed(2, [(0, 1)]).unwrap()).is_err());
    }

    #[test]
    fn pba_examples() {
        let point = Frame::indexed(1, [(0, 0)]).unwrap();
        assert_eq!(as_pba(&point).unwrap().base_size, 0);

        let chain3 = Frame::indexed(3, [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(as_pba(&chain3), Err(PbaRejection::NotPowerOfTwo(3)));

        // Diamond bottom=0, atoms 1 and 2, top=3.
        let diamond = Frame::indexed(
            4,
            [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (0, 2), (0, 3), (1, 3), (2, 3)],
        )
        .unwrap();
        let s = as_pba(&diamond).unwrap();
        assert_eq!(s.base_size, 2);
        assert_eq!(s.cluster_of, vec![0b00, 0b01, 0b10, 0b11]);

        // 4-chain has 4 clusters but only one atom.
        let chain4 = Frame::indexed(4, (0..4).flat_map(|a| (a..4).map(move |b| (a, b)))).unwrap();
        assert!(matches!(as_pba(&chain4), Err(PbaRejection::AtomCount { .. })));

        assert!(matches!(as_pba(&fork()), Err(PbaRejection::NotPowerOfTwo(3))));
        let two_points = Frame::indexed(2, [(0, 0), (1, 1)]).unwrap();
        assert_eq!(as_pba(&two_points), Err(PbaRejection::NoBottom));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_pbas(0, 1).count(), 1);
        assert_eq!(enumerate_pbas(1, 2).count(), 4);
        assert_eq!(enumerate_pbas(2, 2).count(), 16);
        assert_eq!(enumerate_pbas(2, 0).count(), 0);
        let sizes: Vec<Vec<usize>> = enumerate_pba_structures(1, 2).map(|s| s.cluster_sizes()).collect();
        assert_eq!(sizes, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn enumerated_frames_are_certified_pbas() {
        for m in 0..=2 {
            for fr in enumerate_pbas(m, 3) {
                let props = frame_properties(&fr);
                assert!(props.reflexive && props.transitive && props.directed);
                let s = as_pba(&fr).unwrap();
                assert_eq!(s.base_size, m);
                assert_eq!(s.to_frame(), fr);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let mut m = Model::new(two_chain());
        m.set("p", [1]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(
            json,
            r#"{"worlds":["0","1"],"relation":[["0","0"],["0","1"],["1","1"]],"valuation":{"p":["1"]}}"#
        );
        let back: Model = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Frame>(r#"{"worlds":["a"],"relation":[["a","b"]]}"#).is_err());
        assert!(serde_json::from_str::<Frame>(r#"{"worlds":["a","a"],"relation":[]}"#).is_err());
    }

    #[test]
    fn dot_has_cluster_boxes() {
        let s = pba_frame(1, &[2, 1]);
        let dot = to_dot(&s.to_frame());
        assert!(dot.contains("subgraph cluster_0"));
        assert!(dot.contains("subgraph cluster_1"));
        assert!(dot.contains("lhead=cluster_1"));
    }
}
