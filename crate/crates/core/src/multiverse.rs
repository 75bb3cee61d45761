//! A finite stand-in for the generic multiverse: states record the values of
//! a family of control statements, and accessibility is "is an extension of".
//! The state space exports itself as a Kripke model, so modal claims about
//! control statements are evaluated by the ordinary model checker.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;
use crate::kripke::{Frame, Model};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MultiverseError {
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("unknown control atom {0:?}")]
    UnknownAtom(String),
    #[error("control atom {0:?} is outside the family's declared controls")]
    AtomOutOfRange(String),
    #[error("state {0} is outside the family's bounds")]
    StateOutOfBounds(String),
    #[error("state space has {size} states, above the cap of {cap}")]
    StateSpaceTooLarge { size: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatchetBounds {
    pub alpha_max: u16,
    pub k_max: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TButtons {
    /// Finite values of the supremum run over `0..=count`.
    pub count: u32,
    /// Whether the "infinitely many pushed" sentinel is available.
    #[serde(default)]
    pub unbounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Independent,
    /// The n-switch is coupled to the T-buttons while their supremum is
    /// finite. With `sw_decoupled` the n-switch value is arbitrary whenever
    /// the supremum moves; otherwise it advances by exactly the same amount
    /// (mod n). Once the supremum is infinite the n-switch is free.
    HybridAdversarial {
        #[serde(default)]
        sw_decoupled: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlFamily {
    #[serde(default)]
    pub buttons: u32,
    #[serde(default)]
    pub switches: u32,
    /// Arity of the n-switch; 0 means absent (then `sw:0` always holds).
    #[serde(default)]
    pub nswitch: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratchet: Option<RatchetBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_buttons: Option<TButtons>,
    #[serde(default)]
    pub regime: Regime,
    /// Observation overrides: atom → atom whose value it reports instead.
    /// Used to build deliberately broken families.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rewire: BTreeMap<String, String>,
}

/// Supremum of the pushed T-buttons (0 when none is pushed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TSup {
    Finite(u32),
    Infinite,
}

impl Default for TSup {
    fn default() -> Self {
        TSup::Finite(0)
    }
}

impl TSup {
    pub fn finite(k: u32) -> Self {
        TSup::Finite(k)
    }

    pub fn value(self) -> Option<u32> {
        match self {
            TSup::Finite(k) => Some(k),
            TSup::Infinite => None,
        }
    }
}

impl fmt::Display for TSup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("inf"),
        }
    }
}

impl Serialize for TSup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.value() {
            Some(k) => s.serialize_u32(k),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for TSup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u32),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(k) => Ok(TSup::finite(k)),
            Repr::Str(s) if s == "inf" => Ok(TSup::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

mod mask_list {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(mask: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq((0..32).filter(|i| mask >> i & 1 == 1))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        let items = Vec::<u32>::deserialize(d)?;
        items.into_iter().try_fold(0u32, |m, i| {
            if i < 32 {
                Ok(m | 1 << i)
            } else {
                Err(serde::de::Error::custom(format!("index {i} too large")))
            }
        })
    }
}

/// One world of the finite multiverse. Field order gives the canonical
/// state order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct MState {
    #[serde(with = "mask_list", default)]
    pub pushed: u32,
    #[serde(with = "mask_list", default)]
    pub switches: u32,
    #[serde(default)]
    pub nswitch: u32,
    /// `(α, k)`, standing for the ordinal `ω·α + k`.
    #[serde(default)]
    pub ratchet: (u16, u16),
    #[serde(default)]
    pub t_sup: TSup,
}

/// A parsed control observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Obs {
    Button(u32),
    Switch(u32),
    Sw(u32),
    /// Ratchet value `≥ (α, k)`.
    RGeq(u16, u16),
    /// `T_i` still holds: `i > t_sup`.
    T(u32),
    /// `t_sup = k`.
    Rk(u32),
    SupInf,
}

impl Obs {
    pub fn parse(atom: &str) -> Result<Obs, MultiverseError> {
        let unknown = || MultiverseError::UnknownAtom(atom.to_string());
        if atom == "supinf" {
            return Ok(Obs::SupInf);
        }
        let (head, tail) = atom.split_once(':').ok_or_else(unknown)?;
        let num = |s: &str| s.parse::<u32>().map_err(|_| unknown());
        match head {
            "b" => Ok(Obs::Button(num(tail)?)),
            "s" => Ok(Obs::Switch(num(tail)?)),
            "sw" => Ok(Obs::Sw(num(tail)?)),
            "T" => Ok(Obs::T(num(tail)?)),
            "Rk" => Ok(Obs::Rk(num(tail)?)),
            "r" => {
                let (a, k) = tail.split_once('.').ok_or_else(unknown)?;
                let a = a.parse::<u16>().map_err(|_| unknown())?;
                let k = k.parse::<u16>().map_err(|_| unknown())?;
                Ok(Obs::RGeq(a, k))
            }
            _ => Err(unknown()),
        }
    }

    pub fn eval(self, s: &MState) -> bool {
        match self {
            Obs::Button(i) => s.pushed >> i & 1 == 1,
            Obs::Switch(i) => s.switches >> i & 1 == 1,
            Obs::Sw(j) => s.nswitch == j,
            Obs::RGeq(a, k) => s.ratchet >= (a, k),
            Obs::T(i) => s.t_sup.value().is_some_and(|t| i > t),
            Obs::Rk(k) => s.t_sup.value() == Some(k),
            Obs::SupInf => s.t_sup == TSup::Infinite,
        }
    }
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obs::Button(i) => write!(f, "b:{i}"),
            Obs::Switch(i) => write!(f, "s:{i}"),
            Obs::Sw(j) => write!(f, "sw:{j}"),
            Obs::RGeq(a, k) => write!(f, "r:{a}.{k}"),
            Obs::T(i) => write!(f, "T:{i}"),
            Obs::Rk(k) => write!(f, "Rk:{k}"),
            Obs::SupInf => f.write_str("supinf"),
        }
    }
}

/// A control of the family, as the unit of independent change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Control {
    Button(u32),
    Switch(u32),
    NSwitch,
    Ratchet,
    TButtons,
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Control::Button(i) => write!(f, "b:{i}"),
            Control::Switch(i) => write!(f, "s:{i}"),
            Control::NSwitch => f.write_str("sw"),
            Control::Ratchet => f.write_str("r"),
            Control::TButtons => f.write_str("T"),
        }
    }
}

impl ControlFamily {
    pub fn independent(buttons: u32, switches: u32, nswitch: u32) -> Self {
        Self {
            buttons,
            switches,
            nswitch,
            ..Self::default()
        }
    }

    pub fn with_ratchet(mut self, alpha_max: u16, k_max: u16) -> Self {
        self.ratchet = Some(RatchetBounds { alpha_max, k_max });
        self
    }

    pub fn with_t_buttons(mut self, count: u32, unbounded: bool) -> Self {
        self.t_buttons = Some(TButtons { count, unbounded });
        self
    }

    pub fn hybrid(buttons: u32, nswitch: u32, t_count: u32, sw_decoupled: bool) -> Self {
        Self {
            buttons,
            nswitch,
            t_buttons: Some(TButtons {
                count: t_count,
                unbounded: true,
            }),
            regime: Regime::HybridAdversarial { sw_decoupled },
            ..Self::default()
        }
    }

    pub fn rewired(mut self, atom: &str, to: &str) -> Self {
        self.rewire.insert(atom.to_string(), to.to_string());
        self
    }

    pub fn validate(&self) -> Result<(), MultiverseError> {
        let bad = |m: &str| Err(MultiverseError::InvalidFamily(m.to_string()));
        if self.nswitch == 1 {
            return bad("n-switch arity must be 0 (absent) or at least 2");
        }
        if self.buttons > 32 || self.switches > 32 {
            return bad("at most 32 buttons and 32 switches");
        }
        if let Some(r) = self.ratchet {
            if r.alpha_max == 0 || r.k_max == 0 {
                return bad("ratchet bounds must be positive");
            }
        }
        if matches!(self.regime, Regime::HybridAdversarial { .. }) && self.t_buttons.is_none() {
            return bad("the hybrid regime needs T-buttons");
        }
        for (from, to) in &self.rewire {
            self.check_obs(self.parse_atom_unwired(from)?)?;
            self.check_obs(self.parse_atom_unwired(to)?)?;
        }
        Ok(())
    }

    fn parse_atom_unwired(&self, atom: &str) -> Result<Obs, MultiverseError> {
        let obs = Obs::parse(atom)?;
        self.check_obs(obs)?;
        Ok(obs)
    }

    fn check_obs(&self, obs: Obs) -> Result<(), MultiverseError> {
        let ok = match obs {
            Obs::Button(i) => i < self.buttons,
            Obs::Switch(i) => i < self.switches,
            Obs::Sw(j) => j < self.nswitch_values(),
            Obs::RGeq(a, k) => self.ratchet.is_some_and(|r| a < r.alpha_max && k < r.k_max),
            Obs::T(i) => self.t_buttons.is_some_and(|t| (1..=t.count).contains(&i)),
            Obs::Rk(k) => self.t_buttons.is_some_and(|t| k <= t.count),
            Obs::SupInf => self.t_buttons.is_some_and(|t| t.unbounded),
        };
        if ok {
            Ok(())
        } else {
            Err(MultiverseError::AtomOutOfRange(obs.to_string()))
        }
    }

    /// Resolves an atom to the observation it reports, following `rewire`.
    pub fn observation(&self, atom: &str) -> Result<Obs, MultiverseError> {
        let target = self.rewire.get(atom).map(String::as_str).unwrap_or(atom);
        self.parse_atom_unwired(atom)?;
        self.parse_atom_unwired(target)
    }

    /// Checks that every atom of `f` is a declared control observation.
    pub fn check_statement(&self, f: &Formula) -> Result<(), MultiverseError> {
        f.atoms().iter().try_for_each(|a| self.observation(a).map(|_| ()))
    }

    /// Number of n-switch values (1 when the n-switch is absent).
    pub fn nswitch_values(&self) -> u32 {
        self.nswitch.max(1)
    }

    /// All declared atoms, in a fixed order.
    pub fn atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.extend((0..self.buttons).map(|i| Obs::Button(i).to_string()));
        out.extend((0..self.switches).map(|i| Obs::Switch(i).to_string()));
        out.extend((0..self.nswitch_values()).map(|j| Obs::Sw(j).to_string()));
        out.extend(self.ratchet_values().map(|(a, k)| Obs::RGeq(a, k).to_string()));
        if let Some(t) = self.t_buttons {
            out.extend((1..=t.count).map(|i| Obs::T(i).to_string()));
            out.extend((0..=t.count).map(|k| Obs::Rk(k).to_string()));
            if t.unbounded {
                out.push(Obs::SupInf.to_string());
            }
        }
        out
    }

    pub fn controls(&self) -> Vec<Control> {
        let mut out: Vec<Control> = (0..self.buttons).map(Control::Button).collect();
        out.extend((0..self.switches).map(Control::Switch));
        if self.nswitch >= 2 {
            out.push(Control::NSwitch);
        }
        if self.ratchet.is_some() {
            out.push(Control::Ratchet);
        }
        if self.t_buttons.is_some() {
            out.push(Control::TButtons);
        }
        out
    }

    /// Ratchet values in increasing order.
    pub fn ratchet_values(&self) -> impl Iterator<Item = (u16, u16)> {
        let r = self.ratchet.unwrap_or(RatchetBounds { alpha_max: 0, k_max: 0 });
        (0..r.alpha_max).flat_map(move |a| (0..r.k_max).map(move |k| (a, k)))
    }

    pub fn t_values(&self) -> Vec<TSup> {
        match self.t_buttons {
            None => vec![TSup::default()],
            Some(t) => {
                let mut v: Vec<TSup> = (0..=t.count).map(TSup::finite).collect();
                if t.unbounded {
                    v.push(TSup::Infinite);
                }
                v
            }
        }
    }

    pub fn state_count(&self) -> usize {
        let r = self.ratchet.map_or(1, |r| r.alpha_max as usize * r.k_max as usize);
        (1usize << self.buttons) * (1usize << self.switches) * self.nswitch_values() as usize * r * self.t_values().len()
    }

    /// Every state within bounds, in canonical order.
    pub fn all_states(&self) -> Vec<MState> {
        let ratchets: Vec<(u16, u16)> = if self.ratchet.is_some() {
            self.ratchet_values().collect()
        } else {
            vec![(0, 0)]
        };
        let ts = self.t_values();
        let mut out = Vec::with_capacity(self.state_count());
        for pushed in 0..(1u32 << self.buttons) {
            for switches in 0..(1u32 << self.switches) {
                for nswitch in 0..self.nswitch_values() {
                    for &ratchet in &ratchets {
                        for &t_sup in &ts {
                            out.push(MState {
                                pushed,
                                switches,
                                nswitch,
                                ratchet,
                                t_sup,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn in_bounds(&self, s: &MState) -> bool {
        let mask_ok = |m: u32, n: u32| n >= 32 || m >> n == 0;
        let ratchet_ok = match self.ratchet {
            None => s.ratchet == (0, 0),
            Some(r) => s.ratchet.0 < r.alpha_max && s.ratchet.1 < r.k_max,
        };
        mask_ok(s.pushed, self.buttons)
            && mask_ok(s.switches, self.switches)
            && s.nswitch < self.nswitch_values()
            && ratchet_ok
            && self.t_values().contains(&s.t_sup)
    }

    /// Whether `to` is an extension of `from`. Reflexive and transitive.
    pub fn is_successor(&self, from: &MState, to: &MState) -> bool {
        if from.pushed & !to.pushed != 0 || to.ratchet < from.ratchet || to.t_sup < from.t_sup {
            return false;
        }
        match self.regime {
            Regime::Independent => true,
            Regime::HybridAdversarial { sw_decoupled } => match (from.t_sup.value(), to.t_sup.value()) {
                (None, _) => true,
                (Some(_), None) => true,
                (Some(t), Some(t2)) if t == t2 => from.nswitch == to.nswitch,
                (Some(t), Some(t2)) => {
                    sw_decoupled || {
                        let n = self.nswitch_values();
                        (from.nswitch + (t2 - t) % n) % n == to.nswitch
                    }
                }
            },
        }
    }

    /// Every in-bounds extension of `s`.
    pub fn successors(&self, s: &MState) -> Vec<MState> {
        self.all_states().into_iter().filter(|t| self.is_successor(s, t)).collect()
    }

    /// States with headroom: every ratchet/T-button move that a labeling may
    /// need is still available.
    pub fn is_interior(&self, s: &MState) -> bool {
        let ratchet_ok = self.ratchet.is_none_or(|r| s.ratchet.0 + 1 < r.alpha_max);
        let t_ok = match (self.t_buttons, s.t_sup.value()) {
            (None, _) | (_, None) => true,
            (Some(tb), Some(t)) => t + self.nswitch_values() - 1 <= tb.count,
        };
        ratchet_ok && t_ok
    }

    pub fn state_id(&self, s: &MState) -> String {
        let bits = |m: u32, n: u32| (0..n).map(|i| if m >> i & 1 == 1 { '1' } else { '0' }).collect::<String>();
        let mut parts = Vec::new();
        if self.buttons > 0 {
            parts.push(format!("b{}", bits(s.pushed, self.buttons)));
        }
        if self.switches > 0 {
            parts.push(format!("s{}", bits(s.switches, self.switches)));
        }
        if self.nswitch >= 2 {
            parts.push(format!("sw{}", s.nswitch));
        }
        if self.ratchet.is_some() {
            parts.push(format!("r{}.{}", s.ratchet.0, s.ratchet.1));
        }
        if self.t_buttons.is_some() {
            parts.push(format!("t{}", s.t_sup));
        }
        if parts.is_empty() {
            "root".to_string()
        } else {
            parts.join("|")
        }
    }

    /// Value of a control's component as a comparable key.
    fn component(c: Control, s: &MState) -> (u32, u32) {
        match c {
            Control::Button(i) => (s.pushed >> i & 1, 0),
            Control::Switch(i) => (s.switches >> i & 1, 0),
            Control::NSwitch => (s.nswitch, 0),
            Control::Ratchet => (s.ratchet.0 as u32, s.ratchet.1 as u32),
            Control::TButtons => match s.t_sup.value() {
                Some(t) => (0, t),
                None => (1, 0),
            },
        }
    }

    fn with_component(c: Control, s: &MState, from: &MState) -> MState {
        let mut out = *s;
        match c {
            Control::Button(i) => out.pushed = (s.pushed & !(1 << i)) | (from.pushed & (1 << i)),
            Control::Switch(i) => out.switches = (s.switches & !(1 << i)) | (from.switches & (1 << i)),
            Control::NSwitch => out.nswitch = from.nswitch,
            Control::Ratchet => out.ratchet = from.ratchet,
            Control::TButtons => out.t_sup = from.t_sup,
        }
        out
    }

    /// Single-control target changes available from `s`.
    fn changes(&self, c: Control, s: &MState) -> Vec<MState> {
        match c {
            Control::Button(i) if s.pushed >> i & 1 == 0 => vec![MState {
                pushed: s.pushed | 1 << i,
                ..*s
            }],
            Control::Button(_) => vec![],
            Control::Switch(i) => vec![MState {
                switches: s.switches ^ 1 << i,
                ..*s
            }],
            Control::NSwitch => (0..self.nswitch_values())
                .filter(|&j| j != s.nswitch)
                .map(|j| MState { nswitch: j, ..*s })
                .collect(),
            Control::Ratchet => self
                .ratchet_values()
                .filter(|&v| v > s.ratchet)
                .map(|v| MState { ratchet: v, ..*s })
                .collect(),
            Control::TButtons => self
                .t_values()
                .into_iter()
                .filter(|&t| t > s.t_sup)
                .map(|t| MState { t_sup: t, ..*s })
                .collect(),
        }
    }

    /// Atoms observing a control, after rewiring.
    fn control_atoms(&self, c: Control) -> Vec<String> {
        match c {
            Control::Button(i) => vec![Obs::Button(i).to_string()],
            Control::Switch(i) => vec![Obs::Switch(i).to_string()],
            Control::NSwitch => (0..self.nswitch_values()).map(|j| Obs::Sw(j).to_string()).collect(),
            Control::Ratchet => self.ratchet_values().map(|(a, k)| Obs::RGeq(a, k).to_string()).collect(),
            Control::TButtons => {
                let t = self.t_buttons.expect("control present");
                let mut v: Vec<String> = (1..=t.count).map(|i| Obs::T(i).to_string()).collect();
                v.extend((0..=t.count).map(|k| Obs::Rk(k).to_string()));
                if t.unbounded {
                    v.push(Obs::SupInf.to_string());
                }
                v
            }
        }
    }
}

/// The reachable part of a family's state space as a Kripke model.
#[derive(Debug, Clone)]
pub struct Multiverse {
    pub family: ControlFamily,
    pub states: Vec<MState>,
    index: HashMap<MState, usize>,
    pub model: Model,
    pub initial: usize,
}

pub const DEFAULT_STATE_CAP: usize = 1 << 16;

impl Multiverse {
    pub fn build(fam: &ControlFamily, initial: MState) -> Result<Self, MultiverseError> {
        Self::build_capped(fam, initial, DEFAULT_STATE_CAP)
    }

    pub fn build_capped(fam: &ControlFamily, initial: MState, cap: usize) -> Result<Self, MultiverseError> {
        fam.validate()?;
        if !fam.in_bounds(&initial) {
            return Err(MultiverseError::StateOutOfBounds(fam.state_id(&initial)));
        }
        let size = fam.state_count();
        if size > cap {
            return Err(MultiverseError::StateSpaceTooLarge { size, cap });
        }
        // Successors are already closed under composition, so the reachable
        // set is exactly the one-step successor set of the initial state.
        let states: Vec<MState> = fam
            .all_states()
            .into_iter()
            .filter(|s| fam.is_successor(&initial, s))
            .collect();
        let index: HashMap<MState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let rows: Vec<Vec<usize>> = states
            .par_iter()
            .map(|s| {
                states
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| fam.is_successor(s, t))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let names: Vec<String> = states.iter().map(|s| fam.state_id(s)).collect();
        let frame = Frame::new(
            names,
            rows.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&j| (i, j))),
        )
        .expect("state ids are distinct");
        let mut model = Model::new(frame);
        for atom in fam.atoms() {
            let obs = fam.observation(&atom)?;
            let mut set = FixedBitSet::with_capacity(states.len());
            for (i, s) in states.iter().enumerate() {
                set.set(i, obs.eval(s));
            }
            model.set_bits(&atom, set);
        }
        let initial = index[&initial];
        Ok(Self {
            family: fam.clone(),
            states,
            index,
            model,
            initial,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &MState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn state_id(&self, i: usize) -> String {
        self.model.frame.worlds()[i].clone()
    }

    /// Truth set of a control statement.
    pub fn truth_set(&self, f: &Formula) -> Result<FixedBitSet, MultiverseError> {
        self.family.check_statement(f)?;
        Ok(self.model.truth_set(f))
    }

    fn holds(&self, atom: &str, s: &MState) -> bool {
        self.family.observation(atom).map(|o| o.eval(s)).unwrap_or(false)
    }

    fn observables(&self, c: Control, s: &MState) -> Vec<bool> {
        self.family.control_atoms(c).iter().map(|a| self.holds(a, s)).collect()
    }
}

/// Reifies the family's multiverse from `initial`; returns the model and the
/// initial world's id.
pub fn as_kripke_model(fam: &ControlFamily, initial: MState) -> Result<(Model, String), MultiverseError> {
    let mv = Multiverse::build(fam, initial)?;
    let id = mv.state_id(mv.initial);
    Ok((mv.model, id))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AxiomCheck {
    pub control: String,
    pub property: String,
    pub formula: String,
    pub pass: bool,
    /// Failing states (at most [`MAX_WITNESSES`]).
    pub witnesses: Vec<String>,
}

pub const MAX_WITNESSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ControlAxiomReport {
    pub states: usize,
    pub interior_states: usize,
    pub checks: Vec<AxiomCheck>,
    pub independence: IndependenceReport,
    pub all_pass: bool,
}

impl ControlAxiomReport {
    pub fn failing(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, control: &str, property: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.control == control && c.property == property)
    }
}

fn atom(s: impl ToString) -> Formula {
    Formula::Atom(s.to_string())
}

/// Checks the defining modal properties of each control, plus independence.
pub fn check_control_axioms(fam: &ControlFamily, initial: MState) -> Result<ControlAxiomReport, MultiverseError> {
    let mv = Multiverse::build(fam, initial)?;
    Ok(control_axioms_on(&mv))
}

pub fn control_axioms_on(mv: &Multiverse) -> ControlAxiomReport {
    let fam = &mv.family;
    let mut checks = Vec::new();
    let everywhere = |control: String, property: &str, f: Formula| {
        // `□φ` at the initial world, i.e. `φ` on every reachable state.
        let truth = mv.model.truth_set(&f);
        let failing: Vec<usize> = (0..mv.len()).filter(|&i| !truth.contains(i)).collect();
        AxiomCheck {
            control,
            property: property.to_string(),
            formula: Formula::nec(f).to_string(),
            pass: failing.is_empty(),
            witnesses: failing.iter().take(MAX_WITNESSES).map(|&i| mv.state_id(i)).collect(),
        }
    };

    for i in 0..fam.switches {
        let s = atom(Obs::Switch(i));
        checks.push(everywhere(
            s.to_string(),
            "switch",
            Formula::and(Formula::poss(s.clone()), Formula::poss(Formula::not(s))),
        ));
    }

    let button = |name: String, b: Formula, checks: &mut Vec<AxiomCheck>| {
        checks.push(everywhere(name.clone(), "button", Formula::poss(Formula::nec(b.clone()))));
        checks.push(everywhere(name, "pure", Formula::implies(b.clone(), Formula::nec(b))));
    };
    for i in 0..fam.buttons {
        button(Obs::Button(i).to_string(), atom(Obs::Button(i)), &mut checks);
    }
    if let Some(t) = fam.t_buttons {
        for i in 1..=t.count {
            button(format!("not T:{i}"), Formula::not(atom(Obs::T(i))), &mut checks);
        }
        if t.unbounded {
            button(Obs::SupInf.to_string(), atom(Obs::SupInf), &mut checks);
        }
    }

    if fam.nswitch >= 2 {
        let n = fam.nswitch;
        let sws: Vec<Formula> = (0..n).map(|j| atom(Obs::Sw(j))).collect();
        let mut exclusive = Vec::new();
        for a in 0..n as usize {
            for b in a + 1..n as usize {
                exclusive.push(Formula::not(Formula::and(sws[a].clone(), sws[b].clone())));
            }
        }
        checks.push(everywhere(
            "sw".into(),
            "exactly_one",
            Formula::and(Formula::disj(sws.clone()), Formula::conj(exclusive)),
        ));
        checks.push(everywhere(
            "sw".into(),
            "reachable",
            Formula::conj(sws.iter().cloned().map(Formula::poss)),
        ));
    }

    if fam.ratchet.is_some() {
        let values: Vec<(u16, u16)> = fam.ratchet_values().collect();
        let interior: Vec<usize> = (0..mv.len()).filter(|&i| fam.is_interior(&mv.states[i])).collect();
        for (idx, &v) in values.iter().enumerate() {
            let r = atom(Obs::RGeq(v.0, v.1));
            let name = r.to_string();
            checks.push(everywhere(name.clone(), "pure", Formula::implies(r.clone(), Formula::nec(r.clone()))));
            if idx > 0 {
                let (pa, pk) = values[idx - 1];
                checks.push(everywhere(
                    name.clone(),
                    "monotone",
                    Formula::implies(r.clone(), atom(Obs::RGeq(pa, pk))),
                ));
            }
            // Increasable to exactly v from every interior state below v.
            let exact = match values.get(idx + 1) {
                Some(&(na, nk)) => Formula::and(r.clone(), Formula::not(atom(Obs::RGeq(na, nk)))),
                None => r.clone(),
            };
            let f = Formula::poss(exact);
            let truth = mv.model.truth_set(&f);
            let failing: Vec<usize> = interior
                .iter()
                .copied()
                .filter(|&i| mv.states[i].ratchet < v && !truth.contains(i))
                .collect();
            checks.push(AxiomCheck {
                control: name,
                property: "increasable".into(),
                formula: format!("interior & !{r} -> {f}"),
                pass: failing.is_empty(),
                witnesses: failing.iter().take(MAX_WITNESSES).map(|&i| mv.state_id(i)).collect(),
            });
        }
    }

    let independence = independence_on(mv);
    let all_pass = checks.iter().all(|c| c.pass) && independence.pass;
    ControlAxiomReport {
        states: mv.len(),
        interior_states: (0..mv.len()).filter(|&i| fam.is_interior(&mv.states[i])).count(),
        checks,
        independence,
        all_pass,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndependenceFailure {
    pub state: String,
    pub control: String,
    pub target: String,
    /// Controls that could be changed alongside to make the move possible.
    pub also_changes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndependenceReport {
    pub pass: bool,
    pub moves_checked: usize,
    pub failure_count: usize,
    /// First failures in canonical order (at most [`MAX_FAILURES`]).
    pub failures: Vec<IndependenceFailure>,
    /// `(changed, dragged along)` control pairs.
    pub dependent_pairs: BTreeSet<(String, String)>,
    /// Controls with at least one impossible move.
    pub failing_controls: BTreeSet<String>,
}

pub const MAX_FAILURES: usize = 32;

/// For every reachable state and every single-control change, looks for an
/// extension realizing exactly that change with every other control's
/// observable values unchanged.
pub fn check_independence(fam: &ControlFamily, initial: MState) -> Result<IndependenceReport, MultiverseError> {
    let mv = Multiverse::build(fam, initial)?;
    Ok(independence_on(&mv))
}

pub fn independence_on(mv: &Multiverse) -> IndependenceReport {
    let fam = &mv.family;
    let controls = fam.controls();
    let wired = !fam.rewire.is_empty();

    let per_state: Vec<(usize, Vec<IndependenceFailure>)> = mv
        .states
        .par_iter()
        .map(|s| {
            let mut moves = 0;
            let mut fails = Vec::new();
            let others_same = |c: Control, t: &MState, skip: Option<Control>| {
                !wired
                    || controls
                        .iter()
                        .filter(|&&o| o != c && Some(o) != skip)
                        .all(|&o| mv.observables(o, s) == mv.observables(o, t))
            };
            for &c in &controls {
                for target in fam.changes(c, s) {
                    moves += 1;
                    if fam.is_successor(s, &target) && others_same(c, &target, None) {
                        continue;
                    }
                    let mut also = Vec::new();
                    for &o in controls.iter().filter(|&&o| o != c) {
                        let rescued = mv.states.iter().any(|t| {
                            ControlFamily::with_component(o, &target, t) == *t
                                && ControlFamily::component(o, t) != ControlFamily::component(o, &target)
                                && fam.is_successor(s, t)
                                && others_same(c, t, Some(o))
                        });
                        if rescued {
                            also.push(o.to_string());
                        }
                    }
                    fails.push(IndependenceFailure {
                        state: fam.state_id(s),
                        control: c.to_string(),
                        target: fam.state_id(&target),
                        also_changes: also,
                    });
                }
            }
            (moves, fails)
        })
        .collect();

    let moves_checked = per_state.iter().map(|(m, _)| m).sum();
    let all: Vec<IndependenceFailure> = per_state.into_iter().flat_map(|(_, f)| f).collect();
    let dependent_pairs = all
        .iter()
        .flat_map(|f| f.also_changes.iter().map(move |o| (kind(&f.control), kind(o))))
        .collect();
    let failing_controls = all.iter().map(|f| f.control.clone()).collect();
    IndependenceReport {
        pass: all.is_empty(),
        moves_checked,
        failure_count: all.len(),
        failures: all.into_iter().take(MAX_FAILURES).collect(),
        dependent_pairs,
        failing_controls,
    }
}

/// Control kind without index: `b:3` → `b`.
fn kind(control: &str) -> String {
    control.split(':').next().unwrap_or(control).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::{as_pba, frame_properties};

    #[test]
    fn atoms_round_trip() {
        for a in ["b:0", "s:3", "sw:2", "r:1.5", "T:4", "Rk:0", "supinf"] {
            assert_eq!(Obs::parse(a).unwrap().to_string(), a);
        }
        assert!(Obs::parse("x:1").is_err());
        assert!(Obs::parse("r:1").is_err());
    }

    #[test]
    fn successors_example() {
        let fam = ControlFamily::independent(1, 0, 2);
        let s = MState::default();
        let succ = fam.successors(&s);
        assert_eq!(succ.len(), 4);
        assert!(succ.contains(&s));
        let pushed = MState { pushed: 1, ..s };
        assert!(fam.successors(&pushed).iter().all(|t| t.pushed == 1));
    }

    #[test]
    fn one_button_is_two_chain() {
        let (m, id) = as_kripke_model(&ControlFamily::independent(1, 0, 0), MState::default()).unwrap();
        assert_eq!(m.frame.len(), 2);
        assert_eq!(m.frame.relation().count(), 3);
        assert_eq!(id, "b0");
    }

    #[test]
    fn button_and_switch_is_two_clusters() {
        let (m, _) = as_kripke_model(&ControlFamily::independent(1, 1, 0), MState::default()).unwrap();
        let q = crate::kripke::quotient_clusters(&m.frame).unwrap();
        assert_eq!(m.frame.len(), 4);
        assert_eq!(q.classes.len(), 2);
        assert!(q.classes.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn independent_export_is_a_pba() {
        for mb in 0..=2 {
            for n in [0, 2, 3] {
                let fam = ControlFamily::independent(mb, 0, n);
                let mv = Multiverse::build(&fam, MState::default()).unwrap();
                let p = frame_properties(&mv.model.frame);
                assert!(p.reflexive && p.transitive && p.directed);
                let s = as_pba(&mv.model.frame).unwrap();
                assert_eq!(s.base_size, mb as usize);
                assert!(s.cluster_sizes().iter().all(|&c| c == fam.nswitch_values() as usize));
            }
        }
    }

    #[test]
    fn t_sup_transitions() {
        let fam = ControlFamily::independent(0, 0, 0).with_t_buttons(4, true);
        let from = MState {
            t_sup: TSup::finite(2),
            ..MState::default()
        };
        let ts: Vec<TSup> = fam.successors(&from).iter().map(|s| s.t_sup).collect();
        assert_eq!(ts, vec![TSup::finite(2), TSup::finite(3), TSup::finite(4), TSup::Infinite]);
        let inf = MState {
            t_sup: TSup::Infinite,
            ..MState::default()
        };
        assert_eq!(fam.successors(&inf), vec![inf]);
    }

    #[test]
    fn independent_family_passes() {
        let fam = ControlFamily::independent(2, 1, 3).with_ratchet(2, 4).with_t_buttons(3, true);
        let r = check_control_axioms(&fam, MState::default()).unwrap();
        assert!(r.all_pass, "{:#?}", r.failing().collect::<Vec<_>>());
    }

    #[test]
    fn button_wired_to_switch_fails_purity() {
        let fam = ControlFamily::independent(1, 1, 0).rewired("b:0", "s:0");
        let r = check_control_axioms(&fam, MState::default()).unwrap();
        let pure = r.check("b:0", "pure").unwrap();
        assert!(!pure.pass);
        assert!(!pure.witnesses.is_empty());
        assert!(!r.independence.pass);
    }

    #[test]
    fn hybrid_keeps_nswitch_but_loses_independence() {
        for decoupled in [false, true] {
            let fam = ControlFamily::hybrid(1, 3, 6, decoupled);
            let r = check_control_axioms(&fam, MState::default()).unwrap();
            assert!(r.check("sw", "exactly_one").unwrap().pass);
            assert!(r.check("sw", "reachable").unwrap().pass);
            assert!(!r.independence.pass);
            assert!(r.independence.dependent_pairs.contains(&("sw".into(), "T".into())));
            assert_eq!(
                r.independence.dependent_pairs.contains(&("T".into(), "sw".into())),
                !decoupled
            );
        }
    }

    #[test]
    fn family_json() {
        let fam = ControlFamily::hybrid(2, 3, 8, false);
        let json = serde_json::to_string(&fam).unwrap();
        let back: ControlFamily = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fam);
        let parsed: ControlFamily = serde_json::from_str(r#"{"buttons":1,"nswitch":2}"#).unwrap();
        assert_eq!(parsed, ControlFamily::independent(1, 0, 2));
        let s: MState = serde_json::from_str(r#"{"pushed":[0,2],"t_sup":"inf"}"#).unwrap();
        assert_eq!(s.pushed, 0b101);
        assert_eq!(s.t_sup, TSup::Infinite);
    }

    #[test]
    fn state_cap() {
        let fam = ControlFamily::independent(10, 10, 0);
        assert!(matches!(
            Multiverse::build_capped(&fam, MState::default(), 1000),
            Err(MultiverseError::StateSpaceTooLarge { .. })
        ));
    }
}
