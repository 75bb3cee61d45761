//! The S4.2 axiom schemata and bounded refutation search over finite
//! pre-Boolean-algebras.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;
use crate::kripke::{enumerate_pba_structures, find_refutation, Model, PbaStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Schema {
    K,
    Dual,
    T,
    Four,
    Dot2,
}

impl Schema {
    pub const ALL: [Schema; 5] = [Schema::K, Schema::Dual, Schema::T, Schema::Four, Schema::Dot2];

    pub fn arity(self) -> usize {
        match self {
            Schema::K => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schema::K => "K",
            Schema::Dual => "Dual",
            Schema::T => "T",
            Schema::Four => "4",
            Schema::Dot2 => ".2",
        })
    }
}

impl FromStr for Schema {
    type Err = TheoryError;

    fn from_str(s: &str) -> Result<Self, TheoryError> {
        match s.to_ascii_lowercase().as_str() {
            "k" => Ok(Schema::K),
            "dual" => Ok(Schema::Dual),
            "t" => Ok(Schema::T),
            "4" | "four" => Ok(Schema::Four),
            ".2" | "dot2" => Ok(Schema::Dot2),
            _ => Err(TheoryError::UnknownSchema(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("schema {schema} takes {expected} argument(s), got {got}")]
    Arity { schema: Schema, expected: usize, got: usize },
    #[error("unknown schema {0:?}")]
    UnknownSchema(String),
}

/// Instantiates a schema:
///
/// | K    | `□(φ→ψ) → (□φ→□ψ)` |
/// | Dual | `◇φ ↔ ¬□¬φ`        |
/// | T    | `□φ → φ`           |
/// | 4    | `□φ → □□φ`         |
/// | .2   | `◇□φ → □◇φ`        |
pub fn axiom_instance(schema: Schema, args: &[Formula]) -> Result<Formula, TheoryError> {
    if args.len() != schema.arity() {
        return Err(TheoryError::Arity {
            schema,
            expected: schema.arity(),
            got: args.len(),
        });
    }
    let phi = args[0].clone();
    Ok(match schema {
        Schema::K => {
            let psi = args[1].clone();
            Formula::implies(
                Formula::nec(Formula::implies(phi.clone(), psi.clone())),
                Formula::implies(Formula::nec(phi), Formula::nec(psi)),
            )
        }
        Schema::Dual => Formula::iff(
            Formula::poss(phi.clone()),
            Formula::not(Formula::nec(Formula::not(phi))),
        ),
        Schema::T => Formula::implies(Formula::nec(phi.clone()), phi),
        Schema::Four => Formula::implies(Formula::nec(phi.clone()), Formula::nec(Formula::nec(phi))),
        Schema::Dot2 => Formula::implies(
            Formula::poss(Formula::nec(phi.clone())),
            Formula::nec(Formula::poss(phi)),
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub m_max: usize,
    pub cluster_max: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            m_max: 3,
            cluster_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DecisionOutcome {
    Countermodel {
        model: Model,
        /// Id of the refuting world.
        world: String,
        #[serde(skip)]
        world_index: usize,
        base_size: usize,
        cluster_sizes: Vec<usize>,
    },
    ValidUpToBound {
        bounds: Bounds,
        frames_checked: usize,
    },
}

impl DecisionOutcome {
    pub fn is_countermodel(&self) -> bool {
        matches!(self, DecisionOutcome::Countermodel { .. })
    }
}

/// Every pBA with base size `≤ m_max` and cluster sizes `≤ cluster_max`,
/// ordered by world count (stable with respect to base size, then the
/// lexicographic cluster-size order).
pub fn search_space(bounds: Bounds) -> Vec<PbaStructure> {
    let mut all: Vec<PbaStructure> = (0..=bounds.m_max)
        .flat_map(|m| enumerate_pba_structures(m, bounds.cluster_max))
        .collect();
    all.sort_by_key(|s| s.worlds.len());
    all
}

/// Bounded refutation search for S4.2. A countermodel proves `f ∉ S4.2`;
/// `ValidUpToBound` certifies only that no pBA within the bounds refutes `f`.
pub fn s42_decide(f: &Formula, m_max: usize, cluster_max: usize) -> DecisionOutcome {
    let bounds = Bounds { m_max, cluster_max };
    decide_in(f, bounds, &search_space(bounds))
}

/// [`s42_decide`] over a precomputed search space.
pub fn decide_in(f: &Formula, bounds: Bounds, space: &[PbaStructure]) -> DecisionOutcome {
    let hit = space.par_iter().find_map_first(|s| {
        let frame = s.to_frame();
        find_refutation(&frame, f).map(|r| (s, frame, r))
    });
    match hit {
        Some((s, frame, refutation)) => {
            let (model, w) = refutation.into_model(frame);
            DecisionOutcome::Countermodel {
                world: model.frame.worlds()[w].clone(),
                world_index: w,
                model,
                base_size: s.base_size,
                cluster_sizes: s.cluster_sizes(),
            }
        }
        None => DecisionOutcome::ValidUpToBound {
            bounds,
            frames_checked: space.len(),
        },
    }
}

/// Instances of every schema over the given argument formulas: `K` on all
/// ordered pairs, the rest on each argument.
pub fn schema_instances(args: &[Formula]) -> Vec<(Schema, Formula)> {
    let mut out = Vec::new();
    for a in args {
        for b in args {
            out.push((Schema::K, axiom_instance(Schema::K, &[a.clone(), b.clone()]).unwrap()));
        }
    }
    for schema in [Schema::Dual, Schema::T, Schema::Four, Schema::Dot2] {
        for a in args {
            out.push((schema, axiom_instance(schema, std::slice::from_ref(a)).unwrap()));
        }
    }
    out
}
