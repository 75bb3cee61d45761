//! Seeded corpus generation.
//!
//! Uses SplitMix64 (`rand_xoshiro::SplitMix64`) and reduces every draw with
//! `next_u64() % n`, so a corpus is fully determined by its seed and can be
//! replayed by other implementations. The exact procedure is written down in
//! `docs/formats.md`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::formula::Formula;

pub struct Corpus {
    rng: SplitMix64,
}

impl Corpus {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform-ish draw in `0..n` (`n > 0`).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        self.rng.next_u64() % n
    }

    pub fn below_usize(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    /// Random formula over `atoms` with modal depth at most `max_depth`.
    /// Structural height is capped at `max_depth + 3`.
    pub fn formula(&mut self, atoms: &[&str], max_depth: usize) -> Formula {
        self.formula_at(atoms, max_depth, max_depth + 3)
    }

    fn leaf(&mut self, atoms: &[&str]) -> Formula {
        let r = self.below_usize(atoms.len() * 4 + 2);
        if r < atoms.len() * 4 {
            Formula::atom(atoms[r / 4])
        } else if r == atoms.len() * 4 {
            Formula::Top
        } else {
            Formula::Bot
        }
    }

    fn formula_at(&mut self, atoms: &[&str], modal: usize, height: usize) -> Formula {
        if height == 0 {
            return self.leaf(atoms);
        }
        match self.below(10) {
            0..=2 => self.leaf(atoms),
            3 => Formula::not(self.formula_at(atoms, modal, height - 1)),
            k @ 4..=7 => {
                let a = self.formula_at(atoms, modal, height - 1);
                let b = self.formula_at(atoms, modal, height - 1);
                match k {
                    4 => Formula::and(a, b),
                    5 => Formula::or(a, b),
                    6 => Formula::implies(a, b),
                    _ => Formula::iff(a, b),
                }
            }
            k if modal > 0 => {
                let inner = self.formula_at(atoms, modal - 1, height - 1);
                if k == 8 {
                    Formula::nec(inner)
                } else {
                    Formula::poss(inner)
                }
            }
            _ => self.leaf(atoms),
        }
    }

    /// `count` formulas drawn in sequence.
    pub fn formulas(&mut self, count: usize, atoms: &[&str], max_depth: usize) -> Vec<Formula> {
        (0..count).map(|_| self.formula(atoms, max_depth)).collect()
    }
}
