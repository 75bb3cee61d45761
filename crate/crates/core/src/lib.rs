pub mod formula;
pub mod kripke;
pub mod random;
pub mod theories;
pub mod multiverse;
pub mod labeling;
pub mod posets;
pub mod cli;
