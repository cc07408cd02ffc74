//! Core algorithms for anytime best-first search on stochastic tree models.
//!
//! The crate is organized around an *abstract problem*: a finite feature
//! space with a Markov transition kernel, step costs, and goal features.
//! From an abstract problem we precompute:
//!
//! * the peak incremental rate of improvement `r*` for every edge
//!   equivalence class ([`rate`]), which drives the SMIRI search policy;
//! * the survival function of optimal cost-to-go ([`survival`]), from
//!   which solution potential, the expected cost-to-go heuristic, and the
//!   expected optimal solution cost are derived.
//!
//! Concrete search problems are drawn lazily from the random binary tree
//! model ([`tree`]); the anytime search loop with its five selection
//! policies lives in [`search`], and independent brute-force / Monte Carlo
//! checks in [`oracle`].
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats, and the
//! benchmark driver live in the companion `smiri-bench` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod mix;
pub mod oracle;
pub mod problem;
pub mod rate;
pub mod search;
pub mod survival;
pub mod tree;

pub use problem::{AbstractProblem, ActionId, Diagnostic, FeatureId, KernelRow};
pub use rate::{EdgeClass, EdgeClassStats, RStarTable};
pub use search::{ImprovementTrace, PolicyKind};
pub use survival::SurvivalTable;
pub use tree::{HistoryKey, TreeInstance, TreeModelParams};
