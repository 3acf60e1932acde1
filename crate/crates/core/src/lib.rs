//! Two-board Tug-of-War / random walk games.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod game;
pub mod pde;
pub mod solver;

pub use domain::{eval_payoff, Board, Domain, Field, Lattice, PayoffData, Term};
pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
