//! Capacitated assortment optimization with greedy add-exchange search.
//!
//! The solver in [`greedy`] only sees a [`choice::RevenueOracle`], so any
//! choice model can be plugged in. [`reference`] and [`analysis`] provide the
//! exact MNL ground truth and the invariant checks used to validate it.

pub mod analysis;
pub mod bench;
pub mod choice;
pub mod cli;
pub mod error;
pub mod greedy;
pub mod io;
pub mod reference;
pub mod report;

pub use choice::{
    mnl_choice_prob, mnl_revenue, Assortment, Choice, CountingOracle, ExactOracle, FnOracle,
    Instance, NoiseMode, NoiseSpec, NoisyOracle, OracleStats, Product, ProductId, RevenueOracle,
};
pub use error::{Error, Result};
pub use greedy::{greedy_add_exchange, greedy_opt, naive_greedy, GreedyConfig, SolveReport};
pub use reference::{brute_force_opt, candidate_set_opt, find_nesting_witness, ExactSolution};
