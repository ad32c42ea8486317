//! Simulation and verification toolkit for single-asset online trading
//! against a clairvoyant benchmark.
//!
//! A trader observes a sequence of stochastic prices, may hold at most one
//! unit, starts with one unit endowed, and pays optional transaction costs
//! (multiplicative `eps_pi`, additive `eps_sigma`) on every trade. The crate
//! provides:
//!
//! - [`market`]: discrete price distributions with optional uniform
//!   perturbation, cost models, and price processes;
//! - [`oracle`]: exact offline optima per realization (telescoping sum,
//!   cost-aware dynamic program, exhaustive cross-check) and closed-form
//!   expectations;
//! - [`traders`]: the online policies (buy-low-sell-high, the threshold
//!   rule for costs, margin and lookahead variants) and the threshold
//!   solver;
//! - [`adversary`]: the hard-instance generators, including the adaptive
//!   phase adversary that defeats every lookahead policy under additive
//!   costs;
//! - [`engine`]: seeded episode execution and reproducible parallel Monte
//!   Carlo batches;
//! - [`analysis`]: competitive-ratio bounds, verification reports, and
//!   affine ratio fits across horizons;
//! - [`exhaustive`]: exact small-instance references (backward induction
//!   over all online policies, full path enumeration);
//! - [`cli`]: experiment configs and the commands behind the `prophets`
//!   binary.

pub mod adversary;
pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod exhaustive;
pub mod market;
pub mod oracle;
pub mod traders;

pub use error::{Error, Result};
pub use market::{CostModel, PriceDistribution, PriceProcess};
pub use oracle::Realization;
pub use traders::{Action, Thresholds, Trader};
