//! Weighted multilevel and multi-index Monte Carlo.

pub mod cli;
pub mod config;
pub mod driver;
pub mod figures;
pub mod level_stats;
pub mod mimc;
pub mod optim;
pub mod output;
pub mod payoff;
pub mod planner;
pub mod rng;
pub mod sde;
