//! Agent-based stock market simulator in which every agent learns to forecast
//! and trade through two tabular direct-policy-search learners, trading one
//! stock through a per-step batch double auction.
//!
//! The crate is organised bottom-up:
//!
//! - [`book`]: call-auction matching with tick-size quantization.
//! - [`fundamentals`]: fundamental value series and agents' private beliefs.
//! - [`agent`]: policies, state discretization, forecasting, rewards, orders.
//! - [`portfolio`]: cash/share accounting and drawdown-based bankruptcy.
//! - [`sim`]: run orchestration, metaorder injection, run results.
//! - [`metrics`]: return, volatility, spread and impact statistics.
//! - [`experiments`]: the tick-size, metaorder and trading-frequency harnesses,
//!   registered by name behind the [`experiments::Experiment`] trait.
//! - [`output`]: CSV/JSON writers for runs and experiment tables.
//! - [`cli`]: the command-line front end.

pub mod agent;
pub mod book;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fundamentals;
pub mod metrics;
pub mod output;
pub mod portfolio;
pub mod rng;
pub mod sim;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use sim::{run_simulation, SimResult};
