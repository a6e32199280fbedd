//! Monte Carlo simulator of a closed economy where every pairwise trade is
//! taxed and the collected tax is handed back to a chosen set of agents.
//!
//! * [`exchange`] holds the trading engine.
//! * [`stats`] turns wealth snapshots into `P(w)`, `Q(w)`, the modal
//!   wealth and tail fits.
//! * [`experiment`] runs equilibrated ensembles and tax sweeps.
//! * [`config`], [`output`] and [`commands`] back the command-line tool.

pub mod commands;
pub mod config;
pub mod exchange;
pub mod experiment;
pub mod output;
pub mod probit;
pub mod rng;
pub mod stats;
