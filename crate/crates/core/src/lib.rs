//! Inventory amplification in production networks.
//!
//! Input-output tables become network models ([`io_model`]), whose position
//! metrics ([`network_metrics`]) govern how stochastic final demand
//! ([`shock_engine`]) is amplified by procyclical inventories on its way
//! upstream ([`dynamics`]). Firm-level inventory problems live in
//! [`inventory_policies`], regressions on simulated panels in
//! [`estimation`], and scenario orchestration in [`runner`].

pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod inventory_policies;
pub mod io_model;
pub mod network_metrics;
pub mod runner;
pub mod shock_engine;
pub mod util;

pub use error::{Error, Result};
pub use io_model::{IoTable, NetworkModel, SectorLabel};
pub use network_metrics::OmegaParams;
