//! Multi-objective deployment planning for backhaul aggregate nodes (BANs),
//! small base stations (SBSs) and machine aggregators (MAs) connected by
//! multi-hop millimeter-wave backhaul.
//!
//! The pipeline is: build a [`scenario::Scenario`], derive its
//! [`scenario::DerivedTables`], then trace the cost/coverage Pareto front with
//! [`pareto::solve`]. Small instances can be cross-checked against the
//! exhaustive solvers in [`oracle`].

pub mod error;
mod flow;
pub mod lagrangian;
pub mod model;
pub mod oracle;
pub mod pareto;
pub mod scenario;
pub mod tabu;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{
    check_feasibility, cost, dominates, objectives, routing_flows, ConnectionPlan, Deployment, Instance, Node,
    ObjectiveVector, Restriction, Solution, Violation,
};
pub use pareto::{solve, BoundSet, FrontEntry, SolveOutcome, SolveParams};
pub use scenario::{derive_tables, generate_scenario, DerivedTables, GenParams, RadioConfig, Scenario};
