//! Energy-aware small-cell switching for a single macro cell.
//!
//! A macro base station overlays a set of small cells (RRH, micro, pico,
//! femto). Each slot, a switching policy picks small cells to put to sleep
//! and hands their traffic to the macro BS without exceeding its capacity.
//!
//! Modules, bottom-up: [`netmodel`] (power and offload), [`traffic`] (load
//! traces), [`clustering`] (1-D k-means and elbow), [`switching`] (policies),
//! [`metrics`] (energy, CO2, throughput) and [`harness`] (scenarios, sweeps,
//! CSV output).

pub mod clustering;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod netmodel;
pub mod switching;
pub mod traffic;

pub use error::{Error, Result};
pub use harness::{run_scenario, sweep, Scenario, ScenarioRun, SweepRow};
pub use metrics::RunReport;
pub use netmodel::{BsKind, MacroCell, PowerProfile, SmallCell, SwitchDecision};
pub use switching::{run_policy, Policy, PolicyInput, PolicyOutput, SwitchParams, ThesisMode};
pub use traffic::TrafficTrace;
