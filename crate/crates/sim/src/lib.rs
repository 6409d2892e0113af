//! Deterministic discrete-event driver for the conversation engine.
//!
//! A [`ScenarioScript`] describes who sits where, what they say and when,
//! what the language model answers, how noisy the sensors are, and the
//! ground truth. [`run`] plays it on the virtual clock against scripted
//! backends and returns the full [`Trace`] plus a [`TruthFile`] for scoring.

pub mod builder;
pub mod noise;
pub mod runner;
pub mod scenario;
pub mod trace;
pub mod world;

pub use runner::{run, run_with_seed, RunOutput};
pub use scenario::{
    load_scenario, load_scenario_file, CannedResponse, EventKind, GroundTruth, IntendedAddressee, NoiseConfig,
    Participant, ScenarioError, ScenarioScript, ScriptEvent,
};
pub use trace::{BackendCall, Trace, TraceError, TraceRecord, TruthFile};

/// Scenarios shipped with the crate.
pub mod bundled {
    pub const PARALLEL: &str = include_str!("../scenarios/parallel.scenario");
    pub const GROUP: &str = include_str!("../scenarios/group.scenario");
}
