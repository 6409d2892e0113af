//! Orchestration engine for spoken conversation between two users and one
//! robot: speaker localisation, identity fusion, turn taking, barge-in
//! handling and streamed response generation with addressee selection.
//!
//! Every module is a state machine driven by a single-dispatcher bus; all
//! device and service access goes through the traits in [`backend`].

pub mod awareness;
pub mod backend;
pub mod bus;
pub mod config;
pub mod conversation;
pub mod diarisation;
pub mod effect;
pub mod engine;
pub mod face_tracking;
pub mod message;
pub mod output;
pub mod transcription;
pub mod turn_taking;
pub mod types;

pub use bus::{Bus, BusError, ClockMode, Event};
pub use config::{EngineConfig, Persona};
pub use engine::{Backends, Engine, EngineSetup};
pub use message::Message;
pub use types::*;
