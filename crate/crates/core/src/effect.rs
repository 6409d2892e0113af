//! Module outputs. Modules are pure state machines: they never touch the
//! bus or a backend directly, they return effects that the engine applies.

use crate::backend::{Action, GenerationRequest, IdentityWindow};
use crate::message::Message;
use crate::types::Timestamp;

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    /// Publish at the current time.
    Emit(Message),
    /// One-shot timer; stale timers are recognised by their payload token.
    Timer {
        at: Timestamp,
        msg: Message,
    },
    Act(Action),
    Identify(IdentityWindow),
    Generate(GenerationRequest),
}

pub type Effects = Vec<Effect>;

/// Messages emitted by a batch of effects, in order.
pub fn emitted(effects: &[Effect]) -> Vec<&Message> {
    effects
        .iter()
        .filter_map(|e| match e {
            Effect::Emit(m) => Some(m),
            _ => None,
        })
        .collect()
}

pub fn actions(effects: &[Effect]) -> Vec<&Action> {
    effects
        .iter()
        .filter_map(|e| match e {
            Effect::Act(a) => Some(a),
            _ => None,
        })
        .collect()
}

pub fn timers(effects: &[Effect]) -> Vec<(Timestamp, &Message)> {
    effects
        .iter()
        .filter_map(|e| match e {
            Effect::Timer { at, msg } => Some((*at, msg)),
            _ => None,
        })
        .collect()
}
