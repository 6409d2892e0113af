//! Capability interfaces the engine depends on. Any device or service that
//! offers the capability can be plugged in; the simulator supplies scripted
//! adapters and the gateway supplies idealised ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{DoaSample, FaceObservation, ParticipantId, SegmentId, Timestamp, TurnTrigger};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend disconnected")]
    Disconnected,
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("no response scripted for turn {0}")]
    NoScriptedResponse(u32),
}

/// Direction-of-arrival source.
pub trait MicArray {
    /// Most recent sample since the previous read, if any.
    fn read(&mut self, now: Timestamp) -> Result<Option<DoaSample>, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowState {
    Recording,
    Stopped,
    Resolved,
}

/// One speaker-identification recording. `deadline - started` is the
/// configured window length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityWindow {
    pub id: u32,
    pub started: Timestamp,
    pub deadline: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopped: Option<Timestamp>,
    pub state: WindowState,
}

impl IdentityWindow {
    /// End of the recorded audio: the stop time, or the deadline while
    /// still recording.
    pub fn end(&self) -> Timestamp {
        self.stopped.unwrap_or(self.deadline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<ParticipantId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Delay between submission and the result becoming available.
    pub latency_ms: u64,
}

impl VoiceOutcome {
    pub fn blank(latency_ms: u64) -> Self {
        Self {
            id: None,
            confidence: None,
            latency_ms,
        }
    }
}

pub trait SpeakerIdBackend {
    fn identify(&mut self, window: &IdentityWindow) -> Result<VoiceOutcome, BackendError>;
}

pub trait VisionBackend {
    fn sample_frame(&mut self, now: Timestamp) -> Result<Vec<FaceObservation>, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub response: u32,
    pub trigger: TurnTrigger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentId>,
    pub participants: Vec<String>,
    /// Label of the most recent user history entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latest_speaker: Option<String>,
    pub prompt: String,
    pub ts: Timestamp,
}

/// A streamed piece of model output, available `after_ms` past the request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedChunk {
    pub after_ms: u64,
    pub text: String,
}

pub trait LanguageModel {
    /// Chunks must have non-decreasing `after_ms`.
    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<TimedChunk>, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gesture {
    BrowRaise,
}

/// Commands to the robot body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Say {
        response: u32,
        sentence: u32,
        text: String,
    },
    Pause {
        response: u32,
        sentence: u32,
        spoken: String,
    },
    /// Continues a paused sentence; `text` is the unspoken remainder.
    Resume {
        response: u32,
        sentence: u32,
        text: String,
    },
    EndSpeech {
        response: u32,
        sentence: u32,
    },
    Gesture {
        gesture: Gesture,
    },
    Gaze {
        angle_deg: u16,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<ParticipantId>,
    },
    Led {
        on: bool,
    },
}

pub trait Embodiment {
    fn perform(&mut self, now: Timestamp, action: &Action);
}

/// Adapter that never produces anything; useful for capabilities a
/// deployment lacks.
#[derive(Debug, Default, Clone, Copy)]
pub struct Absent;

impl MicArray for Absent {
    fn read(&mut self, _now: Timestamp) -> Result<Option<DoaSample>, BackendError> {
        Ok(None)
    }
}

impl SpeakerIdBackend for Absent {
    fn identify(&mut self, _window: &IdentityWindow) -> Result<VoiceOutcome, BackendError> {
        Ok(VoiceOutcome::blank(0))
    }
}

impl VisionBackend for Absent {
    fn sample_frame(&mut self, _now: Timestamp) -> Result<Vec<FaceObservation>, BackendError> {
        Ok(Vec::new())
    }
}

impl LanguageModel for Absent {
    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<TimedChunk>, BackendError> {
        Err(BackendError::NoScriptedResponse(request.response))
    }
}

impl Embodiment for Absent {
    fn perform(&mut self, _now: Timestamp, _action: &Action) {}
}

/// Model stand-in that always answers the most recent speaker with a short
/// follow-up question, streamed in two chunks.
#[derive(Debug, Clone)]
pub struct StubModel {
    pub first_chunk_ms: u64,
    pub chunk_gap_ms: u64,
}

impl Default for StubModel {
    fn default() -> Self {
        Self {
            first_chunk_ms: 760,
            chunk_gap_ms: 120,
        }
    }
}

impl LanguageModel for StubModel {
    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<TimedChunk>, BackendError> {
        let addressee = request
            .latest_speaker
            .as_deref()
            .filter(|name| request.participants.iter().any(|p| p == name))
            .or_else(|| request.participants.first().map(String::as_str));
        let header = match addressee {
            Some(name) => format!("Addressee: {name}; Response: "),
            None => String::new(),
        };
        let greeting = match addressee {
            Some(name) => format!("That is interesting, {name}."),
            None => "That is interesting.".to_owned(),
        };
        Ok(vec![
            TimedChunk {
                after_ms: self.first_chunk_ms,
                text: format!("{header}{greeting}"),
            },
            TimedChunk {
                after_ms: self.first_chunk_ms + self.chunk_gap_ms,
                text: " What do you think about it?".to_owned(),
            },
        ])
    }
}
