//! Event traces and truth files.
//!
//! A trace is JSON lines: one header, then one record per injected stimulus,
//! delivered bus event, robot action and backend draw, in occurrence order.
//! Field order is fixed by the type declarations so traces diff cleanly.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use trialogue_core::backend::Action;
use trialogue_core::config::EngineConfig;
use trialogue_core::{FaceObservation, Message, ParticipantId, Timestamp};

use crate::scenario::{GroundTruth, NoiseConfig, Participant, ScriptEvent};

pub const TRACE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub scenario: String,
    pub seed: u64,
    pub participants: Vec<Participant>,
    pub config: EngineConfig,
    pub noise: NoiseConfig,
}

/// A face actually in front of the camera when a frame was taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceTruth {
    pub id: ParticipantId,
    pub angle_deg: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum BackendCall {
    VoiceId {
        window: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truth: Option<ParticipantId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outcome: Option<ParticipantId>,
    },
    Frame {
        truth: Vec<FaceTruth>,
        observed: Vec<FaceObservation>,
    },
    Llm {
        response: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        turn_index: Option<u32>,
        chunks: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    /// A script event applied to the simulated world; `index` points into
    /// the scenario's `events`.
    Stimulus {
        seq: u64,
        ts: Timestamp,
        index: usize,
        event: ScriptEvent,
    },
    Event {
        seq: u64,
        ts: Timestamp,
        bus_seq: u64,
        message: Message,
    },
    Action {
        seq: u64,
        ts: Timestamp,
        action: Action,
    },
    Backend {
        seq: u64,
        ts: Timestamp,
        call: BackendCall,
    },
}

impl TraceRecord {
    pub fn ts(&self) -> Timestamp {
        match self {
            TraceRecord::Stimulus { ts, .. }
            | TraceRecord::Event { ts, .. }
            | TraceRecord::Action { ts, .. }
            | TraceRecord::Backend { ts, .. } => *ts,
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            TraceRecord::Stimulus { seq, .. }
            | TraceRecord::Event { seq, .. }
            | TraceRecord::Action { seq, .. }
            | TraceRecord::Backend { seq, .. } => *seq,
        }
    }

    pub fn message(&self) -> Option<&Message> {
        match self {
            TraceRecord::Event { message, .. } => Some(message),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported trace format {0}")]
    Format(u32),
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serialises");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialises"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (n, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: TraceHeader =
            serde_json::from_str(first).map_err(|source| TraceError::Parse { line: n + 1, source })?;
        if header.format != TRACE_FORMAT {
            return Err(TraceError::Format(header.format));
        }
        let records = lines
            .map(|(n, l)| serde_json::from_str(l).map_err(|source| TraceError::Parse { line: n + 1, source }))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, records })
    }

    pub fn events(&self) -> impl Iterator<Item = (Timestamp, &Message)> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Event { ts, message, .. } => Some((*ts, message)),
            _ => None,
        })
    }

    pub fn actions(&self) -> impl Iterator<Item = (Timestamp, &Action)> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Action { ts, action, .. } => Some((*ts, action)),
            _ => None,
        })
    }

    pub fn stimuli(&self) -> impl Iterator<Item = (Timestamp, &ScriptEvent)> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Stimulus { ts, event, .. } => Some((*ts, event)),
            _ => None,
        })
    }

    pub fn backend_calls(&self) -> impl Iterator<Item = (Timestamp, &BackendCall)> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Backend { ts, call, .. } => Some((*ts, call)),
            _ => None,
        })
    }

    /// Timestamp of the last record, or zero for an empty trace.
    pub fn end(&self) -> Timestamp {
        self.records.last().map_or(Timestamp::ZERO, TraceRecord::ts)
    }
}

/// Faces in front of the camera for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub ts: Timestamp,
    pub faces: Vec<FaceTruth>,
}

/// Everything the scorer compares a trace against: the scenario's
/// annotations plus the per-frame face truth produced while running.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthFile {
    pub scenario: String,
    pub segments: Vec<crate::scenario::SegmentTruth>,
    pub responses: Vec<crate::scenario::ResponseTruth>,
    #[serde(default)]
    pub frames: Vec<FrameTruth>,
}

impl TruthFile {
    pub fn new(scenario: impl Into<String>, truth: &GroundTruth, frames: Vec<FrameTruth>) -> Self {
        Self {
            scenario: scenario.into(),
            segments: truth.segments.clone(),
            responses: truth.responses.clone(),
            frames,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("truth serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
