//! Bus payloads. Each variant belongs to exactly one topic, so the payload
//! type is determined by the topic name.

use serde::{Deserialize, Serialize};

use crate::backend::GenerationRequest;
use crate::bus::{Context, TimerId, Topic};
use crate::types::{
    FaceObservation, HistoryEntry, IdSource, ParticipantId, SegmentId, Timestamp, TranscriptSegment, TurnDecision,
    TurnSwitch,
};

pub mod topic {
    pub const USER_ANGLE: &str = "user-angle";
    pub const USER_USER_SWITCH: &str = "user-user-switch";
    pub const ROBOT_USER_SWITCH: &str = "robot-user-switch";
    pub const ASR_RESULT: &str = "asr-result";
    pub const TRANSCRIBED: &str = "transcribed";
    pub const SPEAKER: &str = "speaker";
    pub const USERS: &str = "users";
    pub const FACE_ID: &str = "face-id";
    pub const FACE_POSITION: &str = "face-position";
    pub const HEAD_POSE: &str = "head-pose";
    pub const TURN: &str = "turn";
    pub const ADDRESSEE: &str = "addressee";
    pub const TEXT: &str = "text";
    pub const SPOKEN_TEXT: &str = "spoken-text";
    pub const SPEECH_STATE: &str = "speech-state";
    pub const HISTORY: &str = "history";
    pub const LLM_CHUNK: &str = "llm-chunk";
    pub const VOICE_ID_RESULT: &str = "voice-id-result";
    pub const LLM_REQUEST: &str = "llm-request";
    pub const LLM_ERROR: &str = "llm-error";
    pub const DOA_TICK: &str = "tick.doa";
    pub const FRAME_TICK: &str = "tick.frame";
    pub const WINDOW_DEADLINE: &str = "timer.window-deadline";
    pub const LONG_PAUSE: &str = "timer.long-pause";
    pub const RESUME_CHECK: &str = "timer.resume";
    pub const SPEECH_DONE: &str = "timer.speech-done";
    pub const LABEL_DUE: &str = "timer.label";

    pub const ALL: [&str; 27] = [
        USER_ANGLE,
        USER_USER_SWITCH,
        ROBOT_USER_SWITCH,
        ASR_RESULT,
        TRANSCRIBED,
        SPEAKER,
        USERS,
        FACE_ID,
        FACE_POSITION,
        HEAD_POSE,
        TURN,
        ADDRESSEE,
        TEXT,
        SPOKEN_TEXT,
        SPEECH_STATE,
        HISTORY,
        LLM_CHUNK,
        VOICE_ID_RESULT,
        LLM_REQUEST,
        LLM_ERROR,
        DOA_TICK,
        FRAME_TICK,
        WINDOW_DEADLINE,
        LONG_PAUSE,
        RESUME_CHECK,
        SPEECH_DONE,
        LABEL_DUE,
    ];
}

/// Final result pushed by the speech-recognition backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrResult {
    pub id: SegmentId,
    pub text: String,
    pub start_ts: Timestamp,
    pub end_ts: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_speaker: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerBinding {
    pub segment: SegmentId,
    pub id: ParticipantId,
    pub source: IdSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// One sentence the robot should say.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotText {
    pub response: u32,
    pub sentence: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addressee: Option<ParticipantId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpokenText {
    pub response: u32,
    pub sentence: u32,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceState {
    Queued,
    Speaking,
    Paused,
    Finished,
    Abandoned,
    Suppressed,
}

/// Lifecycle change of a robot utterance, published by the output module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechStateChange {
    pub response: u32,
    pub sentence: u32,
    pub state: UtteranceState,
    pub listening: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmChunk {
    pub response: u32,
    pub index: u32,
    pub text: String,
    pub last: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceIdResult {
    pub window: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<ParticipantId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Which fallback a deferred speaker label has reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStage {
    Relative,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topic", content = "payload")]
pub enum Message {
    #[serde(rename = "user-angle")]
    UserAngle { deg: u16 },
    #[serde(rename = "user-user-switch")]
    UserUserSwitch(TurnSwitch),
    #[serde(rename = "robot-user-switch")]
    RobotUserSwitch(TurnSwitch),
    #[serde(rename = "asr-result")]
    AsrResult(AsrResult),
    #[serde(rename = "transcribed")]
    Transcribed(TranscriptSegment),
    #[serde(rename = "speaker")]
    Speaker(SpeakerBinding),
    #[serde(rename = "users")]
    Users { faces: Vec<FaceObservation> },
    #[serde(rename = "face-id")]
    FaceId { id: ParticipantId },
    #[serde(rename = "face-position")]
    FacePosition { deg: u16 },
    #[serde(rename = "head-pose")]
    HeadPose { angle_deg: u16, facing_robot: bool },
    #[serde(rename = "turn")]
    Turn(TurnDecision),
    #[serde(rename = "addressee")]
    Addressee { response: u32, id: ParticipantId },
    #[serde(rename = "text")]
    Text(RobotText),
    #[serde(rename = "spoken-text")]
    SpokenText(SpokenText),
    #[serde(rename = "speech-state")]
    SpeechState(SpeechStateChange),
    #[serde(rename = "history")]
    History(HistoryEntry),
    #[serde(rename = "llm-chunk")]
    LlmChunk(LlmChunk),
    #[serde(rename = "voice-id-result")]
    VoiceIdResult(VoiceIdResult),
    #[serde(rename = "llm-request")]
    LlmRequest(GenerationRequest),
    #[serde(rename = "llm-error")]
    LlmError { response: u32, message: String },
    #[serde(rename = "tick.doa")]
    DoaTick,
    #[serde(rename = "tick.frame")]
    FrameTick,
    #[serde(rename = "timer.window-deadline")]
    WindowDeadline { window: u32 },
    #[serde(rename = "timer.long-pause")]
    LongPauseDue { segment: SegmentId, token: u64 },
    #[serde(rename = "timer.resume")]
    ResumeCheck { token: u64 },
    #[serde(rename = "timer.speech-done")]
    SpeechDone { token: u64 },
    #[serde(rename = "timer.label")]
    LabelDue { segment: SegmentId, stage: LabelStage },
}

impl Message {
    pub fn topic(&self) -> Topic {
        use topic::*;
        match self {
            Message::UserAngle { .. } => USER_ANGLE,
            Message::UserUserSwitch(_) => USER_USER_SWITCH,
            Message::RobotUserSwitch(_) => ROBOT_USER_SWITCH,
            Message::AsrResult(_) => ASR_RESULT,
            Message::Transcribed(_) => TRANSCRIBED,
            Message::Speaker(_) => SPEAKER,
            Message::Users { .. } => USERS,
            Message::FaceId { .. } => FACE_ID,
            Message::FacePosition { .. } => FACE_POSITION,
            Message::HeadPose { .. } => HEAD_POSE,
            Message::Turn(_) => TURN,
            Message::Addressee { .. } => ADDRESSEE,
            Message::Text(_) => TEXT,
            Message::SpokenText(_) => SPOKEN_TEXT,
            Message::SpeechState(_) => SPEECH_STATE,
            Message::History(_) => HISTORY,
            Message::LlmChunk(_) => LLM_CHUNK,
            Message::VoiceIdResult(_) => VOICE_ID_RESULT,
            Message::LlmRequest(_) => LLM_REQUEST,
            Message::LlmError { .. } => LLM_ERROR,
            Message::DoaTick => DOA_TICK,
            Message::FrameTick => FRAME_TICK,
            Message::WindowDeadline { .. } => WINDOW_DEADLINE,
            Message::LongPauseDue { .. } => LONG_PAUSE,
            Message::ResumeCheck { .. } => RESUME_CHECK,
            Message::SpeechDone { .. } => SPEECH_DONE,
            Message::LabelDue { .. } => LABEL_DUE,
        }
    }

    /// Internal timer ticks, as opposed to inter-module messages.
    pub fn is_timer(&self) -> bool {
        self.topic().starts_with("tick.") || self.topic().starts_with("timer.")
    }
}

impl Context<'_, Message> {
    /// Publishes a message on its own topic at the current time.
    pub fn emit(&mut self, msg: Message) {
        let topic = msg.topic();
        if let Err(err) = self.publish(topic, msg) {
            tracing::error!(%err, "engine topic not registered");
        }
    }

    pub fn emit_all(&mut self, msgs: impl IntoIterator<Item = Message>) {
        for m in msgs {
            self.emit(m);
        }
    }

    pub fn timer_at(&mut self, deadline: Timestamp, msg: Message) -> Option<TimerId> {
        let topic = msg.topic();
        self.schedule_at(deadline, topic, msg)
            .map_err(|err| tracing::error!(%err, "engine topic not registered"))
            .ok()
    }
}
