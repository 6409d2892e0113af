//! Timing and threshold constants shared by all modules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::SourceClass;

/// Engine-wide constants. Defaults are the values of the evaluated system;
/// every field can be overridden for experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Direction-of-arrival polling period.
    pub doa_poll_ms: u64,
    /// A user-region angle change strictly greater than this is a user-user switch.
    pub user_switch_deg: u16,
    /// Half-open interval `[start, end)` in degrees classified as the robot.
    pub robot_region: (u16, u16),
    /// Silence needed before a paused robot utterance resumes.
    pub resume_silence_ms: u64,
    /// Text is suppressed if an interruption happened less than this long ago.
    pub suppress_after_interrupt_ms: u64,
    /// Text is suppressed if a user spoke less than this long ago.
    pub suppress_after_speech_ms: u64,
    /// Length of a speaker-identification recording window.
    pub diar_window_ms: u64,
    /// Camera sampling period.
    pub face_frame_ms: u64,
    /// User-angle variations smaller than this do not re-run speaker fusion.
    pub doa_ignore_deg: u16,
    /// Extra wait for a voice identity before falling back to the ASR label.
    pub wait_diarisation_ms: u64,
    /// Total wait before a speaker with no label at all becomes "user".
    pub wait_any_identity_ms: u64,
    pub sentence_terminators: Vec<char>,
    /// Silence after a user segment after which the robot takes the floor.
    pub long_pause_ms: u64,
    /// Simulated text-to-speech rate.
    pub ms_per_word: u64,
    /// Face observations below this confidence are discarded.
    pub face_min_confidence: f64,
    /// Faces not seen for longer than this are excluded from fusion.
    pub face_stale_ms: u64,
    /// History entries sent to the language model.
    pub history_limit: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            doa_poll_ms: 100,
            user_switch_deg: 20,
            robot_region: (180, 360),
            resume_silence_ms: 1500,
            suppress_after_interrupt_ms: 2000,
            suppress_after_speech_ms: 1000,
            diar_window_ms: 3000,
            face_frame_ms: 2000,
            doa_ignore_deg: 30,
            wait_diarisation_ms: 800,
            wait_any_identity_ms: 2000,
            sentence_terminators: vec!['.', '!', '?'],
            long_pause_ms: 3000,
            ms_per_word: 330,
            face_min_confidence: 0.5,
            face_stale_ms: 6000,
            history_limit: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("duration `{0}` must be positive")]
    ZeroDuration(&'static str),
    #[error("user_switch_deg ({switch}) must be below doa_ignore_deg ({ignore})")]
    ThresholdOrder { switch: u16, ignore: u16 },
    #[error("robot region [{0}, {1}) must lie within [180, 360)")]
    RobotRegion(u16, u16),
    #[error("wait_diarisation_ms must not exceed wait_any_identity_ms")]
    WaitOrder,
    #[error("no sentence terminators configured")]
    NoTerminators,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let durations = [
            ("doa_poll_ms", self.doa_poll_ms),
            ("resume_silence_ms", self.resume_silence_ms),
            ("suppress_after_interrupt_ms", self.suppress_after_interrupt_ms),
            ("suppress_after_speech_ms", self.suppress_after_speech_ms),
            ("diar_window_ms", self.diar_window_ms),
            ("face_frame_ms", self.face_frame_ms),
            ("wait_diarisation_ms", self.wait_diarisation_ms),
            ("wait_any_identity_ms", self.wait_any_identity_ms),
            ("long_pause_ms", self.long_pause_ms),
            ("ms_per_word", self.ms_per_word),
            ("face_stale_ms", self.face_stale_ms),
        ];
        if let Some((name, _)) = durations.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::ZeroDuration(name));
        }
        if self.user_switch_deg >= self.doa_ignore_deg {
            return Err(ConfigError::ThresholdOrder {
                switch: self.user_switch_deg,
                ignore: self.doa_ignore_deg,
            });
        }
        let (lo, hi) = self.robot_region;
        // The user region is [0, 180); the robot region must not overlap it.
        if lo < 180 || hi > 360 || lo >= hi {
            return Err(ConfigError::RobotRegion(lo, hi));
        }
        if self.wait_diarisation_ms > self.wait_any_identity_ms {
            return Err(ConfigError::WaitOrder);
        }
        if self.sentence_terminators.is_empty() {
            return Err(ConfigError::NoTerminators);
        }
        Ok(())
    }

    /// Classifies an angle in `[0, 360)`. Angles outside the robot region
    /// and below 180° are users.
    pub fn classify(&self, angle_deg: u16) -> Option<SourceClass> {
        if angle_deg >= 360 {
            return None;
        }
        let (lo, hi) = self.robot_region;
        if angle_deg >= lo && angle_deg < hi {
            Some(SourceClass::Robot)
        } else if angle_deg < 180 {
            Some(SourceClass::User)
        } else {
            // Between 180 and a narrowed robot region: nobody sits there.
            None
        }
    }

    pub fn is_user_angle(&self, angle_deg: u16) -> bool {
        angle_deg < 180
    }
}

/// Persona and setting rendered into the language-model prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Persona {
    pub robot_name: String,
    pub language: String,
    pub location: String,
    /// Fixed rendering of the current date and time; live sessions set it
    /// from the wall clock.
    pub datetime: String,
}

impl Default for Persona {
    fn default() -> Self {
        Self {
            robot_name: "Furhat".to_owned(),
            language: "English".to_owned(),
            location: "Ghent".to_owned(),
            datetime: "Monday 13 May 2024, 14:00".to_owned(),
        }
    }
}
