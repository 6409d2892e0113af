//! Domain types shared by every module of the engine.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// Milliseconds since session start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn millis(self) -> u64 {
        self.0
    }

    /// Elapsed milliseconds from `earlier` to `self`, saturating at zero.
    pub fn since(self, earlier: Timestamp) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<u64> for Timestamp {
    type Output = Timestamp;

    fn add(self, rhs: u64) -> Timestamp {
        Timestamp(self.0 + rhs)
    }
}

impl Sub<u64> for Timestamp {
    type Output = Timestamp;

    fn sub(self, rhs: u64) -> Timestamp {
        Timestamp(self.0.saturating_sub(rhs))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Absolute (enrolment) identity of a participant, stable across sessions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub String);

impl ParticipantId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ParticipantId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Identifier of one ASR result, assigned by the transcription backend.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub String);

impl SegmentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SegmentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// One direction-of-arrival reading. 0° is the robot's right, increasing
/// counter-clockwise; the robot's own voice arrives from [180, 360).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoaSample {
    pub angle_deg: u16,
    pub ts: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceClass {
    User,
    Robot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    UserUser,
    RobotToUser,
    UserToRobot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnSwitch {
    pub kind: SwitchKind,
    pub ts: Timestamp,
    /// Absent only for `UserToRobot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_angle_deg: Option<u16>,
}

/// One final ASR hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub id: SegmentId,
    pub text: String,
    pub start_ts: Timestamp,
    pub end_ts: Timestamp,
    /// Session-scoped label from the transcriber; not stable across sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_speaker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_speaker: Option<ParticipantId>,
}

/// A face recognised in one camera frame, mapped into the DOA frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub id: ParticipantId,
    pub angle_deg: u16,
    pub confidence: f64,
    pub frame_ts: Timestamp,
}

/// Where a segment→participant binding came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdSource {
    Voice,
    Face,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnTrigger {
    GazeHandoff,
    LongPause,
    /// The robot opens the conversation before anyone has spoken.
    Opening,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnDecision {
    pub take_turn: bool,
    pub trigger: TurnTrigger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_text_ref: Option<SegmentId>,
    pub ts: Timestamp,
}

impl TurnDecision {
    pub fn take(trigger: TurnTrigger, segment: Option<SegmentId>, ts: Timestamp) -> Self {
        debug_assert!(trigger != TurnTrigger::None);
        Self {
            take_turn: true,
            trigger,
            last_text_ref: segment,
            ts,
        }
    }

    pub fn yield_turn(segment: Option<SegmentId>, ts: Timestamp) -> Self {
        Self {
            take_turn: false,
            trigger: TurnTrigger::None,
            last_text_ref: segment,
            ts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistorySource {
    User,
    Robot,
}

/// How a user history entry's speaker label was obtained, from most to
/// least reliable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelQuality {
    Generic,
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub speaker_label: String,
    pub text: String,
    pub ts: Timestamp,
    pub source: HistorySource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<ParticipantId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<LabelQuality>,
}

/// Registered participant: voice and face prints live in the backends, only
/// opaque handles are kept here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrolmentRecord {
    pub absolute_id: ParticipantId,
    pub display_name: String,
    #[serde(default)]
    pub voiceprint_ref: String,
    #[serde(default)]
    pub faceprint_ref: String,
}

impl EnrolmentRecord {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            voiceprint_ref: format!("voice:{id}"),
            faceprint_ref: format!("face:{id}"),
            absolute_id: ParticipantId(id),
            display_name: name.into(),
        }
    }
}

/// Read-only set of enrolled participants shared by the identity modules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enrolment {
    records: Vec<EnrolmentRecord>,
}

impl Enrolment {
    pub fn new(records: impl IntoIterator<Item = EnrolmentRecord>) -> Self {
        let mut records: Vec<_> = records.into_iter().collect();
        records.sort_by(|a, b| a.absolute_id.cmp(&b.absolute_id));
        records.dedup_by(|a, b| a.absolute_id == b.absolute_id);
        Self { records }
    }

    pub fn insert(&mut self, record: EnrolmentRecord) -> bool {
        match self
            .records
            .binary_search_by(|r| r.absolute_id.cmp(&record.absolute_id))
        {
            Ok(_) => false,
            Err(pos) => {
                self.records.insert(pos, record);
                true
            }
        }
    }

    pub fn contains(&self, id: &ParticipantId) -> bool {
        self.get(id).is_some()
    }

    pub fn get(&self, id: &ParticipantId) -> Option<&EnrolmentRecord> {
        self.records
            .binary_search_by(|r| r.absolute_id.cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn display_name(&self, id: &ParticipantId) -> Option<&str> {
        self.get(id).map(|r| r.display_name.as_str())
    }

    pub fn by_name(&self, name: &str) -> Option<&EnrolmentRecord> {
        self.records.iter().find(|r| r.display_name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EnrolmentRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
