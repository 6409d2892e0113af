//! Scenario documents: seated participants, a timeline of stimuli, canned
//! model responses, noise settings and ground-truth annotations.
//!
//! Documents are JSON. Loading checks the schema first (with a field path
//! and line/column on failure) and then every cross-field invariant.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;
use trialogue_core::config::{EngineConfig, Persona};
use trialogue_core::{Enrolment, EnrolmentRecord, ParticipantId, SegmentId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participant {
    pub id: ParticipantId,
    pub name: String,
    /// Seat direction in the DOA frame; also where the face is seen.
    pub angle_deg: u16,
}

/// A face placed in a scripted camera frame. Without an angle the face is
/// at its owner's seat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceSpec {
    pub id: ParticipantId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    SpeechStart,
    SpeechEnd,
    /// Final transcription. The segment runs from the start of the actor's
    /// speech span (or the previous result in that span) to this event.
    AsrFinal {
        text: String,
        relative_id: Option<String>,
        segment: Option<SegmentId>,
    },
    Gaze {
        facing_robot: bool,
    },
    /// Replaces the set of faces visible to the camera from now on.
    FaceFrame {
        faces: Vec<FaceSpec>,
    },
    /// Exact DOA reading, bypassing the seat model and jitter.
    DoaSample {
        angle_deg: u16,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SpeechStart => "speech_start",
            EventKind::SpeechEnd => "speech_end",
            EventKind::AsrFinal { .. } => "asr_final",
            EventKind::Gaze { .. } => "gaze",
            EventKind::FaceFrame { .. } => "face_frame",
            EventKind::DoaSample { .. } => "doa_sample",
        }
    }

    fn needs_actor(&self) -> bool {
        matches!(
            self,
            EventKind::SpeechStart | EventKind::SpeechEnd | EventKind::AsrFinal { .. } | EventKind::Gaze { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEvent {
    pub t_ms: u64,
    pub actor: Option<ParticipantId>,
    pub kind: EventKind,
}

/// On-disk shape of a script event: `{t_ms, kind, actor, payload}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    t_ms: u64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actor: Option<ParticipantId>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    payload: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AsrPayload {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relative_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segment: Option<SegmentId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GazePayload {
    facing_robot: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FramePayload {
    faces: Vec<FaceSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DoaPayload {
    angle_deg: u16,
}

fn payload<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, String> {
    serde_json::from_value(v).map_err(|e| format!("payload: {e}"))
}

impl TryFrom<RawEvent> for ScriptEvent {
    type Error = String;

    fn try_from(raw: RawEvent) -> Result<Self, String> {
        let kind = match raw.kind.as_str() {
            "speech_start" | "speech_end" => {
                if !raw.payload.is_null() {
                    return Err(format!("payload: `{}` takes no payload", raw.kind));
                }
                if raw.kind == "speech_start" {
                    EventKind::SpeechStart
                } else {
                    EventKind::SpeechEnd
                }
            }
            "asr_final" => {
                let p: AsrPayload = payload(raw.payload)?;
                EventKind::AsrFinal {
                    text: p.text,
                    relative_id: p.relative_id,
                    segment: p.segment,
                }
            }
            "gaze" => {
                let p: GazePayload = payload(raw.payload)?;
                EventKind::Gaze {
                    facing_robot: p.facing_robot,
                }
            }
            "face_frame" => {
                let p: FramePayload = payload(raw.payload)?;
                EventKind::FaceFrame { faces: p.faces }
            }
            "doa_sample" => {
                let p: DoaPayload = payload(raw.payload)?;
                EventKind::DoaSample { angle_deg: p.angle_deg }
            }
            other => {
                return Err(format!(
                    "kind: unknown event kind `{other}`, expected one of speech_start, \
                     speech_end, asr_final, gaze, face_frame, doa_sample"
                ))
            }
        };
        Ok(ScriptEvent {
            t_ms: raw.t_ms,
            actor: raw.actor,
            kind,
        })
    }
}

impl From<&ScriptEvent> for RawEvent {
    fn from(e: &ScriptEvent) -> Self {
        let payload = match &e.kind {
            EventKind::SpeechStart | EventKind::SpeechEnd => Ok(Value::Null),
            EventKind::AsrFinal {
                text,
                relative_id,
                segment,
            } => serde_json::to_value(AsrPayload {
                text: text.clone(),
                relative_id: relative_id.clone(),
                segment: segment.clone(),
            }),
            EventKind::Gaze { facing_robot } => serde_json::to_value(GazePayload {
                facing_robot: *facing_robot,
            }),
            EventKind::FaceFrame { faces } => serde_json::to_value(FramePayload { faces: faces.clone() }),
            EventKind::DoaSample { angle_deg } => serde_json::to_value(DoaPayload { angle_deg: *angle_deg }),
        }
        .expect("payloads serialise");
        RawEvent {
            t_ms: e.t_ms,
            kind: e.kind.name().to_owned(),
            actor: e.actor.clone(),
            payload,
        }
    }
}

impl Serialize for ScriptEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawEvent::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScriptEvent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawEvent::deserialize(d)?;
        ScriptEvent::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// One scripted model answer, streamed chunk by chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannedResponse {
    pub turn_index: u32,
    pub chunks: Vec<String>,
    /// Prepended verbatim to the first chunk; may be deliberately malformed.
    #[serde(default)]
    pub addressee_header: String,
}

impl CannedResponse {
    /// The full text the model streams, header included.
    pub fn full_text(&self) -> String {
        let mut s = self.addressee_header.clone();
        for c in &self.chunks {
            s.push_str(c);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub voice_id_blank_p: f64,
    pub voice_id_wrong_p: f64,
    pub face_blank_p: f64,
    pub face_wrong_p: f64,
    /// Half-width of the uniform jitter added to seat-derived DOA samples.
    pub doa_jitter_deg: u16,
    pub asr_delay_ms: u64,
    pub llm_delay_ms_per_chunk: u64,
    /// Time from submitting an identification window to its result.
    pub voice_id_latency_ms: u64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            voice_id_blank_p: 0.0,
            voice_id_wrong_p: 0.0,
            face_blank_p: 0.0,
            face_wrong_p: 0.0,
            doa_jitter_deg: 0,
            asr_delay_ms: 200,
            llm_delay_ms_per_chunk: 760,
            voice_id_latency_ms: 300,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless(&self) -> bool {
        self.voice_id_blank_p == 0.0
            && self.voice_id_wrong_p == 0.0
            && self.face_blank_p == 0.0
            && self.face_wrong_p == 0.0
            && self.doa_jitter_deg == 0
    }
}

/// Intended addressee of a robot response: one participant, or everyone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntendedAddressee {
    Participant(ParticipantId),
    Inclusive,
}

impl fmt::Display for IntendedAddressee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntendedAddressee::Participant(p) => f.write_str(p.as_str()),
            IntendedAddressee::Inclusive => f.write_str("inclusive"),
        }
    }
}

impl Serialize for IntendedAddressee {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IntendedAddressee {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == "inclusive" {
            IntendedAddressee::Inclusive
        } else {
            IntendedAddressee::Participant(ParticipantId(s))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentTruth {
    pub segment: SegmentId,
    pub speaker: ParticipantId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseTruth {
    pub turn_index: u32,
    pub addressee: IntendedAddressee,
    /// For inclusive responses: the annotator confirmed both users were
    /// addressed even though the header named one of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub both_addressed: Option<bool>,
    /// Whether the response kept to the user's conversational goal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_coherent: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruth {
    pub segments: Vec<SegmentTruth>,
    pub responses: Vec<ResponseTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    #[serde(default = "default_id")]
    pub id: String,
    /// Permits seats closer than the switch threshold.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub violates_assumptions: bool,
    /// The robot opens the conversation at t = 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub opening: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<Persona>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<EngineConfig>,
    pub participants: Vec<Participant>,
    pub events: Vec<ScriptEvent>,
    #[serde(default)]
    pub responses: Vec<CannedResponse>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub ground_truth: GroundTruth,
}

fn default_id() -> String {
    "scenario".to_owned()
}

/// A transcription as the simulator will deliver it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedSegment {
    pub id: SegmentId,
    pub actor: ParticipantId,
    pub text: String,
    pub relative_id: Option<String>,
    pub start_ms: u64,
    pub end_ms: u64,
    /// Index of the `asr_final` event in `events`.
    pub event_index: usize,
}

/// Closed speech interval of one participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpeechSpan {
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at `{path}` (line {line}, column {column}): {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("events[{index}] at {t_ms} ms comes after an event at {prev_ms} ms; events must be sorted")]
    UnsortedEvents { index: usize, t_ms: u64, prev_ms: u64 },
    #[error("events[{index}]: actor `{actor}` is not an enrolled participant")]
    UnenrolledActor { index: usize, actor: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

pub fn load_scenario(text: &str) -> Result<ScenarioScript, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let script: ScenarioScript = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        ScenarioError::Schema {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    script.validate()?;
    Ok(script)
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioScript, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}

fn check_probability(field: &str, p: f64) -> Result<(), ScenarioError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("noise.{field}"), format!("{p} is not a probability")));
    }
    Ok(())
}

impl ScenarioScript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn engine_config(&self) -> EngineConfig {
        self.config.clone().unwrap_or_default()
    }

    pub fn persona(&self) -> Persona {
        self.persona.clone().unwrap_or_default()
    }

    pub fn enrolment(&self) -> Enrolment {
        Enrolment::new(
            self.participants
                .iter()
                .map(|p| EnrolmentRecord::new(p.id.as_str(), p.name.clone())),
        )
    }

    pub fn participant(&self, id: &ParticipantId) -> Option<&Participant> {
        self.participants.iter().find(|p| &p.id == id)
    }

    pub fn response(&self, turn_index: u32) -> Option<&CannedResponse> {
        self.responses.iter().find(|r| r.turn_index == turn_index)
    }

    /// Transcriptions in script order. Only meaningful on a validated script.
    pub fn segments(&self) -> Vec<ScriptedSegment> {
        let mut open: HashMap<&ParticipantId, u64> = HashMap::new();
        let mut last_end: HashMap<&ParticipantId, u64> = HashMap::new();
        // Start of the next segment within an open span.
        let mut cursor: HashMap<&ParticipantId, u64> = HashMap::new();
        let mut out = Vec::new();
        for (i, e) in self.events.iter().enumerate() {
            let Some(actor) = e.actor.as_ref() else {
                continue;
            };
            match &e.kind {
                EventKind::SpeechStart => {
                    open.insert(actor, e.t_ms);
                    cursor.insert(actor, e.t_ms);
                }
                EventKind::SpeechEnd => {
                    open.remove(actor);
                    last_end.insert(actor, e.t_ms);
                }
                EventKind::AsrFinal {
                    text,
                    relative_id,
                    segment,
                } => {
                    let start = cursor.get(actor).copied().unwrap_or(e.t_ms);
                    cursor.insert(actor, e.t_ms);
                    let n = out.len() + 1;
                    out.push(ScriptedSegment {
                        id: segment.clone().unwrap_or_else(|| SegmentId(format!("s{n}"))),
                        actor: actor.clone(),
                        text: text.clone(),
                        relative_id: relative_id.clone(),
                        start_ms: start,
                        end_ms: e.t_ms,
                        event_index: i,
                    });
                }
                _ => {}
            }
        }
        out
    }

    /// Closed speech spans per participant, in start order.
    pub fn speech_spans(&self) -> BTreeMap<ParticipantId, Vec<SpeechSpan>> {
        let mut open: HashMap<&ParticipantId, u64> = HashMap::new();
        let mut spans: BTreeMap<ParticipantId, Vec<SpeechSpan>> = BTreeMap::new();
        for e in &self.events {
            let Some(actor) = e.actor.as_ref() else {
                continue;
            };
            match e.kind {
                EventKind::SpeechStart => {
                    open.insert(actor, e.t_ms);
                }
                EventKind::SpeechEnd => {
                    if let Some(start) = open.remove(actor) {
                        spans.entry(actor.clone()).or_default().push(SpeechSpan {
                            start_ms: start,
                            end_ms: e.t_ms,
                        });
                    }
                }
                _ => {}
            }
        }
        spans
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.validate_participants()?;
        self.validate_events()?;
        self.validate_noise()?;
        self.validate_responses()?;
        self.validate_truth()?;
        if let Some(cfg) = &self.config {
            cfg.validate().map_err(|e| invalid("config", e.to_string()))?;
        }
        Ok(())
    }

    fn validate_participants(&self) -> Result<(), ScenarioError> {
        if self.participants.is_empty() {
            return Err(invalid("participants", "at least one participant is required"));
        }
        let min_gap = self.engine_config().user_switch_deg;
        let mut ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for (i, p) in self.participants.iter().enumerate() {
            if !ids.insert(&p.id) {
                return Err(invalid(
                    format!("participants[{i}].id"),
                    format!("duplicate id `{}`", p.id),
                ));
            }
            if !names.insert(&p.name) {
                return Err(invalid(
                    format!("participants[{i}].name"),
                    format!("duplicate name `{}`", p.name),
                ));
            }
            if p.angle_deg >= 180 {
                return Err(invalid(
                    format!("participants[{i}].angle_deg"),
                    format!("{}° is outside the user region [0, 180)", p.angle_deg),
                ));
            }
            if self.violates_assumptions {
                continue;
            }
            for (j, q) in self.participants[..i].iter().enumerate() {
                let gap = p.angle_deg.abs_diff(q.angle_deg);
                if gap < min_gap {
                    return Err(invalid(
                        format!("participants[{i}].angle_deg"),
                        format!(
                            "seated {gap}° from participants[{j}]; users are assumed at least \
                             {min_gap}° apart (set `violates_assumptions` to allow this)"
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_events(&self) -> Result<(), ScenarioError> {
        let enrolled: BTreeSet<&ParticipantId> = self.participants.iter().map(|p| &p.id).collect();
        let mut prev = 0;
        let mut open: HashMap<&ParticipantId, u64> = HashMap::new();
        let mut last_end: HashMap<&ParticipantId, u64> = HashMap::new();
        let mut segment_ids = BTreeSet::new();
        let mut n_segments = 0usize;
        for (i, e) in self.events.iter().enumerate() {
            if e.t_ms < prev {
                return Err(ScenarioError::UnsortedEvents {
                    index: i,
                    t_ms: e.t_ms,
                    prev_ms: prev,
                });
            }
            prev = e.t_ms;
            if let Some(actor) = &e.actor {
                if !enrolled.contains(actor) {
                    return Err(ScenarioError::UnenrolledActor {
                        index: i,
                        actor: actor.to_string(),
                    });
                }
            } else if e.kind.needs_actor() {
                return Err(invalid(
                    format!("events[{i}].actor"),
                    format!("`{}` requires an actor", e.kind.name()),
                ));
            }
            let field = format!("events[{i}]");
            match &e.kind {
                EventKind::SpeechStart => {
                    let actor = e.actor.as_ref().expect("checked");
                    if open.insert(actor, e.t_ms).is_some() {
                        return Err(invalid(
                            field,
                            format!("`{actor}` starts speaking while already speaking"),
                        ));
                    }
                }
                EventKind::SpeechEnd => {
                    let actor = e.actor.as_ref().expect("checked");
                    if open.remove(actor).is_none() {
                        return Err(invalid(
                            field,
                            format!("`{actor}` stops speaking without having started"),
                        ));
                    }
                    last_end.insert(actor, e.t_ms);
                }
                EventKind::AsrFinal { text, segment, .. } => {
                    let actor = e.actor.as_ref().expect("checked");
                    let inside = open.contains_key(actor) || last_end.get(actor) == Some(&e.t_ms);
                    if !inside {
                        return Err(invalid(
                            field,
                            format!("asr_final at {} ms is outside any speech span of `{actor}`", e.t_ms),
                        ));
                    }
                    if text.trim().is_empty() {
                        return Err(invalid(
                            format!("events[{i}].payload.text"),
                            "transcription text is empty",
                        ));
                    }
                    n_segments += 1;
                    let id = segment.clone().unwrap_or_else(|| SegmentId(format!("s{n_segments}")));
                    if !segment_ids.insert(id.clone()) {
                        return Err(invalid(
                            format!("events[{i}].payload.segment"),
                            format!("duplicate segment id `{id}`"),
                        ));
                    }
                }
                EventKind::FaceFrame { faces } => {
                    for (k, f) in faces.iter().enumerate() {
                        if !enrolled.contains(&f.id) {
                            return Err(invalid(
                                format!("events[{i}].payload.faces[{k}].id"),
                                format!("`{}` is not an enrolled participant", f.id),
                            ));
                        }
                        if f.angle_deg.is_some_and(|a| a >= 180) {
                            return Err(invalid(
                                format!("events[{i}].payload.faces[{k}].angle_deg"),
                                "faces are only seen in the user region [0, 180)",
                            ));
                        }
                    }
                }
                EventKind::DoaSample { angle_deg } => {
                    if *angle_deg >= 360 {
                        return Err(invalid(
                            format!("events[{i}].payload.angle_deg"),
                            format!("{angle_deg}° is not a valid bearing"),
                        ));
                    }
                }
                EventKind::Gaze { .. } => {}
            }
        }
        if let Some((actor, start)) = open.iter().min_by_key(|(a, _)| a.as_str()) {
            return Err(invalid(
                "events",
                format!("speech of `{actor}` started at {start} ms is never ended"),
            ));
        }
        Ok(())
    }

    fn validate_noise(&self) -> Result<(), ScenarioError> {
        let n = &self.noise;
        check_probability("voice_id_blank_p", n.voice_id_blank_p)?;
        check_probability("voice_id_wrong_p", n.voice_id_wrong_p)?;
        check_probability("face_blank_p", n.face_blank_p)?;
        check_probability("face_wrong_p", n.face_wrong_p)?;
        if n.voice_id_blank_p + n.voice_id_wrong_p > 1.0 {
            return Err(invalid(
                "noise.voice_id_wrong_p",
                "voice blank and wrong probabilities sum above 1",
            ));
        }
        if n.face_blank_p + n.face_wrong_p > 1.0 {
            return Err(invalid(
                "noise.face_wrong_p",
                "face blank and wrong probabilities sum above 1",
            ));
        }
        Ok(())
    }

    fn validate_responses(&self) -> Result<(), ScenarioError> {
        let mut seen = BTreeSet::new();
        for (i, r) in self.responses.iter().enumerate() {
            if !seen.insert(r.turn_index) {
                return Err(invalid(
                    format!("responses[{i}].turn_index"),
                    format!("duplicate turn index {}", r.turn_index),
                ));
            }
        }
        Ok(())
    }

    fn validate_truth(&self) -> Result<(), ScenarioError> {
        let enrolled: BTreeSet<&ParticipantId> = self.participants.iter().map(|p| &p.id).collect();
        let mut by_segment: BTreeMap<&SegmentId, &ParticipantId> = BTreeMap::new();
        for (i, t) in self.ground_truth.segments.iter().enumerate() {
            if by_segment.insert(&t.segment, &t.speaker).is_some() {
                return Err(invalid(
                    format!("ground_truth.segments[{i}]"),
                    format!("ambiguous annotation: segment `{}` is annotated twice", t.segment),
                ));
            }
            if !enrolled.contains(&t.speaker) {
                return Err(invalid(
                    format!("ground_truth.segments[{i}].speaker"),
                    format!("`{}` is not an enrolled participant", t.speaker),
                ));
            }
        }
        for seg in self.segments() {
            if !by_segment.contains_key(&seg.id) {
                return Err(invalid(
                    "ground_truth.segments",
                    format!("no speaker annotation for segment `{}`", seg.id),
                ));
            }
        }
        let mut by_turn = BTreeSet::new();
        for (i, t) in self.ground_truth.responses.iter().enumerate() {
            if !by_turn.insert(t.turn_index) {
                return Err(invalid(
                    format!("ground_truth.responses[{i}]"),
                    format!("ambiguous annotation: turn {} is annotated twice", t.turn_index),
                ));
            }
            if let IntendedAddressee::Participant(p) = &t.addressee {
                if !enrolled.contains(p) {
                    return Err(invalid(
                        format!("ground_truth.responses[{i}].addressee"),
                        format!("`{p}` is neither an enrolled participant nor \"inclusive\""),
                    ));
                }
            }
        }
        for r in &self.responses {
            if !by_turn.contains(&r.turn_index) {
                return Err(invalid(
                    "ground_truth.responses",
                    format!("no addressee annotation for response turn {}", r.turn_index),
                ));
            }
        }
        Ok(())
    }
}
