//! Conversation manager: history with deferred speaker labels, prompt
//! assembly, single-flight generation and streamed sentence publication.
//!
//! Robot history entries come only from `spoken-text`, so the history holds
//! what was actually said, not what was generated.

pub mod prompt;
pub mod stream;

use std::collections::{BTreeMap, BTreeSet};

use crate::backend::GenerationRequest;
use crate::config::{EngineConfig, Persona};
use crate::effect::{Effect, Effects};
use crate::message::{LabelStage, LlmChunk, Message, RobotText, SpeakerBinding, SpokenText};
use crate::types::{
    Enrolment, FaceObservation, HistoryEntry, HistorySource, LabelQuality, ParticipantId, SegmentId, Timestamp,
    TranscriptSegment, TurnDecision,
};

use self::prompt::{build_prompt, PromptContext};
use self::stream::{match_participant, Header, ResponseStream};

pub const GENERIC_LABEL: &str = "user";

/// What each enrolled participant has said, kept across sessions when the
/// store is handed to the next engine.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryStore {
    utterances: BTreeMap<ParticipantId, Vec<String>>,
}

impl MemoryStore {
    pub fn remember(&mut self, id: &ParticipantId, text: &str) {
        self.utterances.entry(id.clone()).or_default().push(text.to_owned());
    }

    pub fn recall(&self, id: &ParticipantId) -> &[String] {
        self.utterances.get(id).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone)]
struct PendingLabel {
    index: usize,
    arrived: Timestamp,
    relative: Option<String>,
}

#[derive(Debug, Clone)]
struct InFlight {
    response: u32,
    stream: ResponseStream,
    participants: Vec<String>,
    addressee: Option<ParticipantId>,
    next_sentence: u32,
}

#[derive(Debug, Clone)]
pub struct ConversationManager {
    cfg: EngineConfig,
    persona: Persona,
    enrolment: Enrolment,
    history: Vec<HistoryEntry>,
    pending: BTreeMap<SegmentId, PendingLabel>,
    recognised: BTreeSet<ParticipantId>,
    held: Option<TurnDecision>,
    in_flight: Option<InFlight>,
    next_response: u32,
    memory: MemoryStore,
}

impl ConversationManager {
    pub fn new(cfg: EngineConfig, persona: Persona, enrolment: Enrolment) -> Self {
        Self::with_memory(cfg, persona, enrolment, MemoryStore::default())
    }

    pub fn with_memory(cfg: EngineConfig, persona: Persona, enrolment: Enrolment, memory: MemoryStore) -> Self {
        Self {
            cfg,
            persona,
            enrolment,
            history: Vec::new(),
            pending: BTreeMap::new(),
            recognised: BTreeSet::new(),
            held: None,
            in_flight: None,
            next_response: 0,
            memory,
        }
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn generating(&self) -> bool {
        self.in_flight.is_some()
    }

    pub fn pending_labels(&self) -> usize {
        self.pending.len()
    }

    /// Display names of participants recognised so far, in enrolment order.
    pub fn participants(&self) -> Vec<String> {
        self.enrolment
            .iter()
            .filter(|r| self.recognised.contains(&r.absolute_id))
            .map(|r| r.display_name.clone())
            .collect()
    }

    /// History window sent to the model.
    pub fn prompt_context(&self) -> PromptContext {
        let skip = self
            .history
            .iter()
            .filter(|e| e.quality.is_some() || e.source == HistorySource::Robot)
            .count()
            .saturating_sub(self.cfg.history_limit);
        PromptContext {
            persona: self.persona.clone(),
            participants: self.participants(),
            history: self
                .history
                .iter()
                .filter(|e| e.quality.is_some() || e.source == HistorySource::Robot)
                .skip(skip)
                .cloned()
                .collect(),
        }
    }

    pub fn on_transcribed(&mut self, seg: &TranscriptSegment, now: Timestamp, out: &mut Effects) {
        let index = self.history.len();
        self.history.push(HistoryEntry {
            speaker_label: String::new(),
            text: seg.text.clone(),
            ts: now,
            source: HistorySource::User,
            segment: Some(seg.id.clone()),
            participant: None,
            quality: None,
        });
        if let Some(id) = &seg.resolved_speaker {
            if let Some(name) = self.enrolment.display_name(id).map(str::to_owned) {
                self.finalize(index, name, Some(id.clone()), LabelQuality::Absolute, now, out);
                return;
            }
        }
        self.pending.insert(
            seg.id.clone(),
            PendingLabel {
                index,
                arrived: now,
                relative: seg.relative_speaker.clone(),
            },
        );
        out.push(Effect::Timer {
            at: now + self.cfg.wait_diarisation_ms,
            msg: Message::LabelDue {
                segment: seg.id.clone(),
                stage: LabelStage::Relative,
            },
        });
    }

    /// First identity to arrive for a pending segment sets its label.
    pub fn on_speaker(&mut self, binding: &SpeakerBinding, now: Timestamp, out: &mut Effects) {
        if !self.enrolment.contains(&binding.id) {
            return;
        }
        self.recognised.insert(binding.id.clone());
        if let Some(p) = self.pending.remove(&binding.segment) {
            let name = self
                .enrolment
                .display_name(&binding.id)
                .unwrap_or(binding.id.as_str())
                .to_owned();
            self.finalize(
                p.index,
                name,
                Some(binding.id.clone()),
                LabelQuality::Absolute,
                now,
                out,
            );
        }
    }

    pub fn on_users(&mut self, faces: &[FaceObservation]) {
        for f in faces {
            if self.enrolment.contains(&f.id) {
                self.recognised.insert(f.id.clone());
            }
        }
    }

    pub fn on_label_due(&mut self, segment: &SegmentId, stage: LabelStage, now: Timestamp, out: &mut Effects) {
        let Some(p) = self.pending.get(segment).cloned() else {
            return;
        };
        match (stage, p.relative) {
            (LabelStage::Relative, Some(rel)) => {
                self.pending.remove(segment);
                self.finalize(p.index, rel, None, LabelQuality::Relative, now, out);
            }
            (LabelStage::Relative, None) => out.push(Effect::Timer {
                at: p.arrived + self.cfg.wait_any_identity_ms,
                msg: Message::LabelDue {
                    segment: segment.clone(),
                    stage: LabelStage::Generic,
                },
            }),
            (LabelStage::Generic, _) => {
                self.pending.remove(segment);
                self.finalize(p.index, GENERIC_LABEL.to_owned(), None, LabelQuality::Generic, now, out);
            }
        }
    }

    fn finalize(
        &mut self,
        index: usize,
        label: String,
        participant: Option<ParticipantId>,
        quality: LabelQuality,
        now: Timestamp,
        out: &mut Effects,
    ) {
        let entry = &mut self.history[index];
        entry.speaker_label = label;
        entry.participant = participant;
        entry.quality = Some(quality);
        if let Some(id) = &entry.participant {
            self.memory.remember(id, &entry.text);
        }
        out.push(Effect::Emit(Message::History(entry.clone())));
        if self.pending.is_empty() {
            if let Some(decision) = self.held.take() {
                self.issue(&decision, now, out);
            }
        }
    }

    /// A take-turn request while one is in flight is dropped; one arriving
    /// while labels are unsettled waits for them.
    pub fn on_turn(&mut self, decision: &TurnDecision, now: Timestamp, out: &mut Effects) {
        if !decision.take_turn {
            return;
        }
        if self.in_flight.is_some() {
            tracing::debug!("generation in flight, dropping turn");
            return;
        }
        if !self.pending.is_empty() {
            self.held = Some(decision.clone());
            return;
        }
        self.issue(decision, now, out);
    }

    fn issue(&mut self, decision: &TurnDecision, now: Timestamp, out: &mut Effects) {
        if self.in_flight.is_some() {
            return;
        }
        let ctx = self.prompt_context();
        let response = self.next_response;
        self.next_response += 1;
        let latest_speaker = self
            .history
            .iter()
            .rev()
            .find(|e| e.source == HistorySource::User && e.quality.is_some())
            .map(|e| e.speaker_label.clone());
        let request = GenerationRequest {
            response,
            trigger: decision.trigger,
            segment: decision.last_text_ref.clone(),
            participants: ctx.participants.clone(),
            latest_speaker,
            prompt: build_prompt(&ctx),
            ts: now,
        };
        self.in_flight = Some(InFlight {
            response,
            stream: ResponseStream::new(&self.cfg.sentence_terminators),
            participants: ctx.participants,
            addressee: None,
            next_sentence: 0,
        });
        out.push(Effect::Emit(Message::LlmRequest(request.clone())));
        out.push(Effect::Generate(request));
    }

    pub fn on_chunk(&mut self, chunk: &LlmChunk, out: &mut Effects) {
        let Some(fl) = self.in_flight.as_mut() else {
            return;
        };
        if fl.response != chunk.response {
            return;
        }
        let mut parsed = fl.stream.push(&chunk.text);
        if chunk.last {
            let end = fl.stream.finish();
            parsed.header = parsed.header.or(end.header);
            parsed.sentences.extend(end.sentences);
        }
        if let Some(Header::Named(name)) = &parsed.header {
            let id = match_participant(name, &fl.participants)
                .and_then(|n| self.enrolment.by_name(n))
                .map(|r| r.absolute_id.clone());
            match id {
                Some(id) => {
                    fl.addressee = Some(id.clone());
                    out.push(Effect::Emit(Message::Addressee {
                        response: fl.response,
                        id,
                    }));
                }
                None => tracing::debug!(%name, "addressee not among recognised participants"),
            }
        }
        for text in parsed.sentences {
            out.push(Effect::Emit(Message::Text(RobotText {
                response: fl.response,
                sentence: fl.next_sentence,
                text,
                addressee: fl.addressee.clone(),
            })));
            fl.next_sentence += 1;
        }
        if chunk.last {
            self.in_flight = None;
        }
    }

    pub fn on_generation_error(&mut self, response: u32) {
        if self.in_flight.as_ref().is_some_and(|f| f.response == response) {
            self.in_flight = None;
        }
    }

    pub fn on_spoken(&mut self, spoken: &SpokenText, now: Timestamp, out: &mut Effects) {
        if spoken.text.is_empty() {
            return;
        }
        let entry = HistoryEntry {
            speaker_label: self.persona.robot_name.clone(),
            text: spoken.text.clone(),
            ts: now,
            source: HistorySource::Robot,
            segment: None,
            participant: None,
            quality: None,
        };
        self.history.push(entry.clone());
        out.push(Effect::Emit(Message::History(entry)));
    }
}
