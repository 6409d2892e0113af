//! The simulated room. One shared world state answers every backend
//! capability from the script and the noise streams, and appends each
//! backend draw and robot action to the trace log.

use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};
use std::rc::Rc;

use trialogue_core::backend::{
    Action, BackendError, Embodiment, GenerationRequest, IdentityWindow, LanguageModel, MicArray, SpeakerIdBackend,
    TimedChunk, VisionBackend, VoiceOutcome,
};
use trialogue_core::{DoaSample, FaceObservation, ParticipantId, Timestamp};

use crate::noise::{face_outcome, jitter, voice_outcome, NoiseStreams};
use crate::scenario::{CannedResponse, FaceSpec, NoiseConfig, Participant, ScenarioScript, SpeechSpan};
use crate::trace::{BackendCall, FaceTruth, TraceRecord};

/// Bearing reported while the robot itself is talking.
pub const ROBOT_VOICE_DEG: u16 = 270;

pub const FACE_CONFIDENCE: f64 = 0.9;
pub const VOICE_CONFIDENCE: f64 = 0.9;

/// Append-only record sink shared by the bus tap and the backends.
#[derive(Debug, Default)]
pub struct TraceLog {
    pub records: Vec<TraceRecord>,
    /// Timestamp of the event being dispatched.
    pub now: Timestamp,
    next_seq: u64,
}

impl TraceLog {
    pub fn next_seq(&mut self) -> u64 {
        self.next_seq += 1;
        self.next_seq
    }

    pub fn backend(&mut self, ts: Timestamp, call: BackendCall) {
        let seq = self.next_seq();
        self.records.push(TraceRecord::Backend { seq, ts, call });
    }
}

#[derive(Debug)]
pub struct World {
    seats: BTreeMap<ParticipantId, u16>,
    enrolled: Vec<ParticipantId>,
    noise: NoiseConfig,
    rng: NoiseStreams,
    spans: BTreeMap<ParticipantId, Vec<SpeechSpan>>,
    /// Open user speech, in start order.
    speaking: Vec<(ParticipantId, Timestamp)>,
    doa_samples: VecDeque<DoaSample>,
    visible: Option<Vec<FaceSpec>>,
    robot_speaking: bool,
    responses: Vec<CannedResponse>,
    /// Speech is not known in advance: spans are recorded as they close.
    live: bool,
    log: Rc<RefCell<TraceLog>>,
}

impl World {
    pub fn new(script: &ScenarioScript, seed: u64, log: Rc<RefCell<TraceLog>>) -> Self {
        Self {
            seats: script
                .participants
                .iter()
                .map(|p| (p.id.clone(), p.angle_deg))
                .collect(),
            enrolled: script.participants.iter().map(|p| p.id.clone()).collect(),
            noise: script.noise.clone(),
            rng: NoiseStreams::new(seed),
            spans: script.speech_spans(),
            speaking: Vec::new(),
            doa_samples: VecDeque::new(),
            visible: None,
            robot_speaking: false,
            responses: script.responses.clone(),
            live: false,
            log,
        }
    }

    /// A world driven by live input rather than a script: seats and noise
    /// only, no canned responses.
    pub fn live(participants: &[Participant], noise: NoiseConfig, log: Rc<RefCell<TraceLog>>) -> Self {
        let script = ScenarioScript {
            id: String::new(),
            violates_assumptions: true,
            opening: false,
            persona: None,
            config: None,
            participants: participants.to_vec(),
            events: Vec::new(),
            responses: Vec::new(),
            noise,
            ground_truth: Default::default(),
        };
        let seed = script.noise.seed;
        Self {
            live: true,
            ..Self::new(&script, seed, log)
        }
    }

    /// Swaps the error model; the random streams carry on where they were.
    pub fn set_noise(&mut self, noise: NoiseConfig) {
        self.noise = noise;
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn is_speaking(&self, who: &ParticipantId) -> bool {
        self.speaking.iter().any(|(p, _)| p == who)
    }

    pub fn seat(&self, id: &ParticipantId) -> Option<u16> {
        self.seats.get(id).copied()
    }

    pub fn robot_speaking(&self) -> bool {
        self.robot_speaking
    }

    pub fn speech_start(&mut self, who: &ParticipantId, t: Timestamp) {
        self.speaking.push((who.clone(), t));
    }

    pub fn speech_end(&mut self, who: &ParticipantId, t: Timestamp) {
        if self.live {
            for (_, start) in self.speaking.iter().filter(|(p, _)| p == who) {
                self.spans.entry(who.clone()).or_default().push(SpeechSpan {
                    start_ms: start.0,
                    end_ms: t.0,
                });
            }
        }
        self.speaking.retain(|(p, _)| p != who);
    }

    pub fn doa_sample(&mut self, angle_deg: u16, t: Timestamp) {
        self.doa_samples.push_back(DoaSample { angle_deg, ts: t });
    }

    pub fn set_visible(&mut self, faces: Vec<FaceSpec>) {
        self.visible = Some(faces);
    }

    /// Participant with the most speech inside `[from, to)`; ties go to the
    /// span that started first.
    pub fn dominant_speaker(&self, from: Timestamp, to: Timestamp) -> Option<ParticipantId> {
        let mut best: Option<(u64, u64, &ParticipantId)> = None;
        for who in &self.enrolled {
            let closed = self
                .spans
                .get(who)
                .into_iter()
                .flatten()
                .map(|s| (s.start_ms, s.end_ms));
            // In a scripted world open spans are already among the closed ones.
            let open = self
                .speaking
                .iter()
                .filter(|(p, _)| self.live && p == who)
                .map(|(_, start)| (start.0, u64::MAX));
            let mut total = 0;
            let mut first = u64::MAX;
            for (start, end) in closed.chain(open) {
                let lo = start.max(from.0);
                let hi = end.min(to.0);
                if hi > lo {
                    total += hi - lo;
                    first = first.min(start);
                }
            }
            if total == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((t, f, _)) => total > t || (total == t && first < f),
            };
            if better {
                best = Some((total, first, who));
            }
        }
        best.map(|(_, _, who)| who.clone())
    }

    fn faces_in_view(&self) -> Vec<FaceTruth> {
        match &self.visible {
            Some(faces) => faces
                .iter()
                .filter_map(|f| {
                    let angle = f.angle_deg.or_else(|| self.seat(&f.id))?;
                    Some(FaceTruth {
                        id: f.id.clone(),
                        angle_deg: angle,
                    })
                })
                .collect(),
            None => self
                .enrolled
                .iter()
                .map(|id| FaceTruth {
                    id: id.clone(),
                    angle_deg: self.seats[id],
                })
                .collect(),
        }
    }
}

/// Cloneable handle implementing every backend capability.
#[derive(Debug, Clone)]
pub struct SimBackend(pub Rc<RefCell<World>>);

impl MicArray for SimBackend {
    fn read(&mut self, now: Timestamp) -> Result<Option<DoaSample>, BackendError> {
        let w = &mut *self.0.borrow_mut();
        let mut explicit = None;
        while w.doa_samples.front().is_some_and(|s| s.ts <= now) {
            explicit = w.doa_samples.pop_front();
        }
        if let Some(s) = explicit {
            return Ok(Some(DoaSample {
                angle_deg: s.angle_deg,
                ts: now,
            }));
        }
        if let Some((who, _)) = w.speaking.last() {
            let seat = w.seats[who];
            let angle = jitter(seat, w.noise.doa_jitter_deg, &mut w.rng.doa);
            return Ok(Some(DoaSample {
                angle_deg: angle,
                ts: now,
            }));
        }
        if w.robot_speaking {
            return Ok(Some(DoaSample {
                angle_deg: ROBOT_VOICE_DEG,
                ts: now,
            }));
        }
        Ok(None)
    }
}

impl SpeakerIdBackend for SimBackend {
    fn identify(&mut self, window: &IdentityWindow) -> Result<VoiceOutcome, BackendError> {
        let w = &mut *self.0.borrow_mut();
        let truth = w.dominant_speaker(window.started, window.end());
        let outcome = voice_outcome(&w.noise, truth.as_ref(), &w.enrolled, &mut w.rng.voice);
        let mut log = w.log.borrow_mut();
        let now = log.now;
        log.backend(
            now,
            BackendCall::VoiceId {
                window: window.id,
                truth,
                outcome: outcome.clone(),
            },
        );
        Ok(VoiceOutcome {
            confidence: outcome.as_ref().map(|_| VOICE_CONFIDENCE),
            id: outcome,
            latency_ms: w.noise.voice_id_latency_ms,
        })
    }
}

impl VisionBackend for SimBackend {
    fn sample_frame(&mut self, now: Timestamp) -> Result<Vec<FaceObservation>, BackendError> {
        let w = &mut *self.0.borrow_mut();
        let truth = w.faces_in_view();
        let mut observed = Vec::with_capacity(truth.len());
        for face in &truth {
            if let Some(id) = face_outcome(&w.noise, &face.id, &w.enrolled, &mut w.rng.face) {
                observed.push(FaceObservation {
                    id,
                    angle_deg: face.angle_deg,
                    confidence: FACE_CONFIDENCE,
                    frame_ts: now,
                });
            }
        }
        w.log.borrow_mut().backend(
            now,
            BackendCall::Frame {
                truth,
                observed: observed.clone(),
            },
        );
        Ok(observed)
    }
}

impl LanguageModel for SimBackend {
    /// Answers request `k` with the response scripted for turn `k`; chunk
    /// `i` arrives `(i + 1)` chunk delays after the request.
    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<TimedChunk>, BackendError> {
        let w = &mut *self.0.borrow_mut();
        let canned = w.responses.iter().find(|r| r.turn_index == request.response).cloned();
        let mut chunks = Vec::new();
        if let Some(r) = &canned {
            let mut texts = r.chunks.clone();
            match texts.first_mut() {
                Some(first) => first.insert_str(0, &r.addressee_header),
                None if !r.addressee_header.is_empty() => texts.push(r.addressee_header.clone()),
                None => {}
            }
            let step = w.noise.llm_delay_ms_per_chunk;
            chunks = texts
                .into_iter()
                .enumerate()
                .map(|(i, text)| TimedChunk {
                    after_ms: (i as u64 + 1) * step,
                    text,
                })
                .collect();
        }
        w.log.borrow_mut().backend(
            request.ts,
            BackendCall::Llm {
                response: request.response,
                turn_index: canned.as_ref().map(|r| r.turn_index),
                chunks: chunks.len(),
            },
        );
        match canned {
            Some(_) => Ok(chunks),
            None => Err(BackendError::NoScriptedResponse(request.response)),
        }
    }
}

impl Embodiment for SimBackend {
    fn perform(&mut self, now: Timestamp, action: &Action) {
        let w = &mut *self.0.borrow_mut();
        match action {
            Action::Say { .. } | Action::Resume { .. } => w.robot_speaking = true,
            Action::Pause { .. } | Action::EndSpeech { .. } => w.robot_speaking = false,
            _ => {}
        }
        let mut log = w.log.borrow_mut();
        let seq = log.next_seq();
        log.records.push(TraceRecord::Action {
            seq,
            ts: now,
            action: action.clone(),
        });
    }
}
