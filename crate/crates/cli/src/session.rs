//! One gateway session: an engine fed by client messages.
//!
//! The gateway impersonates perfect sensors. A typed utterance becomes
//! speech from the participant's seat lasting one word-time per word,
//! followed by a transcription after the configured recogniser delay.
//! Outbound messages are translated one-to-one from bus events and robot
//! actions; nothing is invented on the wire.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use serde_json::Value;
use trialogue_core::backend::{Action, StubModel};
use trialogue_core::engine::{Backends, Engine, EngineSetup};
use trialogue_core::message::AsrResult;
use trialogue_core::{
    ClockMode, EngineConfig, Enrolment, EnrolmentRecord, HistorySource, Message, ParticipantId, Persona, SegmentId,
    Timestamp,
};
use trialogue_sim::world::{SimBackend, TraceLog, World};
use trialogue_sim::{NoiseConfig, Participant, TraceRecord};

use crate::wire::{ClientBody, ServerBody, SpeechEdge};

/// Shortest speech a typed utterance is given.
pub const MIN_UTTERANCE_MS: u64 = 500;

#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub noise: NoiseConfig,
    pub config: EngineConfig,
    pub persona: Persona,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pending {
    SpeechEnd(ParticipantId),
    Asr(AsrResult),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Snapshot {
    listening: bool,
    current_speaker: Option<String>,
    gaze_angle: Option<u16>,
}

struct Live {
    engine: Engine,
    world: Rc<RefCell<World>>,
    log: Rc<RefCell<TraceLog>>,
    /// Gateway-scheduled stimuli keyed by (due, insertion order).
    pending: BTreeMap<(Timestamp, u64), Pending>,
    next_pending: u64,
    segments: u64,
    /// Speech opened by `speech start` and not yet closed, by participant.
    holding: BTreeMap<ParticipantId, Timestamp>,
    /// Participants whose typed utterance is still being "spoken".
    uttering: BTreeMap<ParticipantId, Timestamp>,
    addressee: BTreeMap<u32, String>,
    snapshot: Snapshot,
}

pub struct Session {
    id: String,
    mode: ClockMode,
    opts: SessionOptions,
    seats: Vec<Participant>,
    live: Option<Live>,
}

impl Session {
    pub fn new(id: impl Into<String>, mode: ClockMode, opts: SessionOptions) -> Self {
        Self {
            id: id.into(),
            mode,
            opts,
            seats: Vec::new(),
            live: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn started(&self) -> bool {
        self.live.is_some()
    }

    pub fn now(&self) -> Timestamp {
        self.live.as_ref().map_or(Timestamp::ZERO, |l| l.engine.now())
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.opts.noise
    }

    /// Applies one client message; returns the immediate replies. Engine
    /// output is collected separately by [`Session::take_outbound`].
    pub fn handle(&mut self, body: ClientBody) -> Vec<ServerBody> {
        match self.try_handle(body) {
            Ok(replies) => replies,
            Err(message) => vec![ServerBody::error(message)],
        }
    }

    fn try_handle(&mut self, body: ClientBody) -> Result<Vec<ServerBody>, String> {
        match body {
            ClientBody::Join { name, angle_deg } => self.join(name, angle_deg),
            ClientBody::Config { noise } => {
                self.configure(noise)?;
                Ok(Vec::new())
            }
            ClientBody::Utterance {
                participant,
                text,
                facing_robot,
            } => {
                let (who, seat) = self.seat(&participant)?;
                if text.trim().is_empty() {
                    return Err("utterance text is empty".into());
                }
                self.start()?;
                let words = text.split_whitespace().count() as u64;
                let duration = (words * self.opts.config.ms_per_word).max(MIN_UTTERANCE_MS);
                let asr_delay = self.opts.noise.asr_delay_ms;
                let live = self.live.as_mut().expect("started");
                if self.mode == ClockMode::Wall {
                    live.engine.pump();
                }
                if live.uttering.contains_key(&who) {
                    return Err(format!("`{participant}` is still speaking"));
                }
                let now = live.engine.now();
                inject(
                    &mut live.engine,
                    Message::HeadPose {
                        angle_deg: seat,
                        facing_robot,
                    },
                    now,
                );
                let start = match live.holding.remove(&who) {
                    Some(start) => start,
                    None => {
                        live.world.borrow_mut().speech_start(&who, now);
                        now
                    }
                };
                let end = (start + duration).max(now);
                live.segments += 1;
                let asr = AsrResult {
                    id: SegmentId(format!("u{}", live.segments)),
                    text,
                    start_ts: start,
                    end_ts: end,
                    relative_speaker: None,
                };
                live.uttering.insert(who.clone(), end);
                live.schedule(end, Pending::SpeechEnd(who));
                live.schedule(end + asr_delay, Pending::Asr(asr));
                Ok(Vec::new())
            }
            ClientBody::Speech { participant, state } => {
                let (who, _) = self.seat(&participant)?;
                self.start()?;
                let live = self.live.as_mut().expect("started");
                if self.mode == ClockMode::Wall {
                    live.engine.pump();
                }
                let now = live.engine.now();
                if live.uttering.contains_key(&who) {
                    // A typed utterance owns the speech span until it ends.
                    return Ok(Vec::new());
                }
                match state {
                    SpeechEdge::Start if !live.holding.contains_key(&who) => {
                        live.world.borrow_mut().speech_start(&who, now);
                        live.holding.insert(who, now);
                    }
                    SpeechEdge::End if live.holding.remove(&who).is_some() => {
                        live.world.borrow_mut().speech_end(&who, now);
                    }
                    _ => {}
                }
                Ok(Vec::new())
            }
        }
    }

    fn join(&mut self, name: String, angle_deg: u16) -> Result<Vec<ServerBody>, String> {
        if self.started() {
            return Err("the conversation has started; join before anyone speaks".into());
        }
        if name.trim().is_empty() {
            return Err("participant name is empty".into());
        }
        if angle_deg >= 180 {
            return Err(format!("angle_deg {angle_deg} is outside the user region [0, 180)"));
        }
        if self.seats.iter().any(|p| p.name == name) {
            return Err(format!("participant `{name}` has already joined"));
        }
        self.seats.push(Participant {
            id: ParticipantId(name.clone()),
            name: name.clone(),
            angle_deg,
        });
        Ok(vec![ServerBody::Joined {
            participant: name,
            angle_deg,
        }])
    }

    fn configure(&mut self, overrides: serde_json::Map<String, Value>) -> Result<(), String> {
        let mut merged = serde_json::to_value(&self.opts.noise).expect("noise serialises");
        let obj = merged.as_object_mut().expect("noise is an object");
        for (k, v) in overrides {
            obj.insert(k, v);
        }
        let noise: NoiseConfig = serde_json::from_value(merged).map_err(|e| format!("invalid noise override: {e}"))?;
        check_noise(&noise)?;
        if let Some(live) = &self.live {
            live.world.borrow_mut().set_noise(noise.clone());
        }
        self.opts.noise = noise;
        Ok(())
    }

    fn seat(&self, name: &str) -> Result<(ParticipantId, u16), String> {
        self.seats
            .iter()
            .find(|p| p.name == name)
            .map(|p| (p.id.clone(), p.angle_deg))
            .ok_or_else(|| format!("unknown participant `{name}`"))
    }

    fn start(&mut self) -> Result<(), String> {
        if self.live.is_some() {
            return Ok(());
        }
        let log = Rc::new(RefCell::new(TraceLog::default()));
        let world = Rc::new(RefCell::new(World::live(
            &self.seats,
            self.opts.noise.clone(),
            Rc::clone(&log),
        )));
        let sim = SimBackend(Rc::clone(&world));
        let backends = Backends {
            mic: Box::new(sim.clone()),
            speaker_id: Box::new(sim.clone()),
            vision: Box::new(sim.clone()),
            llm: Box::new(StubModel {
                first_chunk_ms: self.opts.noise.llm_delay_ms_per_chunk,
                ..StubModel::default()
            }),
            embodiment: Box::new(sim),
        };
        let setup = EngineSetup {
            config: self.opts.config.clone(),
            persona: self.opts.persona.clone(),
            enrolment: Enrolment::new(
                self.seats
                    .iter()
                    .map(|p| EnrolmentRecord::new(p.id.0.clone(), p.name.clone())),
            ),
            ..EngineSetup::default()
        };
        let mut engine =
            Engine::new(setup, backends, self.mode).map_err(|e| format!("engine rejected its configuration: {e}"))?;
        {
            let log = Rc::clone(&log);
            engine.tap(move |ev| {
                let mut log = log.borrow_mut();
                log.now = ev.ts;
                let seq = log.next_seq();
                log.records.push(TraceRecord::Event {
                    seq,
                    ts: ev.ts,
                    bus_seq: ev.seq,
                    message: ev.payload.clone(),
                });
            });
        }
        self.live = Some(Live {
            engine,
            world,
            log,
            pending: BTreeMap::new(),
            next_pending: 0,
            segments: 0,
            holding: BTreeMap::new(),
            uttering: BTreeMap::new(),
            addressee: BTreeMap::new(),
            snapshot: Snapshot {
                listening: true,
                current_speaker: None,
                gaze_angle: None,
            },
        });
        Ok(())
    }

    /// Virtual clock only: runs the session up to `target`, applying
    /// gateway-scheduled stimuli at their due times.
    pub fn advance_to(&mut self, target: Timestamp) {
        assert_eq!(self.mode, ClockMode::Virtual, "advance_to drives the virtual clock");
        let Some(live) = self.live.as_mut() else { return };
        while let Some((&(due, n), _)) = live.pending.first_key_value() {
            if due > target {
                break;
            }
            if due > live.engine.now() {
                live.engine.run_until(due - 1).expect("virtual clock");
            }
            let p = live.pending.remove(&(due, n)).expect("present");
            live.apply(p, due);
        }
        if target > live.engine.now() {
            live.engine.run_until(target).expect("virtual clock");
        }
    }

    /// Wall clock only: delivers everything due now.
    pub fn pump(&mut self) {
        let Some(live) = self.live.as_mut() else { return };
        live.engine.pump();
        loop {
            let now = live.engine.now();
            let Some((&(due, n), _)) = live.pending.first_key_value() else {
                break;
            };
            if due > now {
                break;
            }
            let p = live.pending.remove(&(due, n)).expect("present");
            live.apply(p, now);
            live.engine.pump();
        }
    }

    /// Translates everything the engine did since the last call.
    pub fn take_outbound(&mut self) -> Vec<ServerBody> {
        let Some(live) = self.live.as_mut() else {
            return Vec::new();
        };
        let records = std::mem::take(&mut live.log.borrow_mut().records);
        let mut out = Vec::new();
        for r in records {
            match r {
                TraceRecord::Event { message, .. } => live.translate(message, &mut out),
                TraceRecord::Action {
                    ts,
                    action: Action::Say { response, text, .. } | Action::Resume { response, text, .. },
                    ..
                } => out.push(ServerBody::RobotSay {
                    text,
                    addressee: live.addressee.get(&response).cloned(),
                    onset_ms: ts.0,
                }),
                _ => {}
            }
        }
        out
    }
}

impl Live {
    fn schedule(&mut self, due: Timestamp, p: Pending) {
        self.next_pending += 1;
        self.pending.insert((due, self.next_pending), p);
    }

    fn apply(&mut self, p: Pending, now: Timestamp) {
        match p {
            Pending::SpeechEnd(who) => {
                self.world.borrow_mut().speech_end(&who, now);
                self.uttering.remove(&who);
            }
            Pending::Asr(asr) => inject(&mut self.engine, Message::AsrResult(asr), now),
        }
    }

    fn translate(&mut self, message: Message, out: &mut Vec<ServerBody>) {
        match message {
            Message::Addressee { response, id } => {
                self.addressee.insert(response, id.0);
                return;
            }
            Message::Turn(d) => {
                out.push(ServerBody::Turn { trigger: d.trigger });
                return;
            }
            Message::History(h) if h.source == HistorySource::User => {
                out.push(ServerBody::Transcript {
                    participant: h.participant.map_or(h.speaker_label, |p| p.0),
                    text: h.text,
                });
                return;
            }
            // One state snapshot per state-bearing event.
            Message::SpeechState(s) => self.snapshot.listening = s.listening,
            Message::FaceId { id } => self.snapshot.current_speaker = Some(id.0),
            Message::FacePosition { deg } => self.snapshot.gaze_angle = Some(deg),
            _ => return,
        }
        out.push(ServerBody::State {
            listening: self.snapshot.listening,
            current_speaker: self.snapshot.current_speaker.clone(),
            gaze_angle: self.snapshot.gaze_angle,
        });
    }
}

fn inject(engine: &mut Engine, msg: Message, ts: Timestamp) {
    if let Err(err) = engine.inject(msg, ts) {
        tracing::error!(%err, "stimulus rejected");
    }
}

fn check_noise(n: &NoiseConfig) -> Result<(), String> {
    for (name, p) in [
        ("voice_id_blank_p", n.voice_id_blank_p),
        ("voice_id_wrong_p", n.voice_id_wrong_p),
        ("face_blank_p", n.face_blank_p),
        ("face_wrong_p", n.face_wrong_p),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("{name} must be a probability, got {p}"));
        }
    }
    if n.voice_id_blank_p + n.voice_id_wrong_p > 1.0 || n.face_blank_p + n.face_wrong_p > 1.0 {
        return Err("blank and wrong probabilities of one source must sum to at most 1".into());
    }
    Ok(())
}
