//! Wires the modules onto one bus and applies their effects to backends.

use std::cell::{Ref, RefCell};
use std::rc::Rc;

use crate::awareness::SpeakerAwareness;
use crate::backend::{Absent, Embodiment, LanguageModel, MicArray, SpeakerIdBackend, VisionBackend};
use crate::bus::{Bus, BusError, ClockMode, Context, Event, Ingress, Subscription};
use crate::config::{ConfigError, EngineConfig, Persona};
use crate::conversation::{ConversationManager, MemoryStore};
use crate::diarisation::Diarisation;
use crate::effect::{Effect, Effects};
use crate::face_tracking::FaceTracking;
use crate::message::{topic, LlmChunk, Message, VoiceIdResult};
use crate::output::InteractionOutput;
use crate::transcription::Transcription;
use crate::turn_taking::TurnTaking;
use crate::types::{Enrolment, Timestamp};

pub struct Backends {
    pub mic: Box<dyn MicArray>,
    pub speaker_id: Box<dyn SpeakerIdBackend>,
    pub vision: Box<dyn VisionBackend>,
    pub llm: Box<dyn LanguageModel>,
    pub embodiment: Box<dyn Embodiment>,
}

impl Default for Backends {
    fn default() -> Self {
        Self {
            mic: Box::new(Absent),
            speaker_id: Box::new(Absent),
            vision: Box::new(Absent),
            llm: Box::new(Absent),
            embodiment: Box::new(Absent),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EngineSetup {
    pub config: EngineConfig,
    pub persona: Persona,
    pub enrolment: Enrolment,
    pub memory: MemoryStore,
}

type Shared<T> = Rc<RefCell<T>>;

fn shared<T>(v: T) -> Shared<T> {
    Rc::new(RefCell::new(v))
}

pub struct Engine {
    bus: Bus<Message>,
    config: EngineConfig,
    awareness: Shared<SpeakerAwareness>,
    transcription: Shared<Transcription>,
    diarisation: Shared<Diarisation>,
    faces: Shared<FaceTracking>,
    turns: Shared<TurnTaking>,
    output: Shared<InteractionOutput>,
    conversation: Shared<ConversationManager>,
}

/// Registers a handler that borrows one module, runs `f` and applies the
/// resulting effects once the module borrow is released.
macro_rules! on {
    ($bus:expr, $backends:expr, $topic:expr, $module:expr, |$m:ident, $ev:ident, $now:ident, $out:ident| $body:block) => {{
        let module = Rc::clone(&$module);
        let backends = Rc::clone(&$backends);
        $bus.subscribe($topic, move |$ev: &Event<Message>, ctx: &mut Context<'_, Message>| {
            let $now = ctx.now();
            #[allow(unused_mut)]
            let mut $out: Effects = Vec::new();
            {
                let mut guard = module.borrow_mut();
                let $m = &mut *guard;
                $body
            }
            apply(ctx, &backends, $out);
        })
        .expect("engine topics are registered");
    }};
}

impl Engine {
    pub fn new(setup: EngineSetup, backends: Backends, mode: ClockMode) -> Result<Self, ConfigError> {
        let cfg = setup.config.clone();
        cfg.validate()?;
        let mut bus = Bus::new(mode);
        bus.register_all(topic::ALL);

        let backends = shared(backends);
        let awareness = shared(SpeakerAwareness::new(cfg.clone()));
        let transcription = shared(Transcription::new());
        let diarisation = shared(Diarisation::new(cfg.clone(), setup.enrolment.clone()));
        let faces = shared(FaceTracking::new(cfg.clone(), setup.enrolment.clone()));
        let turns = shared(TurnTaking::new(cfg.clone()));
        let output = shared(InteractionOutput::new(cfg.clone()));
        let conversation = shared(ConversationManager::with_memory(
            cfg.clone(),
            setup.persona.clone(),
            setup.enrolment.clone(),
            setup.memory.clone(),
        ));

        {
            let backends_for_mic = Rc::clone(&backends);
            on!(bus, backends, topic::DOA_TICK, awareness, |a, _ev, now, out| {
                let sample = match backends_for_mic.borrow_mut().mic.read(now) {
                    Ok(s) => s,
                    Err(err) => {
                        tracing::warn!(%err, "microphone read failed");
                        None
                    }
                };
                out.extend(a.on_poll(sample, now).into_iter().map(Effect::Emit));
            });
        }
        {
            let backends_for_vision = Rc::clone(&backends);
            on!(bus, backends, topic::FRAME_TICK, faces, |f, _ev, now, out| {
                let frame = match backends_for_vision.borrow_mut().vision.sample_frame(now) {
                    Ok(obs) => obs,
                    Err(err) => {
                        tracing::warn!(%err, "camera frame unavailable");
                        Vec::new()
                    }
                };
                out.push(Effect::Emit(f.on_frame(frame, now)));
            });
        }
        on!(bus, backends, topic::ASR_RESULT, transcription, |t, ev, _now, out| {
            if let Message::AsrResult(raw) = &ev.payload {
                if let Some(seg) = t.on_result(raw) {
                    out.push(Effect::Emit(Message::Transcribed(seg)));
                }
            }
        });

        // Turn switches.
        on!(
            bus,
            backends,
            topic::ROBOT_USER_SWITCH,
            transcription,
            |t, ev, _now, _out| {
                if let Message::RobotUserSwitch(sw) = &ev.payload {
                    t.on_switch(sw);
                }
            }
        );
        for switch_topic in [topic::ROBOT_USER_SWITCH, topic::USER_USER_SWITCH] {
            on!(bus, backends, switch_topic, diarisation, |d, ev, now, out| {
                if let Message::RobotUserSwitch(sw) | Message::UserUserSwitch(sw) = &ev.payload {
                    d.on_switch(sw, now, &mut out);
                }
            });
            on!(bus, backends, switch_topic, faces, |f, ev, now, out| {
                if let Message::RobotUserSwitch(sw) | Message::UserUserSwitch(sw) = &ev.payload {
                    out.extend(f.on_switch(sw, now).into_iter().map(Effect::Emit));
                }
            });
            on!(bus, backends, switch_topic, turns, |t, ev, _now, _out| {
                if let Message::RobotUserSwitch(sw) | Message::UserUserSwitch(sw) = &ev.payload {
                    t.on_switch(sw);
                }
            });
            on!(bus, backends, switch_topic, output, |o, ev, now, out| {
                if let Message::RobotUserSwitch(sw) | Message::UserUserSwitch(sw) = &ev.payload {
                    o.on_switch(sw, now, &mut out);
                }
            });
        }

        on!(bus, backends, topic::USER_ANGLE, faces, |f, ev, now, out| {
            if let Message::UserAngle { deg } = ev.payload {
                out.extend(f.on_user_angle(deg, now).into_iter().map(Effect::Emit));
            }
        });
        on!(bus, backends, topic::USER_ANGLE, turns, |t, ev, now, out| {
            if let Message::UserAngle { deg } = ev.payload {
                t.on_user_angle(deg, now, &mut out);
            }
        });
        on!(bus, backends, topic::USER_ANGLE, output, |o, _ev, now, out| {
            o.on_user_angle(now, &mut out);
        });

        // Face tracking binds before diarisation so a face binding precedes
        // a voice binding delivered at the same instant.
        on!(bus, backends, topic::TRANSCRIBED, faces, |f, ev, _now, out| {
            if let Message::Transcribed(seg) = &ev.payload {
                out.extend(f.on_transcribed(seg).map(Effect::Emit));
            }
        });
        on!(bus, backends, topic::TRANSCRIBED, diarisation, |d, ev, now, out| {
            if let Message::Transcribed(seg) = &ev.payload {
                d.on_transcribed(seg, now, &mut out);
            }
        });
        on!(bus, backends, topic::TRANSCRIBED, turns, |t, ev, now, out| {
            if let Message::Transcribed(seg) = &ev.payload {
                t.on_transcribed(seg, now, &mut out);
            }
        });
        on!(bus, backends, topic::TRANSCRIBED, output, |o, ev, now, out| {
            if let Message::Transcribed(seg) = &ev.payload {
                o.on_transcribed(seg, now, &mut out);
            }
        });
        on!(bus, backends, topic::TRANSCRIBED, conversation, |c, ev, now, out| {
            if let Message::Transcribed(seg) = &ev.payload {
                c.on_transcribed(seg, now, &mut out);
            }
        });

        on!(bus, backends, topic::USERS, conversation, |c, ev, _now, _out| {
            if let Message::Users { faces } = &ev.payload {
                c.on_users(faces);
            }
        });
        on!(bus, backends, topic::SPEAKER, faces, |f, ev, _now, _out| {
            if let Message::Speaker(b) = &ev.payload {
                f.on_voice_binding(b);
            }
        });
        on!(bus, backends, topic::SPEAKER, conversation, |c, ev, now, out| {
            if let Message::Speaker(b) = &ev.payload {
                c.on_speaker(b, now, &mut out);
            }
        });
        on!(bus, backends, topic::FACE_ID, output, |o, ev, _now, _out| {
            if let Message::FaceId { id } = &ev.payload {
                o.on_face_id(id);
            }
        });
        on!(bus, backends, topic::FACE_POSITION, output, |o, ev, _now, out| {
            if let Message::FacePosition { deg } = ev.payload {
                o.on_face_position(deg, &mut out);
            }
        });
        on!(bus, backends, topic::HEAD_POSE, turns, |t, ev, _now, _out| {
            if let Message::HeadPose {
                angle_deg,
                facing_robot,
            } = ev.payload
            {
                t.on_head_pose(angle_deg, facing_robot);
            }
        });
        on!(bus, backends, topic::TURN, output, |o, ev, now, _out| {
            if let Message::Turn(d) = &ev.payload {
                o.on_turn(d.take_turn, now);
            }
        });
        on!(bus, backends, topic::TURN, conversation, |c, ev, now, out| {
            if let Message::Turn(d) = &ev.payload {
                c.on_turn(d, now, &mut out);
            }
        });
        on!(bus, backends, topic::ADDRESSEE, faces, |f, ev, _now, out| {
            if let Message::Addressee { id, .. } = &ev.payload {
                out.extend(f.on_addressee(id).into_iter().map(Effect::Emit));
            }
        });
        on!(bus, backends, topic::TEXT, output, |o, ev, now, out| {
            if let Message::Text(t) = &ev.payload {
                o.on_text(t, now, &mut out);
            }
        });
        on!(bus, backends, topic::SPOKEN_TEXT, conversation, |c, ev, now, out| {
            if let Message::SpokenText(s) = &ev.payload {
                c.on_spoken(s, now, &mut out);
            }
        });
        on!(bus, backends, topic::VOICE_ID_RESULT, diarisation, |d, ev, now, out| {
            if let Message::VoiceIdResult(r) = &ev.payload {
                d.on_result(r, now, &mut out);
            }
        });
        on!(bus, backends, topic::LLM_CHUNK, conversation, |c, ev, _now, out| {
            if let Message::LlmChunk(chunk) = &ev.payload {
                c.on_chunk(chunk, &mut out);
            }
        });
        on!(bus, backends, topic::LLM_ERROR, conversation, |c, ev, _now, _out| {
            if let Message::LlmError { response, .. } = &ev.payload {
                c.on_generation_error(*response);
            }
        });

        // Timers.
        on!(bus, backends, topic::WINDOW_DEADLINE, diarisation, |d, ev, now, out| {
            if let Message::WindowDeadline { window } = ev.payload {
                d.on_deadline(window, now, &mut out);
            }
        });
        on!(bus, backends, topic::LONG_PAUSE, turns, |t, ev, now, out| {
            if let Message::LongPauseDue { token, .. } = ev.payload {
                t.on_long_pause(token, now, &mut out);
            }
        });
        on!(bus, backends, topic::RESUME_CHECK, output, |o, ev, now, out| {
            if let Message::ResumeCheck { token } = ev.payload {
                o.on_resume_check(token, now, &mut out);
            }
        });
        on!(bus, backends, topic::SPEECH_DONE, output, |o, ev, now, out| {
            if let Message::SpeechDone { token } = ev.payload {
                o.on_speech_done(token, now, &mut out);
            }
        });
        on!(bus, backends, topic::LABEL_DUE, conversation, |c, ev, now, out| {
            if let Message::LabelDue { segment, stage } = &ev.payload {
                c.on_label_due(segment, *stage, now, &mut out);
            }
        });

        bus.schedule_every(
            Timestamp(cfg.doa_poll_ms),
            cfg.doa_poll_ms,
            topic::DOA_TICK,
            Message::DoaTick,
        )
        .expect("registered");
        bus.schedule_every(
            Timestamp::ZERO,
            cfg.face_frame_ms,
            topic::FRAME_TICK,
            Message::FrameTick,
        )
        .expect("registered");

        Ok(Self {
            bus,
            config: cfg,
            awareness,
            transcription,
            diarisation,
            faces,
            turns,
            output,
            conversation,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn now(&self) -> Timestamp {
        self.bus.now()
    }

    /// Publishes a stimulus from outside the dispatcher.
    pub fn inject(&mut self, msg: Message, ts: Timestamp) -> Result<u64, BusError> {
        self.bus.publish(msg.topic(), msg, ts)
    }

    pub fn ingress(&self) -> Ingress<Message> {
        self.bus.ingress()
    }

    pub fn tap<F>(&mut self, observer: F) -> Subscription
    where
        F: FnMut(&Event<Message>) + 'static,
    {
        self.bus.tap(observer)
    }

    pub fn run_until(&mut self, target: Timestamp) -> Result<usize, BusError> {
        self.bus.run_until(target)
    }

    pub fn advance(&mut self, delta_ms: u64) -> Result<usize, BusError> {
        self.bus.advance_clock(delta_ms)
    }

    pub fn pump(&mut self) -> usize {
        self.bus.pump()
    }

    pub fn next_deadline(&mut self) -> Option<Timestamp> {
        self.bus.next_deadline()
    }

    pub fn next_oneshot_deadline(&self) -> Option<Timestamp> {
        self.bus.next_oneshot_deadline()
    }

    pub fn bus_mut(&mut self) -> &mut Bus<Message> {
        &mut self.bus
    }

    pub fn awareness(&self) -> Ref<'_, SpeakerAwareness> {
        self.awareness.borrow()
    }

    pub fn transcription(&self) -> Ref<'_, Transcription> {
        self.transcription.borrow()
    }

    pub fn diarisation(&self) -> Ref<'_, Diarisation> {
        self.diarisation.borrow()
    }

    pub fn faces(&self) -> Ref<'_, FaceTracking> {
        self.faces.borrow()
    }

    pub fn turns(&self) -> Ref<'_, TurnTaking> {
        self.turns.borrow()
    }

    pub fn output(&self) -> Ref<'_, InteractionOutput> {
        self.output.borrow()
    }

    pub fn conversation(&self) -> Ref<'_, ConversationManager> {
        self.conversation.borrow()
    }
}

fn apply(ctx: &mut Context<'_, Message>, backends: &RefCell<Backends>, effects: Effects) {
    let now = ctx.now();
    for effect in effects {
        match effect {
            Effect::Emit(msg) => ctx.emit(msg),
            Effect::Timer { at, msg } => {
                ctx.timer_at(at, msg);
            }
            Effect::Act(action) => backends.borrow_mut().embodiment.perform(now, &action),
            Effect::Identify(window) => {
                let result = backends.borrow_mut().speaker_id.identify(&window);
                let (outcome, latency) = match result {
                    Ok(o) => {
                        let latency = o.latency_ms;
                        (
                            VoiceIdResult {
                                window: window.id,
                                id: o.id,
                                confidence: o.confidence,
                            },
                            latency,
                        )
                    }
                    Err(err) => {
                        tracing::warn!(%err, window = window.id, "speaker identification failed");
                        (
                            VoiceIdResult {
                                window: window.id,
                                id: None,
                                confidence: None,
                            },
                            0,
                        )
                    }
                };
                ctx.timer_at(now + latency, Message::VoiceIdResult(outcome));
            }
            Effect::Generate(request) => {
                let result = backends.borrow_mut().llm.generate(&request);
                match result {
                    Ok(chunks) if !chunks.is_empty() => {
                        let n = chunks.len();
                        for (i, c) in chunks.into_iter().enumerate() {
                            ctx.timer_at(
                                request.ts + c.after_ms,
                                Message::LlmChunk(LlmChunk {
                                    response: request.response,
                                    index: i as u32,
                                    text: c.text,
                                    last: i + 1 == n,
                                }),
                            );
                        }
                    }
                    Ok(_) => ctx.emit(Message::LlmChunk(LlmChunk {
                        response: request.response,
                        index: 0,
                        text: String::new(),
                        last: true,
                    })),
                    Err(err) => {
                        tracing::warn!(%err, response = request.response, "generation failed");
                        ctx.emit(Message::LlmError {
                            response: request.response,
                            message: err.to_string(),
                        });
                    }
                }
            }
        }
    }
}
