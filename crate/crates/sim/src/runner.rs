//! Drives one engine through a scenario on the virtual clock.

use std::cell::RefCell;
use std::rc::Rc;

use trialogue_core::engine::{Backends, Engine, EngineSetup};
use trialogue_core::message::AsrResult;
use trialogue_core::{ClockMode, Message, Timestamp, TurnDecision, TurnTrigger};

use crate::scenario::{EventKind, ScenarioScript, ScriptedSegment};
use crate::trace::{BackendCall, FrameTruth, Trace, TraceHeader, TraceRecord, TruthFile, TRACE_FORMAT};
use crate::world::{SimBackend, TraceLog, World};

/// Safety stop for sessions that never settle, such as a user who keeps
/// talking over a paused robot forever.
pub const SETTLE_LIMIT_MS: u64 = 600_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub truth: TruthFile,
}

enum Stimulus<'a> {
    Script(usize),
    Asr(&'a ScriptedSegment),
}

/// Runs with the scenario's own seed.
pub fn run(script: &ScenarioScript) -> RunOutput {
    run_with_seed(script, script.noise.seed)
}

/// Runs a validated script to completion: every stimulus is applied, then
/// the clock advances until only periodic ticks remain.
pub fn run_with_seed(script: &ScenarioScript, seed: u64) -> RunOutput {
    let config = script.engine_config();
    let log = Rc::new(RefCell::new(TraceLog::default()));
    let world = Rc::new(RefCell::new(World::new(script, seed, Rc::clone(&log))));
    let backend = SimBackend(Rc::clone(&world));
    let backends = Backends {
        mic: Box::new(backend.clone()),
        speaker_id: Box::new(backend.clone()),
        vision: Box::new(backend.clone()),
        llm: Box::new(backend.clone()),
        embodiment: Box::new(backend),
    };
    let setup = EngineSetup {
        config: config.clone(),
        persona: script.persona(),
        enrolment: script.enrolment(),
        ..EngineSetup::default()
    };
    let mut engine =
        Engine::new(setup, backends, ClockMode::Virtual).expect("validated scenarios carry a valid config");
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

    let segments = script.segments();
    let asr_delay = script.noise.asr_delay_ms;
    let mut timeline: Vec<(u64, usize, u8, Stimulus<'_>)> = script
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.t_ms, i, 0, Stimulus::Script(i)))
        .chain(
            segments
                .iter()
                .map(|s| (s.end_ms + asr_delay, s.event_index, 1, Stimulus::Asr(s))),
        )
        .collect();
    timeline.sort_by_key(|(t, i, sub, _)| (*t, *i, *sub));

    if script.opening {
        // The robot looks at the room before greeting, so the first frame's
        // faces are known when the opening is generated.
        engine.run_until(Timestamp::ZERO).expect("virtual clock");
        inject(
            &mut engine,
            Message::Turn(TurnDecision::take(TurnTrigger::Opening, None, Timestamp::ZERO)),
            Timestamp::ZERO,
        );
    }

    let mut last = 0;
    for (t, _, _, stimulus) in &timeline {
        let ts = Timestamp(*t);
        if ts > engine.now() {
            engine.run_until(ts - 1).expect("virtual clock");
        }
        last = *t;
        match stimulus {
            Stimulus::Script(i) => apply_script_event(script, *i, &world, &log, &mut engine),
            Stimulus::Asr(seg) => inject(
                &mut engine,
                Message::AsrResult(AsrResult {
                    id: seg.id.clone(),
                    text: seg.text.clone(),
                    start_ts: Timestamp(seg.start_ms),
                    end_ts: Timestamp(seg.end_ms),
                    relative_speaker: seg.relative_id.clone(),
                }),
                ts,
            ),
        }
    }

    let limit = Timestamp(last + SETTLE_LIMIT_MS);
    engine
        .run_until(Timestamp(last).max(engine.now()))
        .expect("virtual clock");
    while let Some(due) = engine.next_oneshot_deadline() {
        if due > limit {
            break;
        }
        engine.run_until(due).expect("virtual clock");
    }
    drop(engine);

    let records = std::mem::take(&mut log.borrow_mut().records);
    let frames = records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Backend {
                ts,
                call: BackendCall::Frame { truth, .. },
                ..
            } => Some(FrameTruth {
                ts: *ts,
                faces: truth.clone(),
            }),
            _ => None,
        })
        .collect();
    let header = TraceHeader {
        format: TRACE_FORMAT,
        scenario: script.id.clone(),
        seed,
        participants: script.participants.clone(),
        config,
        noise: script.noise.clone(),
    };
    RunOutput {
        trace: Trace { header, records },
        truth: TruthFile::new(script.id.clone(), &script.ground_truth, frames),
    }
}

// Stimuli are applied in timestamp order, so rejection means a scheduling
// bug; the run carries on so the trace shows what happened.
fn inject(engine: &mut Engine, msg: Message, ts: Timestamp) {
    if let Err(err) = engine.inject(msg, ts) {
        tracing::error!(%err, "stimulus rejected");
    }
}

fn apply_script_event(
    script: &ScenarioScript,
    index: usize,
    world: &Rc<RefCell<World>>,
    log: &Rc<RefCell<TraceLog>>,
    engine: &mut Engine,
) {
    let event = &script.events[index];
    let ts = Timestamp(event.t_ms);
    {
        let mut log = log.borrow_mut();
        log.now = ts;
        let seq = log.next_seq();
        log.records.push(TraceRecord::Stimulus {
            seq,
            ts,
            index,
            event: event.clone(),
        });
    }
    let mut w = world.borrow_mut();
    match (&event.kind, &event.actor) {
        (EventKind::SpeechStart, Some(who)) => w.speech_start(who, ts),
        (EventKind::SpeechEnd, Some(who)) => w.speech_end(who, ts),
        (EventKind::Gaze { facing_robot }, Some(who)) => {
            let angle_deg = w.seat(who).expect("validated actor");
            drop(w);
            inject(
                engine,
                Message::HeadPose {
                    angle_deg,
                    facing_robot: *facing_robot,
                },
                ts,
            );
        }
        (EventKind::FaceFrame { faces }, _) => w.set_visible(faces.clone()),
        (EventKind::DoaSample { angle_deg }, _) => w.doa_sample(*angle_deg, ts),
        // Transcriptions are delivered by their own timeline entry.
        _ => {}
    }
}
