//! Diarisation: records identification windows around turn switches and
//! binds transcribed segments to enrolled identities.
//!
//! Invariants: at most one window is recording; a window records for at
//! most `diar_window_ms`; each segment receives at most one voice binding.

use std::collections::BTreeSet;

use crate::backend::{IdentityWindow, WindowState};
use crate::config::EngineConfig;
use crate::effect::{Effect, Effects};
use crate::message::{Message, SpeakerBinding, VoiceIdResult};
use crate::types::{
    Enrolment, IdSource, ParticipantId, SegmentId, SwitchKind, Timestamp, TranscriptSegment, TurnSwitch,
};

#[derive(Debug, Clone)]
struct Window {
    info: IdentityWindow,
    /// `Some(None)` once resolved as blank.
    outcome: Option<Option<(ParticipantId, Option<f64>)>>,
    resolved_at: Option<Timestamp>,
    waiting: Vec<SegmentId>,
}

#[derive(Debug, Clone)]
pub struct Diarisation {
    cfg: EngineConfig,
    enrolment: Enrolment,
    windows: Vec<Window>,
    recording: Option<usize>,
    bound: BTreeSet<SegmentId>,
}

impl Diarisation {
    pub fn new(cfg: EngineConfig, enrolment: Enrolment) -> Self {
        Self {
            cfg,
            enrolment,
            windows: Vec::new(),
            recording: None,
            bound: BTreeSet::new(),
        }
    }

    pub fn recording(&self) -> Option<&IdentityWindow> {
        self.recording.map(|i| &self.windows[i].info)
    }

    pub fn windows(&self) -> impl Iterator<Item = &IdentityWindow> {
        self.windows.iter().map(|w| &w.info)
    }

    pub fn on_switch(&mut self, sw: &TurnSwitch, now: Timestamp, out: &mut Effects) {
        match sw.kind {
            SwitchKind::RobotToUser => {
                if self.recording.is_none() {
                    self.start(now, out);
                }
            }
            SwitchKind::UserUser => {
                if let Some(i) = self.recording {
                    if self.windows[i].info.started == now {
                        return;
                    }
                    self.stop(now, out);
                }
                self.start(now, out);
            }
            SwitchKind::UserToRobot => {}
        }
    }

    pub fn on_deadline(&mut self, window: u32, now: Timestamp, out: &mut Effects) {
        if let Some(i) = self.recording {
            if self.windows[i].info.id == window {
                self.stop(now, out);
            }
        }
    }

    pub fn on_transcribed(&mut self, seg: &TranscriptSegment, now: Timestamp, out: &mut Effects) {
        if self.recording.is_some() {
            self.stop(now, out);
        }
        if self.bound.contains(&seg.id) {
            return;
        }
        match self.overlapping(seg) {
            Some(i) => match &self.windows[i].outcome {
                Some(outcome) => {
                    let outcome = outcome.clone();
                    self.bind(&seg.id, outcome, out);
                }
                None => self.windows[i].waiting.push(seg.id.clone()),
            },
            None => {
                // No window covers the segment: reuse a recent identity.
                let horizon = now - self.cfg.wait_any_identity_ms;
                let recent = self
                    .windows
                    .iter()
                    .filter(|w| w.resolved_at.is_some_and(|t| t >= horizon))
                    .filter_map(|w| w.outcome.clone().flatten().map(|o| (w.resolved_at, o)))
                    .max_by_key(|(t, _)| *t)
                    .map(|(_, o)| o);
                if recent.is_some() {
                    self.bind(&seg.id, recent, out);
                }
            }
        }
    }

    pub fn on_result(&mut self, res: &VoiceIdResult, now: Timestamp, out: &mut Effects) {
        let Some(i) = self.windows.iter().position(|w| w.info.id == res.window) else {
            return;
        };
        let outcome = match &res.id {
            Some(id) if self.enrolment.contains(id) => Some((id.clone(), res.confidence)),
            Some(id) => {
                tracing::warn!(%id, "voice identity not enrolled");
                None
            }
            None => None,
        };
        let w = &mut self.windows[i];
        w.info.state = WindowState::Resolved;
        w.outcome = Some(outcome.clone());
        w.resolved_at = Some(now);
        let waiting = std::mem::take(&mut w.waiting);
        for seg in waiting {
            self.bind(&seg, outcome.clone(), out);
        }
    }

    fn start(&mut self, now: Timestamp, out: &mut Effects) {
        let id = self.windows.len() as u32;
        let deadline = now + self.cfg.diar_window_ms;
        self.windows.push(Window {
            info: IdentityWindow {
                id,
                started: now,
                deadline,
                stopped: None,
                state: WindowState::Recording,
            },
            outcome: None,
            resolved_at: None,
            waiting: Vec::new(),
        });
        self.recording = Some(self.windows.len() - 1);
        out.push(Effect::Timer {
            at: deadline,
            msg: Message::WindowDeadline { window: id },
        });
    }

    fn stop(&mut self, now: Timestamp, out: &mut Effects) {
        let Some(i) = self.recording.take() else {
            return;
        };
        let w = &mut self.windows[i].info;
        w.stopped = Some(now.min(w.deadline));
        w.state = WindowState::Stopped;
        out.push(Effect::Identify(w.clone()));
    }

    /// Window with the largest positive overlap with the segment span,
    /// earliest first on ties.
    fn overlapping(&self, seg: &TranscriptSegment) -> Option<usize> {
        let mut best: Option<(usize, u64)> = None;
        for (i, w) in self.windows.iter().enumerate() {
            let lo = w.info.started.max(seg.start_ts);
            let hi = w.info.end().min(seg.end_ts);
            let overlap = hi.since(lo);
            if overlap > 0 && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((i, overlap));
            }
        }
        best.map(|(i, _)| i)
    }

    fn bind(&mut self, seg: &SegmentId, outcome: Option<(ParticipantId, Option<f64>)>, out: &mut Effects) {
        let Some((id, confidence)) = outcome else {
            return;
        };
        if !self.bound.insert(seg.clone()) {
            return;
        }
        out.push(Effect::Emit(Message::Speaker(SpeakerBinding {
            segment: seg.clone(),
            id,
            source: IdSource::Voice,
            confidence,
        })));
    }
}
