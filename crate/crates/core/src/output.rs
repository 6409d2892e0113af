//! Interaction output: robot speech with barge-in handling, suppression
//! windows, gaze, listening indicator and feedback gesture.
//!
//! Speech is rendered at a fixed per-word rate on the bus clock. A pause
//! freezes the spoken prefix at the last fully rendered word; resuming
//! restarts from that word boundary, so prefix + remainder is always the
//! full sentence.

use std::collections::VecDeque;

use crate::backend::{Action, Gesture};
use crate::config::EngineConfig;
use crate::effect::{Effect, Effects};
use crate::message::{Message, RobotText, SpeechStateChange, SpokenText, UtteranceState};
use crate::types::{ParticipantId, SwitchKind, Timestamp, TranscriptSegment, TurnSwitch};

/// Byte offsets just past each whitespace-separated word.
pub fn word_ends(text: &str) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_word {
                ends.push(i);
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
    if in_word {
        ends.push(text.len());
    }
    ends
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotUtterance {
    pub response: u32,
    pub sentence: u32,
    pub full_text: String,
    pub addressee: Option<ParticipantId>,
    pub state: UtteranceState,
    pub enqueue_ts: Timestamp,
    pub onset_ts: Option<Timestamp>,
    pub end_ts: Option<Timestamp>,
    ends: Vec<usize>,
    /// Words rendered when the current run started.
    run_from: usize,
    run_start: Timestamp,
    /// Words fully rendered as of the last pause or completion.
    rendered: usize,
}

impl RobotUtterance {
    fn new(text: &RobotText, now: Timestamp) -> Self {
        Self {
            response: text.response,
            sentence: text.sentence,
            ends: word_ends(&text.text),
            full_text: text.text.clone(),
            addressee: text.addressee.clone(),
            state: UtteranceState::Queued,
            enqueue_ts: now,
            onset_ts: None,
            end_ts: None,
            run_from: 0,
            run_start: now,
            rendered: 0,
        }
    }

    pub fn word_count(&self) -> usize {
        self.ends.len()
    }

    /// Text rendered so far; always ends at a word boundary.
    pub fn spoken_prefix(&self) -> &str {
        match self.rendered {
            0 => "",
            n => &self.full_text[..self.ends[n - 1]],
        }
    }

    pub fn remainder(&self) -> &str {
        &self.full_text[self.spoken_prefix().len()..]
    }

    fn rendered_at(&self, now: Timestamp, ms_per_word: u64) -> usize {
        let done = (now.since(self.run_start) / ms_per_word) as usize;
        (self.run_from + done).min(self.word_count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Emitted,
    Queued,
    Suppressed,
}

#[derive(Debug, Clone)]
pub struct InteractionOutput {
    cfg: EngineConfig,
    active: Option<RobotUtterance>,
    queue: VecDeque<RobotUtterance>,
    listening: bool,
    gaze_angle: Option<u16>,
    gaze_target: Option<ParticipantId>,
    last_interrupt: Option<Timestamp>,
    last_user_speech: Option<Timestamp>,
    /// Time the robot last claimed the floor.
    floor_claim: Option<Timestamp>,
    paused_at: Option<Timestamp>,
    speech_token: u64,
    resume_token: u64,
}

impl InteractionOutput {
    pub fn new(cfg: EngineConfig) -> Self {
        Self {
            cfg,
            active: None,
            queue: VecDeque::new(),
            listening: true,
            gaze_angle: None,
            gaze_target: None,
            last_interrupt: None,
            last_user_speech: None,
            floor_claim: None,
            paused_at: None,
            speech_token: 0,
            resume_token: 0,
        }
    }

    pub fn listening(&self) -> bool {
        self.listening
    }

    pub fn gaze_angle(&self) -> Option<u16> {
        self.gaze_angle
    }

    pub fn active(&self) -> Option<&RobotUtterance> {
        self.active.as_ref()
    }

    pub fn is_speaking(&self) -> bool {
        self.active
            .as_ref()
            .is_some_and(|u| u.state == UtteranceState::Speaking)
    }

    pub fn last_interrupt(&self) -> Option<Timestamp> {
        self.last_interrupt
    }

    pub fn last_user_speech(&self) -> Option<Timestamp> {
        self.last_user_speech
    }

    /// True when new text must not be spoken at `now`. Boundary values are
    /// not suppressed. User speech older than the robot's latest floor claim
    /// is the speech that prompted the claim and does not count.
    pub fn is_suppressed(&self, now: Timestamp) -> bool {
        let interrupted = self
            .last_interrupt
            .is_some_and(|t| now.since(t) < self.cfg.suppress_after_interrupt_ms);
        let talking = self.last_user_speech.is_some_and(|t| {
            self.floor_claim.is_none_or(|claim| t > claim) && now.since(t) < self.cfg.suppress_after_speech_ms
        });
        interrupted || talking
    }

    pub fn on_turn(&mut self, take_turn: bool, now: Timestamp) {
        if take_turn {
            self.floor_claim = Some(now);
        }
    }

    pub fn on_text(&mut self, text: &RobotText, now: Timestamp, out: &mut Effects) -> EnqueueOutcome {
        let mut u = RobotUtterance::new(text, now);
        if self.is_suppressed(now) {
            u.state = UtteranceState::Suppressed;
            self.state_event(&u, out);
            return EnqueueOutcome::Suppressed;
        }
        if self.active.is_some() {
            self.state_event(&u, out);
            self.queue.push_back(u);
            return EnqueueOutcome::Queued;
        }
        self.start(u, now, out);
        EnqueueOutcome::Emitted
    }

    fn start(&mut self, mut u: RobotUtterance, now: Timestamp, out: &mut Effects) {
        u.state = UtteranceState::Speaking;
        u.onset_ts = Some(now);
        u.run_start = now;
        u.run_from = 0;
        self.set_listening(false, out);
        out.push(Effect::Act(Action::Say {
            response: u.response,
            sentence: u.sentence,
            text: u.full_text.clone(),
        }));
        self.arm_speech_done(&u, now, out);
        self.state_event(&u, out);
        self.active = Some(u);
    }

    fn arm_speech_done(&mut self, u: &RobotUtterance, now: Timestamp, out: &mut Effects) {
        self.speech_token += 1;
        let words = (u.word_count() - u.run_from) as u64;
        out.push(Effect::Timer {
            at: now + words * self.cfg.ms_per_word,
            msg: Message::SpeechDone {
                token: self.speech_token,
            },
        });
    }

    pub fn on_speech_done(&mut self, token: u64, now: Timestamp, out: &mut Effects) {
        if token != self.speech_token || !self.is_speaking() {
            return;
        }
        self.finish(now, out);
    }

    fn finish(&mut self, now: Timestamp, out: &mut Effects) {
        let Some(mut u) = self.active.take() else {
            return;
        };
        u.rendered = u.word_count();
        u.state = UtteranceState::Finished;
        u.end_ts = Some(now);
        out.push(Effect::Act(Action::EndSpeech {
            response: u.response,
            sentence: u.sentence,
        }));
        self.spoken(&u, out);
        self.paused_at = None;
        match self.queue.pop_front() {
            Some(next) => {
                self.state_event(&u, out);
                self.start(next, now, out);
            }
            None => {
                self.set_listening(true, out);
                self.state_event(&u, out);
            }
        }
    }

    /// Voice activity in the user region.
    pub fn on_user_angle(&mut self, now: Timestamp, out: &mut Effects) {
        self.on_user_activity(now, out);
    }

    pub fn on_switch(&mut self, sw: &TurnSwitch, now: Timestamp, out: &mut Effects) {
        match sw.kind {
            SwitchKind::RobotToUser | SwitchKind::UserUser => self.on_user_activity(now, out),
            SwitchKind::UserToRobot => {}
        }
    }

    fn on_user_activity(&mut self, now: Timestamp, out: &mut Effects) {
        self.last_user_speech = Some(self.last_user_speech.map_or(now, |t| t.max(now)));
        let Some(state) = self.active.as_ref().map(|u| u.state) else {
            return;
        };
        match state {
            UtteranceState::Speaking => {
                let u = self.active.as_mut().expect("active");
                u.rendered = u.rendered_at(now, self.cfg.ms_per_word);
                if u.rendered == u.word_count() {
                    // Everything was rendered; the user merely started after us.
                    self.finish(now, out);
                    return;
                }
                u.state = UtteranceState::Paused;
                self.speech_token += 1;
                self.last_interrupt = Some(now);
                self.paused_at = Some(now);
                let u = self.active.as_ref().expect("active").clone();
                out.push(Effect::Act(Action::Pause {
                    response: u.response,
                    sentence: u.sentence,
                    spoken: u.spoken_prefix().to_owned(),
                }));
                self.state_event(&u, out);
                self.arm_resume(now, out);
            }
            UtteranceState::Paused => self.arm_resume(now, out),
            _ => {}
        }
    }

    fn arm_resume(&mut self, now: Timestamp, out: &mut Effects) {
        self.resume_token += 1;
        out.push(Effect::Timer {
            at: now + self.cfg.resume_silence_ms,
            msg: Message::ResumeCheck {
                token: self.resume_token,
            },
        });
    }

    pub fn on_resume_check(&mut self, token: u64, now: Timestamp, out: &mut Effects) {
        if token != self.resume_token {
            return;
        }
        let Some(u) = self.active.as_mut() else {
            return;
        };
        if u.state != UtteranceState::Paused {
            return;
        }
        u.state = UtteranceState::Speaking;
        u.run_from = u.rendered;
        u.run_start = now;
        self.paused_at = None;
        let u = u.clone();
        out.push(Effect::Act(Action::Resume {
            response: u.response,
            sentence: u.sentence,
            text: u.remainder().to_owned(),
        }));
        self.arm_speech_done(&u, now, out);
        self.state_event(&u, out);
    }

    /// Feedback gesture, and abandonment of a paused utterance once the
    /// interrupting user has finished a segment of their own.
    pub fn on_transcribed(&mut self, seg: &TranscriptSegment, now: Timestamp, out: &mut Effects) {
        out.push(Effect::Act(Action::Gesture {
            gesture: Gesture::BrowRaise,
        }));
        self.last_user_speech = Some(self.last_user_speech.map_or(seg.end_ts, |t| t.max(seg.end_ts)));
        let Some(paused_at) = self.paused_at else {
            return;
        };
        if seg.end_ts <= paused_at {
            return;
        }
        let Some(mut u) = self.active.take() else {
            return;
        };
        u.state = UtteranceState::Abandoned;
        u.end_ts = Some(now);
        self.paused_at = None;
        self.resume_token += 1;
        out.push(Effect::Act(Action::EndSpeech {
            response: u.response,
            sentence: u.sentence,
        }));
        self.spoken(&u, out);
        self.set_listening(true, out);
        self.state_event(&u, out);
        for mut q in std::mem::take(&mut self.queue) {
            q.state = UtteranceState::Abandoned;
            self.state_event(&q, out);
        }
    }

    pub fn on_face_id(&mut self, id: &ParticipantId) {
        self.gaze_target = Some(id.clone());
    }

    pub fn on_face_position(&mut self, deg: u16, out: &mut Effects) {
        if !self.cfg.is_user_angle(deg) {
            tracing::warn!(deg, "gaze target outside user region");
            return;
        }
        if self.gaze_angle == Some(deg) {
            return;
        }
        self.gaze_angle = Some(deg);
        out.push(Effect::Act(Action::Gaze {
            angle_deg: deg,
            target: self.gaze_target.clone(),
        }));
    }

    fn spoken(&self, u: &RobotUtterance, out: &mut Effects) {
        let text = u.spoken_prefix();
        if text.is_empty() {
            return;
        }
        out.push(Effect::Emit(Message::SpokenText(SpokenText {
            response: u.response,
            sentence: u.sentence,
            text: text.to_owned(),
        })));
    }

    fn set_listening(&mut self, on: bool, out: &mut Effects) {
        if self.listening != on {
            self.listening = on;
            out.push(Effect::Act(Action::Led { on }));
        }
    }

    fn state_event(&self, u: &RobotUtterance, out: &mut Effects) {
        out.push(Effect::Emit(Message::SpeechState(SpeechStateChange {
            response: u.response,
            sentence: u.sentence,
            state: u.state,
            listening: self.listening,
        })));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effect::{actions, emitted, timers};
    use proptest::prelude::*;

    fn text(s: &str) -> RobotText {
        RobotText {
            response: 0,
            sentence: 0,
            text: s.into(),
            addressee: None,
        }
    }

    fn seg(end: u64) -> TranscriptSegment {
        TranscriptSegment {
            id: "s".into(),
            text: "hey".into(),
            start_ts: Timestamp(end - 500),
            end_ts: Timestamp(end),
            relative_speaker: None,
            resolved_speaker: None,
        }
    }

    fn spoken(out: &Effects) -> Vec<String> {
        emitted(out)
            .into_iter()
            .filter_map(|m| match m {
                Message::SpokenText(s) => Some(s.text.clone()),
                _ => None,
            })
            .collect()
    }

    fn resume_token(out: &Effects) -> u64 {
        timers(out)
            .into_iter()
            .rev()
            .find_map(|(_, m)| match m {
                Message::ResumeCheck { token } => Some(*token),
                _ => None,
            })
            .unwrap()
    }

    #[test]
    fn word_ends_skip_whitespace() {
        assert_eq!(word_ends("  The weather  is"), vec![5, 13, 17]);
        assert!(word_ends("   ").is_empty());
    }

    #[test]
    fn suppression_boundaries() {
        let mut o = InteractionOutput::new(EngineConfig::default());
        o.last_interrupt = Some(Timestamp(10000));
        assert!(o.is_suppressed(Timestamp(11500)));
        assert!(o.is_suppressed(Timestamp(11999)));
        assert!(!o.is_suppressed(Timestamp(12000)));
        assert!(!o.is_suppressed(Timestamp(12500)));

        let mut o = InteractionOutput::new(EngineConfig::default());
        o.last_user_speech = Some(Timestamp(10000));
        assert!(o.is_suppressed(Timestamp(10800)));
        assert!(o.is_suppressed(Timestamp(10999)));
        assert!(!o.is_suppressed(Timestamp(11000)));
        o.on_turn(true, Timestamp(10000));
        assert!(!o.is_suppressed(Timestamp(10800)));
    }

    #[test]
    fn barge_in_pauses_at_word_boundary_and_resumes() {
        let mut o = InteractionOutput::new(EngineConfig::default());
        let mut out = Vec::new();
        let full = "The weather is lovely today.";
        assert_eq!(o.on_text(&text(full), Timestamp(0), &mut out), EnqueueOutcome::Emitted);
        assert!(!o.listening());
        out.clear();
        // Three words take 990 ms; the fourth is still in progress.
        o.on_user_angle(Timestamp(1100), &mut out);
        let u = o.active().unwrap();
        assert_eq!(u.state, UtteranceState::Paused);
        assert_eq!(u.spoken_prefix(), "The weather is");
        assert_eq!(o.last_interrupt(), Some(Timestamp(1100)));
        let first = resume_token(&out);
        out.clear();
        o.on_user_angle(Timestamp(1300), &mut out);
        let token = resume_token(&out);
        assert_eq!(timers(&out)[0].0, Timestamp(2800));
        o.on_resume_check(first, Timestamp(2600), &mut out);
        assert_eq!(o.active().unwrap().state, UtteranceState::Paused);
        out.clear();
        o.on_resume_check(token, Timestamp(2800), &mut out);
        assert_eq!(
            actions(&out)[0],
            &Action::Resume {
                response: 0,
                sentence: 0,
                text: " lovely today.".into()
            }
        );
        let (done_at, done) = timers(&out)[0];
        assert_eq!(done_at, Timestamp(2800 + 2 * 330));
        let Message::SpeechDone { token } = done.clone() else {
            panic!()
        };
        out.clear();
        o.on_speech_done(token, done_at, &mut out);
        assert_eq!(spoken(&out), vec![full.to_owned()]);
        assert!(o.listening());
    }

    #[test]
    fn abandon_emits_prefix_and_drops_queue() {
        let mut o = InteractionOutput::new(EngineConfig::default());
        let mut out = Vec::new();
        o.on_text(&text("The weather is lovely today."), Timestamp(0), &mut out);
        let mut second = text("Shall we go out?");
        second.sentence = 1;
        assert_eq!(o.on_text(&second, Timestamp(100), &mut out), EnqueueOutcome::Queued);
        o.on_user_angle(Timestamp(1000), &mut out);
        out.clear();
        o.on_transcribed(&seg(1900), Timestamp(2000), &mut out);
        assert_eq!(spoken(&out), vec!["The weather is".to_owned()]);
        assert!(o.active().is_none());
        assert!(o.listening());
        let abandoned = emitted(&out)
            .iter()
            .filter(|m| matches!(m, Message::SpeechState(s) if s.state == UtteranceState::Abandoned))
            .count();
        assert_eq!(abandoned, 2);
    }

    #[test]
    fn abandon_before_first_word_is_silent() {
        let mut o = InteractionOutput::new(EngineConfig::default());
        let mut out = Vec::new();
        o.on_text(&text("Hello there."), Timestamp(0), &mut out);
        o.on_user_angle(Timestamp(100), &mut out);
        out.clear();
        o.on_transcribed(&seg(900), Timestamp(1000), &mut out);
        assert!(spoken(&out).is_empty());
    }

    #[test]
    fn gesture_per_transcription_and_gaze_dedup() {
        let mut o = InteractionOutput::new(EngineConfig::default());
        let mut out = Vec::new();
        for t in [1000, 2000, 3000] {
            o.on_transcribed(&seg(t), Timestamp(t), &mut out);
        }
        o.on_face_position(120, &mut out);
        o.on_face_position(120, &mut out);
        o.on_face_position(200, &mut out);
        let acts = actions(&out);
        let gestures = acts.iter().filter(|a| matches!(a, Action::Gesture { .. })).count();
        let gazes = acts.iter().filter(|a| matches!(a, Action::Gaze { .. })).count();
        assert_eq!((gestures, gazes), (3, 1));
        assert_eq!(o.gaze_angle(), Some(120));
    }

    proptest! {
        #[test]
        fn prefix_plus_remainder_is_full_text(
            words in prop::collection::vec("[a-z]{1,8}", 1..12),
            pause_at in 0u64..5000,
        ) {
            let full = words.join(" ") + ".";
            let mut o = InteractionOutput::new(EngineConfig::default());
            let mut out = Vec::new();
            o.on_text(&text(&full), Timestamp(0), &mut out);
            o.on_user_angle(Timestamp(pause_at), &mut out);
            match o.active() {
                Some(u) => {
                    prop_assert_eq!(format!("{}{}", u.spoken_prefix(), u.remainder()), full.clone());
                    prop_assert!(full.starts_with(u.spoken_prefix()));
                    let p = u.spoken_prefix();
                    prop_assert!(p.is_empty() || full[p.len()..].starts_with(' '));
                }
                None => prop_assert_eq!(spoken(&out), vec![full.clone()]),
            }
        }
    }
}
