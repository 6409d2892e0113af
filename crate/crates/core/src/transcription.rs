//! Transcription: forwards final ASR results as `transcribed` segments,
//! except those spoken entirely while the robot held the turn.

use crate::message::AsrResult;
use crate::types::{SwitchKind, Timestamp, TranscriptSegment, TurnSwitch};

#[derive(Debug, Clone, Default)]
pub struct Transcription {
    /// Pause intervals `[from, until)`; the last one may still be open.
    pauses: Vec<(Timestamp, Option<Timestamp>)>,
}

impl Transcription {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_paused(&self) -> bool {
        matches!(self.pauses.last(), Some((_, None)))
    }

    pub fn on_switch(&mut self, sw: &TurnSwitch) {
        match sw.kind {
            SwitchKind::UserToRobot => self.set_paused(true, sw.ts),
            SwitchKind::RobotToUser => self.set_paused(false, sw.ts),
            SwitchKind::UserUser => {}
        }
    }

    /// Idempotent.
    pub fn set_paused(&mut self, paused: bool, now: Timestamp) {
        match (paused, self.is_paused()) {
            (true, false) => self.pauses.push((now, None)),
            (false, true) => {
                if let Some(last) = self.pauses.last_mut() {
                    last.1 = Some(now);
                }
            }
            _ => {}
        }
    }

    /// A result survives unless its text is blank or its whole span lies
    /// inside one pause interval.
    pub fn on_result(&mut self, raw: &AsrResult) -> Option<TranscriptSegment> {
        if raw.text.trim().is_empty() {
            return None;
        }
        let covered = self
            .pauses
            .iter()
            .any(|&(from, until)| from <= raw.start_ts && until.is_none_or(|u| raw.end_ts < u));
        if covered {
            tracing::debug!(segment = %raw.id, "dropping result spoken during robot turn");
            return None;
        }
        Some(TranscriptSegment {
            id: raw.id.clone(),
            text: raw.text.clone(),
            start_ts: raw.start_ts,
            end_ts: raw.end_ts.max(raw.start_ts),
            relative_speaker: raw.relative_speaker.clone(),
            resolved_speaker: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(text: &str, start: u64, end: u64) -> AsrResult {
        AsrResult {
            id: "s1".into(),
            text: text.into(),
            start_ts: Timestamp(start),
            end_ts: Timestamp(end),
            relative_speaker: Some("S1".into()),
        }
    }

    fn switch(kind: SwitchKind, t: u64) -> TurnSwitch {
        TurnSwitch {
            kind,
            ts: Timestamp(t),
            new_angle_deg: None,
        }
    }

    #[test]
    fn passes_text_through() {
        let mut t = Transcription::new();
        let seg = t.on_result(&result("hello there", 1000, 1800)).unwrap();
        assert_eq!(seg.text, "hello there");
        assert_eq!(seg.relative_speaker.as_deref(), Some("S1"));
        assert_eq!(seg.resolved_speaker, None);
        assert!(t.on_result(&result("  ", 1000, 1800)).is_none());
    }

    #[test]
    fn pause_is_idempotent_and_drops_covered_results() {
        let mut t = Transcription::new();
        t.on_switch(&switch(SwitchKind::UserToRobot, 2000));
        t.on_switch(&switch(SwitchKind::UserToRobot, 2100));
        assert!(t.is_paused());
        assert!(t.on_result(&result("echo", 2200, 2600)).is_none());
        // Started before the pause: kept.
        assert!(t.on_result(&result("straddle", 1500, 2600)).is_some());
        t.on_switch(&switch(SwitchKind::RobotToUser, 4000));
        assert!(!t.is_paused());
        assert!(t.on_result(&result("late", 2200, 3900)).is_none());
        assert!(t.on_result(&result("over", 3000, 4100)).is_some());
    }
}
