//! Interruptions and overlapping speech.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use trialogue_core::backend::Action;
use trialogue_core::{ParticipantId, Timestamp};
use trialogue_sim::{EventKind, Trace};

/// A closed interval of one user's speech, rebuilt from injected stimuli.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub actor: ParticipantId,
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCounts {
    /// Robot sentences paused by user speech.
    pub barge_ins: usize,
    /// Pairs of speech spans from different users that share a positive
    /// stretch of time.
    pub user_overlaps: usize,
    pub total: usize,
}

pub fn speech_spans(trace: &Trace) -> Vec<Span> {
    let mut open: BTreeMap<ParticipantId, Timestamp> = BTreeMap::new();
    let mut spans = Vec::new();
    for (ts, ev) in trace.stimuli() {
        let Some(actor) = &ev.actor else { continue };
        match ev.kind {
            EventKind::SpeechStart => {
                open.insert(actor.clone(), ts);
            }
            EventKind::SpeechEnd => {
                if let Some(start) = open.remove(actor) {
                    spans.push(Span {
                        actor: actor.clone(),
                        start,
                        end: ts,
                    });
                }
            }
            _ => {}
        }
    }
    spans
}

pub fn count_user_overlaps(spans: &[Span]) -> usize {
    let mut n = 0;
    for (i, a) in spans.iter().enumerate() {
        for b in &spans[i + 1..] {
            if a.actor != b.actor && a.start.max(b.start) < a.end.min(b.end) {
                n += 1;
            }
        }
    }
    n
}

pub fn count_overlaps(trace: &Trace) -> OverlapCounts {
    let barge_ins = trace
        .actions()
        .filter(|(_, a)| matches!(a, Action::Pause { .. }))
        .count();
    let user_overlaps = count_user_overlaps(&speech_spans(trace));
    OverlapCounts {
        barge_ins,
        user_overlaps,
        total: barge_ins + user_overlaps,
    }
}
