//! Joins trace items to their ground-truth records.
//!
//! Trace items are: transcribed segments (one voice query each), camera
//! frames (one face query per face truly in view) and model requests (one
//! robot response each). Every trace item must have exactly one truth
//! record; truth records without a trace item are only flagged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use trialogue_core::{IdSource, Message, ParticipantId, SegmentId, Timestamp};
use trialogue_sim::scenario::IntendedAddressee;
use trialogue_sim::{BackendCall, Trace, TruthFile};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum Item {
    Segment { segment: SegmentId },
    Frame { ts: Timestamp },
    Response { turn_index: u32 },
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Segment { segment } => write!(f, "segment {segment}"),
            Item::Frame { ts } => write!(f, "frame at {} ms", ts.0),
            Item::Response { turn_index } => write!(f, "response {turn_index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("ground truth missing for {}", list(.0))]
    CoverageGap(Vec<Item>),
    #[error("more than one annotation for {}", list(.0))]
    AmbiguousAnnotation(Vec<Item>),
}

fn list(items: &[Item]) -> String {
    items.iter().map(Item::to_string).collect::<Vec<_>>().join(", ")
}

/// One identity query paired with its truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognitionPair {
    pub item: Item,
    pub truth: ParticipantId,
    /// Face queries only: where the true face was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<ParticipantId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub segment: SegmentId,
    pub speaker: ParticipantId,
    /// When the transcription reached the engine.
    pub transcribed_ts: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePair {
    pub turn_index: u32,
    pub truth: IntendedAddressee,
    pub both_addressed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_coherent: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<ParticipantId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub segments: Vec<SegmentPair>,
    pub voice: Vec<RecognitionPair>,
    pub face: Vec<RecognitionPair>,
    pub responses: Vec<ResponsePair>,
    /// Truth records that no trace item refers to.
    pub unmatched_truth: Vec<Item>,
}

pub fn align(trace: &Trace, truth: &TruthFile) -> Result<Alignment, AlignError> {
    let seg_truth = index(truth.segments.iter().map(|s| (s.segment.clone(), s)), |k| {
        Item::Segment { segment: k.clone() }
    })?;
    let resp_truth = index(truth.responses.iter().map(|r| (r.turn_index, r)), |k| Item::Response {
        turn_index: *k,
    })?;
    let frame_truth = index(truth.frames.iter().map(|f| (f.ts, f)), |k| Item::Frame { ts: *k })?;

    let mut voice_binding = BTreeMap::new();
    let mut addressee = BTreeMap::new();
    let mut observed: BTreeMap<Timestamp, Vec<(u16, ParticipantId)>> = BTreeMap::new();
    for (_, msg) in trace.events() {
        match msg {
            Message::Speaker(b) if b.source == IdSource::Voice => {
                voice_binding.entry(b.segment.clone()).or_insert_with(|| b.id.clone());
            }
            Message::Addressee { response, id } => {
                addressee.entry(*response).or_insert_with(|| id.clone());
            }
            Message::Users { faces } => {
                for f in faces {
                    observed
                        .entry(f.frame_ts)
                        .or_default()
                        .push((f.angle_deg, f.id.clone()));
                }
            }
            _ => {}
        }
    }

    let mut al = Alignment::default();
    let mut gaps = Vec::new();
    let mut seen = BTreeSet::new();

    for (ts, msg) in trace.events() {
        match msg {
            Message::Transcribed(seg) => {
                let item = Item::Segment {
                    segment: seg.id.clone(),
                };
                if !seen.insert(item.clone()) {
                    continue;
                }
                let Some(t) = seg_truth.get(&seg.id) else {
                    gaps.push(item);
                    continue;
                };
                al.segments.push(SegmentPair {
                    segment: seg.id.clone(),
                    speaker: t.speaker.clone(),
                    transcribed_ts: ts,
                });
                al.voice.push(RecognitionPair {
                    item,
                    truth: t.speaker.clone(),
                    angle_deg: None,
                    predicted: voice_binding.get(&seg.id).cloned(),
                });
            }
            Message::LlmRequest(req) => {
                let item = Item::Response {
                    turn_index: req.response,
                };
                if !seen.insert(item.clone()) {
                    continue;
                }
                let Some(t) = resp_truth.get(&req.response) else {
                    gaps.push(item);
                    continue;
                };
                al.responses.push(ResponsePair {
                    turn_index: req.response,
                    truth: t.addressee.clone(),
                    both_addressed: t.both_addressed.unwrap_or(false),
                    goal_coherent: t.goal_coherent,
                    predicted: addressee.get(&req.response).cloned(),
                });
            }
            _ => {}
        }
    }

    for (ts, call) in trace.backend_calls() {
        if !matches!(call, BackendCall::Frame { .. }) {
            continue;
        }
        let item = Item::Frame { ts };
        if !seen.insert(item.clone()) {
            continue;
        }
        let Some(t) = frame_truth.get(&ts) else {
            gaps.push(item);
            continue;
        };
        // Each observation is paired with at most one true face at its angle.
        let mut pool = observed.remove(&ts).unwrap_or_default();
        for face in &t.faces {
            let predicted = pool
                .iter()
                .position(|(a, _)| *a == face.angle_deg)
                .map(|i| pool.remove(i).1);
            al.face.push(RecognitionPair {
                item: item.clone(),
                truth: face.id.clone(),
                angle_deg: Some(face.angle_deg),
                predicted,
            });
        }
    }

    if !gaps.is_empty() {
        return Err(AlignError::CoverageGap(gaps));
    }
    al.unmatched_truth = seg_truth
        .keys()
        .map(|k| Item::Segment { segment: k.clone() })
        .chain(resp_truth.keys().map(|k| Item::Response { turn_index: *k }))
        .chain(frame_truth.keys().map(|k| Item::Frame { ts: *k }))
        .filter(|i| !seen.contains(i))
        .collect();
    Ok(al)
}

fn index<K: Ord + Clone, V>(
    entries: impl Iterator<Item = (K, V)>,
    item: impl Fn(&K) -> Item,
) -> Result<BTreeMap<K, V>, AlignError> {
    let mut map = BTreeMap::new();
    let mut dups = BTreeSet::new();
    for (k, v) in entries {
        if map.insert(k.clone(), v).is_some() {
            dups.insert(item(&k));
        }
    }
    if dups.is_empty() {
        Ok(map)
    } else {
        Err(AlignError::AmbiguousAnnotation(dups.into_iter().collect()))
    }
}
