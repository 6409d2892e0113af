//! Face tracking and speaker fusion.
//!
//! Keeps one record per enrolled participant seen by the camera and decides
//! who is currently talking by matching the voice direction against known
//! face positions. When the voice identity disagrees, the face wins.
//!
//! Invariant: at most one record is the current speaker.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::config::EngineConfig;
use crate::message::{Message, SpeakerBinding};
use crate::types::{Enrolment, FaceObservation, IdSource, ParticipantId, Timestamp, TranscriptSegment, TurnSwitch};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantRecord {
    pub absolute_id: ParticipantId,
    pub display_name: String,
    pub last_angle_deg: Option<u16>,
    pub last_face_ts: Option<Timestamp>,
    pub confidence: f64,
    /// Latest identity diarisation attached to this participant's voice.
    pub voice_id: Option<ParticipantId>,
    pub is_current_speaker: bool,
}

/// A face available to fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCandidate {
    pub id: ParticipantId,
    pub angle_deg: u16,
    pub confidence: f64,
}

/// Nearest face to `doa_deg`. Equal distances go to the higher confidence,
/// then to the smaller id.
pub fn nearest_face(doa_deg: u16, faces: &[FaceCandidate]) -> Option<&FaceCandidate> {
    faces.iter().min_by(|a, b| {
        a.angle_deg
            .abs_diff(doa_deg)
            .cmp(&b.angle_deg.abs_diff(doa_deg))
            .then_with(|| b.confidence.total_cmp(&a.confidence))
            .then_with(|| a.id.cmp(&b.id))
    })
}

/// Fusion outcome; `conflict` records that the voice identity pointed at
/// someone else.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub speaker: ParticipantId,
    pub conflict: bool,
}

pub fn fuse(doa_deg: u16, faces: &[FaceCandidate], voice_id: Option<&ParticipantId>) -> Option<Fusion> {
    let face = nearest_face(doa_deg, faces)?;
    Some(Fusion {
        speaker: face.id.clone(),
        conflict: voice_id.is_some_and(|v| *v != face.id),
    })
}

#[derive(Debug, Clone)]
pub struct FaceTracking {
    cfg: EngineConfig,
    enrolment: Enrolment,
    records: BTreeMap<ParticipantId, ParticipantRecord>,
    current: Option<ParticipantId>,
    last_acted_deg: Option<u16>,
    last_voice_id: Option<ParticipantId>,
    conflicts: u64,
}

impl FaceTracking {
    pub fn new(cfg: EngineConfig, enrolment: Enrolment) -> Self {
        Self {
            cfg,
            enrolment,
            records: BTreeMap::new(),
            current: None,
            last_acted_deg: None,
            last_voice_id: None,
            conflicts: 0,
        }
    }

    pub fn current_speaker(&self) -> Option<&ParticipantRecord> {
        self.current.as_ref().and_then(|id| self.records.get(id))
    }

    pub fn records(&self) -> impl Iterator<Item = &ParticipantRecord> {
        self.records.values()
    }

    pub fn record(&self, id: &ParticipantId) -> Option<&ParticipantRecord> {
        self.records.get(id)
    }

    /// Voice/face disagreements resolved in favour of the face.
    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    /// Updates records from one frame and returns the `users` event.
    pub fn on_frame(&mut self, observations: Vec<FaceObservation>, now: Timestamp) -> Message {
        let mut best: BTreeMap<ParticipantId, FaceObservation> = BTreeMap::new();
        for obs in observations {
            if !self.enrolment.contains(&obs.id) {
                tracing::debug!(id = %obs.id, "ignoring face of unenrolled person");
                continue;
            }
            if obs.confidence < self.cfg.face_min_confidence || !self.cfg.is_user_angle(obs.angle_deg) {
                continue;
            }
            let keep = best
                .get(&obs.id)
                .is_none_or(|cur| match obs.confidence.total_cmp(&cur.confidence) {
                    Ordering::Greater => true,
                    Ordering::Equal => obs.angle_deg < cur.angle_deg,
                    Ordering::Less => false,
                });
            if keep {
                best.insert(obs.id.clone(), obs);
            }
        }
        for obs in best.values() {
            let name = self
                .enrolment
                .display_name(&obs.id)
                .unwrap_or(obs.id.as_str())
                .to_owned();
            let rec = self.records.entry(obs.id.clone()).or_insert_with(|| ParticipantRecord {
                absolute_id: obs.id.clone(),
                display_name: name,
                last_angle_deg: None,
                last_face_ts: None,
                confidence: 0.0,
                voice_id: None,
                is_current_speaker: false,
            });
            rec.last_angle_deg = Some(obs.angle_deg);
            rec.last_face_ts = Some(now);
            rec.confidence = obs.confidence;
        }
        Message::Users {
            faces: best.into_values().collect(),
        }
    }

    /// Faces recent enough to take part in fusion.
    pub fn candidates(&self, now: Timestamp) -> Vec<FaceCandidate> {
        self.records
            .values()
            .filter_map(|r| {
                let angle = r.last_angle_deg?;
                let seen = r.last_face_ts?;
                (now.since(seen) <= self.cfg.face_stale_ms).then(|| FaceCandidate {
                    id: r.absolute_id.clone(),
                    angle_deg: angle,
                    confidence: r.confidence,
                })
            })
            .collect()
    }

    pub fn on_switch(&mut self, sw: &TurnSwitch, now: Timestamp) -> Vec<Message> {
        match sw.new_angle_deg {
            Some(deg) if self.cfg.is_user_angle(deg) => self.refuse(deg, now),
            _ => Vec::new(),
        }
    }

    /// Variations below the hysteresis threshold are ignored.
    pub fn on_user_angle(&mut self, deg: u16, now: Timestamp) -> Vec<Message> {
        if let Some(last) = self.last_acted_deg {
            if deg.abs_diff(last) < self.cfg.doa_ignore_deg {
                return Vec::new();
            }
        }
        self.refuse(deg, now)
    }

    fn refuse(&mut self, deg: u16, now: Timestamp) -> Vec<Message> {
        let faces = self.candidates(now);
        let Some(fusion) = fuse(deg, &faces, self.last_voice_id.as_ref()) else {
            return Vec::new();
        };
        if fusion.conflict {
            self.conflicts += 1;
        }
        self.last_acted_deg = Some(deg);
        self.set_current(fusion.speaker)
    }

    fn set_current(&mut self, id: ParticipantId) -> Vec<Message> {
        if let Some(prev) = self.current.take() {
            if let Some(r) = self.records.get_mut(&prev) {
                r.is_current_speaker = false;
            }
        }
        let Some(rec) = self.records.get_mut(&id) else {
            return Vec::new();
        };
        rec.is_current_speaker = true;
        self.current = Some(id.clone());
        let mut out = vec![Message::FaceId { id }];
        if let Some(angle) = rec.last_angle_deg {
            out.push(Message::FacePosition { deg: angle });
        }
        out
    }

    /// Binds the segment to the current speaker, if any.
    pub fn on_transcribed(&mut self, seg: &TranscriptSegment) -> Option<Message> {
        let rec = self.current_speaker()?;
        Some(Message::Speaker(SpeakerBinding {
            segment: seg.id.clone(),
            id: rec.absolute_id.clone(),
            source: IdSource::Face,
            confidence: Some(rec.confidence),
        }))
    }

    pub fn on_voice_binding(&mut self, binding: &SpeakerBinding) {
        if binding.source != IdSource::Voice {
            return;
        }
        self.last_voice_id = Some(binding.id.clone());
        if let Some(cur) = self.current.clone() {
            if let Some(r) = self.records.get_mut(&cur) {
                r.voice_id = Some(binding.id.clone());
            }
            if cur != binding.id {
                self.conflicts += 1;
                tracing::debug!(face = %cur, voice = %binding.id, "identity conflict, keeping face");
            }
        }
    }

    /// Points the current-user location at the addressee, if their face
    /// position is known.
    pub fn on_addressee(&mut self, id: &ParticipantId) -> Vec<Message> {
        let Some(angle) = self.records.get(id).and_then(|r| r.last_angle_deg) else {
            return Vec::new();
        };
        self.last_acted_deg = Some(angle);
        self.set_current(id.clone())
    }
}
