//! Programmatic scenario construction for tests and generated workloads.

use trialogue_core::{ParticipantId, SegmentId};

use crate::scenario::{
    CannedResponse, EventKind, GroundTruth, IntendedAddressee, NoiseConfig, Participant, ResponseTruth, ScenarioError,
    ScenarioScript, ScriptEvent, SegmentTruth,
};

#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    script: ScenarioScript,
    segments: usize,
}

impl ScenarioBuilder {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            script: ScenarioScript {
                id: id.into(),
                violates_assumptions: false,
                opening: false,
                persona: None,
                config: None,
                participants: Vec::new(),
                events: Vec::new(),
                responses: Vec::new(),
                noise: NoiseConfig::default(),
                ground_truth: GroundTruth::default(),
            },
            segments: 0,
        }
    }

    pub fn participant(mut self, id: &str, name: &str, angle_deg: u16) -> Self {
        self.script.participants.push(Participant {
            id: id.into(),
            name: name.into(),
            angle_deg,
        });
        self
    }

    pub fn opening(mut self) -> Self {
        self.script.opening = true;
        self
    }

    pub fn noise(mut self, noise: NoiseConfig) -> Self {
        self.script.noise = noise;
        self
    }

    pub fn event(mut self, t_ms: u64, actor: Option<&str>, kind: EventKind) -> Self {
        self.script.events.push(ScriptEvent {
            t_ms,
            actor: actor.map(ParticipantId::from),
            kind,
        });
        self
    }

    /// One user turn: speech over `[start, end]` transcribed as `text`. With
    /// `facing` set, the speaker's gaze is scripted at speech start.
    pub fn utterance(mut self, actor: &str, start: u64, end: u64, text: &str, facing: Option<bool>) -> Self {
        self.segments += 1;
        let segment = SegmentId(format!("s{}", self.segments));
        self = self.event(start, Some(actor), EventKind::SpeechStart);
        if let Some(facing_robot) = facing {
            self = self.event(start, Some(actor), EventKind::Gaze { facing_robot });
        }
        self = self
            .event(
                end,
                Some(actor),
                EventKind::AsrFinal {
                    text: text.into(),
                    relative_id: None,
                    segment: Some(segment.clone()),
                },
            )
            .event(end, Some(actor), EventKind::SpeechEnd);
        self.script.ground_truth.segments.push(SegmentTruth {
            segment,
            speaker: actor.into(),
        });
        self
    }

    /// Scripts the answer to the next model request.
    pub fn response(mut self, header: &str, chunks: &[&str], intended: IntendedAddressee) -> Self {
        let turn_index = self.script.responses.len() as u32;
        self.script.responses.push(CannedResponse {
            turn_index,
            chunks: chunks.iter().map(|c| (*c).to_owned()).collect(),
            addressee_header: header.into(),
        });
        self.script.ground_truth.responses.push(ResponseTruth {
            turn_index,
            addressee: intended,
            both_addressed: None,
            goal_coherent: None,
        });
        self
    }

    pub fn build(mut self) -> Result<ScenarioScript, ScenarioError> {
        self.script.events.sort_by_key(|e| e.t_ms);
        self.script.validate()?;
        Ok(self.script)
    }
}

/// A long two-party exchange used to measure recognition rates: after a
/// short robot opening, two users alternate 1 s utterances separated by
/// 0.5 to 1 s of silence, so every utterance falls in exactly one
/// identification window. A closing response follows the last utterance.
pub fn calibration_scenario(segments: usize, noise: NoiseConfig) -> ScenarioScript {
    let mut b = ScenarioBuilder::new("calibration")
        .participant("p1", "alice", 60)
        .participant("p2", "bob", 120)
        .opening()
        .noise(noise)
        .response("", &["Hello to both of you."], IntendedAddressee::Inclusive);
    let mut t = 5_000;
    for i in 0..segments {
        let actor = if i % 2 == 0 { "p1" } else { "p2" };
        b = b.utterance(actor, t, t + 1_000, "Just one more thing.", None);
        t += 1_000 + 500 + (i as u64 * 137) % 501;
    }
    b.response(
        "Addressee: alice; Response: ",
        &["Thanks, alice."],
        IntendedAddressee::Participant("p1".into()),
    )
    .build()
    .expect("calibration scenario is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_output_validates_and_segments_match_truth() {
        let s = calibration_scenario(6, NoiseConfig::default());
        let segs = s.segments();
        assert_eq!(segs.len(), 6);
        for (seg, truth) in segs.iter().zip(&s.ground_truth.segments) {
            assert_eq!(seg.id, truth.segment);
            assert_eq!(seg.actor, truth.speaker);
            assert_eq!(seg.end_ms - seg.start_ms, 1_000);
        }
        assert_eq!(s.responses.len(), 2);
    }
}
