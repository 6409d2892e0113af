//! The scored report and its two renderings.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use trialogue_core::backend::Action;
use trialogue_sim::{Trace, TruthFile};

use crate::align::{align, AlignError, Alignment};
use crate::latency::{latency_stats, LatencyStats};
use crate::overlap::{count_overlaps, OverlapCounts};
use crate::score::{pct, score_addressee, score_recognition, AddresseeTable, Modality, RecognitionTable};

pub const SD_CONVENTION: &str = "population";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnCounts {
    /// Transcribed segments per true speaker.
    pub users: BTreeMap<String, usize>,
    /// Responses that reached the speaker.
    pub robot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalCoherence {
    pub annotated: usize,
    pub coherent: usize,
    pub coherent_pct: f64,
    /// Annotation per response, by turn index.
    pub responses: BTreeMap<u32, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub sd_convention: String,
    pub recognition: Vec<RecognitionTable>,
    pub addressee: AddresseeTable,
    pub latency: LatencyStats,
    pub turns: TurnCounts,
    pub interruptions: OverlapCounts,
    pub duration_ms: u64,
    pub goal_coherence: GoalCoherence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Structured,
    Tabular,
}

impl MetricsReport {
    pub fn build(trace: &Trace, truth: &TruthFile) -> Result<Self, AlignError> {
        let al = align(trace, truth)?;
        Ok(Self::from_alignment(trace, &al))
    }

    pub fn from_alignment(trace: &Trace, al: &Alignment) -> Self {
        let mut users = BTreeMap::new();
        for s in &al.segments {
            *users.entry(s.speaker.0.clone()).or_insert(0) += 1;
        }
        let mut voiced: Vec<u32> = trace
            .actions()
            .filter_map(|(_, a)| match a {
                Action::Say { response, .. } => Some(*response),
                _ => None,
            })
            .collect();
        voiced.sort_unstable();
        voiced.dedup();

        let responses: BTreeMap<u32, bool> = al
            .responses
            .iter()
            .filter_map(|r| Some((r.turn_index, r.goal_coherent?)))
            .collect();
        let coherent = responses.values().filter(|c| **c).count();

        Self {
            scenario: trace.header.scenario.clone(),
            sd_convention: SD_CONVENTION.into(),
            recognition: vec![
                score_recognition(al, Modality::Voice),
                score_recognition(al, Modality::Face),
            ],
            addressee: score_addressee(al),
            latency: latency_stats(trace),
            turns: TurnCounts {
                users,
                robot: voiced.len(),
            },
            interruptions: count_overlaps(trace),
            duration_ms: trace.end().0,
            goal_coherence: GoalCoherence {
                annotated: responses.len(),
                coherent,
                coherent_pct: pct(coherent, responses.len()),
                responses,
            },
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Structured => self.to_json(),
            Format::Tabular => self.to_table(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Fixed-width text: one block per table, percentages to one decimal.
    pub fn to_table(&self) -> String {
        let mut o = String::new();
        let w = &mut o;
        // Writing into a String cannot fail.
        let _ = writeln!(w, "Scenario: {}", self.scenario);
        let _ = writeln!(w, "Duration: {} ms", self.duration_ms);

        let _ = writeln!(w, "\nRecognition accuracy (%)");
        let _ = writeln!(
            w,
            "{:<9}{:>9}{:>11}{:>9}{:>7}",
            "Modality", "Correct", "Incorrect", "Blank", "N"
        );
        for t in &self.recognition {
            let _ = writeln!(
                w,
                "{:<9}{:>9.1}{:>11.1}{:>9.1}{:>7}",
                t.modality.label(),
                t.correct_pct,
                t.incorrect_pct,
                t.blank_pct,
                t.total
            );
        }

        let a = &self.addressee;
        let _ = writeln!(w, "\nAddressee detection (%)");
        let _ = writeln!(
            w,
            "{:>9}{:>11}{:>11}{:>9}{:>7}",
            "Correct", "Inclusive", "Incorrect", "Blank", "N"
        );
        let _ = writeln!(
            w,
            "{:>9.1}{:>11.1}{:>11.1}{:>9.1}{:>7}",
            a.correct_pct, a.inclusive_pct, a.incorrect_pct, a.blank_pct, a.total
        );

        let l = &self.latency;
        let _ = writeln!(w, "\nLatency (ms, {} SD)", self.sd_convention);
        let _ = writeln!(
            w,
            "{:>7}{:>10}{:>10}{:>10}{:>12}",
            "N", "Mean", "SD", "Max", "Generation"
        );
        let f1 = |x: Option<f64>| x.map_or_else(|| "-".to_owned(), |v| format!("{v:.1}"));
        let _ = writeln!(
            w,
            "{:>7}{:>10}{:>10}{:>10}{:>12}",
            l.n,
            f1(l.mean_ms),
            f1(l.sd_ms),
            l.max_ms.map_or_else(|| "-".to_owned(), |v| v.to_string()),
            f1(l.generation_mean_ms)
        );

        let _ = writeln!(w, "\nTurns");
        let _ = writeln!(w, "{:<12}{:>7}", "Speaker", "Turns");
        for (who, n) in &self.turns.users {
            let _ = writeln!(w, "{:<12}{:>7}", who, n);
        }
        let _ = writeln!(w, "{:<12}{:>7}", "robot", self.turns.robot);

        let i = &self.interruptions;
        let _ = writeln!(w, "\nInterruptions and overlaps");
        let _ = writeln!(w, "{:>10}{:>15}{:>7}", "Barge-ins", "User overlaps", "Total");
        let _ = writeln!(w, "{:>10}{:>15}{:>7}", i.barge_ins, i.user_overlaps, i.total);

        let g = &self.goal_coherence;
        let _ = writeln!(w, "\nGoal coherence");
        let _ = writeln!(w, "{:>10}{:>10}{:>7}", "Annotated", "Coherent", "%");
        let _ = writeln!(w, "{:>10}{:>10}{:>7.1}", g.annotated, g.coherent, g.coherent_pct);
        o
    }
}
