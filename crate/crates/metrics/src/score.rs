//! Recognition and addressee tables.

use serde::{Deserialize, Serialize};
use trialogue_sim::scenario::IntendedAddressee;

use crate::align::{Alignment, RecognitionPair, ResponsePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Voice,
    Face,
}

impl Modality {
    pub fn label(self) -> &'static str {
        match self {
            Modality::Voice => "Voice",
            Modality::Face => "Face",
        }
    }
}

/// Share of `n` in `total`, in percent; zero when there is nothing to count.
pub fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecognitionOutcome {
    Correct,
    Incorrect,
    Blank,
}

pub fn classify_recognition(pair: &RecognitionPair) -> RecognitionOutcome {
    match &pair.predicted {
        None => RecognitionOutcome::Blank,
        Some(p) if *p == pair.truth => RecognitionOutcome::Correct,
        Some(_) => RecognitionOutcome::Incorrect,
    }
}

/// Percentages are over `total`; all zero when `total` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionTable {
    pub modality: Modality,
    pub total: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub blank: usize,
    pub correct_pct: f64,
    pub incorrect_pct: f64,
    pub blank_pct: f64,
}

pub fn score_recognition(al: &Alignment, modality: Modality) -> RecognitionTable {
    let pairs = match modality {
        Modality::Voice => &al.voice,
        Modality::Face => &al.face,
    };
    let (mut correct, mut incorrect, mut blank) = (0, 0, 0);
    for p in pairs {
        match classify_recognition(p) {
            RecognitionOutcome::Correct => correct += 1,
            RecognitionOutcome::Incorrect => incorrect += 1,
            RecognitionOutcome::Blank => blank += 1,
        }
    }
    let total = pairs.len();
    RecognitionTable {
        modality,
        total,
        correct,
        incorrect,
        blank,
        correct_pct: pct(correct, total),
        incorrect_pct: pct(incorrect, total),
        blank_pct: pct(blank, total),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddresseeOutcome {
    Correct,
    Inclusive,
    Incorrect,
    Blank,
}

/// An inclusive response counts as inclusive when no single addressee was
/// parsed, or when the annotation says both users were addressed despite a
/// named header. Any other named addressee that differs from the truth is
/// incorrect.
pub fn classify_addressee(pair: &ResponsePair) -> AddresseeOutcome {
    match (&pair.truth, &pair.predicted) {
        (IntendedAddressee::Participant(t), Some(p)) if p == t => AddresseeOutcome::Correct,
        (IntendedAddressee::Participant(_), None) => AddresseeOutcome::Blank,
        (IntendedAddressee::Inclusive, None) => AddresseeOutcome::Inclusive,
        (IntendedAddressee::Inclusive, Some(_)) if pair.both_addressed => AddresseeOutcome::Inclusive,
        (_, Some(_)) => AddresseeOutcome::Incorrect,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddresseeTable {
    pub total: usize,
    pub correct: usize,
    pub inclusive: usize,
    pub incorrect: usize,
    pub blank: usize,
    pub correct_pct: f64,
    pub inclusive_pct: f64,
    pub incorrect_pct: f64,
    pub blank_pct: f64,
}

pub fn score_addressee(al: &Alignment) -> AddresseeTable {
    let mut n = [0usize; 4];
    for r in &al.responses {
        n[classify_addressee(r) as usize] += 1;
    }
    let total = al.responses.len();
    AddresseeTable {
        total,
        correct: n[0],
        inclusive: n[1],
        incorrect: n[2],
        blank: n[3],
        correct_pct: pct(n[0], total),
        inclusive_pct: pct(n[1], total),
        incorrect_pct: pct(n[2], total),
        blank_pct: pct(n[3], total),
    }
}
