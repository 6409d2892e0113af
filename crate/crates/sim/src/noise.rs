//! Seeded perturbation of recognition outcomes and DOA readings.
//!
//! Each noise source draws from its own ChaCha stream derived from the
//! scenario seed, in the order the engine queries it. Adding DOA polls
//! therefore never shifts voice or face outcomes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trialogue_core::ParticipantId;

use crate::scenario::NoiseConfig;

#[derive(Debug, Clone)]
pub struct NoiseStreams {
    pub voice: ChaCha8Rng,
    pub face: ChaCha8Rng,
    pub doa: ChaCha8Rng,
}

fn stream(seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}

impl NoiseStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            voice: stream(seed, 1),
            face: stream(seed, 2),
            doa: stream(seed, 3),
        }
    }
}

/// Perturbs one recognition outcome. Exactly one uniform draw decides the
/// category; a wrong outcome takes one more draw to pick the impostor.
/// With no true identity the result is blank whatever the draw.
pub fn apply_noise<R: Rng + ?Sized>(
    blank_p: f64,
    wrong_p: f64,
    truth: Option<&ParticipantId>,
    enrolled: &[ParticipantId],
    rng: &mut R,
) -> Option<ParticipantId> {
    let u: f64 = rng.gen();
    let truth = truth?;
    if u < blank_p {
        return None;
    }
    if u < blank_p + wrong_p {
        let others: Vec<&ParticipantId> = enrolled.iter().filter(|p| *p != truth).collect();
        if others.is_empty() {
            return Some(truth.clone());
        }
        return Some(others[rng.gen_range(0..others.len())].clone());
    }
    Some(truth.clone())
}

pub fn voice_outcome<R: Rng + ?Sized>(
    cfg: &NoiseConfig,
    truth: Option<&ParticipantId>,
    enrolled: &[ParticipantId],
    rng: &mut R,
) -> Option<ParticipantId> {
    apply_noise(cfg.voice_id_blank_p, cfg.voice_id_wrong_p, truth, enrolled, rng)
}

pub fn face_outcome<R: Rng + ?Sized>(
    cfg: &NoiseConfig,
    truth: &ParticipantId,
    enrolled: &[ParticipantId],
    rng: &mut R,
) -> Option<ParticipantId> {
    apply_noise(cfg.face_blank_p, cfg.face_wrong_p, Some(truth), enrolled, rng)
}

/// Uniform integer jitter in `±half_width`, kept inside the user region.
/// A zero width consumes no draw.
pub fn jitter<R: Rng + ?Sized>(angle_deg: u16, half_width: u16, rng: &mut R) -> u16 {
    if half_width == 0 {
        return angle_deg;
    }
    let w = i32::from(half_width);
    let a = i32::from(angle_deg) + rng.gen_range(-w..=w);
    a.clamp(0, 179) as u16
}
