//! Seeded random two-user scenarios with at most ten segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trialogue_sim::builder::ScenarioBuilder;
use trialogue_sim::{IntendedAddressee, NoiseConfig, ScenarioScript};

const HEADERS: [&str; 5] = [
    "Addressee: alice; Response: ",
    "Addressee: bob; Response: ",
    "Addressee: carol; Response: ",
    "Addressee alice Response: ",
    "",
];

pub fn random_scenario(seed: u64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a1 = rng.gen_range(10..90u16);
    let a2 = rng.gen_range(a1 + 20..180);
    let noise = NoiseConfig {
        voice_id_blank_p: rng.gen_range(0.0..0.5),
        voice_id_wrong_p: rng.gen_range(0.0..0.3),
        face_blank_p: rng.gen_range(0.0..0.5),
        face_wrong_p: rng.gen_range(0.0..0.3),
        doa_jitter_deg: rng.gen_range(0..6),
        asr_delay_ms: rng.gen_range(0..600),
        seed: rng.gen(),
        ..NoiseConfig::default()
    };
    let opening = rng.gen_bool(0.5);
    let mut b = ScenarioBuilder::new(format!("random-{seed}"))
        .participant("p1", "alice", a1)
        .participant("p2", "bob", a2)
        .noise(noise);
    if opening {
        b = b.opening();
    }

    let n = rng.gen_range(0..=10);
    let mut t = if opening { 4_000 } else { 1_000 };
    let mut last_end = [0u64; 2];
    for i in 0..n {
        let who = rng.gen_range(0..2usize);
        let start = t.max(last_end[who] + 1);
        let end = start + rng.gen_range(400..3_000);
        last_end[who] = end;
        let facing = match rng.gen_range(0..3) {
            0 => None,
            1 => Some(false),
            _ => Some(true),
        };
        let actor = ["p1", "p2"][who];
        b = b.utterance(actor, start, end, &format!("Utterance number {i}."), facing);
        // Negative gaps make the next speaker talk over this one.
        t = (end as i64 + rng.gen_range(-800..5_000)).max(start as i64 + 1) as u64;
    }

    let mut intended = Vec::new();
    for i in 0..=n {
        let header = HEADERS[rng.gen_range(0..HEADERS.len())];
        let truth = match rng.gen_range(0..3) {
            0 => IntendedAddressee::Participant("p1".into()),
            1 => IntendedAddressee::Participant("p2".into()),
            _ => IntendedAddressee::Inclusive,
        };
        let chunks = [format!("Reply {i} begins here. "), "And it ends here.".to_owned()];
        b = b.response(header, &[&chunks[0], &chunks[1]], truth);
        intended.push((rng.gen_bool(0.5), rng.gen_bool(0.7)));
    }
    let mut script = b.build().expect("generated scenarios are valid");
    for (r, (both, coherent)) in script.ground_truth.responses.iter_mut().zip(intended) {
        if r.addressee == IntendedAddressee::Inclusive {
            r.both_addressed = Some(both);
        }
        r.goal_coherent = Some(coherent);
    }
    script
}
