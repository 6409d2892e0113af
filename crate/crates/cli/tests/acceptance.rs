//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed. Runs without the libtest harness so the
//! lines are always visible.

#[path = "../../metrics/tests/common/gen.rs"]
mod gen;
#[path = "../../metrics/tests/common/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trialogue_core::awareness::SpeakerAwareness;
use trialogue_core::backend::Action;
use trialogue_core::conversation::prompt::{build_prompt, PromptContext};
use trialogue_core::conversation::stream::{
    match_participant, parse_addressee, split_response, Header, ResponseStream,
};
use trialogue_core::conversation::ConversationManager;
use trialogue_core::diarisation::Diarisation;
use trialogue_core::effect::{timers, Effect};
use trialogue_core::face_tracking::{fuse, FaceCandidate, FaceTracking};
use trialogue_core::message::{LabelStage, RobotText};
use trialogue_core::output::InteractionOutput;
use trialogue_core::{
    DoaSample, EngineConfig, Enrolment, EnrolmentRecord, FaceObservation, HistoryEntry, HistorySource, Message,
    ParticipantId, Persona, SourceClass, SwitchKind, Timestamp, TranscriptSegment, TurnSwitch,
};
use trialogue_metrics::{MetricsReport, Modality};
use trialogue_sim::builder::{calibration_scenario, ScenarioBuilder};
use trialogue_sim::trace::BackendCall;
use trialogue_sim::{
    bundled, load_scenario, run, run_with_seed, EventKind, IntendedAddressee, NoiseConfig, ScenarioScript,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("deterministic replay", deterministic_replay),
        ("threshold exactness", threshold_exactness),
        ("noiseless correctness", noiseless_correctness),
        ("noise calibration", noise_calibration),
        ("interruption semantics", interruption_semantics),
        ("streaming parser", streaming_parser),
        ("metrics oracle equivalence", metrics_oracle),
        ("latency accounting", latency_accounting),
        ("fusion oracle", fusion_oracle),
        ("prompt golden file", prompt_golden),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(e.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../sim/scenarios")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

// 1 --------------------------------------------------------------------------

fn deterministic_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for name in ["parallel", "group"] {
        let scenario = scenario_dir().join(format!("{name}.scenario"));
        let mut traces = Vec::new();
        let mut slowest = Duration::ZERO;
        for run in ["a", "b"] {
            let report = dir.path().join(format!("{name}-{run}.json"));
            let start = Instant::now();
            let out = Command::new(env!("CARGO_BIN_EXE_trialogue"))
                .args(["run", "--seed", "42", "--scenario"])
                .arg(&scenario)
                .arg("--report")
                .arg(&report)
                .env_remove("TRIALOGUE_REPORT_DIR")
                .output()
                .map_err(|e| e.to_string())?;
            slowest = slowest.max(start.elapsed());
            ensure(out.status.success(), || {
                format!("{name}: {}", String::from_utf8_lossy(&out.stderr))
            })?;
            let trace = dir.path().join(format!("{name}-{run}.trace.jsonl"));
            traces.push(std::fs::read(trace).map_err(|e| e.to_string())?);
        }
        ensure(traces[0] == traces[1], || format!("{name}: traces differ"))?;
        ensure(slowest < Duration::from_secs(5), || format!("{name}: took {slowest:?}"))?;
        detail.push(format!(
            "{name} identical ({} bytes, {} ms)",
            traces[0].len(),
            slowest.as_millis()
        ));
    }
    Ok(detail.join(", "))
}

// 2 --------------------------------------------------------------------------

struct Table(Vec<(String, bool, bool)>);

impl Table {
    fn row(&mut self, name: impl Into<String>, expected: bool, actual: bool) {
        self.0.push((name.into(), expected, actual));
    }
}

fn enrolment() -> Enrolment {
    Enrolment::new([
        EnrolmentRecord::new("alice", "alice"),
        EnrolmentRecord::new("bob", "bob"),
    ])
}

fn poll(a: &mut SpeakerAwareness, deg: u16, t: u64) -> Vec<Message> {
    a.on_poll(
        Some(DoaSample {
            angle_deg: deg,
            ts: Timestamp(t),
        }),
        Timestamp(t),
    )
}

fn user_switch_after(from: u16, to: u16) -> bool {
    let mut a = SpeakerAwareness::new(EngineConfig::default());
    poll(&mut a, from, 100);
    poll(&mut a, to, 200)
        .iter()
        .any(|m| matches!(m, Message::UserUserSwitch(_)))
}

fn refused_after(from: u16, to: u16) -> bool {
    let mut f = FaceTracking::new(EngineConfig::default(), enrolment());
    let face = |id: &str, deg| FaceObservation {
        id: id.into(),
        angle_deg: deg,
        confidence: 0.9,
        frame_ts: Timestamp(0),
    };
    f.on_frame(vec![face("alice", 10), face("bob", 170)], Timestamp(0));
    assert!(!f.on_user_angle(from, Timestamp(100)).is_empty());
    // Re-fusion is observable as a face-id event; swap the faces' positions
    // so a re-run always produces one.
    f.on_frame(vec![face("alice", 170), face("bob", 10)], Timestamp(150));
    !f.on_user_angle(to, Timestamp(200)).is_empty()
}

fn sentence(text: &str) -> RobotText {
    RobotText {
        response: 0,
        sentence: 0,
        text: text.into(),
        addressee: None,
    }
}

fn segment(id: &str, relative: Option<&str>) -> TranscriptSegment {
    TranscriptSegment {
        id: id.into(),
        text: "I like cycling.".into(),
        start_ts: Timestamp(0),
        end_ts: Timestamp(900),
        relative_speaker: relative.map(str::to_owned),
        resolved_speaker: None,
    }
}

fn threshold_exactness() -> Outcome {
    let cfg = EngineConfig::default();
    let mut t = Table(Vec::new());

    t.row("user switch at 25 deg", true, user_switch_after(60, 85));
    t.row("no user switch at 15 deg", false, user_switch_after(60, 75));
    t.row("no user switch at exactly 20 deg", false, user_switch_after(60, 80));
    t.row("user switch at 21 deg", true, user_switch_after(60, 81));

    for (deg, robot) in [(179, false), (180, true), (270, true), (359, true)] {
        t.row(
            format!("{deg} deg is robot"),
            robot,
            cfg.classify(deg) == Some(SourceClass::Robot),
        );
    }
    t.row("360 deg is unclassified", true, cfg.classify(360).is_none());

    t.row("face re-fusion at 29 deg", false, refused_after(70, 99));
    t.row("face re-fusion at exactly 30 deg", true, refused_after(70, 100));

    // Resume: the check is armed exactly 1.5 s after the last user activity.
    let mut o = InteractionOutput::new(cfg.clone());
    let mut out = Vec::new();
    o.on_text(&sentence("The weather is lovely today."), Timestamp(0), &mut out);
    out.clear();
    o.on_user_angle(Timestamp(1_100), &mut out);
    let resume_at = timers(&out).iter().find_map(|(at, m)| match m {
        Message::ResumeCheck { token } => Some((*at, *token)),
        _ => None,
    });
    t.row(
        "resume armed at +1500 ms",
        true,
        resume_at.map(|r| r.0) == Some(Timestamp(2_600)),
    );
    out.clear();
    if let Some((at, token)) = resume_at {
        o.on_resume_check(token, at, &mut out);
    }
    t.row(
        "resume fires at its deadline",
        true,
        out.iter().any(|e| matches!(e, Effect::Act(Action::Resume { .. }))),
    );

    // Suppression: the interrupt at 1100 also counts as user speech.
    t.row(
        "suppressed 1999 ms after interrupt",
        true,
        o.is_suppressed(Timestamp(3_099)),
    );
    t.row(
        "not suppressed 2000 ms after interrupt",
        false,
        o.is_suppressed(Timestamp(3_100)),
    );
    let mut o = InteractionOutput::new(cfg.clone());
    o.on_user_angle(Timestamp(5_000), &mut Vec::new());
    t.row(
        "suppressed 999 ms after speech",
        true,
        o.is_suppressed(Timestamp(5_999)),
    );
    t.row(
        "not suppressed 1000 ms after speech",
        false,
        o.is_suppressed(Timestamp(6_000)),
    );

    // Identification window length.
    let mut d = Diarisation::new(cfg.clone(), enrolment());
    let mut out = Vec::new();
    d.on_switch(
        &TurnSwitch {
            kind: SwitchKind::RobotToUser,
            ts: Timestamp(1_000),
            new_angle_deg: Some(60),
        },
        Timestamp(1_000),
        &mut out,
    );
    let window = d.recording().cloned();
    t.row(
        "window deadline at +3000 ms",
        true,
        window.as_ref().map(|w| w.deadline) == Some(Timestamp(4_000)),
    );
    if let Some(w) = &window {
        out.clear();
        d.on_deadline(w.id, w.deadline, &mut out);
        let recorded = out.iter().find_map(|e| match e {
            Effect::Identify(w) => Some(w.end().since(w.started)),
            _ => None,
        });
        t.row("window records exactly 3000 ms", true, recorded == Some(3_000));
        t.row("window closed at its deadline", true, d.recording().is_none());
    }

    // Frame cadence, observed end to end.
    let parallel = load_scenario(bundled::PARALLEL).map_err(|e| e.to_string())?;
    let frames: Vec<u64> = run(&parallel)
        .trace
        .backend_calls()
        .filter(|(_, c)| matches!(c, BackendCall::Frame { .. }))
        .map(|(ts, _)| ts.0)
        .collect();
    t.row("first frame at 0 ms", true, frames.first() == Some(&0));
    t.row(
        "frames every 2000 ms",
        true,
        frames.len() > 2 && frames.windows(2).all(|w| w[1] - w[0] == 2_000),
    );

    // Label waits.
    let mut m = ConversationManager::new(cfg.clone(), Persona::default(), enrolment());
    let mut out = Vec::new();
    m.on_transcribed(&segment("s1", Some("S1")), Timestamp(1_000), &mut out);
    t.row(
        "relative label due at +800 ms",
        true,
        timers(&out).first().map(|x| x.0) == Some(Timestamp(1_800)),
    );
    let mut m = ConversationManager::new(cfg, Persona::default(), enrolment());
    let mut out = Vec::new();
    m.on_transcribed(&segment("s1", None), Timestamp(1_000), &mut out);
    out.clear();
    m.on_label_due(&"s1".into(), LabelStage::Relative, Timestamp(1_800), &mut out);
    t.row(
        "generic label due at +2000 ms",
        true,
        timers(&out).first().map(|x| x.0) == Some(Timestamp(3_000)),
    );

    let bad: Vec<_> =
        t.0.iter()
            .filter(|(_, want, got)| want != got)
            .map(|r| r.0.clone())
            .collect();
    ensure(bad.is_empty(), || {
        format!(
            "{} of {} boundary cases wrong: {}",
            bad.len(),
            t.0.len(),
            bad.join("; ")
        )
    })?;
    Ok(format!("{} of {} boundary cases", t.0.len(), t.0.len()))
}

// 3 --------------------------------------------------------------------------

fn noiseless_correctness() -> Outcome {
    let mut script = load_scenario(bundled::PARALLEL).map_err(|e| e.to_string())?;
    script.noise = NoiseConfig {
        voice_id_blank_p: 0.0,
        voice_id_wrong_p: 0.0,
        face_blank_p: 0.0,
        face_wrong_p: 0.0,
        doa_jitter_deg: 0,
        ..script.noise
    };
    let out = run(&script);
    let r = MetricsReport::build(&out.trace, &out.truth).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for m in [Modality::Voice, Modality::Face] {
        let t = r.recognition.iter().find(|t| t.modality == m).ok_or("missing table")?;
        ensure(t.correct_pct == 100.0 && t.blank_pct == 0.0 && t.total > 0, || {
            format!(
                "{m:?}: {}/{}/{} of {}",
                t.correct_pct, t.incorrect_pct, t.blank_pct, t.total
            )
        })?;
        detail.push(format!("{m:?} 100% of {}", t.total));
    }
    let a = &r.addressee;
    ensure(a.correct_pct == 100.0 && a.blank_pct == 0.0, || {
        format!(
            "addressee {}/{}/{}/{}",
            a.correct_pct, a.inclusive_pct, a.incorrect_pct, a.blank_pct
        )
    })?;
    detail.push(format!("addressee 100% of {}", a.total));
    Ok(detail.join(", "))
}

// 4 --------------------------------------------------------------------------

fn noise_calibration() -> Outcome {
    const TARGET: [f64; 3] = [26.8, 0.4, 72.8];
    let noise = NoiseConfig {
        voice_id_blank_p: TARGET[2] / 100.0,
        voice_id_wrong_p: TARGET[1] / 100.0,
        seed: 42,
        ..NoiseConfig::default()
    };
    let script = calibration_scenario(10_000, noise);
    let out = run(&script);

    let mut counts = [0usize; 3];
    for (_, call) in out.trace.backend_calls() {
        if let BackendCall::VoiceId { truth, outcome, .. } = call {
            let slot = match (outcome, truth) {
                (None, _) => 2,
                (Some(o), Some(t)) if o == t => 0,
                _ => 1,
            };
            counts[slot] += 1;
        }
    }
    let n: usize = counts.iter().sum();
    ensure(n >= 10_000, || format!("only {n} identification queries"))?;
    let empirical = counts.map(|c| 100.0 * c as f64 / n as f64);
    for (k, (e, want)) in empirical.iter().zip(TARGET).enumerate() {
        ensure((e - want).abs() <= 1.0, || {
            format!("rate {k} is {e:.2}%, want {want}% +/- 1.0")
        })?;
    }

    let r = MetricsReport::build(&out.trace, &out.truth).map_err(|e| e.to_string())?;
    let voice = r
        .recognition
        .iter()
        .find(|t| t.modality == Modality::Voice)
        .ok_or("missing voice table")?;
    let reported = [voice.correct_pct, voice.incorrect_pct, voice.blank_pct];
    for (e, got) in empirical.iter().zip(reported) {
        ensure((e - got).abs() <= 0.1, || {
            format!("table reports {got}%, backend counts give {e:.3}%")
        })?;
    }
    Ok(format!(
        "{n} queries, empirical {:.2}/{:.2}/{:.2}, table {:.1}/{:.1}/{:.1}",
        empirical[0], empirical[1], empirical[2], reported[0], reported[1], reported[2]
    ))
}

// 5 --------------------------------------------------------------------------

const SENTENCES: [&str; 6] = [
    "Welcome both of you, today we are going to plan a long and relaxing weekend trip together. ",
    "I was thinking about the seaside, because the forecast promises plenty of sunshine. ",
    "Alternatively we could visit the old town and try the famous chocolate shops. ",
    "Which of those sounds better to you? ",
    "Let me know whenever you have made up your minds. ",
    "There is no hurry at all. ",
];

fn barge_in_case(seed: u64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let start = rng.gen_range(0..SENTENCES.len() - n + 1);
    let mut b = ScenarioBuilder::new(format!("barge-{seed}"))
        .participant("p1", "alice", 60)
        .participant("p2", "bob", 120)
        .opening()
        .noise(NoiseConfig {
            seed,
            ..NoiseConfig::default()
        })
        .response("", &SENTENCES[start..start + n], IntendedAddressee::Inclusive);
    let mut free_from = [0u64; 2];
    for _ in 0..rng.gen_range(1..=3) {
        let who = rng.gen_range(0..2);
        let actor = ["p1", "p2"][who];
        let at = free_from[who].max(rng.gen_range(300..12_000));
        let len = rng.gen_range(50..3_000);
        if rng.gen_bool(0.4) {
            b = b.utterance(actor, at, at + len, "Sorry, go on.", None);
        } else {
            b = b
                .event(at, Some(actor), EventKind::SpeechStart)
                .event(at + len, Some(actor), EventKind::SpeechEnd);
        }
        free_from[who] = at + len + 200;
    }
    for _ in 0..4 {
        b = b.response(
            "Addressee: alice; Response: ",
            &["Of course. ", "Where were we?"],
            IntendedAddressee::Participant("p1".into()),
        );
    }
    b.build().expect("generated case is valid")
}

fn interruption_semantics() -> Outcome {
    let poll = EngineConfig::default().doa_poll_ms;
    let (mut resumed, mut paused, mut worst_overlap) = (0, 0, 0u64);
    for seed in 0..200u64 {
        let script = barge_in_case(seed);
        let out = run(&script);
        let fail = |what: String| format!("seed {seed}: {what}");

        let mut full: BTreeMap<(u32, u32), String> = BTreeMap::new();
        let mut pending: BTreeMap<(u32, u32), String> = BTreeMap::new();
        let mut speaking: Vec<(u64, u64)> = Vec::new();
        let mut open: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for (ts, action) in out.trace.actions() {
            match action {
                Action::Say {
                    response,
                    sentence,
                    text,
                } => {
                    full.insert((*response, *sentence), text.clone());
                    open.insert((*response, *sentence), ts.0);
                }
                Action::Pause {
                    response,
                    sentence,
                    spoken,
                } => {
                    paused += 1;
                    pending.insert((*response, *sentence), spoken.clone());
                    if let Some(s) = open.remove(&(*response, *sentence)) {
                        speaking.push((s, ts.0));
                    }
                }
                Action::Resume {
                    response,
                    sentence,
                    text,
                } => {
                    resumed += 1;
                    let key = (*response, *sentence);
                    let prefix = pending
                        .remove(&key)
                        .ok_or_else(|| fail(format!("resume of {key:?} without pause")))?;
                    let whole = full
                        .get(&key)
                        .ok_or_else(|| fail(format!("resume of unknown {key:?}")))?;
                    ensure(format!("{prefix}{text}") == *whole, || {
                        fail(format!("{prefix:?} + {text:?} != {whole:?}"))
                    })?;
                    open.insert(key, ts.0);
                }
                Action::EndSpeech { response, sentence } => {
                    if let Some(s) = open.remove(&(*response, *sentence)) {
                        speaking.push((s, ts.0));
                    }
                }
                _ => {}
            }
        }
        let end = out.trace.end().0;
        speaking.extend(open.values().map(|s| (*s, end)));

        let spoken: Vec<&str> = out
            .trace
            .events()
            .filter_map(|(_, m)| match m {
                Message::SpokenText(s) if !s.text.is_empty() => Some(s.text.as_str()),
                _ => None,
            })
            .collect();
        let history: Vec<&str> = out
            .trace
            .events()
            .filter_map(|(_, m)| match m {
                Message::History(h) if h.source == HistorySource::Robot => Some(h.text.as_str()),
                _ => None,
            })
            .collect();
        ensure(history == spoken, || {
            fail(format!("history {history:?} != spoken {spoken:?}"))
        })?;

        // The robot hears users only through direction-of-arrival polls, so
        // it may talk over a user for at most one poll period.
        for span in script.speech_spans().values().flatten() {
            for &(s, e) in &speaking {
                let overlap = e.min(span.end_ms).saturating_sub(s.max(span.start_ms));
                worst_overlap = worst_overlap.max(overlap);
                ensure(overlap <= poll, || {
                    fail(format!(
                        "robot spoke over user span {}..{} during {s}..{e}",
                        span.start_ms, span.end_ms
                    ))
                })?;
            }
        }
    }
    ensure(resumed > 0, || "no case resumed".into())?;
    Ok(format!(
        "200 cases, {paused} pauses, {resumed} resumptions, worst overlap {worst_overlap} ms (bound {poll} ms)"
    ))
}

// 6 --------------------------------------------------------------------------

/// Independent single-pass reading of a complete response.
fn reference_split(text: &str, terminators: &[char]) -> (Option<String>, Vec<String>) {
    fn strip_ci<'a>(s: &'a str, key: &str) -> Option<&'a str> {
        let head = s.get(..key.len())?;
        head.eq_ignore_ascii_case(key).then(|| &s[key.len()..])
    }
    let mut header = None;
    let mut body = text;
    if let Some(after) = strip_ci(text.trim_start(), "Addressee:") {
        if let Some((name, rest)) = after.split_once(';') {
            header = Some(name.trim().to_owned());
            let rest = rest.trim_start();
            body = strip_ci(rest, "Response:").unwrap_or(rest);
        }
    }
    let mut sentences = Vec::new();
    let mut current = String::new();
    for c in body.chars() {
        current.push(c);
        if terminators.contains(&c) {
            let piece = current.trim();
            if piece.chars().any(|c| !terminators.contains(&c) && !c.is_whitespace()) {
                sentences.push(piece.to_owned());
            }
            current.clear();
        }
    }
    if !current.trim().is_empty() {
        sentences.push(current.trim().to_owned());
    }
    (header, sentences)
}

fn random_chunks(text: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let n = rng.gen_range(0..=8).min(chars.len() - i);
        chunks.push(chars[i..i + n].iter().collect());
        i += n;
    }
    chunks
}

fn streaming_parser() -> Outcome {
    let text = std::fs::read_to_string(fixture("responses.json")).map_err(|e| e.to_string())?;
    let responses: Vec<String> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(responses.len() == 50, || format!("{} fixtures", responses.len()))?;
    let terminators = EngineConfig::default().sentence_terminators;
    let people = vec!["alice".to_owned(), "bob".to_owned()];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut chunkings = 0;
    for (i, response) in responses.iter().enumerate() {
        let (want_header, want) = reference_split(response, &terminators);
        let (single_header, single) = split_response(response, &terminators);
        ensure(single == want, || {
            format!("fixture {i}: single pass {single:?} != {want:?}")
        })?;
        let single_name = match &single_header {
            Header::Named(n) => Some(n.clone()),
            Header::Absent => None,
        };
        ensure(single_name == want_header, || {
            format!("fixture {i}: header {single_header:?}")
        })?;
        let parsed = parse_addressee(response, &people);

        for _ in 0..1_000 {
            chunkings += 1;
            let mut stream = ResponseStream::new(&terminators);
            let mut got = Vec::new();
            let mut headers = Vec::new();
            for chunk in random_chunks(response, &mut rng) {
                let out = stream.push(&chunk);
                headers.extend(out.header);
                got.extend(out.sentences);
            }
            let out = stream.finish();
            headers.extend(out.header);
            got.extend(out.sentences);
            ensure(got == single, || format!("fixture {i}: streamed {got:?} != {single:?}"))?;
            ensure(headers == [single_header.clone()], || {
                format!("fixture {i}: headers {headers:?}")
            })?;
            let addressee = match &headers[0] {
                Header::Named(n) => match_participant(n, &people).map(str::to_owned),
                Header::Absent => None,
            };
            ensure(addressee == parsed.addressee, || {
                format!(
                    "fixture {i}: streamed addressee {addressee:?} != {:?}",
                    parsed.addressee
                )
            })?;
        }
    }
    Ok(format!("{chunkings} chunkings of {} responses", responses.len()))
}

// 7 --------------------------------------------------------------------------

fn metrics_oracle() -> Outcome {
    let scripts = [bundled::PARALLEL, bundled::GROUP]
        .into_iter()
        .map(|s| load_scenario(s).expect("bundled scenario"))
        .chain((0..300).map(gen::random_scenario))
        .filter(|s| s.segments().len() <= 10);
    let mut n = 0;
    for script in scripts {
        n += 1;
        let out = run(&script);
        let r = MetricsReport::build(&out.trace, &out.truth).map_err(|e| format!("{}: {e}", script.id))?;
        let want = oracle::brute_force(&out.trace.to_jsonl(), &out.truth.to_json());
        let got = oracle::from_report(&r);
        ensure(got == want, || format!("{}: {got:?} != {want:?}", script.id))?;
    }
    Ok(format!("{n} scenarios agree exactly"))
}

// 8 --------------------------------------------------------------------------

fn latency_accounting() -> Outcome {
    let mut base = load_scenario(bundled::PARALLEL).map_err(|e| e.to_string())?;
    base.noise.llm_delay_ms_per_chunk = 760;
    let measure = |asr: u64| -> Result<(f64, Vec<u64>, Option<f64>), String> {
        let mut s = base.clone();
        s.noise.asr_delay_ms = asr;
        let out = run_with_seed(&s, 42);
        let r = MetricsReport::build(&out.trace, &out.truth).map_err(|e| e.to_string())?;
        let generation = r.latency.generation_mean_ms.ok_or("no generation samples")?;
        Ok((
            generation,
            r.latency.samples.iter().map(|x| x.latency_ms()).collect(),
            r.latency.mean_ms,
        ))
    };
    let (generation, reference, mean) = measure(600)?;
    ensure((generation - 760.0).abs() <= 1.0, || {
        format!("generation mean {generation} ms")
    })?;
    ensure(!reference.is_empty(), || "no latency samples".into())?;
    for asr in [100, 1_100] {
        let (g, samples, m) = measure(asr)?;
        ensure(samples == reference && m == mean, || {
            format!("asr delay {asr} ms changed latency: {samples:?} vs {reference:?}")
        })?;
        ensure((g - 760.0).abs() <= 1.0, || {
            format!("generation mean {g} ms at asr delay {asr}")
        })?;
    }
    Ok(format!(
        "generation mean {generation} ms, latency mean {:.1} ms unchanged for asr delay 100/600/1100 ms",
        mean.unwrap_or(f64::NAN)
    ))
}

// 9 --------------------------------------------------------------------------

fn fusion_oracle() -> Outcome {
    const IDS: [&str; 4] = ["alice", "bob", "carol", "dave"];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut conflicts = 0;
    for case in 0..500 {
        // Coarse angles and confidences make ties common.
        let doa = rng.gen_range(0..18) * 10;
        let mut faces = Vec::new();
        for id in IDS {
            if rng.gen_bool(0.6) {
                faces.push(FaceCandidate {
                    id: id.into(),
                    angle_deg: rng.gen_range(0..18) * 10,
                    confidence: [0.6, 0.8, 0.9][rng.gen_range(0..3)],
                });
            }
        }
        let voice: Option<ParticipantId> = rng.gen_bool(0.7).then(|| IDS[rng.gen_range(0..4)].into());

        let mut want = None;
        if let Some(best) = faces.iter().map(|f| f.angle_deg.abs_diff(doa)).min() {
            let nearest: Vec<_> = faces.iter().filter(|f| f.angle_deg.abs_diff(doa) == best).collect();
            let top = nearest.iter().map(|f| f.confidence).fold(f64::MIN, f64::max);
            let mut winners: Vec<&str> = nearest
                .iter()
                .filter(|f| f.confidence == top)
                .map(|f| f.id.as_str())
                .collect();
            winners.sort();
            let speaker = winners[0].to_owned();
            let conflict = voice.as_ref().is_some_and(|v| v.as_str() != speaker);
            want = Some((speaker, conflict));
        }

        let got = fuse(doa, &faces, voice.as_ref()).map(|f| (f.speaker.as_str().to_owned(), f.conflict));
        ensure(got == want, || {
            format!("case {case}: doa {doa}, voice {voice:?}: {got:?} != {want:?}")
        })?;
        conflicts += usize::from(want.is_some_and(|w| w.1));
    }
    Ok(format!("500 of 500 cases, {conflicts} resolved in favour of the face"))
}

// 10 -------------------------------------------------------------------------

fn prompt_golden() -> Outcome {
    let text = std::fs::read_to_string(fixture("prompt_context.json")).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let ctx = PromptContext {
        persona: serde_json::from_value::<Persona>(v["persona"].clone()).map_err(|e| e.to_string())?,
        participants: serde_json::from_value(v["participants"].clone()).map_err(|e| e.to_string())?,
        history: serde_json::from_value::<Vec<HistoryEntry>>(v["history"].clone()).map_err(|e| e.to_string())?,
    };
    let golden = std::fs::read_to_string(fixture("prompt_golden.txt")).map_err(|e| e.to_string())?;
    let prompt = build_prompt(&ctx);
    if prompt != golden {
        let line = prompt.lines().zip(golden.lines()).position(|(a, b)| a != b);
        return Err(format!(
            "prompt differs from golden file (first differing line {line:?})"
        ));
    }
    Ok(format!("{} bytes identical", golden.len()))
}
