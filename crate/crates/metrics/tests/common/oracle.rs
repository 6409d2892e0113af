//! Brute-force scorer over the raw JSON text of a trace and truth file.
//!
//! Shares no code with the metrics crate: every table is recomputed with
//! straight-line loops over untyped JSON values.

use serde_json::Value;
use trialogue_metrics::{MetricsReport, Modality};

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    /// correct, incorrect, blank
    pub voice: [usize; 3],
    pub face: [usize; 3],
    /// correct, inclusive, incorrect, blank
    pub addressee: [usize; 4],
    /// n, mean, population sd, max, generation mean
    pub latency: (usize, Option<f64>, Option<f64>, Option<u64>, Option<f64>),
    pub barge_ins: usize,
    pub user_overlaps: usize,
}

pub fn from_report(r: &MetricsReport) -> Tables {
    let rec = |m: Modality| {
        let t = r.recognition.iter().find(|t| t.modality == m).unwrap();
        assert_eq!(t.total, t.correct + t.incorrect + t.blank);
        [t.correct, t.incorrect, t.blank]
    };
    let a = &r.addressee;
    let l = &r.latency;
    Tables {
        voice: rec(Modality::Voice),
        face: rec(Modality::Face),
        addressee: [a.correct, a.inclusive, a.incorrect, a.blank],
        latency: (l.n, l.mean_ms, l.sd_ms, l.max_ms, l.generation_mean_ms),
        barge_ins: r.interruptions.barge_ins,
        user_overlaps: r.interruptions.user_overlaps,
    }
}

fn topic<'a>(rec: &'a Value, name: &str) -> Option<&'a Value> {
    if rec["kind"] == "event" && rec["message"]["topic"] == name {
        Some(&rec["message"]["payload"])
    } else {
        None
    }
}

pub fn brute_force(trace_jsonl: &str, truth_json: &str) -> Tables {
    let records: Vec<Value> = trace_jsonl
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let truth: Value = serde_json::from_str(truth_json).unwrap();

    // Voice: one query per transcribed segment.
    let mut voice = [0; 3];
    let mut done: Vec<String> = Vec::new();
    for rec in &records {
        let Some(seg) = topic(rec, "transcribed") else { continue };
        let id = seg["id"].as_str().unwrap().to_owned();
        if done.contains(&id) {
            continue;
        }
        done.push(id.clone());
        let mut speaker = None;
        for s in truth["segments"].as_array().unwrap() {
            if s["segment"] == id.as_str() {
                speaker = Some(s["speaker"].as_str().unwrap());
            }
        }
        let speaker = speaker.expect("truth covers segment");
        let mut predicted = None;
        for r in &records {
            if let Some(b) = topic(r, "speaker") {
                if b["segment"] == id.as_str() && b["source"] == "voice" && predicted.is_none() {
                    predicted = Some(b["id"].as_str().unwrap());
                }
            }
        }
        match predicted {
            None => voice[2] += 1,
            Some(p) if p == speaker => voice[0] += 1,
            Some(_) => voice[1] += 1,
        }
    }

    // Face: one query per true face per camera frame.
    let mut face = [0; 3];
    for rec in &records {
        if rec["kind"] != "backend" || rec["call"]["backend"] != "frame" {
            continue;
        }
        let ts = &rec["ts"];
        let mut seen: Vec<(u64, String)> = Vec::new();
        for r in &records {
            if let Some(u) = topic(r, "users") {
                for f in u["faces"].as_array().unwrap() {
                    if &f["frame_ts"] == ts {
                        seen.push((f["angle_deg"].as_u64().unwrap(), f["id"].as_str().unwrap().to_owned()));
                    }
                }
            }
        }
        let frame = truth["frames"]
            .as_array()
            .unwrap()
            .iter()
            .find(|f| &f["ts"] == ts)
            .expect("truth covers frame");
        for f in frame["faces"].as_array().unwrap() {
            let angle = f["angle_deg"].as_u64().unwrap();
            let mut hit = None;
            for (i, (a, _)) in seen.iter().enumerate() {
                if *a == angle {
                    hit = Some(i);
                    break;
                }
            }
            match hit {
                None => face[2] += 1,
                Some(i) => {
                    let (_, id) = seen.remove(i);
                    if id == f["id"].as_str().unwrap() {
                        face[0] += 1;
                    } else {
                        face[1] += 1;
                    }
                }
            }
        }
    }

    // Addressee, and latency samples, per model request.
    let mut addressee = [0; 4];
    let mut latencies: Vec<(u64, u64)> = Vec::new();
    for rec in &records {
        let Some(req) = topic(rec, "llm-request") else { continue };
        let response = req["response"].as_u64().unwrap();
        let t = truth["responses"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["turn_index"] == response)
            .expect("truth covers response");
        let mut predicted = None;
        let mut first_chunk = None;
        let mut onset = None;
        for r in &records {
            if let Some(a) = topic(r, "addressee") {
                if a["response"] == response && predicted.is_none() {
                    predicted = Some(a["id"].as_str().unwrap().to_owned());
                }
            }
            if let Some(c) = topic(r, "llm-chunk") {
                if c["response"] == response && first_chunk.is_none() {
                    first_chunk = r["ts"].as_u64();
                }
            }
            if r["kind"] == "action"
                && r["action"]["action"] == "say"
                && r["action"]["response"] == response
                && onset.is_none()
            {
                onset = r["ts"].as_u64();
            }
        }
        let intended = t["addressee"].as_str().unwrap();
        let both = t["both_addressed"] == true;
        let category = if intended == "inclusive" {
            if predicted.is_none() || both {
                1
            } else {
                2
            }
        } else {
            match &predicted {
                Some(p) if p == intended => 0,
                Some(_) => 2,
                None => 3,
            }
        };
        addressee[category] += 1;

        let Some(segment) = req["segment"].as_str() else {
            continue;
        };
        let mut transcribed = None;
        for r in &records {
            if let Some(s) = topic(r, "transcribed") {
                if s["id"] == segment && transcribed.is_none() {
                    transcribed = r["ts"].as_u64();
                }
            }
        }
        if let (Some(tr), Some(chunk), Some(on)) = (transcribed, first_chunk, onset) {
            latencies.push((on - tr, chunk - rec["ts"].as_u64().unwrap()));
        }
    }
    let n = latencies.len();
    let latency = if n == 0 {
        (0, None, None, None, None)
    } else {
        let mut sum = 0.0;
        let mut gen = 0.0;
        let mut max = 0;
        for (l, g) in &latencies {
            sum += *l as f64;
            gen += *g as f64;
            max = max.max(*l);
        }
        let mean = sum / n as f64;
        let mut sq = 0.0;
        for (l, _) in &latencies {
            sq += (*l as f64 - mean).powi(2);
        }
        (
            n,
            Some(mean),
            Some((sq / n as f64).sqrt()),
            Some(max),
            Some(gen / n as f64),
        )
    };

    // Interruptions: pauses, then pairwise overlaps of rebuilt speech spans.
    let mut barge_ins = 0;
    let mut spans: Vec<(String, u64, u64)> = Vec::new();
    let mut open: Vec<(String, u64)> = Vec::new();
    for rec in &records {
        if rec["kind"] == "action" && rec["action"]["action"] == "pause" {
            barge_ins += 1;
        }
        if rec["kind"] != "stimulus" {
            continue;
        }
        let ev = &rec["event"];
        let actor = ev["actor"].as_str().unwrap_or_default().to_owned();
        let ts = rec["ts"].as_u64().unwrap();
        if ev["kind"] == "speech_start" {
            open.push((actor, ts));
        } else if ev["kind"] == "speech_end" {
            let i = open.iter().position(|(a, _)| *a == actor).unwrap();
            let (a, s) = open.remove(i);
            spans.push((a, s, ts));
        }
    }
    let mut user_overlaps = 0;
    for i in 0..spans.len() {
        for j in i + 1..spans.len() {
            let (a, s1, e1) = &spans[i];
            let (b, s2, e2) = &spans[j];
            if a != b && s1.max(s2) < e1.min(e2) {
                user_overlaps += 1;
            }
        }
    }

    Tables {
        voice,
        face,
        addressee,
        latency,
        barge_ins,
        user_overlaps,
    }
}
