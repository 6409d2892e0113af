//! Response latency.
//!
//! Latency runs from the moment the triggering segment's transcription
//! reached the engine to the first spoken sentence of the response, so
//! recogniser delay is never counted. Responses with no triggering segment
//! (an opening) or that were never voiced are left out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use trialogue_core::backend::Action;
use trialogue_core::{Message, SegmentId, Timestamp};
use trialogue_sim::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencySample {
    pub response: u32,
    pub segment: SegmentId,
    pub transcribed_ts: Timestamp,
    pub request_ts: Timestamp,
    pub first_chunk_ts: Timestamp,
    pub onset_ts: Timestamp,
}

impl LatencySample {
    pub fn latency_ms(&self) -> u64 {
        self.onset_ts.since(self.transcribed_ts)
    }

    pub fn generation_ms(&self) -> u64 {
        self.first_chunk_ts.since(self.request_ts)
    }
}

/// Figures are absent when `n` is zero. `sd_ms` is the population standard
/// deviation over the same `n` responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n: usize,
    pub mean_ms: Option<f64>,
    pub sd_ms: Option<f64>,
    pub max_ms: Option<u64>,
    pub generation_mean_ms: Option<f64>,
    pub samples: Vec<LatencySample>,
}

pub fn latency_samples(trace: &Trace) -> Vec<LatencySample> {
    let mut transcribed = BTreeMap::new();
    let mut requests = Vec::new();
    let mut first_chunk = BTreeMap::new();
    for (ts, msg) in trace.events() {
        match msg {
            Message::Transcribed(seg) => {
                transcribed.entry(seg.id.clone()).or_insert(ts);
            }
            Message::LlmRequest(req) => requests.push((req.response, req.segment.clone(), ts)),
            Message::LlmChunk(c) => {
                first_chunk.entry(c.response).or_insert(ts);
            }
            _ => {}
        }
    }
    let mut onset = BTreeMap::new();
    for (ts, action) in trace.actions() {
        if let Action::Say { response, .. } = action {
            onset.entry(*response).or_insert(ts);
        }
    }
    requests
        .into_iter()
        .filter_map(|(response, segment, request_ts)| {
            let segment = segment?;
            Some(LatencySample {
                response,
                transcribed_ts: *transcribed.get(&segment)?,
                segment,
                request_ts,
                first_chunk_ts: *first_chunk.get(&response)?,
                onset_ts: *onset.get(&response)?,
            })
        })
        .collect()
}

pub fn latency_stats(trace: &Trace) -> LatencyStats {
    summarise(latency_samples(trace))
}

pub fn summarise(samples: Vec<LatencySample>) -> LatencyStats {
    let n = samples.len();
    if n == 0 {
        return LatencyStats {
            n,
            mean_ms: None,
            sd_ms: None,
            max_ms: None,
            generation_mean_ms: None,
            samples,
        };
    }
    let lat: Vec<f64> = samples.iter().map(|s| s.latency_ms() as f64).collect();
    let mean = lat.iter().sum::<f64>() / n as f64;
    let var = lat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let generation = samples.iter().map(|s| s.generation_ms() as f64).sum::<f64>() / n as f64;
    LatencyStats {
        n,
        mean_ms: Some(mean),
        sd_ms: Some(var.sqrt()),
        max_ms: samples.iter().map(LatencySample::latency_ms).max(),
        generation_mean_ms: Some(generation),
        samples,
    }
}
