//! Metrics computed from run traces.
//!
//! All delay averages use the noise-free delay of the chosen partition.

use serde::{Deserialize, Serialize};

use super::run::{RunOutput, TraceRecord};

/// Consecutive oracle-matching frames required to call a policy adapted.
pub const ADAPT_WINDOW: u64 = 20;

pub fn cumulative_regret(trace: &[TraceRecord]) -> Vec<f64> {
    trace
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r.regret;
            Some(*acc)
        })
        .collect()
}

fn in_window(r: &TraceRecord, from: u64, to: u64) -> bool {
    (from..=to).contains(&r.t)
}

/// Regret summed over frames `from..=to`.
pub fn regret_between(trace: &[TraceRecord], from: u64, to: u64) -> f64 {
    trace.iter().filter(|r| in_window(r, from, to)).map(|r| r.regret).sum()
}

/// Mean absolute percentage error (in %) of the predicted edge delay of the
/// chosen partition against its noise-free value, over offloading frames in
/// `from..=to` that carry a prediction.
pub fn mape(trace: &[TraceRecord], from: u64, to: u64) -> Option<f64> {
    let errs: Vec<f64> = trace
        .iter()
        .filter(|r| in_window(r, from, to) && r.expected_de > 0.0)
        .filter_map(|r| r.predicted_de.map(|p| (p - r.expected_de).abs() / r.expected_de))
        .collect();
    mean(&errs).map(|m| 100.0 * m)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub fn mean_delay<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> Option<f64> {
    let delays: Vec<f64> = records.into_iter().map(TraceRecord::total_delay).collect();
    mean(&delays)
}

/// Frames from `change` until the policy starts a run of [`ADAPT_WINDOW`]
/// frames that all match the oracle, looking no further than frame `until`;
/// `None` if that never happens. Forced frames that miss the oracle neither
/// count toward nor break the run.
pub fn adaptation_time(trace: &[TraceRecord], change: u64, until: u64) -> Option<u64> {
    let mut run_start = None;
    let mut matched = 0;
    for r in trace.iter().filter(|r| r.t >= change && r.t <= until) {
        if r.partition == r.oracle_partition {
            let start = *run_start.get_or_insert(r.t);
            matched += 1;
            if matched >= ADAPT_WINDOW {
                return Some(start - change);
            }
        } else if !r.forced {
            run_start = None;
            matched = 0;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

impl TimingStats {
    pub fn from_samples(samples: &[u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let pick = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
        Some(TimingStats {
            mean_ns: sorted.iter().map(|&v| v as f64).sum::<f64>() / sorted.len() as f64,
            p50_ns: pick(0.5),
            p99_ns: pick(0.99),
            max_ns: *sorted.last().unwrap(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adaptation {
    pub change_frame: u64,
    pub frames: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub frames: u64,
    pub total_regret: f64,
    pub cumulative_regret: Vec<f64>,
    pub mape_percent: Option<f64>,
    pub mean_delay_ms: Option<f64>,
    pub mean_delay_key_ms: Option<f64>,
    pub mean_delay_nonkey_ms: Option<f64>,
    pub oracle_mean_delay_ms: Option<f64>,
    pub forced_frames: u64,
    pub on_device_frames: u64,
    pub adaptation: Vec<Adaptation>,
    pub decision_time: Option<TimingStats>,
}

impl MetricsSummary {
    /// `on_device` is the index of the all-local partition; `changes` lists
    /// the frames where the environment changed.
    pub fn from_run(out: &RunOutput, on_device: usize, changes: &[u64]) -> Self {
        let trace = &out.trace;
        let cumulative = cumulative_regret(trace);
        let last = trace.last().map_or(0, |r| r.t);
        let oracle: Vec<f64> = trace.iter().map(|r| r.oracle_total).collect();
        MetricsSummary {
            frames: trace.len() as u64,
            total_regret: cumulative.last().copied().unwrap_or(0.0),
            cumulative_regret: cumulative,
            mape_percent: mape(trace, 1, last),
            mean_delay_ms: mean_delay(trace),
            mean_delay_key_ms: mean_delay(trace.iter().filter(|r| r.is_key)),
            mean_delay_nonkey_ms: mean_delay(trace.iter().filter(|r| !r.is_key)),
            oracle_mean_delay_ms: mean(&oracle),
            forced_frames: trace.iter().filter(|r| r.forced).count() as u64,
            on_device_frames: trace.iter().filter(|r| r.partition == on_device).count() as u64,
            adaptation: changes
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let until = changes.get(i + 1).map_or(last, |next| next - 1);
                    Adaptation {
                        change_frame: c,
                        frames: adaptation_time(trace, c, until),
                    }
                })
                .collect(),
            decision_time: TimingStats::from_samples(&out.decision_ns),
        }
    }
}
