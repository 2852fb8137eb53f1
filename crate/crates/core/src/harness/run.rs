//! The frame loop.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{KeyframeConfig, Policy, Scenario, SceneChanges};
use crate::bandit::Learner;
use crate::baselines::{eo_select, mo_select, oracle_select, LayerwiseProfiler};
use crate::env::{keyed_rng, Environment};
use crate::error::Result;
use crate::keyframe::{FrameStream, KeySchedule};
use crate::model::{context_table, frontend_profile, ContextTable};

/// One row of a run trace. Delays are in ms; `expected_de` and the oracle
/// columns are noise-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub is_key: bool,
    pub weight: f64,
    pub forced: bool,
    pub partition: usize,
    pub d_f: f64,
    /// The policy's own estimate of the edge delay, when it has one.
    pub predicted_de: Option<f64>,
    pub observed_de: Option<f64>,
    pub expected_de: f64,
    pub oracle_partition: usize,
    pub oracle_total: f64,
    pub regret: f64,
}

impl TraceRecord {
    /// Noise-free end-to-end delay of the chosen partition.
    pub fn total_delay(&self) -> f64 {
        self.d_f + self.expected_de
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    /// Wall time of each decision in ns. Kept apart from the trace so that
    /// traces are bit-for-bit reproducible.
    pub decision_ns: Vec<u64>,
}

const TAG_KEYS: u64 = 0x6b65_7973;
const TAG_SCENES: u64 = 0x7363_656e;

fn sub_seed(seed: u64, tag: u64) -> u64 {
    keyed_rng(seed, tag, 0, 0).random()
}

fn key_schedule(config: &KeyframeConfig, frames: u64, seed: u64) -> Result<KeySchedule> {
    Ok(match config {
        KeyframeConfig::Flags(flags) => KeySchedule::Flags(flags.clone()),
        KeyframeConfig::Rate(rate) => KeySchedule::Rate {
            rate: *rate,
            seed: sub_seed(seed, TAG_KEYS),
        },
        KeyframeConfig::Ssim {
            threshold,
            dims,
            scene_changes,
        } => {
            let changes = match scene_changes {
                SceneChanges::At(list) => list.clone(),
                SceneChanges::Rate(rate) => {
                    let s = sub_seed(seed, TAG_SCENES);
                    (2..=frames)
                        .filter(|&t| keyed_rng(s, TAG_SCENES, t, 0).random::<f64>() < *rate)
                        .collect()
                }
            };
            KeySchedule::ssim(FrameStream::new(&changes, *dims, sub_seed(seed, TAG_KEYS))?, *threshold)
        }
    })
}

enum Chooser {
    Learner(Box<Learner>),
    Oracle,
    Mo,
    Eo,
    Layerwise(LayerwiseProfiler),
}

/// A scenario instantiated for one seed, advanced one frame at a time.
pub struct Session {
    env: Environment,
    keys: KeySchedule,
    chooser: Chooser,
    d_f: Vec<f64>,
    contexts: ContextTable,
    l_key: f64,
    l_nonkey: f64,
    next_t: u64,
    last_decision_ns: u64,
}

impl Session {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        let contexts = context_table(&scenario.descriptor)?;
        let d_f = frontend_profile(&scenario.descriptor, &scenario.env.device);
        let mut env = Environment::new(scenario.env.clone(), contexts.clone(), seed)?;
        let learner_cfg = scenario.effective_learner();
        let chooser = match scenario.policy {
            Policy::Ans | Policy::Linucb => {
                let (normalized, _) = contexts.normalized();
                Chooser::Learner(Box::new(Learner::new(learner_cfg.clone(), normalized, d_f.clone())?))
            }
            Policy::Oracle => Chooser::Oracle,
            Policy::Mo => Chooser::Mo,
            Policy::Eo => Chooser::Eo,
            // Profiled once, offline, under the conditions of the first frame.
            Policy::Layerwise => Chooser::Layerwise(LayerwiseProfiler::fit(&env.true_theta(1), &contexts[0])),
        };
        Ok(Session {
            keys: key_schedule(&scenario.keyframes, scenario.frames, seed)?,
            env,
            chooser,
            d_f,
            contexts,
            l_key: learner_cfg.l_key,
            l_nonkey: learner_cfg.l_nonkey,
            next_t: 1,
            last_decision_ns: 0,
        })
    }

    pub fn environment(&mut self) -> &mut Environment {
        &mut self.env
    }

    pub fn learner(&self) -> Option<&Learner> {
        match &self.chooser {
            Chooser::Learner(l) => Some(l),
            _ => None,
        }
    }

    pub fn frontend_delays(&self) -> &[f64] {
        &self.d_f
    }

    /// Index of the next frame to be processed.
    pub fn next_frame(&self) -> u64 {
        self.next_t
    }

    pub fn last_decision_ns(&self) -> u64 {
        self.last_decision_ns
    }

    pub fn step(&mut self) -> Result<TraceRecord> {
        let t = self.next_t;
        let event = self.keys.event(t, self.l_key, self.l_nonkey)?;
        let on_device = self.contexts.on_device();

        let started = Instant::now();
        let (partition, forced, predicted) = match &mut self.chooser {
            Chooser::Learner(learner) => {
                let d = learner.decide(t, event.weight)?;
                (d.partition, d.forced, Some(d.predicted_edge_delay))
            }
            Chooser::Oracle => {
                let c = oracle_select(&mut self.env, t, &self.d_f);
                (c.partition, false, Some(c.total - self.d_f[c.partition]))
            }
            Chooser::Mo => (mo_select(on_device), false, None),
            Chooser::Eo => (eo_select(), false, None),
            Chooser::Layerwise(prof) => {
                let p = prof.select(&self.contexts, &self.d_f);
                (p, false, Some(prof.predict(&self.contexts[p])))
            }
        };
        self.last_decision_ns = started.elapsed().as_nanos() as u64;

        let oracle = oracle_select(&mut self.env, t, &self.d_f);
        let expected_de = self.env.true_edge_delay(partition, t);
        let observed_de = self.env.observe(partition, t);
        if let Chooser::Learner(learner) = &mut self.chooser {
            learner.update(partition, observed_de)?;
        }
        self.next_t += 1;

        let d_f = self.d_f[partition];
        Ok(TraceRecord {
            t,
            is_key: event.is_key,
            weight: event.weight,
            forced,
            partition,
            d_f,
            predicted_de: predicted.filter(|_| partition != on_device),
            observed_de,
            expected_de,
            oracle_partition: oracle.partition,
            oracle_total: oracle.total,
            regret: (d_f + expected_de - oracle.total).max(0.0),
        })
    }
}

/// Runs `scenario.frames` frames with the given seed.
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput> {
    let mut session = Session::new(scenario, seed)?;
    let n = scenario.frames as usize;
    let mut trace = Vec::with_capacity(n);
    let mut decision_ns = Vec::with_capacity(n);
    for _ in 0..n {
        trace.push(session.step()?);
        decision_ns.push(session.last_decision_ns());
    }
    Ok(RunOutput { trace, decision_ns })
}
