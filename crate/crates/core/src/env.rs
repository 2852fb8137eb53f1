//! Simulated edge-offloading environment.
//!
//! The ground truth is linear in the partition features: the edge
//! offloading delay of partition `p` at frame `t` is
//! `theta(t) . x_p + noise`, where `theta(t)` follows a scripted or
//! Markov-switching schedule. All randomness is derived from the seed and
//! the frame/partition indices, so any observation can be replayed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ContextTable, ContextVector, DeviceProfile, FEATURE_DIM};

/// Converts an uplink rate into the ms-per-MB transmission coefficient.
pub fn uplink_coefficient(mbps: f64) -> f64 {
    8000.0 / mbps
}

/// True edge coefficients, aligned with [`ContextVector`]: ms/GMAC for
/// conv/fc/act compute, ms per conv/fc/act layer, ms per MB uplinked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector(pub [f64; FEATURE_DIM]);

impl ThetaVector {
    pub fn from_uplink(compute: [f64; FEATURE_DIM - 1], uplink_mbps: f64) -> Self {
        let mut theta = [0.0; FEATURE_DIM];
        theta[..FEATURE_DIM - 1].copy_from_slice(&compute);
        theta[FEATURE_DIM - 1] = uplink_coefficient(uplink_mbps);
        ThetaVector(theta)
    }

    pub fn uplink_ms_per_mb(&self) -> f64 {
        self.0[FEATURE_DIM - 1]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ThetaVector(self.0.map(|v| v * factor))
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for (i, v) in self.0.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::schema(
                    format!("{path}[{i}]"),
                    format!("coefficient must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsSchedule {
    Stationary(ThetaVector),
    /// Segments `(start_frame, theta)`; starts strictly increasing from 1.
    Steps(Vec<(u64, ThetaVector)>),
    /// Two-state chain starting in `a`; at every frame after the first it
    /// flips state with probability `p_f`.
    Markov {
        a: ThetaVector,
        b: ThetaVector,
        p_f: f64,
    },
}

impl DynamicsSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            DynamicsSchedule::Stationary(theta) => theta.validate("env.theta"),
            DynamicsSchedule::Steps(steps) => {
                if steps.is_empty() {
                    return Err(Error::schema("env.steps", "at least one segment required"));
                }
                if steps[0].0 != 1 {
                    return Err(Error::schema(
                        "env.steps[0].start",
                        "first segment must start at frame 1",
                    ));
                }
                for (i, w) in steps.windows(2).enumerate() {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::schema(
                            format!("env.steps[{}].start", i + 1),
                            "segment starts must be strictly increasing",
                        ));
                    }
                }
                for (i, (_, theta)) in steps.iter().enumerate() {
                    theta.validate(&format!("env.steps[{i}].theta"))?;
                }
                Ok(())
            }
            DynamicsSchedule::Markov { a, b, p_f } => {
                a.validate("env.markov.theta_a")?;
                b.validate("env.markov.theta_b")?;
                if !(0.0..=1.0).contains(p_f) {
                    return Err(Error::schema(
                        "env.markov.p_f",
                        format!("must lie in [0, 1], got {p_f}"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Frames at which the step schedule changes segment (empty otherwise).
    pub fn change_frames(&self) -> Vec<u64> {
        match self {
            DynamicsSchedule::Steps(steps) => steps.iter().skip(1).map(|(s, _)| *s).collect(),
            _ => Vec::new(),
        }
    }
}

/// Zero-mean Gaussian truncated at `truncation * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
}

fn default_truncation() -> f64 {
    3.0
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Self {
        NoiseModel {
            sigma,
            truncation: default_truncation(),
        }
    }

    /// Almost-sure bound on the noise magnitude.
    pub fn bound(&self) -> f64 {
        self.sigma * self.truncation
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::schema("env.noise_sigma_ms", "must be finite and >= 0"));
        }
        if !self.truncation.is_finite() || self.truncation <= 0.0 {
            return Err(Error::schema("env.noise_truncation", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= self.truncation {
                return z * self.sigma;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub schedule: DynamicsSchedule,
    pub noise: NoiseModel,
    pub device: DeviceProfile,
    /// When positive, the compute part of each partition's true delay is
    /// multiplied by a fixed factor drawn from `[1 - eps, 1]`.
    pub nonlinear_eps: f64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.noise.validate()?;
        self.device.validate()?;
        if !(0.0..1.0).contains(&self.nonlinear_eps) {
            return Err(Error::schema("env.nonlinear_eps", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

const TAG_NOISE: u64 = 0x006e_6f69_7365;
const TAG_MARKOV: u64 = 0x6d61_726b_6f76;
const TAG_PERTURB: u64 = 0x7065_7274;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG stream keyed by `(seed, tag, a, b)`.
pub(crate) fn keyed_rng(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let k = splitmix(splitmix(splitmix(seed ^ splitmix(tag)) ^ a) ^ b.rotate_left(17));
    ChaCha8Rng::seed_from_u64(k)
}

/// Noise draw used by [`Environment::observe`] for `(seed, t, p)`.
pub fn noise_draw(noise: &NoiseModel, seed: u64, t: u64, p: usize) -> f64 {
    noise.sample(&mut keyed_rng(seed, TAG_NOISE, t, p as u64))
}

/// One simulated environment instance bound to a descriptor's raw context
/// table. Single-owner: the Markov trajectory is materialized lazily.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    contexts: ContextTable,
    seed: u64,
    /// `markov_in_b[t - 1]` tells whether frame `t` is in state B.
    markov_in_b: Vec<bool>,
    perturbation: Vec<f64>,
}

impl Environment {
    pub fn new(config: EnvConfig, contexts: ContextTable, seed: u64) -> Result<Self> {
        config.validate()?;
        if contexts.is_empty() {
            return Err(Error::Invalid("environment needs a non-empty context table".into()));
        }
        let perturbation = (0..contexts.len())
            .map(|p| {
                if config.nonlinear_eps == 0.0 {
                    1.0
                } else {
                    let u: f64 = keyed_rng(seed, TAG_PERTURB, p as u64, 0).random();
                    1.0 - config.nonlinear_eps * u
                }
            })
            .collect();
        Ok(Environment {
            config,
            contexts,
            seed,
            markov_in_b: Vec::new(),
            perturbation,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn contexts(&self) -> &ContextTable {
        &self.contexts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn on_device(&self) -> usize {
        self.contexts.on_device()
    }

    /// Ground-truth coefficients in force at frame `t` (1-based).
    pub fn true_theta(&mut self, t: u64) -> ThetaVector {
        debug_assert!(t >= 1, "frames are 1-based");
        match &self.config.schedule {
            DynamicsSchedule::Stationary(theta) => *theta,
            DynamicsSchedule::Steps(steps) => {
                let idx = steps.partition_point(|(start, _)| *start <= t);
                steps[idx.saturating_sub(1)].1
            }
            DynamicsSchedule::Markov { a, b, p_f } => {
                let (a, b, p_f) = (*a, *b, *p_f);
                if self.markov_state(t, p_f) {
                    b
                } else {
                    a
                }
            }
        }
    }

    fn markov_state(&mut self, t: u64, p_f: f64) -> bool {
        let t = t.max(1) as usize;
        while self.markov_in_b.len() < t {
            let frame = self.markov_in_b.len() as u64 + 1;
            let state = match self.markov_in_b.last() {
                None => false,
                Some(&prev) => {
                    let u: f64 = keyed_rng(self.seed, TAG_MARKOV, frame, 0).random();
                    prev ^ (u < p_f)
                }
            };
            self.markov_in_b.push(state);
        }
        self.markov_in_b[t - 1]
    }

    /// Linear prediction `theta(t) . x` with the true coefficients.
    pub fn expected_edge_delay(&mut self, x: &ContextVector, t: u64) -> f64 {
        if x.is_zero() {
            return 0.0;
        }
        x.dot(&self.true_theta(t).0)
    }

    /// Noise-free edge delay of partition `p` at frame `t`, including the
    /// optional nonlinear perturbation. This is what regret is measured on.
    pub fn true_edge_delay(&mut self, p: usize, t: u64) -> f64 {
        let x = self.contexts[p];
        if x.is_zero() {
            return 0.0;
        }
        let theta = self.true_theta(t).0;
        let compute: f64 = (0..FEATURE_DIM - 1).map(|i| theta[i] * x[i]).sum();
        compute * self.perturbation[p] + theta[FEATURE_DIM - 1] * x.psi()
    }

    /// Observed edge delay for partition `p`, or `None` for on-device
    /// processing, which produces no edge feedback.
    pub fn observe(&mut self, p: usize, t: u64) -> Option<f64> {
        if p == self.on_device() {
            return None;
        }
        let mean = self.true_edge_delay(p, t);
        let eta = noise_draw(&self.config.noise, self.seed, t, p);
        Some((mean + eta).max(0.0))
    }
}
