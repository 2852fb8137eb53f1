//! Scenario files.
//!
//! ```json
//! {
//!   "name": "fig10",
//!   "dnn": "../dnn/vgg16.json",
//!   "horizon": 750,
//!   "seed": 1,
//!   "replications": 20,
//!   "policy": "ans",
//!   "env": { "mode": "step_sequence", "compute_theta": [..6..], "steps": [..], ... },
//!   "learner": { "mode": "mu_linucb", "alpha": 1.0, "beta": 1.0, "mu": 0.25, ... },
//!   "keyframes": { "mode": "flags", "rate": 0.3 }
//! }
//! ```
//!
//! The `dnn` path is resolved relative to the scenario file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandit::{Horizon, LearnerConfig, LearnerMode};
use crate::env::{DynamicsSchedule, EnvConfig, NoiseModel, ThetaVector};
use crate::error::{from_json_str, Error, Result};
use crate::model::{DeviceProfile, DnnDescriptor, FEATURE_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// The weighted, force-sampling learner (or whatever `learner.mode` says).
    Ans,
    /// Plain LinUCB regardless of `learner.mode`.
    Linucb,
    Oracle,
    Mo,
    Eo,
    Layerwise,
}

impl Policy {
    pub fn uses_learner(self) -> bool {
        matches!(self, Policy::Ans | Policy::Linucb)
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        from_json_str(&format!("\"{s}\""))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KeyframeConfig {
    Flags(BTreeSet<u64>),
    Rate(f64),
    Ssim {
        threshold: f64,
        dims: (usize, usize),
        scene_changes: SceneChanges,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneChanges {
    At(Vec<u64>),
    /// Independent per-frame scene-change probability.
    Rate(f64),
}

impl Default for KeyframeConfig {
    fn default() -> Self {
        KeyframeConfig::Flags(BTreeSet::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub descriptor: DnnDescriptor,
    pub descriptor_path: PathBuf,
    /// Frames to simulate.
    pub frames: u64,
    pub seed: u64,
    pub replications: u32,
    pub policy: Policy,
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub keyframes: KeyframeConfig,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses a scenario document, resolving `dnn` against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let doc: ScenarioDoc = from_json_str(text)?;
        let descriptor_path = base_dir.join(&doc.dnn);
        let descriptor = DnnDescriptor::load(&descriptor_path)?;
        let scenario = Scenario {
            name: doc.name.unwrap_or_else(|| descriptor.name.clone()),
            descriptor,
            descriptor_path,
            frames: doc.horizon,
            seed: doc.seed,
            replications: doc.replications,
            policy: doc.policy,
            env: doc.env.into_config()?,
            learner: doc.learner.into_config()?,
            keyframes: doc.keyframes.into_config()?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::schema("horizon", "must be >= 1"));
        }
        if self.replications == 0 {
            return Err(Error::schema("replications", "must be >= 1"));
        }
        self.descriptor.validate()?;
        self.env.validate()?;
        self.learner.validate()?;
        if let DynamicsSchedule::Steps(steps) = &self.env.schedule {
            if let Some((start, _)) = steps.iter().find(|(s, _)| *s > self.frames) {
                return Err(Error::schema(
                    "env.steps",
                    format!("segment start {start} lies beyond horizon {}", self.frames),
                ));
            }
        }
        Ok(())
    }

    /// Learner configuration as the chosen policy runs it.
    pub fn effective_learner(&self) -> LearnerConfig {
        let mut cfg = self.learner.clone();
        if self.policy == Policy::Linucb {
            cfg.mode = LearnerMode::Vanilla;
        }
        cfg
    }
}

fn default_replications() -> u32 {
    1
}

fn default_policy() -> Policy {
    Policy::Ans
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: Option<String>,
    dnn: String,
    horizon: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_replications")]
    replications: u32,
    #[serde(default = "default_policy")]
    policy: Policy,
    env: EnvDoc,
    learner: LearnerDoc,
    #[serde(default)]
    keyframes: KeyframesDoc,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EnvMode {
    Stationary,
    StepSequence,
    MarkovSwitch,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvDoc {
    mode: EnvMode,
    theta: Option<[f64; FEATURE_DIM]>,
    uplink_mbps: Option<f64>,
    compute_theta: Option<[f64; FEATURE_DIM - 1]>,
    steps: Option<Vec<StepDoc>>,
    markov: Option<MarkovDoc>,
    noise_sigma_ms: f64,
    noise_truncation: Option<f64>,
    #[serde(default)]
    nonlinear_eps: f64,
    device: DeviceProfile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    start: u64,
    theta: Option<[f64; FEATURE_DIM]>,
    uplink_mbps: Option<f64>,
    compute_theta: Option<[f64; FEATURE_DIM - 1]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkovDoc {
    theta_a: ThetaDoc,
    theta_b: ThetaDoc,
    p_f: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ThetaDoc {
    Coefficients([f64; FEATURE_DIM]),
    Uplink {
        uplink_mbps: f64,
        compute_theta: Option<[f64; FEATURE_DIM - 1]>,
    },
}

/// Either the full coefficient vector, or an uplink rate plus compute
/// coefficients (falling back to the section-level `compute_theta`).
fn resolve_theta(
    path: &str,
    theta: Option<[f64; FEATURE_DIM]>,
    uplink_mbps: Option<f64>,
    compute: Option<[f64; FEATURE_DIM - 1]>,
    fallback: Option<[f64; FEATURE_DIM - 1]>,
) -> Result<ThetaVector> {
    match (theta, uplink_mbps) {
        (Some(_), Some(_)) => Err(Error::schema(path, "give either `theta` or `uplink_mbps`, not both")),
        (Some(theta), None) => Ok(ThetaVector(theta)),
        (None, Some(mbps)) => {
            if !(mbps.is_finite() && mbps > 0.0) {
                return Err(Error::schema(
                    format!("{path}.uplink_mbps"),
                    format!("must be > 0, got {mbps}"),
                ));
            }
            let compute = compute
                .or(fallback)
                .ok_or_else(|| Error::schema(format!("{path}.compute_theta"), "required with `uplink_mbps`"))?;
            Ok(ThetaVector::from_uplink(compute, mbps))
        }
        (None, None) => Err(Error::schema(
            format!("{path}.theta"),
            "missing `theta` or `uplink_mbps`",
        )),
    }
}

impl EnvDoc {
    fn into_config(self) -> Result<EnvConfig> {
        let schedule = match self.mode {
            EnvMode::Stationary => DynamicsSchedule::Stationary(resolve_theta(
                "env",
                self.theta,
                self.uplink_mbps,
                self.compute_theta,
                None,
            )?),
            EnvMode::StepSequence => {
                let steps = self
                    .steps
                    .ok_or_else(|| Error::schema("env.steps", "required for mode step_sequence"))?;
                let steps = steps
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let path = format!("env.steps[{i}]");
                        resolve_theta(&path, s.theta, s.uplink_mbps, s.compute_theta, self.compute_theta)
                            .map(|theta| (s.start, theta))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DynamicsSchedule::Steps(steps)
            }
            EnvMode::MarkovSwitch => {
                let m = self
                    .markov
                    .ok_or_else(|| Error::schema("env.markov", "required for mode markov_switch"))?;
                let resolve = |path: &str, doc: ThetaDoc| match doc {
                    ThetaDoc::Coefficients(theta) => Ok(ThetaVector(theta)),
                    ThetaDoc::Uplink {
                        uplink_mbps,
                        compute_theta,
                    } => resolve_theta(path, None, Some(uplink_mbps), compute_theta, self.compute_theta),
                };
                DynamicsSchedule::Markov {
                    a: resolve("env.markov.theta_a", m.theta_a)?,
                    b: resolve("env.markov.theta_b", m.theta_b)?,
                    p_f: m.p_f,
                }
            }
        };
        let mut noise = NoiseModel::new(self.noise_sigma_ms);
        if let Some(trunc) = self.noise_truncation {
            noise.truncation = trunc;
        }
        let config = EnvConfig {
            schedule,
            noise,
            device: self.device,
            nonlinear_eps: self.nonlinear_eps,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum HorizonDoc {
    Frames(u64),
    Word(String),
}

fn default_t0() -> u64 {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnerDoc {
    mode: LearnerMode,
    alpha: f64,
    beta: f64,
    mu: f64,
    horizon: HorizonDoc,
    #[serde(default = "default_t0")]
    t0: u64,
    l_key: f64,
    l_nonkey: f64,
    #[serde(default)]
    reset_per_phase: bool,
}

impl LearnerDoc {
    fn into_config(self) -> Result<LearnerConfig> {
        let horizon = match self.horizon {
            HorizonDoc::Frames(t) => Horizon::Known(t),
            HorizonDoc::Word(w) if w == "unknown" => Horizon::Unknown,
            HorizonDoc::Word(w) => {
                return Err(Error::schema(
                    "learner.horizon",
                    format!("expected an integer or \"unknown\", got {w:?}"),
                ))
            }
        };
        let config = LearnerConfig {
            mode: self.mode,
            alpha: self.alpha,
            beta: self.beta,
            mu: self.mu,
            horizon,
            t0: self.t0,
            l_key: self.l_key,
            l_nonkey: self.l_nonkey,
            reset_per_phase: self.reset_per_phase,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KeyMode {
    #[default]
    Flags,
    Ssim,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyframesDoc {
    #[serde(default)]
    mode: KeyMode,
    flags: Option<Vec<u64>>,
    rate: Option<f64>,
    threshold: Option<f64>,
    dims: Option<[usize; 2]>,
    scene_changes: Option<Vec<u64>>,
    scene_change_rate: Option<f64>,
}

impl KeyframesDoc {
    fn into_config(self) -> Result<KeyframeConfig> {
        let unit = |path: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(Error::schema(path, format!("must lie in [0, 1], got {v}")))
            }
        };
        match self.mode {
            KeyMode::Flags => match (self.flags, self.rate) {
                (Some(_), Some(_)) => Err(Error::schema("keyframes", "give either `flags` or `rate`, not both")),
                (Some(flags), None) => Ok(KeyframeConfig::Flags(flags.into_iter().collect())),
                (None, Some(rate)) => Ok(KeyframeConfig::Rate(unit("keyframes.rate", rate)?)),
                (None, None) => Ok(KeyframeConfig::default()),
            },
            KeyMode::Ssim => {
                let threshold = unit("keyframes.threshold", self.threshold.unwrap_or(0.9))?;
                let [w, h] = self.dims.unwrap_or([32, 32]);
                if w * h == 0 {
                    return Err(Error::schema("keyframes.dims", "frame dimensions must be positive"));
                }
                let scene_changes = match (self.scene_changes, self.scene_change_rate) {
                    (Some(_), Some(_)) => {
                        return Err(Error::schema(
                            "keyframes",
                            "give either `scene_changes` or `scene_change_rate`",
                        ))
                    }
                    (Some(list), None) => SceneChanges::At(list),
                    (None, Some(rate)) => SceneChanges::Rate(unit("keyframes.scene_change_rate", rate)?),
                    (None, None) => SceneChanges::At(Vec::new()),
                };
                Ok(KeyframeConfig::Ssim {
                    threshold,
                    dims: (w, h),
                    scene_changes,
                })
            }
        }
    }
}
