use nalgebra::{Cholesky, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::schedule::{forced_schedule, phase_position, ForcedSchedule};
use crate::error::{Error, Result};
use crate::model::{ContextTable, ContextVector, FEATURE_DIM};

type Mat = SMatrix<f64, FEATURE_DIM, FEATURE_DIM>;
type Vector = SVector<f64, FEATURE_DIM>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerMode {
    /// Weighted confidence bound plus forced sampling.
    #[serde(rename = "mu_linucb")]
    MuLinucb,
    /// Plain LinUCB: no frame weights, no forced sampling.
    #[serde(rename = "vanilla", alias = "vanilla_linucb")]
    Vanilla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Known(u64),
    /// Doubling trick with base phase length `t0`.
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub mode: LearnerMode,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub horizon: Horizon,
    pub t0: u64,
    pub l_key: f64,
    pub l_nonkey: f64,
    /// Unknown-horizon mode only: drop the ridge accumulators whenever a
    /// new phase starts.
    pub reset_per_phase: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            mode: LearnerMode::MuLinucb,
            alpha: 1.0,
            beta: 1.0,
            mu: 0.25,
            horizon: Horizon::Unknown,
            t0: 100,
            l_key: 0.9,
            l_nonkey: 0.1,
            reset_per_phase: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, path: &str, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::schema(path, msg))
            }
        };
        check(
            self.alpha.is_finite() && self.alpha >= 0.0,
            "learner.alpha",
            format!("must be >= 0, got {}", self.alpha),
        )?;
        check(
            self.beta.is_finite() && self.beta > 0.0,
            "learner.beta",
            format!("must be > 0, got {}", self.beta),
        )?;
        check(
            (0.0..1.0).contains(&self.mu),
            "learner.mu",
            format!("must lie in [0, 1), got {}", self.mu),
        )?;
        check(
            0.0 < self.l_nonkey && self.l_nonkey < self.l_key && self.l_key < 1.0,
            "learner.l_key",
            format!(
                "need 0 < l_nonkey < l_key < 1, got l_nonkey={} l_key={}",
                self.l_nonkey, self.l_key
            ),
        )?;
        if let Horizon::Known(t) = self.horizon {
            check(t >= 1, "learner.horizon", "must be >= 1".into())?;
        }
        check(self.t0 >= 1, "learner.t0", "must be >= 1".into())
    }

    /// Frame weight `L_t`.
    pub fn weight(&self, is_key: bool) -> f64 {
        if is_key {
            self.l_key
        } else {
            self.l_nonkey
        }
    }
}

/// Ridge accumulators `A = beta I + sum x x^T`, `b = sum x d_e`, plus the
/// per-frame factorization cache.
#[derive(Debug, Clone)]
pub struct LearnerState {
    a: Mat,
    b: Vector,
    beta: f64,
    updates_seen: u64,
    phase: u32,
    cache: Option<Factorized>,
}

#[derive(Debug, Clone)]
struct Factorized {
    lower: Mat,
    theta: Vector,
}

fn to_vector(x: &ContextVector) -> Vector {
    Vector::from_column_slice(x.as_array())
}

impl LearnerState {
    pub fn new(beta: f64) -> Self {
        LearnerState {
            a: Mat::identity() * beta,
            b: Vector::zeros(),
            beta,
            updates_seen: 0,
            phase: 1,
            cache: None,
        }
    }

    pub fn updates_seen(&self) -> u64 {
        self.updates_seen
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn a_matrix(&self) -> [[f64; FEATURE_DIM]; FEATURE_DIM] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.a[(i, j)]))
    }

    pub fn b_vector(&self) -> [f64; FEATURE_DIM] {
        std::array::from_fn(|i| self.b[i])
    }

    pub fn reset(&mut self) {
        let phase = self.phase;
        *self = LearnerState::new(self.beta);
        self.phase = phase;
    }

    fn factorized(&mut self) -> Result<&Factorized> {
        if self.cache.is_none() {
            if !self.a.iter().chain(self.b.iter()).all(|v| v.is_finite()) {
                return Err(Error::CorruptState("non-finite entries in A or b".into()));
            }
            let chol = Cholesky::new(self.a).ok_or_else(|| Error::CorruptState("A is not positive definite".into()))?;
            let theta = chol.solve(&self.b);
            self.cache = Some(Factorized { lower: chol.l(), theta });
        }
        Ok(self.cache.as_ref().unwrap())
    }

    /// Current ridge estimate, the solution of `A theta = b`.
    pub fn estimate_theta(&mut self) -> Result<[f64; FEATURE_DIM]> {
        let theta = self.factorized()?.theta;
        Ok(std::array::from_fn(|i| theta[i]))
    }

    /// Predicted edge delay `theta_hat . x`.
    pub fn predict(&mut self, x: &ContextVector) -> Result<f64> {
        if x.is_zero() {
            return Ok(0.0);
        }
        let f = self.factorized()?;
        Ok(f.theta.dot(&to_vector(x)))
    }

    /// `sqrt(x^T A^-1 x)`, computed as `|L^-1 x|` from the cached factor.
    pub fn confidence_width(&mut self, x: &ContextVector) -> Result<f64> {
        if x.is_zero() {
            return Ok(0.0);
        }
        let f = self.factorized()?;
        let y = f
            .lower
            .solve_lower_triangular(&to_vector(x))
            .ok_or_else(|| Error::CorruptState("singular Cholesky factor".into()))?;
        Ok(y.norm())
    }

    /// Applies the feedback of one frame. On-device frames (zero context)
    /// leave the state untouched and must not carry an observation.
    pub fn update(&mut self, p: usize, x: &ContextVector, observed: Option<f64>) -> Result<()> {
        match (x.is_zero(), observed) {
            (true, None) => Ok(()),
            (true, Some(_)) => Err(Error::UnexpectedObservation(p)),
            (false, None) => Err(Error::MissingObservation(p)),
            (false, Some(d)) => {
                let v = to_vector(x);
                self.a.ger(1.0, &v, &v, 1.0);
                self.b.axpy(d, &v, 1.0);
                self.updates_seen += 1;
                self.cache = None;
                Ok(())
            }
        }
    }
}

/// Whether frame `t` is a forced-sampling frame.
pub fn is_forced(config: &LearnerConfig, t: u64) -> bool {
    if config.mode == LearnerMode::Vanilla {
        return false;
    }
    match config.horizon {
        Horizon::Known(horizon) => forced_schedule(horizon, config.mu).contains(t),
        Horizon::Unknown => {
            let pos = phase_position(t, config.t0);
            forced_schedule(pos.length, config.mu).contains(pos.local)
        }
    }
}

/// Optimistic delay estimate of one partition:
/// `d_f + theta_hat . x - alpha sqrt((1 - L_t) x^T A^-1 x)`.
pub fn ucb_score(
    state: &mut LearnerState,
    config: &LearnerConfig,
    x: &ContextVector,
    d_f: f64,
    weight: f64,
) -> Result<f64> {
    if x.is_zero() {
        return Ok(d_f);
    }
    let weight = match config.mode {
        LearnerMode::MuLinucb => weight,
        LearnerMode::Vanilla => 0.0,
    };
    let width = state.confidence_width(x)?;
    let predicted = state.predict(x)?;
    Ok(d_f + predicted - config.alpha * ((1.0 - weight).sqrt() * width))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub partition: usize,
    pub forced: bool,
    /// `theta_hat . x` for the chosen partition (0 on-device).
    pub predicted_edge_delay: f64,
    pub score: f64,
}

/// Picks the partition with the lowest score; forced frames exclude the
/// on-device partition. Ties go to the smallest index.
pub fn select_partition(
    state: &mut LearnerState,
    config: &LearnerConfig,
    t: u64,
    weight: f64,
    contexts: &ContextTable,
    d_f: &[f64],
) -> Result<Decision> {
    let on_device = contexts.on_device();
    if on_device == 0 || d_f.len() != contexts.len() {
        return Err(Error::Invalid(format!(
            "need at least two partitions and matching d_f (contexts {}, d_f {})",
            contexts.len(),
            d_f.len()
        )));
    }
    let forced = is_forced(config, t);
    let last = if forced { on_device - 1 } else { on_device };
    let mut best = (0usize, f64::INFINITY);
    for p in 0..=last {
        let score = ucb_score(state, config, &contexts[p], d_f[p], weight)?;
        if !score.is_finite() {
            return Err(Error::CorruptState(format!("non-finite score for partition {p}")));
        }
        if score < best.1 {
            best = (p, score);
        }
    }
    let predicted_edge_delay = state.predict(&contexts[best.0])?;
    Ok(Decision {
        partition: best.0,
        forced,
        predicted_edge_delay,
        score: best.1,
    })
}

/// Confidence scale that makes the prediction-error bound hold with
/// probability `1 - delta`:
/// `(C_theta + C_eta sqrt(d ln((1 + M C_x^2) / delta))) / (1 - L_key)`.
pub fn theoretical_alpha(c_theta: f64, c_eta: f64, c_x: f64, d: usize, m: u64, delta: f64, l_key: f64) -> f64 {
    let log_term = ((1.0 + m as f64 * c_x * c_x) / delta).ln();
    (c_theta + c_eta * (d as f64 * log_term).sqrt()) / (1.0 - l_key)
}

/// Config, state and the per-descriptor tables bundled for a frame loop.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    state: LearnerState,
    contexts: ContextTable,
    d_f: Vec<f64>,
}

impl Learner {
    /// `contexts` must already be in the learner's (normalized) feature space.
    pub fn new(config: LearnerConfig, contexts: ContextTable, d_f: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if contexts.len() < 2 || contexts.len() != d_f.len() {
            return Err(Error::Invalid(
                "learner needs >= 2 partitions and one d_f per partition".into(),
            ));
        }
        Ok(Learner {
            state: LearnerState::new(config.beta),
            config,
            contexts,
            d_f,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut LearnerState {
        &mut self.state
    }

    pub fn contexts(&self) -> &ContextTable {
        &self.contexts
    }

    pub fn decide(&mut self, t: u64, weight: f64) -> Result<Decision> {
        if self.config.horizon == Horizon::Unknown && self.config.mode == LearnerMode::MuLinucb {
            let phase = phase_position(t, self.config.t0).phase;
            if phase != self.state.phase {
                self.state.phase = phase;
                if self.config.reset_per_phase {
                    self.state.reset();
                }
            }
        }
        select_partition(&mut self.state, &self.config, t, weight, &self.contexts, &self.d_f)
    }

    pub fn update(&mut self, p: usize, observed: Option<f64>) -> Result<()> {
        let x = *self.contexts.rows().get(p).ok_or(Error::PartitionOutOfRange {
            p,
            max: self.contexts.on_device(),
        })?;
        self.state.update(p, &x, observed)
    }

    /// Known-horizon schedule, if any.
    pub fn schedule(&self) -> Option<ForcedSchedule> {
        match (self.config.mode, self.config.horizon) {
            (LearnerMode::MuLinucb, Horizon::Known(t)) => Some(forced_schedule(t, self.config.mu)),
            _ => None,
        }
    }
}
