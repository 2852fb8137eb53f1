use proptest::prelude::*;

use super::{check, descriptor, Check};
use partition_bandit::bandit::{
    forced_schedule, select_partition, ucb_score, Horizon, Learner, LearnerConfig, LearnerMode, LearnerState,
};
use partition_bandit::env::{DynamicsSchedule, EnvConfig, Environment, NoiseModel, ThetaVector};
use partition_bandit::model::{context_table, frontend_profile, ContextTable, ContextVector, DeviceProfile};

pub const CHECKS: [Check; 7] = [
    ("bandit: ridge estimate equals the batch solution", ridge_equivalence),
    ("bandit: updates commute", updates_commute),
    ("bandit: repeated updates give beta I + k x x^T", repeated_updates),
    (
        "bandit: vanilla learner never leaves on-device once chosen",
        vanilla_trap,
    ),
    ("bandit: forced sampling bounds on-device runs", forced_escape),
    ("bandit: common rescaling keeps the argmin", scale_invariance),
    ("bandit: identical inputs give identical decisions", determinism),
];

fn context() -> impl Strategy<Value = ContextVector> {
    prop::array::uniform7(0.0..1.0f64).prop_map(ContextVector)
}

/// `(x, d)` pairs; some carry the zero (on-device) context and no delay.
fn samples(max: usize) -> impl Strategy<Value = Vec<(ContextVector, Option<f64>)>> {
    prop::collection::vec(
        prop_oneof![
            1 => Just((ContextVector::ZERO, None)),
            6 => (context(), 0.0..500.0f64).prop_map(|(x, d)| (x, Some(d))),
        ],
        0..max,
    )
}

/// Solves `M z = v` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut m: [[f64; 7]; 7], mut v: [f64; 7]) -> [f64; 7] {
    for col in 0..7 {
        let piv = (col..7)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        v.swap(col, piv);
        for row in col + 1..7 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            v[row] -= f * v[col];
        }
    }
    let mut z = [0.0; 7];
    for row in (0..7).rev() {
        let tail: f64 = (row + 1..7).map(|k| m[row][k] * z[k]).sum();
        z[row] = (v[row] - tail) / m[row][row];
    }
    z
}

/// Ridge solution rebuilt from scratch over the sampled pairs.
fn batch_ridge(beta: f64, pairs: &[(ContextVector, f64)]) -> [f64; 7] {
    let mut m = [[0.0; 7]; 7];
    let mut v = [0.0; 7];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = beta;
    }
    for (x, d) in pairs {
        for i in 0..7 {
            v[i] += x[i] * d;
            for j in 0..7 {
                m[i][j] += x[i] * x[j];
            }
        }
    }
    gauss_solve(m, v)
}

fn norm(v: &[f64; 7]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn ridge_equivalence() -> Result<(), String> {
    check("ridge_equivalence", (0.01..10.0f64, samples(60)), |(beta, seq)| {
        let mut state = LearnerState::new(beta);
        let mut seen = Vec::new();
        for (k, (x, d)) in seq.into_iter().enumerate() {
            state.update(k, &x, d).unwrap();
            if let Some(d) = d {
                seen.push((x, d));
            }
            let got = state.estimate_theta().unwrap();
            let want = batch_ridge(beta, &seen);
            let err = norm(&std::array::from_fn(|i| got[i] - want[i]));
            prop_assert!(
                err <= 1e-8 * norm(&want).max(1e-12),
                "after {} samples: error {err}",
                seen.len()
            );
        }
        prop_assert_eq!(state.updates_seen(), seen.len() as u64);
        Ok(())
    })
}

fn max_rel_diff(a: &[[f64; 7]; 7], b: &[[f64; 7]; 7]) -> f64 {
    let scale = a.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

pub fn updates_commute() -> Result<(), String> {
    check(
        "updates_commute",
        (0.01..10.0f64, prop::collection::vec((context(), 0.0..500.0f64), 2..30)),
        |(beta, seq)| {
            let mut fwd = LearnerState::new(beta);
            let mut rev = LearnerState::new(beta);
            for (x, d) in &seq {
                fwd.update(0, x, Some(*d)).unwrap();
            }
            for (x, d) in seq.iter().rev() {
                rev.update(0, x, Some(*d)).unwrap();
            }
            prop_assert!(max_rel_diff(&fwd.a_matrix(), &rev.a_matrix()) <= 1e-12);
            Ok(())
        },
    )
}

pub fn repeated_updates() -> Result<(), String> {
    check(
        "repeated_updates",
        (0.01..10.0f64, context(), 1..50u32),
        |(beta, x, k)| {
            let mut state = LearnerState::new(beta);
            for _ in 0..k {
                state.update(0, &x, Some(1.0)).unwrap();
            }
            let want: [[f64; 7]; 7] = std::array::from_fn(|i| {
                std::array::from_fn(|j| if i == j { beta } else { 0.0 } + k as f64 * x[i] * x[j])
            });
            prop_assert!(max_rel_diff(&state.a_matrix(), &want) <= 1e-12);
            Ok(())
        },
    )
}

/// A random network, edge model and device, ready for a frame loop.
#[derive(Debug, Clone)]
struct World {
    raw: ContextTable,
    normalized: ContextTable,
    d_f: Vec<f64>,
    env: EnvConfig,
}

fn world() -> impl Strategy<Value = World> {
    (
        descriptor(12),
        prop::array::uniform7(0.0..200.0f64),
        prop::array::uniform4(0.0..50.0f64),
        0.0..10.0f64,
    )
        .prop_map(|(desc, theta, dev, sigma)| {
            let device = DeviceProfile {
                ms_per_gmac_conv: dev[0],
                ms_per_gmac_fc: dev[1],
                ms_per_gmac_act: dev[2],
                fixed_overhead_ms: dev[3],
            };
            let raw = context_table(&desc).unwrap();
            let (normalized, _) = raw.normalized();
            World {
                d_f: frontend_profile(&desc, &device),
                raw,
                normalized,
                env: EnvConfig {
                    schedule: DynamicsSchedule::Stationary(ThetaVector(theta)),
                    noise: NoiseModel::new(sigma),
                    device,
                    nonlinear_eps: 0.0,
                },
            }
        })
}

fn learner_config() -> impl Strategy<Value = (LearnerConfig, Vec<bool>)> {
    (
        0.0..5.0f64,
        0.01..5.0f64,
        0.05..0.6f64,
        20..300u64,
        prop::collection::vec(any::<bool>(), 300),
    )
        .prop_map(|(alpha, beta, mu, horizon, keys)| {
            let cfg = LearnerConfig {
                alpha,
                beta,
                mu,
                horizon: Horizon::Known(horizon),
                ..LearnerConfig::default()
            };
            (cfg, keys)
        })
}

/// Runs the learner for its whole horizon and returns the decisions.
fn play(w: &World, cfg: &LearnerConfig, keys: &[bool], seed: u64) -> Vec<(usize, bool)> {
    let Horizon::Known(horizon) = cfg.horizon else {
        unreachable!()
    };
    let mut env = Environment::new(w.env.clone(), w.raw.clone(), seed).unwrap();
    let mut learner = Learner::new(cfg.clone(), w.normalized.clone(), w.d_f.clone()).unwrap();
    (1..=horizon)
        .map(|t| {
            let d = learner
                .decide(t, cfg.weight(keys[(t - 1) as usize % keys.len()]))
                .unwrap();
            learner.update(d.partition, env.observe(d.partition, t)).unwrap();
            (d.partition, d.forced)
        })
        .collect()
}

pub fn vanilla_trap() -> Result<(), String> {
    check(
        "vanilla_trap",
        (world(), learner_config(), any::<u64>()),
        |(w, (mut cfg, keys), seed)| {
            cfg.mode = LearnerMode::Vanilla;
            let on_device = w.raw.on_device();
            let picks = play(&w, &cfg, &keys, seed);
            if let Some(first) = picks.iter().position(|&(p, _)| p == on_device) {
                prop_assert!(
                    picks[first..].iter().all(|&(p, _)| p == on_device),
                    "left on-device after frame {}",
                    first + 1
                );
            }
            prop_assert!(picks.iter().all(|&(_, forced)| !forced));
            Ok(())
        },
    )
}

pub fn forced_escape() -> Result<(), String> {
    check(
        "forced_escape",
        (world(), learner_config(), any::<u64>()),
        |(w, (cfg, keys), seed)| {
            let Horizon::Known(horizon) = cfg.horizon else {
                unreachable!()
            };
            let on_device = w.raw.on_device();
            let limit = forced_schedule(horizon, cfg.mu).spacing().round() as usize;
            let picks = play(&w, &cfg, &keys, seed);
            let mut run = 0;
            for (i, &(p, forced)) in picks.iter().enumerate() {
                prop_assert_eq!(forced, forced_schedule(horizon, cfg.mu).contains(i as u64 + 1));
                if forced {
                    prop_assert!(p != on_device, "forced frame {} chose on-device", i + 1);
                }
                run = if p == on_device { run + 1 } else { 0 };
                prop_assert!(run <= limit, "{run} on-device frames in a row, limit {limit}");
            }
            Ok(())
        },
    )
}

pub fn scale_invariance() -> Result<(), String> {
    let strategy = (
        prop::collection::vec(context(), 2..12),
        prop::collection::vec(0.0..100.0f64, 12),
        prop::collection::vec((0usize..12, 0.0..500.0f64), 0..30),
        0.0..5.0f64,
        0.01..5.0f64,
        0.0..0.95f64,
        1e-3..1e3f64,
        1..200u64,
    );
    check(
        "scale_invariance",
        strategy,
        |(mut rows, d_f, obs, alpha, beta, weight, c, t)| {
            rows.push(ContextVector::ZERO);
            let contexts = ContextTable::from_rows(rows);
            let d_f = d_f[..contexts.len()].to_vec();
            let cfg = LearnerConfig {
                alpha,
                beta,
                horizon: Horizon::Known(200),
                ..LearnerConfig::default()
            };
            let scaled_cfg = LearnerConfig {
                alpha: alpha * c,
                ..cfg.clone()
            };
            let mut state = LearnerState::new(beta);
            let mut scaled = LearnerState::new(beta);
            for (p, d) in obs {
                let p = p % contexts.on_device();
                state.update(p, &contexts[p], Some(d)).unwrap();
                scaled.update(p, &contexts[p], Some(d * c)).unwrap();
            }
            let mut scores: Vec<f64> = (0..contexts.len())
                .map(|p| ucb_score(&mut state, &cfg, &contexts[p], d_f[p], weight).unwrap())
                .collect();
            scores.sort_by(f64::total_cmp);
            prop_assume!(scores[1] - scores[0] > 1e-9 * scores[0].abs().max(1.0));
            let scaled_d_f: Vec<f64> = d_f.iter().map(|v| v * c).collect();
            let a = select_partition(&mut state, &cfg, t, weight, &contexts, &d_f).unwrap();
            let b = select_partition(&mut scaled, &scaled_cfg, t, weight, &contexts, &scaled_d_f).unwrap();
            prop_assert_eq!(a.partition, b.partition);
            Ok(())
        },
    )
}

pub fn determinism() -> Result<(), String> {
    check(
        "determinism",
        (world(), learner_config(), any::<u64>()),
        |(w, (cfg, keys), seed)| {
            prop_assert_eq!(play(&w, &cfg, &keys, seed), play(&w, &cfg, &keys, seed));
            Ok(())
        },
    )
}
