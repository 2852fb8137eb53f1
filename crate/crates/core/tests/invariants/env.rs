use proptest::prelude::*;

use super::{check, descriptor, Check};
use partition_bandit::env::{DynamicsSchedule, EnvConfig, Environment, NoiseModel, ThetaVector};
use partition_bandit::model::{context_table, ContextVector, DeviceProfile};

pub const CHECKS: [Check; 4] = [
    ("env: equal config and seed replay identical observations", replay),
    (
        "env: observation noise stays within the truncation bound",
        noise_bounded,
    ),
    ("env: expected edge delay is linear in the features", linear_in_features),
    ("env: step schedules hold the latest segment started", step_lookup),
];

const DEVICE: DeviceProfile = DeviceProfile {
    ms_per_gmac_conv: 10.0,
    ms_per_gmac_fc: 100.0,
    ms_per_gmac_act: 10.0,
    fixed_overhead_ms: 1.0,
};

fn theta() -> impl Strategy<Value = ThetaVector> {
    prop::array::uniform7(0.0..100.0f64).prop_map(ThetaVector)
}

fn steps() -> impl Strategy<Value = Vec<(u64, ThetaVector)>> {
    prop::collection::vec((1..50u64, theta()), 1..6).prop_map(|segs| {
        let mut start = 1;
        segs.into_iter()
            .map(|(gap, th)| {
                let s = start;
                start += gap;
                (s, th)
            })
            .collect()
    })
}

fn schedule() -> impl Strategy<Value = DynamicsSchedule> {
    prop_oneof![
        theta().prop_map(DynamicsSchedule::Stationary),
        steps().prop_map(DynamicsSchedule::Steps),
        (theta(), theta(), 0.0..=1.0f64).prop_map(|(a, b, p_f)| DynamicsSchedule::Markov { a, b, p_f }),
    ]
}

fn config() -> impl Strategy<Value = EnvConfig> {
    (
        schedule(),
        0.0..20.0f64,
        0.5..4.0f64,
        prop_oneof![Just(0.0), 0.0..0.5f64],
    )
        .prop_map(|(schedule, sigma, truncation, nonlinear_eps)| EnvConfig {
            schedule,
            noise: NoiseModel { sigma, truncation },
            device: DEVICE,
            nonlinear_eps,
        })
}

fn queries() -> impl Strategy<Value = Vec<(usize, u64)>> {
    prop::collection::vec((0..64usize, 1..300u64), 1..40)
}

pub fn replay() -> Result<(), String> {
    check(
        "replay",
        (descriptor(20), config(), any::<u64>(), queries()),
        |(desc, cfg, seed, qs)| {
            let table = context_table(&desc).unwrap();
            let mut a = Environment::new(cfg.clone(), table.clone(), seed).unwrap();
            let mut b = Environment::new(cfg, table.clone(), seed).unwrap();
            for (p, t) in qs {
                let p = p % table.len();
                prop_assert_eq!(a.true_theta(t), b.true_theta(t));
                prop_assert_eq!(a.observe(p, t), b.observe(p, t));
            }
            Ok(())
        },
    )
}

pub fn noise_bounded() -> Result<(), String> {
    check(
        "noise_bounded",
        (descriptor(20), config(), any::<u64>(), queries()),
        |(desc, cfg, seed, qs)| {
            let table = context_table(&desc).unwrap();
            let bound = cfg.noise.sigma * cfg.noise.truncation;
            let mut env = Environment::new(cfg, table.clone(), seed).unwrap();
            for (p, t) in qs {
                let p = p % table.len();
                let mean = env.true_edge_delay(p, t);
                match env.observe(p, t) {
                    None => prop_assert_eq!(p, table.on_device()),
                    Some(d) => {
                        prop_assert!(d >= 0.0);
                        prop_assert!((d - mean).abs() <= bound * (1.0 + 1e-12), "|{d} - {mean}| > {bound}");
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn linear_in_features() -> Result<(), String> {
    let vec7 = || prop::array::uniform7(0.0..10.0f64);
    check(
        "linear_in_features",
        (theta(), vec7(), vec7(), 0.0..5.0f64, 0.0..5.0f64),
        |(th, x, y, a, b)| {
            let cfg = EnvConfig {
                schedule: DynamicsSchedule::Stationary(th),
                noise: NoiseModel::new(0.0),
                device: DEVICE,
                nonlinear_eps: 0.0,
            };
            let table = partition_bandit::model::ContextTable::from_rows(vec![ContextVector(x), ContextVector::ZERO]);
            let mut env = Environment::new(cfg, table, 0).unwrap();
            let mix = ContextVector(std::array::from_fn(|i| a * x[i] + b * y[i]));
            let lhs = env.expected_edge_delay(&mix, 1);
            let rhs =
                a * env.expected_edge_delay(&ContextVector(x), 1) + b * env.expected_edge_delay(&ContextVector(y), 1);
            prop_assert!(
                (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()).max(1.0),
                "{lhs} vs {rhs}"
            );
            Ok(())
        },
    )
}

pub fn step_lookup() -> Result<(), String> {
    check("step_lookup", (steps(), 1..400u64), |(segs, t)| {
        let cfg = EnvConfig {
            schedule: DynamicsSchedule::Steps(segs.clone()),
            noise: NoiseModel::new(0.0),
            device: DEVICE,
            nonlinear_eps: 0.0,
        };
        let table =
            partition_bandit::model::ContextTable::from_rows(vec![ContextVector([1.0; 7]), ContextVector::ZERO]);
        let mut env = Environment::new(cfg, table, 0).unwrap();
        let want = segs.iter().rfind(|(s, _)| *s <= t).unwrap().1;
        prop_assert_eq!(env.true_theta(t), want);
        Ok(())
    })
}
