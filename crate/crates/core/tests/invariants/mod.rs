//! Property suites shared by the per-module test targets and the
//! acceptance run. Every check draws [`CASES`] random inputs.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use partition_bandit::model::{DnnDescriptor, LayerKind, LayerSpec};

pub mod bandit;
pub mod env;
pub mod model;

pub const CASES: u32 = 1000;

/// A named property check.
pub type Check = (&'static str, fn() -> Result<(), String>);

/// Runs `test` over [`CASES`] draws of `strategy` with a fixed RNG seed.
pub fn check<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

pub fn kind() -> impl Strategy<Value = LayerKind> {
    prop_oneof![
        Just(LayerKind::Conv),
        Just(LayerKind::Fc),
        Just(LayerKind::Act),
        Just(LayerKind::Other)
    ]
}

pub fn unit() -> impl Strategy<Value = LayerSpec> {
    (kind(), 0.0..20.0f64, 0.0..10.0f64).prop_map(|(kind, gmacs, output_mb)| LayerSpec {
        name: format!("{kind:?}").to_lowercase(),
        kind,
        gmacs,
        output_mb,
    })
}

pub fn descriptor(max_units: usize) -> impl Strategy<Value = DnnDescriptor> {
    (0.0..10.0f64, prop::collection::vec(unit(), 1..=max_units)).prop_map(|(input_size_mb, units)| DnnDescriptor {
        name: "random".into(),
        input_size_mb,
        units,
    })
}

/// All named property checks, in suite order.
pub fn all() -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(model::CHECKS);
    out.extend(env::CHECKS);
    out.extend(bandit::CHECKS);
    out.extend(keyframe::CHECKS);
    out
}
