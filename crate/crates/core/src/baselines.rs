//! Reference policies the learner is compared against.

use crate::env::{Environment, ThetaVector};
use crate::model::{ContextTable, ContextVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleChoice {
    pub partition: usize,
    /// Noise-free end-to-end delay `d_f + d_e` of that partition.
    pub total: f64,
}

/// Exhaustive argmin of the true expected end-to-end delay at frame `t`.
pub fn oracle_select(env: &mut Environment, t: u64, d_f: &[f64]) -> OracleChoice {
    let mut best = OracleChoice {
        partition: 0,
        total: f64::INFINITY,
    };
    for (p, df) in d_f.iter().enumerate() {
        let total = df + env.true_edge_delay(p, t);
        if total < best.total {
            best = OracleChoice { partition: p, total };
        }
    }
    best
}

/// Pure on-device processing.
pub fn mo_select(on_device: usize) -> usize {
    on_device
}

/// Pure edge offloading.
pub fn eo_select() -> usize {
    0
}

/// Stand-in for offline layer-wise profiling: it knows the true uplink
/// cost but models the edge with one ms/GMAC rate and one per-layer cost,
/// blind to layer type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerwiseProfiler {
    pub ms_per_gmac: f64,
    pub ms_per_layer: f64,
    pub uplink_ms_per_mb: f64,
}

/// Weighted least-squares fit of a single coefficient to several, i.e. the
/// weighted mean. Falls back to the plain mean when all weights vanish.
fn weighted_fit(coefs: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        coefs.iter().zip(weights).map(|(c, w)| c * w).sum::<f64>() / total
    } else {
        coefs.iter().sum::<f64>() / coefs.len() as f64
    }
}

impl LayerwiseProfiler {
    /// Fits the type-blind coefficients to `theta`, weighting each layer
    /// type by its share of the whole network (`full` is the feature vector
    /// of partition 0).
    pub fn fit(theta: &ThetaVector, full: &ContextVector) -> Self {
        let th = theta.0;
        LayerwiseProfiler {
            ms_per_gmac: weighted_fit(&th[0..3], &full.0[0..3]),
            ms_per_layer: weighted_fit(&th[3..6], &full.0[3..6]),
            uplink_ms_per_mb: theta.uplink_ms_per_mb(),
        }
    }

    pub fn predict(&self, x: &ContextVector) -> f64 {
        let macs = x.m_conv() + x.m_fc() + x.m_act();
        let layers = x.n_conv() + x.n_fc() + x.n_act();
        self.ms_per_gmac * macs + self.ms_per_layer * layers + self.uplink_ms_per_mb * x.psi()
    }

    /// Partition minimizing `d_f + predicted d_e`, smallest index on ties.
    pub fn select(&self, contexts: &ContextTable, d_f: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (p, (x, df)) in contexts.rows().iter().zip(d_f).enumerate() {
            let total = df + self.predict(x);
            if total < best.1 {
                best = (p, total);
            }
        }
        best.0
    }
}
