//! Parameter sweeps over seeds, run in parallel.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{adaptation_time, mape, mean_delay, regret_between};
use super::run::run;
use super::scenario::{KeyframeConfig, Scenario};
use crate::env::DynamicsSchedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    Mu,
    PF,
    /// `l_key / l_nonkey`, applied by rescaling `l_nonkey`.
    LRatio,
    Threshold,
    Alpha,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Mu => "mu",
            SweepParam::PF => "p_f",
            SweepParam::LRatio => "l_ratio",
            SweepParam::Threshold => "threshold",
            SweepParam::Alpha => "alpha",
        }
    }

    /// Returns a copy of `scenario` with this parameter set to `value`.
    pub fn apply(self, scenario: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = scenario.clone();
        match self {
            SweepParam::Mu => s.learner.mu = value,
            SweepParam::Alpha => s.learner.alpha = value,
            SweepParam::LRatio => {
                if value.is_nan() || value <= 1.0 {
                    return Err(Error::Invalid(format!("l_ratio must exceed 1, got {value}")));
                }
                s.learner.l_nonkey = s.learner.l_key / value;
            }
            SweepParam::PF => match &mut s.env.schedule {
                DynamicsSchedule::Markov { p_f, .. } => *p_f = value,
                _ => {
                    return Err(Error::Invalid(
                        "p_f can only be swept on a markov_switch environment".into(),
                    ))
                }
            },
            SweepParam::Threshold => match &mut s.keyframes {
                KeyframeConfig::Ssim { threshold, .. } => *threshold = value,
                _ => {
                    return Err(Error::Invalid(
                        "threshold can only be swept with ssim key frames".into(),
                    ))
                }
            },
        }
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mu" => SweepParam::Mu,
            "p_f" | "pf" => SweepParam::PF,
            "l_ratio" => SweepParam::LRatio,
            "threshold" => SweepParam::Threshold,
            "alpha" => SweepParam::Alpha,
            other => {
                return Err(Error::Invalid(format!(
                    "unknown sweep parameter {other:?} (expected mu, p_f, l_ratio, threshold or alpha)"
                )))
            }
        })
    }
}

/// One swept axis, parsed from `name=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("expected name=v1,v2,..., got {s:?}")))?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad value {v:?} for {name}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepAxis {
            param: name.trim().parse()?,
            values,
        })
    }
}

/// Cartesian product of the axes; one empty point when there are none.
pub fn grid(axes: &[SweepAxis]) -> Vec<Vec<(SweepParam, f64)>> {
    axes.iter().fold(vec![Vec::new()], |points, axis| {
        points
            .iter()
            .flat_map(|point| {
                axis.values.iter().map(move |&v| {
                    let mut next = point.clone();
                    next.push((axis.param, v));
                    next
                })
            })
            .collect()
    })
}

/// Per-run results. `seed` is `None` on aggregated rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<(SweepParam, f64)>,
    pub seed: Option<u64>,
    pub mean_delay: f64,
    pub mean_delay_key: Option<f64>,
    pub mean_delay_nonkey: Option<f64>,
    pub total_regret: f64,
    /// Regret over the segment just before the final environment change
    /// (whole run if none).
    pub incumbent_regret: f64,
    pub mape: Option<f64>,
    /// Adaptation after the final change. Runs that never adapt count as
    /// the number of frames left after the change.
    pub adaptation_frames: Option<f64>,
    /// Fraction of runs that adapted (1 or 0 on per-seed rows).
    pub adapted: Option<f64>,
}

pub const SWEEP_METRICS: [&str; 9] = [
    "seed",
    "mean_delay_ms",
    "mean_delay_key_ms",
    "mean_delay_nonkey_ms",
    "total_regret_ms",
    "incumbent_regret_ms",
    "mape_percent",
    "adaptation_frames",
    "adapted_fraction",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub params: Vec<SweepParam>,
    pub rows: Vec<SweepRow>,
    /// One row per grid point, averaged over seeds.
    pub means: Vec<SweepRow>,
}

fn run_point(base: &Scenario, point: &[(SweepParam, f64)], seed: u64) -> Result<SweepRow> {
    let mut s = base.clone();
    for &(param, value) in point {
        s = param.apply(&s, value)?;
    }
    let trace = run(&s, seed)?.trace;
    let last = trace.last().map_or(0, |r| r.t);
    let changes = s.env.schedule.change_frames();
    let final_change = changes.last().copied();
    let (incumbent_start, incumbent_end) = match changes.len() {
        0 => (1, last),
        n => (if n > 1 { changes[n - 2] } else { 1 }, changes[n - 1] - 1),
    };
    let adaptation = final_change.map(|c| adaptation_time(&trace, c, last));
    Ok(SweepRow {
        params: point.to_vec(),
        seed: Some(seed),
        mean_delay: mean_delay(&trace).unwrap_or(0.0),
        mean_delay_key: mean_delay(trace.iter().filter(|r| r.is_key)),
        mean_delay_nonkey: mean_delay(trace.iter().filter(|r| !r.is_key)),
        total_regret: regret_between(&trace, 1, last),
        incumbent_regret: regret_between(&trace, incumbent_start, incumbent_end),
        mape: mape(&trace, 1, last),
        adaptation_frames: final_change.map(|c| adaptation.flatten().unwrap_or(last + 1 - c) as f64),
        adapted: adaptation.map(|a| if a.is_some() { 1.0 } else { 0.0 }),
    })
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(rows: &[SweepRow]) -> SweepRow {
    let n = rows.len() as f64;
    SweepRow {
        params: rows[0].params.clone(),
        seed: None,
        mean_delay: rows.iter().map(|r| r.mean_delay).sum::<f64>() / n,
        mean_delay_key: mean_of(rows.iter().map(|r| r.mean_delay_key)),
        mean_delay_nonkey: mean_of(rows.iter().map(|r| r.mean_delay_nonkey)),
        total_regret: rows.iter().map(|r| r.total_regret).sum::<f64>() / n,
        incumbent_regret: rows.iter().map(|r| r.incumbent_regret).sum::<f64>() / n,
        mape: mean_of(rows.iter().map(|r| r.mape)),
        adaptation_frames: mean_of(rows.iter().map(|r| r.adaptation_frames)),
        adapted: mean_of(rows.iter().map(|r| r.adapted)),
    }
}

/// Runs every grid point for seeds `scenario.seed .. scenario.seed + seeds`.
pub fn sweep(scenario: &Scenario, axes: &[SweepAxis], seeds: u32) -> Result<SweepTable> {
    if seeds == 0 {
        return Err(Error::Invalid("need at least one seed".into()));
    }
    let points = grid(axes);
    // Reject bad values before spending time on runs.
    for point in &points {
        let mut s = scenario.clone();
        for &(param, value) in point {
            s = param.apply(&s, value)?;
        }
    }
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| (0..seeds as u64).map(move |k| (i, scenario.seed + k)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, seed)| run_point(scenario, &points[i], seed))
        .collect::<Result<Vec<_>>>()?;
    let means = rows.chunks(seeds as usize).map(aggregate).collect();
    Ok(SweepTable {
        params: axes.iter().map(|a| a.param).collect(),
        rows,
        means,
    })
}
