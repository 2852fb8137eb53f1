//! Scenario files, the frame loop, metrics and sweeps.

mod io;
mod metrics;
mod run;
mod scenario;
mod sweep;

pub use io::{read_trace, read_trace_csv, write_json, write_sweep, write_sweep_csv, write_trace, write_trace_csv};
pub use metrics::{
    adaptation_time, cumulative_regret, mape, mean_delay, regret_between, Adaptation, MetricsSummary, TimingStats,
    ADAPT_WINDOW,
};
pub use run::{run, RunOutput, Session, TraceRecord};
pub use scenario::{KeyframeConfig, Policy, Scenario, SceneChanges};
pub use sweep::{grid, sweep, SweepAxis, SweepParam, SweepRow, SweepTable, SWEEP_METRICS};
