use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use partition_bandit::baselines::oracle_select;
use partition_bandit::env::{DynamicsSchedule, EnvConfig, Environment};
use partition_bandit::harness::{
    run, sweep, write_json, write_sweep_csv, write_trace_csv, MetricsSummary, Policy, Scenario, SweepAxis,
};
use partition_bandit::model::{context_table, frontend_profile, DeviceProfile, DnnDescriptor};

/// Online DNN partition selection experiments.
#[derive(Parser)]
#[command(name = "pbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario for one seed.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's policy.
        #[arg(long)]
        policy: Option<Policy>,
        #[arg(long)]
        out_trace: Option<PathBuf>,
        #[arg(long)]
        out_summary: Option<PathBuf>,
    },
    /// Sweep parameters over seeds and write a CSV table.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// `name=v1,v2,...` with name one of mu, p_f, l_ratio, threshold, alpha.
        /// Repeat for a Cartesian grid.
        #[arg(long = "param")]
        params: Vec<SweepAxis>,
        #[arg(long, default_value_t = 20)]
        seeds: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the optimal partition for each environment segment.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Print the feature table and on-device delay profile of a descriptor.
    Features {
        #[arg(long)]
        dnn: PathBuf,
        /// Take the device profile from this scenario instead of the
        /// built-in reference device.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

/// Reference mobile device used by `features` when no scenario is given.
const REFERENCE_DEVICE: DeviceProfile = DeviceProfile {
    ms_per_gmac_conv: 12.0,
    ms_per_gmac_fc: 600.0,
    ms_per_gmac_act: 40.0,
    fixed_overhead_ms: 5.0,
};

fn load(path: &PathBuf) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn cmd_run(
    scenario: PathBuf,
    seed: Option<u64>,
    policy: Option<Policy>,
    out_trace: Option<PathBuf>,
    out_summary: Option<PathBuf>,
) -> Result<()> {
    let mut s = load(&scenario)?;
    if let Some(policy) = policy {
        s.policy = policy;
    }
    let seed = seed.unwrap_or(s.seed);
    let out = run(&s, seed)?;
    let summary = MetricsSummary::from_run(&out, s.descriptor.on_device(), &s.env.schedule.change_frames());
    if let Some(path) = out_trace {
        write_trace_csv(&path, &out.trace).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = out_summary {
        write_json(&path, &summary).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "scenario      {} ({:?}, seed {seed}, {} frames)",
        s.name, s.policy, summary.frames
    );
    println!(
        "mean delay    {:.3} ms (oracle {:.3} ms)",
        summary.mean_delay_ms.unwrap_or(0.0),
        summary.oracle_mean_delay_ms.unwrap_or(0.0)
    );
    println!("total regret  {:.3} ms", summary.total_regret);
    if let Some(m) = summary.mape_percent {
        println!("mape          {m:.3} %");
    }
    for a in &summary.adaptation {
        match a.frames {
            Some(n) => println!("adaptation    change at {}: {n} frames", a.change_frame),
            None => println!("adaptation    change at {}: not adapted", a.change_frame),
        }
    }
    Ok(())
}

fn cmd_sweep(scenario: PathBuf, params: Vec<SweepAxis>, seeds: u32, out: PathBuf) -> Result<()> {
    let s = load(&scenario)?;
    let table = sweep(&s, &params, seeds)?;
    write_sweep_csv(&out, &table).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{} runs, {} grid points -> {}",
        table.rows.len(),
        table.means.len(),
        out.display()
    );
    Ok(())
}

fn print_choice(label: &str, env: &mut Environment, t: u64, d_f: &[f64], desc: &DnnDescriptor) {
    let c = oracle_select(env, t, d_f);
    println!(
        "{label:<24} p* = {:>3} ({:<12}) {:>10.3} ms",
        c.partition,
        desc.cut_name(c.partition),
        c.total
    );
}

fn cmd_oracle(scenario: PathBuf) -> Result<()> {
    let s = load(&scenario)?;
    let d_f = frontend_profile(&s.descriptor, &s.env.device);
    let contexts = context_table(&s.descriptor)?;
    match &s.env.schedule {
        DynamicsSchedule::Stationary(_) => {
            let mut env = Environment::new(s.env.clone(), contexts, s.seed)?;
            print_choice("stationary", &mut env, 1, &d_f, &s.descriptor);
        }
        DynamicsSchedule::Steps(steps) => {
            let mut env = Environment::new(s.env.clone(), contexts, s.seed)?;
            for (start, _) in steps {
                print_choice(&format!("frames from {start}"), &mut env, *start, &d_f, &s.descriptor);
            }
        }
        DynamicsSchedule::Markov { a, b, .. } => {
            for (label, theta) in [("state a", a), ("state b", b)] {
                let config = EnvConfig {
                    schedule: DynamicsSchedule::Stationary(*theta),
                    ..s.env.clone()
                };
                let mut env = Environment::new(config, contexts.clone(), s.seed)?;
                print_choice(label, &mut env, 1, &d_f, &s.descriptor);
            }
        }
    }
    Ok(())
}

fn cmd_features(dnn: PathBuf, scenario: Option<PathBuf>) -> Result<()> {
    let desc = DnnDescriptor::load(&dnn).with_context(|| format!("loading descriptor {}", dnn.display()))?;
    let device = match scenario {
        Some(path) => load(&path)?.env.device,
        None => REFERENCE_DEVICE,
    };
    let table = context_table(&desc)?;
    let d_f = frontend_profile(&desc, &device);
    println!(
        "{:>3}  {:<14} {:>9} {:>9} {:>9} {:>4} {:>4} {:>4} {:>9} {:>10}",
        "p", "cut after", "m_conv", "m_fc", "m_act", "n_c", "n_f", "n_a", "psi_mb", "d_f_ms"
    );
    for (p, x) in table.rows().iter().enumerate() {
        println!(
            "{p:>3}  {:<14} {:>9.4} {:>9.4} {:>9.4} {:>4} {:>4} {:>4} {:>9.5} {:>10.3}",
            desc.cut_name(p),
            x.m_conv(),
            x.m_fc(),
            x.m_act(),
            x.n_conv(),
            x.n_fc(),
            x.n_act(),
            x.psi(),
            d_f[p]
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            policy,
            out_trace,
            out_summary,
        } => cmd_run(scenario, seed, policy, out_trace, out_summary),
        Command::Sweep {
            scenario,
            params,
            seeds,
            out,
        } => cmd_sweep(scenario, params, seeds, out),
        Command::Oracle { scenario } => cmd_oracle(scenario),
        Command::Features { dnn, scenario } => cmd_features(dnn, scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
