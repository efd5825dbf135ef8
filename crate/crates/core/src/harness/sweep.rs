//! Multi-run experiments over a swept parameter, and regret curves.
//!
//! Runs execute on a dedicated thread pool and are reduced in job order, so
//! the degree of parallelism never changes a result.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Axis, CurveSpec};
use super::episode::{log_checkpoints, run_episode, EpisodeOptions, RunTrace};
use super::error::HarnessError;
use super::scenario::Scenario;
use crate::model::RunConfig;
use crate::oracle::optimal_reward_rate;
use crate::scheduler::Policy;

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses one per core.
    pub parallelism: usize,
    /// Fill `wallclock_s` with the summed run times of each cell.
    pub timing: bool,
    pub audit: bool,
}

/// `R*` of a scenario, or why it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleStatus {
    Available { r_star: f64 },
    Unavailable { reason: String },
}

impl OracleStatus {
    pub fn of(scenario: &Scenario) -> Self {
        let means = scenario.means();
        match optimal_reward_rate(&means.oracle_input(&scenario.topology)) {
            Ok(sol) => OracleStatus::Available { r_star: sol.r_star },
            Err(e) => OracleStatus::Unavailable { reason: e.to_string() },
        }
    }

    pub fn r_star(&self) -> Option<f64> {
        match self {
            OracleStatus::Available { r_star } => Some(*r_star),
            OracleStatus::Unavailable { .. } => None,
        }
    }
}

/// Metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: Policy,
    pub axis_value: f64,
    pub run: u64,
    pub environment_seed: u64,
    pub mean_cost: f64,
    pub mean_reward: f64,
    pub mean_backlog: f64,
    pub backlog_variance: f64,
    /// `R* − mean compound reward`.
    pub regret_eq9: Option<f64>,
    /// Mean cost minus the clairvoyant baseline's on the same sample path.
    pub regret_vs_gs: f64,
    pub wallclock_s: f64,
}

/// One `(policy, axis value)` cell averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario_id: String,
    pub policy: Policy,
    pub axis_name: Axis,
    pub axis_value: f64,
    pub run_count: usize,
    pub mean_cost: f64,
    pub mean_backlog: f64,
    pub backlog_variance: f64,
    pub regret_eq9: Option<f64>,
    pub regret_vs_gs: Option<f64>,
    pub wallclock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub scenario_id: String,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub policies: Vec<Policy>,
    pub oracle: OracleStatus,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunSummary>,
}

/// Regret and cost running averages of one `(policy, β, V)` curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub scenario_id: String,
    pub policy: Policy,
    pub beta: f64,
    pub v: f64,
    pub slot: u64,
    pub run_count: usize,
    pub mean_cost: f64,
    pub mean_backlog: f64,
    pub regret_eq9: Option<f64>,
    pub regret_vs_gs: f64,
}

pub(crate) fn pool(parallelism: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))
}

struct Job {
    cfg: RunConfig,
    policy: Policy,
    run: u64,
    checkpoints: Vec<u64>,
}

fn execute(jobs: &[Job], scenario: &Scenario, opts: &SweepOptions) -> Result<Vec<(RunTrace, f64)>, HarnessError> {
    let work = || {
        jobs.par_iter()
            .map(|job| {
                let start = Instant::now();
                let episode = EpisodeOptions {
                    audit: opts.audit,
                    checkpoints: job.checkpoints.clone(),
                    ..EpisodeOptions::default()
                };
                let trace = run_episode(&job.cfg, scenario, job.policy, job.run, &episode)?;
                Ok((trace, start.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    };
    pool(opts.parallelism)?.install(work)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Runs every `(value, policy)` cell `base.run_count` times. Run `r` of
/// every cell shares one environment stream, and each run of a policy is
/// paired with a clairvoyant run on the same stream with the same `V`.
pub fn sweep(
    base: &RunConfig,
    scenario: &Scenario,
    axis: Axis,
    values: &[f64],
    policies: &[Policy],
    opts: &SweepOptions,
) -> Result<SweepResults, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptyAxis(axis.name().into()));
    }
    if policies.is_empty() {
        return Err(HarnessError::Config("policy list is empty".into()));
    }
    base.validate()?;
    scenario.validate()?;
    for &v in values {
        axis.apply(base, v).validate()?;
    }
    let oracle = OracleStatus::of(scenario);
    let runs = base.run_count as u64;

    // the clairvoyant baseline only depends on V
    let gs_values: Vec<f64> = if axis == Axis::V { values.to_vec() } else { vec![base.v] };
    let gs_index = |value_idx: usize| if axis == Axis::V { value_idx } else { 0 };
    let mut jobs = Vec::new();
    for &gv in &gs_values {
        for r in 0..runs {
            jobs.push(Job {
                cfg: Axis::V.apply(base, gv),
                policy: Policy::Gs,
                run: r,
                checkpoints: Vec::new(),
            });
        }
    }
    let gs_jobs = jobs.len();
    for &value in values {
        for &policy in policies {
            if policy == Policy::Gs {
                continue;
            }
            for r in 0..runs {
                jobs.push(Job {
                    cfg: axis.apply(base, value),
                    policy,
                    run: r,
                    checkpoints: Vec::new(),
                });
            }
        }
    }
    let done = execute(&jobs, scenario, opts)?;
    let (gs_done, rest) = done.split_at(gs_jobs);
    let mut rest = rest.iter();

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (vi, &value) in values.iter().enumerate() {
        let gs_runs = &gs_done[gs_index(vi) * runs as usize..][..runs as usize];
        for &policy in policies {
            let cell: Vec<&(RunTrace, f64)> = if policy == Policy::Gs {
                gs_runs.iter().collect()
            } else {
                rest.by_ref().take(runs as usize).collect()
            };
            let cell_summaries: Vec<RunSummary> = cell
                .iter()
                .zip(gs_runs)
                .map(|((trace, secs), (gs, _))| RunSummary {
                    policy,
                    axis_value: value,
                    run: trace.run,
                    environment_seed: trace.environment_seed,
                    mean_cost: trace.mean_cost(),
                    mean_reward: trace.mean_reward(),
                    mean_backlog: trace.backlog.mean_total,
                    backlog_variance: trace.backlog.variance,
                    regret_eq9: oracle.r_star().map(|r| r - trace.mean_reward()),
                    regret_vs_gs: trace.mean_cost() - gs.mean_cost(),
                    wallclock_s: *secs,
                })
                .collect();
            rows.push(SweepRow {
                scenario_id: scenario.id.clone(),
                policy,
                axis_name: axis,
                axis_value: value,
                run_count: base.run_count,
                mean_cost: mean(cell_summaries.iter().map(|s| s.mean_cost)),
                mean_backlog: mean(cell_summaries.iter().map(|s| s.mean_backlog)),
                backlog_variance: mean(cell_summaries.iter().map(|s| s.backlog_variance)),
                regret_eq9: oracle
                    .r_star()
                    .map(|_| mean(cell_summaries.iter().filter_map(|s| s.regret_eq9))),
                regret_vs_gs: Some(mean(cell_summaries.iter().map(|s| s.regret_vs_gs))),
                wallclock_s: opts.timing.then(|| cell_summaries.iter().map(|s| s.wallclock_s).sum()),
            });
            summaries.extend(cell_summaries);
        }
    }
    if !opts.timing {
        for s in &mut summaries {
            s.wallclock_s = 0.0;
        }
    }
    Ok(SweepResults {
        scenario_id: scenario.id.clone(),
        axis,
        values: values.to_vec(),
        policies: policies.to_vec(),
        oracle,
        rows,
        runs: summaries,
    })
}

/// Running averages at log-spaced checkpoints for every `(β, V)` pair,
/// averaged over `base.run_count` runs.
pub fn regret_curves(
    base: &RunConfig,
    scenario: &Scenario,
    grid: &CurveSpec,
    opts: &SweepOptions,
) -> Result<Vec<CurveRow>, HarnessError> {
    if grid.v.is_empty() || grid.beta.is_empty() {
        return Err(HarnessError::EmptyAxis("curves".into()));
    }
    base.validate()?;
    scenario.validate()?;
    let oracle = OracleStatus::of(scenario);
    let checkpoints = log_checkpoints(base.horizon, grid.points);
    let runs = base.run_count as u64;
    let mut jobs = Vec::new();
    for &v in &grid.v {
        for r in 0..runs {
            jobs.push(Job {
                cfg: Axis::V.apply(base, v),
                policy: Policy::Gs,
                run: r,
                checkpoints: checkpoints.clone(),
            });
        }
    }
    for &beta in &grid.beta {
        for &v in &grid.v {
            let mut cfg = Axis::V.apply(base, v);
            cfg.beta = beta;
            cfg.validate()?;
            for r in 0..runs {
                jobs.push(Job {
                    cfg: cfg.clone(),
                    policy: grid.policy,
                    run: r,
                    checkpoints: checkpoints.clone(),
                });
            }
        }
    }
    let done = execute(&jobs, scenario, opts)?;
    let (gs_done, rest) = done.split_at(grid.v.len() * runs as usize);
    let mut rows = Vec::new();
    let mut cells = rest.chunks(runs as usize);
    for &beta in &grid.beta {
        for (vi, &v) in grid.v.iter().enumerate() {
            let cell = cells.next().expect("one chunk per cell");
            let gs = &gs_done[vi * runs as usize..][..runs as usize];
            for (k, &slot) in checkpoints.iter().enumerate() {
                let at = |t: &RunTrace| t.checkpoints[k];
                rows.push(CurveRow {
                    scenario_id: scenario.id.clone(),
                    policy: grid.policy,
                    beta,
                    v,
                    slot,
                    run_count: base.run_count,
                    mean_cost: mean(cell.iter().map(|(t, _)| at(t).mean_cost)),
                    mean_backlog: mean(cell.iter().map(|(t, _)| at(t).mean_backlog)),
                    regret_eq9: oracle
                        .r_star()
                        .map(|r| mean(cell.iter().map(|(t, _)| r - at(t).mean_reward))),
                    regret_vs_gs: mean(
                        cell.iter()
                            .zip(gs)
                            .map(|((t, _), (g, _))| at(t).mean_cost - at(g).mean_cost),
                    ),
                });
            }
        }
    }
    Ok(rows)
}
