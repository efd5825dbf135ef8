//! Configuration, seeded runs, sweeps and result files.

mod config;
mod episode;
mod error;
mod output;
pub mod scenario;
pub mod seeds;
mod sweep;

pub use config::{Axis, CurveSpec, ExperimentConfig, OutputSpec, SweepSpec};
pub use episode::{log_checkpoints, run_episode, Checkpoint, EpisodeOptions, Recording, RunTrace, SlotRecord};
pub use error::HarnessError;
pub use output::{
    emit_results, read_json, version_string, write_curves, write_json, write_long, write_wide, Emitted, Report,
    CURVE_HEADER, LONG_HEADER, METRICS, WIDE_HEADER,
};
pub use scenario::{reference_scenario, Scenario, ScenarioMeans};
pub use sweep::{regret_curves, sweep, CurveRow, OracleStatus, RunSummary, SweepOptions, SweepResults, SweepRow};

/// Runs every sweep and the curve grid of an experiment file.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &SweepOptions) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let mut sweeps = Vec::with_capacity(cfg.sweeps.len());
    for s in &cfg.sweeps {
        let policies = s.policies.as_deref().unwrap_or(&cfg.policies);
        sweeps.push(sweep(&cfg.run, &cfg.scenario, s.axis, &s.values, policies, opts)?);
    }
    let curves = match &cfg.curves {
        Some(grid) => regret_curves(&cfg.run, &cfg.scenario, grid, opts)?,
        None => Vec::new(),
    };
    Ok(Report {
        version: version_string(),
        config: cfg.clone(),
        master_seed: cfg.run.seed,
        run_seeds: (0..cfg.run.run_count as u64)
            .map(|r| seeds::derive_seed(cfg.run.seed, r, seeds::ENVIRONMENT))
            .collect(),
        oracle: OracleStatus::of(&cfg.scenario),
        sweeps,
        curves,
    })
}
