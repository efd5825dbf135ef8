use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lasac::harness::{
    emit_results, run_episode, run_experiment, EpisodeOptions, ExperimentConfig, HarnessError, OracleStatus,
    SweepOptions,
};
use lasac::metrics::{default_b_tilde, drift_constant, theorem1_bound, theorem2_bound};
use lasac::oracle::{max_stability_slack, optimal_reward_rate, optimal_reward_rate_enumerated};
use lasac::scheduler::Policy;

#[derive(Parser)]
#[command(
    name = "lasac",
    version,
    about = "Queue-aware online switch-controller association simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode of one policy and print its summary.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "lasac")]
        policy: String,
        /// Run index; selects the derived seeds.
        #[arg(long, default_value_t = 0)]
        run_index: u64,
        #[arg(long)]
        audit: bool,
    },
    /// Run every sweep and curve grid of the config and write result files.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        /// Record per-cell wall-clock seconds (makes output timing dependent).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        audit: bool,
    },
    /// Evaluate the backlog and regret bounds for the config.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Regret-bound constant; defaults to B / lambda_max.
        #[arg(long)]
        b_tilde: Option<f64>,
    },
    /// Compute the optimal stationary reward rate of the config's scenario.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; defaults to the config's.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon override.
    #[arg(long)]
    horizon: Option<u64>,
    /// Run-count override.
    #[arg(long)]
    runs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.run.horizon = h;
        }
        if let Some(r) = self.runs {
            cfg.run.run_count = r;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: dir.join(name),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(dir.join(name), text).map_err(io)
}

fn execute(cli: Cli) -> Result<Value, HarnessError> {
    match cli.command {
        Command::Run {
            common,
            policy,
            run_index,
            audit,
        } => {
            let cfg = common.load()?;
            let policy: Policy = policy
                .parse()
                .map_err(|_| HarnessError::Config(format!("unknown policy `{policy}`")))?;
            let opts = EpisodeOptions {
                audit,
                ..EpisodeOptions::default()
            };
            let trace = run_episode(&cfg.run, &cfg.scenario, policy, run_index, &opts)?;
            let out = json!({
                "scenario_id": cfg.scenario.id,
                "policy": policy.id(),
                "run_index": run_index,
                "environment_seed": trace.environment_seed,
                "horizon": trace.horizon,
                "mean_cost": trace.mean_cost(),
                "mean_reward": trace.mean_reward(),
                "mean_backlog": trace.backlog.mean_total,
                "backlog_variance": trace.backlog.variance,
                "final_backlog": trace.final_queues.total(),
                "regret_eq9": OracleStatus::of(&cfg.scenario).r_star().map(|r| r - trace.mean_reward()),
            });
            if common.out.is_some() {
                write_json(&cfg.output.dir, "run.json", &out)?;
            }
            Ok(out)
        }
        Command::Sweep {
            common,
            parallelism,
            timing,
            audit,
        } => {
            let cfg = common.load()?;
            let opts = SweepOptions {
                parallelism,
                timing,
                audit,
            };
            let report = run_experiment(&cfg, &opts)?;
            let files = emit_results(&report, &cfg.output.dir)?;
            Ok(json!({
                "results": files.wide,
                "results_long": files.long,
                "curves": files.curves,
                "json": files.json,
                "rows": report.sweeps.iter().map(|s| s.rows.len()).sum::<usize>(),
            }))
        }
        Command::Bounds { common, b_tilde } => {
            let cfg = common.load()?;
            let s = &cfg.scenario;
            let t = &s.topology;
            let b = drift_constant(t.switch_count(), t.controller_count(), s.mu_max(), s.lambda_max());
            let means = s.means();
            let slack = max_stability_slack(&means.oracle_input(t))?;
            let (w, m) = (s.costs.w_max, s.costs.m_max);
            let backlog = theorem1_bound(b, slack.epsilon, cfg.run.v, t.switch_count(), s.lambda_max(), w, m).ok();
            let b_tilde = b_tilde.unwrap_or_else(|| default_b_tilde(b, s.lambda_max()));
            let regret = theorem2_bound(
                b_tilde,
                cfg.run.v,
                cfg.run.beta,
                cfg.run.horizon as f64,
                t.switch_count(),
                t.controller_count(),
                w,
                m,
            );
            let (regret_bound, regret_note) = match regret {
                Ok(x) => (Some(x), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(json!({
                "b": b,
                "slack_epsilon": slack.epsilon,
                "v": cfg.run.v,
                "beta": cfg.run.beta,
                "horizon": cfg.run.horizon,
                "backlog_bound": backlog,
                "b_tilde": b_tilde,
                "regret_bound": regret_bound,
                "regret_bound_note": regret_note,
            }))
        }
        Command::Oracle { common } => {
            let cfg = common.load()?;
            let means = cfg.scenario.means();
            let input = means.oracle_input(&cfg.scenario.topology);
            let sol = optimal_reward_rate(&input)?;
            let enumerated = match optimal_reward_rate_enumerated(&input) {
                Ok(e) => json!(e.r_star),
                Err(e) => json!(e.to_string()),
            };
            Ok(json!({
                "r_star": sol.r_star,
                "r_star_enumerated": enumerated,
                "play_rate": sol.play_rate,
                "node_load": sol.node_load,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("json value serializes");
            // a closed pipe is not a failure of the command
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{err}");
            ExitCode::from(if e.kind() == "validation" || e.kind() == "parse" {
                2
            } else {
                1
            })
        }
    }
}
