//! One seeded run of one policy.

use serde::{Deserialize, Serialize};

use super::error::HarnessError;
use super::scenario::Scenario;
use super::seeds;
use crate::bandit::{log_term, ArmTable, IndexContext, UcbVariant};
use crate::environment::{advance_queues, Departures, Environment};
use crate::metrics::{BacklogAccumulator, BacklogStats};
use crate::model::{Decision, QueueState, RunConfig};
use crate::scheduler::{gs_decide, jsq_decide, lasac_decide, lasac_eps_decide, random_decide, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    /// Totals and checkpoints only.
    #[default]
    Summary,
    /// Also keep a [`SlotRecord`] for every slot.
    Full,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOptions {
    pub recording: Recording,
    /// Reconcile arrivals, departures and backlogs every slot.
    pub audit: bool,
    /// Slot counts at which running averages are captured, ascending.
    pub checkpoints: Vec<u64>,
}

/// Running averages after the first `slots` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub slots: u64,
    pub mean_cost: f64,
    pub mean_reward: f64,
    pub mean_backlog: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    /// Backlogs at the start of the slot.
    pub queues: QueueState,
    pub decision: Decision,
    pub arrivals: Vec<u32>,
    /// `W(t) + M(t)`.
    pub cost: f64,
    /// Compound reward `Σ X_{i,k}(t)` of the played super arm.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub policy: Policy,
    pub run: u64,
    pub environment_seed: u64,
    pub horizon: u64,
    pub total_cost: f64,
    pub total_reward: f64,
    pub total_arrivals: u64,
    pub backlog: BacklogStats,
    pub final_queues: QueueState,
    pub checkpoints: Vec<Checkpoint>,
    pub slots: Vec<SlotRecord>,
}

impl RunTrace {
    /// Time-averaged `W(t) + M(t)`; 0 for an empty run.
    pub fn mean_cost(&self) -> f64 {
        per_slot(self.total_cost, self.horizon)
    }

    /// Time-averaged compound reward; 0 for an empty run.
    pub fn mean_reward(&self) -> f64 {
        per_slot(self.total_reward, self.horizon)
    }
}

fn per_slot(total: f64, slots: u64) -> f64 {
    if slots == 0 {
        0.0
    } else {
        total / slots as f64
    }
}

enum Runner {
    Learner {
        variant: UcbVariant,
        table: ArmTable,
        estimates: Vec<f64>,
        arms_per_arm: Vec<usize>,
    },
    Clairvoyant,
    Random,
    Jsq,
}

/// Runs `policy` for `cfg.horizon` slots. The environment stream is
/// derived from `(cfg.seed, run)` and the policy streams likewise.
pub fn run_episode(
    cfg: &RunConfig,
    scenario: &Scenario,
    policy: Policy,
    run: u64,
    opts: &EpisodeOptions,
) -> Result<RunTrace, HarnessError> {
    cfg.validate()?;
    scenario.validate()?;
    let topology = &scenario.topology;
    let environment_seed = seeds::derive_seed(cfg.seed, run, seeds::ENVIRONMENT);
    let mut env = Environment::new(
        topology,
        &scenario.costs,
        &scenario.arrivals,
        &scenario.services,
        seeds::environment_rng(cfg.seed, run),
    );
    let mut policy_rng = seeds::policy_rng(cfg.seed, run);
    let mut runner = match policy.learner() {
        Some(variant) => Runner::Learner {
            variant,
            table: ArmTable::new(topology.arm_count()),
            estimates: vec![0.0; topology.arm_count()],
            arms_per_arm: (0..topology.arm_count())
                .map(|n| topology.arms_of(topology.arm_id(n).switch))
                .collect(),
        },
        None if policy == Policy::Gs => Runner::Clairvoyant,
        None if policy == Policy::Random => Runner::Random,
        None => Runner::Jsq,
    };
    let reward_floor = scenario.costs.reward_floor();

    let mut draw = env.blank_draw();
    let mut queues = QueueState::empty(topology);
    let mut departures = Departures::default();
    let mut backlog = BacklogAccumulator::new(topology.switch_count() + topology.controller_count());
    let (mut total_cost, mut total_reward, mut total_arrivals) = (0.0, 0.0, 0u64);
    let mut checkpoints = Vec::with_capacity(opts.checkpoints.len());
    let mut next_checkpoint = opts.checkpoints.iter().copied().peekable();
    let mut slots = Vec::new();
    let mut chosen = vec![0usize; topology.switch_count()];

    for t in 0..cfg.horizon {
        env.next_slot(&mut draw);
        backlog.push(&queues);

        let decision = match &mut runner {
            Runner::Learner {
                variant,
                table,
                estimates,
                arms_per_arm,
            } => {
                let ln_t = log_term(t);
                table.refresh_estimates(
                    *variant,
                    |n| IndexContext {
                        ln_t,
                        beta: cfg.beta,
                        horizon: cfg.horizon,
                        arm_count: arms_per_arm[n],
                        reward_floor,
                    },
                    estimates,
                );
                if policy == Policy::LasacEps {
                    lasac_eps_decide(
                        topology,
                        &queues,
                        &draw.availability,
                        estimates,
                        cfg.v,
                        cfg.epsilon,
                        &mut policy_rng,
                    )?
                } else {
                    lasac_decide(topology, &queues, &draw.availability, estimates, cfg.v)
                }
            }
            Runner::Clairvoyant => gs_decide(topology, &queues, &draw.availability, &draw.arm_costs, cfg.v),
            Runner::Random => random_decide(topology, &draw.availability, &mut policy_rng.choice),
            Runner::Jsq => jsq_decide(topology, &queues, &draw.availability),
        };
        debug_assert!(decision.validate(topology, &draw.availability).is_ok());

        let mut slot_cost = 0.0;
        let mut slot_reward = 0.0;
        for (c, n) in chosen.iter_mut().zip(decision.arm_indices(topology)) {
            *c = n;
        }
        for (i, &n) in chosen.iter().enumerate() {
            let cost = draw.arm_costs[n];
            slot_cost += draw.arrivals[i] as f64 * cost;
            slot_reward -= cost;
        }
        if let Runner::Learner { table, .. } = &mut runner {
            for &n in &chosen {
                table.record(n, -draw.arm_costs[n])?;
            }
        }
        let slot_arrivals: u64 = draw.arrivals.iter().map(|&a| a as u64).sum();
        total_cost += slot_cost;
        total_reward += slot_reward;
        total_arrivals += slot_arrivals;

        if opts.recording == Recording::Full {
            slots.push(SlotRecord {
                queues: queues.clone(),
                decision: decision.clone(),
                arrivals: draw.arrivals.clone(),
                cost: slot_cost,
                reward: slot_reward,
            });
        }

        let before = if opts.audit { queues.total() } else { 0 };
        advance_queues(&mut queues, &decision, &draw.arrivals, &draw.services, &mut departures);
        if opts.audit {
            audit_slot(t, before, slot_arrivals, &queues, &departures, &draw.services)?;
        }

        while next_checkpoint.peek() == Some(&(t + 1)) {
            next_checkpoint.next();
            let stats = backlog.finish();
            checkpoints.push(Checkpoint {
                slots: t + 1,
                mean_cost: per_slot(total_cost, t + 1),
                mean_reward: per_slot(total_reward, t + 1),
                mean_backlog: stats.mean_total,
            });
        }
    }

    Ok(RunTrace {
        policy,
        run,
        environment_seed,
        horizon: cfg.horizon,
        total_cost,
        total_reward,
        total_arrivals,
        backlog: backlog.finish(),
        final_queues: queues,
        checkpoints,
        slots,
    })
}

fn audit_slot(
    slot: u64,
    before: u64,
    arrivals: u64,
    queues: &QueueState,
    departures: &Departures,
    services: &crate::environment::Services,
) -> Result<(), HarnessError> {
    let served: u64 = departures.switch.iter().chain(&departures.controller).sum();
    if before + arrivals != queues.total() + served {
        return Err(HarnessError::Conservation {
            slot,
            detail: format!(
                "backlog {before} + arrivals {arrivals} != backlog {} + served {served}",
                queues.total()
            ),
        });
    }
    let caps = services.switch.iter().chain(&services.controller);
    for (k, ((q, &d), &mu)) in queues
        .nodes()
        .zip(departures.switch.iter().chain(&departures.controller))
        .zip(caps)
        .enumerate()
    {
        if d > mu as u64 || (d < mu as u64 && q > 0) {
            return Err(HarnessError::Conservation {
                slot,
                detail: format!("node {k}: served {d} of capacity {mu} with backlog {q}"),
            });
        }
    }
    Ok(())
}

/// About `points` log-spaced slot counts in `[1, horizon]`, always ending
/// at `horizon`.
pub fn log_checkpoints(horizon: u64, points: usize) -> Vec<u64> {
    if horizon == 0 || points == 0 {
        return Vec::new();
    }
    let mut out: Vec<u64> = (0..points)
        .map(|k| {
            let f = if points == 1 {
                1.0
            } else {
                k as f64 / (points - 1) as f64
            };
            ((horizon as f64).powf(f).round() as u64).clamp(1, horizon)
        })
        .collect();
    out.push(horizon);
    out.sort_unstable();
    out.dedup();
    out
}
