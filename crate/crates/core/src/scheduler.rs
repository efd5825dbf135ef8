//! Per-slot decision rules.
//!
//! Every rule is evaluated independently per switch against beginning-of-slot
//! backlogs. Arg-min ties go to the lowest controller id, and the local arm
//! loses ties to any controller.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{epsilon_gate, BanditError, Gate, UcbVariant};
use crate::model::{AvailabilitySet, Decision, QueueState, Target, Topology};

/// Scheduling policies selectable by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Policy {
    /// Drift-plus-penalty with UCB1-tuned estimates.
    Lasac,
    /// Drift-plus-penalty with the slot's true costs.
    Gs,
    /// Uniform over `{i} ∪ A_i(t)`.
    Random,
    /// Shortest backlog over `{i} ∪ A_i(t)`.
    Jsq,
    /// LASAC with per-switch ε-greedy exploration.
    LasacEps,
    /// LASAC with a different index family.
    LasacVariant(UcbVariant),
}

impl Policy {
    pub const ALL: [Policy; 8] = [
        Policy::Lasac,
        Policy::Gs,
        Policy::Random,
        Policy::Jsq,
        Policy::LasacEps,
        Policy::LasacVariant(UcbVariant::Ucb1),
        Policy::LasacVariant(UcbVariant::Moss),
        Policy::LasacVariant(UcbVariant::KlUcb),
    ];

    pub fn id(self) -> &'static str {
        match self {
            Policy::Lasac | Policy::LasacVariant(UcbVariant::Ucb1Tuned) => "lasac",
            Policy::Gs => "gs",
            Policy::Random => "random",
            Policy::Jsq => "jsq",
            Policy::LasacEps => "lasac-eps",
            Policy::LasacVariant(UcbVariant::Ucb1) => "lasac-ucb1",
            Policy::LasacVariant(UcbVariant::Moss) => "lasac-moss",
            Policy::LasacVariant(UcbVariant::KlUcb) => "lasac-klucb",
        }
    }

    /// Index family used when the policy learns.
    pub fn learner(self) -> Option<UcbVariant> {
        match self {
            Policy::Lasac | Policy::LasacEps => Some(UcbVariant::Ucb1Tuned),
            Policy::LasacVariant(v) => Some(v),
            Policy::Gs | Policy::Random | Policy::Jsq => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Policy {
    type Err = BanditError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "lasac" => Policy::Lasac,
            "gs" => Policy::Gs,
            "random" => Policy::Random,
            "jsq" => Policy::Jsq,
            "lasac-eps" => Policy::LasacEps,
            "lasac-ucb1" => Policy::LasacVariant(UcbVariant::Ucb1),
            "lasac-moss" => Policy::LasacVariant(UcbVariant::Moss),
            "lasac-klucb" => Policy::LasacVariant(UcbVariant::KlUcb),
            other => return Err(BanditError::UnknownVariant(other.to_string())),
        })
    }
}

impl TryFrom<String> for Policy {
    type Error = BanditError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> Self {
        p.id().to_string()
    }
}

/// Arg-min of `score(target, flat_arm)` over `{i} ∪ A_i(t)` for one switch.
pub fn argmin_target(
    topology: &Topology,
    availability: &AvailabilitySet,
    switch: usize,
    mut score: impl FnMut(Target, usize) -> f64,
) -> Target {
    let base = topology.arm_offset(switch);
    let mask = availability.mask(switch);
    let mut best: Option<(f64, Target)> = None;
    for (slot, &j) in topology.candidates(switch).iter().enumerate() {
        if mask >> slot & 1 == 0 {
            continue;
        }
        let target = Target::Controller(j);
        let s = score(target, base + 1 + slot);
        if best.is_none_or(|(b, _)| s < b) {
            best = Some((s, target));
        }
    }
    let local = score(Target::Local, base);
    match best {
        Some((b, t)) if !(local < b) => t,
        _ => Target::Local,
    }
}

fn drift_penalty_decide(
    topology: &Topology,
    queues: &QueueState,
    availability: &AvailabilitySet,
    rewards: &[f64],
    v: f64,
) -> Decision {
    Decision::from_targets(
        (0..topology.switch_count())
            .map(|i| {
                argmin_target(topology, availability, i, |target, arm| {
                    queues.backlog(i, target) as f64 - v * rewards[arm]
                })
            })
            .collect(),
    )
}

/// `k* = argmin_k Q_k(t) − V·x̃_{i,k}(t)` per switch, with `estimates` in
/// flat arm order.
pub fn lasac_decide(
    topology: &Topology,
    queues: &QueueState,
    availability: &AvailabilitySet,
    estimates: &[f64],
    v: f64,
) -> Decision {
    drift_penalty_decide(topology, queues, availability, estimates, v)
}

/// The LASAC rule fed `−cost` of the current slot instead of estimates.
pub fn gs_decide(
    topology: &Topology,
    queues: &QueueState,
    availability: &AvailabilitySet,
    arm_costs: &[f64],
    v: f64,
) -> Decision {
    let rewards: Vec<f64> = arm_costs.iter().map(|c| -c).collect();
    drift_penalty_decide(topology, queues, availability, &rewards, v)
}

/// Shortest backlog among the switch itself and its accessible controllers.
pub fn jsq_decide(topology: &Topology, queues: &QueueState, availability: &AvailabilitySet) -> Decision {
    Decision::from_targets(
        (0..topology.switch_count())
            .map(|i| argmin_target(topology, availability, i, |t, _| queues.backlog(i, t) as f64))
            .collect(),
    )
}

/// Uniform pick over `{i} ∪ A_i(t)`; consumes one draw.
pub fn uniform_target(
    topology: &Topology,
    availability: &AvailabilitySet,
    switch: usize,
    rng: &mut ChaCha8Rng,
) -> Target {
    let options = availability.option_count(switch);
    let pick = rng.random_range(0..options);
    if pick == 0 {
        Target::Local
    } else {
        availability
            .accessible(topology, switch)
            .nth(pick - 1)
            .map(Target::Controller)
            .expect("pick within accessible set")
    }
}

pub fn random_decide(topology: &Topology, availability: &AvailabilitySet, rng: &mut ChaCha8Rng) -> Decision {
    Decision::from_targets(
        (0..topology.switch_count())
            .map(|i| uniform_target(topology, availability, i, rng))
            .collect(),
    )
}

/// Random streams used by randomized policies. The ε coin and the uniform
/// pick draw from separate streams, so ε = 1 replays `random` exactly.
#[derive(Debug, Clone)]
pub struct PolicyRng {
    pub gate: ChaCha8Rng,
    pub choice: ChaCha8Rng,
}

/// ε-greedy LASAC: each switch explores uniformly with probability ε,
/// otherwise applies the drift-plus-penalty rule to `estimates`.
pub fn lasac_eps_decide(
    topology: &Topology,
    queues: &QueueState,
    availability: &AvailabilitySet,
    estimates: &[f64],
    v: f64,
    epsilon: f64,
    rng: &mut PolicyRng,
) -> Result<Decision, BanditError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(BanditError::BadEpsilon(epsilon));
    }
    Ok(Decision::from_targets(
        (0..topology.switch_count())
            .map(|i| match epsilon_gate(epsilon, &mut rng.gate) {
                Gate::Explore => uniform_target(topology, availability, i, &mut rng.choice),
                Gate::Exploit => argmin_target(topology, availability, i, |target, arm| {
                    queues.backlog(i, target) as f64 - v * estimates[arm]
                }),
            })
            .collect(),
    ))
}
