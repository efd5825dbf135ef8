//! Domain types shared by the environment, learners and schedulers.
//!
//! Switches and controllers are both numbered from zero. Every switch `i`
//! owns `1 + |C_i|` arms: the local-processing arm `(i, i)` followed by one
//! association arm per potential controller, in ascending controller order.
//! Arms are addressed either by [`ArmId`] or by a flat index into the arm
//! table returned by [`Topology::arm_index`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when a model value violates its invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("topology needs at least one switch and one controller")]
    EmptyTopology,
    #[error("switch {switch}: potential controller set is empty")]
    EmptyCandidates { switch: usize },
    #[error("switch {switch}: controller {controller} is out of range (|C| = {count})")]
    UnknownController {
        switch: usize,
        controller: usize,
        count: usize,
    },
    #[error("switch {switch}: controller {controller} listed twice")]
    DuplicateController { switch: usize, controller: usize },
    #[error("switch {switch}: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        switch: usize,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("switch {switch}: access probability {value} outside [0, 1]")]
    BadProbability { switch: usize, value: f64 },
    #[error("switch {switch}: too many potential controllers ({count}, max 32)")]
    TooManyCandidates { switch: usize, count: usize },
    #[error("expected {expected} switches, got {got}")]
    SwitchCountMismatch { expected: usize, got: usize },
    #[error("expected {expected} controllers, got {got}")]
    ControllerCountMismatch { expected: usize, got: usize },
    #[error("{what}: mean {mean} must lie in (0, {bound}]")]
    BadMean { what: String, mean: f64, bound: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// Where a switch sends its new requests during a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Process locally (arm `(i, i)`).
    Local,
    /// Upload to the given controller (arm `(i, j)`).
    Controller(usize),
}

/// One switch-controller connection, or a switch's local-processing arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmId {
    pub switch: usize,
    pub target: Target,
}

impl ArmId {
    pub fn local(switch: usize) -> Self {
        Self {
            switch,
            target: Target::Local,
        }
    }

    pub fn upload(switch: usize, controller: usize) -> Self {
        Self {
            switch,
            target: Target::Controller(controller),
        }
    }
}

/// Potential associations of a single switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchLinks {
    /// `C_i`, ascending.
    pub candidates: Vec<usize>,
    /// `p_{i,j}`, aligned with `candidates`.
    pub access_prob: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawTopology {
    controller_count: usize,
    switches: Vec<SwitchLinks>,
}

/// Static system shape: switches, controllers, and who may talk to whom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    controller_count: usize,
    switches: Vec<SwitchLinks>,
    arm_offsets: Vec<usize>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = ModelError;

    fn try_from(raw: RawTopology) -> Result<Self, Self::Error> {
        Topology::new(raw.controller_count, raw.switches)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology {
            controller_count: t.controller_count,
            switches: t.switches,
        }
    }
}

impl Topology {
    /// Builds a topology. Candidate sets are sorted ascending (probabilities
    /// follow their controllers).
    pub fn new(controller_count: usize, switches: Vec<SwitchLinks>) -> Result<Self, ModelError> {
        if controller_count == 0 || switches.is_empty() {
            return Err(ModelError::EmptyTopology);
        }
        let mut normalized = Vec::with_capacity(switches.len());
        for (i, links) in switches.into_iter().enumerate() {
            if links.candidates.is_empty() {
                return Err(ModelError::EmptyCandidates { switch: i });
            }
            if links.candidates.len() > 32 {
                return Err(ModelError::TooManyCandidates {
                    switch: i,
                    count: links.candidates.len(),
                });
            }
            if links.access_prob.len() != links.candidates.len() {
                return Err(ModelError::LengthMismatch {
                    switch: i,
                    what: "access_prob",
                    got: links.access_prob.len(),
                    expected: links.candidates.len(),
                });
            }
            let mut pairs: Vec<(usize, f64)> = links
                .candidates
                .iter()
                .copied()
                .zip(links.access_prob.iter().copied())
                .collect();
            pairs.sort_by_key(|&(j, _)| j);
            for w in pairs.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(ModelError::DuplicateController {
                        switch: i,
                        controller: w[0].0,
                    });
                }
            }
            for &(j, p) in &pairs {
                if j >= controller_count {
                    return Err(ModelError::UnknownController {
                        switch: i,
                        controller: j,
                        count: controller_count,
                    });
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(ModelError::BadProbability { switch: i, value: p });
                }
            }
            normalized.push(SwitchLinks {
                candidates: pairs.iter().map(|&(j, _)| j).collect(),
                access_prob: pairs.iter().map(|&(_, p)| p).collect(),
            });
        }
        let mut arm_offsets = Vec::with_capacity(normalized.len() + 1);
        let mut acc = 0;
        for links in &normalized {
            arm_offsets.push(acc);
            acc += 1 + links.candidates.len();
        }
        arm_offsets.push(acc);
        Ok(Self {
            controller_count,
            switches: normalized,
            arm_offsets,
        })
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    pub fn controller_count(&self) -> usize {
        self.controller_count
    }

    pub fn links(&self, switch: usize) -> &SwitchLinks {
        &self.switches[switch]
    }

    pub fn candidates(&self, switch: usize) -> &[usize] {
        &self.switches[switch].candidates
    }

    /// Total number of arms `|N| = |S| + Σ_i |C_i|`.
    pub fn arm_count(&self) -> usize {
        *self.arm_offsets.last().unwrap_or(&0)
    }

    /// Flat index of switch `i`'s local arm; its association arms follow.
    pub fn arm_offset(&self, switch: usize) -> usize {
        self.arm_offsets[switch]
    }

    /// Number of arms owned by one switch (`1 + |C_i|`).
    pub fn arms_of(&self, switch: usize) -> usize {
        self.arm_offsets[switch + 1] - self.arm_offsets[switch]
    }

    pub fn arm_index(&self, arm: ArmId) -> Option<usize> {
        if arm.switch >= self.switch_count() {
            return None;
        }
        let base = self.arm_offsets[arm.switch];
        match arm.target {
            Target::Local => Some(base),
            Target::Controller(j) => self
                .candidates(arm.switch)
                .binary_search(&j)
                .ok()
                .map(|slot| base + 1 + slot),
        }
    }

    pub fn arm_id(&self, index: usize) -> ArmId {
        let switch = self.arm_offsets.partition_point(|&o| o <= index) - 1;
        let slot = index - self.arm_offsets[switch];
        if slot == 0 {
            ArmId::local(switch)
        } else {
            ArmId::upload(switch, self.candidates(switch)[slot - 1])
        }
    }

    pub fn arms(&self) -> impl Iterator<Item = ArmId> + '_ {
        (0..self.arm_count()).map(|n| self.arm_id(n))
    }
}

/// Accessible controllers `A_i(t)` for every switch during one slot.
///
/// Stored as one bitmask per switch over the positions of `C_i`; the local
/// arm is always available and is not represented.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvailabilitySet {
    masks: Vec<u32>,
}

impl AvailabilitySet {
    pub fn from_masks(masks: Vec<u32>) -> Self {
        Self { masks }
    }

    /// Every potential controller accessible.
    pub fn full(topology: &Topology) -> Self {
        Self {
            masks: (0..topology.switch_count())
                .map(|i| full_mask(topology.candidates(i).len()))
                .collect(),
        }
    }

    /// Only local arms available.
    pub fn none(topology: &Topology) -> Self {
        Self {
            masks: vec![0; topology.switch_count()],
        }
    }

    pub fn mask(&self, switch: usize) -> u32 {
        self.masks[switch]
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub(crate) fn masks_mut(&mut self) -> &mut [u32] {
        &mut self.masks
    }

    pub fn is_accessible_slot(&self, switch: usize, slot: usize) -> bool {
        self.masks[switch] >> slot & 1 == 1
    }

    pub fn is_accessible(&self, topology: &Topology, switch: usize, controller: usize) -> bool {
        topology
            .candidates(switch)
            .binary_search(&controller)
            .map(|slot| self.is_accessible_slot(switch, slot))
            .unwrap_or(false)
    }

    /// `A_i(t)` in ascending controller order.
    pub fn accessible<'a>(&'a self, topology: &'a Topology, switch: usize) -> impl Iterator<Item = usize> + 'a {
        let mask = self.masks[switch];
        topology
            .candidates(switch)
            .iter()
            .enumerate()
            .filter(move |(slot, _)| mask >> slot & 1 == 1)
            .map(|(_, &j)| j)
    }

    /// Size of `{i} ∪ A_i(t)`.
    pub fn option_count(&self, switch: usize) -> usize {
        1 + self.masks[switch].count_ones() as usize
    }

    /// Checks `A_i(t) ⊆ C_i` for every switch.
    pub fn validate(&self, topology: &Topology) -> Result<(), ModelError> {
        if self.masks.len() != topology.switch_count() {
            return Err(ModelError::SwitchCountMismatch {
                expected: topology.switch_count(),
                got: self.masks.len(),
            });
        }
        for (i, &m) in self.masks.iter().enumerate() {
            if m & !full_mask(topology.candidates(i).len()) != 0 {
                return Err(ModelError::Invalid(format!(
                    "switch {i}: availability mask {m:#b} exceeds its candidate set"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn full_mask(len: usize) -> u32 {
    if len >= 32 {
        u32::MAX
    } else {
        (1u32 << len) - 1
    }
}

/// Why an indicator matrix is not a feasible super arm.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecisionError {
    #[error("expected {expected} indicator rows, got {got}")]
    RowCount { expected: usize, got: usize },
    #[error("switch {switch}: indicator row has {got} controller columns, expected {expected}")]
    ColumnCount { switch: usize, got: usize, expected: usize },
    #[error("switch {switch}: {chosen} targets chosen, exactly one required")]
    NotExactlyOne { switch: usize, chosen: usize },
    #[error("switch {switch}: controller {controller} is not a potential association")]
    NotCandidate { switch: usize, controller: usize },
    #[error("switch {switch}: controller {controller} is not accessible this slot")]
    Inaccessible { switch: usize, controller: usize },
}

/// One switch's row of the binary decision matrix `I_i(t)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorRow {
    /// `I_{i,i}(t)`.
    pub local: bool,
    /// `I_{i,j}(t)` for every controller `j ∈ C` (length `|C|`).
    pub controllers: Vec<bool>,
}

/// Per-slot decision `I(t)`: one target per switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    targets: Vec<Target>,
}

impl Decision {
    /// Wraps targets without checking; use [`Decision::validate`] to check.
    pub fn from_targets(targets: Vec<Target>) -> Self {
        Self { targets }
    }

    pub fn all_local(switch_count: usize) -> Self {
        Self {
            targets: vec![Target::Local; switch_count],
        }
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn target(&self, switch: usize) -> Target {
        self.targets[switch]
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// The chosen arms (the super arm `f(t)`).
    pub fn super_arm(&self) -> impl Iterator<Item = ArmId> + '_ {
        self.targets
            .iter()
            .enumerate()
            .map(|(switch, &target)| ArmId { switch, target })
    }

    /// Flat arm index chosen by each switch.
    pub fn arm_indices<'a>(&'a self, topology: &'a Topology) -> impl Iterator<Item = usize> + 'a {
        self.super_arm().map(move |arm| {
            topology
                .arm_index(arm)
                .expect("decision refers to an arm outside the topology")
        })
    }

    /// Checks membership in the feasible super-arm set `F(A(t))`.
    pub fn validate(&self, topology: &Topology, availability: &AvailabilitySet) -> Result<(), DecisionError> {
        if self.targets.len() != topology.switch_count() {
            return Err(DecisionError::RowCount {
                expected: topology.switch_count(),
                got: self.targets.len(),
            });
        }
        for (switch, &target) in self.targets.iter().enumerate() {
            if let Target::Controller(controller) = target {
                let Ok(slot) = topology.candidates(switch).binary_search(&controller) else {
                    return Err(DecisionError::NotCandidate { switch, controller });
                };
                if !availability.is_accessible_slot(switch, slot) {
                    return Err(DecisionError::Inaccessible { switch, controller });
                }
            }
        }
        Ok(())
    }

    /// Builds a decision from binary indicator rows, rejecting any matrix
    /// that picks other than exactly one target per switch or that uses a
    /// controller outside `A_i(t)`.
    pub fn from_indicators(
        topology: &Topology,
        availability: &AvailabilitySet,
        rows: &[IndicatorRow],
    ) -> Result<Self, DecisionError> {
        if rows.len() != topology.switch_count() {
            return Err(DecisionError::RowCount {
                expected: topology.switch_count(),
                got: rows.len(),
            });
        }
        let mut targets = Vec::with_capacity(rows.len());
        for (switch, row) in rows.iter().enumerate() {
            if row.controllers.len() != topology.controller_count() {
                return Err(DecisionError::ColumnCount {
                    switch,
                    got: row.controllers.len(),
                    expected: topology.controller_count(),
                });
            }
            let chosen = usize::from(row.local) + row.controllers.iter().filter(|&&b| b).count();
            if chosen != 1 {
                return Err(DecisionError::NotExactlyOne { switch, chosen });
            }
            let target = match row.controllers.iter().position(|&b| b) {
                Some(j) => Target::Controller(j),
                None => Target::Local,
            };
            targets.push(target);
        }
        let decision = Self { targets };
        decision.validate(topology, availability)?;
        Ok(decision)
    }

    pub fn to_indicators(&self, topology: &Topology) -> Vec<IndicatorRow> {
        self.targets
            .iter()
            .map(|&t| {
                let mut controllers = vec![false; topology.controller_count()];
                if let Target::Controller(j) = t {
                    controllers[j] = true;
                }
                IndicatorRow {
                    local: t == Target::Local,
                    controllers,
                }
            })
            .collect()
    }
}

/// Backlogs `Q^S_i(t)` and `Q^C_j(t)`, in requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueState {
    pub switch: Vec<u64>,
    pub controller: Vec<u64>,
}

impl QueueState {
    pub fn empty(topology: &Topology) -> Self {
        Self {
            switch: vec![0; topology.switch_count()],
            controller: vec![0; topology.controller_count()],
        }
    }

    /// Backlog `Q_k(t)` seen by a switch for one of its targets.
    pub fn backlog(&self, switch: usize, target: Target) -> u64 {
        match target {
            Target::Local => self.switch[switch],
            Target::Controller(j) => self.controller[j],
        }
    }

    pub fn total(&self) -> u64 {
        self.switch.iter().sum::<u64>() + self.controller.iter().sum::<u64>()
    }

    /// Switch backlogs followed by controller backlogs.
    pub fn nodes(&self) -> impl Iterator<Item = u64> + '_ {
        self.switch.iter().chain(self.controller.iter()).copied()
    }
}

/// Per-arm bandit memory. Reward sums are kept instead of sample lists.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmStats {
    /// `h_{i,k}`: times this arm was played.
    pub count: u64,
    pub reward_sum: f64,
    pub reward_sq_sum: f64,
    /// Most recent estimate `x̃_{i,k}` handed to a scheduler.
    pub last_estimate: f64,
}

impl ArmStats {
    /// Sample mean `x̂`, or 0 for an unplayed arm.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.reward_sum / self.count as f64
        }
    }

    /// Mean of squared rewards, or 0 for an unplayed arm.
    pub fn mean_sq(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.reward_sq_sum / self.count as f64
        }
    }
}

/// Drift-penalty tradeoff, exploration weight and the rest of a run's knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Horizon `T` in slots.
    pub horizon: u64,
    /// Slot length in milliseconds; metadata only.
    #[serde(default = "default_slot_ms")]
    pub slot_ms: f64,
    /// `V`.
    pub v: f64,
    /// `β`.
    pub beta: f64,
    /// Exploration probability used by `lasac-eps`.
    #[serde(default)]
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default = "default_run_count")]
    pub run_count: usize,
}

fn default_slot_ms() -> f64 {
    10.0
}

fn default_run_count() -> usize {
    1
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.v.is_finite() && self.v >= 0.0) {
            return Err(ModelError::Invalid(format!("V must be >= 0, got {}", self.v)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(ModelError::Invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ModelError::Invalid(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.run_count == 0 {
            return Err(ModelError::Invalid("run_count must be >= 1".into()));
        }
        Ok(())
    }
}
