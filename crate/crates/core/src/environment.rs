//! The per-slot stochastic world.
//!
//! Each slot the environment draws link accessibility, new requests, service
//! capacities and a per-request cost for every arm. Costs are drawn for all
//! arms even though only the chosen ones are revealed; this keeps the random
//! stream independent of the policy, so different schedulers fed the same
//! seed face the same sample path.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::model::{AvailabilitySet, Decision, ModelError, QueueState, Target, Topology};

/// Mean per-request costs and their bounds.
///
/// A cost for an arm with mean `c` and bound `b` is drawn uniformly from
/// `[max(0, c - δ), min(b, c + δ)]`; `δ = 0` makes costs deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// `m̄_i` for every switch.
    pub local_mean: Vec<f64>,
    /// `w̄_{i,j}`, aligned with each switch's ascending candidate list.
    pub upload_mean: Vec<Vec<f64>>,
    pub w_max: f64,
    pub m_max: f64,
    /// Half-width `δ` of the uniform cost window.
    #[serde(default)]
    pub half_width: f64,
}

impl CostModel {
    pub fn validate(&self, topology: &Topology) -> Result<(), ModelError> {
        let n = topology.switch_count();
        if self.local_mean.len() != n {
            return Err(ModelError::SwitchCountMismatch {
                expected: n,
                got: self.local_mean.len(),
            });
        }
        if self.upload_mean.len() != n {
            return Err(ModelError::SwitchCountMismatch {
                expected: n,
                got: self.upload_mean.len(),
            });
        }
        if !(self.w_max > 0.0 && self.m_max > 0.0) {
            return Err(ModelError::Invalid("w_max and m_max must be positive".into()));
        }
        if !(self.half_width.is_finite() && self.half_width >= 0.0) {
            return Err(ModelError::Invalid("cost half_width must be >= 0".into()));
        }
        for i in 0..n {
            let m = self.local_mean[i];
            if !(m > 0.0 && m <= self.m_max) {
                return Err(ModelError::BadMean {
                    what: format!("local cost of switch {i}"),
                    mean: m,
                    bound: self.m_max,
                });
            }
            let expected = topology.candidates(i).len();
            if self.upload_mean[i].len() != expected {
                return Err(ModelError::LengthMismatch {
                    switch: i,
                    what: "upload_mean",
                    got: self.upload_mean[i].len(),
                    expected,
                });
            }
            for (&j, &w) in topology.candidates(i).iter().zip(&self.upload_mean[i]) {
                if !(w > 0.0 && w <= self.w_max) {
                    return Err(ModelError::BadMean {
                        what: format!("upload cost ({i},{j})"),
                        mean: w,
                        bound: self.w_max,
                    });
                }
            }
        }
        Ok(())
    }

    /// `max{w_max, m_max}`.
    pub fn max_cost(&self) -> f64 {
        self.w_max.max(self.m_max)
    }

    /// Lower bound `x_min = -max{w_max, m_max}` on any reward.
    pub fn reward_floor(&self) -> f64 {
        -self.max_cost()
    }

    /// Nominal means in flat arm order.
    pub fn nominal_means(&self) -> Vec<f64> {
        self.windows().map(|(mean, _, _)| mean).collect()
    }

    /// Mean of the cost distribution actually sampled for each arm (the
    /// window midpoint, which differs from the nominal mean when the window
    /// is clipped at 0 or at the bound).
    pub fn expected_costs(&self) -> Vec<f64> {
        self.windows().map(|(_, lo, hi)| 0.5 * (lo + hi)).collect()
    }

    fn windows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let d = self.half_width;
        self.local_mean.iter().zip(&self.upload_mean).flat_map(move |(&m, ws)| {
            std::iter::once((m, self.m_max))
                .chain(ws.iter().map(move |&w| (w, self.w_max)))
                .map(move |(mean, bound)| (mean, (mean - d).max(0.0), (mean + d).min(bound)))
        })
    }

    pub(crate) fn sampler(&self) -> CostSampler {
        let (lo, width) = self.windows().map(|(_, lo, hi)| (lo, hi - lo)).unzip();
        CostSampler { lo, width }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CostSampler {
    lo: Vec<f64>,
    width: Vec<f64>,
}

impl CostSampler {
    /// One uniform draw per arm, always.
    pub(crate) fn sample_all(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for ((o, &lo), &w) in out.iter_mut().zip(&self.lo).zip(&self.width) {
            let u: f64 = rng.random();
            *o = lo + w * u;
        }
    }

    fn sample_one(&self, arm: usize, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        self.lo[arm] + self.width[arm] * u
    }
}

/// Per-request cost of each switch's chosen arm in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedCosts {
    /// Indexed by switch: `W_{i,j}(t)` or `M_i(t)` for the arm it played.
    pub per_switch: Vec<f64>,
}

impl RealizedCosts {
    /// Reveals the chosen arms' entries of a full per-arm cost draw.
    pub fn reveal(topology: &Topology, decision: &Decision, all_costs: &[f64]) -> Self {
        Self {
            per_switch: decision.arm_indices(topology).map(|n| all_costs[n]).collect(),
        }
    }
}

/// Draws costs for the chosen arms only.
pub fn sample_costs(
    costs: &CostModel,
    topology: &Topology,
    decision: &Decision,
    rng: &mut ChaCha8Rng,
) -> RealizedCosts {
    let sampler = costs.sampler();
    RealizedCosts {
        per_switch: decision
            .arm_indices(topology)
            .map(|n| sampler.sample_one(n, rng))
            .collect(),
    }
}

/// Request generation process of one switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Exactly `rate` requests every slot.
    Constant { rate: u32 },
    /// Poisson(`rate`) conditioned on at most `λ_max`.
    Poisson { rate: f64 },
    /// Two-state Markov-modulated truncated Poisson. The state flips
    /// low→high with probability `p_up` and high→low with `p_down` after
    /// every slot.
    Bursty {
        low_rate: f64,
        high_rate: f64,
        p_up: f64,
        p_down: f64,
    },
}

impl ArrivalProcess {
    fn validate(&self, lambda_max: u32) -> Result<(), ModelError> {
        let rate_ok = |r: f64| r.is_finite() && r >= 0.0;
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        match *self {
            ArrivalProcess::Constant { rate } if rate > lambda_max => Err(ModelError::Invalid(format!(
                "constant arrival rate {rate} exceeds lambda_max {lambda_max}"
            ))),
            ArrivalProcess::Poisson { rate } if !rate_ok(rate) => {
                Err(ModelError::Invalid(format!("bad Poisson rate {rate}")))
            }
            ArrivalProcess::Bursty {
                low_rate,
                high_rate,
                p_up,
                p_down,
            } if !(rate_ok(low_rate) && rate_ok(high_rate) && prob_ok(p_up) && prob_ok(p_down))
                || p_up + p_down == 0.0 =>
            {
                Err(ModelError::Invalid("bad bursty arrival parameters".into()))
            }
            _ => Ok(()),
        }
    }

    /// Long-run mean requests per slot.
    pub fn mean_rate(&self, lambda_max: u32) -> f64 {
        match *self {
            ArrivalProcess::Constant { rate } => rate as f64,
            ArrivalProcess::Poisson { rate } => TruncatedPoisson::new(rate, lambda_max).mean(),
            ArrivalProcess::Bursty {
                low_rate,
                high_rate,
                p_up,
                p_down,
            } => {
                let high_share = p_up / (p_up + p_down);
                (1.0 - high_share) * TruncatedPoisson::new(low_rate, lambda_max).mean()
                    + high_share * TruncatedPoisson::new(high_rate, lambda_max).mean()
            }
        }
    }
}

/// Arrival processes of every switch with their common bound `λ_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub lambda_max: u32,
    pub per_switch: Vec<ArrivalProcess>,
}

impl ArrivalModel {
    pub fn uniform(switch_count: usize, lambda_max: u32, process: ArrivalProcess) -> Self {
        Self {
            lambda_max,
            per_switch: vec![process; switch_count],
        }
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), ModelError> {
        if self.per_switch.len() != topology.switch_count() {
            return Err(ModelError::SwitchCountMismatch {
                expected: topology.switch_count(),
                got: self.per_switch.len(),
            });
        }
        self.per_switch.iter().try_for_each(|p| p.validate(self.lambda_max))
    }

    /// `λ̄_i` for every switch.
    pub fn mean_rates(&self) -> Vec<f64> {
        self.per_switch.iter().map(|p| p.mean_rate(self.lambda_max)).collect()
    }

    pub fn sampler(&self, rng: &mut ChaCha8Rng) -> ArrivalSampler {
        ArrivalSampler::new(self, rng)
    }
}

/// Truncated Poisson pmf on `{0, …, λ_max}` sampled by inverse transform.
#[derive(Debug, Clone)]
struct TruncatedPoisson {
    cdf: Vec<f64>,
}

impl TruncatedPoisson {
    fn new(rate: f64, lambda_max: u32) -> Self {
        let mut weights = Vec::with_capacity(lambda_max as usize + 1);
        let mut w = 1.0;
        weights.push(w);
        for k in 1..=lambda_max {
            w *= rate / k as f64;
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Self { cdf }
    }

    fn mean(&self) -> f64 {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let p = c - prev;
                prev = c;
                k as f64 * p
            })
            .sum()
    }

    fn sample(&self, u: f64) -> u32 {
        let k = self.cdf.partition_point(|&c| c <= u);
        k.min(self.cdf.len() - 1) as u32
    }
}

#[derive(Debug, Clone)]
enum SwitchSampler {
    Constant(u32),
    Poisson(TruncatedPoisson),
    Bursty {
        low: TruncatedPoisson,
        high: TruncatedPoisson,
        p_up: f64,
        p_down: f64,
        is_high: bool,
    },
}

/// Stateful arrival generator for one run.
#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    switches: Vec<SwitchSampler>,
}

impl ArrivalSampler {
    fn new(model: &ArrivalModel, rng: &mut ChaCha8Rng) -> Self {
        let lmax = model.lambda_max;
        let switches = model
            .per_switch
            .iter()
            .map(|p| {
                // one draw per switch regardless of kind, for stream alignment
                let u: f64 = rng.random();
                match *p {
                    ArrivalProcess::Constant { rate } => SwitchSampler::Constant(rate),
                    ArrivalProcess::Poisson { rate } => SwitchSampler::Poisson(TruncatedPoisson::new(rate, lmax)),
                    ArrivalProcess::Bursty {
                        low_rate,
                        high_rate,
                        p_up,
                        p_down,
                    } => SwitchSampler::Bursty {
                        low: TruncatedPoisson::new(low_rate, lmax),
                        high: TruncatedPoisson::new(high_rate, lmax),
                        p_up,
                        p_down,
                        // start in the stationary distribution
                        is_high: u < p_up / (p_up + p_down),
                    },
                }
            })
            .collect();
        Self { switches }
    }

    /// Draws `λ_i(t)` for every switch. Exactly two uniforms are consumed
    /// per switch per slot.
    pub fn sample_into(&mut self, rng: &mut ChaCha8Rng, out: &mut [u32]) {
        for (s, o) in self.switches.iter_mut().zip(out.iter_mut()) {
            let u_count: f64 = rng.random();
            let u_flip: f64 = rng.random();
            *o = match s {
                SwitchSampler::Constant(rate) => *rate,
                SwitchSampler::Poisson(tp) => tp.sample(u_count),
                SwitchSampler::Bursty {
                    low,
                    high,
                    p_up,
                    p_down,
                    is_high,
                } => {
                    let n = if *is_high {
                        high.sample(u_count)
                    } else {
                        low.sample(u_count)
                    };
                    let flip = if *is_high { *p_down } else { *p_up };
                    if u_flip < flip {
                        *is_high = !*is_high;
                    }
                    n
                }
            };
        }
    }
}

/// Draws `λ_i(t)` for every switch.
pub fn sample_arrivals(sampler: &mut ArrivalSampler, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut out = vec![0; sampler.switches.len()];
    sampler.sample_into(rng, &mut out);
    out
}

/// Per-slot service capacity distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceJitter {
    /// Exactly `μ̄` every slot (`μ̄` must be an integer).
    #[default]
    Deterministic,
    /// Binomial(`μ_max`, `μ̄ / μ_max`).
    Binomial,
}

/// Service processes with means `μ̄^S_i`, `μ̄^C_j` and common bound `μ_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceModel {
    pub switch_mean: Vec<f64>,
    pub controller_mean: Vec<f64>,
    pub mu_max: u32,
    #[serde(default)]
    pub jitter: ServiceJitter,
}

impl ServiceModel {
    pub fn validate(&self, topology: &Topology) -> Result<(), ModelError> {
        if self.switch_mean.len() != topology.switch_count() {
            return Err(ModelError::SwitchCountMismatch {
                expected: topology.switch_count(),
                got: self.switch_mean.len(),
            });
        }
        if self.controller_mean.len() != topology.controller_count() {
            return Err(ModelError::ControllerCountMismatch {
                expected: topology.controller_count(),
                got: self.controller_mean.len(),
            });
        }
        for &m in self.switch_mean.iter().chain(&self.controller_mean) {
            if !(m >= 0.0 && m <= self.mu_max as f64) {
                return Err(ModelError::Invalid(format!(
                    "service mean {m} outside [0, mu_max = {}]",
                    self.mu_max
                )));
            }
            if self.jitter == ServiceJitter::Deterministic && m.fract() != 0.0 {
                return Err(ModelError::Invalid(format!(
                    "deterministic service needs integer means, got {m}"
                )));
            }
        }
        Ok(())
    }

    /// Switch means followed by controller means.
    pub fn node_means(&self) -> Vec<f64> {
        self.switch_mean.iter().chain(&self.controller_mean).copied().collect()
    }

    pub(crate) fn sampler(&self) -> ServiceSampler {
        let nodes = self
            .node_means()
            .into_iter()
            .map(|m| match self.jitter {
                ServiceJitter::Deterministic => NodeService::Fixed(m as u32),
                ServiceJitter::Binomial => NodeService::Binomial(
                    Binomial::new(self.mu_max as u64, (m / self.mu_max as f64).clamp(0.0, 1.0))
                        .expect("validated binomial parameters"),
                ),
            })
            .collect();
        ServiceSampler {
            nodes,
            switch_count: self.switch_mean.len(),
        }
    }
}

#[derive(Debug, Clone)]
enum NodeService {
    Fixed(u32),
    Binomial(Binomial),
}

#[derive(Debug, Clone)]
pub(crate) struct ServiceSampler {
    nodes: Vec<NodeService>,
    switch_count: usize,
}

impl ServiceSampler {
    pub(crate) fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut Services) {
        for (k, node) in self.nodes.iter().enumerate() {
            let mu = match node {
                NodeService::Fixed(m) => *m,
                NodeService::Binomial(b) => b.sample(rng) as u32,
            };
            if k < self.switch_count {
                out.switch[k] = mu;
            } else {
                out.controller[k - self.switch_count] = mu;
            }
        }
    }
}

/// Service capacities `μ^S_i(t)` and `μ^C_j(t)` of one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Services {
    pub switch: Vec<u32>,
    pub controller: Vec<u32>,
}

impl Services {
    pub fn zeros(topology: &Topology) -> Self {
        Self {
            switch: vec![0; topology.switch_count()],
            controller: vec![0; topology.controller_count()],
        }
    }
}

/// Draws `A_i(t)`: each `j ∈ C_i` is included independently with
/// probability `p_{i,j}`. One uniform is consumed per pair.
pub fn sample_availability(topology: &Topology, rng: &mut ChaCha8Rng) -> AvailabilitySet {
    let mut masks = vec![0; topology.switch_count()];
    sample_availability_into(topology, rng, &mut masks);
    AvailabilitySet::from_masks(masks)
}

pub(crate) fn sample_availability_into(topology: &Topology, rng: &mut ChaCha8Rng, masks: &mut [u32]) {
    for (i, mask) in masks.iter_mut().enumerate() {
        let mut m = 0u32;
        for (slot, &p) in topology.links(i).access_prob.iter().enumerate() {
            let u: f64 = rng.random();
            if u < p {
                m |= 1 << slot;
            }
        }
        *mask = m;
    }
}

/// Requests actually served at each node during a slot.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Departures {
    pub switch: Vec<u64>,
    pub controller: Vec<u64>,
}

/// Applies one slot of the queueing recurrences in place and returns what
/// each node served:
///
/// `Q^S_i ← [Q^S_i + I_{i,i} λ_i − μ^S_i]⁺`,
/// `Q^C_j ← [Q^C_j + Σ_i I_{i,j} λ_i − μ^C_j]⁺`.
pub fn advance_queues(
    queues: &mut QueueState,
    decision: &Decision,
    arrivals: &[u32],
    services: &Services,
    departures: &mut Departures,
) {
    departures.switch.resize(queues.switch.len(), 0);
    departures.controller.resize(queues.controller.len(), 0);
    let mut ctrl_in = vec![0u64; queues.controller.len()];
    let mut local_in = vec![0u64; queues.switch.len()];
    for (i, &target) in decision.targets().iter().enumerate() {
        match target {
            Target::Local => local_in[i] += arrivals[i] as u64,
            Target::Controller(j) => ctrl_in[j] += arrivals[i] as u64,
        }
    }
    for (i, q) in queues.switch.iter_mut().enumerate() {
        let offered = *q + local_in[i];
        let served = offered.min(services.switch[i] as u64);
        departures.switch[i] = served;
        *q = offered - served;
    }
    for (j, q) in queues.controller.iter_mut().enumerate() {
        let offered = *q + ctrl_in[j];
        let served = offered.min(services.controller[j] as u64);
        departures.controller[j] = served;
        *q = offered - served;
    }
}

/// Pure form of [`advance_queues`].
pub fn step_queues(queues: &QueueState, decision: &Decision, arrivals: &[u32], services: &Services) -> QueueState {
    let mut next = queues.clone();
    advance_queues(&mut next, decision, arrivals, services, &mut Departures::default());
    next
}

/// Total slot cost `W(t) + M(t) = Σ_i λ_i(t) · cost of i's chosen arm`.
pub fn slot_cost(decision: &Decision, arrivals: &[u32], realized: &RealizedCosts) -> f64 {
    debug_assert_eq!(decision.len(), realized.per_switch.len());
    arrivals
        .iter()
        .zip(&realized.per_switch)
        .map(|(&lambda, &c)| lambda as f64 * c)
        .sum()
}

/// Everything the environment reveals or keeps hidden in one slot.
#[derive(Debug, Clone)]
pub struct SlotDraw {
    pub availability: AvailabilitySet,
    pub arrivals: Vec<u32>,
    pub services: Services,
    /// Per-request cost of every arm in flat arm order (hidden from learners).
    pub arm_costs: Vec<f64>,
}

/// One run's world: owns the environment random stream and arrival state.
#[derive(Debug, Clone)]
pub struct Environment<'a> {
    topology: &'a Topology,
    arrivals: ArrivalSampler,
    services: ServiceSampler,
    costs: CostSampler,
    rng: ChaCha8Rng,
}

impl<'a> Environment<'a> {
    pub fn new(
        topology: &'a Topology,
        costs: &CostModel,
        arrivals: &ArrivalModel,
        services: &ServiceModel,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let arrivals = arrivals.sampler(&mut rng);
        Self {
            topology,
            arrivals,
            services: services.sampler(),
            costs: costs.sampler(),
            rng,
        }
    }

    pub fn blank_draw(&self) -> SlotDraw {
        SlotDraw {
            availability: AvailabilitySet::none(self.topology),
            arrivals: vec![0; self.topology.switch_count()],
            services: Services::zeros(self.topology),
            arm_costs: vec![0.0; self.topology.arm_count()],
        }
    }

    /// Fills `draw` with the next slot. The draw order is fixed:
    /// availability, arrivals, services, costs.
    pub fn next_slot(&mut self, draw: &mut SlotDraw) {
        sample_availability_into(self.topology, &mut self.rng, draw.availability.masks_mut());
        self.arrivals.sample_into(&mut self.rng, &mut draw.arrivals);
        self.services.sample_into(&mut self.rng, &mut draw.services);
        self.costs.sample_all(&mut self.rng, &mut draw.arm_costs);
    }
}
