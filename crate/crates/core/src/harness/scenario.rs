//! Static description of a simulated system and the shipped example.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{ArrivalModel, ArrivalProcess, CostModel, ServiceJitter, ServiceModel};
use crate::model::{ModelError, SwitchLinks, Topology};
use crate::oracle::OracleInput;

/// Topology plus the cost, arrival and service models of every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub topology: Topology,
    pub costs: CostModel,
    pub arrivals: ArrivalModel,
    pub services: ServiceModel,
}

/// Long-run means of a scenario in the layout the oracle expects.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMeans {
    pub mean_rewards: Vec<f64>,
    pub arrival_means: Vec<f64>,
    pub service_means: Vec<f64>,
}

impl ScenarioMeans {
    pub fn oracle_input<'a>(&'a self, topology: &'a Topology) -> OracleInput<'a> {
        OracleInput {
            topology,
            mean_rewards: &self.mean_rewards,
            arrival_means: &self.arrival_means,
            service_means: &self.service_means,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::Invalid("scenario id must not be empty".into()));
        }
        self.costs.validate(&self.topology)?;
        self.arrivals.validate(&self.topology)?;
        self.services.validate(&self.topology)
    }

    pub fn means(&self) -> ScenarioMeans {
        ScenarioMeans {
            mean_rewards: self.costs.expected_costs().into_iter().map(|c| -c).collect(),
            arrival_means: self.arrivals.mean_rates(),
            service_means: self.services.node_means(),
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.arrivals.lambda_max as f64
    }

    pub fn mu_max(&self) -> f64 {
        self.services.mu_max as f64
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Ten switches and four controllers, three potential controllers per
/// switch with access probabilities drawn once from `[0.8, 1]`.
///
/// Local costs are the number of cores assigned to the switch and upload
/// costs are hop counts; the two lowest-numbered controllers are cheap for
/// most switches, so their queues are contended. Bursty arrivals load the
/// system to about 70% of its total service rate.
pub fn reference_scenario(seed: u64) -> Scenario {
    const SWITCHES: usize = 10;
    const CONTROLLERS: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut switches = Vec::with_capacity(SWITCHES);
    let mut local_mean = Vec::with_capacity(SWITCHES);
    let mut upload_mean = Vec::with_capacity(SWITCHES);
    for i in 0..SWITCHES {
        let candidates: Vec<usize> = (0..CONTROLLERS).filter(|&j| j != i % CONTROLLERS).collect();
        let access_prob = candidates.iter().map(|_| round3(rng.random_range(0.8..=1.0))).collect();
        // controllers with low ids are a few hops closer to most switches
        let hops: Vec<f64> = candidates
            .iter()
            .map(|&j| (1 + j + usize::from(rng.random_bool(0.3))).min(4) as f64)
            .collect();
        switches.push(SwitchLinks {
            candidates,
            access_prob,
        });
        local_mean.push(rng.random_range(2..=3) as f64);
        upload_mean.push(hops);
    }
    let topology = Topology::new(CONTROLLERS, switches).expect("static topology is valid");
    Scenario {
        id: "reference".into(),
        topology,
        costs: CostModel {
            local_mean,
            upload_mean,
            w_max: 4.0,
            m_max: 4.0,
            half_width: 0.5,
        },
        arrivals: ArrivalModel::uniform(
            SWITCHES,
            16,
            ArrivalProcess::Bursty {
                low_rate: 3.0,
                high_rate: 8.2,
                p_up: 0.1,
                p_down: 0.2,
            },
        ),
        services: ServiceModel {
            switch_mean: vec![2.0; SWITCHES],
            controller_mean: vec![12.0; CONTROLLERS],
            mu_max: 16,
            jitter: ServiceJitter::Deterministic,
        },
    }
}
