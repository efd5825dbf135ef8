//! Regret, backlog statistics and the closed-form stability and regret bounds.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::QueueState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("reward trace is empty")]
    EmptyTrace,
    #[error("G_beta diverges for beta = {0} <= sqrt(2)")]
    Divergent(f64),
    #[error("{0}")]
    Invalid(String),
}

/// `R* − (1/T) Σ_t R(t)`, averaged over the supplied runs. The sign is not
/// clamped.
pub fn time_avg_regret<T: AsRef<[f64]>>(r_star: f64, traces: &[T]) -> Result<f64, MetricsError> {
    if traces.is_empty() || traces.iter().any(|t| t.as_ref().is_empty()) {
        return Err(MetricsError::EmptyTrace);
    }
    let total: f64 = traces
        .iter()
        .map(|t| {
            let t = t.as_ref();
            r_star - t.iter().sum::<f64>() / t.len() as f64
        })
        .sum();
    Ok(total / traces.len() as f64)
}

/// Time-averaged backlogs of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacklogStats {
    /// Time average of `Σ_i Q^S_i + Σ_j Q^C_j`.
    pub mean_total: f64,
    /// Per-node time averages, switches then controllers.
    pub per_node: Vec<f64>,
    /// Population variance of `per_node`.
    pub variance: f64,
}

/// Streaming form of [`backlog_stats`]; integer sums keep it exact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BacklogAccumulator {
    sums: Vec<u128>,
    slots: u64,
}

impl BacklogAccumulator {
    pub fn new(nodes: usize) -> Self {
        Self {
            sums: vec![0; nodes],
            slots: 0,
        }
    }

    pub fn push(&mut self, queues: &QueueState) {
        if self.sums.is_empty() {
            self.sums = vec![0; queues.switch.len() + queues.controller.len()];
        }
        for (s, q) in self.sums.iter_mut().zip(queues.nodes()) {
            *s += q as u128;
        }
        self.slots += 1;
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    pub fn finish(&self) -> BacklogStats {
        if self.slots == 0 {
            return BacklogStats {
                mean_total: 0.0,
                per_node: vec![0.0; self.sums.len()],
                variance: 0.0,
            };
        }
        let t = self.slots as f64;
        let per_node: Vec<f64> = self.sums.iter().map(|&s| s as f64 / t).collect();
        let mean_total = self.sums.iter().sum::<u128>() as f64 / t;
        BacklogStats {
            mean_total,
            variance: population_variance(&per_node),
            per_node,
        }
    }
}

pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

pub fn backlog_stats(traces: &[QueueState]) -> BacklogStats {
    let mut acc = BacklogAccumulator::default();
    for q in traces {
        acc.push(q);
    }
    acc.finish()
}

/// `B = ½(|S| + |C|) μ_max² + ½ |S| λ_max²`.
pub fn drift_constant(switches: usize, controllers: usize, mu_max: f64, lambda_max: f64) -> f64 {
    0.5 * (switches + controllers) as f64 * mu_max * mu_max + 0.5 * switches as f64 * lambda_max * lambda_max
}

/// Default `B̃ = B / λ_max` for the regret bound.
pub fn default_b_tilde(b: f64, lambda_max: f64) -> f64 {
    b / lambda_max
}

/// Backlog bound `B/ε + V |S| λ_max max{w_max, m_max}`.
pub fn theorem1_bound(
    b: f64,
    epsilon: f64,
    v: f64,
    switches: usize,
    lambda_max: f64,
    w_max: f64,
    m_max: f64,
) -> Result<f64, MetricsError> {
    if !(epsilon > 0.0) {
        return Err(MetricsError::Invalid(format!(
            "slack epsilon must be > 0, got {epsilon}"
        )));
    }
    if !(v >= 0.0) {
        return Err(MetricsError::Invalid(format!("V must be >= 0, got {v}")));
    }
    Ok(b / epsilon + v * switches as f64 * lambda_max * w_max.max(m_max))
}

/// Regret bound
/// `B̃/V + 2|S|(|C|+1) [β sqrt(ln T / T) + (G_β + ½) max{w_max, m_max} / T]`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_bound(
    b_tilde: f64,
    v: f64,
    beta: f64,
    horizon: f64,
    switches: usize,
    controllers: usize,
    w_max: f64,
    m_max: f64,
) -> Result<f64, MetricsError> {
    if !(v > 0.0) {
        return Err(MetricsError::Invalid(format!("V must be > 0, got {v}")));
    }
    if !(horizon >= 1.0) {
        return Err(MetricsError::Invalid(format!("T must be >= 1, got {horizon}")));
    }
    let g = g_beta(beta, 1e-10)?;
    let arms = 2.0 * switches as f64 * (controllers + 1) as f64;
    let per_arm = beta * (horizon.ln() / horizon).sqrt() + (g + 0.5) * w_max.max(m_max) / horizon;
    Ok(b_tilde / v + arms * per_arm)
}

/// `G_β = Σ_{t≥1} t^(−β²/2)` to within `tol`.
///
/// With `f(x) = x^(−s)` convex, the tail after `N` terms lies between
/// `∫_{N+1}^∞ f + f(N+1)/2` and `∫_{N+1/2}^∞ f`. The midpoint of that bracket
/// is used and `N` doubles until half its width is below `tol`.
pub fn g_beta(beta: f64, tol: f64) -> Result<f64, MetricsError> {
    if !(beta > SQRT_2) {
        return Err(MetricsError::Divergent(beta));
    }
    if !(tol > 0.0) {
        return Err(MetricsError::Invalid(format!("tolerance must be > 0, got {tol}")));
    }
    let s = beta * beta / 2.0;
    let upper_integral = |x: f64| x.powf(1.0 - s) / (s - 1.0);
    let mut partial = 0.0;
    let mut n = 0u64;
    let mut target = 16u64;
    loop {
        // add terms from small to large for accuracy
        let chunk: f64 = (n + 1..=target).rev().map(|t| (t as f64).powf(-s)).sum();
        partial += chunk;
        n = target;
        let x = n as f64;
        let lo = upper_integral(x + 1.0) + 0.5 * (x + 1.0).powf(-s);
        let hi = upper_integral(x + 0.5);
        if 0.5 * (hi - lo) < tol || n >= 1 << 30 {
            return Ok(partial + 0.5 * (hi + lo));
        }
        target *= 2;
    }
}
