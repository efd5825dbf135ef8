//! Per-arm reward bookkeeping and upper-confidence indices.
//!
//! Rewards are negated per-request costs, so every reward is `≤ 0` and every
//! estimate handed to a scheduler is clamped to `≤ 0`. Slots are numbered
//! `0..T`; the confidence terms use the natural log of `slot + 1`
//! ([`log_term`]).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ArmStats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BanditError {
    #[error("reward {0} is positive; rewards are negated costs")]
    PositiveReward(f64),
    #[error("reward is not finite")]
    NonFiniteReward,
    #[error("unknown estimator variant `{0}`")]
    UnknownVariant(String),
    #[error("epsilon {0} outside [0, 1]")]
    BadEpsilon(f64),
}

/// Log argument used by every confidence term at a given slot.
pub fn log_term(slot: u64) -> f64 {
    ((slot + 1) as f64).ln()
}

/// Folds one observed reward into an arm's sums.
pub fn record_reward(stats: &mut ArmStats, reward: f64) -> Result<(), BanditError> {
    if !reward.is_finite() {
        return Err(BanditError::NonFiniteReward);
    }
    if reward > 0.0 {
        return Err(BanditError::PositiveReward(reward));
    }
    stats.count += 1;
    stats.reward_sum += reward;
    stats.reward_sq_sum += reward * reward;
    Ok(())
}

/// UCB1-tuned upper confidence bound before the non-positivity clamp.
///
/// `V = mean(X²) − x̂² + sqrt(2 ln_t / h)` and
/// `u = x̂ + β sqrt((ln_t / h) · min{1/4, V})`. Returns 0 for an unplayed arm.
pub fn ucb1_tuned_index(stats: &ArmStats, ln_t: f64, beta: f64) -> f64 {
    if stats.count == 0 {
        return 0.0;
    }
    let h = stats.count as f64;
    let mean = stats.mean();
    // the empirical variance can round slightly below zero
    let spread = (stats.mean_sq() - mean * mean).max(0.0);
    let variance = spread + (2.0 * ln_t / h).sqrt();
    mean + beta * (ln_t / h * variance.min(0.25)).sqrt()
}

/// `x̃ = min{u, 0}`.
pub fn ucb1_tuned_estimate(stats: &ArmStats, ln_t: f64, beta: f64) -> f64 {
    ucb1_tuned_index(stats, ln_t, beta).min(0.0)
}

/// Index family a learner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UcbVariant {
    Ucb1Tuned,
    Ucb1,
    Moss,
    KlUcb,
}

impl UcbVariant {
    pub fn parse(id: &str) -> Result<Self, BanditError> {
        match id {
            "ucb1-tuned" => Ok(Self::Ucb1Tuned),
            "ucb1" => Ok(Self::Ucb1),
            "moss" => Ok(Self::Moss),
            "klucb" | "kl-ucb" => Ok(Self::KlUcb),
            other => Err(BanditError::UnknownVariant(other.to_string())),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::Ucb1Tuned => "ucb1-tuned",
            Self::Ucb1 => "ucb1",
            Self::Moss => "moss",
            Self::KlUcb => "klucb",
        }
    }
}

/// Inputs shared by all arms of one switch at one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexContext {
    /// Output of [`log_term`].
    pub ln_t: f64,
    /// `β`; only UCB1-tuned uses it.
    pub beta: f64,
    /// Horizon `T`, used by MOSS.
    pub horizon: u64,
    /// Number of arms the switch chooses among, used by MOSS.
    pub arm_count: usize,
    /// `x_min = −max{w_max, m_max}`.
    pub reward_floor: f64,
}

/// Estimate `x̃ ≤ 0` under the chosen index family.
///
/// UCB1, MOSS and KL-UCB assume rewards in `[0, 1]`: rewards are mapped by
/// `y = (X − x_min) / (−x_min)`, the index is computed on `y`, and the result
/// is mapped back before clamping.
pub fn variant_estimate(stats: &ArmStats, variant: UcbVariant, ctx: &IndexContext) -> f64 {
    if stats.count == 0 {
        return 0.0;
    }
    let index = match variant {
        UcbVariant::Ucb1Tuned => ucb1_tuned_index(stats, ctx.ln_t, ctx.beta),
        _ => {
            let scale = -ctx.reward_floor;
            let h = stats.count as f64;
            let y = (1.0 + stats.mean() / scale).clamp(0.0, 1.0);
            let y_index = match variant {
                UcbVariant::Ucb1 => y + (2.0 * ctx.ln_t / h).sqrt(),
                UcbVariant::Moss => {
                    let ratio = ctx.horizon as f64 / (ctx.arm_count as f64 * h);
                    y + (ratio.ln().max(0.0) / h).sqrt()
                }
                UcbVariant::KlUcb => kl_ucb_upper(y, ctx.ln_t / h),
                UcbVariant::Ucb1Tuned => unreachable!(),
            };
            scale * (y_index - 1.0)
        }
    };
    index.min(0.0)
}

/// Bernoulli KL divergence `kl(q, p)`.
pub fn bernoulli_kl(q: f64, p: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(q, p) + term(1.0 - q, 1.0 - p)
}

/// Largest `p ∈ [q, 1]` with `kl(q, p) ≤ budget`.
///
/// Newton's method started to the right of the root; `kl(q, ·)` is convex
/// and increasing on `[q, 1)`, so iterates decrease monotonically onto it.
pub fn kl_ucb_upper(q: f64, budget: f64) -> f64 {
    if budget <= 0.0 || q >= 1.0 {
        return q.min(1.0);
    }
    const CEIL: f64 = 1.0 - 1e-15;
    // Pinsker: kl(q, p) ≥ 2 (p − q)², so the root is at most q + sqrt(budget / 2)
    let mut p = (q + (budget / 2.0).sqrt()).min(CEIL);
    if bernoulli_kl(q, p) <= budget {
        return p;
    }
    for _ in 0..100 {
        let g = bernoulli_kl(q, p) - budget;
        if g <= 1e-15 {
            break;
        }
        let slope = (p - q) / (p * (1.0 - p));
        let next = p - g / slope;
        if !(next < p) || next <= q {
            break;
        }
        p = next;
    }
    p
}

/// Outcome of the ε-greedy coin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Explore,
    Exploit,
}

/// Explore with probability `ε`. Consumes exactly one uniform.
pub fn epsilon_gate(epsilon: f64, rng: &mut ChaCha8Rng) -> Gate {
    let u: f64 = rng.random();
    if u < epsilon {
        Gate::Explore
    } else {
        Gate::Exploit
    }
}

/// Statistics of every arm of a topology, in flat arm order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmTable {
    arms: Vec<ArmStats>,
}

impl ArmTable {
    pub fn new(arm_count: usize) -> Self {
        Self {
            arms: vec![ArmStats::default(); arm_count],
        }
    }

    pub fn get(&self, arm: usize) -> &ArmStats {
        &self.arms[arm]
    }

    pub fn as_slice(&self) -> &[ArmStats] {
        &self.arms
    }

    pub fn record(&mut self, arm: usize, reward: f64) -> Result<(), BanditError> {
        record_reward(&mut self.arms[arm], reward)
    }

    /// Recomputes `x̃` for every arm, storing each in `last_estimate`.
    pub fn refresh_estimates(
        &mut self,
        variant: UcbVariant,
        ctx_for_arm: impl Fn(usize) -> IndexContext,
        out: &mut [f64],
    ) {
        for (n, (stats, o)) in self.arms.iter_mut().zip(out.iter_mut()).enumerate() {
            let x = match variant {
                UcbVariant::Ucb1Tuned => {
                    let ctx = ctx_for_arm(n);
                    ucb1_tuned_estimate(stats, ctx.ln_t, ctx.beta)
                }
                v => variant_estimate(stats, v, &ctx_for_arm(n)),
            };
            stats.last_estimate = x;
            *o = x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn stats_from(rewards: &[f64]) -> ArmStats {
        let mut s = ArmStats::default();
        for &r in rewards {
            record_reward(&mut s, r).unwrap();
        }
        s
    }

    fn ctx(ln_t: f64) -> IndexContext {
        IndexContext {
            ln_t,
            beta: 2.0,
            horizon: 1000,
            arm_count: 4,
            reward_floor: -4.0,
        }
    }

    #[test]
    fn record_examples() {
        let s = stats_from(&[-2.0]);
        assert_eq!((s.count, s.mean()), (1, -2.0));
        let s = stats_from(&[-1.0, -3.0]);
        assert_eq!((s.count, s.mean(), s.reward_sq_sum), (2, -2.0, 10.0));
        assert_eq!(ArmStats::default().mean(), 0.0);
        let mut s = ArmStats::default();
        assert_eq!(record_reward(&mut s, 0.5), Err(BanditError::PositiveReward(0.5)));
        assert_eq!(record_reward(&mut s, f64::NAN), Err(BanditError::NonFiniteReward));
        assert_eq!(s.count, 0);
    }

    #[test]
    fn ucb1_tuned_examples() {
        assert_eq!(ucb1_tuned_estimate(&ArmStats::default(), 3.0, 2.0), 0.0);
        let s = stats_from(&[-1.0, -3.0]);
        // V = (5 − 4) + sqrt(2·2/2) = 1 + √2 → min{1/4, V} = 1/4
        // u = −2 + 2·sqrt(2/2 · 1/4) = −1
        assert!((ucb1_tuned_estimate(&s, 2.0, 2.0) + 1.0).abs() < 1e-15);
        // β = 10 → u = −2 + 10·0.5 = 3 → clamp
        assert!((ucb1_tuned_index(&s, 2.0, 10.0) - 3.0).abs() < 1e-15);
        assert_eq!(ucb1_tuned_estimate(&s, 2.0, 10.0), 0.0);
    }

    #[test]
    fn variant_examples() {
        for v in [
            UcbVariant::Ucb1Tuned,
            UcbVariant::Ucb1,
            UcbVariant::Moss,
            UcbVariant::KlUcb,
        ] {
            assert_eq!(variant_estimate(&ArmStats::default(), v, &ctx(2.0)), 0.0);
        }
        // x̂ = −2, h = 4, c = 4: −2 + 4·sqrt(2·2/4) = 2 → 0
        let s = stats_from(&[-2.0; 4]);
        let y_space = 0.5 + (2.0f64 * 2.0 / 4.0).sqrt();
        assert_eq!(4.0 * (y_space - 1.0), 2.0);
        assert_eq!(variant_estimate(&s, UcbVariant::Ucb1, &ctx(2.0)), 0.0);
        let c = ctx(0.01);
        let expect = -2.0 + 4.0 * (2.0f64 * 0.01 / 4.0).sqrt();
        assert!((variant_estimate(&s, UcbVariant::Ucb1, &c) - expect).abs() < 1e-12);
    }

    #[test]
    fn moss_uses_horizon_over_arms() {
        let s = stats_from(&[-3.0; 10]);
        let c = ctx(5.0);
        // y = 0.25; ln(1000 / 40) / 10
        let expect = 4.0 * (0.25 + ((1000.0f64 / 40.0).ln() / 10.0).sqrt() - 1.0);
        assert!((variant_estimate(&s, UcbVariant::Moss, &c) - expect).abs() < 1e-12);
        // exploration vanishes once h ≥ T/K
        let s = stats_from(&vec![-3.0; 300]);
        assert_eq!(variant_estimate(&s, UcbVariant::Moss, &c), -3.0);
    }

    #[test]
    fn kl_ucb_edges() {
        assert_eq!(kl_ucb_upper(0.3, 0.0), 0.3);
        assert_eq!(kl_ucb_upper(1.0, 2.0), 1.0);
        let p = kl_ucb_upper(0.0, 0.5);
        assert!((bernoulli_kl(0.0, p) - 0.5).abs() < 1e-9);
        assert!(kl_ucb_upper(0.999, 100.0) <= 1.0);
    }

    #[test]
    fn variant_parse() {
        assert_eq!(UcbVariant::parse("moss").unwrap(), UcbVariant::Moss);
        assert_eq!(UcbVariant::parse("klucb").unwrap(), UcbVariant::KlUcb);
        assert!(matches!(
            UcbVariant::parse("thompson"),
            Err(BanditError::UnknownVariant(_))
        ));
    }

    #[test]
    fn gate_degenerate_and_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!((0..1000).all(|_| epsilon_gate(0.0, &mut rng) == Gate::Exploit));
        assert!((0..1000).all(|_| epsilon_gate(1.0, &mut rng) == Gate::Explore));
        let n = 100_000;
        let explored = (0..n).filter(|_| epsilon_gate(0.3, &mut rng) == Gate::Explore).count();
        let freq = explored as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "{freq}");
    }

    #[test]
    fn deterministic_arm_converges_to_its_reward() {
        let s = stats_from(&vec![-1.5; 10_000]);
        let ln_t = log_term(10_000);
        let x = ucb1_tuned_estimate(&s, ln_t, 2.0);
        // exploration term is at most β·sqrt(ln_t / 4h)
        assert!((x + 1.5).abs() <= 2.0 * (ln_t / 40_000.0).sqrt() + 1e-12);
    }

    proptest! {
        #[test]
        fn index_grows_with_beta_and_shrinks_with_plays(
            reward in -5.0f64..0.0,
            spread in 0.0f64..2.0,
            h in 1u64..500,
            ln_t in 0.0f64..15.0,
            b1 in 0.0f64..10.0,
            b2 in 0.0f64..10.0,
        ) {
            // keep mean and spread fixed while varying h
            let make = |h: u64| ArmStats {
                count: h,
                reward_sum: reward * h as f64,
                reward_sq_sum: (reward * reward + spread) * h as f64,
                last_estimate: 0.0,
            };
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(ucb1_tuned_index(&make(h), ln_t, lo) <= ucb1_tuned_index(&make(h), ln_t, hi) + 1e-12);
            prop_assert!(ucb1_tuned_index(&make(h + 1), ln_t, hi) <= ucb1_tuned_index(&make(h), ln_t, hi) + 1e-12);
            prop_assert!(ucb1_tuned_estimate(&make(h), ln_t, hi) <= 0.0);
        }

        #[test]
        fn replayed_streams_give_identical_indices(rewards in prop::collection::vec(-4.0f64..=0.0, 1..50), ln_t in 0.0f64..10.0) {
            let a = stats_from(&rewards);
            let b = stats_from(&rewards);
            for v in [UcbVariant::Ucb1Tuned, UcbVariant::Ucb1, UcbVariant::Moss, UcbVariant::KlUcb] {
                let c = ctx(ln_t);
                let x = variant_estimate(&a, v, &c);
                prop_assert_eq!(x.to_bits(), variant_estimate(&b, v, &c).to_bits());
                prop_assert!(x <= 0.0);
            }
        }
    }
}
