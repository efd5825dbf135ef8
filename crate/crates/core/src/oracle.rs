//! Optimal stationary reward rate `R*` under full knowledge of the means.
//!
//! A stationary randomized policy picks super arm `f` with probability
//! `q_Z(f)` whenever the availability pattern is `Z`. `R*` maximizes the
//! expected per-slot compound reward over such policies subject to every
//! node's mean load staying within its mean service rate.
//!
//! Link availability is independent across switches and both the objective
//! and the load constraints are sums of per-switch terms, so the program
//! only depends on the per-switch marginals `r_i(k | Z_i)`.
//! [`optimal_reward_rate`] solves that reduced program; it has
//! `Σ_i Σ_{Z_i} (1 + |Z_i|)` variables and gives the same optimum as the
//! fully enumerated program solved by [`optimal_reward_rate_enumerated`].

use thiserror::Error;

use crate::lp::{LinearProgram, LpError, Relation};
use crate::model::{Target, Topology};

/// Variable budget of the dense solve.
pub const MAX_LP_VARIABLES: usize = 4096;
/// Enumerated form: at most this many switches.
pub const MAX_ENUM_SWITCHES: usize = 4;
/// Enumerated form: at most this many potential links in total.
pub const MAX_ENUM_LINKS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("no stationary policy keeps every queue stable")]
    Infeasible,
    #[error("instance too large: {what} = {size} exceeds {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("{0}")]
    Input(String),
    #[error("solver failed: {0}")]
    Solver(LpError),
}

impl From<LpError> for OracleError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Infeasible => OracleError::Infeasible,
            other => OracleError::Solver(other),
        }
    }
}

/// An optimal stationary policy summarized by its long-run rates.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// `R*`, in reward per slot (not scaled by arrivals).
    pub r_star: f64,
    /// Probability that each arm is played in a slot, flat arm order.
    pub play_rate: Vec<f64>,
    /// Mean arrivals routed to each node, switches then controllers.
    pub node_load: Vec<f64>,
}

/// Largest uniform slack `ε` with some stationary policy loading every
/// node `k` at most `μ̄_k − ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackSolution {
    pub epsilon: f64,
    pub node_load: Vec<f64>,
}

/// Means of an instance, all in flat or node order.
#[derive(Debug, Clone, Copy)]
pub struct OracleInput<'a> {
    pub topology: &'a Topology,
    /// `x̄_{i,k}` in flat arm order.
    pub mean_rewards: &'a [f64],
    /// `λ̄_i`.
    pub arrival_means: &'a [f64],
    /// `μ̄^S_i` followed by `μ̄^C_j`.
    pub service_means: &'a [f64],
}

impl OracleInput<'_> {
    fn validate(&self) -> Result<(), OracleError> {
        let t = self.topology;
        let check = |what: &str, got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(OracleError::Input(format!(
                    "{what} has {got} entries, expected {expected}"
                )))
            }
        };
        check("mean_rewards", self.mean_rewards.len(), t.arm_count())?;
        check("arrival_means", self.arrival_means.len(), t.switch_count())?;
        check(
            "service_means",
            self.service_means.len(),
            t.switch_count() + t.controller_count(),
        )?;
        if self.mean_rewards.iter().any(|x| !x.is_finite()) {
            return Err(OracleError::Input("mean rewards must be finite".into()));
        }
        if self
            .arrival_means
            .iter()
            .chain(self.service_means)
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(OracleError::Input("rates must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn node_of(&self, arm: usize) -> usize {
        let id = self.topology.arm_id(arm);
        match id.target {
            Target::Local => id.switch,
            Target::Controller(j) => self.topology.switch_count() + j,
        }
    }
}

/// One switch's availability pattern `Z_i` with its probability and the
/// flat arms playable under it.
#[derive(Debug, Clone)]
struct Pattern {
    prob: f64,
    arms: Vec<usize>,
}

fn switch_patterns(topology: &Topology, switch: usize) -> Vec<Pattern> {
    let probs = &topology.links(switch).access_prob;
    let base = topology.arm_offset(switch);
    (0u32..1 << probs.len())
        .filter_map(|mask| {
            let prob: f64 = probs
                .iter()
                .enumerate()
                .map(|(s, &p)| if mask >> s & 1 == 1 { p } else { 1.0 - p })
                .product();
            (prob > 0.0).then(|| Pattern {
                prob,
                arms: std::iter::once(base)
                    .chain((0..probs.len()).filter(|s| mask >> s & 1 == 1).map(|s| base + 1 + s))
                    .collect(),
            })
        })
        .collect()
}

/// `q` column: play `arms` together in block `block`, which occurs with `prob`.
struct Column {
    block: usize,
    prob: f64,
    arms: Vec<usize>,
}

struct Program {
    lp: LinearProgram,
    columns: Vec<Column>,
}

/// Builds the rate program. With `slack`, an extra last variable `s` is
/// maximized instead of the reward and subtracted from every capacity.
fn build(input: &OracleInput<'_>, columns: Vec<Column>, blocks: usize, slack: bool) -> Result<Program, OracleError> {
    if columns.len() > MAX_LP_VARIABLES {
        return Err(OracleError::TooLarge {
            what: "LP variables",
            size: columns.len(),
            limit: MAX_LP_VARIABLES,
        });
    }
    let n = columns.len() + usize::from(slack);
    let objective = if slack {
        let mut c = vec![0.0; n];
        c[n - 1] = 1.0;
        c
    } else {
        columns
            .iter()
            .map(|c| c.prob * c.arms.iter().map(|&a| input.mean_rewards[a]).sum::<f64>())
            .collect()
    };
    let mut lp = LinearProgram::maximize(objective);
    let mut rows = vec![vec![0.0; n]; blocks];
    for (v, c) in columns.iter().enumerate() {
        rows[c.block][v] = 1.0;
    }
    for row in rows {
        lp.constrain(row, Relation::Eq, 1.0)?;
    }
    let nodes = input.service_means.len();
    let mut load = vec![vec![0.0; n]; nodes];
    for (v, c) in columns.iter().enumerate() {
        for &a in &c.arms {
            let i = input.topology.arm_id(a).switch;
            load[input.node_of(a)][v] += c.prob * input.arrival_means[i];
        }
    }
    for (k, mut row) in load.into_iter().enumerate() {
        if slack {
            row[n - 1] = 1.0;
        }
        lp.constrain(row, Relation::Le, input.service_means[k])?;
    }
    Ok(Program { lp, columns })
}

fn decomposed_columns(topology: &Topology) -> (Vec<Column>, usize) {
    let mut columns = Vec::new();
    let mut block = 0;
    for i in 0..topology.switch_count() {
        for pattern in switch_patterns(topology, i) {
            for &a in &pattern.arms {
                columns.push(Column {
                    block,
                    prob: pattern.prob,
                    arms: vec![a],
                });
            }
            block += 1;
        }
    }
    (columns, block)
}

fn decomposed_size(topology: &Topology) -> usize {
    (0..topology.switch_count())
        .map(|i| {
            let c = topology.candidates(i).len();
            if c >= 20 {
                usize::MAX / 64
            } else {
                (1usize << c) * (2 + c) / 2
            }
        })
        .fold(0usize, |a, b| a.saturating_add(b))
}

fn enumerated_columns(topology: &Topology) -> (Vec<Column>, usize) {
    let per_switch: Vec<Vec<Pattern>> = (0..topology.switch_count())
        .map(|i| switch_patterns(topology, i))
        .collect();
    // joint patterns Z, then super arms f ∈ F(Z), both in odometer order
    let mut columns = Vec::new();
    let mut z = vec![0usize; per_switch.len()];
    let mut block = 0;
    loop {
        let prob: f64 = z.iter().zip(&per_switch).map(|(&p, ps)| ps[p].prob).product();
        let options: Vec<&[usize]> = z.iter().zip(&per_switch).map(|(&p, ps)| &ps[p].arms[..]).collect();
        let mut f = vec![0usize; options.len()];
        loop {
            columns.push(Column {
                block,
                prob,
                arms: f.iter().zip(&options).map(|(&k, o)| o[k]).collect(),
            });
            if !odometer(&mut f, |i| options[i].len()) {
                break;
            }
        }
        block += 1;
        if !odometer(&mut z, |i| per_switch[i].len()) {
            break;
        }
    }
    (columns, block)
}

fn odometer(digits: &mut [usize], base: impl Fn(usize) -> usize) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < base(i) {
            return true;
        }
        digits[i] = 0;
    }
    false
}

fn solve(input: &OracleInput<'_>, columns: Vec<Column>, blocks: usize) -> Result<OracleSolution, OracleError> {
    let program = build(input, columns, blocks, false)?;
    let sol = program.lp.solve()?;
    let mut play_rate = vec![0.0; input.topology.arm_count()];
    let mut node_load = vec![0.0; input.service_means.len()];
    for (c, &x) in program.columns.iter().zip(&sol.x) {
        for &a in &c.arms {
            let i = input.topology.arm_id(a).switch;
            play_rate[a] += c.prob * x;
            node_load[input.node_of(a)] += c.prob * x * input.arrival_means[i];
        }
    }
    Ok(OracleSolution {
        r_star: sol.objective,
        play_rate,
        node_load,
    })
}

/// `R*` through the per-switch program.
pub fn optimal_reward_rate(input: &OracleInput<'_>) -> Result<OracleSolution, OracleError> {
    input.validate()?;
    let size = decomposed_size(input.topology);
    if size > MAX_LP_VARIABLES {
        return Err(OracleError::TooLarge {
            what: "LP variables",
            size,
            limit: MAX_LP_VARIABLES,
        });
    }
    let (columns, blocks) = decomposed_columns(input.topology);
    solve(input, columns, blocks)
}

/// `R*` through the program over every joint pattern `Z` and super arm
/// `f ∈ F(Z)`. Limited to small instances.
pub fn optimal_reward_rate_enumerated(input: &OracleInput<'_>) -> Result<OracleSolution, OracleError> {
    input.validate()?;
    let t = input.topology;
    if t.switch_count() > MAX_ENUM_SWITCHES {
        return Err(OracleError::TooLarge {
            what: "switches",
            size: t.switch_count(),
            limit: MAX_ENUM_SWITCHES,
        });
    }
    let links: usize = (0..t.switch_count()).map(|i| t.candidates(i).len()).sum();
    if links > MAX_ENUM_LINKS {
        return Err(OracleError::TooLarge {
            what: "potential links",
            size: links,
            limit: MAX_ENUM_LINKS,
        });
    }
    let size = (0..t.switch_count())
        .map(|i| {
            let c = t.candidates(i).len();
            (1usize << c) * (2 + c) / 2
        })
        .product::<usize>();
    if size > MAX_LP_VARIABLES {
        return Err(OracleError::TooLarge {
            what: "LP variables",
            size,
            limit: MAX_LP_VARIABLES,
        });
    }
    let (columns, blocks) = enumerated_columns(t);
    solve(input, columns, blocks)
}

/// Largest slack `ε ≥ 0` achievable by a stationary policy. Rewards in
/// `input` are ignored.
pub fn max_stability_slack(input: &OracleInput<'_>) -> Result<SlackSolution, OracleError> {
    input.validate()?;
    let size = decomposed_size(input.topology);
    if size > MAX_LP_VARIABLES {
        return Err(OracleError::TooLarge {
            what: "LP variables",
            size,
            limit: MAX_LP_VARIABLES,
        });
    }
    let (columns, blocks) = decomposed_columns(input.topology);
    let program = build(input, columns, blocks, true)?;
    let sol = program.lp.solve()?;
    let mut node_load = vec![0.0; input.service_means.len()];
    for (c, &x) in program.columns.iter().zip(&sol.x) {
        for &a in &c.arms {
            let i = input.topology.arm_id(a).switch;
            node_load[input.node_of(a)] += c.prob * x * input.arrival_means[i];
        }
    }
    Ok(SlackSolution {
        epsilon: sol.objective,
        node_load,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SwitchLinks;

    fn one_switch(p: f64) -> Topology {
        Topology::new(
            1,
            vec![SwitchLinks {
                candidates: vec![0],
                access_prob: vec![p],
            }],
        )
        .unwrap()
    }

    fn rate(t: &Topology, rewards: &[f64], lambda: &[f64], mu: &[f64]) -> Result<f64, OracleError> {
        let input = OracleInput {
            topology: t,
            mean_rewards: rewards,
            arrival_means: lambda,
            service_means: mu,
        };
        let a = optimal_reward_rate(&input)?.r_star;
        let b = optimal_reward_rate_enumerated(&input)?.r_star;
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        Ok(a)
    }

    #[test]
    fn always_upload_when_cheaper_and_feasible() {
        let t = one_switch(1.0);
        let r = rate(&t, &[-2.0, -1.0], &[1.0], &[2.0, 2.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-9);
    }

    #[test]
    fn mixes_when_upload_capacity_is_short() {
        let t = one_switch(1.0);
        let input = OracleInput {
            topology: &t,
            mean_rewards: &[-2.0, -1.0],
            arrival_means: &[1.0],
            service_means: &[2.0, 0.5],
        };
        let s = optimal_reward_rate(&input).unwrap();
        assert!((s.r_star + 1.5).abs() < 1e-9);
        assert!((s.play_rate[0] - 0.5).abs() < 1e-9);
        assert!((s.play_rate[1] - 0.5).abs() < 1e-9);
        assert!((s.node_load[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_rewards_give_zero() {
        let t = one_switch(0.7);
        assert!(rate(&t, &[0.0, 0.0], &[1.0], &[1.0, 1.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unavailable_link_forces_local_share() {
        // upload only possible 40% of the time
        let t = one_switch(0.4);
        let r = rate(&t, &[-3.0, -1.0], &[1.0], &[5.0, 5.0]).unwrap();
        assert!((r - (0.4 * -1.0 + 0.6 * -3.0)).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_too_large() {
        let t = one_switch(1.0);
        assert_eq!(
            rate(&t, &[-1.0, -1.0], &[3.0], &[1.0, 1.0]),
            Err(OracleError::Infeasible)
        );
        let big = Topology::new(
            2,
            (0..5)
                .map(|_| SwitchLinks {
                    candidates: vec![0, 1],
                    access_prob: vec![0.5, 0.5],
                })
                .collect(),
        )
        .unwrap();
        let rewards = vec![-1.0; big.arm_count()];
        let input = OracleInput {
            topology: &big,
            mean_rewards: &rewards,
            arrival_means: &[1.0; 5],
            service_means: &[1.0; 7],
        };
        assert!(matches!(
            optimal_reward_rate_enumerated(&input),
            Err(OracleError::TooLarge { what: "switches", .. })
        ));
        assert!(optimal_reward_rate(&input).is_ok());
        let bad = OracleInput {
            arrival_means: &[1.0],
            ..input
        };
        assert!(matches!(optimal_reward_rate(&bad), Err(OracleError::Input(_))));
    }

    #[test]
    fn slack_of_simple_instances() {
        let t = one_switch(1.0);
        let input = OracleInput {
            topology: &t,
            mean_rewards: &[0.0, 0.0],
            arrival_means: &[1.0],
            service_means: &[2.0, 2.0],
        };
        // split evenly: load 0.5 on each node, slack 1.5
        let s = max_stability_slack(&input).unwrap();
        assert!((s.epsilon - 1.5).abs() < 1e-9);
        let tight = OracleInput {
            service_means: &[0.5, 0.5],
            ..input
        };
        assert!(max_stability_slack(&tight).unwrap().epsilon.abs() < 1e-9);
        let over = OracleInput {
            service_means: &[0.4, 0.4],
            ..input
        };
        assert_eq!(max_stability_slack(&over), Err(OracleError::Infeasible));
    }
}
