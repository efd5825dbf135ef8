//! Statistical checks of the environment samplers.

use lasac::environment::{
    advance_queues, slot_cost, ArrivalModel, ArrivalProcess, CostModel, Departures, Environment, RealizedCosts,
    ServiceJitter, ServiceModel,
};
use lasac::harness::reference_scenario;
use lasac::model::{Decision, QueueState, SwitchLinks, Target, Topology};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn topology(n: usize, c: usize, p: f64) -> Topology {
    Topology::new(
        c,
        (0..n)
            .map(|_| SwitchLinks {
                candidates: (0..c).collect(),
                access_prob: vec![p; c],
            })
            .collect(),
    )
    .unwrap()
}

fn flat_costs(t: &Topology, mean: f64, half_width: f64, bound: f64) -> CostModel {
    CostModel {
        local_mean: vec![mean; t.switch_count()],
        upload_mean: (0..t.switch_count())
            .map(|i| vec![mean; t.candidates(i).len()])
            .collect(),
        w_max: bound,
        m_max: bound,
        half_width,
    }
}

fn services(t: &Topology, mu: u32) -> ServiceModel {
    ServiceModel {
        switch_mean: vec![mu as f64; t.switch_count()],
        controller_mean: vec![mu as f64; t.controller_count()],
        mu_max: mu,
        jitter: ServiceJitter::Deterministic,
    }
}

/// Mean of Poisson(rate) conditioned on at most `cap`, by direct summation.
fn truncated_poisson_mean(rate: f64, cap: u32) -> f64 {
    let mut term = (-rate).exp();
    let (mut mass, mut first) = (0.0, 0.0);
    for k in 0..=cap {
        if k > 0 {
            term *= rate / k as f64;
        }
        mass += term;
        first += k as f64 * term;
    }
    first / mass
}

fn empirical_arrival_mean(model: &ArrivalModel, slots: usize, seed: u64) -> f64 {
    let t = topology(model.per_switch.len(), 1, 1.0);
    let costs = flat_costs(&t, 1.0, 0.0, 1.0);
    let mut env = Environment::new(&t, &costs, model, &services(&t, 1), ChaCha8Rng::seed_from_u64(seed));
    let mut draw = env.blank_draw();
    let mut total = 0u64;
    for _ in 0..slots {
        env.next_slot(&mut draw);
        assert!(draw.arrivals.iter().all(|&a| a <= model.lambda_max));
        total += draw.arrivals.iter().map(|&a| a as u64).sum::<u64>();
    }
    total as f64 / (slots * model.per_switch.len()) as f64
}

#[test]
fn availability_frequencies_match_link_probabilities() {
    let t = Topology::new(
        3,
        vec![
            SwitchLinks {
                candidates: vec![0, 1, 2],
                access_prob: vec![0.7, 0.2, 0.95],
            },
            SwitchLinks {
                candidates: vec![1],
                access_prob: vec![0.5],
            },
        ],
    )
    .unwrap();
    let costs = flat_costs(&t, 1.0, 0.0, 1.0);
    let arrivals = ArrivalModel::uniform(2, 1, ArrivalProcess::Constant { rate: 1 });
    let mut env = Environment::new(&t, &costs, &arrivals, &services(&t, 1), ChaCha8Rng::seed_from_u64(1));
    let mut draw = env.blank_draw();
    let slots = 100_000;
    let mut hits = [[0u32; 3]; 2];
    for _ in 0..slots {
        env.next_slot(&mut draw);
        for (i, row) in hits.iter_mut().enumerate() {
            for (k, h) in row.iter_mut().enumerate().take(t.candidates(i).len()) {
                *h += u32::from(draw.availability.is_accessible_slot(i, k));
            }
        }
    }
    for i in 0..2 {
        for (k, &p) in t.links(i).access_prob.iter().enumerate() {
            let freq = hits[i][k] as f64 / slots as f64;
            assert!((freq - p).abs() <= 0.01, "switch {i} link {k}: {freq} vs {p}");
        }
    }
}

#[test]
fn truncated_poisson_empirical_mean() {
    let model = ArrivalModel::uniform(1, 6, ArrivalProcess::Poisson { rate: 1.5 });
    let oracle = truncated_poisson_mean(1.5, 6);
    assert!((model.mean_rates()[0] - oracle).abs() < 1e-12);
    let got = empirical_arrival_mean(&model, 1_000_000, 2);
    assert!((got - oracle).abs() <= 0.05, "{got} vs {oracle}");
}

#[test]
fn truncation_matters_when_the_cap_is_tight() {
    let model = ArrivalModel::uniform(1, 2, ArrivalProcess::Poisson { rate: 3.0 });
    let oracle = truncated_poisson_mean(3.0, 2);
    assert!(oracle < 2.0 && oracle > 1.0);
    let got = empirical_arrival_mean(&model, 200_000, 3);
    assert!((got - oracle).abs() <= 0.02, "{got} vs {oracle}");
}

#[test]
fn bursty_mean_is_the_stationary_mixture() {
    let (low, high, up, down) = (1.0, 6.0, 0.1, 0.3);
    let model = ArrivalModel::uniform(
        2,
        16,
        ArrivalProcess::Bursty {
            low_rate: low,
            high_rate: high,
            p_up: up,
            p_down: down,
        },
    );
    let share = up / (up + down);
    let oracle = (1.0 - share) * truncated_poisson_mean(low, 16) + share * truncated_poisson_mean(high, 16);
    assert!((model.mean_rates()[0] - oracle).abs() < 1e-12);
    let got = empirical_arrival_mean(&model, 1_000_000, 4);
    assert!((got - oracle).abs() <= 0.05, "{got} vs {oracle}");
}

fn empirical_cost_mean(costs: &CostModel, t: &Topology, slots: usize) -> Vec<f64> {
    let arrivals = ArrivalModel::uniform(t.switch_count(), 1, ArrivalProcess::Constant { rate: 1 });
    let mut env = Environment::new(t, costs, &arrivals, &services(t, 1), ChaCha8Rng::seed_from_u64(5));
    let mut draw = env.blank_draw();
    let mut sums = vec![0.0; t.arm_count()];
    for _ in 0..slots {
        env.next_slot(&mut draw);
        for (s, &c) in sums.iter_mut().zip(&draw.arm_costs) {
            *s += c;
        }
    }
    sums.into_iter().map(|s| s / slots as f64).collect()
}

#[test]
fn uniform_cost_window_has_the_nominal_mean() {
    let t = topology(2, 2, 1.0);
    let costs = flat_costs(&t, 1.5, 1.5, 4.0);
    for mean in empirical_cost_mean(&costs, &t, 100_000) {
        assert!((mean - 1.5).abs() <= 0.02 * 1.5, "{mean}");
    }
}

#[test]
fn clipped_cost_window_has_the_window_midpoint_mean() {
    let t = topology(1, 1, 1.0);
    // [3 − 2, 3 + 2] clipped to the bound 4
    let costs = flat_costs(&t, 3.0, 2.0, 4.0);
    assert_eq!(costs.expected_costs(), vec![2.5, 2.5]);
    for mean in empirical_cost_mean(&costs, &t, 100_000) {
        assert!((mean - 2.5).abs() <= 0.02 * 2.5, "{mean}");
    }
}

#[test]
fn environment_stream_is_reproducible() {
    let s = reference_scenario(3);
    let make = || {
        Environment::new(
            &s.topology,
            &s.costs,
            &s.arrivals,
            &s.services,
            ChaCha8Rng::seed_from_u64(77),
        )
    };
    let (mut a, mut b) = (make(), make());
    let (mut da, mut db) = (a.blank_draw(), b.blank_draw());
    for _ in 0..2_000 {
        a.next_slot(&mut da);
        b.next_slot(&mut db);
        assert_eq!(da.availability, db.availability);
        assert_eq!(da.arrivals, db.arrivals);
        assert_eq!(da.services, db.services);
        assert_eq!(da.arm_costs, db.arm_costs);
    }
}

fn random_decision(t: &Topology, rng: &mut ChaCha8Rng) -> Decision {
    Decision::from_targets(
        (0..t.switch_count())
            .map(|i| {
                let c = t.candidates(i);
                match rng.random_range(0..=c.len()) {
                    0 => Target::Local,
                    k => Target::Controller(c[k - 1]),
                }
            })
            .collect(),
    )
}

#[test]
fn requests_are_conserved() {
    let s = reference_scenario(5);
    let t = &s.topology;
    let mut services = s.services.clone();
    services.jitter = ServiceJitter::Binomial;
    let mut env = Environment::new(t, &s.costs, &s.arrivals, &services, ChaCha8Rng::seed_from_u64(8));
    let mut draw = env.blank_draw();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut queues = QueueState::empty(t);
    let mut departures = Departures::default();
    let (mut arrived, mut served) = (0u64, 0u64);
    for _ in 0..20_000 {
        env.next_slot(&mut draw);
        let d = random_decision(t, &mut rng);
        advance_queues(&mut queues, &d, &draw.arrivals, &draw.services, &mut departures);
        arrived += draw.arrivals.iter().map(|&a| a as u64).sum::<u64>();
        served += departures.switch.iter().sum::<u64>() + departures.controller.iter().sum::<u64>();
        assert_eq!(arrived, served + queues.total());
    }
}

proptest! {
    #[test]
    fn slot_costs_are_bounded(seed in any::<u64>(), slots in 1usize..50) {
        let s = reference_scenario(seed % 16);
        let t = &s.topology;
        let mut env = Environment::new(t, &s.costs, &s.arrivals, &s.services, ChaCha8Rng::seed_from_u64(seed));
        let mut draw = env.blank_draw();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let cap = t.switch_count() as f64 * s.lambda_max() * s.costs.max_cost();
        for _ in 0..slots {
            env.next_slot(&mut draw);
            let d = random_decision(t, &mut rng);
            let realized = RealizedCosts::reveal(t, &d, &draw.arm_costs);
            let cost = slot_cost(&d, &draw.arrivals, &realized);
            prop_assert!((0.0..=cap).contains(&cost));
            for &c in &draw.arm_costs {
                prop_assert!((0.0..=s.costs.max_cost()).contains(&c));
            }
        }
    }
}

#[test]
fn reference_availability_frequencies() {
    let s = reference_scenario(7);
    let t = &s.topology;
    let mut env = Environment::new(t, &s.costs, &s.arrivals, &s.services, ChaCha8Rng::seed_from_u64(12));
    let mut draw = env.blank_draw();
    let slots = 100_000;
    let mut hits = vec![vec![0u32; 3]; t.switch_count()];
    for _ in 0..slots {
        env.next_slot(&mut draw);
        for (i, row) in hits.iter_mut().enumerate() {
            for (k, h) in row.iter_mut().enumerate() {
                *h += u32::from(draw.availability.is_accessible_slot(i, k));
            }
        }
    }
    for (i, row) in hits.iter().enumerate() {
        assert_eq!(t.candidates(i).len(), 3);
        for (k, &h) in row.iter().enumerate() {
            let p = t.links(i).access_prob[k];
            assert!((0.8..=1.0).contains(&p));
            assert!((h as f64 / slots as f64 - p).abs() <= 0.01);
        }
    }
}
