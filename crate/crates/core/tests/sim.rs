use agemdp::model::{ActionDim, BuiltinCost, HoldingCost};
use agemdp::reduction::transition_prob;
use agemdp::sim::{
    discounted_horizon, mc_average, mc_discounted, path_rng, simulate, AverageMcOptions, Event, Simulator, Stop,
};
use agemdp::{ActionDistribution, AgeGrid, AgePolicy, Discretization, TransitionRateModel};

fn constant_policy(m: &TransitionRateModel, a: usize) -> AgePolicy {
    AgePolicy::constant(AgeGrid::uniform(20.0, 200).unwrap(), m.n_states(), ActionDistribution::point(a))
}

#[test]
fn const2_sojourns_pass_kolmogorov_smirnov() {
    let m = TransitionRateModel::const2();
    let p = constant_policy(&m, 0);
    let tr = simulate(&m, &p, 0, Stop::Jumps(10_000), 0.0, 1).unwrap();
    let mut x: Vec<f64> = tr.sojourns[1..].to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x.iter().enumerate().fold(0.0f64, |acc, (k, &v)| {
        let f = -(-v).exp_m1();
        acc.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs())
    });
    assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    let mean = x.iter().sum::<f64>() / n;
    assert!((mean - 1.0).abs() < 0.02);
}

#[test]
fn shock_branching_frequencies_match_the_embedded_chain() {
    let m = TransitionRateModel::shock(2, ActionDim::singleton(1.0), BuiltinCost::default()).unwrap();
    let p = constant_policy(&m, 0);
    let d = Discretization::new(&m, AgeGrid::for_model(&m, 0.01).unwrap());
    let p_hat = transition_prob(&d, 0, &vec![ActionDistribution::point(0); d.grid().len()]).unwrap();
    let sim = Simulator::new(&m, &p).unwrap();
    let (mut from0, mut to1) = (0u64, 0u64);
    sim.run(0, Stop::Jumps(300_000), 0.0, &mut path_rng(5, 0), |e| {
        if let Event::Jump { from: 0, to, .. } = *e {
            from0 += 1;
            to1 += (to == 1) as u64;
        }
    });
    assert!(from0 >= 100_000);
    let freq = to1 as f64 / from0 as f64;
    let se = (p_hat[0].1 * (1.0 - p_hat[0].1) / from0 as f64).sqrt();
    assert!((freq - p_hat[0].1).abs() <= 3.0 * se, "freq {freq} vs {}", p_hat[0].1);
    assert!((freq - 0.596).abs() <= 0.005);
}

#[test]
fn candidate_acceptance_rate_is_rate_over_majorant() {
    let m = TransitionRateModel::shock(2, ActionDim::new(1.0, 2.0, 2), BuiltinCost::default()).unwrap();
    assert_eq!(m.bounds().max_rate, 2.0);
    let p = constant_policy(&m, 0);
    let sim = Simulator::new(&m, &p).unwrap();
    let (mut candidates, mut accepted) = (0u64, 0u64);
    sim.run(0, Stop::Jumps(50_000), 0.0, &mut path_rng(9, 0), |e| {
        if let Event::Candidate { accepted: a, .. } = *e {
            candidates += 1;
            accepted += a as u64;
        }
    });
    let rate = accepted as f64 / candidates as f64;
    let se = (0.25 / candidates as f64).sqrt();
    assert!((rate - 0.5).abs() <= 3.0 * se, "acceptance {rate}");
}

#[test]
fn const2_discounted_monte_carlo() {
    let m = TransitionRateModel::const2();
    let p = constant_policy(&m, 0);
    let h = discounted_horizon(m.bounds().max_cost, 1.0, 1e-3);
    let e0 = mc_discounted(&m, &p, 1.0, 0, 100_000, h, 42).unwrap();
    assert!(e0.truncation_bound <= 1e-3 + 1e-15);
    assert!((e0.mean - 1.0 / 3.0).abs() <= 3.0 * e0.se + e0.truncation_bound, "{e0:?}");
    let e1 = mc_discounted(&m, &p, 1.0, 1, 100_000, h, 42).unwrap();
    assert!(e1.mean > e0.mean);
    assert!((e1.mean - 2.0 / 3.0).abs() <= 3.0 * e1.se + e1.truncation_bound, "{e1:?}");
}

#[test]
fn const2_average_monte_carlo() {
    let m = TransitionRateModel::const2();
    let p = constant_policy(&m, 0);
    let opts = AverageMcOptions { start: 0, jumps_per_replica: 20_000, replicas: 20, reference: Some(0) };
    let est = mc_average(&m, &p, &opts, 3).unwrap();
    assert!((est.ratio.mean - 0.5).abs() <= 3.0 * est.ratio.se, "{:?}", est.ratio);
    let cycle = est.cycle.unwrap();
    assert!((cycle.mean - 0.5).abs() <= 3.0 * cycle.se, "{cycle:?}");
    assert!(cycle.n > 100_000);
}

#[test]
fn zero_cost_average_is_zero() {
    let m = TransitionRateModel::shock_modified(4, ActionDim::singleton(1.0), BuiltinCost::default()).unwrap();
    let p = constant_policy(&m, 0);
    let opts = AverageMcOptions { start: 0, jumps_per_replica: 1000, replicas: 4, reference: Some(4) };
    let est = mc_average(&m, &p, &opts, 1).unwrap();
    assert_eq!(est.ratio.mean, 0.0);
    assert_eq!(est.cycle.unwrap().mean, 0.0);
}

#[test]
fn cycle_estimator_needs_reachability() {
    let m = TransitionRateModel::shock(2, ActionDim::singleton(1.0), BuiltinCost::default()).unwrap();
    let p = constant_policy(&m, 0);
    let opts = AverageMcOptions { start: 0, jumps_per_replica: 100, replicas: 2, reference: Some(0) };
    assert!(matches!(mc_average(&m, &p, &opts, 1), Err(agemdp::Error::A6Missing { reference: 0, .. })));
}

#[test]
fn relaxed_policy_matches_mixture_rates() {
    // Mixing mu = 1 and mu = 2 equally gives total rate 1.5 in every state.
    let cost = BuiltinCost { holding: HoldingCost::Linear { coef: 1.0 }, ..Default::default() };
    let m = TransitionRateModel::shock(2, ActionDim::new(1.0, 2.0, 2), cost).unwrap();
    let half = ActionDistribution::new([(0, 0.5), (1, 0.5)]).unwrap();
    let p = AgePolicy::constant(AgeGrid::uniform(5.0, 5).unwrap(), 3, half);
    let tr = simulate(&m, &p, 0, Stop::Jumps(40_000), 0.0, 77).unwrap();
    let n = tr.sojourns.len() as f64 - 1.0;
    let mean = tr.sojourns[1..].iter().sum::<f64>() / n;
    let se = (1.0 / 1.5) / n.sqrt();
    assert!((mean - 1.0 / 1.5).abs() <= 3.0 * se, "mean sojourn {mean}");
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let cost = BuiltinCost { holding: HoldingCost::AgeSaturating { coef: 1.0, cap: 1.0 }, ..Default::default() };
    let m = TransitionRateModel::shock(2, ActionDim::new(1.0, 2.0, 3), cost).unwrap();
    let half = ActionDistribution::new([(0, 0.5), (2, 0.5)]).unwrap();
    let p = AgePolicy::constant(AgeGrid::uniform(5.0, 10).unwrap(), 3, half);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let d = mc_discounted(&m, &p, 0.5, 0, 2000, 20.0, 99).unwrap();
            let opts = AverageMcOptions { start: 0, jumps_per_replica: 500, replicas: 8, reference: None };
            (d, mc_average(&m, &p, &opts, 99).unwrap())
        })
    };
    assert_eq!(run(1), run(4));
}
