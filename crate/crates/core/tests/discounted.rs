mod common;

use agemdp::discounted::{
    brute_force_value, compare_age_information, inner_age_sweep, policy_value, value_iteration, Sweeper, ViOptions,
};
use agemdp::model::{ActionDim, BuiltinCost, HoldingCost};
use agemdp::{ActionDistribution, AgeGrid, AgePolicy, DecisionCells, Discretization, TransitionRateModel};
use approx::assert_abs_diff_eq;
use common::{table_params, TableParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn const2() -> Discretization {
    let m = TransitionRateModel::const2();
    Discretization::new(&m, AgeGrid::uniform(30.0, 30_000).unwrap())
}

/// Optimal CTMDP values by enumerating stationary policies and solving
/// `(alpha I - Q_u) V = c_u` for each.
fn ctmdp_oracle(p: &TableParams, alpha: f64) -> Vec<f64> {
    let n = p.states;
    let mut best = vec![f64::INFINITY; n];
    for code in 0..p.actions.pow(n as u32) {
        let u: Vec<usize> = (0..n).map(|i| code / p.actions.pow(i as u32) % p.actions).collect();
        let mut a = DMatrix::zeros(n, n);
        let mut c = DVector::zeros(n);
        for i in 0..n {
            a[(i, i)] = alpha;
            c[i] = p.costs[i][u[i]][0];
            for j in 0..n {
                if i != j {
                    let r = p.rates[i][j][u[i]][0];
                    a[(i, i)] += r;
                    a[(i, j)] -= r;
                }
            }
        }
        let v = a.lu().solve(&c).unwrap();
        for i in 0..n {
            best[i] = best[i].min(v[i]);
        }
    }
    best
}

#[test]
fn const2_closed_form() {
    let d = const2();
    let s = value_iteration(&d, 1.0, &ViOptions { tol: 1e-9, ..Default::default() }).unwrap();
    assert_abs_diff_eq!(s.values[0], 1.0 / 3.0, epsilon = 1e-5);
    assert_abs_diff_eq!(s.values[1], 2.0 / 3.0, epsilon = 1e-5);
    assert!(s.history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    let j = policy_value(&d, &s.policy, 1.0).unwrap();
    assert_abs_diff_eq!(j[0], 1.0 / 3.0, epsilon = 1e-8);
    assert_abs_diff_eq!(j[1], 2.0 / 3.0, epsilon = 1e-8);
}

#[test]
fn sweep_examples() {
    let d = const2();
    assert_abs_diff_eq!(inner_age_sweep(&d, 1, &[0.0, 0.0], 1.0, 0.0).unwrap().value, 0.5, epsilon = 1e-4);
    let q = inner_age_sweep(&d, 1, &[1.0 / 3.0, 2.0 / 3.0], 1.0, 0.0).unwrap();
    assert_abs_diff_eq!(q.value, 2.0 / 3.0, epsilon = 1e-4);
    assert_eq!(q.phi[0], q.value);
    let zero = TransitionRateModel::shock(2, ActionDim::new(1.0, 2.0, 2), BuiltinCost::default()).unwrap();
    let dz = Discretization::new(&zero, AgeGrid::for_model(&zero, 0.05).unwrap());
    let t = inner_age_sweep(&dz, 0, &[0.0; 3], 0.7, 0.0).unwrap();
    assert!(t.phi.iter().all(|&x| x == 0.0));
}

#[test]
fn bellman_examples() {
    let d = const2();
    let s = Sweeper::new(&d, 1.0).unwrap();
    let cells = DecisionCells::every_cell(d.grid());
    let tw = s.bellman(&[0.0, 0.0], 0.0, &cells).unwrap();
    assert_abs_diff_eq!(tw[0], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(tw[1], 0.5, epsilon = 1e-6);
    let tw1 = s.bellman(&[1.0, 1.0], 0.0, &cells).unwrap();
    for i in 0..2 {
        assert_abs_diff_eq!(tw1[i] - tw[i], 0.5, epsilon = 1e-9);
    }
}

#[test]
fn singleton_shock_value_is_its_policy_value() {
    let cost = BuiltinCost { holding: HoldingCost::AgeSaturating { coef: 1.0, cap: 1.0 }, ..Default::default() };
    let m = TransitionRateModel::shock(2, ActionDim::singleton(1.0), cost).unwrap();
    let d = Discretization::new(&m, AgeGrid::for_model(&m, 0.01).unwrap());
    let s = value_iteration(&d, 1.0, &ViOptions { tol: 1e-9, ..Default::default() }).unwrap();
    let only = AgePolicy::constant(d.grid().clone(), 3, ActionDistribution::point(0));
    let j = policy_value(&d, &only, 1.0).unwrap();
    for i in 0..3 {
        assert_abs_diff_eq!(s.values[i], j[i], epsilon = 1e-6);
    }
}

#[test]
fn indistinguishable_actions_give_policy_independent_values() {
    let m = TransitionRateModel::const2_with_actions(2);
    let d = Discretization::new(&m, AgeGrid::uniform(30.0, 600).unwrap());
    let a = AgePolicy::constant(d.grid().clone(), 2, ActionDistribution::point(0));
    let mixed: Vec<Vec<usize>> = (0..2).map(|i| (0..d.grid().len()).map(|k| (i + k) % 2).collect()).collect();
    let b = AgePolicy::deterministic(d.grid().clone(), mixed).unwrap();
    let (ja, jb) = (policy_value(&d, &a, 1.0).unwrap(), policy_value(&d, &b, 1.0).unwrap());
    assert_abs_diff_eq!(ja[0], jb[0], epsilon = 1e-12);
    assert_abs_diff_eq!(ja[1], jb[1], epsilon = 1e-12);
}

#[test]
fn brute_force_examples() {
    let m = TransitionRateModel::const2();
    let d = Discretization::new(&m, AgeGrid::uniform(30.0, 3000).unwrap());
    let bf = brute_force_value(&d, &DecisionCells::single(), 1.0).unwrap();
    assert_eq!(bf.evaluated, 1);
    assert_abs_diff_eq!(bf.values[0], 1.0 / 3.0, epsilon = 1e-6);
    assert_abs_diff_eq!(bf.values[1], 2.0 / 3.0, epsilon = 1e-6);

    // Equal rates; action 1 costs half as much as action 0.
    let text = r#"{
        "type": "table", "states": 2, "actions": {"list": [[0.0], [1.0]]},
        "rates": {"table": {"knots": [0.0], "entries": [
            {"from": 0, "to": 1, "values": [[1.0]]},
            {"from": 1, "to": 0, "values": [[2.0]]}]}},
        "cost": {"table": {"knots": [0.0], "values": [[[1.0], [0.5]], [[2.0], [1.0]]]}}
    }"#;
    let m = TransitionRateModel::from_json(text).unwrap();
    let d = Discretization::new(&m, AgeGrid::uniform(30.0, 300).unwrap());
    let cells = DecisionCells::split_at(d.grid(), &[1.0, 2.0]).unwrap();
    let bf = brute_force_value(&d, &cells, 1.0).unwrap();
    assert_eq!(bf.evaluated, 64);
    for i in 0..2 {
        assert!(bf.policy.row(i).iter().all(|nu| nu.as_point() == Some(1)));
    }
}

#[test]
fn age_blind_is_optimal_without_age_dependence() {
    let d = const2();
    let c = compare_age_information(&d, 1.0, &ViOptions { tol: 1e-9, ..Default::default() }).unwrap();
    for i in 0..2 {
        assert!((c.aware.values[i] - c.blind.values[i]).abs() <= 2e-9);
    }
}

#[test]
fn age_information_helps_on_age_dependent_shocks() {
    let cost = BuiltinCost {
        holding: HoldingCost::AgeSaturating { coef: 1.0, cap: 5.0 },
        maintenance: agemdp::model::ActionCost { slope: 0.6, intercept: 0.0 },
        ..Default::default()
    };
    let m = TransitionRateModel::shock(2, ActionDim::new(1.0, 2.0, 5), cost).unwrap();
    let d = Discretization::new(&m, AgeGrid::for_model(&m, 0.05).unwrap());
    let tol = 1e-8;
    let c = compare_age_information(&d, 1.0, &ViOptions { tol, ..Default::default() }).unwrap();
    for i in 0..3 {
        assert!(c.aware.values[i] <= c.blind.values[i] + 2.0 * tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bellman_contracts_and_is_monotone(
        params in table_params(3, 2, false),
        alpha in 0.1f64..2.0,
        w in prop::collection::vec(-5.0f64..5.0, 3),
        dw in prop::collection::vec(0.0f64..3.0, 3),
    ) {
        let m = params.model();
        let d = Discretization::new(&m, AgeGrid::for_model(&m, 0.1).unwrap());
        let s = Sweeper::new(&d, alpha).unwrap();
        let cells = DecisionCells::every_cell(d.grid());
        let n = m.n_states();
        let (w, w2): (Vec<f64>, Vec<f64>) = (w[..n].to_vec(), (0..n).map(|i| w[i] + dw[i]).collect());
        let (t1, t2) = (s.bellman(&w, 0.0, &cells).unwrap(), s.bellman(&w2, 0.0, &cells).unwrap());
        let big_m = m.bounds().max_rate;
        let lhs = t1.iter().zip(&t2).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let rhs = dw[..n].iter().fold(0.0f64, |a, x| a.max(*x));
        prop_assert!(lhs <= big_m / (big_m + alpha) * rhs + 1e-9);
        prop_assert!(t1.iter().zip(&t2).all(|(x, y)| x <= y));
    }

    #[test]
    fn values_are_bounded_and_consistent(params in table_params(3, 2, false), alpha in 0.2f64..2.0) {
        let m = params.model();
        let d = Discretization::new(&m, AgeGrid::for_model(&m, 0.1).unwrap());
        let tol = 1e-8;
        let s = value_iteration(&d, alpha, &ViOptions { tol, ..Default::default() }).unwrap();
        let b = m.bounds();
        for &v in &s.values {
            prop_assert!(v >= 0.0 && v <= b.max_cost / alpha + tol);
        }
        let j = policy_value(&d, &s.policy, alpha).unwrap();
        for (x, y) in j.iter().zip(&s.values) {
            prop_assert!((x - y).abs() <= 2.0 * tol);
        }
    }

    #[test]
    fn cost_scaling_is_equivariant(params in table_params(3, 2, false), alpha in 0.2f64..2.0, pow in -2i32..3) {
        let m = params.model();
        let d = Discretization::new(&m, AgeGrid::for_model(&m, 0.1).unwrap());
        let opts = ViOptions { tol: 1e-9, ..Default::default() };
        let base = value_iteration(&d, alpha, &opts).unwrap();
        // Powers of two scale exactly, so every comparison in the sweep is unchanged.
        let theta = f64::powi(2.0, pow);
        let ds = Discretization::new(&m.scaled_cost(theta).unwrap(), d.grid().clone());
        let scaled = value_iteration(&ds, alpha, &opts).unwrap();
        for (x, y) in base.values.iter().zip(&scaled.values) {
            prop_assert!((theta * x - y).abs() <= 2e-9 * theta.max(1.0));
        }
        prop_assert_eq!(base.policy, scaled.policy);
        let d3 = Discretization::new(&m.scaled_cost(3.0).unwrap(), d.grid().clone());
        let v3 = value_iteration(&d3, alpha, &opts).unwrap();
        for (x, y) in base.values.iter().zip(&v3.values) {
            prop_assert!((3.0 * x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn constant_rates_reproduce_the_ctmdp(params in table_params(3, 2, true), alpha in 0.1f64..2.0) {
        let m = params.model();
        let d = Discretization::new(&m, AgeGrid::uniform(5.0, 20).unwrap());
        let s = value_iteration(&d, alpha, &ViOptions { tol: 1e-9, ..Default::default() }).unwrap();
        for (x, y) in s.values.iter().zip(ctmdp_oracle(&params, alpha)) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn value_iteration_matches_brute_force(params in table_params(3, 2, false), alpha in 0.2f64..2.0) {
        let m = params.model();
        let d = Discretization::new(&m, AgeGrid::uniform(8.0, 16).unwrap());
        let cells = DecisionCells::split_at(d.grid(), &[1.0]).unwrap();
        let bf = brute_force_value(&d, &cells, alpha).unwrap();
        let vi = value_iteration(&d, alpha, &ViOptions { tol: 1e-11, cells: Some(cells), ..Default::default() }).unwrap();
        for (x, y) in vi.values.iter().zip(&bf.values) {
            prop_assert!((x - y).abs() <= 1e-9, "vi {} brute force {}", x, y);
        }
    }
}
