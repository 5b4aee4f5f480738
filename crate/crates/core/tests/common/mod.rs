#![allow(dead_code)]

use agemdp::model::{CostSpec, CostTable, ModelFile, ModelKind, RateEntry, RateSpec, RateTable};
use agemdp::model::ActionSpec;
use agemdp::{ActionDistribution, AgePolicy, TransitionRateModel};
use proptest::prelude::*;

/// Raw numbers for a random complete-graph table model.
#[derive(Clone, Debug)]
pub struct TableParams {
    pub states: usize,
    pub actions: usize,
    pub knots: Vec<f64>,
    /// `[from][to][action][knot]`, self entries ignored.
    pub rates: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[state][action][knot]`.
    pub costs: Vec<Vec<Vec<f64>>>,
}

impl TableParams {
    pub fn model(&self) -> TransitionRateModel {
        let mut entries = Vec::new();
        for i in 0..self.states {
            for j in 0..self.states {
                if i != j {
                    entries.push(RateEntry { from: i, to: j, values: self.rates[i][j].clone() });
                }
            }
        }
        let file = ModelFile {
            kind: ModelKind::Table,
            states: self.states,
            actions: ActionSpec::List((0..self.actions).map(|a| vec![a as f64]).collect()),
            rates: RateSpec::Table(RateTable { knots: self.knots.clone(), entries }),
            cost: CostSpec::Table(CostTable { knots: self.knots.clone(), values: self.costs.clone() }),
            bounds: None,
        };
        TransitionRateModel::from_file(file).expect("random table is valid")
    }
}

/// Random table models. With `constant` the rates and costs do not depend on age.
pub fn table_params(max_states: usize, max_actions: usize, constant: bool) -> impl Strategy<Value = TableParams> {
    let knots = if constant { vec![0.0] } else { vec![0.0, 0.7, 2.0] };
    let nk = knots.len();
    (2..=max_states, 1..=max_actions).prop_flat_map(move |(n, a)| {
        let rates = prop::collection::vec(
            prop::collection::vec(prop::collection::vec(prop::collection::vec(0.2f64..2.0, nk), a), n),
            n,
        );
        let costs = prop::collection::vec(prop::collection::vec(prop::collection::vec(0.0f64..1.0, nk), a), n);
        let knots = knots.clone();
        (rates, costs).prop_map(move |(rates, costs)| TableParams { states: n, actions: a, knots: knots.clone(), rates, costs })
    })
}

/// A relaxed policy whose rows mix the actions with weights from `seed_weights`.
pub fn relaxed_policy(grid: &agemdp::AgeGrid, n_states: usize, n_actions: usize, weights: &[f64]) -> AgePolicy {
    let mut it = weights.iter().cycle();
    let rows = (0..n_states)
        .map(|_| {
            (0..grid.len())
                .map(|_| {
                    let raw: Vec<f64> = (0..n_actions).map(|_| *it.next().unwrap() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    ActionDistribution::new(raw.iter().enumerate().map(|(a, w)| (a, w / total)))
                        .expect("normalized")
                })
                .collect()
        })
        .collect();
    AgePolicy::new(grid.clone(), rows).unwrap()
}

/// `e E_1(1)` from the convergent series of the exponential integral.
pub fn e_times_e1_at_one() -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..60 {
        term *= -1.0 / k as f64;
        sum += term / k as f64;
    }
    std::f64::consts::E * (-EULER_GAMMA - sum)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
