//! Controlled jump-rate models with age-dependent rates and running costs.
//!
//! A model has a finite state space `0..n`, a finite list of action points,
//! rates `rate(i, j, y, a)` for `i != j` and a cost rate `cost(i, y, a)`. The
//! age `y` is the time since the last jump. Rates and costs come either from
//! one of the built-in parametric families or from piecewise-linear tables.

mod spec;
mod validate;

pub use spec::{
    ActionCost, ActionDim, ActionSpec, Bounds, BuiltinCost, BuiltinRates, CostSpec, CostTable,
    HoldingCost, ModelFile, ModelKind, RateEntry, RateSpec, RateTable,
};
pub use validate::{validate_model, A6Mode, A6Summary, Assumption, Location, ValidationReport, Violation};

use crate::error::{Error, Result};

/// Lower rate bound assumed when a tabulated model does not declare one.
pub const DEFAULT_MIN_RATE: f64 = 1e-6;

/// Default age cap of the `age_pure` up-rate.
pub const DEFAULT_AGE_PURE_CAP: f64 = 30.0;

/// Probability measure over action indices with finite support.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    weights: Vec<(usize, f64)>,
}

impl ActionDistribution {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn point(action: usize) -> Self {
        Self { weights: vec![(action, 1.0)] }
    }

    /// Builds a distribution from `(action, weight)` pairs. Duplicate indices
    /// are merged and zero weights dropped.
    pub fn new(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut weights: Vec<(usize, f64)> = Vec::new();
        for (a, w) in pairs {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("action weight {w} for {a}")));
            }
            if w == 0.0 {
                continue;
            }
            match weights.iter_mut().find(|(b, _)| *b == a) {
                Some(entry) => entry.1 += w,
                None => weights.push((a, w)),
            }
        }
        weights.sort_by_key(|&(a, _)| a);
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidArgument(format!("action weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(actions: &[usize]) -> Result<Self> {
        let w = 1.0 / actions.len() as f64;
        Self::new(actions.iter().map(|&a| (a, w)))
    }

    /// `theta * self + (1 - theta) * other`.
    pub fn mix(&self, theta: f64, other: &Self) -> Result<Self> {
        let left = self.weights.iter().map(|&(a, w)| (a, theta * w));
        let right = other.weights.iter().map(|&(a, w)| (a, (1.0 - theta) * w));
        let merged: Vec<_> = left.chain(right).collect();
        // Renormalize away rounding so the sum check stays tight.
        let total: f64 = merged.iter().map(|&(_, w)| w).sum();
        Self::new(merged.into_iter().map(|(a, w)| (a, w / total)))
    }

    pub fn weights(&self) -> &[(usize, f64)] {
        &self.weights
    }

    pub fn as_point(&self) -> Option<usize> {
        match self.weights.as_slice() {
            [(a, _)] => Some(*a),
            _ => None,
        }
    }

    pub fn max_action(&self) -> usize {
        self.weights.iter().map(|&(a, _)| a).max().unwrap_or(0)
    }

    pub fn expect(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.weights.iter().map(|&(a, w)| w * f(a)).sum()
    }
}

#[derive(Clone, Debug)]
enum Family {
    Const2,
    AgePure { y_cap: f64 },
    Queueing { cost: BuiltinCost },
    Shock { top: usize, cost: BuiltinCost },
    ShockModified { top: usize, cost: BuiltinCost },
    Table { rates: CompiledRates, cost: CompiledCost },
}

#[derive(Clone, Debug)]
struct CompiledRates {
    knots: Vec<f64>,
    /// `index[i][j]` points into `entries`.
    index: Vec<Vec<Option<usize>>>,
    /// `entries[e][action][knot]`, already broadcast over actions.
    entries: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug)]
struct CompiledCost {
    knots: Vec<f64>,
    values: Vec<Vec<Vec<f64>>>,
}

fn interpolate(knots: &[f64], values: &[f64], y: f64) -> f64 {
    let k = knots.partition_point(|&x| x <= y);
    if k == 0 {
        values[0]
    } else if k == knots.len() {
        values[knots.len() - 1]
    } else {
        let (x0, x1) = (knots[k - 1], knots[k]);
        let t = (y - x0) / (x1 - x0);
        values[k - 1] + t * (values[k] - values[k - 1])
    }
}

/// Linear ramp from `early` (age <= 100) to `late` (age >= 1000).
fn ramp(y: f64, early: f64, late: f64) -> f64 {
    if y <= 100.0 {
        early
    } else if y >= 1000.0 {
        late
    } else {
        early + (late - early) * (y - 100.0) / 900.0
    }
}

/// Immutable age-dependent controlled rate model.
#[derive(Clone, Debug)]
pub struct TransitionRateModel {
    file: ModelFile,
    n_states: usize,
    actions: Vec<Vec<f64>>,
    family: Family,
    targets: Vec<Vec<usize>>,
    bounds: Bounds,
}

/// Parameters accepted by [`build_builtin`]. Missing fields take the family
/// defaults (`const2`/`age_pure`: two states and one action; `queueing`:
/// capacity 20; shock families: `N = 4`; action dims of 9 points).
#[derive(Clone, Debug, Default)]
pub struct BuiltinParams {
    pub states: Option<usize>,
    pub actions: Option<ActionSpec>,
    pub rates: BuiltinRates,
    pub cost: BuiltinCost,
}

/// Builds one of the named built-in models.
pub fn build_builtin(name: &str, params: BuiltinParams) -> Result<TransitionRateModel> {
    let kind = ModelKind::parse(name)?;
    let default_states = match kind {
        ModelKind::Const2 | ModelKind::AgePure => 2,
        ModelKind::Queueing => 21,
        ModelKind::Shock | ModelKind::ShockModified => 5,
        ModelKind::Table => {
            return Err(Error::InvalidArgument("`table` is not a built-in family".into()))
        }
    };
    let default_actions = match kind {
        ModelKind::Const2 | ModelKind::AgePure => ActionSpec::default(),
        ModelKind::Queueing => {
            ActionSpec::Dims(vec![ActionDim::new(0.5, 1.0, 9), ActionDim::new(1.0, 2.0, 9)])
        }
        _ => ActionSpec::Dims(vec![ActionDim::new(1.0, 2.0, 9)]),
    };
    let file = ModelFile {
        kind,
        states: params.states.unwrap_or(default_states),
        actions: params.actions.unwrap_or(default_actions),
        rates: RateSpec::Builtin(params.rates),
        cost: CostSpec::Builtin(params.cost),
        bounds: None,
    };
    TransitionRateModel::from_file(file)
}

impl TransitionRateModel {
    pub fn from_file(file: ModelFile) -> Result<Self> {
        let actions = file.actions.points()?;
        let n_states = file.states;
        let n_actions = actions.len();
        if n_states < 2 {
            return Err(Error::InvalidModel("need at least two states".into()));
        }
        if actions.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidModel("action coordinates must be finite".into()));
        }

        let builtin_cost = || match &file.cost {
            CostSpec::Builtin(c) => Ok(c.clone()),
            CostSpec::Table(_) => Err(Error::InvalidModel(
                "built-in families take built-in cost parameters".into(),
            )),
        };
        let builtin_rates = || match &file.rates {
            RateSpec::Builtin(r) => Ok(r.clone()),
            RateSpec::Table(_) => Err(Error::InvalidModel(
                "built-in families take built-in rate parameters".into(),
            )),
        };
        let need_dims = |dims: usize| -> Result<()> {
            for (a, p) in actions.iter().enumerate() {
                if p.len() != dims {
                    return Err(Error::InvalidModel(format!(
                        "action {a} has {} coordinates, family needs {dims}",
                        p.len()
                    )));
                }
                if p.iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "action {a}: rate parameters must be positive, got {p:?}"
                    )));
                }
            }
            Ok(())
        };

        let family = match file.kind {
            ModelKind::Const2 | ModelKind::AgePure => {
                if n_states != 2 {
                    return Err(Error::InvalidModel(format!(
                        "{:?} has exactly two states",
                        file.kind
                    )));
                }
                let rates = builtin_rates()?;
                if file.kind == ModelKind::Const2 {
                    Family::Const2
                } else {
                    let y_cap = rates.y_cap.unwrap_or(DEFAULT_AGE_PURE_CAP);
                    if !(y_cap >= 0.0) || !y_cap.is_finite() {
                        return Err(Error::InvalidModel(format!("y_cap = {y_cap}")));
                    }
                    Family::AgePure { y_cap }
                }
            }
            ModelKind::Queueing => {
                builtin_rates()?;
                need_dims(2)?;
                Family::Queueing { cost: builtin_cost()? }
            }
            ModelKind::Shock => {
                builtin_rates()?;
                need_dims(1)?;
                if n_states < 3 {
                    return Err(Error::InvalidModel("shock model needs N >= 2".into()));
                }
                Family::Shock { top: n_states - 1, cost: builtin_cost()? }
            }
            ModelKind::ShockModified => {
                builtin_rates()?;
                need_dims(1)?;
                if n_states < 4 {
                    return Err(Error::InvalidModel("modified shock model needs N >= 3".into()));
                }
                Family::ShockModified { top: n_states - 1, cost: builtin_cost()? }
            }
            ModelKind::Table => {
                let rates = match &file.rates {
                    RateSpec::Table(t) => compile_rates(t, n_states, n_actions)?,
                    RateSpec::Builtin(_) => {
                        return Err(Error::InvalidModel("table model needs a rate table".into()))
                    }
                };
                let cost = match &file.cost {
                    CostSpec::Table(t) => compile_cost(t, n_states, n_actions)?,
                    CostSpec::Builtin(_) => {
                        return Err(Error::InvalidModel("table model needs a cost table".into()))
                    }
                };
                Family::Table { rates, cost }
            }
        };

        let targets = (0..n_states).map(|i| family_targets(&family, n_states, i)).collect();
        let mut model = Self {
            n_states,
            actions,
            family,
            targets,
            bounds: Bounds { max_rate: 0.0, min_rate: 0.0, max_cost: 0.0 },
            file,
        };
        model.bounds = match model.file.bounds {
            Some(b) => {
                if !(b.max_rate > 0.0 && b.min_rate > 0.0 && b.max_cost >= 0.0)
                    || b.min_rate > b.max_rate
                {
                    return Err(Error::InvalidModel(format!("inconsistent bounds {b:?}")));
                }
                b
            }
            None => model.analytic_bounds(),
        };
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(ModelFile::from_json(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        self.file.to_json()
    }

    /// `S = {0, 1}`, one action, unit rates both ways, `c(i) = i`.
    pub fn const2() -> Self {
        build_builtin("const2", BuiltinParams::default()).expect("const2 is well formed")
    }

    /// Like [`const2`](Self::const2) but with `n` indistinguishable actions.
    pub fn const2_with_actions(n: usize) -> Self {
        let params = BuiltinParams {
            actions: Some(ActionSpec::List((0..n).map(|a| vec![a as f64]).collect())),
            ..Default::default()
        };
        build_builtin("const2", params).expect("const2 is well formed")
    }

    /// `S = {0, 1}`, up-rate `1 + min(y, cap)`, down-rate 1, `c(i) = i`.
    pub fn age_pure() -> Self {
        build_builtin("age_pure", BuiltinParams::default()).expect("age_pure is well formed")
    }

    /// Shock model on states `0..=top` with shock rate `mu` on the action grid.
    pub fn shock(top: usize, mu: ActionDim, cost: BuiltinCost) -> Result<Self> {
        let params = BuiltinParams {
            states: Some(top + 1),
            actions: Some(ActionSpec::Dims(vec![mu])),
            cost,
            ..Default::default()
        };
        build_builtin("shock", params)
    }

    pub fn shock_modified(top: usize, mu: ActionDim, cost: BuiltinCost) -> Result<Self> {
        let params = BuiltinParams {
            states: Some(top + 1),
            actions: Some(ActionSpec::Dims(vec![mu])),
            cost,
            ..Default::default()
        };
        build_builtin("shock_modified", params)
    }

    /// Birth-death queue truncated at `capacity`, actions `(gamma, mu)`.
    pub fn queueing(capacity: usize, gamma: ActionDim, mu: ActionDim, cost: BuiltinCost) -> Result<Self> {
        let params = BuiltinParams {
            states: Some(capacity + 1),
            actions: Some(ActionSpec::Dims(vec![gamma, mu])),
            cost,
            ..Default::default()
        };
        build_builtin("queueing", params)
    }

    pub fn file(&self) -> &ModelFile {
        &self.file
    }

    pub fn kind(&self) -> ModelKind {
        self.file.kind
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// States `j != i` that can have a nonzero rate from `i`, ascending.
    pub fn targets(&self, i: usize) -> &[usize] {
        &self.targets[i]
    }

    /// Jump rate from `i` to `j` at age `y` under action index `a`.
    pub fn rate(&self, i: usize, j: usize, y: f64, a: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let u = &self.actions[a];
        match &self.family {
            Family::Const2 => 1.0,
            Family::AgePure { y_cap } => {
                if i == 0 {
                    1.0 + y.min(*y_cap)
                } else {
                    1.0
                }
            }
            Family::Queueing { .. } => {
                let top = self.n_states - 1;
                if j == i + 1 && i < top {
                    u[0]
                } else if i > 0 && j == i - 1 {
                    u[1]
                } else {
                    0.0
                }
            }
            Family::Shock { top, .. } => {
                let (top, mu) = (*top, u[0]);
                if i + 2 <= top {
                    if j == i + 1 {
                        mu / (1.0 + y)
                    } else if j == i + 2 {
                        mu * y / (1.0 + y)
                    } else {
                        0.0
                    }
                } else if (i + 1 == top && j == top) || (i == top && j == 0) {
                    mu
                } else {
                    0.0
                }
            }
            Family::ShockModified { top, .. } => {
                let (top, mu) = (*top, u[0]);
                if i + 3 <= top {
                    let small = mu / 10f64.powi((top - i) as i32);
                    let up = ramp(y, mu - 2.0 * small, small);
                    if j == top {
                        small
                    } else if j == i + 1 {
                        up
                    } else if j == i + 2 {
                        mu - small - up
                    } else {
                        0.0
                    }
                } else if i + 2 == top {
                    let up = ramp(y, mu - 2.0 * mu / 100.0, 2.0 * mu / 100.0);
                    if j == top - 1 {
                        up
                    } else if j == top {
                        mu - up
                    } else {
                        0.0
                    }
                } else if (i + 1 == top && j == top) || (i == top && j == 0) {
                    mu
                } else {
                    0.0
                }
            }
            Family::Table { rates, .. } => match rates.index[i][j] {
                Some(e) => interpolate(&rates.knots, &rates.entries[e][a], y),
                None => 0.0,
            },
        }
    }

    /// Running cost rate in state `i` at age `y` under action index `a`.
    pub fn cost(&self, i: usize, y: f64, a: usize) -> f64 {
        let u = &self.actions[a];
        match &self.family {
            Family::Const2 | Family::AgePure { .. } => i as f64,
            Family::Queueing { cost } => {
                cost.holding.eval(i, y) - cost.income.eval(u[0]) + cost.service.eval(u[1])
            }
            Family::Shock { cost, .. } | Family::ShockModified { cost, .. } => {
                cost.holding.eval(i, y) + cost.maintenance.eval(u[0])
            }
            Family::Table { cost, .. } => interpolate(&cost.knots, &cost.values[i][a], y),
        }
    }

    /// Total exit rate `sum_{j != i} rate(i, j, y, a)`, i.e. `-lambda_ii`.
    pub fn total_rate(&self, i: usize, y: f64, a: usize) -> f64 {
        self.targets[i].iter().map(|&j| self.rate(i, j, y, a)).sum()
    }

    /// Rate under a relaxed (randomized) action.
    pub fn relaxed_rate(&self, i: usize, j: usize, y: f64, nu: &ActionDistribution) -> f64 {
        nu.expect(|a| self.rate(i, j, y, a))
    }

    pub fn relaxed_cost(&self, i: usize, y: f64, nu: &ActionDistribution) -> f64 {
        nu.expect(|a| self.cost(i, y, a))
    }

    /// Ages where rates or costs have kinks (table knots, ramp ends, caps).
    pub fn age_breakpoints(&self) -> Vec<f64> {
        let mut points = match &self.family {
            Family::Const2 => Vec::new(),
            Family::AgePure { y_cap } => vec![*y_cap],
            Family::Queueing { cost } | Family::Shock { cost, .. } => cost.holding.breakpoints(),
            Family::ShockModified { cost, .. } => {
                let mut p = cost.holding.breakpoints();
                p.extend([100.0, 1000.0]);
                p
            }
            Family::Table { rates, cost } => {
                rates.knots.iter().chain(cost.knots.iter()).copied().collect()
            }
        };
        points.retain(|&y| y > 0.0);
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    /// Same tabulated model with every cost rate multiplied by `theta >= 0`.
    /// Built-in families must be tabulated first with [`to_table_file`](Self::to_table_file).
    pub fn scaled_cost(&self, theta: f64) -> Result<Self> {
        if self.kind() != ModelKind::Table {
            return Err(Error::InvalidArgument("cost scaling needs a tabulated model".into()));
        }
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("cost scale {theta}")));
        }
        let mut file = self.file.clone();
        if let CostSpec::Table(t) = &mut file.cost {
            for v in t.values.iter_mut().flatten().flatten() {
                *v *= theta;
            }
        }
        file.bounds = Some(Bounds { max_cost: self.bounds.max_cost * theta, ..self.bounds });
        Self::from_file(file)
    }

    /// Tabulates rates and cost on the given knots. Exact for families that
    /// are piecewise linear on those knots (always for constant-rate models).
    pub fn to_table_file(&self, knots: &[f64]) -> Result<ModelFile> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("need at least one knot".into()));
        }
        let n_actions = self.n_actions();
        let mut entries = Vec::new();
        for i in 0..self.n_states {
            for &j in &self.targets[i] {
                let values = (0..n_actions)
                    .map(|a| knots.iter().map(|&y| self.rate(i, j, y, a)).collect())
                    .collect();
                entries.push(RateEntry { from: i, to: j, values });
            }
        }
        let values = (0..self.n_states)
            .map(|i| {
                (0..n_actions)
                    .map(|a| knots.iter().map(|&y| self.cost(i, y, a)).collect())
                    .collect()
            })
            .collect();
        Ok(ModelFile {
            kind: ModelKind::Table,
            states: self.n_states,
            actions: ActionSpec::List(self.actions.clone()),
            rates: RateSpec::Table(RateTable { knots: knots.to_vec(), entries }),
            cost: CostSpec::Table(CostTable { knots: knots.to_vec(), values }),
            bounds: Some(self.bounds),
        })
    }

    fn analytic_bounds(&self) -> Bounds {
        let actions = 0..self.n_actions();
        let top = self.n_states - 1;
        let max_over = |f: &dyn Fn(usize) -> f64| actions.clone().map(f).fold(f64::NEG_INFINITY, f64::max);
        let min_over = |f: &dyn Fn(usize) -> f64| actions.clone().map(f).fold(f64::INFINITY, f64::min);
        match &self.family {
            Family::Const2 => Bounds { max_rate: 1.0, min_rate: 1.0, max_cost: 1.0 },
            Family::AgePure { y_cap } => Bounds { max_rate: 1.0 + y_cap, min_rate: 1.0, max_cost: 1.0 },
            Family::Queueing { cost } => {
                let u = |a: usize| (self.actions[a][0], self.actions[a][1]);
                let hold = (0..=top).map(|i| cost.holding.sup(i)).fold(0.0, f64::max);
                Bounds {
                    max_rate: max_over(&|a| u(a).0 + u(a).1),
                    min_rate: min_over(&|a| u(a).0.min(u(a).1)),
                    max_cost: max_over(&|a| hold - cost.income.eval(u(a).0) + cost.service.eval(u(a).1))
                        .max(0.0),
                }
            }
            Family::Shock { cost, .. } | Family::ShockModified { cost, .. } => {
                let mu = |a: usize| self.actions[a][0];
                let hold = (0..=top).map(|i| cost.holding.sup(i)).fold(0.0, f64::max);
                Bounds {
                    max_rate: max_over(&mu),
                    min_rate: min_over(&mu),
                    max_cost: max_over(&|a| hold + cost.maintenance.eval(mu(a))).max(0.0),
                }
            }
            Family::Table { rates, cost } => {
                // Totals are piecewise linear on the shared knots, so extremes sit on knots.
                let mut max_rate = 0.0f64;
                let mut min_rate = f64::INFINITY;
                for i in 0..self.n_states {
                    for a in actions.clone() {
                        for &y in &rates.knots {
                            let total = self.total_rate(i, y, a);
                            max_rate = max_rate.max(total);
                            min_rate = min_rate.min(total);
                        }
                    }
                }
                let max_cost = cost.values.iter().flatten().flatten().copied().fold(0.0, f64::max);
                Bounds {
                    max_rate: max_rate.max(DEFAULT_MIN_RATE),
                    min_rate: min_rate.max(DEFAULT_MIN_RATE),
                    max_cost,
                }
            }
        }
    }
}

fn family_targets(family: &Family, n_states: usize, i: usize) -> Vec<usize> {
    let top = n_states - 1;
    let mut t = match family {
        Family::Const2 | Family::AgePure { .. } => vec![1 - i],
        Family::Queueing { .. } => {
            let mut t = Vec::new();
            if i > 0 {
                t.push(i - 1);
            }
            if i < top {
                t.push(i + 1);
            }
            t
        }
        Family::Shock { .. } => {
            if i + 2 <= top {
                vec![i + 1, i + 2]
            } else if i + 1 == top {
                vec![top]
            } else {
                vec![0]
            }
        }
        Family::ShockModified { .. } => {
            if i + 3 <= top {
                vec![i + 1, i + 2, top]
            } else if i + 2 == top {
                vec![top - 1, top]
            } else if i + 1 == top {
                vec![top]
            } else {
                vec![0]
            }
        }
        Family::Table { rates, .. } => {
            (0..n_states).filter(|&j| rates.index[i][j].is_some()).collect()
        }
    };
    t.sort_unstable();
    t.dedup();
    t
}

fn check_knots(knots: &[f64], what: &str) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::InvalidModel(format!("{what} table has no knots")));
    }
    if knots.iter().any(|k| !k.is_finite() || *k < 0.0) || knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidModel(format!(
            "{what} knots must be finite, nonnegative and strictly increasing"
        )));
    }
    Ok(())
}

fn broadcast(rows: &[Vec<f64>], n_actions: usize, n_knots: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = match rows.len() {
        1 => vec![rows[0].clone(); n_actions],
        n if n == n_actions => rows.to_vec(),
        n => {
            return Err(Error::InvalidModel(format!(
                "{what}: {n} action rows, expected 1 or {n_actions}"
            )))
        }
    };
    for row in &rows {
        if row.len() != n_knots {
            return Err(Error::InvalidModel(format!(
                "{what}: {} values for {n_knots} knots",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("{what}: non-finite value")));
        }
    }
    Ok(rows)
}

fn compile_rates(table: &RateTable, n_states: usize, n_actions: usize) -> Result<CompiledRates> {
    check_knots(&table.knots, "rate")?;
    let mut index = vec![vec![None; n_states]; n_states];
    let mut entries = Vec::with_capacity(table.entries.len());
    for entry in &table.entries {
        let (i, j) = (entry.from, entry.to);
        if i >= n_states || j >= n_states || i == j {
            return Err(Error::InvalidModel(format!("rate entry {i} -> {j} is out of range")));
        }
        if index[i][j].is_some() {
            return Err(Error::InvalidModel(format!("duplicate rate entry {i} -> {j}")));
        }
        index[i][j] = Some(entries.len());
        entries.push(broadcast(&entry.values, n_actions, table.knots.len(), &format!("rate {i} -> {j}"))?);
    }
    Ok(CompiledRates { knots: table.knots.clone(), index, entries })
}

fn compile_cost(table: &CostTable, n_states: usize, n_actions: usize) -> Result<CompiledCost> {
    check_knots(&table.knots, "cost")?;
    if table.values.len() != n_states {
        return Err(Error::InvalidModel(format!(
            "cost table has {} state rows, expected {n_states}",
            table.values.len()
        )));
    }
    let values = table
        .values
        .iter()
        .enumerate()
        .map(|(i, rows)| broadcast(rows, n_actions, table.knots.len(), &format!("cost of state {i}")))
        .collect::<Result<_>>()?;
    Ok(CompiledCost { knots: table.knots.clone(), values })
}
