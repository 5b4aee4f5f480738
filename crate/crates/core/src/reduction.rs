//! Jump-to-jump reduction of an age-dependent model under a fixed policy row.
//!
//! For a state `i` and an age policy `r` the embedded semi-Markov decision
//! process has
//!
//! ```text
//! S(y)    = exp(-int_0^y Lambda(s, r_s) ds)                      survival
//! f(i,r)  = int_0^inf e^{-alpha y} S(y) c(i, y, r_y) dy          one-stage cost
//! p(i,j)  = int_0^inf S(y) lambda_ij(y, r_y) dy                  embedded chain
//! F_ij(t) = int_0^t S(y) lambda_ij(y, r_y) dy / p(i,j)           sojourn law
//! tau(i)  = int_0^inf S(y) dy                                    mean sojourn
//! D_ij    = int_0^inf e^{-alpha y} S(y) lambda_ij(y, r_y) dy      discounted transfer
//! ```
//!
//! Every grid cell is frozen: the relaxed rates and cost are evaluated once
//! per cell (midpoint, or `y_max` for the tail) and the exponential
//! integrands are integrated in closed form. Row sums of `p` telescope to one
//! exactly, and the backward age sweep in [`crate::discounted`] computes the
//! same numbers as these tables.

use crate::error::{Error, Result};
use crate::grid::AgeGrid;
use crate::model::{ActionDistribution, TransitionRateModel};
use crate::policy::AgePolicy;

/// Tolerance on `|sum_j p(i,j) - 1|`.
pub const ROW_SUM_TOL: f64 = 1e-8;

/// Rates and costs of one state, frozen per grid cell and action.
#[derive(Clone, Debug)]
pub struct StateCoeffs {
    targets: Vec<usize>,
    n_actions: usize,
    rates: Vec<f64>,
    totals: Vec<f64>,
    costs: Vec<f64>,
}

impl StateCoeffs {
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    #[inline]
    pub fn total(&self, k: usize, a: usize) -> f64 {
        self.totals[k * self.n_actions + a]
    }

    #[inline]
    pub fn cost(&self, k: usize, a: usize) -> f64 {
        self.costs[k * self.n_actions + a]
    }

    /// Rates to each target, in target order.
    #[inline]
    pub fn rates(&self, k: usize, a: usize) -> &[f64] {
        let t = self.targets.len();
        let start = (k * self.n_actions + a) * t;
        &self.rates[start..start + t]
    }
}

/// A model frozen on an age grid.
#[derive(Clone, Debug)]
pub struct Discretization {
    model: TransitionRateModel,
    grid: AgeGrid,
    states: Vec<StateCoeffs>,
}

impl Discretization {
    pub fn new(model: &TransitionRateModel, grid: AgeGrid) -> Self {
        let n_actions = model.n_actions();
        let states = (0..model.n_states())
            .map(|i| {
                let targets = model.targets(i).to_vec();
                let cells = grid.len();
                let mut rates = Vec::with_capacity(cells * n_actions * targets.len());
                let mut totals = Vec::with_capacity(cells * n_actions);
                let mut costs = Vec::with_capacity(cells * n_actions);
                for k in 0..cells {
                    let y = grid.eval_age(k);
                    for a in 0..n_actions {
                        let mut total = 0.0;
                        for &j in &targets {
                            let r = model.rate(i, j, y, a);
                            rates.push(r);
                            total += r;
                        }
                        totals.push(total);
                        costs.push(model.cost(i, y, a));
                    }
                }
                StateCoeffs { targets, n_actions, rates, totals, costs }
            })
            .collect();
        Self { model: model.clone(), grid, states }
    }

    pub fn model(&self) -> &TransitionRateModel {
        &self.model
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.model.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.model.n_actions()
    }

    pub fn coeffs(&self, i: usize) -> &StateCoeffs {
        &self.states[i]
    }

    pub(crate) fn check_row(&self, i: usize, row: &[ActionDistribution]) -> Result<()> {
        if i >= self.n_states() {
            return Err(Error::InvalidArgument(format!("state {i} out of range")));
        }
        if row.len() != self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "policy row has {} cells, grid has {}",
                row.len(),
                self.grid.len()
            )));
        }
        if let Some(a) = row.iter().map(ActionDistribution::max_action).find(|&a| a >= self.n_actions()) {
            return Err(Error::InvalidArgument(format!("action {a} out of range")));
        }
        Ok(())
    }

    pub(crate) fn check_policy(&self, policy: &AgePolicy) -> Result<()> {
        if policy.n_states() != self.n_states() {
            return Err(Error::InvalidArgument(format!(
                "policy covers {} states, model has {}",
                policy.n_states(),
                self.n_states()
            )));
        }
        (0..self.n_states()).try_for_each(|i| self.check_row(i, policy.row(i)))
    }
}

/// `(1 - exp(-r h)) / r`, the integral of `exp(-r s)` over `[0, h)`.
#[inline]
pub(crate) fn cell_gain(r: f64, h: f64) -> f64 {
    if h.is_infinite() {
        if r > 0.0 {
            1.0 / r
        } else {
            f64::INFINITY
        }
    } else if r > 0.0 {
        -(-r * h).exp_m1() / r
    } else {
        h
    }
}

#[inline]
pub(crate) fn cell_decay(r: f64, h: f64) -> f64 {
    if h.is_infinite() {
        0.0
    } else {
        (-r * h).exp()
    }
}

/// Relaxed coefficients of one cell under a distribution.
fn relaxed_cell(c: &StateCoeffs, k: usize, nu: &ActionDistribution, rates: &mut [f64]) -> (f64, f64) {
    if let Some(a) = nu.as_point() {
        rates.copy_from_slice(c.rates(k, a));
        return (c.total(k, a), c.cost(k, a));
    }
    rates.iter_mut().for_each(|r| *r = 0.0);
    let (mut total, mut cost) = (0.0, 0.0);
    for &(a, w) in nu.weights() {
        for (r, &x) in rates.iter_mut().zip(c.rates(k, a)) {
            *r += w * x;
        }
        total += w * c.total(k, a);
        cost += w * c.cost(k, a);
    }
    (total, cost)
}

/// All jump-to-jump integrals of one state under one policy row.
#[derive(Clone, Debug, PartialEq)]
pub struct RowIntegrals {
    pub targets: Vec<usize>,
    /// Survival at the grid nodes.
    pub survival: Vec<f64>,
    pub cost: f64,
    pub p_hat: Vec<f64>,
    pub transfer: Vec<f64>,
    pub tau_bar: f64,
    /// Cumulative `S * lambda_ij` mass at the nodes, per target.
    pub partial: Option<Vec<Vec<f64>>>,
}

pub(crate) fn row_integrals(
    disc: &Discretization,
    i: usize,
    row: &[ActionDistribution],
    alpha: f64,
    with_partial: bool,
) -> Result<RowIntegrals> {
    disc.check_row(i, row)?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("discount rate {alpha}")));
    }
    let grid = disc.grid();
    let coeffs = disc.coeffs(i);
    let nt = coeffs.targets().len();
    let mut rates = vec![0.0; nt];
    let mut survival = Vec::with_capacity(grid.len());
    let mut p_hat = vec![0.0; nt];
    let mut transfer = vec![0.0; nt];
    let mut partial = with_partial.then(|| vec![Vec::with_capacity(grid.len()); nt]);
    let (mut s, mut s_disc, mut cost, mut tau) = (1.0f64, 1.0f64, 0.0, 0.0);

    for k in 0..grid.len() {
        survival.push(s);
        if let Some(p) = partial.as_mut() {
            for (t, col) in p.iter_mut().enumerate() {
                col.push(p_hat[t]);
            }
        }
        let h = grid.width(k);
        let (total, c) = relaxed_cell(coeffs, k, &row[k], &mut rates);
        let g0 = cell_gain(total, h);
        let ga = if alpha == 0.0 { g0 } else { cell_gain(alpha + total, h) };
        if s > 0.0 {
            tau += s * g0;
            for t in 0..nt {
                if rates[t] != 0.0 {
                    p_hat[t] += s * rates[t] * g0;
                }
            }
        }
        if s_disc > 0.0 {
            if c != 0.0 {
                cost += s_disc * c * ga;
            }
            for t in 0..nt {
                if rates[t] != 0.0 {
                    transfer[t] += s_disc * rates[t] * ga;
                }
            }
        }
        s *= cell_decay(total, h);
        s_disc *= cell_decay(alpha + total, h);
    }
    Ok(RowIntegrals {
        targets: coeffs.targets().to_vec(),
        survival,
        cost,
        p_hat,
        transfer,
        tau_bar: tau,
        partial,
    })
}

/// Survival `S_i(y_k)` at the grid nodes.
pub fn survival_curve(disc: &Discretization, i: usize, row: &[ActionDistribution]) -> Result<Vec<f64>> {
    Ok(row_integrals(disc, i, row, 0.0, false)?.survival)
}

/// Expected one-stage cost; `alpha = 0` gives the undiscounted jump-to-jump cost.
pub fn one_stage_cost(disc: &Discretization, i: usize, row: &[ActionDistribution], alpha: f64) -> Result<f64> {
    Ok(row_integrals(disc, i, row, alpha, false)?.cost)
}

/// Embedded transition probabilities `(j, p(i,j))`.
pub fn transition_prob(disc: &Discretization, i: usize, row: &[ActionDistribution]) -> Result<Vec<(usize, f64)>> {
    let r = row_integrals(disc, i, row, 0.0, false)?;
    check_row_sum(i, &r.p_hat)?;
    Ok(r.targets.into_iter().zip(r.p_hat).collect())
}

fn check_row_sum(i: usize, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
        return Err(Error::RowSumViolation { state: i, sum, tol: ROW_SUM_TOL });
    }
    Ok(())
}

/// Sojourn CDF `F_ij` at the grid nodes. Its limit beyond `y_max` is one.
pub fn sojourn_cdf(disc: &Discretization, i: usize, j: usize, row: &[ActionDistribution]) -> Result<Vec<f64>> {
    let r = row_integrals(disc, i, row, 0.0, true)?;
    let t = r.targets.iter().position(|&x| x == j);
    let p = t.map(|t| r.p_hat[t]).unwrap_or(0.0);
    if !(p > 0.0) {
        return Err(Error::UndefinedCdf { state: i, target: j });
    }
    let partial = r.partial.expect("requested").swap_remove(t.unwrap());
    Ok(partial.into_iter().map(|x| x / p).collect())
}

/// Mean sojourn time in state `i`.
pub fn expected_sojourn(disc: &Discretization, i: usize, row: &[ActionDistribution]) -> Result<f64> {
    Ok(row_integrals(disc, i, row, 0.0, false)?.tau_bar)
}

/// Discounted transfer `D_ij = E[exp(-alpha tau); next state = j]`.
pub fn discounted_transfer(
    disc: &Discretization,
    i: usize,
    row: &[ActionDistribution],
    alpha: f64,
) -> Result<Vec<(usize, f64)>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("discount rate must be positive, got {alpha}")));
    }
    let r = row_integrals(disc, i, row, alpha, false)?;
    Ok(r.targets.into_iter().zip(r.transfer).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedRow {
    pub state: usize,
    pub survival: Vec<f64>,
    pub f: f64,
    pub p_hat: Vec<(usize, f64)>,
    /// `None` where `p_hat` is zero and the CDF is undefined.
    pub cdf: Vec<(usize, Option<Vec<f64>>)>,
    pub tau_bar: f64,
    pub transfer: Vec<(usize, f64)>,
}

/// Embedded semi-Markov tables of a policy at discount rate `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedSmdp {
    pub alpha: f64,
    pub rows: Vec<EmbeddedRow>,
}

impl EmbeddedSmdp {
    /// Dense `n x n` discounted transfer matrix.
    pub fn transfer_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.rows.len();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(j, d) in &row.transfer {
                    dense[j] = d;
                }
                dense
            })
            .collect()
    }
}

/// Assembles the tables of every state under `policy`.
pub fn embed(disc: &Discretization, policy: &AgePolicy, alpha: f64) -> Result<EmbeddedSmdp> {
    disc.check_policy(policy)?;
    let rows = (0..disc.n_states())
        .map(|i| {
            let r = row_integrals(disc, i, policy.row(i), alpha, true)?;
            check_row_sum(i, &r.p_hat)?;
            let partial = r.partial.expect("requested");
            let cdf = r
                .targets
                .iter()
                .zip(&r.p_hat)
                .zip(partial)
                .map(|((&j, &p), col)| (j, (p > 0.0).then(|| col.into_iter().map(|x| x / p).collect())))
                .collect();
            Ok(EmbeddedRow {
                state: i,
                survival: r.survival,
                f: r.cost,
                p_hat: r.targets.iter().copied().zip(r.p_hat.iter().copied()).collect(),
                cdf,
                tau_bar: r.tau_bar,
                transfer: r.targets.iter().copied().zip(r.transfer.iter().copied()).collect(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(EmbeddedSmdp { alpha, rows })
}
