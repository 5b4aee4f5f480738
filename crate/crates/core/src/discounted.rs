//! Discounted-cost optimality on the embedded problem.
//!
//! The Bellman operator takes a value vector `W` on states and, for each
//! state, solves the backward age equation
//!
//! ```text
//! -phi'(y) = min_u [ c(i,y,u) - rho + sum_j lambda_ij(y,u) W(j) - (alpha + Lambda_i(y,u)) phi(y) ]
//! ```
//!
//! on the frozen grid. The sweep starts from the tail and walks down to age
//! zero; `phi(0)` is the new value of state `i`. With `alpha = 0` and
//! `rho = g` the same routine serves the average-cost solvers.

use crate::error::{Error, Result};
use crate::grid::{AgeGrid, DecisionCells};
use crate::model::ActionDistribution;
use crate::policy::AgePolicy;
use crate::reduction::{cell_decay, cell_gain, embed, row_integrals, Discretization};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::ops::Range;

/// Above this many `(state, cell, action)` triples a Bellman step runs on the
/// rayon pool.
const PARALLEL_WORK: usize = 1 << 15;

/// Policies visited by [`brute_force_value`] before it gives up.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Running cost used by a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostMode {
    Model,
    /// The same cost rate in every state, age and action.
    Constant(f64),
}

/// Result of one backward sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTrace {
    pub value: f64,
    /// Minimizing action per grid cell.
    pub actions: Vec<usize>,
    /// `phi` at the grid nodes.
    pub phi: Vec<f64>,
}

/// Backward age sweep with the per-cell exponential coefficients cached for
/// one discount rate.
pub struct Sweeper<'d> {
    disc: &'d Discretization,
    alpha: f64,
    cost: CostMode,
    cost_sup: f64,
    rate_floor: f64,
    decay: Vec<Vec<f64>>,
    gain: Vec<Vec<f64>>,
}

impl<'d> Sweeper<'d> {
    pub fn new(disc: &'d Discretization, alpha: f64) -> Result<Self> {
        Self::with_cost(disc, alpha, CostMode::Model)
    }

    pub fn with_cost(disc: &'d Discretization, alpha: f64, cost: CostMode) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("discount rate {alpha}")));
        }
        let grid = disc.grid();
        let n_actions = disc.n_actions();
        let (mut decay, mut gain) = (Vec::new(), Vec::new());
        for i in 0..disc.n_states() {
            let c = disc.coeffs(i);
            let mut d = Vec::with_capacity(grid.len() * n_actions);
            let mut g = Vec::with_capacity(grid.len() * n_actions);
            for k in 0..grid.len() {
                let h = grid.width(k);
                for a in 0..n_actions {
                    let r = alpha + c.total(k, a);
                    d.push(cell_decay(r, h));
                    g.push(cell_gain(r, h));
                }
            }
            decay.push(d);
            gain.push(g);
        }
        let bounds = disc.model().bounds();
        let cost_sup = match cost {
            CostMode::Model => bounds.max_cost,
            CostMode::Constant(v) => v.abs(),
        };
        Ok(Self { disc, alpha, cost, cost_sup, rate_floor: bounds.min_rate, decay, gain })
    }

    pub fn discretization(&self) -> &'d Discretization {
        self.disc
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn bound(&self, rho: f64, w: &[f64]) -> f64 {
        let w_sup = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        2.0 * ((self.cost_sup + rho.abs()) / self.alpha.max(self.rate_floor) + w_sup)
    }

    /// Runs action `a` backward through the grid cells in `cells`, starting
    /// from `q` at the right end. Calls `visit(k, q)` with the value at node `k`.
    #[inline]
    fn chain(
        &self,
        i: usize,
        a: usize,
        cells: Range<usize>,
        mut q: f64,
        w: &[f64],
        rho: f64,
        mut visit: impl FnMut(usize, f64),
    ) -> f64 {
        let coeffs = self.disc.coeffs(i);
        let targets = coeffs.targets();
        let n_actions = self.disc.n_actions();
        let (decay, gain) = (&self.decay[i], &self.gain[i]);
        for k in cells.rev() {
            let idx = k * n_actions + a;
            let mut drive = match self.cost {
                CostMode::Model => coeffs.cost(k, a),
                CostMode::Constant(v) => v,
            } - rho;
            for (&j, &r) in targets.iter().zip(coeffs.rates(k, a)) {
                drive += r * w[j];
            }
            q = q * decay[idx] + drive * gain[idx];
            visit(k, q);
        }
        q
    }

    fn run(&self, i: usize, w: &[f64], rho: f64, cells: &DecisionCells, mut trace: Option<&mut SweepTrace>) -> Result<f64> {
        let grid = self.disc.grid();
        let bound = self.bound(rho, w);
        let mut q_next = 0.0;
        for range in cells.ranges(grid).into_iter().rev() {
            let (mut best, mut best_a) = (f64::INFINITY, 0);
            for a in 0..self.disc.n_actions() {
                let q = self.chain(i, a, range.clone(), q_next, w, rho, |_, _| {});
                if q < best {
                    best = q;
                    best_a = a;
                }
            }
            if !best.is_finite() || best.abs() > bound {
                return Err(Error::DivergentSweep { state: i, value: best, bound });
            }
            if let Some(t) = trace.as_deref_mut() {
                let phi = &mut t.phi;
                self.chain(i, best_a, range.clone(), q_next, w, rho, |k, q| phi[k] = q);
                t.actions[range].iter_mut().for_each(|x| *x = best_a);
            }
            q_next = best;
        }
        Ok(q_next)
    }

    /// `phi_i(0)` for value vector `w` and running-cost offset `rho`.
    pub fn sweep(&self, i: usize, w: &[f64], rho: f64, cells: &DecisionCells) -> Result<f64> {
        self.run(i, w, rho, cells, None)
    }

    pub fn sweep_traced(&self, i: usize, w: &[f64], rho: f64, cells: &DecisionCells) -> Result<SweepTrace> {
        let n = self.disc.grid().len();
        let mut t = SweepTrace { value: 0.0, actions: vec![0; n], phi: vec![0.0; n] };
        t.value = self.run(i, w, rho, cells, Some(&mut t))?;
        Ok(t)
    }

    fn parallel(&self) -> bool {
        let d = self.disc;
        d.n_states() > 1 && d.n_states() * d.grid().len() * d.n_actions() >= PARALLEL_WORK
    }

    /// `(T W)(i)` for every state.
    pub fn bellman(&self, w: &[f64], rho: f64, cells: &DecisionCells) -> Result<Vec<f64>> {
        let n = self.disc.n_states();
        if self.parallel() {
            (0..n).into_par_iter().map(|i| self.sweep(i, w, rho, cells)).collect()
        } else {
            (0..n).map(|i| self.sweep(i, w, rho, cells)).collect()
        }
    }

    pub fn bellman_traced(&self, w: &[f64], rho: f64, cells: &DecisionCells) -> Result<Vec<SweepTrace>> {
        let n = self.disc.n_states();
        if self.parallel() {
            (0..n).into_par_iter().map(|i| self.sweep_traced(i, w, rho, cells)).collect()
        } else {
            (0..n).map(|i| self.sweep_traced(i, w, rho, cells)).collect()
        }
    }
}

/// One sweep for state `i` over fully age-dependent policies.
pub fn inner_age_sweep(disc: &Discretization, i: usize, w: &[f64], alpha: f64, rho: f64) -> Result<SweepTrace> {
    if w.len() != disc.n_states() {
        return Err(Error::InvalidArgument(format!("value vector has {} entries", w.len())));
    }
    Sweeper::new(disc, alpha)?.sweep_traced(i, w, rho, &DecisionCells::every_cell(disc.grid()))
}

/// Greedy deterministic policy read off a set of traces.
pub fn greedy_policy(grid: &AgeGrid, traces: &[SweepTrace]) -> AgePolicy {
    let actions = traces.iter().map(|t| t.actions.clone()).collect();
    AgePolicy::deterministic(grid.clone(), actions).expect("trace rows match the grid")
}

pub(crate) fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Clone, Debug)]
pub struct ViOptions {
    /// Target sup-norm distance to the fixed point.
    pub tol: f64,
    pub max_iter: usize,
    /// Decision cells; `None` means one per grid cell.
    pub cells: Option<DecisionCells>,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1_000_000, cells: None }
    }
}

#[derive(Clone, Debug)]
pub struct DiscountedSolution {
    pub alpha: f64,
    pub values: Vec<f64>,
    /// `phi_i` at the grid nodes from the last sweep.
    pub phi: Vec<Vec<f64>>,
    pub policy: AgePolicy,
    /// Last `||W_{n+1} - W_n||`.
    pub residual: f64,
    /// A posteriori bound on the distance to the fixed point.
    pub error_bound: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Value iteration from `W = 0`.
///
/// The operator is a contraction with modulus `kappa = M / (M + alpha)`, so
/// iteration stops once `||W_{n+1} - W_n|| <= tol (1 - kappa) / kappa`.
pub fn value_iteration(disc: &Discretization, alpha: f64, opts: &ViOptions) -> Result<DiscountedSolution> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("discount rate must be positive, got {alpha}")));
    }
    value_iteration_from(disc, alpha, opts, vec![0.0; disc.n_states()])
}

/// Value iteration from a given start vector.
pub fn value_iteration_from(
    disc: &Discretization,
    alpha: f64,
    opts: &ViOptions,
    start: Vec<f64>,
) -> Result<DiscountedSolution> {
    if start.len() != disc.n_states() {
        return Err(Error::InvalidArgument(format!("start vector has {} entries", start.len())));
    }
    let sweeper = Sweeper::new(disc, alpha)?;
    let cells = opts.cells.clone().unwrap_or_else(|| DecisionCells::every_cell(disc.grid()));
    let m = disc.model().bounds().max_rate;
    let kappa = m / (m + alpha);
    let stop = opts.tol * (1.0 - kappa) / kappa;
    let mut w = start;
    let mut history = Vec::new();
    loop {
        let last = history.len() + 1 >= opts.max_iter;
        let (next, traces) = if last {
            let traces = sweeper.bellman_traced(&w, 0.0, &cells)?;
            (traces.iter().map(|t| t.value).collect::<Vec<_>>(), Some(traces))
        } else {
            (sweeper.bellman(&w, 0.0, &cells)?, None)
        };
        let residual = sup_norm_diff(&next, &w);
        history.push(residual);
        w = next;
        if residual <= stop || last {
            if residual > stop {
                return Err(Error::MaxIterExceeded { iterations: history.len(), residual });
            }
            // The greedy policy and phi come from one more traced sweep at
            // the returned value when the loop stopped on an untraced step.
            let traces = match traces {
                Some(t) => t,
                None => sweeper.bellman_traced(&w, 0.0, &cells)?,
            };
            let policy = greedy_policy(disc.grid(), &traces);
            return Ok(DiscountedSolution {
                alpha,
                values: w,
                phi: traces.into_iter().map(|t| t.phi).collect(),
                policy,
                residual,
                error_bound: residual * kappa / (1.0 - kappa),
                iterations: history.len(),
                history,
            });
        }
    }
}

/// Solves `(I - D) J = f` for the tables of `policy`.
pub fn policy_value(disc: &Discretization, policy: &AgePolicy, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("discount rate must be positive, got {alpha}")));
    }
    let e = embed(disc, policy, alpha)?;
    let f: Vec<f64> = e.rows.iter().map(|r| r.f).collect();
    solve(&e.transfer_matrix(), &f)
}

fn solve(d: &[Vec<f64>], f: &[f64]) -> Result<Vec<f64>> {
    let n = f.len();
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - d[i][j]);
    let x = a
        .lu()
        .solve(&DVector::from_column_slice(f))
        .ok_or_else(|| Error::InvalidArgument("I - D is singular".into()))?;
    Ok(x.iter().copied().collect())
}

#[derive(Clone, Debug)]
pub struct BruteForce {
    /// Pointwise optimal values over the enumerated class.
    pub values: Vec<f64>,
    /// Policy minimizing the sum of state values.
    pub policy: AgePolicy,
    pub evaluated: usize,
}

/// Optimal discounted values by enumerating every deterministic policy that
/// is constant on each decision cell.
pub fn brute_force_value(disc: &Discretization, cells: &DecisionCells, alpha: f64) -> Result<BruteForce> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("discount rate must be positive, got {alpha}")));
    }
    let (n, n_actions, n_cells) = (disc.n_states(), disc.n_actions(), cells.len());
    let per_state = (n_actions as u128).checked_pow(n_cells as u32);
    let count = per_state.and_then(|p| p.checked_pow(n as u32)).unwrap_or(u128::MAX);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { count, limit: BRUTE_FORCE_LIMIT });
    }
    let per_state = per_state.expect("bounded by count") as usize;
    let grid = disc.grid();
    let ranges = cells.ranges(grid);
    let row_for = |mut code: usize| {
        let mut row = vec![0usize; grid.len()];
        for r in &ranges {
            let a = code % n_actions;
            code /= n_actions;
            row[r.clone()].iter_mut().for_each(|x| *x = a);
        }
        row
    };
    // (f, dense D row) for every state and row choice.
    let mut tables = Vec::with_capacity(n);
    for i in 0..n {
        let mut choices = Vec::with_capacity(per_state);
        for code in 0..per_state {
            let row: Vec<ActionDistribution> = row_for(code).into_iter().map(ActionDistribution::point).collect();
            let r = row_integrals(disc, i, &row, alpha, false)?;
            let mut dense = vec![0.0; n];
            for (&j, &x) in r.targets.iter().zip(&r.transfer) {
                dense[j] = x;
            }
            choices.push((r.cost, dense));
        }
        tables.push(choices);
    }
    let mut best = vec![f64::INFINITY; n];
    let (mut best_sum, mut best_codes) = (f64::INFINITY, vec![0usize; n]);
    let mut codes = vec![0usize; n];
    let mut evaluated = 0;
    loop {
        let d: Vec<Vec<f64>> = (0..n).map(|i| tables[i][codes[i]].1.clone()).collect();
        let f: Vec<f64> = (0..n).map(|i| tables[i][codes[i]].0).collect();
        let v = solve(&d, &f)?;
        evaluated += 1;
        for (b, x) in best.iter_mut().zip(&v) {
            *b = b.min(*x);
        }
        let sum: f64 = v.iter().sum();
        if sum < best_sum {
            best_sum = sum;
            best_codes.clone_from(&codes);
        }
        // Mixed-radix increment over the states.
        let mut s = 0;
        while s < n {
            codes[s] += 1;
            if codes[s] < per_state {
                break;
            }
            codes[s] = 0;
            s += 1;
        }
        if s == n {
            break;
        }
    }
    let policy = AgePolicy::deterministic(grid.clone(), best_codes.into_iter().map(row_for).collect())?;
    Ok(BruteForce { values: best, policy, evaluated })
}

/// Age-aware and age-blind optima of the same model.
#[derive(Clone, Debug)]
pub struct AgeComparison {
    pub aware: DiscountedSolution,
    pub blind: DiscountedSolution,
    /// `(V_blind - V_aware) / |V_blind|` per state, zero where `V_blind = 0`.
    pub relative_improvement: Vec<f64>,
}

pub fn compare_age_information(disc: &Discretization, alpha: f64, opts: &ViOptions) -> Result<AgeComparison> {
    let aware = value_iteration(disc, alpha, &ViOptions { cells: None, ..opts.clone() })?;
    let blind = value_iteration(disc, alpha, &ViOptions { cells: Some(DecisionCells::single()), ..opts.clone() })?;
    let relative_improvement = aware
        .values
        .iter()
        .zip(&blind.values)
        .map(|(a, b)| if *b == 0.0 { 0.0 } else { (b - a) / b.abs() })
        .collect();
    Ok(AgeComparison { aware, blind, relative_improvement })
}
