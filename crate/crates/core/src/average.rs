//! Long-run average cost.
//!
//! Two independent routes to the gain `g` and bias `h` of the average-cost
//! optimality equation
//!
//! ```text
//! h(i) = min_r [ phi(i,r) - g tau(i,r) + sum_j p(i,j;r) h(j) ],   h(ref) = 0
//! ```
//!
//! * [`vanishing_discount`]: `g = lim alpha V_alpha(ref)` and
//!   `h = lim V_alpha - V_alpha(ref)` along a decreasing discount sequence.
//! * [`renewal_bisection`]: for a candidate `g`, `psi_g` is the optimal
//!   cost-minus-`g`-time until the first entry to `ref`; the cycle value
//!   `Phi(g)` is nonincreasing and vanishes at the optimal gain.

use crate::discounted::{greedy_policy, sup_norm_diff, value_iteration_from, CostMode, Sweeper, ViOptions};
use crate::error::{Error, Result};
use crate::grid::DecisionCells;
use crate::model::{validate_model, A6Mode};
use crate::policy::AgePolicy;
use crate::reduction::Discretization;

#[derive(Clone, Debug)]
pub struct AverageOptions {
    pub reference: usize,
    /// Largest accepted gap between the last two `alpha V_alpha(ref)`.
    pub tol: f64,
    /// Stop bisecting once `|Phi(g)|` is below this.
    pub bisection_tol: f64,
    /// Accuracy of each discounted solve in the vanishing-discount sequence.
    pub vi_tol: f64,
    /// Accuracy of the stopped (first-passage) problems.
    pub stopped_tol: f64,
    pub max_iter: usize,
    pub cells: Option<DecisionCells>,
}

impl Default for AverageOptions {
    fn default() -> Self {
        Self {
            reference: 0,
            tol: 1e-3,
            bisection_tol: 1e-8,
            vi_tol: 1e-6,
            stopped_tol: 1e-9,
            max_iter: 2_000_000,
            cells: None,
        }
    }
}

impl AverageOptions {
    fn cells(&self, disc: &Discretization) -> DecisionCells {
        self.cells.clone().unwrap_or_else(|| DecisionCells::every_cell(disc.grid()))
    }
}

/// Ten halvings starting from 0.2.
pub fn default_alpha_seq() -> Vec<f64> {
    (0..10).map(|k| 0.2 / f64::powi(2.0, k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaRecord {
    pub alpha: f64,
    pub alpha_v_ref: f64,
    pub max_abs_h: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectionStep {
    pub g: f64,
    pub phi: f64,
}

#[derive(Clone, Debug)]
pub struct AverageSolution {
    pub gain: f64,
    /// Bias with `bias[reference] = 0`.
    pub bias: Vec<f64>,
    pub reference: usize,
    pub policy: AgePolicy,
    /// Sup-norm residual of the optimality equation at `(gain, bias)`.
    pub residual: f64,
    /// Vanishing discount only.
    pub diagnostics: Vec<AlphaRecord>,
    /// Renewal bisection only.
    pub trace: Vec<BisectionStep>,
}

fn check_reference(disc: &Discretization, reference: usize) -> Result<()> {
    if reference >= disc.n_states() {
        return Err(Error::InvalidArgument(format!("reference state {reference} out of range")));
    }
    Ok(())
}

/// Vanishing-discount limit along `alpha_seq`.
///
/// Each discounted solve starts from `g_prev / alpha + h_prev`, the
/// asymptotic shape of `V_alpha`, where the previous solve supplies
/// `g_prev` and `h_prev`.
pub fn vanishing_discount(disc: &Discretization, alpha_seq: &[f64], opts: &AverageOptions) -> Result<AverageSolution> {
    check_reference(disc, opts.reference)?;
    if alpha_seq.len() < 2 {
        return Err(Error::InvalidArgument("need at least two discount rates".into()));
    }
    if alpha_seq.iter().any(|&a| !(a > 0.0)) || alpha_seq.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("discount rates must be positive and decreasing".into()));
    }
    let r = opts.reference;
    let vi = ViOptions { tol: opts.vi_tol, max_iter: opts.max_iter, cells: opts.cells.clone() };
    let mut diagnostics = Vec::with_capacity(alpha_seq.len());
    let mut start = vec![0.0; disc.n_states()];
    let mut last = None;
    for &alpha in alpha_seq {
        let sol = value_iteration_from(disc, alpha, &vi, start)?;
        let g = alpha * sol.values[r];
        let h: Vec<f64> = sol.values.iter().map(|v| v - sol.values[r]).collect();
        diagnostics.push(AlphaRecord {
            alpha,
            alpha_v_ref: g,
            max_abs_h: h.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            iterations: sol.iterations,
        });
        start = h.iter().map(|x| x + g / alpha).collect();
        last = Some((g, h, sol.policy));
    }
    let (gain, bias, policy) = last.expect("sequence is nonempty");
    let n = diagnostics.len();
    let gap = (diagnostics[n - 1].alpha_v_ref - diagnostics[n - 2].alpha_v_ref).abs();
    if !(gap <= opts.tol) {
        return Err(Error::NotConverging { gap, tol: opts.tol });
    }
    let residual = acoe_residual(disc, gain, &bias, r, opts.cells.as_ref())?;
    Ok(AverageSolution { gain, bias, reference: r, policy, residual, diagnostics, trace: Vec::new() })
}

/// Value iteration on the problem stopped at `reference` (value 0 there):
/// `W(i) <- sweep(i, W, alpha = 0, rho)` for `i != reference`. Stops once a
/// step moves `W` by at most `step_tol`.
fn stopped_iteration(
    sweeper: &Sweeper<'_>,
    reference: usize,
    rho: f64,
    cells: &DecisionCells,
    mut w: Vec<f64>,
    step_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    w[reference] = 0.0;
    let n = w.len();
    for it in 1..=max_iter {
        let mut next = sweeper.bellman(&w, rho, cells)?;
        next[reference] = 0.0;
        let step = sup_norm_diff(&next, &w);
        w = next;
        let scale = w.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if step <= step_tol.max(16.0 * f64::EPSILON * scale * n as f64) {
            return Ok(w);
        }
        if it == max_iter {
            return Err(Error::MaxIterExceeded { iterations: it, residual: step });
        }
    }
    Err(Error::MaxIterExceeded { iterations: 0, residual: f64::INFINITY })
}

/// Reachability constant of `reference`, or [`Error::A6Missing`].
fn reach_delta(disc: &Discretization, reference: usize) -> Result<f64> {
    let report = validate_model(disc.model(), &disc.grid().sample_ages(), A6Mode::Reference(reference));
    let a6 = report.a6.expect("requested");
    if !a6.holds {
        let reason = match a6.per_state_min.iter().find(|(_, d)| !(*d > 0.0)) {
            Some((i, d)) => format!("rate from state {i} into the reference reaches {d}"),
            None => "a transition rate is positive at some ages and zero at others".into(),
        };
        return Err(Error::A6Missing { reference, reason });
    }
    Ok(a6.delta)
}

/// Renewal bisection on `[g_lo, g_hi]` (the natural bracket is `[0, C_tilde]`).
pub fn renewal_bisection(disc: &Discretization, g_lo: f64, g_hi: f64, opts: &AverageOptions) -> Result<AverageSolution> {
    check_reference(disc, opts.reference)?;
    if !(g_lo <= g_hi) {
        return Err(Error::InvalidArgument(format!("empty gain bracket [{g_lo}, {g_hi}]")));
    }
    let r = opts.reference;
    let delta = reach_delta(disc, r)?;
    let big_m = disc.model().bounds().max_rate;
    let step_tol = opts.stopped_tol * delta / big_m;
    let cells = opts.cells(disc);
    let sweeper = Sweeper::new(disc, 0.0)?;

    let mut psi = vec![0.0; disc.n_states()];
    let mut trace = Vec::new();
    let eval = |g: f64, start: Vec<f64>, trace: &mut Vec<BisectionStep>| -> Result<(f64, Vec<f64>)> {
        let psi = stopped_iteration(&sweeper, r, g, &cells, start, step_tol, opts.max_iter)?;
        let phi = sweeper.sweep(r, &psi, g, &cells)?;
        trace.push(BisectionStep { g, phi });
        Ok((phi, psi))
    };

    let (phi_lo, psi_lo) = eval(g_lo, psi, &mut trace)?;
    if phi_lo < -opts.bisection_tol {
        return Err(Error::BisectionBracketFailure { g: g_lo, phi: phi_lo });
    }
    let mut g = g_lo;
    psi = psi_lo;
    if phi_lo > opts.bisection_tol {
        let (phi_hi, psi_hi) = eval(g_hi, psi.clone(), &mut trace)?;
        if phi_hi > opts.bisection_tol {
            return Err(Error::BisectionBracketFailure { g: g_hi, phi: phi_hi });
        }
        g = g_hi;
        psi = psi_hi;
        if phi_hi < -opts.bisection_tol {
            let (mut lo, mut hi) = (g_lo, g_hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (phi, next) = eval(mid, psi, &mut trace)?;
                psi = next;
                g = mid;
                if phi.abs() <= opts.bisection_tol || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                    break;
                }
                if phi > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    let traces = sweeper.bellman_traced(&psi, g, &cells)?;
    let policy = greedy_policy(disc.grid(), &traces);
    let residual = acoe_residual(disc, g, &psi, r, opts.cells.as_ref())?;
    Ok(AverageSolution { gain: g, bias: psi, reference: r, policy, residual, diagnostics: Vec::new(), trace })
}

/// `max_i |rhs(i) - h(i)|` for the optimality equation, after shifting `h` so
/// that `h(reference) = 0`.
pub fn acoe_residual(
    disc: &Discretization,
    g: f64,
    h: &[f64],
    reference: usize,
    cells: Option<&DecisionCells>,
) -> Result<f64> {
    check_reference(disc, reference)?;
    if h.len() != disc.n_states() {
        return Err(Error::InvalidArgument(format!("bias has {} entries", h.len())));
    }
    let shifted: Vec<f64> = h.iter().map(|x| x - h[reference]).collect();
    let cells = cells.cloned().unwrap_or_else(|| DecisionCells::every_cell(disc.grid()));
    let rhs = Sweeper::new(disc, 0.0)?.bellman(&shifted, g, &cells)?;
    Ok(sup_norm_diff(&rhs, &shifted))
}

/// Largest expected time to reach `reference` over all policies, from each
/// state (for the reference itself: the return time).
pub fn sup_hitting_times(disc: &Discretization, reference: usize, opts: &AverageOptions) -> Result<Vec<f64>> {
    check_reference(disc, reference)?;
    let delta = reach_delta(disc, reference)?;
    let big_m = disc.model().bounds().max_rate;
    let cells = opts.cells(disc);
    let sweeper = Sweeper::with_cost(disc, 0.0, CostMode::Constant(-1.0))?;
    let w = stopped_iteration(
        &sweeper,
        reference,
        0.0,
        &cells,
        vec![0.0; disc.n_states()],
        opts.stopped_tol * delta / big_m,
        opts.max_iter,
    )?;
    let ret = -sweeper.sweep(reference, &w, 0.0, &cells)?;
    Ok(w.iter().enumerate().map(|(i, &x)| if i == reference { ret } else { -x }).collect())
}

/// Envelope `K * C_tilde` for `sup_i |V_alpha(i) - V_alpha(ref)|`, with `K`
/// the largest of [`sup_hitting_times`].
pub fn bias_envelope(disc: &Discretization, reference: usize, opts: &AverageOptions) -> Result<f64> {
    let k = sup_hitting_times(disc, reference, opts)?.into_iter().fold(0.0f64, f64::max);
    Ok(k * disc.model().bounds().max_cost)
}
