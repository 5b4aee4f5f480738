//! Pathwise simulation by thinning.
//!
//! Candidate epochs arrive at rate `M`. At a candidate with state `i`, age
//! `y` and current action `u`, a uniform `z` on `[0, M)` is compared with the
//! intervals of lengths `lambda_ij(y, u)` laid end to end in ascending `j`.
//! Landing in the interval of `j` moves the chain to `j` and resets the age;
//! landing past them all leaves the state alone.
//!
//! Under a relaxed policy an action is drawn at the start of each candidate
//! interval and again wherever the policy changes within it. That action
//! drives both the running cost and the next candidate test.
//!
//! Path `p` of a run with master seed `s` draws from ChaCha20 seeded with
//! `s` on stream `p`, so the output does not depend on the thread count.

use crate::error::{Error, Result};
use crate::model::{validate_model, A6Mode, ActionDistribution, TransitionRateModel};
use crate::policy::AgePolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

/// Longest age piece integrated by one Gauss-Legendre rule.
const MAX_PIECE: f64 = 0.25;

const GL_NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL_WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// Generator for path `index` of a run seeded with `master`.
pub fn path_rng(master: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    /// Run until calendar time `t`.
    Horizon(f64),
    /// Run until the `n`th jump.
    Jumps(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Event {
    Candidate { time: f64, state: usize, age: f64, accepted: bool },
    Jump {
        index: usize,
        time: f64,
        from: usize,
        to: usize,
        sojourn: f64,
        /// Undiscounted cost accumulated up to this jump.
        raw_cost: f64,
        discounted_cost: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSummary {
    pub end_time: f64,
    pub jumps: usize,
    pub candidates: u64,
    pub raw_cost: f64,
    pub discounted_cost: f64,
    pub final_state: usize,
    pub final_age: f64,
}

/// Thinning simulator of one model under one stationary policy.
pub struct Simulator<'a> {
    model: &'a TransitionRateModel,
    policy: &'a AgePolicy,
    majorant: f64,
    breakpoints: Vec<Vec<f64>>,
    switches: Vec<Vec<f64>>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a TransitionRateModel, policy: &'a AgePolicy) -> Result<Self> {
        if policy.n_states() != model.n_states() {
            return Err(Error::InvalidArgument(format!(
                "policy covers {} states, model has {}",
                policy.n_states(),
                model.n_states()
            )));
        }
        if policy.max_action() >= model.n_actions() {
            return Err(Error::InvalidArgument(format!("policy uses action {}", policy.max_action())));
        }
        let nodes = policy.grid().nodes();
        let kinks = model.age_breakpoints();
        let mut breakpoints = Vec::with_capacity(model.n_states());
        let mut switches = Vec::with_capacity(model.n_states());
        for i in 0..model.n_states() {
            let sw: Vec<f64> = policy.switch_cells(i).into_iter().skip(1).map(|k| nodes[k]).collect();
            let mut all: Vec<f64> = kinks.iter().chain(&sw).copied().collect();
            all.sort_by(f64::total_cmp);
            all.dedup();
            breakpoints.push(all);
            switches.push(sw);
        }
        Ok(Self { model, policy, majorant: model.bounds().max_rate, breakpoints, switches })
    }

    fn draw(nu: &ActionDistribution, rng: &mut impl Rng) -> usize {
        if let Some(a) = nu.as_point() {
            return a;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(a, w) in nu.weights() {
            acc += w;
            if u < acc {
                return a;
            }
        }
        nu.weights().last().expect("nonempty").0
    }

    /// Cost of holding state `i` over ages `[a, b)`, starting at time `t0`.
    /// Returns `(raw, discounted)` and leaves `action` as the one in force at `b`.
    fn hold_cost(
        &self,
        i: usize,
        a: f64,
        b: f64,
        t0: f64,
        alpha: f64,
        action: &mut usize,
        rng: &mut impl Rng,
    ) -> (f64, f64) {
        let bp = &self.breakpoints[i];
        let sw = &self.switches[i];
        let (mut raw, mut disc) = (0.0, 0.0);
        let mut s = a;
        let mut next_bp = bp.partition_point(|&x| x <= a);
        let mut next_sw = sw.partition_point(|&x| x <= a);
        while s < b {
            let stop = bp.get(next_bp).copied().unwrap_or(f64::INFINITY).min(b).min(s + MAX_PIECE);
            let (c, h) = (0.5 * (s + stop), 0.5 * (stop - s));
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let y = c + h * x;
                let v = w * h * self.model.cost(i, y, *action);
                raw += v;
                if alpha > 0.0 {
                    disc += v * (-alpha * (t0 + y - a)).exp();
                }
            }
            s = stop;
            if bp.get(next_bp) == Some(&s) {
                next_bp += 1;
            }
            if sw.get(next_sw) == Some(&s) && s < b {
                next_sw += 1;
                *action = Self::draw(self.policy.at(i, s), rng);
            }
        }
        if alpha == 0.0 {
            disc = raw;
        }
        (raw, disc)
    }

    /// Simulates from `(start, age 0)` at time 0.
    pub fn run(
        &self,
        start: usize,
        stop: Stop,
        alpha: f64,
        rng: &mut impl Rng,
        mut observe: impl FnMut(&Event),
    ) -> PathSummary {
        let m = self.majorant;
        let (mut t, mut t_jump, mut i) = (0.0f64, 0.0f64, start);
        let (mut raw, mut disc, mut jumps, mut candidates) = (0.0, 0.0, 0usize, 0u64);
        if let Stop::Jumps(0) = stop {
            return PathSummary { end_time: 0.0, jumps: 0, candidates: 0, raw_cost: 0.0, discounted_cost: 0.0, final_state: i, final_age: 0.0 };
        }
        let mut action = Self::draw(self.policy.at(i, 0.0), rng);
        loop {
            let gap = rng.sample::<f64, _>(Exp1) / m;
            let y0 = t - t_jump;
            if let Stop::Horizon(h) = stop {
                if t + gap >= h {
                    let (r, d) = self.hold_cost(i, y0, h - t_jump, t, alpha, &mut action, rng);
                    raw += r;
                    disc += d;
                    t = h;
                    break;
                }
            }
            let (r, d) = self.hold_cost(i, y0, y0 + gap, t, alpha, &mut action, rng);
            raw += r;
            disc += d;
            t += gap;
            candidates += 1;
            let y = t - t_jump;
            let z = rng.random::<f64>() * m;
            let mut acc = 0.0;
            let mut to = None;
            for &j in self.model.targets(i) {
                acc += self.model.rate(i, j, y, action);
                if z < acc {
                    to = Some(j);
                    break;
                }
            }
            observe(&Event::Candidate { time: t, state: i, age: y, accepted: to.is_some() });
            if let Some(j) = to {
                jumps += 1;
                observe(&Event::Jump {
                    index: jumps,
                    time: t,
                    from: i,
                    to: j,
                    sojourn: y,
                    raw_cost: raw,
                    discounted_cost: disc,
                });
                i = j;
                t_jump = t;
                if stop == Stop::Jumps(jumps) {
                    break;
                }
            }
            action = Self::draw(self.policy.at(i, t - t_jump), rng);
        }
        PathSummary {
            end_time: t,
            jumps,
            candidates,
            raw_cost: raw,
            discounted_cost: disc,
            final_state: i,
            final_age: t - t_jump,
        }
    }
}

/// Jump record of one path; index 0 is the start (`T_0 = 0`, `tau_0 = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub jump_times: Vec<f64>,
    pub states: Vec<usize>,
    pub sojourns: Vec<f64>,
    /// Undiscounted cost `Z(T_n)`.
    pub costs: Vec<f64>,
    pub summary: PathSummary,
}

/// One path up to time `horizon`, seeded with `seed` (stream 0).
pub fn simulate_path(
    model: &TransitionRateModel,
    policy: &AgePolicy,
    start: usize,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate(model, policy, start, Stop::Horizon(horizon), 0.0, seed)
}

/// [`simulate_path`] with a general stopping rule and discount rate.
pub fn simulate(
    model: &TransitionRateModel,
    policy: &AgePolicy,
    start: usize,
    stop: Stop,
    alpha: f64,
    seed: u64,
) -> Result<Trajectory> {
    check_start(model, start)?;
    match stop {
        Stop::Horizon(h) if !(h > 0.0) || !h.is_finite() => {
            return Err(Error::InvalidArgument(format!("horizon {h}")))
        }
        _ => {}
    }
    let sim = Simulator::new(model, policy)?;
    let mut tr = Trajectory {
        seed,
        jump_times: vec![0.0],
        states: vec![start],
        sojourns: vec![0.0],
        costs: vec![0.0],
        summary: PathSummary { end_time: 0.0, jumps: 0, candidates: 0, raw_cost: 0.0, discounted_cost: 0.0, final_state: start, final_age: 0.0 },
    };
    let mut rng = path_rng(seed, 0);
    tr.summary = sim.run(start, stop, alpha, &mut rng, |e| {
        if let Event::Jump { time, to, sojourn, raw_cost, .. } = *e {
            tr.jump_times.push(time);
            tr.states.push(to);
            tr.sojourns.push(sojourn);
            tr.costs.push(raw_cost);
        }
    });
    Ok(tr)
}

fn check_start(model: &TransitionRateModel, start: usize) -> Result<()> {
    if start >= model.n_states() {
        return Err(Error::InvalidArgument(format!("start state {start} out of range")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    /// Paths, replicas or cycles.
    pub n: usize,
    pub truncation_bound: f64,
}

/// Horizon whose truncation error `C_tilde e^{-alpha H} / alpha` equals `eps`.
pub fn discounted_horizon(max_cost: f64, alpha: f64, eps: f64) -> f64 {
    ((max_cost / (alpha * eps)).ln() / alpha).max(0.0)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ratio estimate `sum Y / sum tau` with delta-method standard error.
fn ratio_estimate(pairs: &[(f64, f64)]) -> McEstimate {
    let n = pairs.len();
    let (sy, st) = pairs.iter().fold((0.0, 0.0), |(a, b), (y, t)| (a + y, b + t));
    let r = sy / st;
    let se = if n < 2 {
        0.0
    } else {
        let tau_bar = st / n as f64;
        let s2 = pairs.iter().map(|(y, t)| (y - r * t).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (s2 / n as f64).sqrt() / tau_bar
    };
    McEstimate { mean: r, se, n, truncation_bound: 0.0 }
}

/// Discounted cost from `start` over `n_paths` paths cut at `horizon`.
pub fn mc_discounted(
    model: &TransitionRateModel,
    policy: &AgePolicy,
    alpha: f64,
    start: usize,
    n_paths: usize,
    horizon: f64,
    master_seed: u64,
) -> Result<McEstimate> {
    check_start(model, start)?;
    if !(alpha > 0.0) || !(horizon > 0.0) || n_paths == 0 {
        return Err(Error::InvalidArgument("need alpha > 0, horizon > 0 and at least one path".into()));
    }
    let sim = Simulator::new(model, policy)?;
    let costs: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(master_seed, p);
            sim.run(start, Stop::Horizon(horizon), alpha, &mut rng, |_| {}).discounted_cost
        })
        .collect();
    let (mean, se) = mean_se(&costs);
    let bound = model.bounds().max_cost * (-alpha * horizon).exp() / alpha;
    Ok(McEstimate { mean, se, n: n_paths, truncation_bound: bound })
}

#[derive(Clone, Debug)]
pub struct AverageMcOptions {
    pub start: usize,
    pub jumps_per_replica: usize,
    pub replicas: usize,
    /// Regeneration state for the cycle estimator.
    pub reference: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AverageEstimates {
    /// `Z(T_n) / T_n`, pooled over replicas.
    pub ratio: McEstimate,
    /// Cost per cycle over time per cycle between entries to the reference.
    pub cycle: Option<McEstimate>,
}

/// Long-run average cost under `policy`.
pub fn mc_average(
    model: &TransitionRateModel,
    policy: &AgePolicy,
    opts: &AverageMcOptions,
    master_seed: u64,
) -> Result<AverageEstimates> {
    check_start(model, opts.start)?;
    if opts.replicas < 2 || opts.jumps_per_replica == 0 {
        return Err(Error::InvalidArgument("need two or more replicas with at least one jump".into()));
    }
    if let Some(r) = opts.reference {
        check_start(model, r)?;
        let report = validate_model(model, &policy.grid().sample_ages(), A6Mode::Reference(r));
        if !report.a6.as_ref().is_some_and(|a| a.holds) {
            return Err(Error::A6Missing { reference: r, reason: "needed for regenerative cycles".into() });
        }
    }
    let sim = Simulator::new(model, policy)?;
    let runs: Vec<((f64, f64), Vec<(f64, f64)>)> = (0..opts.replicas as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(master_seed, p);
            let mut cycles = Vec::new();
            let mut mark = (opts.reference == Some(opts.start)).then_some((0.0, 0.0));
            let s = sim.run(opts.start, Stop::Jumps(opts.jumps_per_replica), 0.0, &mut rng, |e| {
                if let Event::Jump { time, to, raw_cost, .. } = *e {
                    if Some(to) == opts.reference {
                        if let Some((z0, t0)) = mark {
                            cycles.push((raw_cost - z0, time - t0));
                        }
                        mark = Some((raw_cost, time));
                    }
                }
            });
            ((s.raw_cost, s.end_time), cycles)
        })
        .collect();
    let totals: Vec<(f64, f64)> = runs.iter().map(|r| r.0).collect();
    let ratio = ratio_estimate(&totals);
    let cycle = opts.reference.map(|_| {
        let all: Vec<(f64, f64)> = runs.iter().flat_map(|r| r.1.iter().copied()).collect();
        if all.is_empty() {
            McEstimate { mean: f64::NAN, se: f64::NAN, n: 0, truncation_bound: 0.0 }
        } else {
            ratio_estimate(&all)
        }
    });
    Ok(AverageEstimates { ratio, cycle })
}
