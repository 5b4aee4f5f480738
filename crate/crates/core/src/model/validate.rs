//! Machine checks of the standing assumptions on a model.
//!
//! Rates must be nonnegative with total exit rate in `[m, M]` (A1, A2), the
//! cost rate must lie in `[0, C_tilde]` (A4), and optionally some reference
//! state must be reachable from every other state at a rate bounded away
//! from zero (A6). Checks run on a finite set of sampled ages; violations are
//! reported as data, one entry per (assumption, state, target, action) with
//! the worst observed value.

use std::collections::BTreeMap;
use std::fmt;

use super::TransitionRateModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assumption {
    /// A rate is negative.
    RateSign,
    /// Total exit rate exceeds `M`.
    A1,
    /// Total exit rate falls below `m`.
    A2,
    /// Cost rate exceeds `C_tilde`.
    A4,
    /// Cost rate is negative.
    CostSign,
    /// Reachability of the reference state fails.
    A6,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::RateSign => "rate-sign",
            Assumption::A1 => "A1",
            Assumption::A2 => "A2",
            Assumption::A4 => "A4",
            Assumption::CostSign => "cost-sign",
            Assumption::A6 => "A6",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub state: usize,
    pub target: Option<usize>,
    pub age: Option<f64>,
    pub action: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state={}", self.state)?;
        if let Some(j) = self.target {
            write!(f, " target={j}")?;
        }
        if let Some(y) = self.age {
            write!(f, " age={y}")?;
        }
        if let Some(a) = self.action {
            write!(f, " action={a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub assumption: Assumption,
    pub location: Location,
    pub observed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum A6Mode {
    Skip,
    /// Check reachability of this state.
    Reference(usize),
    /// Try every state as the reference and keep the best.
    Search,
}

#[derive(Clone, Debug, PartialEq)]
pub struct A6Summary {
    pub reference: usize,
    /// Smallest sampled rate into the reference state (uniform over states).
    pub delta: f64,
    /// Per-state minima of the rate into the reference state.
    pub per_state_min: Vec<(usize, f64)>,
    pub holds: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub a6: Option<A6Summary>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, assumption: Assumption) -> bool {
        self.violations.iter().any(|v| v.assumption == assumption)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "passes: {}", self.passes())?;
        if let Some(a6) = &self.a6 {
            writeln!(
                f,
                "A6: reference={} delta={} holds={}",
                a6.reference, a6.delta, a6.holds
            )?;
        }
        for v in &self.violations {
            writeln!(f, "violation {} at {} observed={}", v.assumption, v.location, v.observed)?;
        }
        Ok(())
    }
}

type Key = (Assumption, usize, Option<usize>, Option<usize>);

#[derive(Default)]
struct Worst {
    entries: BTreeMap<Key, (f64, f64)>,
}

impl Worst {
    /// Keeps the most extreme observation per key; `larger_is_worse` picks the direction.
    fn record(&mut self, key: Key, age: f64, observed: f64, larger_is_worse: bool) {
        let entry = self.entries.entry(key).or_insert((age, observed));
        let worse = if larger_is_worse { observed > entry.1 } else { observed < entry.1 };
        if worse {
            *entry = (age, observed);
        }
    }

    fn into_violations(self) -> Vec<Violation> {
        self.entries
            .into_iter()
            .map(|((assumption, state, target, action), (age, observed))| Violation {
                assumption,
                location: Location { state, target, age: Some(age), action },
                observed,
            })
            .collect()
    }
}

// Rates summed from rounded parts may overshoot an exact bound by a few ulps.
const BOUND_RTOL: f64 = 1e-12;

/// Checks the model on `states x age_samples x actions`.
pub fn validate_model(model: &TransitionRateModel, age_samples: &[f64], a6: A6Mode) -> ValidationReport {
    let b = model.bounds();
    let n = model.n_states();
    let mut worst = Worst::default();

    for i in 0..n {
        for a in 0..model.n_actions() {
            for &y in age_samples {
                let mut total = 0.0;
                for j in (0..n).filter(|&j| j != i) {
                    let r = model.rate(i, j, y, a);
                    if !(r >= 0.0) {
                        worst.record((Assumption::RateSign, i, Some(j), Some(a)), y, r, false);
                    }
                    total += r;
                }
                if total > b.max_rate * (1.0 + BOUND_RTOL) {
                    worst.record((Assumption::A1, i, None, Some(a)), y, total, true);
                }
                if !(total >= b.min_rate * (1.0 - BOUND_RTOL)) {
                    worst.record((Assumption::A2, i, None, Some(a)), y, total, false);
                }
                let c = model.cost(i, y, a);
                if c > b.max_cost * (1.0 + BOUND_RTOL) {
                    worst.record((Assumption::A4, i, None, Some(a)), y, c, true);
                }
                if !(c >= 0.0) {
                    worst.record((Assumption::CostSign, i, None, Some(a)), y, c, false);
                }
            }
        }
    }

    let mut violations = worst.into_violations();
    let summary = match a6 {
        A6Mode::Skip => None,
        A6Mode::Reference(r) => {
            let (summary, v) = check_a6(model, age_samples, r);
            violations.extend(v);
            Some(summary)
        }
        A6Mode::Search => {
            let mut best: Option<(A6Summary, Vec<Violation>)> = None;
            for r in 0..n {
                let candidate = check_a6(model, age_samples, r);
                let better = match &best {
                    None => true,
                    Some((cur, _)) => {
                        (candidate.0.holds && !cur.holds)
                            || (candidate.0.holds == cur.holds && candidate.0.delta > cur.delta)
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
            best.map(|(summary, v)| {
                violations.extend(v);
                summary
            })
        }
    };
    ValidationReport { violations, a6: summary }
}

fn check_a6(model: &TransitionRateModel, ages: &[f64], reference: usize) -> (A6Summary, Vec<Violation>) {
    let n = model.n_states();
    let mut violations = Vec::new();
    let mut per_state_min = Vec::new();
    for i in (0..n).filter(|&i| i != reference) {
        let mut lo = f64::INFINITY;
        let mut at = (0.0, 0);
        for a in 0..model.n_actions() {
            for &y in ages {
                let r = model.rate(i, reference, y, a);
                if r < lo {
                    lo = r;
                    at = (y, a);
                }
            }
        }
        per_state_min.push((i, lo));
        if !(lo > 0.0) {
            violations.push(Violation {
                assumption: Assumption::A6,
                location: Location { state: i, target: Some(reference), age: Some(at.0), action: Some(at.1) },
                observed: lo,
            });
        }
        // A rate that is ever positive must be bounded away from zero.
        for j in (0..n).filter(|&j| j != i && j != reference) {
            let mut sup = 0.0f64;
            let mut inf = f64::INFINITY;
            let mut inf_at = (0.0, 0);
            for a in 0..model.n_actions() {
                for &y in ages {
                    let r = model.rate(i, j, y, a);
                    sup = sup.max(r);
                    if r < inf {
                        inf = r;
                        inf_at = (y, a);
                    }
                }
            }
            if sup > 0.0 && !(inf > 0.0) {
                violations.push(Violation {
                    assumption: Assumption::A6,
                    location: Location { state: i, target: Some(j), age: Some(inf_at.0), action: Some(inf_at.1) },
                    observed: inf,
                });
            }
        }
    }
    // The reference state itself must satisfy the same positivity condition.
    for j in (0..n).filter(|&j| j != reference) {
        let mut sup = 0.0f64;
        let mut inf = f64::INFINITY;
        for a in 0..model.n_actions() {
            for &y in ages {
                let r = model.rate(reference, j, y, a);
                sup = sup.max(r);
                inf = inf.min(r);
            }
        }
        if sup > 0.0 && !(inf > 0.0) {
            violations.push(Violation {
                assumption: Assumption::A6,
                location: Location { state: reference, target: Some(j), age: None, action: None },
                observed: inf,
            });
        }
    }
    let delta = per_state_min.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let summary = A6Summary { reference, delta, per_state_min, holds: violations.is_empty() };
    (summary, violations)
}
