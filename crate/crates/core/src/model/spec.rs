//! Serializable model description.
//!
//! A model file is a JSON document of the form
//!
//! ```json
//! {
//!   "type": "shock",
//!   "states": 3,
//!   "actions": { "dims": [{ "lo": 0.5, "hi": 2.0, "n": 4 }] },
//!   "rates": { "builtin": {} },
//!   "cost": { "builtin": { "holding": { "kind": "linear", "coef": 1.0 } } },
//!   "bounds": { "M": 2.0, "m": 0.5, "C_tilde": 2.0 }
//! }
//! ```
//!
//! `bounds` is optional; when absent the analytic bounds of the family (or the
//! extremes of the tables) are used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Const2,
    AgePure,
    Queueing,
    Shock,
    ShockModified,
    Table,
}

impl ModelKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "const2" => Self::Const2,
            "age_pure" => Self::AgePure,
            "queueing" => Self::Queueing,
            "shock" => Self::Shock,
            "shock_modified" => Self::ShockModified,
            "table" => Self::Table,
            other => return Err(Error::UnknownModel(other.to_string())),
        })
    }
}

/// One action dimension discretized as `n` equally spaced points on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDim {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl ActionDim {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn singleton(value: f64) -> Self {
        Self { lo: value, hi: value, n: 1 }
    }

    /// Grid points; a single point sits at `lo`.
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n)
            .map(|k| if k + 1 == self.n { self.hi } else { self.lo + step * k as f64 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpec {
    /// Cartesian product of per-dimension grids, last dimension varying fastest.
    Dims(Vec<ActionDim>),
    /// Explicit list of action points.
    List(Vec<Vec<f64>>),
}

impl Default for ActionSpec {
    fn default() -> Self {
        ActionSpec::List(vec![vec![0.0]])
    }
}

impl ActionSpec {
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            ActionSpec::List(points) => {
                if points.is_empty() {
                    return Err(Error::InvalidModel("action list is empty".into()));
                }
                Ok(points.clone())
            }
            ActionSpec::Dims(dims) => {
                if dims.is_empty() {
                    return Err(Error::InvalidModel("action grid has no dimensions".into()));
                }
                let mut points: Vec<Vec<f64>> = vec![Vec::new()];
                for (d, dim) in dims.iter().enumerate() {
                    if dim.n == 0 {
                        return Err(Error::InvalidModel(format!("action dim {d} has n = 0")));
                    }
                    if !(dim.lo.is_finite() && dim.hi.is_finite()) || dim.hi < dim.lo {
                        return Err(Error::InvalidModel(format!(
                            "action dim {d}: need lo <= hi, got [{}, {}]",
                            dim.lo, dim.hi
                        )));
                    }
                    if dim.n > 1 && dim.hi <= dim.lo {
                        return Err(Error::InvalidModel(format!(
                            "action dim {d}: {} points need lo < hi",
                            dim.n
                        )));
                    }
                    let values = dim.points();
                    points = points
                        .into_iter()
                        .flat_map(|prefix| {
                            values.iter().map(move |&v| {
                                let mut p = prefix.clone();
                                p.push(v);
                                p
                            })
                        })
                        .collect();
                }
                Ok(points)
            }
        }
    }
}

/// Parameters of the built-in rate families. Only `age_pure` has any.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuiltinRates {
    /// Age past which the `age_pure` up-rate `1 + y` stops growing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_cap: Option<f64>,
}

/// Piecewise-linear (in age) rates on shared knots, constant beyond the last knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub knots: Vec<f64>,
    pub entries: Vec<RateEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub from: usize,
    pub to: usize,
    /// `values[action][knot]`; a single row applies to every action.
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSpec {
    Builtin(BuiltinRates),
    Table(RateTable),
}

impl Default for RateSpec {
    fn default() -> Self {
        RateSpec::Builtin(BuiltinRates::default())
    }
}

/// Holding/operating cost rate `b(i, y)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HoldingCost {
    #[default]
    Zero,
    /// `coef * i`
    Linear { coef: f64 },
    /// `coef * i * (1 + min(y, cap))`
    AgeSaturating { coef: f64, cap: f64 },
}

impl HoldingCost {
    pub fn eval(&self, i: usize, y: f64) -> f64 {
        match *self {
            HoldingCost::Zero => 0.0,
            HoldingCost::Linear { coef } => coef * i as f64,
            HoldingCost::AgeSaturating { coef, cap } => coef * i as f64 * (1.0 + y.min(cap)),
        }
    }

    pub fn sup(&self, i: usize) -> f64 {
        match *self {
            HoldingCost::AgeSaturating { coef, cap } => {
                self.eval(i, 0.0).max(coef * i as f64 * (1.0 + cap))
            }
            _ => self.eval(i, 0.0),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            HoldingCost::AgeSaturating { cap, .. } => vec![cap],
            _ => Vec::new(),
        }
    }
}

/// Affine action cost `slope * u + intercept`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionCost {
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub intercept: f64,
}

impl ActionCost {
    pub fn eval(&self, u: f64) -> f64 {
        self.slope * u + self.intercept
    }
}

/// Cost components of the built-in families.
///
/// Queueing: `b(i,y) - income(gamma) + service(mu)`.
/// Shock families: `b(i,y) + maintenance(mu)`.
/// `const2` and `age_pure` ignore these and use `c(i) = i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuiltinCost {
    #[serde(default)]
    pub holding: HoldingCost,
    #[serde(default)]
    pub income: ActionCost,
    #[serde(default)]
    pub service: ActionCost,
    #[serde(default)]
    pub maintenance: ActionCost,
}

/// Piecewise-linear cost table `values[state][action][knot]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub knots: Vec<f64>,
    pub values: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    Builtin(BuiltinCost),
    Table(CostTable),
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec::Builtin(BuiltinCost::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Upper bound on the total exit rate.
    #[serde(rename = "M")]
    pub max_rate: f64,
    /// Lower bound on the total exit rate.
    #[serde(rename = "m")]
    pub min_rate: f64,
    /// Upper bound on the cost rate.
    #[serde(rename = "C_tilde")]
    pub max_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    pub states: usize,
    #[serde(default)]
    pub actions: ActionSpec,
    #[serde(default)]
    pub rates: RateSpec,
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
}

impl ModelFile {
    pub fn builtin(kind: ModelKind, states: usize, actions: ActionSpec, cost: BuiltinCost) -> Self {
        Self {
            kind,
            states,
            actions,
            rates: RateSpec::default(),
            cost: CostSpec::Builtin(cost),
            bounds: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
