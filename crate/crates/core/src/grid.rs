//! Discretization of the age axis.
//!
//! An [`AgeGrid`] has nodes `0 = y_0 < ... < y_K = y_max`. Node `k < K` owns the
//! cell `[y_k, y_{k+1})`; node `K` owns the frozen tail `[y_max, inf)`. Rates,
//! costs and actions are held constant on each cell: finite cells are
//! evaluated at their midpoint, the tail at `y_max`.

use crate::error::{Error, Result};
use crate::model::TransitionRateModel;

/// Target survival mass left beyond `y_max` in [`AgeGrid::for_model`].
pub const TAIL_MASS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AgeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AgeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes[0] != 0.0 {
            return Err(Error::InvalidArgument("age grid must start at 0".into()));
        }
        if nodes.iter().any(|y| !y.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("age nodes must be finite and strictly increasing".into()));
        }
        let k = nodes.len();
        let mut weights = vec![0.0; k];
        for c in 0..k.saturating_sub(1) {
            let h = nodes[c + 1] - nodes[c];
            weights[c] += 0.5 * h;
            weights[c + 1] += 0.5 * h;
        }
        Ok(Self { nodes, weights })
    }

    /// `n_cells` equal cells on `[0, y_max]`.
    pub fn uniform(y_max: f64, n_cells: usize) -> Result<Self> {
        if !(y_max > 0.0) || n_cells == 0 {
            return Err(Error::InvalidArgument(format!("uniform grid needs y_max > 0 and cells > 0 (got {y_max}, {n_cells})")));
        }
        let h = y_max / n_cells as f64;
        let nodes = (0..=n_cells)
            .map(|k| if k == n_cells { y_max } else { h * k as f64 })
            .collect();
        Self::from_nodes(nodes)
    }

    /// Uniform grid with step `step` whose horizon leaves survival mass at
    /// most [`TAIL_MASS`] under the model's lower rate bound.
    pub fn for_model(model: &TransitionRateModel, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("grid step {step}")));
        }
        let m = model.bounds().min_rate;
        let horizon = -TAIL_MASS.ln() / m;
        let n_cells = (horizon / step).ceil().max(1.0);
        if n_cells > 1e7 {
            return Err(Error::InvalidArgument(format!(
                "grid would need {n_cells} cells (m = {m}); give an explicit grid"
            )));
        }
        Self::uniform(n_cells * step, n_cells as usize)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weights on the nodes.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of nodes, which is also the number of cells including the tail.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of finite cells.
    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn y_max(&self) -> f64 {
        *self.nodes.last().expect("grid is nonempty")
    }

    /// Width of cell `k`; infinite for the tail.
    pub fn width(&self, k: usize) -> f64 {
        if k + 1 < self.nodes.len() {
            self.nodes[k + 1] - self.nodes[k]
        } else {
            f64::INFINITY
        }
    }

    /// Age at which cell `k` is frozen.
    pub fn eval_age(&self, k: usize) -> f64 {
        if k + 1 < self.nodes.len() {
            0.5 * (self.nodes[k] + self.nodes[k + 1])
        } else {
            self.y_max()
        }
    }

    /// Index of the cell containing age `y` (left-closed).
    pub fn cell_of(&self, y: f64) -> usize {
        self.nodes.partition_point(|&x| x <= y).saturating_sub(1)
    }

    /// Trapezoid integral of nodal values over `[0, y_max]`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Nodes and cell midpoints, the ages at which solvers evaluate the model.
    pub fn sample_ages(&self) -> Vec<f64> {
        let mut ages = Vec::with_capacity(2 * self.len());
        for k in 0..self.len() {
            ages.push(self.nodes[k]);
            if k < self.n_cells() {
                ages.push(self.eval_age(k));
            }
        }
        ages
    }
}

/// Partition of the grid cells into decision cells on which a policy must
/// use one action. Decision cell `c` covers grid cells `starts[c]..starts[c+1]`;
/// the last one runs through the tail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionCells {
    starts: Vec<usize>,
}

impl DecisionCells {
    /// One decision cell per grid cell (fully age-dependent policies).
    pub fn every_cell(grid: &AgeGrid) -> Self {
        Self { starts: (0..grid.len()).collect() }
    }

    /// A single decision cell: policies that ignore the age.
    pub fn single() -> Self {
        Self { starts: vec![0] }
    }

    /// Decision cells split at the grid nodes nearest to the given ages.
    pub fn split_at(grid: &AgeGrid, ages: &[f64]) -> Result<Self> {
        let mut starts = vec![0];
        for &y in ages {
            let k = grid.cell_of(y);
            let k = if k + 1 < grid.len() && (grid.nodes()[k + 1] - y) < (y - grid.nodes()[k]) { k + 1 } else { k };
            if k == 0 || starts.contains(&k) {
                return Err(Error::InvalidArgument(format!("split age {y} does not give a new cell")));
            }
            starts.push(k);
        }
        starts.sort_unstable();
        Ok(Self { starts })
    }

    pub fn from_starts(grid: &AgeGrid, starts: Vec<usize>) -> Result<Self> {
        if starts.first() != Some(&0)
            || starts.windows(2).any(|w| w[1] <= w[0])
            || *starts.last().unwrap() >= grid.len()
        {
            return Err(Error::InvalidArgument("decision cell starts must be increasing from 0".into()));
        }
        Ok(Self { starts })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Grid-cell ranges of the decision cells, in ascending age order.
    pub fn ranges(&self, grid: &AgeGrid) -> Vec<std::ops::Range<usize>> {
        let n = grid.len();
        self.starts
            .iter()
            .enumerate()
            .map(|(c, &s)| s..self.starts.get(c + 1).copied().unwrap_or(n))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_piecewise_linear() {
        let grid = AgeGrid::from_nodes(vec![0.0, 0.5, 2.0, 2.25, 4.0]).unwrap();
        // f(y) = 3y - 1 integrates to 3*8 - 4 = 20 on [0, 4].
        let values: Vec<f64> = grid.nodes().iter().map(|y| 3.0 * y - 1.0).collect();
        assert!((grid.integrate(&values) - 20.0).abs() < 1e-13);
        assert!(grid.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn uniform_grid_shape() {
        let g = AgeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.eval_age(1), 0.75);
        assert_eq!(g.eval_age(4), 2.0);
        assert_eq!(g.width(4), f64::INFINITY);
        assert_eq!(g.cell_of(0.5), 1);
        assert_eq!(g.cell_of(0.49), 0);
        assert_eq!(g.cell_of(7.0), 4);
    }

    #[test]
    fn model_grid_leaves_small_tail() {
        let m = TransitionRateModel::const2();
        let g = AgeGrid::for_model(&m, 0.01).unwrap();
        assert!((-g.y_max()).exp() <= TAIL_MASS);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(AgeGrid::from_nodes(vec![0.1, 1.0]).is_err());
        assert!(AgeGrid::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn decision_cell_ranges() {
        let g = AgeGrid::uniform(1.0, 10).unwrap();
        let cells = DecisionCells::split_at(&g, &[0.3, 0.7]).unwrap();
        assert_eq!(cells.ranges(&g), vec![0..3, 3..7, 7..11]);
        assert_eq!(DecisionCells::single().ranges(&g), vec![0..11]);
        assert_eq!(DecisionCells::every_cell(&g).len(), 11);
    }
}
