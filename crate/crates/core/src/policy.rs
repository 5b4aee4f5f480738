use crate::error::{Error, Result};
use crate::grid::AgeGrid;
use crate::model::ActionDistribution;

/// Stationary policy `u(i, y)`: per state, one action distribution per grid
/// cell, piecewise constant and left-closed in age, constant beyond `y_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgePolicy {
    grid: AgeGrid,
    rows: Vec<Vec<ActionDistribution>>,
}

impl AgePolicy {
    pub fn new(grid: AgeGrid, rows: Vec<Vec<ActionDistribution>>) -> Result<Self> {
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != grid.len()) {
            return Err(Error::InvalidArgument(format!(
                "policy row {i} has {} entries for {} grid cells",
                row.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, rows })
    }

    pub fn deterministic(grid: AgeGrid, actions: Vec<Vec<usize>>) -> Result<Self> {
        let rows = actions
            .into_iter()
            .map(|row| row.into_iter().map(ActionDistribution::point).collect())
            .collect();
        Self::new(grid, rows)
    }

    /// Same distribution everywhere.
    pub fn constant(grid: AgeGrid, n_states: usize, nu: ActionDistribution) -> Self {
        let rows = vec![vec![nu; grid.len()]; n_states];
        Self { grid, rows }
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[ActionDistribution] {
        &self.rows[i]
    }

    pub fn at(&self, i: usize, y: f64) -> &ActionDistribution {
        &self.rows[i][self.grid.cell_of(y)]
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().flatten().all(|d| d.as_point().is_some())
    }

    /// Cells where the distribution of state `i` changes, including cell 0.
    pub fn switch_cells(&self, i: usize) -> Vec<usize> {
        let row = &self.rows[i];
        (0..row.len()).filter(|&k| k == 0 || row[k] != row[k - 1]).collect()
    }

    /// Largest action index referenced, for bounds checks against a model.
    pub fn max_action(&self) -> usize {
        self.rows.iter().flatten().map(ActionDistribution::max_action).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_left_closed_with_constant_tail() {
        let grid = AgeGrid::uniform(1.0, 2).unwrap();
        let p = AgePolicy::deterministic(grid, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(p.at(0, 0.0).as_point(), Some(0));
        assert_eq!(p.at(0, 0.5).as_point(), Some(1));
        assert_eq!(p.at(0, 0.99).as_point(), Some(1));
        assert_eq!(p.at(0, 1.0).as_point(), Some(2));
        assert_eq!(p.at(0, 50.0).as_point(), Some(2));
        assert_eq!(p.switch_cells(0), vec![0, 1, 2]);
        assert!(p.is_deterministic());
    }

    #[test]
    fn row_length_is_checked() {
        let grid = AgeGrid::uniform(1.0, 2).unwrap();
        assert!(AgePolicy::deterministic(grid, vec![vec![0, 1]]).is_err());
    }
}
