//! Nodal fields over a [`GridDomain`].

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::grid::GridDomain;
use crate::tensor::QTensor;

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!("field has {} values, grid has {} nodes", values.len(), grid.len()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<GridDomain>) -> Self {
        let values = vec![0.0; grid.len()];
        ScalarField { grid, values }
    }

    pub fn from_fn(grid: Arc<GridDomain>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.xy(k);
                f(x, y)
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Value at the lattice node `(x, y)`.
    pub fn at(&self, x: f64, y: f64) -> Option<f64> {
        self.grid.node_at(x, y).map(|k| self.values[k])
    }

    pub fn at_origin(&self) -> f64 {
        self.values[self.grid.origin()]
    }

    /// Max-norm distance over non-exterior nodes.
    pub fn max_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(k, _)| self.grid.is_interior(*k) || self.grid.is_boundary(*k))
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct TensorField {
    grid: Arc<GridDomain>,
    values: Vec<QTensor>,
}

impl TensorField {
    pub fn new(grid: Arc<GridDomain>, values: Vec<QTensor>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!("field has {} values, grid has {} nodes", values.len(), grid.len()));
        }
        Ok(TensorField { grid, values })
    }

    pub fn from_fn(grid: Arc<GridDomain>, mut f: impl FnMut(f64, f64) -> QTensor) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.xy(k);
                f(x, y)
            })
            .collect();
        TensorField { grid, values }
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn values(&self) -> &[QTensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [QTensor] {
        &mut self.values
    }

    pub fn value(&self, k: usize) -> QTensor {
        self.values[k]
    }

    pub fn at_origin(&self) -> QTensor {
        self.values[self.grid.origin()]
    }

    pub(crate) fn flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|q| q.0).collect()
    }

    pub(crate) fn from_flat(grid: Arc<GridDomain>, flat: &[f64]) -> Self {
        let values = (0..grid.len())
            .map(|k| QTensor([flat[5 * k], flat[5 * k + 1], flat[5 * k + 2], flat[5 * k + 3], flat[5 * k + 4]]))
            .collect();
        TensorField { grid, values }
    }
}
