//! Real functions sampled on a uniform grid over a closed interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("a grid needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("interval [{lo}, {hi}] is empty or not finite")]
    BadInterval { lo: f64, hi: f64 },
    #[error("value count {values} does not match node count {nodes}")]
    LengthMismatch { values: usize, nodes: usize },
    #[error("grids differ")]
    GridMismatch,
    #[error("anchor {0} is not a grid node")]
    AnchorNotNode(f64),
}

/// Uniform nodes `lo + i·(hi - lo)/(count - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self, GridError> {
        if count < 2 {
            return Err(GridError::TooFewNodes(count));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GridError::BadInterval { lo, hi });
        }
        Ok(UniformGrid { lo, hi, count })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.node(i))
    }

    /// Index of the node equal to `x` (to within a millionth of a spacing).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let pos = (x - self.lo) / self.spacing();
        let i = pos.round();
        if i < 0.0 || i as usize >= self.count || (pos - i).abs() > 1e-6 {
            return None;
        }
        Some(i as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.count {
            return Err(GridError::LengthMismatch {
                values: values.len(),
                nodes: grid.count,
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        GridFunction { grid, values }
    }

    pub fn constant(grid: UniformGrid, c: f64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.count],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.nodes().zip(self.values.iter().copied())
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cumulative trapezoid integral anchored at the node `anchor`:
    /// `out(x_i) = ∫_anchor^{x_i} self`, negative orientation left of the
    /// anchor.
    pub fn cumulative_integral(&self, anchor: f64) -> Result<GridFunction, GridError> {
        let c = self
            .grid
            .node_index(anchor)
            .ok_or(GridError::AnchorNotNode(anchor))?;
        let h = self.grid.spacing();
        let v = &self.values;
        let mut out = vec![0.0; v.len()];
        for i in c + 1..v.len() {
            out[i] = out[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
        }
        for i in (0..c).rev() {
            out[i] = out[i + 1] - 0.5 * h * (v[i] + v[i + 1]);
        }
        Ok(GridFunction {
            grid: self.grid,
            values: out,
        })
    }

    /// CSV with header `x,value`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "value"]).expect("in-memory write");
        for (x, v) in self.nodes() {
            w.write_record([x.to_string(), v.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}
