//! Centralized solver tolerances and conjugate-sampling grids.
//!
//! Every iterative routine in the crate reads its stopping thresholds from
//! one `SolverConfig` record so that a scenario file can tighten or relax the
//! whole pipeline coherently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric tolerances shared by all solvers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Constraint / simplex feasibility threshold.
    pub feasibility_tol: f64,
    /// Optimality threshold (Wolfe criterion, KKT residuals).
    pub optimality_tol: f64,
    /// Bracket width for scalar root finding and bisection.
    pub bisection_tol: f64,
    /// Target accuracy of the primal projection (alternating projections).
    pub projection_tol: f64,
    /// Cone membership threshold (Farkas, coderivative, stationarity).
    pub membership_tol: f64,
    /// Safety cap on iterations of any single solver loop.
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            bisection_tol: 1e-9,
            projection_tol: 1e-7,
            membership_tol: 1e-7,
            max_iterations: 20_000,
        }
    }
}

/// Rectangular sampling grid in decision space: a box with per-axis point
/// counts. Conjugate-graph sampling evaluates gradients at every grid node.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    /// Same box and count on every axis.
    pub fn uniform(dim: usize, lo: f64, hi: f64, count: usize) -> Self {
        GridSpec {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
            counts: vec![count; dim],
        }
    }

    /// Default grid: 21 points per axis on [-5, 5]^dim.
    pub fn default_for(dim: usize) -> Self {
        GridSpec::uniform(dim, -5.0, 5.0, 21)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self, dim: usize, label: &str) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim || self.counts.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.lo.len(),
            });
        }
        if self.counts.iter().any(|&c| c == 0) || self.total_points() == 0 {
            return Err(Error::EmptyGrid {
                label: label.to_string(),
            });
        }
        for k in 0..dim {
            if !(self.lo[k] <= self.hi[k]) || !self.lo[k].is_finite() || !self.hi[k].is_finite() {
                return Err(Error::InvalidSystem(format!(
                    "grid box has invalid bounds on axis {k}"
                )));
            }
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        self.counts.iter().product()
    }

    /// All grid nodes in row-major order (last axis fastest). Deterministic.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let total = self.total_points();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        loop {
            let mut x = Vec::with_capacity(dim);
            for k in 0..dim {
                let c = self.counts[k];
                let t = if c == 1 {
                    0.5
                } else {
                    idx[k] as f64 / (c - 1) as f64
                };
                x.push(self.lo[k] + t * (self.hi[k] - self.lo[k]));
            }
            out.push(x);
            // odometer increment
            let mut k = dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.counts[k] {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    return out;
                }
            }
        }
    }
}

/// Grid assignment for a whole system: one default plus per-index overrides.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSet {
    pub default: GridSpec,
    #[serde(default)]
    pub overrides: Vec<(String, GridSpec)>,
}

impl GridSet {
    pub fn default_for(dim: usize) -> Self {
        GridSet {
            default: GridSpec::default_for(dim),
            overrides: Vec::new(),
        }
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64, count: usize) -> Self {
        GridSet {
            default: GridSpec::uniform(dim, lo, hi, count),
            overrides: Vec::new(),
        }
    }

    pub fn resolve(&self, label: &str) -> &GridSpec {
        self.overrides
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, g)| g)
            .unwrap_or(&self.default)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.default.validate(dim, "default")?;
        for (label, g) in &self.overrides {
            g.validate(dim, label)?;
        }
        Ok(())
    }
}
