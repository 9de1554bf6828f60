//! Reduction of a convex system to a parametric family of linear rows.
//!
//! Each constraint f_t(x) <= p_t yields the valid consequences
//! <u,x> <= f_t*(u) + p_t for every u in dom f_t*, by Fenchel's inequality.
//! Sampling u over conjugate graphs gives a finite outer polyhedron for
//! F(p); it converges to F(p) from outside as grids refine, and is exact
//! for affine and max-affine constraints. The embedded parameter repeats
//! p_t across rows of origin t, so its sup-norm equals that of p.

use serde::{Deserialize, Serialize};

use crate::config::GridSet;
use crate::convex::{InequalitySystem, Parameter};
use crate::error::{Error, Result};

/// One linear consequence `<a,x> <= b + rho` with the constraint index it
/// was sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub a: Vec<f64>,
    pub b: f64,
    pub origin: usize,
}

/// Finite linear outer model of a convex system. `labels` are inherited
/// from the source system, one per origin index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub dim: usize,
    pub labels: Vec<String>,
    pub rows: Vec<LinearRow>,
}

impl LinearSystem {
    /// Every row must carry b = f_t*(a) for its origin constraint.
    pub fn validate_against(&self, system: &InequalitySystem) -> Result<()> {
        if self.dim != system.dim || self.labels != system.labels {
            return Err(Error::InvalidSystem(
                "linear system does not match its source".into(),
            ));
        }
        for row in &self.rows {
            if row.origin >= system.len() || row.a.len() != self.dim {
                return Err(Error::InvalidSystem(format!(
                    "row with origin {} out of range",
                    row.origin
                )));
            }
            let expect = system.functions[row.origin].conjugate_value(&row.a)?;
            if !expect.is_finite() || (expect - row.b).abs() > 1e-10 * (1.0 + expect.abs()) {
                return Err(Error::InvalidSystem(format!(
                    "row from `{}` has b = {} but conjugate value {}",
                    self.labels[row.origin], row.b, expect
                )));
            }
        }
        Ok(())
    }

    /// max over rows of [<a,x> - b - rho]_+ .
    pub fn residual(&self, rho: &EmbeddedParameter, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, r) in self.rows.iter().zip(&rho.values) {
            let ax: f64 = row.a.iter().zip(x).map(|(a, b)| a * b).sum();
            worst = worst.max(ax - row.b - r);
        }
        worst.max(0.0)
    }

    pub fn rows_of(&self, origin: usize) -> impl Iterator<Item = &LinearRow> {
        self.rows.iter().filter(move |r| r.origin == origin)
    }
}

/// Row-indexed parameter with p_t repeated across rows sharing origin t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedParameter {
    pub values: Vec<f64>,
}

impl EmbeddedParameter {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Sample conjugate graphs over the per-index grids. Affine constraints
/// produce exactly one row; rows are deduplicated per index by the sampler.
pub fn linearize_system(system: &InequalitySystem, grids: &GridSet) -> Result<LinearSystem> {
    system.validate()?;
    grids.validate(system.dim)?;
    let mut rows = Vec::new();
    for (t, (f, label)) in system.functions.iter().zip(&system.labels).enumerate() {
        let grid = grids.resolve(label);
        let samples = f.conjugate_graph_sample(grid)?;
        if samples.is_empty() {
            return Err(Error::EmptyGrid {
                label: label.clone(),
            });
        }
        for (u, beta) in samples {
            rows.push(LinearRow {
                a: u,
                b: beta,
                origin: t,
            });
        }
    }
    Ok(LinearSystem {
        dim: system.dim,
        labels: system.labels.clone(),
        rows,
    })
}

/// rho_p(row) = p_{origin(row)}; sup-norms agree because every index owns at
/// least one row.
pub fn embed_parameter(p: &Parameter, lin: &LinearSystem) -> Result<EmbeddedParameter> {
    if p.values.len() != lin.labels.len() {
        return Err(Error::DimensionMismatch {
            expected: lin.labels.len(),
            got: p.values.len(),
        });
    }
    Ok(EmbeddedParameter {
        values: lin.rows.iter().map(|r| p.values[r.origin]).collect(),
    })
}

/// Outer-model slack estimate: max over probes of
/// (convex residual - linear residual), clamped at zero. Zero for systems
/// whose linearization is exact (affine, max-affine, or quadratics whose
/// active subgradients lie on the grid).
pub fn linearization_gap(
    system: &InequalitySystem,
    lin: &LinearSystem,
    p: &Parameter,
    probes: &[Vec<f64>],
) -> Result<f64> {
    let rho = embed_parameter(p, lin)?;
    let mut gap: f64 = 0.0;
    for x in probes {
        let convex = system.residual(p, x)?;
        let linear = lin.residual(&rho, x);
        gap = gap.max(convex - linear);
    }
    Ok(gap.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridSpec;
    use crate::convex::{AffinePiece, ConvexFunctionSpec};

    fn linear_pair() -> InequalitySystem {
        InequalitySystem::new(
            2,
            vec!["t0".into(), "t1".into()],
            vec![
                ConvexFunctionSpec::Affine {
                    a: vec![1.0, 1.0],
                    b: 0.0,
                },
                ConvexFunctionSpec::Affine {
                    a: vec![-1.0, 0.0],
                    b: 1.0,
                },
            ],
        )
        .unwrap()
    }

    fn parabola_system() -> InequalitySystem {
        InequalitySystem::new(
            1,
            vec!["t0".into()],
            vec![ConvexFunctionSpec::Quadratic {
                q: vec![vec![2.0]],
                c: vec![0.0],
                d: -1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn linear_system_is_identity() {
        let sys = linear_pair();
        let lin = linearize_system(&sys, &GridSet::default_for(2)).unwrap();
        assert_eq!(lin.rows.len(), 2);
        assert_eq!(lin.rows[0].a, vec![1.0, 1.0]);
        assert_eq!(lin.rows[0].b, 0.0);
        assert_eq!(lin.rows[1].a, vec![-1.0, 0.0]);
        assert_eq!(lin.rows[1].b, 1.0);
        lin.validate_against(&sys).unwrap();
    }

    #[test]
    fn parabola_three_node_grid() {
        let sys = parabola_system();
        let grids = GridSet {
            default: GridSpec::uniform(1, -1.0, 1.0, 3),
            overrides: vec![],
        };
        let lin = linearize_system(&sys, &grids).unwrap();
        let mut got: Vec<(f64, f64)> = lin.rows.iter().map(|r| (r.a[0], r.b)).collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(got, vec![(-2.0, 2.0), (0.0, 1.0), (2.0, 2.0)]);
        lin.validate_against(&sys).unwrap();
    }

    #[test]
    fn max_affine_is_own_linearization() {
        let sys = InequalitySystem::new(
            1,
            vec!["t0".into()],
            vec![ConvexFunctionSpec::MaxAffine {
                pieces: vec![
                    AffinePiece { a: vec![1.0], b: 0.0 },
                    AffinePiece { a: vec![-1.0], b: 0.0 },
                ],
            }],
        )
        .unwrap();
        let lin = linearize_system(&sys, &GridSet::default_for(1)).unwrap();
        let mut got: Vec<(f64, f64)> = lin.rows.iter().map(|r| (r.a[0], r.b)).collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(got, vec![(-1.0, 0.0), (1.0, 0.0)]);
    }

    #[test]
    fn embedding_repeats_by_origin_and_keeps_norm() {
        let sys = parabola_system();
        let grids = GridSet::uniform(1, -2.0, 2.0, 5);
        let lin = linearize_system(&sys, &grids).unwrap();
        assert!(lin.rows.len() > 1);
        let p = Parameter::new(vec![0.3]);
        let rho = embed_parameter(&p, &lin).unwrap();
        assert!(rho.values.iter().all(|&v| v == 0.3));
        assert_eq!(rho.sup_norm(), p.sup_norm());

        let two = linear_pair();
        let lin2 = linearize_system(&two, &GridSet::default_for(2)).unwrap();
        let rho2 = embed_parameter(&Parameter::new(vec![0.0, -0.5]), &lin2).unwrap();
        assert_eq!(rho2.values, vec![0.0, -0.5]);
    }

    #[test]
    fn feasible_points_satisfy_all_rows() {
        // Fenchel: <u,x> - f*(u) <= f(x) <= p, so every row holds on F(p)
        let sys = parabola_system();
        let lin = linearize_system(&sys, &GridSet::default_for(1)).unwrap();
        let p = Parameter::new(vec![0.25]);
        let rho = embed_parameter(&p, &lin).unwrap();
        for x in [-1.1, -0.5, 0.0, 0.7, 1.1] {
            if sys.residual(&p, &[x]).unwrap() == 0.0 {
                assert!(lin.residual(&rho, &[x]) <= 1e-10);
            }
        }
    }

    #[test]
    fn refinement_adds_rows_and_tightens() {
        let sys = parabola_system();
        let coarse = linearize_system(&sys, &GridSet::uniform(1, -1.0, 1.0, 3)).unwrap();
        let fine = linearize_system(&sys, &GridSet::uniform(1, -1.0, 1.0, 5)).unwrap();
        for row in &coarse.rows {
            assert!(
                fine.rows
                    .iter()
                    .any(|r| r.a == row.a && (r.b - row.b).abs() <= 1e-12),
                "coarse row missing after refinement"
            );
        }
        assert!(fine.rows.len() > coarse.rows.len());
        // tighter outer model: linear residual can only grow with more rows
        let p = sys.zero_parameter();
        let rc = embed_parameter(&p, &coarse).unwrap();
        let rf = embed_parameter(&p, &fine).unwrap();
        for x in [-2.0, -1.3, 0.4, 1.9] {
            assert!(fine.residual(&rf, &[x]) >= coarse.residual(&rc, &[x]) - 1e-12);
        }
    }

    #[test]
    fn gap_zero_for_linear_and_positive_for_coarse_quadratic() {
        let sys = linear_pair();
        let lin = linearize_system(&sys, &GridSet::default_for(2)).unwrap();
        let p = sys.zero_parameter();
        let probes: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, -2.0], vec![-3.0, 0.5]];
        assert_eq!(linearization_gap(&sys, &lin, &p, &probes).unwrap(), 0.0);

        let par = parabola_system();
        let coarse = linearize_system(&par, &GridSet::uniform(1, -1.0, 1.0, 2)).unwrap();
        let probes1: Vec<Vec<f64>> = vec![vec![0.0]];
        // at x = 0 the convex residual is 0 but so is the linear one; probe
        // the curvature midpoint instead
        let g = linearization_gap(&par, &coarse, &par.zero_parameter(), &probes1).unwrap();
        assert!(g >= 0.0);
        let probes2: Vec<Vec<f64>> = vec![vec![3.0]];
        let g2 = linearization_gap(&par, &coarse, &par.zero_parameter(), &probes2).unwrap();
        // f(3) = 8; best row 2x <= 2 gives linear residual 4; gap 4
        assert!((g2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_corrupted_row() {
        let sys = linear_pair();
        let mut lin = linearize_system(&sys, &GridSet::default_for(2)).unwrap();
        lin.rows[0].b += 0.5;
        assert!(lin.validate_against(&sys).is_err());
    }
}
