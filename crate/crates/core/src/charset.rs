//! Characteristic clouds: the finitely sampled generators of C(p), the
//! hypographical extension H(p) = C(p) + R_+ (0,1), and epsilon-active
//! index machinery.
//!
//! A cloud point is (u, alpha) with alpha = f_t*(u) + p_t for its origin
//! constraint t; linear constraints contribute exactly (a_t, b_t + p_t).
//! Declared closure points model weak*-closure phenomena that no finite
//! sample captures (coefficient families running off to infinity); they are
//! scenario data, never synthesized here.

use crate::config::GridSet;
use crate::convex::{InequalitySystem, Parameter};
use crate::error::{Error, Result};
use crate::linearize::linearize_system;

#[derive(Debug, Clone, PartialEq)]
pub struct CloudPoint {
    pub u: Vec<f64>,
    pub alpha: f64,
    /// Constraint index the point was sampled from.
    pub origin: usize,
}

/// Extra generator asserted (by the scenario author) to lie in the closed
/// characteristic set at the nominal parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosurePoint {
    pub u: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicCloud {
    pub dim: usize,
    pub labels: Vec<String>,
    pub points: Vec<CloudPoint>,
    pub closure_points: Vec<ClosurePoint>,
}

impl CharacteristicCloud {
    /// Vertical recession direction distinguishing H(p) from C(p).
    pub fn epi_ray(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.dim + 1];
        r[self.dim] = 1.0;
        r
    }

    pub fn with_closure_points(mut self, extra: Vec<ClosurePoint>) -> Self {
        self.closure_points.extend(extra);
        self
    }

    /// Sampled (u, alpha) pairs, without closure points.
    pub fn pairs(&self) -> Vec<(Vec<f64>, f64)> {
        self.points
            .iter()
            .map(|p| (p.u.clone(), p.alpha))
            .collect()
    }

    /// Sampled plus declared closure pairs.
    pub fn pairs_with_closure(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = self.pairs();
        out.extend(self.closure_points.iter().map(|c| (c.u.clone(), c.alpha)));
        out
    }

    /// Points stacked as (u, alpha) vectors in R^{n+1}, closure included.
    pub fn stacked(&self) -> Vec<Vec<f64>> {
        self.pairs_with_closure()
            .into_iter()
            .map(|(mut u, alpha)| {
                u.push(alpha);
                u
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.closure_points.is_empty()
    }

    /// One row per point: origin label, u coordinates, alpha. Closure points
    /// are labeled "closure".
    pub fn to_csv(&self) -> String {
        let mut out = String::from("origin");
        for i in 1..=self.dim {
            out.push_str(&format!(",u_{i}"));
        }
        out.push_str(",alpha\n");
        for p in &self.points {
            out.push_str(&self.labels[p.origin]);
            for v in &p.u {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", p.alpha));
        }
        for c in &self.closure_points {
            out.push_str("closure");
            for v in &c.u {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", c.alpha));
        }
        out
    }
}

/// Sample the characteristic cloud of the system at parameter p: conjugate
/// graphs shifted to alpha = f_t*(u) + p_t.
pub fn build_characteristic(
    system: &InequalitySystem,
    p: &Parameter,
    grids: &GridSet,
) -> Result<CharacteristicCloud> {
    system.check_parameter(p)?;
    let lin = linearize_system(system, grids)?;
    let points = lin
        .rows
        .into_iter()
        .map(|row| CloudPoint {
            u: row.a,
            alpha: row.b + p.values[row.origin],
            origin: row.origin,
        })
        .collect();
    Ok(CharacteristicCloud {
        dim: system.dim,
        labels: system.labels.clone(),
        points,
        closure_points: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveIndexSet {
    pub epsilon: f64,
    pub indices: Vec<usize>,
}

fn require_feasible(system: &InequalitySystem, x_bar: &[f64]) -> Result<()> {
    let r = system.residual(&system.zero_parameter(), x_bar)?;
    if r > 1e-9 {
        return Err(Error::InfeasiblePoint { residual: r });
    }
    Ok(())
}

/// Indices with f_t(x_bar) >= -epsilon, for x_bar feasible at p = 0.
pub fn active_indices(
    system: &InequalitySystem,
    x_bar: &[f64],
    epsilon: f64,
) -> Result<ActiveIndexSet> {
    require_feasible(system, x_bar)?;
    let indices = system
        .functions
        .iter()
        .enumerate()
        .filter(|(_, f)| f.evaluate(x_bar) >= -epsilon - 1e-12)
        .map(|(t, _)| t)
        .collect();
    Ok(ActiveIndexSet { epsilon, indices })
}

/// Cloud at p = 0 restricted to epsilon-active origins. Closure points are
/// not attached; the caller decides whether they participate.
pub fn epsilon_active_cloud(
    system: &InequalitySystem,
    x_bar: &[f64],
    epsilon: f64,
    grids: &GridSet,
) -> Result<CharacteristicCloud> {
    let active = active_indices(system, x_bar, epsilon)?;
    let full = build_characteristic(system, &system.zero_parameter(), grids)?;
    Ok(CharacteristicCloud {
        dim: full.dim,
        labels: full.labels,
        points: full
            .points
            .into_iter()
            .filter(|p| active.indices.contains(&p.origin))
            .collect(),
        closure_points: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridSpec;
    use crate::convex::ConvexFunctionSpec;
    use crate::minnorm::min_norm_point;
    use crate::SolverConfig;

    /// Alternating countable family truncated at N = 3:
    /// x1 + x2 <= 0 and (-1)^t t x1 <= 1 for t = 1..3.
    fn alternating(n: usize) -> InequalitySystem {
        let mut labels = vec!["t0".to_string()];
        let mut fns = vec![ConvexFunctionSpec::Affine {
            a: vec![1.0, 1.0],
            b: 0.0,
        }];
        for t in 1..=n {
            labels.push(format!("t{t}"));
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            fns.push(ConvexFunctionSpec::Affine {
                a: vec![sign * t as f64, 0.0],
                b: 1.0,
            });
        }
        InequalitySystem::new(2, labels, fns).unwrap()
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
    fn alternating_cloud_generators() {
        let sys = alternating(3);
        let cloud =
            build_characteristic(&sys, &sys.zero_parameter(), &GridSet::default_for(2)).unwrap();
        let got: Vec<(Vec<f64>, f64)> = cloud.pairs();
        assert_eq!(got.len(), 4);
        assert!(got.contains(&(vec![1.0, 1.0], 0.0)));
        assert!(got.contains(&(vec![-1.0, 0.0], 1.0)));
        assert!(got.contains(&(vec![2.0, 0.0], 1.0)));
        assert!(got.contains(&(vec![-3.0, 0.0], 1.0)));
    }

    #[test]
    fn parabola_cloud_and_parameter_shift() {
        let sys = parabola_system();
        let grids = GridSet {
            default: GridSpec::uniform(1, -1.0, 1.0, 3),
            overrides: vec![],
        };
        let at0 = build_characteristic(&sys, &Parameter::new(vec![0.0]), &grids).unwrap();
        let mut got = at0.pairs();
        got.sort_by(|a, b| a.0[0].partial_cmp(&b.0[0]).unwrap());
        assert_eq!(
            got,
            vec![(vec![-2.0], 2.0), (vec![0.0], 1.0), (vec![2.0], 2.0)]
        );
        // alpha follows p: (f - p)* = f* + p
        let shifted = build_characteristic(&sys, &Parameter::new(vec![0.5]), &grids).unwrap();
        for (a, b) in at0.points.iter().zip(&shifted.points) {
            assert_eq!(b.alpha, a.alpha + 0.5);
            assert_eq!(b.u, a.u);
        }
    }

    #[test]
    fn active_indices_on_alternating() {
        let sys = alternating(3);
        let x = [0.0, 0.0];
        assert_eq!(active_indices(&sys, &x, 0.5).unwrap().indices, vec![0]);
        assert_eq!(
            active_indices(&sys, &x, 1.0).unwrap().indices,
            vec![0, 1, 2, 3]
        );
        // strictly interior point: nothing is 0-active
        let interior = [-0.1, -0.1];
        assert!(active_indices(&sys, &interior, 0.0).unwrap().indices.is_empty());
    }

    #[test]
    fn active_indices_rejects_infeasible_point() {
        let sys = alternating(3);
        assert!(matches!(
            active_indices(&sys, &[1.0, 1.0], 0.5),
            Err(Error::InfeasiblePoint { .. })
        ));
    }

    #[test]
    fn epsilon_cloud_keeps_only_binding_row() {
        let sys = alternating(3);
        let cloud =
            epsilon_active_cloud(&sys, &[0.0, 0.0], 0.5, &GridSet::default_for(2)).unwrap();
        assert_eq!(cloud.pairs(), vec![(vec![1.0, 1.0], 0.0)]);
        // epsilon large enough recovers everything
        let all =
            epsilon_active_cloud(&sys, &[0.0, 0.0], f64::INFINITY, &GridSet::default_for(2))
                .unwrap();
        assert_eq!(all.points.len(), 4);
    }

    #[test]
    fn epsilon_cloud_parabola_single_index_keeps_all_samples() {
        let sys = parabola_system();
        let grids = GridSet {
            default: GridSpec::uniform(1, -1.0, 1.0, 3),
            overrides: vec![],
        };
        let cloud = epsilon_active_cloud(&sys, &[1.0], 0.0, &grids).unwrap();
        assert_eq!(cloud.points.len(), 3);
    }

    #[test]
    fn feasible_point_has_nonnegative_slacks() {
        // alpha - <u, x_bar> >= 0 on every cloud point, by Fenchel
        let sys = alternating(5);
        let cloud =
            build_characteristic(&sys, &sys.zero_parameter(), &GridSet::default_for(2)).unwrap();
        for x in [[0.0, 0.0], [-0.2, 0.1], [0.05, -0.3]] {
            if sys.residual(&sys.zero_parameter(), &x).unwrap() > 0.0 {
                continue;
            }
            for p in &cloud.points {
                let ux: f64 = p.u.iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!(p.alpha - ux >= -1e-10);
            }
        }
    }

    #[test]
    fn redundant_point_leaves_min_norm_unchanged() {
        let sys = alternating(3);
        let cloud =
            build_characteristic(&sys, &sys.zero_parameter(), &GridSet::default_for(2)).unwrap();
        let cfg = SolverConfig::default();
        let base = min_norm_point(&cloud.stacked(), &cfg);
        // midpoint of the first two generators is redundant
        let mut extended = cloud.stacked();
        let mid: Vec<f64> = extended[0]
            .iter()
            .zip(&extended[1])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        extended.push(mid);
        let more = min_norm_point(&extended, &cfg);
        assert!((base.norm - more.norm).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip_shape() {
        let sys = alternating(3);
        let cloud =
            build_characteristic(&sys, &sys.zero_parameter(), &GridSet::default_for(2)).unwrap()
                .with_closure_points(vec![ClosurePoint {
                    u: vec![0.0, 1.0],
                    alpha: 0.0,
                }]);
        let csv = cloud.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "origin,u_1,u_2,alpha");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "t0,1,1,0");
        assert!(lines[5].starts_with("closure,"));
    }
}
