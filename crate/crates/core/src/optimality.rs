//! Farkas-type consequence certificates and asymptotic stationarity checks
//! for semi-infinite programs posed over the parameterized system.
//!
//! A linear inequality <v,x> <= alpha is a consequence of the system at p
//! exactly when (v, alpha) lies in the closed cone spanned by the
//! characteristic cloud together with the vertical ray (0, 1). Stationarity
//! of a smooth objective phi(p, x) at a feasible x_bar asks instead for
//! -(grad_p, grad_x, <grad_x, x_bar>) inside the cone spanned by the graph
//! generators (-e_t, u, f_t*(u)); no vertical ray there.

use crate::charset::build_characteristic;
use crate::convex::{InequalitySystem, Parameter};
use crate::error::{Error, Result};
use crate::minnorm::{cone_distance, ConeWeights};
use crate::stability::{graph_cone_generators, project_feasible, require_feasible, AnalysisOptions};

/// The inequality <v, x> <= alpha, asked of every feasible point.
#[derive(Debug, Clone)]
pub struct ConsequenceQuery {
    pub v: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct FarkasOutcome {
    pub holds: bool,
    /// Cone distance of the query; zero (up to tolerance) iff holds.
    pub residual: f64,
    /// Nonnegative weights over the cloud points, with the vertical ray's
    /// weight last.
    pub mu: ConeWeights,
}

/// Certify whether the query is a consequence of the system at parameter p.
/// Requires F(p) nonempty, checked by projecting the origin.
pub fn farkas_consequence(
    system: &InequalitySystem,
    p: &Parameter,
    query: &ConsequenceQuery,
    opts: &AnalysisOptions,
) -> Result<FarkasOutcome> {
    system.check_parameter(p)?;
    system.check_point(&query.v)?;
    let origin = vec![0.0; system.dim];
    project_feasible(system, p, &origin, &opts.cfg)?;

    let cloud = build_characteristic(system, p, &opts.grids)?;
    let mut generators: Vec<Vec<f64>> = cloud
        .pairs()
        .into_iter()
        .map(|(u, alpha)| {
            let mut g = u;
            g.push(alpha);
            g
        })
        .collect();
    generators.push(cloud.epi_ray());
    let mut target = query.v.clone();
    target.push(query.alpha);
    let proj = cone_distance(&generators, &target, &opts.cfg);
    Ok(FarkasOutcome {
        holds: proj.distance <= opts.cfg.membership_tol,
        residual: proj.distance,
        mu: proj.weights,
    })
}

/// Certify v in N_{F(0)}(x_bar) by testing <v, x> <= <v, x_bar> as a
/// consequence at the nominal parameter. Requires a feasible x_bar.
pub fn normal_cone_member(
    system: &InequalitySystem,
    x_bar: &[f64],
    v: &[f64],
    opts: &AnalysisOptions,
) -> Result<FarkasOutcome> {
    require_feasible(system, x_bar)?;
    system.check_point(v)?;
    let alpha = v.iter().zip(x_bar).map(|(a, b)| a * b).sum();
    farkas_consequence(
        system,
        &system.zero_parameter(),
        &ConsequenceQuery { v: v.to_vec(), alpha },
        opts,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationarityVerdict {
    Satisfied,
    /// Residual above the membership tolerance but small enough that grid
    /// refinement could still close it.
    Inconclusive,
    Violated,
}

impl std::fmt::Display for StationarityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StationarityVerdict::Satisfied => "satisfied",
            StationarityVerdict::Inconclusive => "inconclusive",
            StationarityVerdict::Violated => "violated",
        })
    }
}

/// Residual ceiling below which a failed membership is reported as
/// inconclusive rather than violated.
pub const INCONCLUSIVE_BAND: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct StationarityCertificate {
    pub residual: f64,
    pub mu: ConeWeights,
    pub satisfied: bool,
    pub verdict: StationarityVerdict,
    pub gradient_p: Vec<f64>,
    pub gradient_x: Vec<f64>,
}

/// Asymptotic stationarity for a smooth objective at a feasible x_bar: the
/// negated gradient triple must lie in the cone of graph generators.
pub fn check_stationarity_smooth(
    system: &InequalitySystem,
    x_bar: &[f64],
    grad_p: &[f64],
    grad_x: &[f64],
    opts: &AnalysisOptions,
) -> Result<StationarityCertificate> {
    require_feasible(system, x_bar)?;
    if grad_p.len() != system.len() {
        return Err(Error::DimensionMismatch {
            expected: system.len(),
            got: grad_p.len(),
        });
    }
    system.check_point(grad_x)?;
    let generators = graph_cone_generators(system, &opts.grids)?;
    let gx_dot: f64 = grad_x.iter().zip(x_bar).map(|(a, b)| a * b).sum();
    let mut target: Vec<f64> = grad_p.iter().map(|v| -v).collect();
    target.extend(grad_x.iter().map(|v| -v));
    target.push(-gx_dot);
    let proj = cone_distance(&generators, &target, &opts.cfg);
    let verdict = if proj.distance <= opts.cfg.membership_tol {
        StationarityVerdict::Satisfied
    } else if proj.distance <= INCONCLUSIVE_BAND {
        StationarityVerdict::Inconclusive
    } else {
        StationarityVerdict::Violated
    };
    Ok(StationarityCertificate {
        residual: proj.distance,
        mu: proj.weights,
        satisfied: verdict == StationarityVerdict::Satisfied,
        verdict,
        gradient_p: grad_p.to_vec(),
        gradient_x: grad_x.to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct UpperStationarity {
    pub certificates: Vec<StationarityCertificate>,
    /// True when every certificate is satisfied; vacuously true when the
    /// gradient list is empty.
    pub all_satisfied: bool,
    pub vacuous: bool,
}

/// Stationarity over a family of upper gradients (grad_p, grad_x): every
/// one must pass. An empty family certifies nothing and says so.
pub fn check_stationarity_upper(
    system: &InequalitySystem,
    x_bar: &[f64],
    gradients: &[(Vec<f64>, Vec<f64>)],
    opts: &AnalysisOptions,
) -> Result<UpperStationarity> {
    let mut certificates = Vec::with_capacity(gradients.len());
    for (gp, gx) in gradients {
        certificates.push(check_stationarity_smooth(system, x_bar, gp, gx, opts)?);
    }
    let all_satisfied = certificates.iter().all(|c| c.satisfied);
    Ok(UpperStationarity {
        all_satisfied,
        vacuous: gradients.is_empty(),
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::ConvexFunctionSpec;

    fn affine(a: Vec<f64>, b: f64) -> ConvexFunctionSpec {
        ConvexFunctionSpec::Affine { a, b }
    }

    fn orthant() -> InequalitySystem {
        InequalitySystem::new(
            2,
            vec!["t0".into(), "t1".into()],
            vec![affine(vec![1.0, 0.0], 0.0), affine(vec![0.0, 1.0], 0.0)],
        )
        .unwrap()
    }

    fn disk() -> InequalitySystem {
        InequalitySystem::new(
            2,
            vec!["t0".into()],
            vec![ConvexFunctionSpec::Quadratic {
                q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
                c: vec![0.0, 0.0],
                d: -1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn orthant_sum_is_consequence() {
        let sys = orthant();
        let opts = AnalysisOptions::for_dim(2);
        let out = farkas_consequence(
            &sys,
            &sys.zero_parameter(),
            &ConsequenceQuery {
                v: vec![1.0, 1.0],
                alpha: 0.0,
            },
            &opts,
        )
        .unwrap();
        assert!(out.holds, "residual {}", out.residual);
        assert!(out.residual <= 1e-9);
        // weights: one unit on each generator row
        let total: f64 = out.mu.mu.iter().sum();
        assert!((total - 2.0).abs() < 1e-7);
    }

    #[test]
    fn orthant_negative_offset_rejected() {
        let sys = orthant();
        let opts = AnalysisOptions::for_dim(2);
        let out = farkas_consequence(
            &sys,
            &sys.zero_parameter(),
            &ConsequenceQuery {
                v: vec![1.0, 1.0],
                alpha: -1.0,
            },
            &opts,
        )
        .unwrap();
        assert!(!out.holds);
        assert!(out.residual > 0.5);
    }

    #[test]
    fn vertical_ray_absorbs_slack() {
        let sys = orthant();
        let opts = AnalysisOptions::for_dim(2);
        let out = farkas_consequence(
            &sys,
            &sys.zero_parameter(),
            &ConsequenceQuery {
                v: vec![1.0, 1.0],
                alpha: 5.0,
            },
            &opts,
        )
        .unwrap();
        assert!(out.holds, "residual {}", out.residual);
    }

    #[test]
    fn disk_supporting_halfplane() {
        let sys = disk();
        let opts = AnalysisOptions::for_dim(2);
        let holds = farkas_consequence(
            &sys,
            &sys.zero_parameter(),
            &ConsequenceQuery {
                v: vec![1.0, 0.0],
                alpha: 1.0,
            },
            &opts,
        )
        .unwrap();
        assert!(holds.holds, "residual {}", holds.residual);
        let cut = farkas_consequence(
            &sys,
            &sys.zero_parameter(),
            &ConsequenceQuery {
                v: vec![1.0, 0.0],
                alpha: 0.5,
            },
            &opts,
        )
        .unwrap();
        assert!(!cut.holds);
        assert!(cut.residual > 1e-3);
    }

    #[test]
    fn farkas_requires_nonempty_feasible_set() {
        let sys = InequalitySystem::new(
            1,
            vec!["t0".into(), "t1".into()],
            vec![affine(vec![1.0], -1.0), affine(vec![-1.0], -1.0)],
        )
        .unwrap();
        // x <= -1 and -x <= -1 cannot both hold
        let out = farkas_consequence(
            &sys,
            &sys.zero_parameter(),
            &ConsequenceQuery {
                v: vec![1.0],
                alpha: 0.0,
            },
            &AnalysisOptions::for_dim(1),
        );
        assert!(matches!(out, Err(Error::EmptyFeasibleSet)));
    }

    #[test]
    fn normal_cone_at_active_and_interior_points() {
        let sys = InequalitySystem::new(2, vec!["t0".into()], vec![affine(vec![1.0, 1.0], 0.0)])
            .unwrap();
        let opts = AnalysisOptions::for_dim(2);
        let member = normal_cone_member(&sys, &[0.0, 0.0], &[2.0, 2.0], &opts).unwrap();
        assert!(member.holds);
        let outward_flipped = normal_cone_member(&sys, &[0.0, 0.0], &[-1.0, -1.0], &opts).unwrap();
        assert!(!outward_flipped.holds);
        // interior point: only the zero vector belongs
        let interior = normal_cone_member(&sys, &[-1.0, 0.0], &[1.0, 1.0], &opts).unwrap();
        assert!(!interior.holds);
        let zero = normal_cone_member(&sys, &[-1.0, 0.0], &[0.0, 0.0], &opts).unwrap();
        assert!(zero.holds);
    }

    #[test]
    fn stationarity_on_halfspace_objective() {
        let sys = InequalitySystem::new(2, vec!["t0".into()], vec![affine(vec![1.0, 1.0], 0.0)])
            .unwrap();
        let opts = AnalysisOptions::for_dim(2);
        // phi(p, x) = p - x1 - x2 attains its minimum over the graph of F
        // along the active face through the origin
        let cert =
            check_stationarity_smooth(&sys, &[0.0, 0.0], &[1.0], &[-1.0, -1.0], &opts).unwrap();
        assert!(cert.satisfied, "residual {}", cert.residual);
        assert_eq!(cert.verdict, StationarityVerdict::Satisfied);
        assert!((cert.mu.mu.iter().sum::<f64>() - 1.0).abs() < 1e-7);

        // a tilted gradient breaks the certificate
        let bad =
            check_stationarity_smooth(&sys, &[0.0, 0.0], &[1.0], &[-1.2, -0.8], &opts).unwrap();
        assert!(!bad.satisfied);
        assert_eq!(bad.verdict, StationarityVerdict::Violated);
        assert!(bad.residual > 0.1);
    }

    #[test]
    fn stationarity_on_orthant_objective() {
        let sys = orthant();
        let opts = AnalysisOptions::for_dim(2);
        let cert = check_stationarity_smooth(
            &sys,
            &[0.0, 0.0],
            &[0.5, 0.5],
            &[-0.5, -0.5],
            &opts,
        )
        .unwrap();
        assert!(cert.satisfied, "residual {}", cert.residual);
    }

    #[test]
    fn upper_stationarity_aggregates() {
        let sys = InequalitySystem::new(2, vec!["t0".into()], vec![affine(vec![1.0, 1.0], 0.0)])
            .unwrap();
        let opts = AnalysisOptions::for_dim(2);
        let good = (vec![1.0], vec![-1.0, -1.0]);
        let bad = (vec![1.0], vec![1.0, 1.0]);
        let both = check_stationarity_upper(
            &sys,
            &[0.0, 0.0],
            &[good.clone(), bad.clone()],
            &opts,
        )
        .unwrap();
        assert!(!both.all_satisfied);
        assert!(!both.vacuous);
        assert_eq!(both.certificates.len(), 2);
        assert!(both.certificates[0].satisfied);
        assert!(!both.certificates[1].satisfied);

        let only_good = check_stationarity_upper(&sys, &[0.0, 0.0], &[good], &opts).unwrap();
        assert!(only_good.all_satisfied);

        let empty = check_stationarity_upper(&sys, &[0.0, 0.0], &[], &opts).unwrap();
        assert!(empty.all_satisfied);
        assert!(empty.vacuous);
    }

    #[test]
    fn stationarity_rejects_infeasible_base_point() {
        let sys = orthant();
        let opts = AnalysisOptions::for_dim(2);
        assert!(matches!(
            check_stationarity_smooth(&sys, &[1.0, 1.0], &[0.5, 0.5], &[0.0, 0.0], &opts),
            Err(Error::InfeasiblePoint { .. })
        ));
    }
}
