//! Stability certificates for the feasible-set map F of a parameterized
//! convex system: strong Slater checks, distance to feasibility by dual and
//! primal routes, the exact Lipschitzian bound via constrained min-norm over
//! the characteristic cloud, coderivative norm and membership, and the
//! seeded quotient sampler.
//!
//! Conventions: the nominal parameter is 0, parameters carry the sup-norm,
//! the decision space carries the Euclidean norm. All zero-or-absent cases
//! follow sup emptyset = 0 and inf emptyset = +inf.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::charset::{build_characteristic, epsilon_active_cloud, ClosurePoint};
use crate::config::{GridSet, SolverConfig};
use crate::convex::{ConvexFunctionSpec, InequalitySystem, Parameter};
use crate::error::{Error, Result};
use crate::minnorm::{
    cone_distance, constrained_min_norm, constrained_min_norm_relaxed, fractional_sup,
    min_norm_point, project_polyhedron, ConeWeights, SimplexWeights,
};

/// Epsilon ladder for the active-index diagnostic.
pub const DEFAULT_EPSILON_SCHEDULE: [f64; 5] = [1.0, 0.5, 0.1, 0.01, 0.0];

/// Everything an analysis needs besides the system itself.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub grids: GridSet,
    /// Extra generators asserted to lie in the closed characteristic set at
    /// the nominal parameter. Scenario data; never synthesized.
    pub closure_points: Vec<ClosurePoint>,
    pub epsilon_schedule: Vec<f64>,
    pub cfg: SolverConfig,
}

impl AnalysisOptions {
    pub fn for_dim(dim: usize) -> Self {
        AnalysisOptions {
            grids: GridSet::default_for(dim),
            closure_points: Vec::new(),
            epsilon_schedule: DEFAULT_EPSILON_SCHEDULE.to_vec(),
            cfg: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlaterCertificate {
    pub satisfied: bool,
    /// Strong Slater point, present iff satisfied.
    pub witness: Option<Vec<f64>>,
    /// -sup_t f_t at the best point the primal route found.
    pub slack: f64,
    /// Min-norm distance of (0,0) to the characteristic hull (dual route).
    pub dual_check: f64,
    /// Primal and dual verdicts agree; a false here flags a sampling gap.
    pub routes_agree: bool,
}

/// Strong Slater check at the nominal parameter.
pub fn check_ssc(system: &InequalitySystem, opts: &AnalysisOptions) -> Result<SlaterCertificate> {
    check_ssc_at(system, &system.zero_parameter(), opts)
}

/// Strong Slater check for the system at parameter p. The dual route asks
/// whether (0,0) lies in the hull of the cloud (a sound "violated" witness,
/// since the hull sits inside the closed characteristic set); the primal
/// route searches for a point with sup_t (f_t - p_t) < 0 (a sound
/// "satisfied" witness). Declared closure points join the hull only at the
/// nominal parameter, where they are asserted to live.
pub fn check_ssc_at(
    system: &InequalitySystem,
    p: &Parameter,
    opts: &AnalysisOptions,
) -> Result<SlaterCertificate> {
    let mut cloud = build_characteristic(system, p, &opts.grids)?;
    if p.values.iter().all(|&v| v == 0.0) {
        cloud = cloud.with_closure_points(opts.closure_points.clone());
    }
    let stacked = cloud.stacked();
    let mn = min_norm_point(&stacked, &opts.cfg);
    let dual_check = mn.norm;

    // primal candidates: the origin, and the witness hidden in the dual
    // certificate: when the min-norm point z = (z_u, z_a) has z_a > 0, the
    // Wolfe inequality <q, z> >= ||z||^2 over all cloud points forces
    // <u, -z_u/z_a> - alpha <= -||z||^2 / z_a < 0 on every sampled row.
    let n = system.dim;
    let mut candidates: Vec<Vec<f64>> = vec![vec![0.0; n]];
    let z_alpha = mn.point[n];
    if z_alpha > 1e-9 * (1.0 + mn.norm) {
        candidates.push(mn.point[..n].iter().map(|v| -v / z_alpha).collect());
    }

    let mut best_x = candidates[0].clone();
    let mut best_v = f64::INFINITY;
    for start in candidates {
        let (x, v) = descend_sup(system, p, start, 300);
        if v < best_v {
            best_v = v;
            best_x = x;
        }
    }
    let satisfied = best_v < -1e-9;
    Ok(SlaterCertificate {
        satisfied,
        witness: if satisfied { Some(best_x) } else { None },
        // 0.0 + x maps -0.0 to 0.0 for cleaner reports
        slack: 0.0 + -best_v,
        dual_check,
        routes_agree: satisfied == (dual_check > 1e-9),
    })
}

/// Subgradient descent on g(x) = sup_t (f_t(x) - p_t), keeping the best
/// iterate. Steps are normalized with a 1/sqrt(k) schedule; exact enough to
/// certify strict negativity, which is all the SSC needs.
fn descend_sup(
    system: &InequalitySystem,
    p: &Parameter,
    start: Vec<f64>,
    iters: usize,
) -> (Vec<f64>, f64) {
    let eval = |x: &[f64]| -> (usize, f64) {
        let mut idx = 0;
        let mut worst = f64::NEG_INFINITY;
        for (t, (f, pt)) in system.functions.iter().zip(&p.values).enumerate() {
            let v = f.evaluate(x) - pt;
            if v > worst {
                worst = v;
                idx = t;
            }
        }
        (idx, worst)
    };
    let mut x = start;
    let (_, v0) = eval(&x);
    let mut best = (x.clone(), v0);
    let eta0 = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for k in 0..iters {
        let (idx, _) = eval(&x);
        let g = system.functions[idx].subgradient(&x);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-14 {
            break; // flat active constraint: the sup cannot be pushed below its value
        }
        let eta = eta0 / ((k + 1) as f64).sqrt();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= eta * gi / gn;
        }
        let (_, v) = eval(&x);
        if v < best.1 {
            best = (x.clone(), v);
        }
        // one deep witness is as good as an unboundedly deep one
        if best.1 < -1e3 {
            break;
        }
    }
    best
}

/// Exact projections onto the individual constraint sets {f_t <= p_t},
/// combined by Dykstra's algorithm when several interact.
enum Projector {
    /// <a,y> <= rhs with a != 0.
    Halfspace { a: DVector<f64>, rhs: f64 },
    /// Constraint holds everywhere (zero row with admissible offset).
    Always,
    Quadratic(Box<QuadLevel>),
    Polyhedron { rows: Vec<(Vec<f64>, f64)> },
}

/// Sublevel set {y : 1/2 y'Qy + <c,y> + d <= level} in the eigenbasis of Q.
struct QuadLevel {
    evecs: DMatrix<f64>,
    evals: DVector<f64>,
    c_hat: DVector<f64>,
    d: f64,
    level: f64,
}

impl QuadLevel {
    fn value_hat(&self, y_hat: &DVector<f64>) -> f64 {
        let mut v = self.d;
        for i in 0..y_hat.len() {
            v += 0.5 * self.evals[i] * y_hat[i] * y_hat[i] + self.c_hat[i] * y_hat[i];
        }
        v
    }

    /// y(nu) solving (I + nu Q) y = z - nu c, in the eigenbasis.
    fn y_of(&self, z_hat: &DVector<f64>, nu: f64) -> DVector<f64> {
        DVector::from_iterator(
            z_hat.len(),
            (0..z_hat.len()).map(|i| (z_hat[i] - nu * self.c_hat[i]) / (1.0 + nu * self.evals[i])),
        )
    }

    fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let z_hat = self.evecs.transpose() * z;
        let tol = 1e-13 * (1.0 + self.level.abs());
        if self.value_hat(&z_hat) <= self.level + tol {
            return Ok(z.clone());
        }
        // h(nu) = f(y(nu)) decreases strictly toward inf f; bracket then bisect
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let mut expanded = 0;
        while self.value_hat(&self.y_of(&z_hat, hi)) > self.level {
            hi *= 2.0;
            expanded += 1;
            if expanded > 200 {
                if self.value_hat(&self.y_of(&z_hat, hi)) > self.level + 1e-9 * (1.0 + self.level.abs())
                {
                    return Err(Error::EmptyFeasibleSet);
                }
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.value_hat(&self.y_of(&z_hat, mid)) > self.level {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-15 * (1.0 + hi) {
                break;
            }
        }
        Ok(&self.evecs * self.y_of(&z_hat, hi))
    }
}

impl Projector {
    fn build(f: &ConvexFunctionSpec, level: f64, _cfg: &SolverConfig) -> Result<Projector> {
        Ok(match f {
            ConvexFunctionSpec::Affine { a, b } => {
                let av = DVector::from_column_slice(a);
                if av.norm() == 0.0 {
                    if -b <= level + 1e-12 {
                        Projector::Always
                    } else {
                        return Err(Error::EmptyFeasibleSet);
                    }
                } else {
                    Projector::Halfspace {
                        a: av,
                        rhs: b + level,
                    }
                }
            }
            ConvexFunctionSpec::Quadratic { q, c, d } => {
                let nq = q.len();
                let m = DMatrix::from_fn(nq, nq, |i, j| q[i][j]);
                let eig = m.symmetric_eigen();
                let evals = eig.eigenvalues.map(|v| v.max(0.0));
                let c_hat = eig.eigenvectors.transpose() * DVector::from_column_slice(c);
                Projector::Quadratic(Box::new(QuadLevel {
                    evecs: eig.eigenvectors,
                    evals,
                    c_hat,
                    d: *d,
                    level,
                }))
            }
            ConvexFunctionSpec::MaxAffine { pieces } => Projector::Polyhedron {
                rows: pieces
                    .iter()
                    .map(|p| (p.a.clone(), p.b + level))
                    .collect(),
            },
        })
    }

    fn project(&self, z: &DVector<f64>, cfg: &SolverConfig) -> Result<DVector<f64>> {
        match self {
            Projector::Always => Ok(z.clone()),
            Projector::Halfspace { a, rhs } => {
                let viol = a.dot(z) - rhs;
                if viol <= 0.0 {
                    Ok(z.clone())
                } else {
                    Ok(z - a * (viol / a.norm_squared()))
                }
            }
            Projector::Quadratic(q) => q.project(z),
            Projector::Polyhedron { rows } => {
                let zz: Vec<f64> = z.iter().cloned().collect();
                match project_polyhedron(rows, &zz, cfg) {
                    Some(p) => Ok(DVector::from_column_slice(&p.point)),
                    None => Err(Error::EmptyFeasibleSet),
                }
            }
        }
    }
}

/// Euclidean projection of z onto F(p) and its distance. Exact (one dual
/// QP) when every constraint is affine; otherwise Dykstra over the exact
/// per-constraint projectors, polished to strict feasibility.
pub fn project_feasible(
    system: &InequalitySystem,
    p: &Parameter,
    z: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, f64)> {
    system.check_parameter(p)?;
    system.check_point(z)?;
    let all_affine = system
        .functions
        .iter()
        .all(|f| matches!(f, ConvexFunctionSpec::Affine { .. }));
    if all_affine {
        let rows: Vec<(Vec<f64>, f64)> = system
            .functions
            .iter()
            .zip(&p.values)
            .filter_map(|(f, pt)| match f {
                ConvexFunctionSpec::Affine { a, b } => {
                    if a.iter().all(|&v| v == 0.0) {
                        None
                    } else {
                        Some((a.clone(), b + pt))
                    }
                }
                _ => unreachable!(),
            })
            .collect();
        // zero rows are constants; infeasible ones mean an empty set
        for (f, pt) in system.functions.iter().zip(&p.values) {
            if let ConvexFunctionSpec::Affine { a, b } = f {
                if a.iter().all(|&v| v == 0.0) && -b > pt + 1e-12 {
                    return Err(Error::EmptyFeasibleSet);
                }
            }
        }
        if rows.is_empty() {
            return Ok((z.to_vec(), 0.0));
        }
        return match project_polyhedron(&rows, z, cfg) {
            Some(proj) => Ok((proj.point, proj.distance)),
            None => Err(Error::EmptyFeasibleSet),
        };
    }

    let projectors: Vec<Projector> = system
        .functions
        .iter()
        .zip(&p.values)
        .map(|(f, pt)| Projector::build(f, *pt, cfg))
        .collect::<Result<_>>()?;
    let active: Vec<&Projector> = projectors
        .iter()
        .filter(|pr| !matches!(pr, Projector::Always))
        .collect();
    let zv = DVector::from_column_slice(z);
    if active.is_empty() {
        return Ok((z.to_vec(), 0.0));
    }
    if active.len() == 1 {
        let y = active[0].project(&zv, cfg)?;
        let dist = (&zv - &y).norm();
        return Ok((y.iter().cloned().collect(), dist));
    }

    let scale = 1.0 + zv.norm();
    let mut x = zv.clone();
    let mut corr: Vec<DVector<f64>> = vec![DVector::zeros(z.len()); active.len()];
    let mut last = x.clone();
    let cap = cfg.max_iterations.max(20_000);
    for cycle in 0..cap {
        for (i, pr) in active.iter().enumerate() {
            let w = &x + &corr[i];
            let y = pr.project(&w, cfg)?;
            corr[i] = &w - &y;
            x = y;
        }
        if cycle % 4 == 3 {
            let mv = (&x - &last).norm();
            if mv <= 1e-13 * scale {
                break;
            }
            last = x.clone();
        }
    }
    // plain cyclic projections drive the iterate into the set without
    // moving it far; the reported distance is then a certified upper bound
    let xs: Vec<f64> = x.iter().cloned().collect();
    let mut resid = system.residual(p, &xs)?;
    let mut polish = 0;
    while resid > 1e-12 * scale && polish < 500 {
        for pr in &active {
            x = pr.project(&x, cfg)?;
        }
        let xs: Vec<f64> = x.iter().cloned().collect();
        resid = system.residual(p, &xs)?;
        polish += 1;
    }
    if resid > 1e-7 * scale {
        return Err(Error::EmptyFeasibleSet);
    }
    Ok((x.iter().cloned().collect(), (&zv - &x).norm()))
}

/// dist(x; F(p)) through the primal route (projection machinery).
pub fn distance_primal(
    system: &InequalitySystem,
    p: &Parameter,
    x: &[f64],
    opts: &AnalysisOptions,
) -> Result<f64> {
    project_feasible(system, p, x, &opts.cfg).map(|(_, d)| d)
}

#[derive(Debug, Clone)]
pub struct DualDistance {
    /// sup over the characteristic hull of [<u,x> - alpha]_+ / ||u||.
    pub value: f64,
    /// Distance from the dual projection point to the true feasible set;
    /// bounds |dual - primal| by the triangle inequality.
    pub gap: f64,
    pub projection: Option<Vec<f64>>,
}

/// dist(x; F(p)) through the characteristic-set formula. Requires the SSC
/// at p; the reported gap measures how far the sampled outer polyhedron's
/// nearest point sits from F(p) itself.
pub fn distance_dual(
    system: &InequalitySystem,
    p: &Parameter,
    x: &[f64],
    opts: &AnalysisOptions,
) -> Result<DualDistance> {
    system.check_point(x)?;
    let ssc = check_ssc_at(system, p, opts)?;
    if !ssc.satisfied {
        return Err(Error::SscViolated(format!(
            "distance formula needs the strong Slater condition at the queried parameter \
             (best slack found: {:.3e})",
            -ssc.slack
        )));
    }
    let cloud = build_characteristic(system, p, &opts.grids)?;
    let pairs = cloud.pairs();
    let value = fractional_sup(&pairs, x, &opts.cfg);
    match project_polyhedron(&pairs, x, &opts.cfg) {
        Some(proj) => {
            let (_, gap) = project_feasible(system, p, &proj.point, &opts.cfg)?;
            Ok(DualDistance {
                value,
                gap,
                projection: Some(proj.point),
            })
        }
        None => Err(Error::EmptyFeasibleSet),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulusMode {
    SlaterPointZero,
    EmptyIntersectionZero,
    Computed,
}

impl std::fmt::Display for ModulusMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModulusMode::SlaterPointZero => "slater-point-zero",
            ModulusMode::EmptyIntersectionZero => "empty-intersection-zero",
            ModulusMode::Computed => "computed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EpsilonDiagnostic {
    pub epsilon: f64,
    /// Modulus bound computed from the epsilon-active cloud alone (no
    /// closure points); the drift against the full value exposes closure
    /// phenomena.
    pub lip_value: f64,
}

#[derive(Debug, Clone)]
pub struct ModulusCertificate {
    pub lip_value: f64,
    /// True when an argmin u* was computed (mode Computed).
    pub attained: bool,
    pub argmin: Option<Vec<f64>>,
    pub weights: Option<SimplexWeights>,
    /// Labels of the cloud points carrying the optimal weights; declared
    /// closure generators appear as "closure".
    pub support_labels: Vec<String>,
    pub mode: ModulusMode,
    pub epsilon_diagnostics: Vec<EpsilonDiagnostic>,
}

pub(crate) fn require_feasible(system: &InequalitySystem, x_bar: &[f64]) -> Result<()> {
    let r = system.residual(&system.zero_parameter(), x_bar)?;
    if r > 1e-9 {
        return Err(Error::InfeasiblePoint { residual: r });
    }
    Ok(())
}

fn require_ssc(system: &InequalitySystem, opts: &AnalysisOptions) -> Result<SlaterCertificate> {
    let ssc = check_ssc(system, opts)?;
    if !ssc.satisfied {
        return Err(Error::SscViolated(
            "the exact bound formula needs the strong Slater condition at the nominal parameter"
                .into(),
        ));
    }
    Ok(ssc)
}

/// Exact Lipschitzian bound of F at (0, x_bar): zero at strong Slater
/// points, zero when the slice {alpha = <u, x_bar>} misses the hull, and
/// 1/||u*|| at the constrained min-norm solution otherwise.
pub fn lip_bound(
    system: &InequalitySystem,
    x_bar: &[f64],
    opts: &AnalysisOptions,
) -> Result<ModulusCertificate> {
    require_ssc(system, opts)?;
    require_feasible(system, x_bar)?;
    let diagnostics = epsilon_diagnostics(system, x_bar, opts)?;
    let sup = system.sup_value(&system.zero_parameter(), x_bar)?;
    if sup < -1e-9 {
        return Ok(ModulusCertificate {
            lip_value: 0.0,
            attained: false,
            argmin: None,
            weights: None,
            support_labels: Vec::new(),
            mode: ModulusMode::SlaterPointZero,
            epsilon_diagnostics: diagnostics,
        });
    }
    let cloud = build_characteristic(system, &system.zero_parameter(), &opts.grids)?
        .with_closure_points(opts.closure_points.clone());
    let pairs = cloud.pairs_with_closure();
    match constrained_min_norm(&pairs, x_bar, &opts.cfg) {
        None => Ok(ModulusCertificate {
            lip_value: 0.0,
            attained: false,
            argmin: None,
            weights: None,
            support_labels: Vec::new(),
            mode: ModulusMode::EmptyIntersectionZero,
            epsilon_diagnostics: diagnostics,
        }),
        Some(res) => {
            let sampled = cloud.points.len();
            let support_labels = res
                .weights
                .support
                .iter()
                .map(|&i| {
                    if i < sampled {
                        cloud.labels[cloud.points[i].origin].clone()
                    } else {
                        "closure".to_string()
                    }
                })
                .collect();
            Ok(ModulusCertificate {
                lip_value: 1.0 / res.norm,
                attained: true,
                argmin: Some(res.u),
                weights: Some(res.weights),
                support_labels,
                mode: ModulusMode::Computed,
                epsilon_diagnostics: diagnostics,
            })
        }
    }
}

fn epsilon_diagnostics(
    system: &InequalitySystem,
    x_bar: &[f64],
    opts: &AnalysisOptions,
) -> Result<Vec<EpsilonDiagnostic>> {
    let mut out = Vec::with_capacity(opts.epsilon_schedule.len());
    for &eps in &opts.epsilon_schedule {
        let cloud = epsilon_active_cloud(system, x_bar, eps, &opts.grids)?;
        let lip = if cloud.is_empty() {
            0.0
        } else {
            match constrained_min_norm(&cloud.pairs(), x_bar, &opts.cfg) {
                None => 0.0,
                Some(res) => 1.0 / res.norm,
            }
        };
        out.push(EpsilonDiagnostic {
            epsilon: eps,
            lip_value: lip,
        });
    }
    Ok(out)
}

/// Coderivative norm of F at (0, x_bar). The same quantity as `lip_bound`,
/// computed through the hypographical relaxation <r, lambda> <= 0 (the
/// H(0)-side route) as an independent cross-check.
pub fn coderivative_norm(
    system: &InequalitySystem,
    x_bar: &[f64],
    opts: &AnalysisOptions,
) -> Result<f64> {
    require_ssc(system, opts)?;
    require_feasible(system, x_bar)?;
    let sup = system.sup_value(&system.zero_parameter(), x_bar)?;
    if sup < -1e-9 {
        return Ok(0.0);
    }
    let cloud = build_characteristic(system, &system.zero_parameter(), &opts.grids)?
        .with_closure_points(opts.closure_points.clone());
    match constrained_min_norm_relaxed(&cloud.pairs_with_closure(), x_bar, &opts.cfg) {
        None => Ok(0.0),
        Some(res) => Ok(1.0 / res.norm),
    }
}

#[derive(Debug, Clone)]
pub struct CoderivativeMembership {
    pub member: bool,
    pub residual: f64,
    pub mu: ConeWeights,
}

/// Test p* in D*F(0, x_bar)(x*): the triple (p*, -x*, -<x*, x_bar>) must
/// lie in the cone generated by {(-e_t, u, f_t*(u))} over sampled (t, u).
pub fn coderivative_member(
    system: &InequalitySystem,
    x_bar: &[f64],
    p_star: &[f64],
    x_star: &[f64],
    opts: &AnalysisOptions,
) -> Result<CoderivativeMembership> {
    require_feasible(system, x_bar)?;
    if p_star.len() != system.len() {
        return Err(Error::DimensionMismatch {
            expected: system.len(),
            got: p_star.len(),
        });
    }
    system.check_point(x_star)?;
    let generators = graph_cone_generators(system, &opts.grids)?;
    let xs_dot: f64 = x_star.iter().zip(x_bar).map(|(a, b)| a * b).sum();
    let mut target: Vec<f64> = p_star.to_vec();
    target.extend(x_star.iter().map(|v| -v));
    target.push(-xs_dot);
    let proj = cone_distance(&generators, &target, &opts.cfg);
    Ok(CoderivativeMembership {
        member: proj.distance <= opts.cfg.membership_tol,
        residual: proj.distance,
        mu: proj.weights,
    })
}

/// Generators (-e_t, u, f_t*(u)) in R^{|T| + n + 1} from the sampled
/// conjugate graphs at the nominal parameter.
pub(crate) fn graph_cone_generators(
    system: &InequalitySystem,
    grids: &GridSet,
) -> Result<Vec<Vec<f64>>> {
    let cloud = build_characteristic(system, &system.zero_parameter(), grids)?;
    let m = system.len();
    Ok(cloud
        .points
        .iter()
        .map(|pt| {
            let mut g = vec![0.0; m];
            g[pt.origin] = -1.0;
            g.extend(pt.u.iter().cloned());
            g.push(pt.alpha);
            g
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct QuotientSample {
    pub p: Parameter,
    pub x: Vec<f64>,
    /// dist(x; F(p)); +inf when F(p) is empty.
    pub numerator: f64,
    /// dist(p; inverse image of x) = sup_t [f_t(x) - p_t]_+ .
    pub denominator: f64,
    pub ratio: f64,
}

/// One evaluation of the distance quotient, with 0/0 = 0 and pos/0 = +inf.
pub fn quotient_sample(
    system: &InequalitySystem,
    p: &Parameter,
    x: &[f64],
    opts: &AnalysisOptions,
) -> Result<QuotientSample> {
    let denominator = system.residual(p, x)?;
    let numerator = match project_feasible(system, p, x, &opts.cfg) {
        Ok((_, d)) => d,
        Err(Error::EmptyFeasibleSet) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let ratio = if numerator == 0.0 {
        0.0
    } else if denominator == 0.0 {
        f64::INFINITY
    } else {
        numerator / denominator
    };
    Ok(QuotientSample {
        p: p.clone(),
        x: x.to_vec(),
        numerator,
        denominator,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub radius: f64,
    /// Max finite ratio among used samples; 0.0 when every used sample was
    /// feasible (both distances zero).
    pub max_ratio: f64,
    pub samples_used: usize,
    /// Samples whose denominator fell below the noise floor of the primal
    /// projection, or whose feasible set was empty.
    pub skipped: usize,
}

/// Seeded sampling of the distance quotient on shrinking neighborhoods:
/// parameters uniform in the sup-ball of each radius, points uniform in the
/// Euclidean ball around x_bar. Deterministic for a fixed seed; samples are
/// evaluated in parallel and reduced with max, which is associative.
pub fn lip_sample(
    system: &InequalitySystem,
    x_bar: &[f64],
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
    opts: &AnalysisOptions,
) -> Result<Vec<TrendRow>> {
    require_ssc(system, opts)?;
    require_feasible(system, x_bar)?;
    let m = system.len();
    let n = system.dim;
    // a denominator below this is dominated by projection error
    let floor = 100.0 * opts.cfg.projection_tol;
    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        let evals: Vec<(f64, bool)> = (0..samples_per_radius)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((ri as u64) << 32) | s as u64);
                let p = Parameter::new((0..m).map(|_| rng.random_range(-r..=r)).collect());
                let x = sample_ball(&mut rng, x_bar, r, n);
                let q = quotient_sample(system, &p, &x, opts)
                    .expect("sampling uses validated inputs");
                if !q.numerator.is_finite() {
                    return (0.0, false);
                }
                if q.denominator == 0.0 {
                    // feasible draw: numerator is zero up to projection noise
                    (0.0, true)
                } else if q.denominator < floor {
                    (0.0, false)
                } else {
                    (q.numerator / q.denominator, true)
                }
            })
            .collect();
        let mut max_ratio = 0.0f64;
        let mut used = 0;
        for (v, ok) in &evals {
            if *ok {
                used += 1;
                max_ratio = max_ratio.max(*v);
            }
        }
        rows.push(TrendRow {
            radius: r,
            max_ratio,
            samples_used: used,
            skipped: samples_per_radius - used,
        });
    }
    Ok(rows)
}

fn sample_ball(rng: &mut ChaCha8Rng, center: &[f64], r: f64, n: usize) -> Vec<f64> {
    loop {
        let offset: Vec<f64> = (0..n).map(|_| rng.random_range(-r..=r)).collect();
        if offset.iter().map(|v| v * v).sum::<f64>() <= r * r {
            return center.iter().zip(&offset).map(|(c, o)| c + o).collect();
        }
    }
}
