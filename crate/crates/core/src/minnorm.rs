//! Dense min-norm machinery behind the dual certificates.
//!
//! * `min_norm_point`: Wolfe's minimum-norm-point algorithm over a convex
//!   hull, with corral pruning guards.
//! * `cone_distance`: Lawson-Hanson nonnegative least squares onto a finitely
//!   generated cone, with a KKT certificate.
//! * `constrained_min_norm`: min ||u|| over the slice of a cloud's hull where
//!   alpha = <u, x_bar>; the slice is a face of the simplex when every
//!   residual alpha_i - <u_i, x_bar> has one sign, and a bordered active-set
//!   QP otherwise.
//! * `fractional_sup`: sup of [<u,x> - alpha]_+ / ||u|| over the hull. The
//!   sign test of the pinned bisection ("does some hull point satisfy
//!   <u,x> - alpha >= beta ||u||") is, by minimax over compact sets, the
//!   statement dist(x, P) >= beta for the polyhedron P cut out by the cloud;
//!   the projection dual is a nonnegative QP solved exactly, which collapses
//!   the bisection to one solve. The vertex-ratio bracket initializer is kept
//!   as a consistency guard.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::config::SolverConfig;

/// Support threshold below which a simplex weight counts as zero.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Convex weights over a generator list; `support` holds indices with
/// lambda_i > 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    pub lambda: Vec<f64>,
    pub support: Vec<usize>,
}

impl SimplexWeights {
    fn from_lambda(lambda: Vec<f64>) -> Self {
        let support = lambda
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > SUPPORT_TOL)
            .map(|(i, _)| i)
            .collect();
        SimplexWeights { lambda, support }
    }
}

/// Nonnegative cone weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeWeights {
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MinNormOutcome {
    pub point: Vec<f64>,
    pub norm: f64,
    pub weights: SimplexWeights,
    /// max over generators of ||z||^2 - <z,q> at exit (Wolfe criterion slack).
    pub wolfe_gap: f64,
}

fn to_cols(points: &[Vec<f64>]) -> Vec<DVector<f64>> {
    points
        .iter()
        .map(|p| DVector::from_column_slice(p))
        .collect()
}

/// Minimum-norm point of co{points}. Points must be nonempty and share one
/// dimension. Exact on polytopes up to the Wolfe criterion
/// <z, q - z> >= -tol (1 + ||z||^2) for every generator q.
pub fn min_norm_point(points: &[Vec<f64>], cfg: &SolverConfig) -> MinNormOutcome {
    let cols = to_cols(points);
    let m = cols.len();
    assert!(m > 0, "min_norm_point needs at least one generator");

    // start from the shortest generator
    let j0 = (0..m)
        .min_by(|&a, &b| {
            cols[a]
                .norm_squared()
                .partial_cmp(&cols[b].norm_squared())
                .unwrap()
        })
        .unwrap();
    let mut corral: Vec<usize> = vec![j0];
    let mut lam: Vec<f64> = vec![1.0];
    let mut z = cols[j0].clone();

    let major_cap = cfg.max_iterations.max(50 * (m + 2));
    for _ in 0..major_cap {
        let zz = z.norm_squared();
        let (jmin, ipmin) = (0..m)
            .map(|j| (j, z.dot(&cols[j])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if zz - ipmin <= cfg.optimality_tol * (1.0 + zz) {
            break;
        }
        if corral.contains(&jmin) {
            break; // numerical stall: the best entering point is already in the corral
        }
        corral.push(jmin);
        lam.push(0.0);

        // minor cycle: step toward the affine minimizer, pruning the corral
        for _ in 0..(corral.len() + m + 8) {
            let beta = affine_min_norm_weights(&cols, &corral);
            if beta.iter().all(|&b| b >= -1e-12) {
                lam = beta;
                break;
            }
            let mut theta = 1.0f64;
            for (l, b) in lam.iter().zip(&beta) {
                if *b < *l {
                    let t = l / (l - b);
                    if *b <= 0.0 && t < theta {
                        theta = t;
                    }
                }
            }
            for (l, b) in lam.iter_mut().zip(&beta) {
                *l = (1.0 - theta) * *l + theta * *b;
            }
            // prune zeroed generators
            let keep: Vec<usize> = (0..corral.len())
                .filter(|&i| lam[i] > SUPPORT_TOL)
                .collect();
            if keep.len() == corral.len() {
                // force out the most negative direction to guarantee progress
                let drop = (0..corral.len())
                    .min_by(|&a, &b| beta[a].partial_cmp(&beta[b]).unwrap())
                    .unwrap();
                corral.remove(drop);
                lam.remove(drop);
            } else {
                corral = keep.iter().map(|&i| corral[i]).collect();
                lam = keep.iter().map(|&i| lam[i]).collect();
            }
            let total: f64 = lam.iter().sum();
            if total > 0.0 {
                for l in lam.iter_mut() {
                    *l /= total;
                }
            }
        }
        z = combine(&cols, &corral, &lam);
    }
    z = combine(&cols, &corral, &lam);

    let mut full = vec![0.0; m];
    for (i, &j) in corral.iter().enumerate() {
        full[j] += lam[i];
    }
    let wolfe_gap = (0..m)
        .map(|j| z.norm_squared() - z.dot(&cols[j]))
        .fold(0.0f64, f64::max);
    MinNormOutcome {
        point: z.iter().cloned().collect(),
        norm: z.norm(),
        weights: SimplexWeights::from_lambda(full),
        wolfe_gap,
    }
}

fn combine(cols: &[DVector<f64>], idx: &[usize], lam: &[f64]) -> DVector<f64> {
    let mut z = DVector::zeros(cols[0].len());
    for (i, &j) in idx.iter().enumerate() {
        z.axpy(lam[i], &cols[j], 1.0);
    }
    z
}

/// Weights of the min-norm point over the affine hull of the chosen columns:
/// solve [[G, 1], [1', 0]] [beta; nu] = [0; 1].
fn affine_min_norm_weights(cols: &[DVector<f64>], idx: &[usize]) -> Vec<f64> {
    let s = idx.len();
    let mut mat = DMatrix::<f64>::zeros(s + 1, s + 1);
    let mut trace = 0.0;
    for i in 0..s {
        for j in 0..s {
            mat[(i, j)] = cols[idx[i]].dot(&cols[idx[j]]);
        }
        trace += mat[(i, i)];
        mat[(i, s)] = 1.0;
        mat[(s, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s + 1);
    rhs[s] = 1.0;
    if let Some(sol) = mat.clone().lu().solve(&rhs) {
        if sol.iter().all(|v| v.is_finite()) {
            return sol.iter().take(s).cloned().collect();
        }
    }
    // duplicate generators make the Gram singular; regularize and retry
    for i in 0..s {
        mat[(i, i)] += 1e-12 * (1.0 + trace);
    }
    match mat.lu().solve(&rhs) {
        Some(sol) => sol.iter().take(s).cloned().collect(),
        None => {
            let mut fallback = vec![0.0; s];
            fallback[0] = 1.0;
            fallback
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConeProjection {
    /// ||target - sum mu_i g_i|| at the optimum.
    pub distance: f64,
    pub weights: ConeWeights,
    pub reconstruction: Vec<f64>,
    /// KKT certificate: every generator has <g_i, residual> <= tol, and
    /// active generators are orthogonal to the residual.
    pub kkt_satisfied: bool,
}

/// Euclidean distance from `target` to cone{generators} (nonnegative
/// combinations), via Lawson-Hanson NNLS.
pub fn cone_distance(generators: &[Vec<f64>], target: &[f64], cfg: &SolverConfig) -> ConeProjection {
    let cols = to_cols(generators);
    let m = cols.len();
    let b = DVector::from_column_slice(target);
    let mut mu = vec![0.0f64; m];
    let mut passive: Vec<usize> = Vec::new();

    let wscale = 1.0
        + cols
            .iter()
            .map(|c| c.dot(&b).abs())
            .fold(0.0f64, f64::max);
    let cap = 10 * m + 100;

    let mut iter = 0;
    loop {
        iter += 1;
        let r = residual_vec(&cols, &mu, &b);
        let mut jbest = usize::MAX;
        let mut wbest = cfg.optimality_tol * wscale;
        for j in 0..m {
            if passive.contains(&j) {
                continue;
            }
            let w = cols[j].dot(&r);
            if w > wbest {
                wbest = w;
                jbest = j;
            }
        }
        if jbest == usize::MAX || iter > cap {
            break;
        }
        passive.push(jbest);

        // inner: least squares on the passive set, stepping back when weights
        // leave the nonnegative orthant
        loop {
            let z = passive_least_squares(&cols, &passive, &b);
            if z.iter().all(|&v| v > SUPPORT_TOL) {
                for (i, &j) in passive.iter().enumerate() {
                    mu[j] = z[i];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (i, &j) in passive.iter().enumerate() {
                if z[i] <= SUPPORT_TOL && mu[j] > z[i] {
                    alpha = alpha.min(mu[j] / (mu[j] - z[i]));
                }
            }
            for (i, &j) in passive.iter().enumerate() {
                mu[j] += alpha * (z[i] - mu[j]);
            }
            passive.retain(|&j| {
                if mu[j] <= SUPPORT_TOL {
                    mu[j] = 0.0;
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() {
                break;
            }
        }
    }

    let recon = reconstruct(&cols, &mu);
    let r = &b - &recon;
    let distance = r.norm();
    let rtol = cfg.optimality_tol * wscale;
    let kkt_satisfied = (0..m).all(|j| {
        let w = cols[j].dot(&r);
        w <= rtol && (mu[j] <= SUPPORT_TOL || w.abs() <= rtol)
    });
    ConeProjection {
        distance,
        weights: ConeWeights { mu },
        reconstruction: recon.iter().cloned().collect(),
        kkt_satisfied,
    }
}

fn residual_vec(cols: &[DVector<f64>], mu: &[f64], b: &DVector<f64>) -> DVector<f64> {
    let mut r = b.clone();
    for (j, &m) in mu.iter().enumerate() {
        if m != 0.0 {
            r.axpy(-m, &cols[j], 1.0);
        }
    }
    r
}

fn reconstruct(cols: &[DVector<f64>], mu: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(cols[0].len());
    for (j, &m) in mu.iter().enumerate() {
        if m != 0.0 {
            out.axpy(m, &cols[j], 1.0);
        }
    }
    out
}

fn passive_least_squares(cols: &[DVector<f64>], passive: &[usize], b: &DVector<f64>) -> Vec<f64> {
    let k = cols[0].len();
    let s = passive.len();
    let mut a = DMatrix::<f64>::zeros(k, s);
    for (i, &j) in passive.iter().enumerate() {
        a.set_column(i, &cols[j]);
    }
    let svd = a.svd(true, true);
    let eps = 1e-12 * (1.0 + svd.singular_values.max());
    match svd.solve(b, eps) {
        Ok(z) => z.iter().cloned().collect(),
        Err(_) => vec![0.0; s],
    }
}

#[derive(Debug, Clone)]
pub struct PolyProjection {
    /// Projection of x onto {y : <u_i, y> <= alpha_i}.
    pub point: Vec<f64>,
    pub distance: f64,
    /// Dual weights; the active normals reconstruct x - point.
    pub mu: Vec<f64>,
}

/// Euclidean projection onto the polyhedron cut out by the rows. Returns
/// `None` when the polyhedron is empty (the dual nonnegative QP is
/// unbounded). Solved in the dual: minimize ||U mu||^2 / 2 - <d, mu> over
/// mu >= 0, with d_i = <u_i, x> - alpha_i and y = x - U mu.
pub fn project_polyhedron(
    rows: &[(Vec<f64>, f64)],
    x: &[f64],
    cfg: &SolverConfig,
) -> Option<PolyProjection> {
    // Collinear rows are nested halfspaces; keeping only the tightest per
    // direction spares the active set from exactly dependent columns.
    let mut tightest: HashMap<Vec<i64>, (usize, f64, f64)> = HashMap::new();
    for (i, (u, alpha)) in rows.iter().enumerate() {
        let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if un <= 1e-300 {
            if *alpha < 0.0 {
                return None; // 0 <= alpha is unsatisfiable
            }
            continue;
        }
        let key: Vec<i64> = u
            .iter()
            .map(|v| (v / un * 1e12).round() as i64)
            .collect();
        let entry = tightest.entry(key).or_insert((i, un, alpha / un));
        if alpha / un < entry.2 {
            *entry = (i, un, alpha / un);
        }
    }
    let mut kept: Vec<(usize, f64)> = tightest.values().map(|&(i, un, _)| (i, un)).collect();
    kept.sort_unstable_by_key(|&(i, _)| i);

    let m = kept.len();
    if m == 0 {
        return Some(PolyProjection {
            point: x.to_vec(),
            distance: 0.0,
            mu: vec![0.0; rows.len()],
        });
    }
    let cols: Vec<DVector<f64>> = kept
        .iter()
        .map(|&(i, un)| DVector::from_column_slice(&rows[i].0) / un)
        .collect();
    let xv = DVector::from_column_slice(x);
    let d: Vec<f64> = kept
        .iter()
        .zip(&cols)
        .map(|(&(i, un), u)| u.dot(&xv) - rows[i].1 / un)
        .collect();

    let wscale = 1.0 + d.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let mut mu = vec![0.0f64; m];
    let mut passive: Vec<usize> = Vec::new();
    let cap = 10 * m + 100;

    let mut iter = 0;
    loop {
        iter += 1;
        // w = d - U' (U mu): negative gradient of the dual objective
        let umu = reconstruct(&cols, &mu);
        let mut jbest = usize::MAX;
        let mut wbest = cfg.optimality_tol * wscale;
        for j in 0..m {
            if passive.contains(&j) {
                continue;
            }
            let w = d[j] - cols[j].dot(&umu);
            if w > wbest {
                wbest = w;
                jbest = j;
            }
        }
        if jbest == usize::MAX || iter > cap {
            break;
        }
        passive.push(jbest);

        loop {
            let z = match passive_dual_solve(&cols, &passive, &d, &mu) {
                Some(z) => z,
                None => return None, // dual unbounded: empty polyhedron
            };
            if z.iter().all(|&v| v > SUPPORT_TOL) {
                for (i, &j) in passive.iter().enumerate() {
                    mu[j] = z[i];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (i, &j) in passive.iter().enumerate() {
                if z[i] <= SUPPORT_TOL && mu[j] > z[i] {
                    alpha = alpha.min(mu[j] / (mu[j] - z[i]));
                }
            }
            for (i, &j) in passive.iter().enumerate() {
                mu[j] += alpha * (z[i] - mu[j]);
            }
            passive.retain(|&j| {
                if mu[j] <= SUPPORT_TOL {
                    mu[j] = 0.0;
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() {
                break;
            }
        }
        if mu.iter().any(|&v| v > 1e14) {
            return None;
        }
    }

    let umu = reconstruct(&cols, &mu);
    let y = &xv - &umu;
    let mut mu_full = vec![0.0; rows.len()];
    for (&(i, un), w) in kept.iter().zip(&mu) {
        mu_full[i] = w / un;
    }
    Some(PolyProjection {
        point: y.iter().cloned().collect(),
        distance: umu.norm(),
        mu: mu_full,
    })
}

/// Solve min ||U_P z||^2/2 - <d_P, z> on the passive set. When the Gram
/// matrix is singular and d_P has a null-space component the subproblem is
/// unbounded along that ray; riding it from the current iterate until a
/// passive coordinate hits zero keeps strict descent. `None` only when no
/// coordinate decreases along the ray, i.e. the recession direction is
/// nonnegative and the polyhedron is genuinely empty.
fn passive_dual_solve(
    cols: &[DVector<f64>],
    passive: &[usize],
    d: &[f64],
    mu: &[f64],
) -> Option<Vec<f64>> {
    let k = cols[0].len();
    let s = passive.len();
    let mut a = DMatrix::<f64>::zeros(k, s);
    for (i, &j) in passive.iter().enumerate() {
        a.set_column(i, &cols[j]);
    }
    let dp = DVector::from_iterator(s, passive.iter().map(|&j| d[j]));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank_tol = 1e-12 * (1.0 + smax);
    let v = svd.v_t.as_ref().unwrap();
    let sing = &svd.singular_values;
    // z = V diag(1/sigma^2) V' d_P on the row space of U_P
    let vd = v * &dp; // r-vector of projections
    let mut z = DVector::<f64>::zeros(s);
    let mut proj = DVector::<f64>::zeros(s);
    for i in 0..sing.len() {
        if sing[i] > rank_tol {
            let row = v.row(i).transpose();
            proj.axpy(vd[i], &row, 1.0);
            z.axpy(vd[i] / (sing[i] * sing[i]), &row, 1.0);
        }
    }
    let null = &dp - &proj;
    let null_norm = null.norm();
    if null_norm <= 1e-9 * (1.0 + dp.norm()) {
        return Some(z.iter().cloned().collect());
    }
    // Objective drops by t * ||null||^2 along z0 + t*null with U_P null = 0.
    let z0 = DVector::from_iterator(s, passive.iter().map(|&j| mu[j]));
    let step_tol = 1e-12 * (1.0 + null_norm);
    let mut t_max = f64::INFINITY;
    for i in 0..s {
        if null[i] < -step_tol {
            t_max = t_max.min(z0[i] / -null[i]);
        }
    }
    if !t_max.is_finite() {
        return None;
    }
    Some((z0 + null * t_max).iter().cloned().collect())
}

#[derive(Debug, Clone)]
pub struct ConstrainedMinNorm {
    pub u: Vec<f64>,
    pub norm: f64,
    pub weights: SimplexWeights,
}

fn slice_residuals(points: &[(Vec<f64>, f64)], x_bar: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let xn = x_bar.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = Vec::with_capacity(points.len());
    let mut scale = Vec::with_capacity(points.len());
    for (u, alpha) in points {
        let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ux: f64 = u.iter().zip(x_bar).map(|(a, b)| a * b).sum();
        r.push(alpha - ux);
        scale.push(1.0 + alpha.abs() + un * xn);
    }
    (r, scale)
}

/// min ||u|| over {(u, alpha) in co(points) : alpha = <u, x_bar>}.
/// `None` when the slice is empty, which is a valid outcome (the certificate
/// then reports a zero modulus).
pub fn constrained_min_norm(
    points: &[(Vec<f64>, f64)],
    x_bar: &[f64],
    cfg: &SolverConfig,
) -> Option<ConstrainedMinNorm> {
    if points.is_empty() {
        return None;
    }
    let (r, scale) = slice_residuals(points, x_bar);
    let mixed = r
        .iter()
        .zip(&scale)
        .any(|(ri, si)| *ri < -cfg.feasibility_tol * si);
    if !mixed {
        // one-signed residuals: feasible weights are supported on the zero set
        let zero: Vec<usize> = (0..points.len())
            .filter(|&i| r[i] <= cfg.feasibility_tol * scale[i])
            .collect();
        if zero.is_empty() {
            return None;
        }
        let us: Vec<Vec<f64>> = zero.iter().map(|&i| points[i].0.clone()).collect();
        let out = min_norm_point(&us, cfg);
        let mut lambda = vec![0.0; points.len()];
        for (k, &i) in zero.iter().enumerate() {
            lambda[i] = out.weights.lambda[k];
        }
        return Some(ConstrainedMinNorm {
            norm: out.norm,
            u: out.point,
            weights: SimplexWeights::from_lambda(lambda),
        });
    }
    let us: Vec<DVector<f64>> = points
        .iter()
        .map(|(u, _)| DVector::from_column_slice(u))
        .collect();
    simplex_eqp(&us, &r, cfg).map(|(u, lambda)| ConstrainedMinNorm {
        norm: u.norm(),
        u: u.iter().cloned().collect(),
        weights: SimplexWeights::from_lambda(lambda),
    })
}

/// Same minimum but over the hypographical relaxation <r, lambda> <= 0
/// (the cloud plus the vertical recession ray). Used as the independent
/// route for the coderivative norm: first try the unconstrained hull
/// minimizer, then fall back to the boundary problem.
pub fn constrained_min_norm_relaxed(
    points: &[(Vec<f64>, f64)],
    x_bar: &[f64],
    cfg: &SolverConfig,
) -> Option<ConstrainedMinNorm> {
    if points.is_empty() {
        return None;
    }
    let (r, scale) = slice_residuals(points, x_bar);
    let us_plain: Vec<Vec<f64>> = points.iter().map(|(u, _)| u.clone()).collect();
    let free = min_norm_point(&us_plain, cfg);
    let rdot: f64 = free
        .weights
        .lambda
        .iter()
        .zip(&r)
        .map(|(l, ri)| l * ri)
        .sum();
    let stol = cfg.feasibility_tol
        * free
            .weights
            .lambda
            .iter()
            .zip(&scale)
            .map(|(l, s)| l * s)
            .sum::<f64>()
            .max(1.0);
    if rdot <= stol {
        return Some(ConstrainedMinNorm {
            norm: free.norm,
            u: free.point,
            weights: free.weights,
        });
    }
    // optimum sits on the hyperplane <r, lambda> = 0
    let us: Vec<DVector<f64>> = points
        .iter()
        .map(|(u, _)| DVector::from_column_slice(u))
        .collect();
    simplex_eqp(&us, &r, cfg).map(|(u, lambda)| ConstrainedMinNorm {
        norm: u.norm(),
        u: u.iter().cloned().collect(),
        weights: SimplexWeights::from_lambda(lambda),
    })
}

/// Minimize lambda' G lambda over the affine slice {sum lambda = 1,
/// <r, lambda> = 0} of one face. Null-space method: the particular solution
/// and basis come from the constraint matrix itself, so both constraints
/// hold to machine precision regardless of how degenerate the Gram block
/// is. Returns the candidate weights plus least-squares KKT multipliers.
fn face_solve(us: &[DVector<f64>], r: &[f64], free: &[usize]) -> Option<(Vec<f64>, f64, f64)> {
    let nf = free.len();
    let mut cmat = DMatrix::<f64>::zeros(2, nf);
    for (i, &j) in free.iter().enumerate() {
        cmat[(0, i)] = 1.0;
        cmat[(1, i)] = r[j];
    }
    // particular solution lambda0 = C' (C C')^+ [1, 0]
    let cct = &cmat * cmat.transpose();
    let csvd = cct.svd(true, true);
    let ceps = 1e-12 * (1.0 + csvd.singular_values.max());
    let y = csvd
        .solve(&DVector::from_column_slice(&[1.0, 0.0]), ceps)
        .ok()?;
    let lam0 = cmat.transpose() * y;

    let mut gmat = DMatrix::<f64>::zeros(nf, nf);
    for a in 0..nf {
        for b in a..nf {
            let v = 2.0 * us[free[a]].dot(&us[free[b]]);
            gmat[(a, b)] = v;
            gmat[(b, a)] = v;
        }
    }

    // null basis of C from the eigenvectors of C'C
    let btb = cmat.transpose() * &cmat;
    let eig = btb.symmetric_eigen();
    let emax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let null_cols: Vec<usize> = (0..nf)
        .filter(|&i| eig.eigenvalues[i] <= 1e-12 * (1.0 + emax))
        .collect();
    let cand = if null_cols.is_empty() {
        lam0.clone()
    } else {
        let basis: Vec<_> = null_cols
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let nmat = DMatrix::from_columns(&basis);
        let h = nmat.transpose() * &gmat * &nmat;
        let rhs = -(nmat.transpose() * (&gmat * &lam0));
        let hsvd = h.svd(true, true);
        let heps = 1e-12 * (1.0 + hsvd.singular_values.max());
        match hsvd.solve(&rhs, heps) {
            Ok(w) => &lam0 + &nmat * w,
            Err(_) => lam0.clone(),
        }
    };

    // multipliers (a, b) fitted to the stationarity rows G lambda + a + b r
    let g = &gmat * &cand;
    let s1 = nf as f64;
    let (mut sr, mut srr, mut sg, mut sgr) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, &j) in free.iter().enumerate() {
        sr += r[j];
        srr += r[j] * r[j];
        sg += g[i];
        sgr += g[i] * r[j];
    }
    let mmat = DMatrix::from_row_slice(2, 2, &[s1, sr, sr, srr]);
    let msvd = mmat.svd(true, true);
    let meps = 1e-12 * (1.0 + msvd.singular_values.max());
    let ab = msvd
        .solve(&DVector::from_column_slice(&[-sg, -sgr]), meps)
        .unwrap_or_else(|_| DVector::zeros(2));
    Some((cand.iter().cloned().collect(), ab[0], ab[1]))
}

/// Active-set solve of min ||U lambda||^2 over the simplex intersected with
/// {<r, lambda> = 0}. Frozen coordinates sit at zero; each face problem is
/// solved exactly by the null-space method. `None` when the feasible set is
/// empty (all r_i strictly one-signed).
fn simplex_eqp(
    us: &[DVector<f64>],
    r: &[f64],
    cfg: &SolverConfig,
) -> Option<(DVector<f64>, Vec<f64>)> {
    let m = us.len();
    let rtol = cfg.feasibility_tol * (1.0 + r.iter().map(|v| v.abs()).fold(0.0f64, f64::max));

    // feasible start
    let mut lambda = vec![0.0f64; m];
    if let Some(i0) = (0..m).find(|&i| r[i].abs() <= rtol) {
        lambda[i0] = 1.0;
    } else {
        let ip = (0..m)
            .filter(|&i| r[i] > 0.0)
            .min_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap())?;
        let im = (0..m)
            .filter(|&i| r[i] < 0.0)
            .max_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap())?;
        let theta = r[ip] / (r[ip] - r[im]);
        lambda[im] = theta;
        lambda[ip] = 1.0 - theta;
    }

    let mut free: Vec<usize> = (0..m).filter(|&i| lambda[i] > 0.0).collect();
    let gscale = 1.0 + us.iter().map(|u| u.norm_squared()).fold(0.0f64, f64::max);
    let cap = 6 * m + 40;
    let mut best: Option<(f64, Vec<f64>)> = None;

    let objective = |lam: &[f64]| -> f64 {
        let mut z = DVector::<f64>::zeros(us[0].len());
        for (i, &l) in lam.iter().enumerate() {
            if l != 0.0 {
                z.axpy(l, &us[i], 1.0);
            }
        }
        z.norm_squared()
    };

    for _ in 0..cap {
        // iterates stay on the affine slice by construction; only weights
        // that also satisfy the sign constraint may act as fallbacks
        if lambda.iter().all(|&l| l >= -1e-12) {
            let obj = objective(&lambda);
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, lambda.clone()));
            }
        }
        // face problem; the null-space method keeps both equality
        // constraints exact even on rank-deficient faces
        let (cand, mult_a, mult_b) = face_solve(us, r, &free)?;

        if cand.iter().all(|&v| v >= -1e-12) {
            let mut new_lambda = vec![0.0; m];
            for (i, &j) in free.iter().enumerate() {
                new_lambda[j] = cand[i].max(0.0);
            }
            lambda = new_lambda;
            // release test on frozen coordinates
            let mut z = DVector::<f64>::zeros(us[0].len());
            for (i, &l) in lambda.iter().enumerate() {
                if l != 0.0 {
                    z.axpy(l, &us[i], 1.0);
                }
            }
            let mut worst = -cfg.optimality_tol * gscale;
            let mut worst_i = usize::MAX;
            for i in 0..m {
                if free.contains(&i) {
                    continue;
                }
                let s = 2.0 * us[i].dot(&z) + mult_a + mult_b * r[i];
                if s < worst {
                    worst = s;
                    worst_i = i;
                }
            }
            if worst_i == usize::MAX {
                let mut z_final = DVector::<f64>::zeros(us[0].len());
                for (i, &l) in lambda.iter().enumerate() {
                    if l != 0.0 {
                        z_final.axpy(l, &us[i], 1.0);
                    }
                }
                return Some((z_final, lambda));
            }
            free.push(worst_i);
        } else {
            // ratio step from the current feasible weights toward the
            // candidate; free coordinates already at zero block with a
            // degenerate zero-length step
            let mut theta = 1.0f64;
            let mut blocker = usize::MAX;
            for (i, &j) in free.iter().enumerate() {
                if cand[i] < -1e-14 {
                    let lj = lambda[j].max(0.0);
                    let t = lj / (lj - cand[i]);
                    if t < theta {
                        theta = t;
                        blocker = j;
                    }
                }
            }
            for (i, &j) in free.iter().enumerate() {
                lambda[j] += theta * (cand[i] - lambda[j]);
            }
            if blocker != usize::MAX {
                lambda[blocker] = 0.0;
                free.retain(|&j| j != blocker);
            } else {
                break;
            }
            if free.is_empty() {
                break;
            }
        }
    }
    // cap reached: return the best feasible iterate
    let (_, lam) = best?;
    let mut z = DVector::<f64>::zeros(us[0].len());
    for (i, &l) in lam.iter().enumerate() {
        if l != 0.0 {
            z.axpy(l, &us[i], 1.0);
        }
    }
    Some((z, lam))
}

/// sup over (u, alpha) in co(points) of [<u,x> - alpha]_+ / ||u||, with the
/// conventions 0/0 = 0 and positive/0 = +inf. Equals the distance from x to
/// the polyhedron cut out by the cloud.
pub fn fractional_sup(points: &[(Vec<f64>, f64)], x: &[f64], cfg: &SolverConfig) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut vertex_max = 0.0f64;
    for (u, alpha) in points {
        let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ux: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
        let num = (ux - alpha).max(0.0);
        if un <= 1e-14 {
            if num > cfg.feasibility_tol * (1.0 + alpha.abs()) {
                return f64::INFINITY;
            }
            continue; // 0/0 = 0
        }
        vertex_max = vertex_max.max(num / un);
    }
    match project_polyhedron(points, x, cfg) {
        None => f64::INFINITY,
        Some(proj) => {
            // the hull supremum dominates every vertex ratio; keep the vertex
            // bound as a guard against early projection termination
            proj.distance.max(vertex_max)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    /// Brute-force min-norm oracle: project the origin onto the affine hull
    /// of every subset of size <= dim+1 and keep projections with convex
    /// coordinates.
    pub(super) fn brute_force_min_norm(points: &[Vec<f64>]) -> Vec<f64> {
        let m = points.len();
        let k = points[0].len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut combo: Vec<usize> = Vec::new();
        fn visit(
            points: &[Vec<f64>],
            combo: &mut Vec<usize>,
            start: usize,
            maxlen: usize,
            best: &mut Option<(f64, Vec<f64>)>,
        ) {
            if !combo.is_empty() {
                let cols: Vec<DVector<f64>> =
                    combo.iter().map(|&i| DVector::from_column_slice(&points[i])).collect();
                let idx: Vec<usize> = (0..combo.len()).collect();
                let beta = affine_min_norm_weights(&cols, &idx);
                if beta.iter().all(|&b| b >= -1e-9) {
                    let mut z = DVector::<f64>::zeros(points[0].len());
                    for (i, &b) in beta.iter().enumerate() {
                        z.axpy(b, &cols[i], 1.0);
                    }
                    let n = z.norm_squared();
                    if best.as_ref().map_or(true, |(bn, _)| n < *bn) {
                        *best = Some((n, z.iter().cloned().collect()));
                    }
                }
            }
            if combo.len() == maxlen {
                return;
            }
            for j in start..points.len() {
                combo.push(j);
                visit(points, combo, j + 1, maxlen, best);
                combo.pop();
            }
        }
        visit(points, &mut combo, 0, (k + 1).min(m), &mut best);
        best.expect("nonempty point set").1
    }

    #[test]
    fn min_norm_two_axis_points() {
        let out = min_norm_point(&[vec![1.0, 0.0], vec![0.0, 1.0]], &cfg());
        assert!((out.point[0] - 0.5).abs() < 1e-9);
        assert!((out.point[1] - 0.5).abs() < 1e-9);
        assert!((out.norm - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn min_norm_segment_off_origin() {
        let out = min_norm_point(&[vec![2.0], vec![3.0]], &cfg());
        assert!((out.point[0] - 2.0).abs() < 1e-9);
        assert_eq!(out.weights.support, vec![0]);
    }

    #[test]
    fn min_norm_hull_containing_origin() {
        let out = min_norm_point(
            &[vec![1.0, 1.0], vec![-1.0, 0.5], vec![0.0, -1.0]],
            &cfg(),
        );
        assert!(out.norm < 1e-7, "norm {}", out.norm);
    }

    #[test]
    fn min_norm_wolfe_criterion_holds() {
        let pts = vec![
            vec![3.0, 1.0, -2.0],
            vec![1.0, -1.0, 0.5],
            vec![2.0, 2.0, 2.0],
            vec![-1.0, 4.0, 1.0],
        ];
        let out = min_norm_point(&pts, &cfg());
        let z = DVector::from_column_slice(&out.point);
        for q in &pts {
            let qv = DVector::from_column_slice(q);
            assert!(z.dot(&qv) - z.norm_squared() >= -1e-9 * (1.0 + z.norm_squared()));
        }
        // reconstruction from weights matches the point
        let mut rec = DVector::<f64>::zeros(3);
        for (i, &l) in out.weights.lambda.iter().enumerate() {
            rec.axpy(l, &DVector::from_column_slice(&pts[i]), 1.0);
        }
        assert!((rec - z).norm() < 1e-9);
    }

    #[test]
    fn min_norm_matches_brute_force_on_random_clouds() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..60 {
            let k = rng.random_range(1..=4usize);
            let m = rng.random_range(1..=8usize);
            let pts: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..k).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let fast = min_norm_point(&pts, &cfg());
            let slow = brute_force_min_norm(&pts);
            let sn = slow.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                (fast.norm - sn).abs() <= 1e-8 * (1.0 + sn),
                "norm mismatch {} vs {}",
                fast.norm,
                sn
            );
        }
    }

    #[test]
    fn cone_distance_orthogonal_target() {
        let out = cone_distance(&[vec![1.0, 0.0]], &[0.0, 1.0], &cfg());
        assert!((out.distance - 1.0).abs() < 1e-9);
        assert!(out.kkt_satisfied);
    }

    #[test]
    fn cone_distance_negative_orthant_target() {
        let out = cone_distance(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[-1.0, -1.0], &cfg());
        assert!((out.distance - 2.0f64.sqrt()).abs() < 1e-9);
        assert!(out.weights.mu.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn cone_distance_member_is_zero() {
        let out = cone_distance(
            &[vec![1.0, 0.0, -1.0], vec![0.0, 1.0, 2.0]],
            &[2.0, 3.0, 4.0],
            &cfg(),
        );
        // 2*(1,0,-1) + 3*(0,1,2) = (2,3,4)
        assert!(out.distance < 1e-9);
        assert!((out.weights.mu[0] - 2.0).abs() < 1e-7);
        assert!((out.weights.mu[1] - 3.0).abs() < 1e-7);
        assert!(out.kkt_satisfied);
    }

    #[test]
    fn project_polyhedron_halfspace() {
        let rows = vec![(vec![1.0, 1.0], 0.0)];
        let p = project_polyhedron(&rows, &[1.0, 1.0], &cfg()).unwrap();
        assert!((p.distance - 2.0f64.sqrt()).abs() < 1e-9);
        assert!(p.point.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn project_polyhedron_inside_point() {
        let rows = vec![(vec![1.0, 0.0], 1.0), (vec![-1.0, 0.0], 1.0)];
        let p = project_polyhedron(&rows, &[0.25, -3.0], &cfg()).unwrap();
        assert!(p.distance < 1e-12);
        assert_eq!(p.point, vec![0.25, -3.0]);
    }

    #[test]
    fn project_polyhedron_empty_detected() {
        // x <= -1 and -x <= -1 cannot both hold
        let rows = vec![(vec![1.0], -1.0), (vec![-1.0], -1.0)];
        assert!(project_polyhedron(&rows, &[0.0], &cfg()).is_none());
    }

    #[test]
    fn project_polyhedron_corner() {
        let rows = vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)];
        let p = project_polyhedron(&rows, &[2.0, 1.0], &cfg()).unwrap();
        assert!((p.distance - 5.0f64.sqrt()).abs() < 1e-9);
        assert!(p.point.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn constrained_min_norm_alternating_cloud() {
        // cloud of the countable alternating system at x_bar = 0: only the
        // binding row survives the slice
        let points = vec![
            (vec![1.0, 1.0], 0.0),
            (vec![-1.0, 0.0], 1.0),
            (vec![2.0, 0.0], 1.0),
            (vec![-3.0, 0.0], 1.0),
        ];
        let out = constrained_min_norm(&points, &[0.0, 0.0], &cfg()).unwrap();
        assert!((out.norm - 2.0f64.sqrt()).abs() < 1e-9);
        assert_eq!(out.weights.support, vec![0]);
    }

    #[test]
    fn constrained_min_norm_with_closure_family() {
        let mut points = vec![
            (vec![1.0, 1.0], 0.0),
            (vec![-1.0, 0.0], 1.0),
            (vec![2.0, 0.0], 1.0),
        ];
        for alpha in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            points.push((vec![alpha, 1.0], 0.0));
        }
        let out = constrained_min_norm(&points, &[0.0, 0.0], &cfg()).unwrap();
        assert!((out.norm - 1.0).abs() < 1e-9, "norm {}", out.norm);
        assert!((out.u[1] - 1.0).abs() < 1e-9);
        assert!(out.u[0].abs() < 1e-9);
    }

    #[test]
    fn constrained_min_norm_empty_slice() {
        // every residual strictly positive: slice empty, modulus zero
        let points = vec![(vec![1.0], 1.0), (vec![2.0], 0.5)];
        assert!(constrained_min_norm(&points, &[0.0], &cfg()).is_none());
    }

    #[test]
    fn relaxed_route_matches_equality_route() {
        let points = vec![
            (vec![1.0, 1.0], 0.0),
            (vec![-1.0, 0.0], 1.0),
            (vec![2.0, 0.0], 1.0),
            (vec![-3.0, 0.0], 1.0),
        ];
        let eq = constrained_min_norm(&points, &[0.0, 0.0], &cfg()).unwrap();
        let re = constrained_min_norm_relaxed(&points, &[0.0, 0.0], &cfg()).unwrap();
        assert!((eq.norm - re.norm).abs() < 1e-9);
    }

    #[test]
    fn eqp_mixed_sign_matches_grid_search() {
        // three points with mixed-sign residuals; oracle: dense simplex grid
        let us = vec![
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 2.0]),
            DVector::from_column_slice(&[-1.0, 1.0]),
        ];
        let r = vec![0.5, -0.25, 0.1];
        let (z, lam) = simplex_eqp(&us, &r, &cfg()).unwrap();
        // feasibility of the reported weights
        let rsum: f64 = lam.iter().zip(&r).map(|(l, ri)| l * ri).sum();
        assert!(rsum.abs() < 1e-8);
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let mut best = f64::INFINITY;
        let steps = 400usize;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let l = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ];
                let rs: f64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
                if rs.abs() > 2e-3 {
                    continue;
                }
                let zx = l[0] * 1.0 + l[2] * -1.0;
                let zy = l[1] * 2.0 + l[2] * 1.0;
                best = best.min((zx * zx + zy * zy).sqrt());
            }
        }
        assert!(
            z.norm() <= best + 2e-2,
            "eqp norm {} vs grid {}",
            z.norm(),
            best
        );
        assert!(z.norm() <= best + 2e-2 && best <= z.norm() + 2e-2);
    }

    #[test]
    fn fractional_sup_singleton() {
        // single row <(1,1), x> <= 0 at x = (1,1): ratio 2/sqrt(2)
        let v = fractional_sup(&[(vec![1.0, 1.0], 0.0)], &[1.0, 1.0], &cfg());
        assert!((v - 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn fractional_sup_inside_is_zero() {
        let v = fractional_sup(&[(vec![1.0], 1.0)], &[0.0], &cfg());
        assert_eq!(v, 0.0);
    }

    #[test]
    fn fractional_sup_zero_row_conventions() {
        // (0, 1): 0/0 = 0; (0, -1): positive/0 = +inf
        let ok = fractional_sup(&[(vec![0.0], 1.0), (vec![1.0], 1.0)], &[0.5], &cfg());
        assert_eq!(ok, 0.0);
        let inf = fractional_sup(&[(vec![0.0], -1.0)], &[0.0], &cfg());
        assert!(inf.is_infinite());
    }

    #[test]
    fn fractional_sup_dominates_vertex_ratios() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let k = rng.random_range(1..=3usize);
            let m = rng.random_range(1..=6usize);
            let pts: Vec<(Vec<f64>, f64)> = (0..m)
                .map(|_| {
                    (
                        (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
                        rng.random_range(0.1..2.0),
                    )
                })
                .collect();
            let x: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sup = fractional_sup(&pts, &x, &cfg());
            if !sup.is_finite() {
                continue;
            }
            for (u, alpha) in &pts {
                let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if un < 1e-12 {
                    continue;
                }
                let ux: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
                let ratio = (ux - alpha).max(0.0) / un;
                assert!(sup >= ratio - 1e-7, "sup {} below vertex ratio {}", sup, ratio);
            }
        }
    }
}
