//! Convex inequality systems `f_t(x) <= p_t` over a finite index family.
//!
//! Three function classes are supported, each with exact conjugates:
//!   affine        f(x) = <a,x> - b,          f*(u) = b on {a}, +inf elsewhere
//!   quadratic     f(x) = x'Qx/2 + <c,x> + d, f*(u) = <u-c, Q^+(u-c)>/2 - d
//!                 (finite only for u - c in range Q; Q symmetric PSD)
//!   max-affine    f(x) = max_i <a_i,x> - b_i, f*(u) = min { sum l_i b_i :
//!                 sum l_i a_i = u, l in simplex }, +inf outside co{a_i}
//!
//! Conjugate-graph sampling walks a grid in decision space and emits exact
//! points (u, f*(u)) with u a subgradient at the grid node; for affine pieces
//! the sample is the whole (finite) graph.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::GridSpec;
use crate::error::{Error, Result};

/// One affine piece `<a,x> - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Declared convex function. Quadratic matrices are stored row-major and must
/// be symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexFunctionSpec {
    Affine {
        a: Vec<f64>,
        b: f64,
    },
    Quadratic {
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        d: f64,
    },
    MaxAffine {
        pieces: Vec<AffinePiece>,
    },
}

/// Range-membership threshold for singular quadratic conjugates:
/// f*(u) is finite iff the least-squares residual of Q w = u - c is
/// at most RANGE_TOL * ||u - c||.
const RANGE_TOL: f64 = 1e-8;
/// Tie threshold when picking the maximal affine piece.
const TIE_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ConvexFunctionSpec {
    pub fn dim(&self) -> usize {
        match self {
            ConvexFunctionSpec::Affine { a, .. } => a.len(),
            ConvexFunctionSpec::Quadratic { c, .. } => c.len(),
            ConvexFunctionSpec::MaxAffine { pieces } => {
                pieces.first().map(|p| p.a.len()).unwrap_or(0)
            }
        }
    }

    pub fn validate(&self, dim: usize, label: &str) -> Result<()> {
        match self {
            ConvexFunctionSpec::Affine { a, .. } => {
                if a.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: a.len(),
                    });
                }
            }
            ConvexFunctionSpec::Quadratic { q, c, .. } => {
                if c.len() != dim || q.len() != dim || q.iter().any(|row| row.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: c.len(),
                    });
                }
                for i in 0..dim {
                    for j in 0..dim {
                        if (q[i][j] - q[j][i]).abs() > 1e-12 {
                            return Err(Error::NotPsd {
                                label: label.to_string(),
                                detail: format!(
                                    "asymmetric entries ({i},{j}): {} vs {}",
                                    q[i][j], q[j][i]
                                ),
                            });
                        }
                    }
                }
                let m = self.q_matrix();
                let eig = m.symmetric_eigenvalues();
                let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
                if min_eig < -1e-10 {
                    return Err(Error::NotPsd {
                        label: label.to_string(),
                        detail: format!("minimum eigenvalue {min_eig:.3e}"),
                    });
                }
            }
            ConvexFunctionSpec::MaxAffine { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::InvalidSystem(format!(
                        "constraint `{label}`: max-affine needs at least one piece"
                    )));
                }
                for p in pieces {
                    if p.a.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: p.a.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn q_matrix(&self) -> DMatrix<f64> {
        match self {
            ConvexFunctionSpec::Quadratic { q, .. } => {
                let n = q.len();
                DMatrix::from_fn(n, n, |i, j| q[i][j])
            }
            _ => panic!("q_matrix on non-quadratic"),
        }
    }

    /// f(x).
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFunctionSpec::Affine { a, b } => dot(a, x) - b,
            ConvexFunctionSpec::Quadratic { q, c, d } => {
                let mut quad = 0.0;
                for (i, row) in q.iter().enumerate() {
                    quad += x[i] * dot(row, x);
                }
                0.5 * quad + dot(c, x) + d
            }
            ConvexFunctionSpec::MaxAffine { pieces } => pieces
                .iter()
                .map(|p| dot(&p.a, x) - p.b)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// A deterministic subgradient at x. For max-affine ties the lowest-index
    /// maximal piece wins, so the choice is reproducible.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexFunctionSpec::Affine { a, .. } => a.clone(),
            ConvexFunctionSpec::Quadratic { q, c, .. } => q
                .iter()
                .zip(c)
                .map(|(row, ci)| dot(row, x) + ci)
                .collect(),
            ConvexFunctionSpec::MaxAffine { pieces } => {
                let vals: Vec<f64> = pieces.iter().map(|p| dot(&p.a, x) - p.b).collect();
                let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let scale = 1.0 + best.abs();
                let idx = vals
                    .iter()
                    .position(|&v| v >= best - TIE_TOL * scale)
                    .expect("max-affine has at least one piece");
                pieces[idx].a.clone()
            }
        }
    }

    /// The Fenchel conjugate f*(u); +inf outside dom f*.
    pub fn conjugate_value(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        Ok(match self {
            ConvexFunctionSpec::Affine { a, b } => {
                let close = a
                    .iter()
                    .zip(u)
                    .all(|(ai, ui)| (ai - ui).abs() <= 1e-10 * (1.0 + ai.abs()));
                if close {
                    *b
                } else {
                    f64::INFINITY
                }
            }
            ConvexFunctionSpec::Quadratic { c, d, .. } => {
                let m = self.q_matrix();
                let rhs = DVector::from_iterator(u.len(), u.iter().zip(c).map(|(ui, ci)| ui - ci));
                let rhs_norm = rhs.norm();
                if rhs_norm == 0.0 {
                    return Ok(-d);
                }
                // minimum-norm least squares via SVD handles Q singular
                let svd = m.clone().svd(true, true);
                let w = svd
                    .solve(&rhs, 1e-12 * (1.0 + svd.singular_values.max()))
                    .map_err(|e| Error::InvalidSystem(e.to_string()))?;
                let residual = (&m * &w - &rhs).norm();
                if residual > RANGE_TOL * rhs_norm {
                    f64::INFINITY
                } else {
                    0.5 * rhs.dot(&w) - d
                }
            }
            ConvexFunctionSpec::MaxAffine { pieces } => max_affine_conjugate(pieces, u),
        })
    }

    /// Exact points on gph f* obtained by sampling subgradients on `grid`.
    /// Affine: the single point (a, b) regardless of the grid. Max-affine:
    /// the pieces exposed at some grid node (all maximal pieces at each node).
    /// Quadratic: (grad f(x), <grad,x> - f(x)) at each node. Duplicates
    /// within 1e-12 are removed.
    pub fn conjugate_graph_sample(&self, grid: &GridSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        grid.validate(self.dim(), "sample")?;
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        match self {
            ConvexFunctionSpec::Affine { a, b } => out.push((a.clone(), *b)),
            ConvexFunctionSpec::Quadratic { .. } => {
                for x in grid.points() {
                    let u = self.subgradient(&x);
                    let beta = dot(&u, &x) - self.evaluate(&x);
                    out.push((u, beta));
                }
            }
            ConvexFunctionSpec::MaxAffine { pieces } => {
                let mut exposed = vec![false; pieces.len()];
                for x in grid.points() {
                    let vals: Vec<f64> = pieces.iter().map(|p| dot(&p.a, &x) - p.b).collect();
                    let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let scale = 1.0 + best.abs();
                    for (i, &v) in vals.iter().enumerate() {
                        if v >= best - TIE_TOL * scale {
                            exposed[i] = true;
                        }
                    }
                }
                for (i, p) in pieces.iter().enumerate() {
                    if exposed[i] {
                        out.push((p.a.clone(), p.b));
                    }
                }
            }
        }
        Ok(dedupe_points(out))
    }

    /// Spec of f - delta (the constant shift used when absorbing a parameter).
    pub fn shifted(&self, delta: f64) -> ConvexFunctionSpec {
        match self {
            ConvexFunctionSpec::Affine { a, b } => ConvexFunctionSpec::Affine {
                a: a.clone(),
                b: b + delta,
            },
            ConvexFunctionSpec::Quadratic { q, c, d } => ConvexFunctionSpec::Quadratic {
                q: q.clone(),
                c: c.clone(),
                d: d - delta,
            },
            ConvexFunctionSpec::MaxAffine { pieces } => ConvexFunctionSpec::MaxAffine {
                pieces: pieces
                    .iter()
                    .map(|p| AffinePiece {
                        a: p.a.clone(),
                        b: p.b + delta,
                    })
                    .collect(),
            },
        }
    }
}

/// min { sum l_i b_i : sum l_i a_i = u, l in simplex } by enumerating basic
/// feasible supports (size <= n+1 with independent columns in [A; 1]). Exact
/// at desk scale; +inf when u lies outside co{a_i}.
fn max_affine_conjugate(pieces: &[AffinePiece], u: &[f64]) -> f64 {
    let n = u.len();
    let m = pieces.len();
    let utol = 1e-9 * (1.0 + u.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let mut best = f64::INFINITY;
    let max_support = (n + 1).min(m);
    let mut combo: Vec<usize> = Vec::new();

    fn recurse(
        pieces: &[AffinePiece],
        u: &[f64],
        combo: &mut Vec<usize>,
        start: usize,
        max_support: usize,
        utol: f64,
        best: &mut f64,
    ) {
        if !combo.is_empty() {
            if let Some(val) = support_value(pieces, u, combo, utol) {
                if val < *best {
                    *best = val;
                }
            }
        }
        if combo.len() == max_support {
            return;
        }
        for j in start..pieces.len() {
            combo.push(j);
            recurse(pieces, u, combo, j + 1, max_support, utol, best);
            combo.pop();
        }
    }

    recurse(pieces, u, &mut combo, 0, max_support, utol, &mut best);
    best
}

/// Solve [A_S; 1'] l = [u; 1] for the given support; feasible when the
/// residual vanishes and l >= 0. Rank-deficient supports are skipped (their
/// basic solutions are covered by smaller supports).
fn support_value(pieces: &[AffinePiece], u: &[f64], combo: &[usize], utol: f64) -> Option<f64> {
    let n = u.len();
    let s = combo.len();
    let mut a = DMatrix::<f64>::zeros(n + 1, s);
    for (j, &idx) in combo.iter().enumerate() {
        for i in 0..n {
            a[(i, j)] = pieces[idx].a[i];
        }
        a[(n, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for i in 0..n {
        rhs[i] = u[i];
    }
    rhs[n] = 1.0;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if s > 1 {
        let smin = svd.singular_values.min();
        if smin <= 1e-10 * (1.0 + smax) {
            return None; // redundant support
        }
    }
    let l = svd.solve(&rhs, 1e-13 * (1.0 + smax)).ok()?;
    if (&a * &l - &rhs).norm() > utol {
        return None;
    }
    if l.iter().any(|&v| v < -1e-9) {
        return None;
    }
    Some(
        combo
            .iter()
            .zip(l.iter())
            .map(|(&idx, &li)| li.max(0.0) * pieces[idx].b)
            .sum(),
    )
}

fn dedupe_points(mut pts: Vec<(Vec<f64>, f64)>) -> Vec<(Vec<f64>, f64)> {
    pts.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.partial_cmp(y).unwrap())
            .find(|o| o.is_ne())
            .unwrap_or_else(|| a.1.partial_cmp(&b.1).unwrap())
    });
    pts.dedup_by(|a, b| {
        a.1 == b.1 && a.0 == b.0
            || (a.1 - b.1).abs() <= 1e-12
                && a.0.iter().zip(&b.0).all(|(x, y)| (x - y).abs() <= 1e-12)
    });
    pts
}

/// Finite family of convex constraints sharing one decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySystem {
    /// Decision-space dimension n.
    pub dim: usize,
    /// Ordered index labels, one per constraint.
    pub labels: Vec<String>,
    pub functions: Vec<ConvexFunctionSpec>,
}

impl InequalitySystem {
    pub fn new(dim: usize, labels: Vec<String>, functions: Vec<ConvexFunctionSpec>) -> Result<Self> {
        let sys = InequalitySystem {
            dim,
            labels,
            functions,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(Error::InvalidSystem("system has no constraints".into()));
        }
        if self.labels.len() != self.functions.len() {
            return Err(Error::InvalidSystem(format!(
                "{} labels for {} constraints",
                self.labels.len(),
                self.functions.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.labels {
            if !seen.insert(l.clone()) {
                return Err(Error::InvalidSystem(format!("duplicate index label `{l}`")));
            }
        }
        for (l, f) in self.labels.iter().zip(&self.functions) {
            f.validate(self.dim, l)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// sup_t [f_t(x) - p_t]_+ : distance of p to the inverse image of x in
    /// the sup-norm, and the natural infeasibility measure.
    pub fn residual(&self, p: &Parameter, x: &[f64]) -> Result<f64> {
        self.check_parameter(p)?;
        self.check_point(x)?;
        let mut worst: f64 = 0.0;
        for (f, pt) in self.functions.iter().zip(&p.values) {
            worst = worst.max(f.evaluate(x) - pt);
        }
        Ok(worst.max(0.0))
    }

    /// Largest constraint value sup_t (f_t(x) - p_t), sign preserved.
    pub fn sup_value(&self, p: &Parameter, x: &[f64]) -> Result<f64> {
        self.check_parameter(p)?;
        self.check_point(x)?;
        let mut worst = f64::NEG_INFINITY;
        for (f, pt) in self.functions.iter().zip(&p.values) {
            worst = worst.max(f.evaluate(x) - pt);
        }
        Ok(worst)
    }

    /// System with every f_t replaced by f_t - p_t (parameter absorbed).
    pub fn shift_by(&self, p: &Parameter) -> Result<InequalitySystem> {
        self.check_parameter(p)?;
        Ok(InequalitySystem {
            dim: self.dim,
            labels: self.labels.clone(),
            functions: self
                .functions
                .iter()
                .zip(&p.values)
                .map(|(f, &pt)| f.shifted(pt))
                .collect(),
        })
    }

    pub fn zero_parameter(&self) -> Parameter {
        Parameter {
            values: vec![0.0; self.len()],
        }
    }

    pub fn check_parameter(&self, p: &Parameter) -> Result<()> {
        if p.values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: p.values.len(),
            });
        }
        if p.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem("parameter has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Perturbation vector indexed like the system, measured in the sup-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameter {
    pub values: Vec<f64>,
}

impl Parameter {
    pub fn new(values: Vec<f64>) -> Self {
        Parameter { values }
    }

    pub fn zeros(len: usize) -> Self {
        Parameter {
            values: vec![0.0; len],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}
