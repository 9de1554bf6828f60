//! Declarative scenario files: a complete description of one analysis run
//! (system, probes, grids, tolerances, sampling plan) in a single TOML
//! document, plus the driver that executes it into a `Report`.

pub mod builtins;
pub mod report;

pub use report::{render_text, write_report, Outcome, ProbeReport, Report, ReportFormat};

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::charset::{build_characteristic, ClosurePoint};
use crate::config::{GridSet, SolverConfig};
use crate::convex::{ConvexFunctionSpec, InequalitySystem, Parameter};
use crate::error::{Error, Result};
use crate::optimality::{check_stationarity_smooth, farkas_consequence, ConsequenceQuery};
use crate::stability::{
    check_ssc, coderivative_norm, distance_dual, distance_primal, lip_bound, lip_sample,
    AnalysisOptions, DEFAULT_EPSILON_SCHEDULE,
};

use report::{DistanceReport, FarkasReport, StationarityReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub truncation: Option<Truncation>,
    pub constraints: Vec<ConstraintDecl>,
    #[serde(default)]
    pub closure: Option<ClosureDecl>,
    #[serde(default)]
    pub probes: Vec<Probe>,
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default)]
    pub grids: Option<GridSet>,
    #[serde(default)]
    pub epsilon_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: SolverConfig,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
}

/// Where a finite system came from, when it stands in for an infinite one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub family: String,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDecl {
    pub label: String,
    pub f: ConvexFunctionSpec,
}

/// Extra generators asserted to lie in the closed characteristic set at the
/// nominal parameter. Rows are (u_1 .. u_n, alpha). The justification is
/// mandatory: these points are claims about limits the sampler cannot see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureDecl {
    pub justification: String,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub radii: Vec<f64>,
    pub samples: usize,
    /// Index of the probe whose x is the sampling center.
    #[serde(default)]
    pub probe: usize,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub x: Vec<f64>,
    /// Parameter for distance and Farkas queries; nominal when absent.
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub distance: bool,
    /// Compute lip_bound and coderivative_norm at this x.
    #[serde(default = "default_true")]
    pub modulus: bool,
    #[serde(default)]
    pub queries: Vec<QueryDecl>,
    #[serde(default)]
    pub gradients: Vec<GradientPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDecl {
    pub v: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientPair {
    pub grad_p: Vec<f64>,
    pub grad_x: Vec<f64>,
}

/// Declared objective phi(p, x), used to derive stationarity gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// <w_p, p> + <c_x, x>
    Linear { w_p: Vec<f64>, c_x: Vec<f64> },
    /// <w_p, p> + 1/2 x'Qx + <c_x, x> with symmetric Q
    QuadraticX {
        w_p: Vec<f64>,
        q: Vec<Vec<f64>>,
        c_x: Vec<f64>,
    },
}

impl ObjectiveSpec {
    pub fn value(&self, p: &[f64], x: &[f64]) -> f64 {
        match self {
            ObjectiveSpec::Linear { w_p, c_x } => {
                dot(w_p, p) + dot(c_x, x)
            }
            ObjectiveSpec::QuadraticX { w_p, q, c_x } => {
                let mut v = dot(w_p, p) + dot(c_x, x);
                for (i, row) in q.iter().enumerate() {
                    for (j, qij) in row.iter().enumerate() {
                        v += 0.5 * qij * x[i] * x[j];
                    }
                }
                v
            }
        }
    }

    pub fn gradient(&self, _p: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            ObjectiveSpec::Linear { w_p, c_x } => (w_p.clone(), c_x.clone()),
            ObjectiveSpec::QuadraticX { w_p, q, c_x } => {
                let gx = (0..x.len())
                    .map(|i| c_x[i] + (0..x.len()).map(|j| q[i][j] * x[j]).sum::<f64>())
                    .collect();
                (w_p.clone(), gx)
            }
        }
    }

    fn validate(&self, m: usize, n: usize) -> Result<()> {
        let (w_p, cx_len) = match self {
            ObjectiveSpec::Linear { w_p, c_x } => (w_p, c_x.len()),
            ObjectiveSpec::QuadraticX { w_p, q, c_x } => {
                if q.len() != n || q.iter().any(|r| r.len() != n) {
                    return Err(Error::Scenario(format!(
                        "objective: q must be {n}x{n}"
                    )));
                }
                for i in 0..n {
                    for j in 0..i {
                        if (q[i][j] - q[j][i]).abs() > 1e-12 {
                            return Err(Error::Scenario(
                                "objective: q must be symmetric".into(),
                            ));
                        }
                    }
                }
                (w_p, c_x.len())
            }
        };
        if w_p.len() != m {
            return Err(Error::Scenario(format!(
                "objective: w_p has length {}, expected one weight per constraint ({m})",
                w_p.len()
            )));
        }
        if cx_len != n {
            return Err(Error::Scenario(format!(
                "objective: c_x has length {cx_len}, expected {n}"
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Scenario {
    pub fn system(&self) -> Result<InequalitySystem> {
        InequalitySystem::new(
            self.dim,
            self.constraints.iter().map(|c| c.label.clone()).collect(),
            self.constraints.iter().map(|c| c.f.clone()).collect(),
        )
    }

    pub fn options(&self) -> Result<AnalysisOptions> {
        let grids = self
            .grids
            .clone()
            .unwrap_or_else(|| GridSet::default_for(self.dim));
        grids.validate(self.dim)?;
        let closure_points = match &self.closure {
            None => Vec::new(),
            Some(decl) => decl
                .points
                .iter()
                .map(|row| ClosurePoint {
                    u: row[..self.dim].to_vec(),
                    alpha: row[self.dim],
                })
                .collect(),
        };
        Ok(AnalysisOptions {
            grids,
            closure_points,
            epsilon_schedule: self
                .epsilon_schedule
                .clone()
                .unwrap_or_else(|| DEFAULT_EPSILON_SCHEDULE.to_vec()),
            cfg: self.tolerances.clone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Scenario("name must be nonempty".into()));
        }
        if self.constraints.is_empty() {
            return Err(Error::Scenario(format!(
                "scenario '{}' declares no constraints",
                self.name
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.constraints {
            if !seen.insert(&c.label) {
                return Err(Error::Scenario(format!(
                    "duplicate constraint label '{}'",
                    c.label
                )));
            }
            c.f.validate(self.dim, &c.label)?;
        }
        let m = self.constraints.len();
        let n = self.dim;
        if let Some(decl) = &self.closure {
            if decl.justification.trim().is_empty() {
                return Err(Error::Scenario(
                    "closure points require a nonempty justification".into(),
                ));
            }
            for (i, row) in decl.points.iter().enumerate() {
                if row.len() != n + 1 {
                    return Err(Error::Scenario(format!(
                        "closure point {i} has length {}, expected {}",
                        row.len(),
                        n + 1
                    )));
                }
            }
        }
        for (i, probe) in self.probes.iter().enumerate() {
            if probe.x.len() != n {
                return Err(Error::Scenario(format!(
                    "probe {i}: x has length {}, expected {n}",
                    probe.x.len()
                )));
            }
            if let Some(p) = &probe.p {
                if p.len() != m {
                    return Err(Error::Scenario(format!(
                        "probe {i}: p has length {}, expected one entry per constraint ({m})",
                        p.len()
                    )));
                }
            }
            for (qi, q) in probe.queries.iter().enumerate() {
                if q.v.len() != n {
                    return Err(Error::Scenario(format!(
                        "probe {i}, query {qi}: v has length {}, expected {n}",
                        q.v.len()
                    )));
                }
            }
            for (gi, g) in probe.gradients.iter().enumerate() {
                if g.grad_p.len() != m || g.grad_x.len() != n {
                    return Err(Error::Scenario(format!(
                        "probe {i}, gradient {gi}: expected lengths {m} (p) and {n} (x)"
                    )));
                }
            }
        }
        if let Some(obj) = &self.objective {
            obj.validate(m, n)?;
        }
        if let Some(g) = &self.grids {
            g.validate(n)?;
        }
        if let Some(s) = &self.sampling {
            if s.samples == 0 {
                return Err(Error::Scenario("sampling.samples must be positive".into()));
            }
            if s.radii.is_empty() {
                return Err(Error::Scenario("sampling.radii must be nonempty".into()));
            }
            if s.radii.iter().any(|r| !r.is_finite() || *r < 0.0) {
                return Err(Error::Scenario(
                    "sampling.radii must be finite and nonnegative".into(),
                ));
            }
            if s.probe >= self.probes.len() {
                return Err(Error::Scenario(format!(
                    "sampling.probe {} out of range ({} probes)",
                    s.probe,
                    self.probes.len()
                )));
            }
        }
        Ok(())
    }

    /// Canonical serialized form; the report hash is taken over this.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Scenario(format!("serialization failed: {e}")))
    }

    pub fn hash(&self) -> Result<String> {
        let text = self.canonical_toml()?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        Ok(hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let scenario: Scenario = toml::from_str(&text).map_err(|e| {
        Error::Scenario(format!("{}: {e}", path.display()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    scenario.validate()?;
    std::fs::write(path, scenario.canonical_toml()?)?;
    Ok(())
}

/// Execute a scenario end to end. Prerequisite failures mark the dependent
/// results as skipped instead of aborting the run.
pub fn run_scenario(scenario: &Scenario) -> Result<Report> {
    scenario.validate()?;
    let system = scenario.system()?;
    let opts = scenario.options()?;
    let slater = check_ssc(&system, &opts)?;
    let cloud = build_characteristic(&system, &system.zero_parameter(), &opts.grids)?
        .with_closure_points(opts.closure_points.clone());
    let cloud_csv = cloud.to_csv();
    let ssc_ok = slater.satisfied;

    let mut probe_reports = Vec::with_capacity(scenario.probes.len());
    for (index, probe) in scenario.probes.iter().enumerate() {
        let p = Parameter::new(
            probe
                .p
                .clone()
                .unwrap_or_else(|| vec![0.0; system.len()]),
        );
        let distance = if probe.distance {
            Some(if !ssc_ok {
                Outcome::skipped("SSC fails")
            } else {
                Outcome::from_result(
                    distance_dual(&system, &p, &probe.x, &opts).and_then(|dual| {
                        let primal = distance_primal(&system, &p, &probe.x, &opts)?;
                        Ok(DistanceReport {
                            dual: dual.value,
                            primal,
                            gap: dual.gap,
                        })
                    }),
                )
            })
        } else {
            None
        };
        let modulus = if probe.modulus {
            Some(if !ssc_ok {
                Outcome::skipped("SSC fails")
            } else {
                Outcome::from_result(lip_bound(&system, &probe.x, &opts))
            })
        } else {
            None
        };
        let coderivative = if probe.modulus {
            Some(if !ssc_ok {
                Outcome::skipped("SSC fails")
            } else {
                Outcome::from_result(coderivative_norm(&system, &probe.x, &opts))
            })
        } else {
            None
        };
        let farkas = probe
            .queries
            .iter()
            .map(|q| {
                let outcome = Outcome::from_result(
                    farkas_consequence(
                        &system,
                        &p,
                        &ConsequenceQuery {
                            v: q.v.clone(),
                            alpha: q.alpha,
                        },
                        &opts,
                    )
                    .map(|o| FarkasReport {
                        holds: o.holds,
                        residual: o.residual,
                    }),
                );
                (q.clone(), outcome)
            })
            .collect();
        let mut gradients = probe.gradients.clone();
        if let Some(obj) = &scenario.objective {
            let (gp, gx) = obj.gradient(&p.values, &probe.x);
            gradients.push(GradientPair {
                grad_p: gp,
                grad_x: gx,
            });
        }
        let stationarity = gradients
            .iter()
            .map(|g| {
                Outcome::from_result(
                    check_stationarity_smooth(&system, &probe.x, &g.grad_p, &g.grad_x, &opts)
                        .map(|c| StationarityReport {
                            verdict: c.verdict.to_string(),
                            residual: c.residual,
                        }),
                )
            })
            .collect();
        probe_reports.push(ProbeReport {
            index,
            x: probe.x.clone(),
            p: p.values,
            distance,
            modulus,
            coderivative,
            farkas,
            stationarity,
        });
    }

    let (trend, trend_note) = match &scenario.sampling {
        None => (Vec::new(), None),
        Some(spec) => {
            if !ssc_ok {
                (Vec::new(), Some("skipped: SSC fails".to_string()))
            } else {
                let center = &scenario.probes[spec.probe].x;
                match lip_sample(&system, center, &spec.radii, spec.samples, scenario.seed, &opts)
                {
                    Ok(rows) => (rows, None),
                    Err(e) => (Vec::new(), Some(format!("skipped: {e}"))),
                }
            }
        }
    };

    Ok(Report {
        scenario_name: scenario.name.clone(),
        scenario_hash: scenario.hash()?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: scenario.seed,
        slater,
        probes: probe_reports,
        trend,
        trend_note,
        cloud_csv,
        timings: None,
    })
}
