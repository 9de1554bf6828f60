//! Built-in regression scenarios. These are small systems with known
//! certificates, used by the CLI, the golden reports, and the test suite.

use crate::convex::{ConvexFunctionSpec, AffinePiece};
use crate::error::{Error, Result};

use super::{
    ClosureDecl, ConstraintDecl, GradientPair, ObjectiveSpec, Probe, QueryDecl, SamplingSpec,
    Scenario, Truncation,
};

/// Name and one-line summary of every builtin.
pub const BUILTIN_SUMMARIES: &[(&str, &str)] = &[
    (
        "example1_countable",
        "two variables; one binding row plus alternating-sign rows with unbounded coefficients; \
         level = number of extra rows; optional closure family flips the modulus from 1/sqrt(2) to 1",
    ),
    (
        "example2_unbounded",
        "one variable; rows t*x <= 1/t for t = 1..level; the origin is a strong Slater point, \
         so the modulus is zero",
    ),
    (
        "parabola",
        "one variable; x^2 - 1 <= p probed at both boundary points, with a linear objective \
         minimized at (p, x) = (0, -1)",
    ),
    (
        "parabola_raw",
        "one variable; x^2 <= p, where the strong Slater condition fails at the nominal parameter",
    ),
    (
        "disk",
        "two variables; unit disk probed on and off the boundary, with a linear objective \
         minimized at (0, (-1, 0))",
    ),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN_SUMMARIES.iter().map(|(n, _)| *n).collect()
}

fn affine(a: Vec<f64>, b: f64) -> ConvexFunctionSpec {
    ConvexFunctionSpec::Affine { a, b }
}

fn no_level(name: &str, level: Option<usize>) -> Result<()> {
    if level.is_some() {
        return Err(Error::Scenario(format!(
            "builtin '{name}' takes no truncation level"
        )));
    }
    Ok(())
}

fn no_closure(name: &str, with_closure: bool) -> Result<()> {
    if with_closure {
        return Err(Error::Scenario(format!(
            "builtin '{name}' has no declared closure family"
        )));
    }
    Ok(())
}

/// Construct a builtin scenario. `level` is the truncation level where one
/// applies; `with_closure` attaches the closure family of
/// `example1_countable`.
pub fn builtin_scenario(name: &str, level: Option<usize>, with_closure: bool) -> Result<Scenario> {
    let scenario = match name {
        "example1_countable" => example1(level.unwrap_or(3), with_closure),
        "example2_unbounded" => {
            no_closure(name, with_closure)?;
            example2(level.unwrap_or(10))
        }
        "parabola" => {
            no_level(name, level)?;
            no_closure(name, with_closure)?;
            parabola()
        }
        "parabola_raw" => {
            no_level(name, level)?;
            no_closure(name, with_closure)?;
            parabola_raw()
        }
        "disk" => {
            no_level(name, level)?;
            no_closure(name, with_closure)?;
            disk()
        }
        other => {
            return Err(Error::Scenario(format!(
                "unknown builtin '{other}'; available: {}",
                builtin_names().join(", ")
            )))
        }
    };
    scenario.validate()?;
    Ok(scenario)
}

fn example1(n: usize, with_closure: bool) -> Scenario {
    let mut constraints = vec![ConstraintDecl {
        label: "t0".into(),
        f: affine(vec![1.0, 1.0], 0.0),
    }];
    for t in 1..=n {
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        constraints.push(ConstraintDecl {
            label: format!("t{t}"),
            f: affine(vec![sign * t as f64, 0.0], 1.0),
        });
    }
    let closure = with_closure.then(|| ClosureDecl {
        justification: "The rows (a_t, 0) with |a_t| = t grow without bound; convex \
                        combinations with weight ~1/t on large t converge to (alpha, 1, 0) \
                        for every real alpha, so every finite truncation misses these limit \
                        generators. The declared family covers the range of alpha the \
                        min-norm problem at the origin can select from."
            .into(),
        points: [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&a| vec![a, 1.0, 0.0])
            .collect(),
    });
    let m = n + 1;
    let mut grad_p = vec![0.0; m];
    grad_p[0] = 1.0;
    Scenario {
        name: if with_closure {
            format!("example1_countable_n{n}_closure")
        } else {
            format!("example1_countable_n{n}")
        },
        dim: 2,
        description: "x1 + x2 <= p0 together with alternating rows sign(t) * t * x1 <= 1 + p_t"
            .into(),
        seed: 7,
        truncation: Some(Truncation {
            family: "row 0 plus rows indexed by t = 1, 2, ... with coefficient (-1)^t t".into(),
            level: n,
        }),
        constraints,
        closure,
        probes: vec![
            Probe {
                x: vec![0.0, 0.0],
                p: None,
                distance: true,
                modulus: true,
                queries: vec![QueryDecl {
                    v: vec![1.0, 1.0],
                    alpha: 0.0,
                }],
                gradients: vec![GradientPair {
                    grad_p,
                    grad_x: vec![-1.0, -1.0],
                }],
            },
            Probe {
                x: vec![1.0, 1.0],
                p: None,
                distance: true,
                modulus: false,
                queries: vec![],
                gradients: vec![],
            },
        ],
        objective: None,
        grids: None,
        epsilon_schedule: None,
        tolerances: Default::default(),
        sampling: Some(SamplingSpec {
            radii: vec![0.1, 0.01],
            samples: 400,
            probe: 0,
        }),
    }
}

fn example2(m: usize) -> Scenario {
    let constraints = (1..=m)
        .map(|t| ConstraintDecl {
            label: format!("t{t}"),
            f: affine(vec![t as f64], 1.0 / t as f64),
        })
        .collect();
    let md = m as f64;
    Scenario {
        name: format!("example2_unbounded_m{m}"),
        dim: 1,
        description: "t * x <= 1/t + p_t on the integer grid t = 1..level".into(),
        seed: 7,
        truncation: Some(Truncation {
            family: "rows indexed by integer t >= 1 with coefficient t and offset 1/t".into(),
            level: m,
        }),
        constraints,
        closure: None,
        probes: vec![Probe {
            x: vec![0.0],
            p: None,
            distance: true,
            modulus: true,
            queries: vec![],
            gradients: vec![],
        }],
        objective: None,
        grids: None,
        epsilon_schedule: None,
        tolerances: Default::default(),
        sampling: Some(SamplingSpec {
            radii: vec![1.0 / (4.0 * md), 1.0 / (8.0 * md)],
            samples: 400,
            probe: 0,
        }),
    }
}

fn parabola() -> Scenario {
    Scenario {
        name: "parabola".into(),
        dim: 1,
        description: "x^2 - 1 <= p; the feasible set is [-sqrt(1+p), sqrt(1+p)]".into(),
        seed: 7,
        truncation: None,
        constraints: vec![ConstraintDecl {
            label: "t0".into(),
            f: ConvexFunctionSpec::Quadratic {
                q: vec![vec![2.0]],
                c: vec![0.0],
                d: -1.0,
            },
        }],
        closure: None,
        probes: vec![
            Probe {
                x: vec![1.0],
                p: None,
                distance: true,
                modulus: true,
                queries: vec![QueryDecl {
                    v: vec![1.0],
                    alpha: 1.0,
                }],
                gradients: vec![],
            },
            Probe {
                x: vec![2.0],
                p: None,
                distance: true,
                modulus: false,
                queries: vec![],
                gradients: vec![],
            },
            Probe {
                x: vec![-1.0],
                p: None,
                distance: true,
                modulus: true,
                queries: vec![],
                gradients: vec![],
            },
        ],
        // minimized over the graph of F at (p, x) = (0, -1)
        objective: Some(ObjectiveSpec::Linear {
            w_p: vec![0.5],
            c_x: vec![1.0],
        }),
        grids: None,
        epsilon_schedule: None,
        tolerances: Default::default(),
        sampling: Some(SamplingSpec {
            radii: vec![0.05, 0.01],
            samples: 200,
            probe: 0,
        }),
    }
}

fn parabola_raw() -> Scenario {
    Scenario {
        name: "parabola_raw".into(),
        dim: 1,
        description: "x^2 <= p; the strong Slater condition fails at the nominal parameter, \
                      so certificate routes report skips"
            .into(),
        seed: 7,
        truncation: None,
        constraints: vec![ConstraintDecl {
            label: "t0".into(),
            f: ConvexFunctionSpec::Quadratic {
                q: vec![vec![2.0]],
                c: vec![0.0],
                d: 0.0,
            },
        }],
        closure: None,
        probes: vec![Probe {
            x: vec![0.0],
            p: None,
            distance: true,
            modulus: true,
            queries: vec![],
            gradients: vec![],
        }],
        objective: None,
        grids: None,
        epsilon_schedule: None,
        tolerances: Default::default(),
        sampling: Some(SamplingSpec {
            radii: vec![0.01],
            samples: 50,
            probe: 0,
        }),
    }
}

fn disk() -> Scenario {
    Scenario {
        name: "disk".into(),
        dim: 2,
        description: "x1^2 + x2^2 - 1 <= p: the closed unit disk, inflated by the parameter"
            .into(),
        seed: 7,
        truncation: None,
        constraints: vec![ConstraintDecl {
            label: "t0".into(),
            f: ConvexFunctionSpec::Quadratic {
                q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
                c: vec![0.0, 0.0],
                d: -1.0,
            },
        }],
        closure: None,
        probes: vec![
            Probe {
                x: vec![1.0, 0.0],
                p: None,
                distance: true,
                modulus: true,
                queries: vec![QueryDecl {
                    v: vec![1.0, 0.0],
                    alpha: 1.0,
                }],
                gradients: vec![],
            },
            Probe {
                x: vec![2.0, 0.0],
                p: None,
                distance: true,
                modulus: false,
                queries: vec![],
                gradients: vec![],
            },
            Probe {
                x: vec![-1.0, 0.0],
                p: None,
                distance: true,
                modulus: true,
                queries: vec![],
                gradients: vec![],
            },
        ],
        // minimized over the graph of F at (p, x) = (0, (-1, 0))
        objective: Some(ObjectiveSpec::Linear {
            w_p: vec![0.5],
            c_x: vec![1.0, 0.0],
        }),
        grids: None,
        epsilon_schedule: None,
        tolerances: Default::default(),
        sampling: Some(SamplingSpec {
            radii: vec![0.05],
            samples: 200,
            probe: 0,
        }),
    }
}

/// Keep the pieces import alive for scenario files that use max-affine
/// constraints; none of the builtins do, but user scenarios exercise it.
#[allow(dead_code)]
fn max_affine_example() -> ConvexFunctionSpec {
    ConvexFunctionSpec::MaxAffine {
        pieces: vec![
            AffinePiece {
                a: vec![1.0],
                b: 0.0,
            },
            AffinePiece {
                a: vec![-1.0],
                b: 0.0,
            },
        ],
    }
}
