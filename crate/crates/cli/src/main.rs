//! Command-line front end for the stability-certificate library.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 prerequisite
//! failure (infeasible nominal point, violated strong Slater condition,
//! empty feasible set). Diagnostics go to stderr, results to stdout or the
//! --out path. Numeric output is full double precision so regression
//! suites can diff it byte for byte; --pretty switches to aligned tables.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sistab::scenario::builtins::{builtin_scenario, BUILTIN_SUMMARIES};
use sistab::scenario::{
    load_scenario, render_text, run_scenario, write_report, Outcome, Report, ReportFormat,
    SamplingSpec,
};
use sistab::{
    check_ssc_at, coderivative_member, coderivative_norm, distance_dual, distance_primal,
    farkas_consequence, lip_bound, lip_sample, ConsequenceQuery, Error, GridSet, Parameter,
    Scenario,
};

#[derive(Parser)]
#[command(
    name = "sistab",
    version,
    about = "Stability certificates for parameterized convex inequality systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// Scenario file (TOML); defaults to $SISTAB_SCENARIO when set.
    #[arg(long, env = "SISTAB_SCENARIO")]
    scenario: Option<PathBuf>,
    /// Built-in scenario name (see list-builtins).
    #[arg(long, conflicts_with = "scenario")]
    builtin: Option<String>,
    /// Truncation level for builtins that take one.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Attach the builtin's declared closure family.
    #[arg(long)]
    with_closure: bool,
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Replace all conjugate grids by a uniform box with this many nodes
    /// per axis.
    #[arg(long)]
    grid_count: Option<usize>,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    grid_lo: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    grid_hi: f64,
    /// Comma-separated epsilon schedule for the active-index diagnostic.
    #[arg(long, value_delimiter = ',')]
    epsilon_schedule: Option<Vec<f64>>,
    /// Comma-separated sampling radii.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Samples per radius.
    #[arg(long)]
    samples: Option<usize>,
    /// Cap on sampling parallelism (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    feasibility_tol: Option<f64>,
    #[arg(long)]
    optimality_tol: Option<f64>,
    #[arg(long)]
    projection_tol: Option<f64>,
    #[arg(long)]
    membership_tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (text) or directory (csv bundle); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Human-oriented rendering instead of raw key/value lines.
    #[arg(long)]
    pretty: bool,
    /// Append wall-clock timings (breaks byte-reproducibility).
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check the strong Slater condition.
    CheckSsc {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Parameter values, comma separated; nominal when absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Option<Vec<f64>>,
    },
    /// Distance from a point to the feasible set, dual and primal routes.
    Distance {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Query point; defaults to the scenario's first probe.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Option<Vec<f64>>,
    },
    /// Exact Lipschitzian bound at a nominal solution.
    LipBound {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Nominal point; defaults to the scenario's first probe.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
    },
    /// Sampled distance quotients on shrinking neighborhoods.
    LipSample {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
    },
    /// Coderivative norm, plus a membership query when p-star/x-star given.
    Coderivative {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "x_star")]
        p_star: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "p_star")]
        x_star: Option<Vec<f64>>,
    },
    /// Check whether <v, x> <= alpha follows from the system.
    Farkas {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Option<Vec<f64>>,
    },
    /// Asymptotic stationarity certificate for an objective gradient.
    Stationarity {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        /// Objective gradient in p; defaults to the scenario objective.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "grad_x")]
        grad_p: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "grad_p")]
        grad_x: Option<Vec<f64>>,
    },
    /// Execute the whole scenario and emit a report.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List built-in scenarios.
    ListBuiltins,
}

fn main() -> ExitCode {
    // die quietly when the consumer closes the pipe (head, grep -q, ...)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_prerequisite_failure() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn resolve_scenario(source: &SourceArgs, overrides: &OverrideArgs) -> Result<Scenario, Error> {
    let mut scenario = match (&source.builtin, &source.scenario) {
        (Some(name), _) => builtin_scenario(name, source.n, source.with_closure)?,
        (None, Some(path)) => load_scenario(path)?,
        (None, None) => {
            return Err(Error::Scenario(
                "no scenario given: pass --builtin, --scenario, or set $SISTAB_SCENARIO".into(),
            ))
        }
    };
    if let Some(seed) = overrides.seed {
        scenario.seed = seed;
    }
    if let Some(count) = overrides.grid_count {
        scenario.grids = Some(GridSet::uniform(
            scenario.dim,
            overrides.grid_lo,
            overrides.grid_hi,
            count,
        ));
    }
    if let Some(schedule) = &overrides.epsilon_schedule {
        scenario.epsilon_schedule = Some(schedule.clone());
    }
    if overrides.radii.is_some() || overrides.samples.is_some() {
        let base = scenario.sampling.clone().unwrap_or(SamplingSpec {
            radii: vec![0.1, 0.01],
            samples: 400,
            probe: 0,
        });
        scenario.sampling = Some(SamplingSpec {
            radii: overrides.radii.clone().unwrap_or(base.radii),
            samples: overrides.samples.unwrap_or(base.samples),
            probe: base.probe,
        });
    }
    let t = &mut scenario.tolerances;
    if let Some(v) = overrides.feasibility_tol {
        t.feasibility_tol = v;
    }
    if let Some(v) = overrides.optimality_tol {
        t.optimality_tol = v;
    }
    if let Some(v) = overrides.projection_tol {
        t.projection_tol = v;
    }
    if let Some(v) = overrides.membership_tol {
        t.membership_tol = v;
    }
    if let Some(v) = overrides.max_iterations {
        t.max_iterations = v;
    }
    if let Some(threads) = overrides.threads {
        // a second invocation in-process would fail; the CLI builds it once
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    scenario.validate()?;
    Ok(scenario)
}

fn probe_point(scenario: &Scenario, x: Option<Vec<f64>>) -> Result<Vec<f64>, Error> {
    match x {
        Some(v) => Ok(v),
        None => scenario
            .probes
            .first()
            .map(|p| p.x.clone())
            .ok_or_else(|| {
                Error::Scenario("scenario has no probes; pass --x explicitly".into())
            }),
    }
}

fn parameter_for(scenario: &Scenario, p: Option<Vec<f64>>) -> Parameter {
    Parameter::new(p.unwrap_or_else(|| vec![0.0; scenario.constraints.len()]))
}

fn vec_str(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", inner.join(", "))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::ListBuiltins => {
            for (name, summary) in BUILTIN_SUMMARIES {
                println!("{name}: {summary}");
            }
            Ok(())
        }
        Command::CheckSsc { source, overrides, p } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let system = scenario.system()?;
            let opts = scenario.options()?;
            let p = parameter_for(&scenario, p);
            let cert = check_ssc_at(&system, &p, &opts)?;
            let mut text = String::new();
            text.push_str(if cert.satisfied {
                "SSC: satisfied\n"
            } else {
                "SSC: NOT satisfied\n"
            });
            text.push_str(&format!("ssc.slack: {}\n", cert.slack));
            text.push_str(&format!("ssc.dual_check: {}\n", cert.dual_check));
            text.push_str(&format!("ssc.routes_agree: {}\n", cert.routes_agree));
            if let Some(wit) = &cert.witness {
                text.push_str(&format!("ssc.witness: {}\n", vec_str(wit)));
            }
            print!("{text}");
            Ok(())
        }
        Command::Distance {
            source,
            overrides,
            x,
            p,
        } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let system = scenario.system()?;
            let opts = scenario.options()?;
            let x = probe_point(&scenario, x)?;
            let p = parameter_for(&scenario, p);
            let dual = distance_dual(&system, &p, &x, &opts)?;
            let primal = distance_primal(&system, &p, &x, &opts)?;
            println!("distance.dual: {}", dual.value);
            println!("distance.primal: {primal}");
            println!("distance.gap: {}", dual.gap);
            Ok(())
        }
        Command::LipBound {
            source,
            overrides,
            x,
        } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let system = scenario.system()?;
            let opts = scenario.options()?;
            let x = probe_point(&scenario, x)?;
            let cert = lip_bound(&system, &x, &opts)?;
            println!("{}", cert.lip_value);
            println!("lip.mode: {}", cert.mode);
            println!("lip.attained: {}", cert.attained);
            if let Some(u) = &cert.argmin {
                println!("lip.argmin: {}", vec_str(u));
            }
            if !cert.support_labels.is_empty() {
                println!("lip.support: [{}]", cert.support_labels.join(", "));
            }
            for d in &cert.epsilon_diagnostics {
                println!("lip.eps[{}]: {}", d.epsilon, d.lip_value);
            }
            Ok(())
        }
        Command::LipSample {
            source,
            overrides,
            x,
        } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let system = scenario.system()?;
            let opts = scenario.options()?;
            let x = probe_point(&scenario, x)?;
            let spec = scenario.sampling.clone().ok_or_else(|| {
                Error::Scenario("scenario has no sampling section; pass --radii/--samples".into())
            })?;
            let rows = lip_sample(&system, &x, &spec.radii, spec.samples, scenario.seed, &opts)?;
            println!("radius,max_ratio,samples_used,skipped");
            for row in rows {
                println!(
                    "{},{},{},{}",
                    row.radius, row.max_ratio, row.samples_used, row.skipped
                );
            }
            Ok(())
        }
        Command::Coderivative {
            source,
            overrides,
            x,
            p_star,
            x_star,
        } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let system = scenario.system()?;
            let opts = scenario.options()?;
            let x = probe_point(&scenario, x)?;
            let norm = coderivative_norm(&system, &x, &opts)?;
            println!("{norm}");
            if let (Some(ps), Some(xs)) = (p_star, x_star) {
                let m = coderivative_member(&system, &x, &ps, &xs, &opts)?;
                println!("coderivative.member: {}", m.member);
                println!("coderivative.residual: {}", m.residual);
            }
            Ok(())
        }
        Command::Farkas {
            source,
            overrides,
            v,
            alpha,
            p,
        } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let system = scenario.system()?;
            let opts = scenario.options()?;
            let p = parameter_for(&scenario, p);
            let out = farkas_consequence(&system, &p, &ConsequenceQuery { v, alpha }, &opts)?;
            println!("farkas.holds: {}", out.holds);
            println!("farkas.residual: {}", out.residual);
            Ok(())
        }
        Command::Stationarity {
            source,
            overrides,
            x,
            grad_p,
            grad_x,
        } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let system = scenario.system()?;
            let opts = scenario.options()?;
            let x = probe_point(&scenario, x)?;
            let (gp, gx) = match (grad_p, grad_x) {
                (Some(gp), Some(gx)) => (gp, gx),
                _ => match &scenario.objective {
                    Some(obj) => obj.gradient(&vec![0.0; scenario.constraints.len()], &x),
                    None => {
                        return Err(Error::Scenario(
                            "no gradient: pass --grad-p/--grad-x or declare an objective".into(),
                        ))
                    }
                },
            };
            let cert = sistab::check_stationarity_smooth(&system, &x, &gp, &gx, &opts)?;
            println!("stationarity.verdict: {}", cert.verdict);
            println!("stationarity.residual: {}", cert.residual);
            Ok(())
        }
        Command::Run {
            source,
            overrides,
            output,
        } => {
            let scenario = resolve_scenario(&source, &overrides)?;
            let started = Instant::now();
            let mut report = run_scenario(&scenario)?;
            if output.timings {
                report.timings = Some(vec![("run".into(), started.elapsed().as_secs_f64())]);
            }
            match output.format {
                Format::Csv => {
                    let dir = output.out.ok_or_else(|| {
                        Error::Scenario("csv format needs --out <directory>".into())
                    })?;
                    write_report(&report, &dir, ReportFormat::CsvBundle)?;
                    eprintln!("wrote csv bundle to {}", dir.display());
                }
                Format::Text => {
                    let text = if output.pretty {
                        pretty_text(&report)
                    } else {
                        render_text(&report)
                    };
                    emit(&output.out, &text)?;
                }
            }
            Ok(())
        }
    }
}

/// Aligned, human-oriented rendering. Not byte-stable across versions; the
/// raw format is the regression surface.
fn pretty_text(r: &Report) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{} (seed {}, tool {})\n",
        r.scenario_name, r.seed, r.tool_version
    ));
    s.push_str(&format!(
        "strong Slater condition: {}\n",
        if r.slater.satisfied {
            "satisfied"
        } else {
            "NOT satisfied"
        }
    ));
    for probe in &r.probes {
        s.push_str(&format!("probe {} at x = {}\n", probe.index, vec_str(&probe.x)));
        if let Some(outcome) = &probe.distance {
            match outcome {
                Outcome::Ok(d) => s.push_str(&format!(
                    "  distance     dual {:.12}  primal {:.12}  gap {:.3e}\n",
                    d.dual, d.primal, d.gap
                )),
                Outcome::Skipped { reason } => {
                    s.push_str(&format!("  distance     {reason}\n"))
                }
            }
        }
        if let Some(outcome) = &probe.modulus {
            match outcome {
                Outcome::Ok(c) => s.push_str(&format!(
                    "  lip bound    {:.12}  ({})\n",
                    c.lip_value, c.mode
                )),
                Outcome::Skipped { reason } => s.push_str(&format!("  lip bound    {reason}\n")),
            }
        }
        if let Some(outcome) = &probe.coderivative {
            match outcome {
                Outcome::Ok(v) => s.push_str(&format!("  coderivative {v:.12}\n")),
                Outcome::Skipped { reason } => {
                    s.push_str(&format!("  coderivative {reason}\n"))
                }
            }
        }
    }
    if !r.trend.is_empty() {
        s.push_str("sampled quotient trend\n");
        for row in &r.trend {
            s.push_str(&format!(
                "  r = {:<10} max ratio {:<22} used {} skipped {}\n",
                row.radius, row.max_ratio, row.samples_used, row.skipped
            ));
        }
    }
    s
}
