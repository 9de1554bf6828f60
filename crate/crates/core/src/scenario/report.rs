//! Deterministic result reports: a flat key/value text rendering (full
//! double precision, byte-reproducible for a fixed seed and version) and a
//! CSV bundle for external plotting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::stability::{ModulusCertificate, SlaterCertificate, TrendRow};

use super::QueryDecl;

/// Per-item result: either a value or a reason the item was not computed.
#[derive(Debug, Clone)]
pub enum Outcome<T> {
    Ok(T),
    Skipped { reason: String },
}

impl<T> Outcome<T> {
    pub fn skipped(reason: &str) -> Self {
        Outcome::Skipped {
            reason: reason.to_string(),
        }
    }

    pub fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Skipped {
                reason: e.to_string(),
            },
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceReport {
    pub dual: f64,
    pub primal: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct FarkasReport {
    pub holds: bool,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct StationarityReport {
    pub verdict: String,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub index: usize,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub distance: Option<Outcome<DistanceReport>>,
    pub modulus: Option<Outcome<ModulusCertificate>>,
    pub coderivative: Option<Outcome<f64>>,
    pub farkas: Vec<(QueryDecl, Outcome<FarkasReport>)>,
    pub stationarity: Vec<Outcome<StationarityReport>>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub scenario_name: String,
    pub scenario_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub slater: SlaterCertificate,
    pub probes: Vec<ProbeReport>,
    pub trend: Vec<TrendRow>,
    pub trend_note: Option<String>,
    pub cloud_csv: String,
    /// Wall-clock sections; excluded by default so reports stay
    /// byte-reproducible. Populated only on explicit request.
    pub timings: Option<Vec<(String, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    CsvBundle,
}

fn vec_str(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", inner.join(", "))
}

pub fn render_text(r: &Report) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "scenario: {}", r.scenario_name);
    let _ = writeln!(w, "hash: {}", r.scenario_hash);
    let _ = writeln!(w, "version: {}", r.tool_version);
    let _ = writeln!(w, "seed: {}", r.seed);
    let _ = writeln!(w, "ssc.satisfied: {}", r.slater.satisfied);
    let _ = writeln!(w, "ssc.slack: {}", r.slater.slack);
    let _ = writeln!(w, "ssc.dual_check: {}", r.slater.dual_check);
    let _ = writeln!(w, "ssc.routes_agree: {}", r.slater.routes_agree);
    if let Some(witness) = &r.slater.witness {
        let _ = writeln!(w, "ssc.witness: {}", vec_str(witness));
    }
    for probe in &r.probes {
        let k = probe.index;
        let _ = writeln!(w, "probe[{k}].x: {}", vec_str(&probe.x));
        let _ = writeln!(w, "probe[{k}].p: {}", vec_str(&probe.p));
        if let Some(outcome) = &probe.distance {
            match outcome {
                Outcome::Ok(d) => {
                    let _ = writeln!(w, "probe[{k}].distance.dual: {}", d.dual);
                    let _ = writeln!(w, "probe[{k}].distance.primal: {}", d.primal);
                    let _ = writeln!(w, "probe[{k}].distance.gap: {}", d.gap);
                }
                Outcome::Skipped { reason } => {
                    let _ = writeln!(w, "probe[{k}].distance: skipped: {reason}");
                }
            }
        }
        if let Some(outcome) = &probe.modulus {
            match outcome {
                Outcome::Ok(cert) => {
                    let _ = writeln!(w, "probe[{k}].lip.value: {}", cert.lip_value);
                    let _ = writeln!(w, "probe[{k}].lip.mode: {}", cert.mode);
                    let _ = writeln!(w, "probe[{k}].lip.attained: {}", cert.attained);
                    if let Some(u) = &cert.argmin {
                        let _ = writeln!(w, "probe[{k}].lip.argmin: {}", vec_str(u));
                    }
                    if !cert.support_labels.is_empty() {
                        let _ = writeln!(
                            w,
                            "probe[{k}].lip.support: [{}]",
                            cert.support_labels.join(", ")
                        );
                    }
                    for d in &cert.epsilon_diagnostics {
                        let _ = writeln!(
                            w,
                            "probe[{k}].lip.eps[{}]: {}",
                            d.epsilon, d.lip_value
                        );
                    }
                }
                Outcome::Skipped { reason } => {
                    let _ = writeln!(w, "probe[{k}].lip: skipped: {reason}");
                }
            }
        }
        if let Some(outcome) = &probe.coderivative {
            match outcome {
                Outcome::Ok(v) => {
                    let _ = writeln!(w, "probe[{k}].coderivative.norm: {v}");
                }
                Outcome::Skipped { reason } => {
                    let _ = writeln!(w, "probe[{k}].coderivative: skipped: {reason}");
                }
            }
        }
        for (qi, (query, outcome)) in probe.farkas.iter().enumerate() {
            let _ = writeln!(
                w,
                "probe[{k}].farkas[{qi}].query: v={} alpha={}",
                vec_str(&query.v),
                query.alpha
            );
            match outcome {
                Outcome::Ok(f) => {
                    let _ = writeln!(w, "probe[{k}].farkas[{qi}].holds: {}", f.holds);
                    let _ = writeln!(w, "probe[{k}].farkas[{qi}].residual: {}", f.residual);
                }
                Outcome::Skipped { reason } => {
                    let _ = writeln!(w, "probe[{k}].farkas[{qi}]: skipped: {reason}");
                }
            }
        }
        for (si, outcome) in probe.stationarity.iter().enumerate() {
            match outcome {
                Outcome::Ok(c) => {
                    let _ = writeln!(
                        w,
                        "probe[{k}].stationarity[{si}].verdict: {}",
                        c.verdict
                    );
                    let _ = writeln!(
                        w,
                        "probe[{k}].stationarity[{si}].residual: {}",
                        c.residual
                    );
                }
                Outcome::Skipped { reason } => {
                    let _ = writeln!(w, "probe[{k}].stationarity[{si}]: skipped: {reason}");
                }
            }
        }
    }
    if let Some(note) = &r.trend_note {
        let _ = writeln!(w, "trend.note: {note}");
    }
    for (i, row) in r.trend.iter().enumerate() {
        let _ = writeln!(w, "trend[{i}].radius: {}", row.radius);
        let _ = writeln!(w, "trend[{i}].max_ratio: {}", row.max_ratio);
        let _ = writeln!(w, "trend[{i}].samples_used: {}", row.samples_used);
        let _ = writeln!(w, "trend[{i}].skipped: {}", row.skipped);
    }
    if let Some(timings) = &r.timings {
        for (label, secs) in timings {
            let _ = writeln!(w, "timing.{label}: {secs}");
        }
    }
    s
}

pub fn epsilon_csv(r: &Report) -> String {
    let mut s = String::from("probe,epsilon,lip_value\n");
    for probe in &r.probes {
        if let Some(Outcome::Ok(cert)) = &probe.modulus {
            for d in &cert.epsilon_diagnostics {
                let _ = writeln!(s, "{},{},{}", probe.index, d.epsilon, d.lip_value);
            }
        }
    }
    s
}

pub fn trend_csv(r: &Report) -> String {
    let mut s = String::from("radius,max_ratio,samples_used,skipped\n");
    for row in &r.trend {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            row.radius, row.max_ratio, row.samples_used, row.skipped
        );
    }
    s
}

/// Write a report. `Text` writes one file at `path`; `CsvBundle` treats
/// `path` as a directory and writes report.txt, cloud.csv, epsilon.csv and
/// trend.csv inside it.
pub fn write_report(r: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Text => {
            std::fs::write(path, render_text(r))?;
        }
        ReportFormat::CsvBundle => {
            std::fs::create_dir_all(path)?;
            std::fs::write(path.join("report.txt"), render_text(r))?;
            std::fs::write(path.join("cloud.csv"), &r.cloud_csv)?;
            std::fs::write(path.join("epsilon.csv"), epsilon_csv(r))?;
            std::fs::write(path.join("trend.csv"), trend_csv(r))?;
        }
    }
    Ok(())
}
