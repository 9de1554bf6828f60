//! Quantitative stability certificates for parameterized convex inequality
//! systems.
//!
//! The object of study is the feasible-set map `F(p) = {x : f_t(x) <= p_t}`
//! of finitely many convex constraints under right-hand-side perturbations,
//! with the nominal parameter at zero, the sup-norm on parameters and the
//! Euclidean norm on decisions. Everything the crate computes is reduced to
//! convex geometry over the characteristic cloud: the sampled graphs of the
//! Fenchel conjugates `(u, f_t*(u) + p_t)`.
//!
//! The main entry points:
//!
//! - [`stability::check_ssc`]: strong Slater certificates, with agreeing
//!   primal (witness search) and dual (hull min-norm) routes.
//! - [`stability::distance_dual`] / [`stability::distance_primal`]:
//!   distance to feasibility through the characteristic-set formula and
//!   through direct projection, with a reported cross-validation gap.
//! - [`stability::lip_bound`]: the exact Lipschitzian bound of `F` at a
//!   nominal solution, via a constrained min-norm problem over the cloud;
//!   [`stability::coderivative_norm`] recomputes it along an independent
//!   route, and [`stability::lip_sample`] estimates it empirically from
//!   seeded distance quotients.
//! - [`optimality::farkas_consequence`] and
//!   [`optimality::check_stationarity_smooth`]: certificates that a linear
//!   inequality follows from the system, and asymptotic stationarity of a
//!   smooth objective over the graph of `F`.
//! - [`scenario::run_scenario`]: end-to-end execution of declarative TOML
//!   scenarios into deterministic reports.
//!
//! Systems whose index sets are infinite enter through finite truncations
//! plus explicitly declared closure generators; the sampler never invents
//! limit points on its own.

pub mod charset;
pub mod config;
pub mod convex;
pub mod error;
pub mod linearize;
pub mod minnorm;
pub mod optimality;
pub mod scenario;
pub mod stability;

pub use charset::{
    active_indices, build_characteristic, epsilon_active_cloud, CharacteristicCloud, ClosurePoint,
};
pub use config::{GridSet, GridSpec, SolverConfig};
pub use convex::{AffinePiece, ConvexFunctionSpec, InequalitySystem, Parameter};
pub use error::{Error, Result};
pub use linearize::{embed_parameter, linearization_gap, linearize_system, LinearSystem};
pub use minnorm::{cone_distance, min_norm_point, project_polyhedron};
pub use optimality::{
    check_stationarity_smooth, check_stationarity_upper, farkas_consequence, normal_cone_member,
    ConsequenceQuery, FarkasOutcome, StationarityCertificate, StationarityVerdict,
};
pub use scenario::{load_scenario, run_scenario, save_scenario, Report, Scenario};
pub use stability::{
    check_ssc, check_ssc_at, coderivative_member, coderivative_norm, distance_dual,
    distance_primal, lip_bound, lip_sample, quotient_sample, AnalysisOptions, ModulusCertificate,
    ModulusMode, SlaterCertificate, TrendRow,
};
