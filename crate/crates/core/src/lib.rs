//! Certified ergodicity and truncation bounds for periodic birth-death
//! processes with catastrophes and bulk arrivals, plus an ODE solver and a
//! Monte Carlo simulator for the same processes.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod mc;
pub mod model;
pub mod presets;
pub mod profile;
pub mod rate;
pub mod report;
pub mod series;
pub mod solver;
pub mod truncation;

pub use bounds::{ergodicity_report, DecayEnvelope, ErgodicityReport, ReportOptions, WeightSequence};
pub use error::{Error, Result};
pub use model::{build_generator, Boundary, GeneratorSlice, IntensityModel, Variant};
pub use solver::{integrate, limiting_regime, solve_full_system, LimitingRegime, ProbabilityVector, Trajectory};
pub use truncation::{select_truncation, BoundCertificate, Constants, Criterion, TruncationSetup};
