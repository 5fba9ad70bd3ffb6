//! Recurrence coefficients, Painlevé III data and Monte Carlo checks for the
//! Laguerre weight deformed by an essential singularity, `x^α e^{-x-s/x}`.

pub mod error;
pub mod ladder;
pub mod lax;
pub mod mcsim;
pub mod moments;
pub mod ode;
pub mod orthopoly;
pub mod painleve;
pub mod precision;
pub mod quad;
pub mod report;
pub mod specialfun;
pub mod toda;

pub use error::{Error, Result};
pub use ladder::{aux_from_moments, default_tol, hierarchy_iterate, AuxTable};
pub use lax::{build_lax, compatibility_residuals, jm_scalar_system, s_ladder_check, verify_lax, JMParams, LaxData};
pub use mcsim::{mc_mgf, sample_lue, MCConfig, MCResult};
pub use moments::{mgf, EnsembleParams};
pub use orthopoly::{recurrence_coeffs, RecurrenceTable};
pub use painleve::{p3_solve, sigma_data, verify_sigma, P3Solution};
pub use precision::PrecisionContext;
pub use report::{IdentityRecord, VerificationReport};
