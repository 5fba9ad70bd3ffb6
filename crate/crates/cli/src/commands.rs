//! Dispatch of one command over the `s` grid.

use rayon::prelude::*;
use recipstat_core::ladder::{aux_from_moments, default_tol, hierarchy_iterate, verify_residue_identities};
use recipstat_core::lax::{default_z_samples, lax_from_tables, verify_lax};
use recipstat_core::mcsim::{mc_mgf, MCConfig};
use recipstat_core::moments::{mgf, EnsembleParams};
use recipstat_core::orthopoly::recurrence_coeffs;
use recipstat_core::painleve::{hamiltonian_forms, p3_solve, tau_relations, verify_sigma};
use recipstat_core::precision::{rel_diff, with_escalation, PrecisionContext};
use recipstat_core::toda::verify_toda;
use recipstat_core::{ladder::aux_from_recurrence, Error};
use rug::Float;

use crate::output::{report_rows, Row};
use crate::{Common, Suite};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(msg) => CliError::Config(msg),
            other => CliError::Numeric(other),
        }
    }
}

/// Degrees to visit: `--n` alone, else `start..=n_max`.
fn degrees(c: &Common, start: usize) -> Result<Vec<usize>, CliError> {
    match (c.n, c.n_max) {
        (Some(n), None) => Ok(vec![n]),
        (None, Some(m)) if m >= start => Ok((start..=m).collect()),
        (None, Some(m)) => Err(CliError::Config(format!("--n-max {m} is below {start}"))),
        (Some(_), Some(_)) => Err(CliError::Config("give either --n or --n-max".into())),
        (None, None) => Err(CliError::Config("one of --n or --n-max is required".into())),
    }
}

fn n_max(c: &Common) -> Result<usize, CliError> {
    c.n_max.or(c.n).ok_or_else(|| CliError::Config("one of --n or --n-max is required".into()))
}

fn s_points(c: &Common) -> Result<Vec<String>, CliError> {
    let points = match (&c.s, &c.s_grid) {
        (Some(s), None) => vec![s.clone()],
        (None, Some(g)) if !g.is_empty() => g.iter().map(|x| x.trim().to_string()).collect(),
        _ => return Err(CliError::Config("one of --s or --s-grid is required".into())),
    };
    let values: Vec<f64> = points
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| CliError::Config(format!("cannot parse s = '{p}'"))))
        .collect::<Result<_, _>>()?;
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("the s grid must be strictly increasing".into()));
    }
    if values.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
        return Err(CliError::Config("s must be finite and non-negative".into()));
    }
    Ok(points)
}

fn params_at(ctx: &PrecisionContext, alpha: &str, s: &str) -> recipstat_core::Result<EnsembleParams> {
    EnsembleParams::new(ctx.parse(alpha)?, ctx.parse(s)?, ctx.clone())
}

pub fn run(command: &str, suite: Option<Suite>, c: &Common) -> Result<Vec<Row>, CliError> {
    let ctx = PrecisionContext::new(c.prec_bits)?;
    let points = s_points(c)?;
    if let Some(t) = c.tol {
        if !(t > 0.0) {
            return Err(CliError::Config(format!("--tol {t} must be positive")));
        }
    }
    // Validate the shared inputs once before fanning out.
    params_at(&ctx, &c.alpha, &points[0])?;
    let per_point: Vec<Result<Vec<Row>, CliError>> = points
        .par_iter()
        .map(|s| {
            let rows = with_escalation(&ctx, |ctx| {
                let p = params_at(ctx, &c.alpha, s)?;
                escalation_adapter(point_rows(command, suite, c, &p, s))
            });
            match rows {
                Ok(r) => r,
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Core failures take part in precision escalation; configuration
/// mistakes found while computing do not.
enum RunError {
    Core(Error),
    Cli(CliError),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

impl From<CliError> for RunError {
    fn from(e: CliError) -> Self {
        RunError::Cli(e)
    }
}

fn escalation_adapter<T>(r: Result<T, RunError>) -> recipstat_core::Result<Result<T, CliError>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(RunError::Core(e)) => Err(e),
        Err(RunError::Cli(e)) => Ok(Err(e)),
    }
}

fn point_rows(command: &str, suite: Option<Suite>, c: &Common, p: &EnsembleParams, s: &str) -> Result<Vec<Row>, RunError> {
    let a = c.alpha.as_str();
    let bits = p.bits();
    let mut rows = Vec::new();
    match command {
        "mgf" => {
            for n in degrees(c, 1)? {
                rows.push(Row::value(Some(n), a, s, "mgf", mgf(n, p)?));
            }
        }
        "recurrence" => {
            let m = n_max(c)?;
            let t = recurrence_coeffs(m, p)?;
            for n in 0..=m {
                rows.push(Row::value(Some(n), a, s, "alpha_n", t.alpha_n[n].clone()));
                if n >= 1 {
                    rows.push(Row::value(Some(n), a, s, "beta_n", t.beta_n[n].clone()));
                }
                rows.push(Row::value(Some(n), a, s, "h_n", t.h(n).clone()));
            }
        }
        "aux" => {
            let m = n_max(c)?;
            let tol = c.tol.unwrap_or_else(|| default_tol(bits));
            let moments = aux_from_moments(m, p)?;
            let hierarchy = if p.is_laguerre_limit() { None } else { Some(hierarchy_iterate(m, p)?) };
            for n in 0..=m {
                for (name, x, y) in [("a_n", &moments.a, hierarchy.as_ref().map(|h| &h.a)), ("b_n", &moments.b, hierarchy.as_ref().map(|h| &h.b))] {
                    let row = Row::value(Some(n), a, s, name, x[n].clone());
                    rows.push(match y {
                        Some(y) => row.check(rel_diff(&x[n], &y[n]), tol),
                        None => row,
                    });
                }
            }
        }
        "painleve" => {
            let tol = c.tol.unwrap_or(1e-8);
            let s_val = p.s.to_f64();
            let ns = degrees(c, 0)?;
            let reference = hierarchy_iterate(*ns.iter().max().expect("non-empty"), p)?;
            for n in ns {
                let sol = p3_solve(n, p, s_val, c.rtol)?;
                rows.push(Row::value(Some(n), a, s, "a_n", sol.state.a.clone()).check(rel_diff(&sol.state.a, &reference.a[n]), tol));
                rows.push(Row::value(Some(n), a, s, "a_n_prime", sol.state.a_prime.clone()));
                let est = Float::with_val(bits, sol.error_estimate);
                rows.push(Row::value(Some(n), a, s, "ode_error_estimate", est).check(sol.error_estimate, c.rtol));
            }
        }
        "verify" => {
            let m = n_max(c)?;
            let suites = match suite.unwrap_or(Suite::All) {
                Suite::All => vec![Suite::Residue, Suite::Toda, Suite::Sigma, Suite::Lax, Suite::Tau],
                one => vec![one],
            };
            for suite in suites {
                rows.extend(suite_rows(suite, m, c, p, s)?);
            }
        }
        "lax" => {
            let m = n_max(c)?;
            let table = recurrence_coeffs(m + 1, p)?;
            let aux = aux_from_recurrence(&table, m + 1)?;
            for n in 0..=m {
                let d = lax_from_tables(n, &table, &aux)?;
                for (name, mat) in [("A1", &d.a1), ("A2", &d.a2), ("U0", &d.u0)] {
                    for (i, row) in mat.iter().enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            rows.push(Row::value(Some(n), a, s, format!("{name}[{}{}]", i + 1, j + 1), Float::with_val(bits, v)));
                        }
                    }
                }
            }
            rows.extend(suite_rows(Suite::Lax, m, c, p, s)?);
        }
        "mc" => {
            let s_val = p.s.to_f64();
            let alpha = p.alpha.to_f64();
            for n in degrees(c, 1)? {
                let cfg = MCConfig::new(n, alpha, s_val, c.samples, c.seed);
                let r = mc_mgf(&cfg)?;
                let exact = mgf(n, p)?;
                let est = Float::with_val(bits, r.estimate);
                let z = if r.std_error > 0.0 {
                    (r.estimate - exact.to_f64()).abs() / r.std_error
                } else {
                    (r.estimate - exact.to_f64()).abs()
                };
                // The check is in units of the standard error.
                rows.push(Row::value(Some(n), a, s, "mc_mgf", est).check(z, c.tol.unwrap_or(3.0)));
                rows.push(Row::value(Some(n), a, s, "mc_std_error", Float::with_val(bits, r.std_error)));
                rows.push(Row::value(Some(n), a, s, "mgf", exact));
            }
        }
        "tau" => {
            let m = n_max(c)?;
            let table = recurrence_coeffs(m, p)?;
            let aux = aux_from_recurrence(&table, m)?;
            for n in degrees(c, 0)? {
                let f = hamiltonian_forms(n, &table, &aux)?;
                rows.push(Row::value(Some(n), a, s, "hamiltonian", f.from_sigma));
            }
            rows.extend(suite_rows(Suite::Tau, m, c, p, s)?);
        }
        other => return Err(CliError::Config(format!("unknown command {other}")).into()),
    }
    Ok(rows)
}

fn suite_rows(suite: Suite, m: usize, c: &Common, p: &EnsembleParams, s: &str) -> Result<Vec<Row>, RunError> {
    let a = c.alpha.as_str();
    let report = match suite {
        Suite::Residue => verify_residue_identities(m, p, c.tol.unwrap_or_else(|| default_tol(p.bits())))?,
        Suite::Toda => {
            let tol = c.tol.unwrap_or(1e-10);
            verify_toda(m, p, tol, tol.max(1e-8))?
        }
        Suite::Sigma => verify_sigma(m, p, c.tol.unwrap_or(1e-12))?,
        Suite::Lax => verify_lax(m, p, &default_z_samples(), c.tol.unwrap_or(1e-12))?,
        Suite::Tau => {
            let mut all = recipstat_core::report::VerificationReport::new("tau");
            for n in 0..=m {
                all.extend(tau_relations(n, p, c.tol.unwrap_or(1e-12))?);
            }
            all
        }
        Suite::All => unreachable!("expanded by the caller"),
    };
    Ok(report_rows(&report, a, s))
}
