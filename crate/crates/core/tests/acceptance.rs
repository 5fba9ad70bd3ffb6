//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::time::Instant;

use recipstat_core::ladder::{a0_bessel, aux_from_moments, hierarchy_iterate};
use recipstat_core::lax::{default_z_samples, verify_lax};
use recipstat_core::mcsim::{mc_mgf, MCConfig};
use recipstat_core::moments::{hankel_det, mgf, EnsembleParams};
use recipstat_core::orthopoly::recurrence_coeffs;
use recipstat_core::painleve::{log_det_integral, log_det_ratio, p3_solve, sigma_data, tau_relations, verify_sigma};
use recipstat_core::precision::rel_diff;
use recipstat_core::report::VerificationReport;
use recipstat_core::specialfun::laguerre_hankel_d0;
use recipstat_core::toda::verify_toda;
use rug::Float;

const BITS: u32 = 256;
const ALPHAS: [f64; 4] = [0.3, 0.5, 1.3, 2.0];
const SS: [f64; 3] = [0.1, 1.0, 5.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn params(alpha: f64, s: f64) -> EnsembleParams {
    EnsembleParams::from_f64(alpha, s, BITS).expect("valid parameters")
}

fn q(num: i64, den: i64) -> Float {
    Float::with_val(BITS, num) / den
}

/// Worst residual and the records over their tolerance, restricted to `ids`.
fn worst_of(reports: &[VerificationReport], ids: &[&str]) -> (f64, usize, usize) {
    let mut worst = 0.0f64;
    let mut failed = 0;
    let mut count = 0;
    for r in reports {
        for rec in r.records.iter().filter(|rec| ids.is_empty() || ids.contains(&rec.id.as_str())) {
            count += 1;
            worst = worst.max(rec.residual);
            if !rec.pass {
                failed += 1;
                eprintln!("  failed {} n={} α={} s={}: {:e} > {:e}", rec.id, rec.n, rec.alpha, rec.s, rec.residual, rec.tol);
            }
        }
    }
    (worst, failed, count)
}

fn route_agreement() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for &alpha in &ALPHAS {
        for &s in &SS {
            let p = params(alpha, s);
            match (aux_from_moments(10, &p), hierarchy_iterate(10, &p)) {
                (Ok(x), Ok(y)) => {
                    for n in 0..=10 {
                        worst = worst.max(rel_diff(&x.a[n], &y.a[n])).max(rel_diff(&x.b[n], &y.b[n]));
                    }
                }
                (Err(e), _) | (_, Err(e)) => errors.push(format!("α={alpha} s={s}: {e}")),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: errors.is_empty() && worst <= 1e-15 && secs < 60.0,
        detail: format!("max rel diff {worst:.2e} (tol 1e-15), {secs:.1} s (limit 60 s) {}", errors.join("; ")),
    }
}

fn hand_rationals() -> Outcome {
    let p = params(0.5, 1.0);
    let run = || -> recipstat_core::Result<f64> {
        let table = recurrence_coeffs(2, &p)?;
        let aux = aux_from_moments(2, &p)?;
        let sig = sigma_data(1, &p)?;
        let checks = [
            rel_diff(&aux.a[0], &q(2, 3)),
            rel_diff(&aux.b[1], &q(-4, 9)),
            rel_diff(&aux.a[1], &q(52, 93)),
            rel_diff(&table.beta_n[1], &q(31, 18)),
            rel_diff(&sig.h, &q(-2, 3)),
            rel_diff(&sig.h_prime, &q(-4, 9)),
            rel_diff(&sig.h_second, &q(5, 27)),
        ];
        Ok(checks.into_iter().fold(0.0, f64::max))
    };
    match run() {
        Ok(w) => Outcome {
            pass: w <= 1e-20,
            detail: format!("max rel error {w:.2e} (tol 1e-20)"),
        },
        Err(e) => Outcome {
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn sigma_reports() -> Result<Vec<VerificationReport>, String> {
    let mut out = Vec::new();
    for &alpha in &ALPHAS {
        for &s in &SS {
            out.push(verify_sigma(10, &params(alpha, s), 1e-12).map_err(|e| format!("α={alpha} s={s}: {e}"))?);
        }
    }
    Ok(out)
}

fn sigma_form(reports: &Result<Vec<VerificationReport>, String>) -> Outcome {
    let reports = match reports {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e.clone(),
            }
        }
    };
    let (worst, failed, count) = worst_of(reports, &["sigma-form", "b-derivative-quadratic", "sigma-alpha", "sigma-beta"]);
    // Both sides at the hand point.
    let hand = sigma_data(1, &params(0.5, 1.0)).map(|sig| {
        let s = Float::with_val(BITS, 1);
        let lhs = Float::with_val(BITS, &s * &sig.h_second).square();
        let h1 = &sig.h_prime;
        let lin = Float::with_val(BITS, 1) - Float::with_val(BITS, h1 * 2.5);
        let bracket = Float::with_val(BITS, 1.5) + Float::with_val(BITS, h1 * &s) - &sig.h;
        let rhs = lin.square() - bracket * h1 * Float::with_val(BITS, h1 - 1u32) * 4u32;
        rel_diff(&lhs, &q(25, 729)).max(rel_diff(&rhs, &q(25, 729)))
    });
    let hand_err = hand.unwrap_or(f64::INFINITY);
    Outcome {
        pass: failed == 0 && hand_err < 1e-60,
        detail: format!("{count} records, max residual {worst:.2e} (tol 1e-12); hand point 25/729 both sides, rel error {hand_err:.2e}"),
    }
}

fn discrete_sigma(reports: &Result<Vec<VerificationReport>, String>) -> Outcome {
    let reports = match reports {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e.clone(),
            }
        }
    };
    let (worst, failed, count) = worst_of(
        reports,
        &[
            "discrete-sigma",
            "discrete-b",
            "discrete-alpha",
            "discrete-beta",
            "a-from-derivatives",
            "discrete-derivative-beta",
        ],
    );
    Outcome {
        pass: failed == 0 && count > 0,
        detail: format!("{count} records, max residual {worst:.2e} (tol 1e-12)"),
    }
}

fn painleve_ode() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst0 = 0.0f64;
    let mut errors = Vec::new();
    for &alpha in &[0.5, 1.3, 2.0] {
        for &s in &[0.5, 1.0, 4.0] {
            let p = params(alpha, s);
            let reference = match hierarchy_iterate(5, &p) {
                Ok(r) => r,
                Err(e) => {
                    errors.push(e.to_string());
                    continue;
                }
            };
            for n in 0..=5 {
                match p3_solve(n, &p, s, 1e-10) {
                    Ok(sol) => {
                        worst = worst.max(rel_diff(&sol.state.a, &reference.a[n]));
                        if n == 0 {
                            let bessel = a0_bessel(&p).expect("Bessel ratio");
                            worst0 = worst0.max(rel_diff(&sol.state.a, &bessel));
                        }
                    }
                    Err(e) => errors.push(format!("n={n} α={alpha} s={s}: {e}")),
                }
            }
        }
    }
    Outcome {
        pass: errors.is_empty() && worst <= 1e-8 && worst0 <= 1e-10,
        detail: format!(
            "max rel error vs hierarchy {worst:.2e} (tol 1e-8), n=0 vs Bessel ratio {worst0:.2e} (tol 1e-10) {}",
            errors.join("; ")
        ),
    }
}

fn toda() -> Outcome {
    let mut reports = Vec::new();
    for &alpha in &[0.5, 1.3] {
        for &s in &[0.5, 1.0, 3.0] {
            match verify_toda(4, &params(alpha, s), 1e-10, 1e-8) {
                Ok(r) => reports.push(r),
                Err(e) => {
                    return Outcome {
                        pass: false,
                        detail: e.to_string(),
                    }
                }
            }
        }
    }
    let (worst, failed, count) = worst_of(&reports, &[]);
    let (mol, _, _) = worst_of(&reports, &["toda-molecule"]);
    Outcome {
        pass: failed == 0,
        detail: format!("{count} records, max residual {worst:.2e} (tol max(1e-10, FD bound)), molecule {mol:.2e} (tol 1e-8)"),
    }
}

fn lax() -> Outcome {
    let mut reports = Vec::new();
    for &alpha in &[0.5, 1.3] {
        for &s in &[0.5, 1.0, 3.0] {
            match verify_lax(5, &params(alpha, s), &default_z_samples(), 1e-12) {
                Ok(r) => reports.push(r),
                Err(e) => {
                    return Outcome {
                        pass: false,
                        detail: e.to_string(),
                    }
                }
            }
        }
    }
    let (worst, failed, count) = worst_of(&reports, &[]);
    let (comp, _, _) = worst_of(&reports, &["zero-curvature", "toda-compatibility", "difference-compatibility"]);
    let (theta, _, _) = worst_of(&reports, &["theta0-first-integral"]);
    Outcome {
        pass: failed == 0,
        detail: format!(
            "{count} records, compatibility {comp:.2e}, theta0 {theta:.2e} (tol 1e-12), overall {worst:.2e} (s-ladder within FD bounds)"
        ),
    }
}

fn tau() -> Outcome {
    let mut reports = Vec::new();
    let mut worst_int = 0.0f64;
    let mut errors = Vec::new();
    for &alpha in &[0.5, 1.3] {
        for &s in &[0.5, 1.0, 2.0] {
            let p = params(alpha, s);
            for n in 1..=5 {
                match tau_relations(n, &p, 1e-12) {
                    Ok(r) => reports.push(r),
                    Err(e) => errors.push(e.to_string()),
                }
            }
            for n in 1..=3 {
                match (log_det_integral(n, &p, 1e-12), log_det_ratio(n, &p)) {
                    (Ok(v), Ok(want)) => {
                        worst_int = worst_int.max(rel_diff(&v.a_form, &want)).max(rel_diff(&v.x_form, &want));
                    }
                    (Err(e), _) | (_, Err(e)) => errors.push(format!("n={n} α={alpha} s={s}: {e}")),
                }
            }
        }
    }
    let (worst, failed, count) = worst_of(&reports, &[]);
    Outcome {
        pass: errors.is_empty() && failed == 0 && worst_int <= 1e-8,
        detail: format!(
            "{count} records, max residual {worst:.2e} (tol 1e-12); integral representation max rel error {worst_int:.2e} (tol 1e-8) {}",
            errors.join("; ")
        ),
    }
}

fn laguerre_limit() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_d = 0.0f64;
    let mut errors = Vec::new();
    for &alpha in &ALPHAS {
        let p = params(alpha, 1e-8);
        match recurrence_coeffs(10, &p) {
            Ok(t) => {
                for n in 0..=10 {
                    let nf = n as f64;
                    worst = worst.max((t.alpha_n[n].to_f64() - (2.0 * nf + 1.0 + alpha)).abs());
                    if n >= 1 {
                        worst = worst.max((t.beta_n[n].to_f64() - nf * (nf + alpha)).abs());
                    }
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
        let p0 = params(alpha, 0.0);
        for n in 0..=10 {
            match (hankel_det(n, &p0), laguerre_hankel_d0(n, &p0.alpha, &p0.ctx)) {
                (Ok(d), Ok(g)) => worst_d = worst_d.max(rel_diff(&d, &g)),
                (Err(e), _) | (_, Err(e)) => errors.push(e.to_string()),
            }
        }
    }
    Outcome {
        pass: errors.is_empty() && worst <= 1e-6 && worst_d <= 1e-20,
        detail: format!(
            "max |α_n, β_n - limit| {worst:.2e} at s=1e-8 (tol 1e-6); D_n(0) vs Barnes product {worst_d:.2e} (tol 1e-20) {}",
            errors.join("; ")
        ),
    }
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let first = mc_mgf(&MCConfig::new(1, 0.5, 1.0, 1_000_000, 20_240_601));
    let second = mc_mgf(&MCConfig::new(5, 0.5, 1.0, 1_000_000, 20_240_602));
    let exact5 = mgf(5, &params(0.5, 1.0));
    let secs = start.elapsed().as_secs_f64();
    match (first, second, exact5) {
        (Ok(r1), Ok(r5), Ok(e5)) => {
            let want1 = 3.0 * (-2.0f64).exp();
            let want5 = e5.to_f64();
            let z1 = (r1.estimate - want1).abs() / r1.std_error;
            let z5 = (r5.estimate - want5).abs() / r5.std_error;
            Outcome {
                pass: z1 <= 3.0 && z5 <= 3.0 && secs < 120.0,
                detail: format!(
                    "n=1: {:.6} ± {:.1e} vs {want1:.6} ({z1:.2} SE); n=5: {:.6} ± {:.1e} vs {want5:.6} ({z5:.2} SE); {secs:.1} s (limit 120 s)",
                    r1.estimate, r1.std_error, r5.estimate, r5.std_error
                ),
            }
        }
        (a, b, c) => Outcome {
            pass: false,
            detail: format!("{:?} {:?} {:?}", a.err(), b.err(), c.err()),
        },
    }
}

fn main() {
    let sigma = sigma_reports();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("two-route agreement of a_n, b_n", Box::new(route_agreement)),
        ("hand-derived rationals at alpha=1/2, s=1", Box::new(hand_rationals)),
        ("sigma-form", Box::new(|| sigma_form(&sigma))),
        ("discrete sigma-form and cross-relations", Box::new(|| discrete_sigma(&sigma))),
        ("Painleve III solver", Box::new(painleve_ode)),
        ("Toda flows and molecule", Box::new(toda)),
        ("Lax triple", Box::new(lax)),
        ("Hamiltonian, tau function and integral representation", Box::new(tau)),
        ("Laguerre limit", Box::new(laguerre_limit)),
        ("Monte Carlo", Box::new(monte_carlo)),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failures += 1;
        }
        println!("{verdict} criterion {}: {name}: {} [{:.1} s]", k + 1, out.detail, start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
