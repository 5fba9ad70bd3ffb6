//! Toda-type flows in `s` and the coupled Riccati equations for `a_n`, `b_n`.
//!
//! Closed-form `s`-derivatives are checked against Richardson-extrapolated
//! central differences of the moment-route data.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::ladder::{aux_from_recurrence, AuxTable};
use crate::moments::EnsembleParams;
use crate::orthopoly::{recurrence_coeffs, RecurrenceTable};
use crate::precision::max_abs;
use crate::report::VerificationReport;

/// `(s·a_n', s·b_n')` from
/// `s a' = 2b + (2n+1+α+a)a - s` and
/// `s b' = (2/a)(b² - sb) + (2n+α+1)b - ns`.
pub fn riccati_rhs(n: usize, a: &Float, b: &Float, params: &EnsembleParams) -> Result<(Float, Float)> {
    if a.is_zero() {
        return Err(Error::DivisionByZero("riccati rhs with a_n = 0"));
    }
    let prec = params.bits() + 32;
    let s = &params.s;
    let nf = n as u32;
    let lin = Float::with_val(prec, &params.alpha + (2 * nf + 1)) + a;
    let sa = Float::with_val(prec, b * 2u32) + Float::with_val(prec, &lin * a) - s;
    let quad = Float::with_val(prec, b * Float::with_val(prec, b - s));
    let sb = Float::with_val(prec, quad * 2u32 / a) + Float::with_val(prec, &params.alpha + (2 * nf + 1)) * b
        - Float::with_val(prec, s * nf);
    let bits = params.bits();
    Ok((Float::with_val(bits, sa), Float::with_val(bits, sb)))
}

/// A finite-difference derivative with an absolute error bound.
#[derive(Clone, Debug)]
pub struct FdEstimate {
    pub value: Float,
    pub bound: Float,
}

impl FdEstimate {
    /// The bound relative to `|reference|` (or to the estimate when the
    /// reference vanishes).
    pub fn rel_bound(&self, reference: &Float) -> f64 {
        let scale = max_abs([reference, &self.value]);
        if scale.is_zero() {
            return 0.0;
        }
        Float::with_val(64, &self.bound / &scale).to_f64()
    }
}

/// Base step `h = s·2^{-bits/5}`.
pub fn fd_step(s: &Float, bits: u32) -> Float {
    let scale = Float::with_val(64, 2).pow(-(bits as i32) / 5);
    Float::with_val(s.prec(), s * scale)
}

/// First and second derivatives of every component of `f` at `s`: fourth
/// order central differences at steps `h, h/2, h/4` with two Richardson
/// levels (`(16D(h/2) - D(h))/15`, then `64/63`).
pub fn richardson_derivatives<F>(f: F, s: &Float, bits: u32) -> Result<(Vec<FdEstimate>, Vec<FdEstimate>)>
where
    F: Fn(&Float) -> Result<Vec<Float>> + Sync,
{
    let prec = bits + 64;
    let h = Float::with_val(prec, fd_step(s, bits));
    if *s <= Float::with_val(prec, &h * 2u32) {
        return Err(Error::Domain("finite-difference stencil leaves s > 0".into()));
    }
    // Offsets in units of h/4: ±1, ±2, ±4, ±8, and the centre.
    let offsets: [i32; 9] = [0, 1, -1, 2, -2, 4, -4, 8, -8];
    let quarter = Float::with_val(prec, &h / 4u32);
    let values: Vec<Vec<Float>> = offsets
        .par_iter()
        .map(|&k| {
            let point = Float::with_val(prec, &quarter * k) + s;
            f(&Float::with_val(s.prec(), point))
        })
        .collect::<Result<_>>()?;
    let width = values[0].len();
    if values.iter().any(|v| v.len() != width) {
        return Err(Error::Domain("stencil evaluations returned different lengths".into()));
    }
    let at = |k: i32, c: usize| -> Float {
        let idx = offsets.iter().position(|&o| o == k).expect("stencil offset");
        Float::with_val(prec, &values[idx][c])
    };
    // Data accuracy assumed for the roundoff part of the bound.
    let data_eps = Float::with_val(prec, 2).pow(-(3 * bits as i32) / 4);
    let mut first = Vec::with_capacity(width);
    let mut second = Vec::with_capacity(width);
    for c in 0..width {
        // Step of m quarter-units: stencil ±m, ±2m.
        let d1 = |m: i32| -> Float {
            let step = Float::with_val(prec, &quarter * m);
            let inner = at(m, c) - at(-m, c);
            let outer = at(2 * m, c) - at(-2 * m, c);
            (inner * 8u32 - outer) / (step * 12u32)
        };
        let d2 = |m: i32| -> Float {
            let step = Float::with_val(prec, &quarter * m);
            let inner = at(m, c) + at(-m, c);
            let outer = at(2 * m, c) + at(-2 * m, c);
            (inner * 16u32 - outer - at(0, c) * 30u32) / (step.square() * 12u32)
        };
        let scale = max_abs(values.iter().map(|v| &v[c]));
        let scale = Float::with_val(prec, scale);
        for (order, out) in [(1i32, &mut first), (2, &mut second)] {
            let d = |m: i32| if order == 1 { d1(m) } else { d2(m) };
            let (dh, dh2, dh4) = (d(4), d(2), d(1));
            let r1 = (Float::with_val(prec, &dh2 * 16u32) - &dh) / 15u32;
            let r2 = (Float::with_val(prec, &dh4 * 16u32) - &dh2) / 15u32;
            let r = (Float::with_val(prec, &r2 * 64u32) - &r1) / 63u32;
            let trunc = Float::with_val(prec, &r - &r2).abs() * 4u32;
            let step = Float::with_val(prec, (&quarter).pow(order));
            let noise = Float::with_val(prec, &scale * &data_eps) * 8u32 / step;
            out.push(FdEstimate {
                value: Float::with_val(bits, r),
                bound: Float::with_val(bits, trunc + noise),
            });
        }
    }
    Ok((first, second))
}

/// Base data at one `s`, used on every stencil point.
fn snapshot_tables(n_max: usize, params: &EnsembleParams) -> Result<(RecurrenceTable, AuxTable)> {
    let table = recurrence_coeffs(n_max + 1, params)?;
    let aux = aux_from_recurrence(&table, n_max + 1)?;
    Ok((table, aux))
}

/// Values and `s`-derivatives of the Toda quantities for `n = 0..=n_max`.
#[derive(Clone, Debug)]
pub struct TodaSnapshot {
    pub params: EnsembleParams,
    pub n_max: usize,
    pub table: RecurrenceTable,
    pub aux: AuxTable,
    /// Per `n`: `ln h_n, ln β_n (0 at n = 0), 𝗉₁(n), α_n, Σ_{j<n} a_j,
    /// ln D_n, a_n, b_n, ln Ď_n`.
    pub first: Vec<[FdEstimate; 9]>,
    /// Second derivative of `ln Ď_n`.
    pub log_dtilde_second: Vec<FdEstimate>,
}

const QUANTITIES: usize = 9;

fn toda_quantities(n_max: usize, params: &EnsembleParams) -> Result<Vec<Float>> {
    let (table, aux) = snapshot_tables(n_max, params)?;
    let bits = params.bits();
    let ln_s = Float::with_val(bits, params.s.ln_ref());
    let mut out = Vec::with_capacity((n_max + 1) * QUANTITIES);
    for n in 0..=n_max {
        let nn = Float::with_val(bits, &params.alpha + n as u32) * n as u32;
        let ln_d = Float::with_val(bits, table.d(n).ln_ref());
        out.push(Float::with_val(bits, table.h(n).ln_ref()));
        out.push(if n == 0 {
            Float::with_val(bits, 0)
        } else {
            Float::with_val(bits, table.beta_n[n].ln_ref())
        });
        out.push(table.p1[n].clone());
        out.push(table.alpha_n[n].clone());
        out.push(aux.sum_a(n));
        out.push(ln_d.clone());
        out.push(aux.a[n].clone());
        out.push(aux.b[n].clone());
        out.push(ln_d - nn * &ln_s);
    }
    Ok(out)
}

pub fn toda_snapshot(n_max: usize, params: &EnsembleParams) -> Result<TodaSnapshot> {
    if params.is_laguerre_limit() {
        return Err(Error::Domain("the Toda checks need s > 0".into()));
    }
    let (table, aux) = snapshot_tables(n_max, params)?;
    let (d1, d2) = richardson_derivatives(
        |s| toda_quantities(n_max, &params.with_s(s.clone())?),
        &params.s,
        params.bits(),
    )?;
    let mut first = Vec::with_capacity(n_max + 1);
    let mut log_dtilde_second = Vec::with_capacity(n_max + 1);
    let mut it = d1.into_iter();
    for n in 0..=n_max {
        let chunk: Vec<FdEstimate> = it.by_ref().take(QUANTITIES).collect();
        first.push(chunk.try_into().expect("nine quantities per n"));
        log_dtilde_second.push(d2[n * QUANTITIES + QUANTITIES - 1].clone());
    }
    Ok(TodaSnapshot {
        params: params.clone(),
        n_max,
        table,
        aux,
        first,
        log_dtilde_second,
    })
}

fn rel_residual(lhs: &Float, rhs: &Float) -> f64 {
    let scale = max_abs([lhs, rhs]);
    if scale.is_zero() {
        return 0.0;
    }
    let prec = scale.prec() + 32;
    (Float::with_val(prec, lhs - rhs).abs() / scale).to_f64()
}

/// Flow relations in `s` for `n ≤ n_max`; `tol` applies to the relative
/// residual, widened to the finite-difference bound where that is larger.
///
/// - `log-h-flow`: `s (ln h_n)' = -a_n`
/// - `log-beta-flow`: `s (ln β_n)' = a_{n-1} - a_n`
/// - `p1-flow`: `s 𝗉₁(n)' = b_n`
/// - `alpha-flow`: `s α_n' = b_n - b_{n+1}`
/// - `alpha-flow-beta`: `b_n - b_{n+1} = β_n - β_{n+1} + α_n` (algebraic)
/// - `sum-a-flow`: `s (Σ_{j<n} a_j)' = -b_n`
/// - `log-det-flow`: `s (ln D_n)' = -Σ_{j<n} a_j`
/// - `riccati-a`, `riccati-b`: finite differences of `a_n`, `b_n` against [`riccati_rhs`]
/// - `toda-molecule` (`n ≥ 1`, tolerance `molecule_tol`): `(ln Ď_n)'' = Ď_{n+1}Ď_{n-1}/Ď_n²`
pub fn verify_toda(n_max: usize, params: &EnsembleParams, tol: f64, molecule_tol: f64) -> Result<VerificationReport> {
    let snap = toda_snapshot(n_max, params)?;
    let prec = params.bits() + 32;
    let s = Float::with_val(prec, &params.s);
    let table = &snap.table;
    let aux = &snap.aux;
    let mut report = VerificationReport::new("toda");
    let check = |report: &mut VerificationReport, id: &str, n: usize, fd: &FdEstimate, rhs: &Float, base_tol: f64| {
        let lhs = Float::with_val(prec, &fd.value * &s);
        let bound = FdEstimate {
            value: lhs.clone(),
            bound: Float::with_val(prec, &fd.bound * &s),
        };
        let r = rel_residual(&lhs, rhs);
        let t = base_tol.max(bound.rel_bound(rhs));
        report.push_value(id, n, params, &lhs, r, t);
    };
    for n in 0..=n_max {
        let d = &snap.first[n];
        let a = Float::with_val(prec, &aux.a[n]);
        let b = Float::with_val(prec, &aux.b[n]);
        check(&mut report, "log-h-flow", n, &d[0], &(-a.clone()), tol);
        if n >= 1 {
            let rhs = Float::with_val(prec, &aux.a[n - 1] - &a);
            check(&mut report, "log-beta-flow", n, &d[1], &rhs, tol);
        }
        check(&mut report, "p1-flow", n, &d[2], &b, tol);
        let b_next = Float::with_val(prec, &aux.b[n + 1]);
        let rhs = Float::with_val(prec, &b - &b_next);
        check(&mut report, "alpha-flow", n, &d[3], &rhs, tol);
        if n >= 1 {
            // β_{n+1} is in the table because it covers n_max + 1.
            let beta_next = table.beta_n.get(n + 1).cloned();
            if let Some(beta_next) = beta_next {
                let other = Float::with_val(prec, &table.beta_n[n] - &beta_next) + &table.alpha_n[n];
                report.push("alpha-flow-beta", n, params, rel_residual(&rhs, &other), tol);
            }
        }
        check(&mut report, "sum-a-flow", n, &d[4], &(-b.clone()), tol);
        check(&mut report, "log-det-flow", n, &d[5], &(-aux.sum_a(n)), tol);
        if n == 0 || !a.is_zero() {
            let (sa, sb) = riccati_rhs(n, &a, &b, params)?;
            check(&mut report, "riccati-a", n, &d[6], &sa, tol);
            check(&mut report, "riccati-b", n, &d[7], &sb, tol);
        }
        if n >= 1 {
            let dd = &table.hankel.d;
            let nn = |k: usize| Float::with_val(prec, &params.alpha + k as u32) * k as u32;
            // Ď_k = s^{-k(k+α)} D_k; the ratio carries s^{-2}.
            let ln_ratio = Float::with_val(prec, dd[n + 1].ln_ref()) + Float::with_val(prec, dd[n - 1].ln_ref())
                - Float::with_val(prec, dd[n].ln_ref()) * 2u32
                - (nn(n + 1) + nn(n - 1) - nn(n) * 2u32) * Float::with_val(prec, s.ln_ref());
            let rhs = ln_ratio.exp();
            let fd = &snap.log_dtilde_second[n];
            let r = rel_residual(&Float::with_val(prec, &fd.value), &rhs);
            let t = molecule_tol.max(fd.rel_bound(&rhs));
            report.push_value("toda-molecule", n, params, &fd.value, r, t);
        }
    }
    Ok(report)
}
