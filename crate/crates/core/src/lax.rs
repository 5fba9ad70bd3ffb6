//! The Lax triple in `z`, `s` and `n`:
//!
//! `Ψ_z = A(z)Ψ`, `Ψ_s = B(z)Ψ`, `Ψ(n+1) = U(z)Ψ(n)` with
//! `A = -σ₃/2 + A₁/z + A₂/z²`, `B = -A₂/(sz)`, `U = zE₁₁ + U₀`.
//!
//! All coefficients are stored after conjugation by `diag(1, 2πi)`, which
//! removes every explicit `2πi` and leaves real entries for `s > 0`:
//!
//! ```text
//! A₁ = [[n+α/2, -h_n], [1/h_{n-1}, -n-α/2]]
//! A₂ = [[s/2-b_n, -h_n a_n], [b_n(b_n-s)/(h_n a_n), b_n-s/2]]
//! U₀ = [[-α_n, h_n], [-1/h_n, 0]]
//! ```
//!
//! Complex arithmetic only enters at the sample points `z`.

use rayon::prelude::*;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::ladder::{aux_from_recurrence, AuxTable};
use crate::moments::EnsembleParams;
use crate::orthopoly::{recurrence_coeffs, RecurrenceTable};
use crate::precision::{max_abs, rel_diff};
use crate::report::VerificationReport;
use crate::toda::{richardson_derivatives, riccati_rhs, FdEstimate};

pub type Mat2 = [[Float; 2]; 2];
type CMat2 = [[Complex; 2]; 2];

/// Lax coefficients at one `(n, s)` together with their closed-form
/// `s`-derivatives.
#[derive(Clone, Debug)]
pub struct LaxData {
    pub n: usize,
    pub s: Float,
    pub a1: Mat2,
    pub a2: Mat2,
    pub u0: Mat2,
    pub a1_ds: Mat2,
    pub a2_ds: Mat2,
    pub u0_ds: Mat2,
}

impl LaxData {
    /// Conjugation `M → D⁻¹MD` by `D = diag(1, c)` of every coefficient.
    pub fn gauge(&self, c: &Float) -> LaxData {
        let conj = |m: &Mat2| -> Mat2 {
            let prec = m[0][0].prec();
            [
                [m[0][0].clone(), Float::with_val(prec, &m[0][1] * c)],
                [Float::with_val(prec, &m[1][0] / c), m[1][1].clone()],
            ]
        };
        LaxData {
            n: self.n,
            s: self.s.clone(),
            a1: conj(&self.a1),
            a2: conj(&self.a2),
            u0: conj(&self.u0),
            a1_ds: conj(&self.a1_ds),
            a2_ds: conj(&self.a2_ds),
            u0_ds: conj(&self.u0_ds),
        }
    }

    fn entries(&self) -> Vec<Float> {
        [&self.a1, &self.a2, &self.u0].iter().flat_map(|m| m.iter().flatten().cloned()).collect()
    }

    fn derivative_entries(&self) -> Vec<Float> {
        [&self.a1_ds, &self.a2_ds, &self.u0_ds].iter().flat_map(|m| m.iter().flatten().cloned()).collect()
    }
}

fn tables(n_max: usize, params: &EnsembleParams) -> Result<(RecurrenceTable, AuxTable)> {
    if params.is_laguerre_limit() {
        return Err(Error::Domain("the Lax coefficients need s > 0".into()));
    }
    let table = recurrence_coeffs(n_max + 1, params)?;
    let aux = aux_from_recurrence(&table, n_max + 1)?;
    Ok((table, aux))
}

/// Lax coefficients for `n` from precomputed tables covering `n + 1`.
pub fn lax_from_tables(n: usize, table: &RecurrenceTable, aux: &AuxTable) -> Result<LaxData> {
    let params = &table.params;
    if params.is_laguerre_limit() {
        return Err(Error::Domain("the Lax coefficients need s > 0".into()));
    }
    if aux.n_max() < n + 1 || table.n_max() < n {
        return Err(Error::Domain(format!("tables too short for the Lax data at n = {n}")));
    }
    let prec = params.bits() + 32;
    let f = |v: &Float| Float::with_val(prec, v);
    let s = f(&params.s);
    let h = f(table.h(n));
    let a = f(&aux.a[n]);
    let b = f(&aux.b[n]);
    if a.is_zero() {
        return Err(Error::DivisionByZero("Lax coefficient A2 with a_n = 0"));
    }
    let (sa, sb) = riccati_rhs(n, &a, &b, params)?;
    let a_d = Float::with_val(prec, &sa / &s);
    let b_d = Float::with_val(prec, &sb / &s);
    // s h_n' = -h_n a_n.
    let h_d = -Float::with_val(prec, &h * &a) / &s;
    let kappa = Float::with_val(prec, &params.alpha / 2u32) + n as u32;
    let zero = Float::new(prec);
    let (inv_prev, inv_prev_d) = if n == 0 {
        (zero.clone(), zero.clone())
    } else {
        let hp = f(table.h(n - 1));
        // (1/h_{n-1})' = a_{n-1}/(s h_{n-1}).
        let d = Float::with_val(prec, &aux.a[n - 1] / &hp) / &s;
        (Float::with_val(prec, hp.recip_ref()), d)
    };
    let a1 = [[kappa.clone(), -h.clone()], [inv_prev, -kappa]];
    let a1_ds = [[zero.clone(), -h_d.clone()], [inv_prev_d, zero.clone()]];

    let half_s = Float::with_val(prec, &s / 2u32);
    let ha = Float::with_val(prec, &h * &a);
    let ha_d = Float::with_val(prec, &h_d * &a) + Float::with_val(prec, &h * &a_d);
    let num = Float::with_val(prec, &b * Float::with_val(prec, &b - &s));
    let num_d = Float::with_val(prec, &b * 2u32) * &b_d - &b - Float::with_val(prec, &s * &b_d);
    let lower = Float::with_val(prec, &num / &ha);
    let lower_d = (Float::with_val(prec, &num_d * &ha) - Float::with_val(prec, &num * &ha_d)) / Float::with_val(prec, ha.square_ref());
    let a2 = [[Float::with_val(prec, &half_s - &b), -ha.clone()], [lower, Float::with_val(prec, &b - &half_s)]];
    let half = Float::with_val(prec, 0.5);
    let a2_ds = [
        [Float::with_val(prec, &half - &b_d), -ha_d],
        [lower_d, Float::with_val(prec, &b_d - &half)],
    ];

    // s α_n' = b_n - b_{n+1}.
    let alpha_d = Float::with_val(prec, &b - &aux.b[n + 1]) / &s;
    let inv_h = Float::with_val(prec, h.recip_ref());
    let u0 = [[-f(&table.alpha_n[n]), h.clone()], [-inv_h.clone(), zero.clone()]];
    let u0_ds = [[-alpha_d, h_d.clone()], [Float::with_val(prec, &h_d * &inv_h) * &inv_h, zero]];

    Ok(LaxData {
        n,
        s,
        a1,
        a2,
        u0,
        a1_ds,
        a2_ds,
        u0_ds,
    })
}

pub fn build_lax(n: usize, params: &EnsembleParams) -> Result<LaxData> {
    let (table, aux) = tables(n, params)?;
    lax_from_tables(n, &table, &aux)
}

fn cmat(m: &Mat2, prec: u32) -> CMat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| Complex::with_val(prec, &m[i][j])))
}

fn cmul(x: &CMat2, y: &CMat2) -> CMat2 {
    let prec = x[0][0].prec().0;
    std::array::from_fn(|i| {
        std::array::from_fn(|j| Complex::with_val(prec, &x[i][0] * &y[0][j]) + Complex::with_val(prec, &x[i][1] * &y[1][j]))
    })
}

fn cscale(x: &CMat2, c: &Complex) -> CMat2 {
    let prec = x[0][0].prec().0;
    std::array::from_fn(|i| std::array::from_fn(|j| Complex::with_val(prec, &x[i][j] * c)))
}

fn cadd(x: &CMat2, y: &CMat2) -> CMat2 {
    let prec = x[0][0].prec().0;
    std::array::from_fn(|i| std::array::from_fn(|j| Complex::with_val(prec, &x[i][j] + &y[i][j])))
}

fn cneg(x: &CMat2) -> CMat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| -x[i][j].clone()))
}

/// Entry-wise `|Σ terms| / max |term|`, maximised over the four entries.
/// Diagonal gauges scale every term of one entry alike, so this measure is
/// gauge invariant.
fn matrix_balance(terms: &[CMat2]) -> f64 {
    let prec = terms[0][0][0].prec().0;
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let mut sum = Complex::new(prec);
            let mut scale = Float::new(prec);
            for t in terms {
                sum += &t[i][j];
                let m = Float::with_val(prec, t[i][j].abs_ref());
                if m > scale {
                    scale = m;
                }
            }
            if scale.is_zero() {
                continue;
            }
            let r = (Float::with_val(prec, sum.abs_ref()) / &scale).to_f64();
            worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
        }
    }
    worst
}

/// `A(z)` and `B(z)` of one `LaxData`.
fn a_and_b(data: &LaxData, z: &Complex) -> (CMat2, CMat2) {
    let prec = z.prec().0;
    let zi = Complex::with_val(prec, z.recip_ref());
    let zi2 = Complex::with_val(prec, zi.square_ref());
    let a2 = cmat(&data.a2, prec);
    let mut a = cadd(&cscale(&cmat(&data.a1, prec), &zi), &cscale(&a2, &zi2));
    a[0][0] -= 0.5;
    a[1][1] += 0.5;
    let coef = -Complex::with_val(prec, &zi / &data.s);
    (a, cscale(&a2, &coef))
}

/// Residuals of the three compatibility conditions at one `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityResiduals {
    /// `∂A/∂s - ∂B/∂z - [B, A]`.
    pub zero_curvature: f64,
    /// `∂U/∂s - B(n+1)U + UB(n)`.
    pub toda: f64,
    /// `∂U/∂z - A(n+1)U + UA(n)`.
    pub difference: f64,
}

/// Compatibility residuals from the data at `n` and `n + 1`.
pub fn compatibility_at(lo: &LaxData, hi: &LaxData, z: &Complex) -> CompatibilityResiduals {
    let prec = z.prec().0;
    let zi = Complex::with_val(prec, z.recip_ref());
    let zi2 = Complex::with_val(prec, zi.square_ref());
    let (a_lo, b_lo) = a_and_b(lo, z);
    let (a_hi, b_hi) = a_and_b(hi, z);

    let a_ds = cadd(&cscale(&cmat(&lo.a1_ds, prec), &zi), &cscale(&cmat(&lo.a2_ds, prec), &zi2));
    // ∂B/∂z = A₂/(sz²).
    let coef = Complex::with_val(prec, &zi2 / &lo.s);
    let b_dz = cscale(&cmat(&lo.a2, prec), &coef);
    let zero_curvature = matrix_balance(&[a_ds, cneg(&b_dz), cneg(&cmul(&b_lo, &a_lo)), cmul(&a_lo, &b_lo)]);

    let mut u = cmat(&lo.u0, prec);
    u[0][0] += z;
    let u_ds = cmat(&lo.u0_ds, prec);
    let toda = matrix_balance(&[u_ds, cneg(&cmul(&b_hi, &u)), cmul(&u, &b_lo)]);

    let mut u_dz: CMat2 = std::array::from_fn(|_| std::array::from_fn(|_| Complex::new(prec)));
    u_dz[0][0] += 1u32;
    let difference = matrix_balance(&[u_dz, cneg(&cmul(&a_hi, &u)), cmul(&u, &a_lo)]);

    CompatibilityResiduals {
        zero_curvature,
        toda,
        difference,
    }
}

/// Default sample points: on the real axis on both sides of the origin
/// and off the axis.
pub fn default_z_samples() -> Vec<(f64, f64)> {
    vec![(0.7, 0.0), (2.3, 0.0), (-1.1, 0.0), (0.5, 1.5), (-2.0, 0.3)]
}

/// Worst compatibility residuals over the `z` samples, given as `(re, im)`.
pub fn compatibility_residuals(n: usize, params: &EnsembleParams, z_samples: &[(f64, f64)]) -> Result<CompatibilityResiduals> {
    let (table, aux) = tables(n + 1, params)?;
    let lo = lax_from_tables(n, &table, &aux)?;
    let hi = lax_from_tables(n + 1, &table, &aux)?;
    Ok(worst_compatibility(&lo, &hi, z_samples))
}

fn worst_compatibility(lo: &LaxData, hi: &LaxData, z_samples: &[(f64, f64)]) -> CompatibilityResiduals {
    let prec = lo.s.prec();
    z_samples
        .par_iter()
        .map(|&(re, im)| compatibility_at(lo, hi, &Complex::with_val(prec, (re, im))))
        .reduce(
            || CompatibilityResiduals {
                zero_curvature: 0.0,
                toda: 0.0,
                difference: 0.0,
            },
            |x, y| CompatibilityResiduals {
                zero_curvature: x.zero_curvature.max(y.zero_curvature),
                toda: x.toda.max(y.toda),
                difference: x.difference.max(y.difference),
            },
        )
}

/// Jimbo–Miwa scalars in the real gauge, with `θ₀` recomputed from the
/// first integral
/// `θ₀ = -(θ_∞/t)(2ζ+t) + 2u(ζ+t)/(tw) - (2ζ/t)wv`.
#[derive(Clone, Debug)]
pub struct JMParams {
    pub n: usize,
    pub t: Float,
    pub u: Float,
    pub v: Float,
    pub zeta: Float,
    pub w: Float,
    pub theta_inf: Float,
    pub theta_0: Float,
}

/// `u = -h_n t^{-2n-α}`, `v = t^{2n+α}/h_{n-1}`, `ζ = -b_n/t`,
/// `w = -(h_n a_n/b_n) t^{-2n-α}`; needs `n ≥ 1` and `b_n ≠ 0`.
pub fn jm_params(n: usize, table: &RecurrenceTable, aux: &AuxTable) -> Result<JMParams> {
    if n == 0 {
        return Err(Error::Domain("the Jimbo–Miwa scalars need n ≥ 1".into()));
    }
    let params = &table.params;
    let prec = params.bits() + 32;
    let t = Float::with_val(prec, params.s.sqrt_ref());
    let h = Float::with_val(prec, table.h(n));
    let hp = Float::with_val(prec, table.h(n - 1));
    let a = Float::with_val(prec, &aux.a[n]);
    let b = Float::with_val(prec, &aux.b[n]);
    if a.is_zero() {
        return Err(Error::DivisionByZero("Jimbo–Miwa scalars with a_n = 0"));
    }
    if b.is_zero() {
        return Err(Error::DivisionByZero("Jimbo–Miwa scalars with b_n = 0"));
    }
    let theta_inf = -Float::with_val(prec, &params.alpha + 2 * n as u32);
    // t^{2n+α} = t^{-θ_∞}.
    let tk = Float::with_val(prec, t.ln_ref()) * Float::with_val(prec, -&theta_inf);
    let tk = tk.exp();
    let u = -Float::with_val(prec, &h / &tk);
    let v = Float::with_val(prec, &tk / &hp);
    let zeta = -Float::with_val(prec, &b / &t);
    let w = -Float::with_val(prec, &h * &a) / &b / &tk;
    let zt = Float::with_val(prec, &zeta + &t);
    let first = -Float::with_val(prec, &theta_inf / &t) * Float::with_val(prec, Float::with_val(prec, &zeta * 2u32) + &t);
    let second = Float::with_val(prec, &u * 2u32) * &zt / Float::with_val(prec, &t * &w);
    let third = Float::with_val(prec, &zeta * 2u32) / &t * &w * &v;
    let theta_0 = first + second - third;
    Ok(JMParams {
        n,
        t,
        u,
        v,
        zeta,
        w,
        theta_inf,
        theta_0,
    })
}

fn rel_or_zero(lhs: &Float, rhs: &Float) -> f64 {
    rel_diff(lhs, rhs)
}

fn fd_tol(fd: &FdEstimate, s: &Float, reference: &Float, tol: f64) -> f64 {
    let scaled = FdEstimate {
        value: Float::with_val(fd.value.prec(), &fd.value * s),
        bound: Float::with_val(fd.bound.prec(), &fd.bound * s),
    };
    tol.max(scaled.rel_bound(reference))
}

/// The scalar form of the zero-curvature condition in `h_n, h_{n-1}, a_n,
/// b_n`, checked against finite differences, plus the first integral and
/// `uv = -β_n`.
///
/// - `jm-h-flow`: `s h_n' = -h_n a_n`
/// - `jm-h-prev-flow`: `s h_{n-1}' = (h_{n-1}²/h_n)(b_n/a_n)(s - b_n)`
/// - `jm-b-flow`: `s b_n' = b_n - (b_n/a_n)(s - b_n) - (h_n/h_{n-1})a_n`
/// - `jm-a-flow`: `s a_n' = 2b_n + (2n+1+α+a_n)a_n - s`
/// - `theta0-first-integral`: `θ₀ = α`
/// - `jm-uv-beta`: `uv = -β_n`
pub fn jm_scalar_system(n: usize, params: &EnsembleParams, tol: f64) -> Result<VerificationReport> {
    if n == 0 {
        return Err(Error::Domain("the Jimbo–Miwa system needs n ≥ 1".into()));
    }
    let (table, aux) = tables(n, params)?;
    let prec = params.bits() + 32;
    let s = Float::with_val(prec, &params.s);
    let h = Float::with_val(prec, table.h(n));
    let hp = Float::with_val(prec, table.h(n - 1));
    let a = Float::with_val(prec, &aux.a[n]);
    let b = Float::with_val(prec, &aux.b[n]);
    let (d1, _) = richardson_derivatives(
        |s| {
            let p = params.with_s(s.clone())?;
            let table = recurrence_coeffs(n, &p)?;
            let aux = aux_from_recurrence(&table, n)?;
            Ok(vec![table.h(n).clone(), table.h(n - 1).clone(), aux.b[n].clone(), aux.a[n].clone()])
        },
        &params.s,
        params.bits(),
    )?;
    let b_over_a = Float::with_val(prec, &b / &a);
    let s_minus_b = Float::with_val(prec, &s - &b);
    let rhs = [
        -Float::with_val(prec, &h * &a),
        Float::with_val(prec, hp.square_ref()) / &h * &b_over_a * &s_minus_b,
        Float::with_val(prec, &b - Float::with_val(prec, &b_over_a * &s_minus_b)) - Float::with_val(prec, &h / &hp) * &a,
        riccati_rhs(n, &a, &b, params)?.0,
    ];
    let ids = ["jm-h-flow", "jm-h-prev-flow", "jm-b-flow", "jm-a-flow"];
    let mut report = VerificationReport::new("jimbo-miwa");
    for ((id, fd), rhs) in ids.iter().zip(&d1).zip(&rhs) {
        let lhs = Float::with_val(prec, &fd.value * &s);
        let r = rel_or_zero(&lhs, rhs);
        report.push_value(id, n, params, &lhs, r, fd_tol(fd, &s, rhs, tol));
    }
    let jm = jm_params(n, &table, &aux)?;
    let r = rel_diff(&jm.theta_0, &params.alpha);
    report.push_value("theta0-first-integral", n, params, &jm.theta_0, r, tol);
    let uv = Float::with_val(prec, &jm.u * &jm.v);
    let r = rel_diff(&uv, &(-Float::with_val(prec, &table.beta_n[n])));
    report.push_value("jm-uv-beta", n, params, &uv, r, tol);
    Ok(report)
}

/// The ladder relations in `s` at real `z`, with finite-difference
/// `s`-derivatives of `P_n(z)` and `P_{n-1}(z)`:
///
/// - `s-ladder-upper`: `(zs d/ds - b_n)P_n = -β_n a_n P_{n-1}`
/// - `s-ladder-lower`: `(zs d/ds - b_{n-1} - α_{n-1}a_{n-1} + z a_{n-1})P_{n-1} = a_{n-1}P_n`
pub fn s_ladder_check(n: usize, z_samples: &[f64], params: &EnsembleParams, tol: f64) -> Result<VerificationReport> {
    if n == 0 {
        return Err(Error::Domain("the s-ladder relations need n ≥ 1".into()));
    }
    let (table, aux) = tables(n, params)?;
    let prec = params.bits() + 32;
    let zs: Vec<Float> = z_samples.iter().map(|&z| Float::with_val(prec, z)).collect();
    let (d1, _) = richardson_derivatives(
        |s| {
            let p = params.with_s(s.clone())?;
            let table = recurrence_coeffs(n, &p)?;
            let mut out = Vec::with_capacity(2 * zs.len());
            for z in &zs {
                out.push(table.eval_pn(n, z)?.value);
                out.push(table.eval_pn(n - 1, z)?.value);
            }
            Ok(out)
        },
        &params.s,
        params.bits(),
    )?;
    let s = Float::with_val(prec, &params.s);
    let f = |v: &Float| Float::with_val(prec, v);
    let (a, b, beta) = (f(&aux.a[n]), f(&aux.b[n]), f(&table.beta_n[n]));
    let (a_prev, b_prev, alpha_prev) = (f(&aux.a[n - 1]), f(&aux.b[n - 1]), f(&table.alpha_n[n - 1]));
    let mut report = VerificationReport::new("s-ladder");
    for (k, z) in zs.iter().enumerate() {
        let p = f(&table.eval_pn(n, z)?.value);
        let q = f(&table.eval_pn(n - 1, z)?.value);
        let zs_ = Float::with_val(prec, z * &s);
        for (which, fd) in [(0, &d1[2 * k]), (1, &d1[2 * k + 1])] {
            let deriv = Float::with_val(prec, &zs_ * &fd.value);
            let (terms, id) = if which == 0 {
                let rhs = Float::with_val(prec, &beta * &a) * &q;
                ([deriv.clone(), -Float::with_val(prec, &b * &p), rhs], "s-ladder-upper")
            } else {
                let coeff = Float::with_val(prec, z * &a_prev) - &b_prev - Float::with_val(prec, &alpha_prev * &a_prev);
                ([deriv.clone(), Float::with_val(prec, &coeff * &q), -Float::with_val(prec, &a_prev * &p)], "s-ladder-lower")
            };
            let scale = max_abs(&terms);
            let mut sum = Float::new(prec);
            for t in &terms {
                sum += t;
            }
            let (r, bound) = if scale.is_zero() {
                (0.0, 0.0)
            } else {
                let b = Float::with_val(prec, zs_.abs_ref()) * &fd.bound / &scale;
                ((sum.abs() / &scale).to_f64(), b.to_f64())
            };
            report.push_value(id, n, params, z, r, tol.max(bound));
        }
    }
    Ok(report)
}

/// Every Lax check for `n ≤ n_max` at the sample points:
///
/// - `zero-curvature`, `toda-compatibility`, `difference-compatibility`
/// - the same three under the `diag(1, 10)` gauge (`…-gauge`)
/// - `a2-trace`, `a2-determinant` (`det A₂ = -s²/4`),
///   `a1-offdiagonal-beta` (`A₁₁₂A₁₂₁ = -β_n`), `u0-offdiagonal` (`-1`)
/// - `lax-derivative-fd`: closed-form `s`-derivatives of the entries
///   against finite differences
/// - the Jimbo–Miwa system and the `s`-ladder relations for `n ≥ 1`
pub fn verify_lax(n_max: usize, params: &EnsembleParams, z_samples: &[(f64, f64)], tol: f64) -> Result<VerificationReport> {
    let (table, aux) = tables(n_max + 1, params)?;
    let data: Vec<LaxData> = (0..=n_max + 1).map(|n| lax_from_tables(n, &table, &aux)).collect::<Result<_>>()?;
    let prec = params.bits() + 32;
    let ten = Float::with_val(prec, 10);
    let mut report = VerificationReport::new("lax");
    let (fd, _) = richardson_derivatives(
        |s| {
            let p = params.with_s(s.clone())?;
            let (table, aux) = tables(n_max, &p)?;
            let mut out = Vec::new();
            for n in 0..=n_max {
                out.extend(lax_from_tables(n, &table, &aux)?.entries());
            }
            Ok(out)
        },
        &params.s,
        params.bits(),
    )?;
    let s = Float::with_val(prec, &params.s);
    for n in 0..=n_max {
        let (lo, hi) = (&data[n], &data[n + 1]);
        let c = worst_compatibility(lo, hi, z_samples);
        report.push("zero-curvature", n, params, c.zero_curvature, tol);
        report.push("toda-compatibility", n, params, c.toda, tol);
        report.push("difference-compatibility", n, params, c.difference, tol);
        let g = worst_compatibility(&lo.gauge(&ten), &hi.gauge(&ten), z_samples);
        report.push("zero-curvature-gauge", n, params, g.zero_curvature, tol);
        report.push("toda-compatibility-gauge", n, params, g.toda, tol);
        report.push("difference-compatibility-gauge", n, params, g.difference, tol);

        let a2 = &lo.a2;
        let tr = Float::with_val(prec, &a2[0][0] + &a2[1][1]);
        report.push_value("a2-trace", n, params, &tr, (tr.clone().abs() / &s).to_f64(), tol);
        let det = Float::with_val(prec, &a2[0][0] * &a2[1][1]) - Float::with_val(prec, &a2[0][1] * &a2[1][0]);
        let want = -Float::with_val(prec, s.square_ref()) / 4u32;
        report.push_value("a2-determinant", n, params, &det, rel_diff(&det, &want), tol);
        let off = Float::with_val(prec, &lo.a1[0][1] * &lo.a1[1][0]);
        report.push_value("a1-offdiagonal-beta", n, params, &off, rel_diff(&off, &(-Float::with_val(prec, &table.beta_n[n]))), tol);
        let off = Float::with_val(prec, &lo.u0[0][1] * &lo.u0[1][0]);
        report.push_value("u0-offdiagonal", n, params, &off, rel_diff(&off, &Float::with_val(prec, -1)), tol);

        let closed = lo.derivative_entries();
        let mut worst = 0.0f64;
        let mut allowed = tol;
        for (k, want) in closed.iter().enumerate() {
            let est = &fd[n * 12 + k];
            if want.is_zero() && est.value.is_zero() {
                continue;
            }
            // Entries whose derivative is tiny next to the entry itself are
            // compared on the scale of the entry.
            let scale = max_abs([want, &lo.entries()[k]]);
            let scale = Float::with_val(prec, &scale / &s);
            let diff = Float::with_val(prec, &est.value - want).abs();
            let r = (diff / &scale).to_f64();
            worst = worst.max(r);
            allowed = allowed.max(Float::with_val(prec, &est.bound / &scale).to_f64());
        }
        report.push("lax-derivative-fd", n, params, worst, allowed);

        if n >= 1 {
            report.extend(jm_scalar_system(n, params, tol)?);
            let zs: Vec<f64> = z_samples.iter().filter(|z| z.1 == 0.0).map(|z| z.0).chain([0.0]).collect();
            report.extend(s_ladder_check(n, &zs, params, tol)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::default_tol;

    fn params(alpha: f64, s: f64) -> EnsembleParams {
        EnsembleParams::from_f64(alpha, s, 256).unwrap()
    }

    #[test]
    fn hand_point_invariants() {
        let p = params(0.5, 1.0);
        let d = build_lax(1, &p).unwrap();
        let det = Float::with_val(300, &d.a2[0][0] * &d.a2[1][1]) - Float::with_val(300, &d.a2[0][1] * &d.a2[1][0]);
        assert!((det.to_f64() + 0.25).abs() < 1e-30);
        let off = Float::with_val(300, &d.a1[0][1] * &d.a1[1][0]);
        assert!(rel_diff(&off, &(-Float::with_val(300, 31) / 18u32)) < 1e-60);
        // A₂₁₁ = s/2 - b_1 = 1/2 + 4/9.
        assert!(rel_diff(&d.a2[0][0], &(Float::with_val(300, 17) / 18u32)) < 1e-60);
    }

    #[test]
    fn compatibility_at_hand_point() {
        let p = params(0.5, 1.0);
        let c = compatibility_residuals(1, &p, &default_z_samples()).unwrap();
        assert!(c.zero_curvature < 1e-60, "{c:?}");
        assert!(c.toda < 1e-60, "{c:?}");
        assert!(c.difference < 1e-60, "{c:?}");
    }

    #[test]
    fn perturbed_data_breaks_compatibility() {
        let p = params(0.5, 1.0);
        let (table, aux) = tables(2, &p).unwrap();
        let lo = lax_from_tables(1, &table, &aux).unwrap();
        let hi = lax_from_tables(2, &table, &aux).unwrap();
        let mut lo2 = lo.clone();
        lo2.a2_ds[0][1] += 1e-6;
        let z = Complex::with_val(288, (0.7, 0.0));
        let c = compatibility_at(&lo2, &hi, &z);
        assert!(c.zero_curvature > 1e-8);
        let mut lo3 = lo.clone();
        lo3.u0[0][0] += 1e-6;
        let c = compatibility_at(&lo3, &hi, &z);
        assert!(c.difference > 1e-8 && c.toda > 1e-8, "{c:?}");
    }

    #[test]
    fn gauge_leaves_residuals_alone() {
        let p = params(1.3, 2.0);
        let (table, aux) = tables(3, &p).unwrap();
        let lo = lax_from_tables(2, &table, &aux).unwrap();
        let hi = lax_from_tables(3, &table, &aux).unwrap();
        for c in [1.0, 10.0] {
            let c = Float::with_val(288, c);
            let r = worst_compatibility(&lo.gauge(&c), &hi.gauge(&c), &default_z_samples());
            assert!(r.zero_curvature < 1e-60 && r.toda < 1e-60 && r.difference < 1e-60, "{r:?}");
        }
    }

    #[test]
    fn jimbo_miwa_hand_point() {
        let p = params(0.5, 1.0);
        let (table, aux) = tables(1, &p).unwrap();
        let jm = jm_params(1, &table, &aux).unwrap();
        assert!(rel_diff(&jm.theta_0, &p.alpha) < 1e-60);
        let uv = Float::with_val(300, &jm.u * &jm.v);
        assert!(rel_diff(&uv, &(-Float::with_val(300, 31) / 18u32)) < 1e-60);
        // ζ = -b_1/t = 4/9.
        assert!(rel_diff(&jm.zeta, &(Float::with_val(300, 4) / 9u32)) < 1e-60);
        let r = jm_scalar_system(1, &p, 1e-12).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn s_ladder_relations() {
        let p = params(0.5, 1.0);
        let r = s_ladder_check(1, &[2.0, 0.0, -0.7], &p, 1e-12).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let p = params(1.3, 3.0);
        let r = s_ladder_check(4, &[0.5, 5.0], &p, 1e-12).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn full_suite() {
        let p = params(1.3, 0.5);
        let r = verify_lax(3, &p, &default_z_samples(), default_tol(256).max(1e-12)).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }
}
