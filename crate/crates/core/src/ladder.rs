//! The auxiliary quantities `a_n(s)`, `b_n(s)` of the ladder operators and
//! the identities obtained by equating residues in the compatibility
//! conditions.
//!
//! `A_n(z) = 1/z + a_n/z²`, `B_n(z) = -n/z + b_n/z²`,
//! `a_n = (s/h_n) ∫ P_n²/y w dy`, `b_n = (s/h_{n-1}) ∫ P_n P_{n-1}/y w dy`.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::moments::EnsembleParams;
use crate::orthopoly::{recurrence_coeffs, RecurrenceTable};
use crate::precision::{max_abs, rel_diff};
use crate::report::{balance, VerificationReport};
use crate::specialfun::bessel_k_ladder;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxRoute {
    Moments,
    Hierarchy,
    PainleveOde,
}

/// `a_0 … a_{n_max}` and `b_0 … b_{n_max}` (`b_0 = 0`).
#[derive(Clone, Debug)]
pub struct AuxTable {
    pub params: EnsembleParams,
    pub a: Vec<Float>,
    pub b: Vec<Float>,
    pub route: AuxRoute,
}

impl AuxTable {
    pub fn n_max(&self) -> usize {
        self.a.len() - 1
    }

    /// `Σ_{j<n} a_j`.
    pub fn sum_a(&self, n: usize) -> Float {
        let mut acc = Float::with_val(self.params.bits(), 0);
        for a in &self.a[..n] {
            acc += a;
        }
        acc
    }

    pub fn ladder_coefficients(&self, n: usize) -> LadderCoefficients {
        let bits = self.params.bits();
        LadderCoefficients {
            n,
            a_coeffs: (Float::with_val(bits, 1), self.a[n].clone()),
            b_coeffs: (Float::with_val(bits, -(n as i64)), self.b[n].clone()),
            v_prime: (
                Float::with_val(bits, 1),
                Float::with_val(bits, -&self.params.alpha),
                Float::with_val(bits, -&self.params.s),
            ),
        }
    }
}

/// Exact rational representation of the ladder coefficients:
/// `A_n(z) = a_coeffs.0/z + a_coeffs.1/z²`, `B_n(z) = b_coeffs.0/z + b_coeffs.1/z²`,
/// `𝗏'(z) = v_prime.0 + v_prime.1/z + v_prime.2/z²`.
#[derive(Clone, Debug)]
pub struct LadderCoefficients {
    pub n: usize,
    pub a_coeffs: (Float, Float),
    pub b_coeffs: (Float, Float),
    pub v_prime: (Float, Float, Float),
}

impl LadderCoefficients {
    pub fn a_at(&self, z: &Float) -> Float {
        let zi = Float::with_val(z.prec(), z.recip_ref());
        Float::with_val(z.prec(), &self.a_coeffs.0 * &zi) + Float::with_val(z.prec(), &self.a_coeffs.1 * &zi) * &zi
    }

    pub fn b_at(&self, z: &Float) -> Float {
        let zi = Float::with_val(z.prec(), z.recip_ref());
        Float::with_val(z.prec(), &self.b_coeffs.0 * &zi) + Float::with_val(z.prec(), &self.b_coeffs.1 * &zi) * &zi
    }

    pub fn v_prime_at(&self, z: &Float) -> Float {
        let zi = Float::with_val(z.prec(), z.recip_ref());
        Float::with_val(z.prec(), &self.v_prime.0)
            + Float::with_val(z.prec(), &self.v_prime.1 * &zi)
            + Float::with_val(z.prec(), &self.v_prime.2 * &zi) * &zi
    }
}

/// Default relative tolerance for the residue identities: `10^-15` at 256
/// bits, scaling as `2^-bits` above that and capped at `2^{-bits/6}` below.
pub fn default_tol(bits: u32) -> f64 {
    let scaled = 1e-15 * 2f64.powi(256 - bits as i32);
    scaled.min(2f64.powf(-f64::from(bits) / 6.0))
}

/// Moment route: the defining integrals as bilinear forms in
/// `μ_{-1} … μ_{2n-1}` with the monomial coefficients of `P_n`, `P_{n-1}`.
pub fn aux_from_moments(n_max: usize, params: &EnsembleParams) -> Result<AuxTable> {
    let table = recurrence_coeffs(n_max, params)?;
    aux_from_recurrence(&table, n_max)
}

pub fn aux_from_recurrence(table: &RecurrenceTable, n_max: usize) -> Result<AuxTable> {
    let params = &table.params;
    let bits = params.bits();
    if params.is_laguerre_limit() {
        let zeros = vec![Float::with_val(bits, 0); n_max + 1];
        return Ok(AuxTable {
            params: params.clone(),
            a: zeros.clone(),
            b: zeros,
            route: AuxRoute::Moments,
        });
    }
    let coeffs = table.monic_coeffs(n_max)?;
    let prec = bits + 32;
    let form = |m: usize, n: usize, index: usize| -> Result<Float> {
        let mut acc = Float::with_val(prec, 0);
        let mut terms_max = Float::with_val(prec, 0);
        for (i, ci) in coeffs[m].iter().enumerate() {
            for (j, cj) in coeffs[n].iter().enumerate() {
                let t = Float::with_val(prec, ci * cj) * table.moments.get(i as i64 + j as i64 - 1)?;
                terms_max = max_abs([&terms_max, &t]);
                acc += t;
            }
        }
        if !acc.is_zero() {
            let lost = Float::with_val(64, &terms_max / Float::with_val(prec, acc.abs_ref()))
                .log2()
                .to_f64()
                .max(0.0)
                .ceil() as u32;
            if lost > bits.saturating_sub(32) {
                return Err(Error::Conditioning {
                    stage: "aux bilinear form",
                    index,
                    lost_bits: lost,
                    bits,
                });
            }
        }
        Ok(acc)
    };
    let mut a = Vec::with_capacity(n_max + 1);
    let mut b = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let an = Float::with_val(prec, &params.s * form(n, n, n)?) / table.h(n);
        a.push(Float::with_val(bits, an));
        if n == 0 {
            b.push(Float::with_val(bits, 0));
        } else {
            let bn = Float::with_val(prec, &params.s * form(n, n - 1, n)?) / table.h(n - 1);
            b.push(Float::with_val(bits, bn));
        }
    }
    Ok(AuxTable {
        params: params.clone(),
        a,
        b,
        route: AuxRoute::Moments,
    })
}

/// `a_0(s) = √s K_α(2√s)/K_{α+1}(2√s)`.
pub fn a0_bessel(params: &EnsembleParams) -> Result<Float> {
    let bits = params.bits();
    if params.is_laguerre_limit() {
        return Ok(Float::with_val(bits, 0));
    }
    let prec = bits + 16;
    let sqrt_s = Float::with_val(prec, params.s.sqrt_ref());
    let x = Float::with_val(prec, &sqrt_s * 2u32);
    let ks = bessel_k_ladder(&params.alpha, 2, &x, &params.ctx.widened(16))?;
    Ok(Float::with_val(bits, sqrt_s * &ks[0] / &ks[1]))
}

/// The difference system iterated forward in `n`:
/// `b_{n+1} = s - (2n+1+α+a_n)a_n - b_n`, then
/// `(b²-sb)(a_{n+1}+a_n) = [(n+1)s - (2n+2+α)b] a_{n+1} a_n` at `b = b_{n+1}`
/// solved for `a_{n+1}`.
pub fn hierarchy_iterate(n_max: usize, params: &EnsembleParams) -> Result<AuxTable> {
    if params.is_laguerre_limit() {
        return Err(Error::Domain("the hierarchy iteration needs s > 0".into()));
    }
    let bits = params.bits();
    let prec = bits + 32;
    let s = Float::with_val(prec, &params.s);
    let alpha = Float::with_val(prec, &params.alpha);
    let mut a = vec![Float::with_val(prec, a0_bessel(&params.with_ctx(params.ctx.widened(32)))?)];
    let mut b = vec![Float::with_val(prec, 0)];
    let degeneracy = Float::with_val(64, 2).pow(-(bits as i32) / 2);
    for n in 0..n_max {
        let an = &a[n];
        let lin = Float::with_val(prec, &alpha + (2 * n as u32 + 1)) + an;
        let b_next = Float::with_val(prec, &s - Float::with_val(prec, &lin * an)) - &b[n];
        let quad = Float::with_val(prec, &b_next * Float::with_val(prec, &b_next - &s));
        let m = (n + 1) as u32;
        let c = Float::with_val(prec, &s * m) - Float::with_val(prec, &alpha + 2 * m) * &b_next;
        let ca = Float::with_val(prec, &c * an);
        let pivot = Float::with_val(prec, &ca - &quad);
        let scale = max_abs([&ca, &quad]);
        if pivot.is_zero() || Float::with_val(prec, pivot.abs_ref()) <= scale * &degeneracy {
            return Err(Error::DegeneratePivot {
                n: n + 1,
                s: params.s.to_f64(),
            });
        }
        let a_next = quad * an / pivot;
        a.push(a_next);
        b.push(b_next);
    }
    Ok(AuxTable {
        params: params.clone(),
        a: a.into_iter().map(|v| Float::with_val(bits, v)).collect(),
        b: b.into_iter().map(|v| Float::with_val(bits, v)).collect(),
        route: AuxRoute::Hierarchy,
    })
}

/// `β_n` from `(a_n, b_n)` alone: `β_n a_n² = [ns - (2n+α)b_n]a_n - (b_n² - s b_n)`.
pub fn beta_from_aux(n: usize, a_n: &Float, b_n: &Float, params: &EnsembleParams) -> Result<Float> {
    if a_n.is_zero() {
        return Err(Error::DivisionByZero("beta from a_n = 0"));
    }
    let prec = params.bits() + 32;
    let s = &params.s;
    let c = Float::with_val(prec, s * n as u32) - Float::with_val(prec, &params.alpha + 2 * n as u32) * b_n;
    let quad = Float::with_val(prec, b_n * Float::with_val(prec, b_n - s));
    let num = Float::with_val(prec, &c * a_n) - quad;
    Ok(Float::with_val(params.bits(), num / Float::with_val(prec, a_n.square_ref())))
}

/// `Σ_{j<n} a_j = -n(n+α) - b_n + [ns - (2n+α)b_n]/a_n - (b_n² - s b_n)/a_n²`.
pub fn sum_a_from_aux(n: usize, a_n: &Float, b_n: &Float, params: &EnsembleParams) -> Result<Float> {
    if a_n.is_zero() {
        return Err(Error::DivisionByZero("sum of a_j from a_n = 0"));
    }
    let prec = params.bits() + 32;
    let s = &params.s;
    let nn = Float::with_val(prec, &params.alpha + n as u32) * n as u32;
    let c = Float::with_val(prec, s * n as u32) - Float::with_val(prec, &params.alpha + 2 * n as u32) * b_n;
    let quad = Float::with_val(prec, b_n * Float::with_val(prec, b_n - s));
    let out = -nn - b_n + Float::with_val(prec, &c / a_n) - quad / Float::with_val(prec, a_n.square_ref());
    Ok(Float::with_val(params.bits(), out))
}

/// Max relative difference of the `a` and `b` columns of two tables.
pub fn route_agreement(x: &AuxTable, y: &AuxTable) -> (f64, f64) {
    let n = x.a.len().min(y.a.len());
    let col = |u: &[Float], v: &[Float]| -> f64 {
        let norm = max_abs(u[..n].iter().chain(&v[..n]));
        if norm.is_zero() {
            return 0.0;
        }
        let prec = norm.prec() + 32;
        let mut worst = Float::with_val(prec, 0);
        for (p, q) in u[..n].iter().zip(&v[..n]) {
            let d = Float::with_val(prec, p - q).abs();
            if d > worst {
                worst = d;
            }
        }
        (worst / norm).to_f64()
    };
    (col(&x.a, &y.a), col(&x.b, &y.b))
}

/// Residue identities for `n ≤ n_max`, checked on the moment route:
///
/// - `alpha-from-a`: `α_n = 2n+1+α+a_n`
/// - `b-sum`: `b_{n+1} + b_n = s - α_n a_n`
/// - `beta-from-sum`: `β_n = n(n+α) + b_n + Σ_{j<n} a_j`
/// - `beta-a-sum`: `β_n(a_n + a_{n-1}) = ns - (2n+α)b_n`
/// - `b-quadratic`: `b_n² - s b_n = β_n a_n a_{n-1}`
/// - `beta-closed-form`: `β_n` from `(a_n, b_n)` only
/// - `sum-a-closed-form`: `Σ_{j<n} a_j` from `(a_n, b_n)` only
pub fn verify_residue_identities(n_max: usize, params: &EnsembleParams, tol: f64) -> Result<VerificationReport> {
    let table = recurrence_coeffs(n_max + 1, params)?;
    let aux = aux_from_recurrence(&table, n_max + 1)?;
    Ok(residue_report(&table, &aux, n_max, tol))
}

pub fn residue_report(table: &RecurrenceTable, aux: &AuxTable, n_max: usize, tol: f64) -> VerificationReport {
    let params = &table.params;
    let prec = params.bits() + 32;
    let f = |v: &Float| Float::with_val(prec, v);
    let s = f(&params.s);
    let alpha = f(&params.alpha);
    let mut report = VerificationReport::new("residue");
    for n in 0..=n_max {
        let a = &aux.a[n];
        let b = &aux.b[n];
        let al = &table.alpha_n[n];
        let nf = n as u32;
        let r = balance(&[f(al), -Float::with_val(prec, &alpha + (2 * nf + 1)), -f(a)]);
        report.push_value("alpha-from-a", n, params, al, r, tol);
        if n < aux.n_max() {
            let r = balance(&[f(&aux.b[n + 1]), f(b), -s.clone(), Float::with_val(prec, al * a)]);
            report.push("b-sum", n, params, r, tol);
        }
        if n == 0 {
            continue;
        }
        let beta = &table.beta_n[n];
        let a_prev = &aux.a[n - 1];
        let nn = Float::with_val(prec, &alpha + nf) * nf;
        let sum_a = aux.sum_a(n);
        let r = balance(&[f(beta), -nn.clone(), -f(b), -f(&sum_a)]);
        report.push_value("beta-from-sum", n, params, beta, r, tol);
        let lin = Float::with_val(prec, &alpha + 2 * nf) * b;
        let r = balance(&[
            Float::with_val(prec, beta * a),
            Float::with_val(prec, beta * a_prev),
            -Float::with_val(prec, &s * nf),
            lin.clone(),
        ]);
        report.push("beta-a-sum", n, params, r, tol);
        let r = balance(&[
            Float::with_val(prec, b.square_ref()),
            -Float::with_val(prec, &s * b),
            -Float::with_val(prec, beta * a) * a_prev,
        ]);
        report.push("b-quadratic", n, params, r, tol);
        match beta_from_aux(n, a, b, params) {
            Ok(v) => {
                let r = rel_diff(&v, beta);
                report.push_value("beta-closed-form", n, params, &v, r, tol);
            }
            Err(_) => {
                report.push("beta-closed-form", n, params, f64::INFINITY, tol);
            }
        }
        match sum_a_from_aux(n, a, b, params) {
            Ok(v) => {
                let r = rel_diff(&v, &sum_a);
                report.push_value("sum-a-closed-form", n, params, &v, r, tol);
            }
            Err(_) => {
                report.push("sum-a-closed-form", n, params, f64::INFINITY, tol);
            }
        }
    }
    report
}
