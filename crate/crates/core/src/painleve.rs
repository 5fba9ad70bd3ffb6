//! Painlevé III for `a_n(s)`, the σ-function `H_n = s d/ds ln D_n` with its
//! continuous and discrete σ-forms, the integral representation of
//! `ln D_n`, and the Hamiltonian form of `s d/ds ln τ`.
//!
//! Near `s = 0` the orbit of `a_n` is not analytic: the exponents at the
//! origin are `1 ± α`, so the start uses a double series in `s` and `s^α`
//! whose free coefficient is fixed by the moments at `s = 0`.

use rug::Float;

use crate::error::{Error, Result};
use crate::ladder::{aux_from_recurrence, hierarchy_iterate, AuxRoute, AuxTable};
use crate::moments::{mgf, EnsembleParams};
use crate::ode::{bulirsch_stoer, OdeOptions, OdeStats};
use crate::orthopoly::{recurrence_coeffs, RecurrenceTable};
use crate::precision::{max_abs, rel_diff, PrecisionContext};
use crate::quad::{tanh_sinh_with, QuadOptions};
use crate::report::{balance, VerificationReport};
use crate::specialfun::gamma;
use crate::toda::{richardson_derivatives, riccati_rhs};

/// A point on the orbit of `a_n`.
#[derive(Clone, Debug)]
pub struct PainleveState {
    pub n: usize,
    pub s: Float,
    pub a: Float,
    pub a_prime: Float,
}

/// The terms of `a'' = a'²/a - a'/s + (2n+1+α)a²/s² + a³/s² + α/s - 1/a`,
/// right-hand side only.
fn p3_terms(state: &PainleveState, params: &EnsembleParams) -> Result<Vec<Float>> {
    if state.s.is_zero() {
        return Err(Error::Singular("Painlevé III at s = 0".into()));
    }
    if state.a.is_zero() {
        return Err(Error::Singular("Painlevé III with a = 0".into()));
    }
    let prec = params.bits() + 32;
    let s = Float::with_val(prec, &state.s);
    let a = Float::with_val(prec, &state.a);
    let ap = Float::with_val(prec, &state.a_prime);
    let s2 = Float::with_val(prec, s.square_ref());
    let a2 = Float::with_val(prec, a.square_ref());
    let lin = Float::with_val(prec, &params.alpha + (2 * state.n as u32 + 1));
    Ok(vec![
        Float::with_val(prec, ap.square_ref()) / &a,
        -Float::with_val(prec, &ap / &s),
        lin * &a2 / &s2,
        a2 * &a / &s2,
        Float::with_val(prec, &params.alpha / &s),
        -a.recip(),
    ])
}

/// `a''` from the Painlevé III equation.
pub fn p3_rhs(state: &PainleveState, params: &EnsembleParams) -> Result<Float> {
    let terms = p3_terms(state, params)?;
    let mut acc = Float::with_val(params.bits() + 32, 0);
    for t in &terms {
        acc += t;
    }
    Ok(Float::with_val(params.bits(), acc))
}

/// Relative residual of Painlevé III for a given `a''`.
pub fn p3_residual(state: &PainleveState, a_second: &Float, params: &EnsembleParams) -> Result<f64> {
    let mut terms = p3_terms(state, params)?;
    for t in terms.iter_mut() {
        *t = -t.clone();
    }
    terms.push(Float::with_val(params.bits() + 32, a_second));
    Ok(balance(&terms))
}

/// `(X, X', X'')` for `X = s/a`.
pub fn x_from_a(state: &PainleveState, a_second: &Float, params: &EnsembleParams) -> (Float, Float, Float) {
    let prec = params.bits() + 32;
    let s = Float::with_val(prec, &state.s);
    let a = Float::with_val(prec, &state.a);
    let ap = Float::with_val(prec, &state.a_prime);
    let a2 = Float::with_val(prec, a.square_ref());
    let x = Float::with_val(prec, &s / &a);
    let x1 = Float::with_val(prec, a.recip_ref()) - Float::with_val(prec, &s * &ap) / &a2;
    let x2 = -Float::with_val(prec, &ap * 2u32) / &a2 - Float::with_val(prec, &s * a_second) / &a2
        + Float::with_val(prec, ap.square_ref()) * &s * 2u32 / (a2 * &a);
    (x, x1, x2)
}

/// Relative residual of the `X = s/a` form,
/// `X'' = X'²/X - X'/s - αX²/s² - (2n+1+α)/s + X³/s² - 1/X`.
pub fn x_form_residual(n: usize, s: &Float, x: &Float, x1: &Float, x2: &Float, params: &EnsembleParams) -> Result<f64> {
    if s.is_zero() || x.is_zero() {
        return Err(Error::Singular("X form at s = 0 or X = 0".into()));
    }
    let prec = params.bits() + 32;
    let s2 = Float::with_val(prec, s.square_ref());
    let xx = Float::with_val(prec, x.square_ref());
    let lin = Float::with_val(prec, &params.alpha + (2 * n as u32 + 1));
    Ok(balance(&[
        Float::with_val(prec, x2),
        -Float::with_val(prec, x1.square_ref()) / x,
        Float::with_val(prec, x1 / s),
        Float::with_val(prec, &params.alpha * &xx) / &s2,
        lin / s,
        -Float::with_val(prec, &xx * x) / &s2,
        Float::with_val(prec, x.recip_ref()),
    ]))
}

/// The positive root of `X⁴ - αX³ - (2n+1+α)sX - s² = 0`.
#[derive(Clone, Debug)]
pub struct QuarticRoot {
    pub s: Float,
    pub x: Float,
    pub residual: f64,
}

fn quartic_terms(n: usize, x: &Float, params: &EnsembleParams, prec: u32) -> [Float; 4] {
    let s = &params.s;
    let x3 = Float::with_val(prec, x.square_ref()) * x;
    let lin = Float::with_val(prec, &params.alpha + (2 * n as u32 + 1));
    [
        Float::with_val(prec, &x3 * x),
        -Float::with_val(prec, &params.alpha * &x3),
        -(lin * s) * x,
        -Float::with_val(prec, s.square_ref()),
    ]
}

/// Bisection to bracket, then Newton. The polynomial has one sign change in
/// its coefficients, so the positive root is unique.
pub fn quartic_root(n: usize, params: &EnsembleParams) -> Result<QuarticRoot> {
    if params.is_laguerre_limit() {
        return Err(Error::Domain("the quartic needs s > 0".into()));
    }
    let bits = params.bits();
    let prec = bits + 32;
    let value = |x: &Float| -> Float {
        let t = quartic_terms(n, x, params, prec);
        Float::with_val(prec, &t[0] + &t[1]) + &t[2] + &t[3]
    };
    let mut lo = Float::with_val(prec, 0);
    let mut hi = Float::with_val(prec, 1);
    while value(&hi) <= 0 {
        hi *= 2u32;
    }
    for _ in 0..60 {
        let mid = Float::with_val(prec, &lo + &hi) / 2u32;
        if value(&mid) <= 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = hi;
    let lin = Float::with_val(prec, &params.alpha + (2 * n as u32 + 1)) * &params.s;
    for _ in 0..(2 * bits.ilog2() + 8) {
        let x2 = Float::with_val(prec, x.square_ref());
        let d = Float::with_val(prec, &x2 * &x) * 4u32 - Float::with_val(prec, &params.alpha * &x2) * 3u32 - &lin;
        let step = value(&x) / d;
        x -= &step;
        if step.is_zero() || Float::with_val(prec, step.abs_ref()) < Float::with_val(prec, &x >> (prec - 8)).abs() {
            break;
        }
    }
    let residual = balance(&quartic_terms(n, &x, params, prec));
    if residual > 2f64.powf(-f64::from(bits) / 2.0) {
        return Err(Error::Conditioning {
            stage: "quartic root",
            index: n,
            lost_bits: bits / 2,
            bits,
        });
    }
    Ok(QuarticRoot {
        s: params.s.clone(),
        x: Float::with_val(bits, x),
        residual,
    })
}

// ----------------------------------------------------------------------------
// Small-s expansion

/// `a_n(s) = s Σ g_{jk} s^{j+kα}`, truncated at total exponent `order`.
///
/// With `g = a/s` and `θ = s d/ds` the equation becomes
/// `gθ²g - (θg)² - αg + 1 - (2n+1+α)s g³ - s²g⁴ = 0`, so `g_00 = 1/α` and
/// every other coefficient follows from lower ones except `g_01`, which
/// multiplies the resonant exponent `α` and is set to
/// `Γ(-α)Γ(n+α+1)/(n! Γ(α+1)²)`. Integer `α` brings logarithms and is
/// rejected.
#[derive(Clone, Debug)]
pub struct SmallSSeries {
    pub n: usize,
    pub alpha: Float,
    pub order: f64,
    /// Sorted by exponent.
    pub terms: Vec<SeriesTerm>,
}

#[derive(Clone, Debug)]
pub struct SeriesTerm {
    pub j: usize,
    pub k: usize,
    pub exponent: Float,
    pub coeff: Float,
}

/// Distance below which `α` is treated as an integer.
const INTEGER_ALPHA_GAP: f64 = 1e-6;

pub fn alpha_is_integer(alpha: f64) -> bool {
    (alpha - alpha.round()).abs() < INTEGER_ALPHA_GAP
}

/// Coefficient of `s^{1+α}` in `a_n(s)`.
pub fn connection_coefficient(n: usize, alpha: &Float) -> Result<Float> {
    let bits = alpha.prec() + 16;
    let ctx = PrecisionContext::new(bits)?;
    let al = Float::with_val(bits, alpha);
    let neg = gamma(&Float::with_val(bits, -&al), &ctx)?;
    let top = gamma(&Float::with_val(bits, &al + (n as u32 + 1)), &ctx)?;
    let fact = gamma(&Float::with_val(bits, n as u32 + 1), &ctx)?;
    let base = gamma(&Float::with_val(bits, &al + 1u32), &ctx)?;
    Ok(Float::with_val(alpha.prec(), neg * top / fact / base.square()))
}

impl SmallSSeries {
    /// Coefficients at the precision of `alpha`.
    pub fn new(n: usize, alpha: &Float, order: f64) -> Result<Self> {
        let al = alpha.to_f64();
        if al <= 0.0 {
            return Err(Error::Domain("the small-s series needs α > 0".into()));
        }
        if alpha_is_integer(al) {
            return Err(Error::SeriesStart(format!(
                "α = {al} is an integer; the expansion at s = 0 has logarithms"
            )));
        }
        let bits = alpha.prec();
        let prec = bits + 16;
        let jmax = order.floor() as usize;
        let kmax = (order / al).floor() as usize;
        let width = kmax + 1;
        let idx = |j: usize, k: usize| j * width + k;
        let key = |j: usize, k: usize| j as f64 + k as f64 * al;
        let mut list: Vec<(usize, usize)> = Vec::new();
        for j in 0..=jmax {
            for k in 0..=kmax {
                if key(j, k) <= order + 1e-12 {
                    list.push((j, k));
                }
            }
        }
        list.sort_by(|p, q| key(p.0, p.1).total_cmp(&key(q.0, q.1)).then(p.0.cmp(&q.0)));
        let alpha = Float::with_val(prec, alpha);
        let exps: Vec<Float> = (0..(jmax + 1) * width)
            .map(|i| Float::with_val(prec, &alpha * (i % width) as u32) + (i / width) as u32)
            .collect();
        let zero = Float::with_val(prec, 0);
        let size = (jmax + 1) * width;
        let mut g = vec![zero.clone(); size];
        let (mut g2, mut g3, mut g4) = (vec![zero.clone(); size], vec![zero.clone(); size], vec![zero; size]);
        fn conv(j: usize, k: usize, width: usize, u: &[Float], v: &[Float], prec: u32) -> Float {
            let mut acc = Float::with_val(prec, 0);
            for pj in 0..=j {
                for pk in 0..=k {
                    let (p, q) = (pj * width + pk, (j - pj) * width + (k - pk));
                    if !u[p].is_zero() && !v[q].is_zero() {
                        acc += Float::with_val(prec, &u[p] * &v[q]);
                    }
                }
            }
            acc
        }
        g[idx(0, 0)] = Float::with_val(prec, alpha.recip_ref());
        let c_n = Float::with_val(prec, connection_coefficient(n, &alpha)?);
        let lin = Float::with_val(prec, &alpha + (2 * n as u32 + 1));
        let alpha2 = Float::with_val(prec, alpha.square_ref());
        let mut ready = 0;
        for &(j, k) in &list {
            let e = key(j, k);
            if j == 0 && k == 0 {
                continue;
            }
            while ready < list.len() && key(list[ready].0, list[ready].1) <= e - 1.0 + 1e-9 {
                let (rj, rk) = list[ready];
                let i = idx(rj, rk);
                g2[i] = conv(rj, rk, width, &g, &g, prec);
                g3[i] = conv(rj, rk, width, &g, &g2, prec);
                g4[i] = conv(rj, rk, width, &g2, &g2, prec);
                ready += 1;
            }
            if j == 0 && k == 1 {
                g[idx(0, 1)] = c_n.clone();
                continue;
            }
            // Σ g_p g_q (e_q² - e_p e_q) over p + q = (j, k), both non-zero.
            let mut quad = Float::with_val(prec, 0);
            for pj in 0..=j {
                for pk in 0..=k {
                    let (qj, qk) = (j - pj, k - pk);
                    if (pj == 0 && pk == 0) || (qj == 0 && qk == 0) {
                        continue;
                    }
                    let (p, q) = (idx(pj, pk), idx(qj, qk));
                    if g[p].is_zero() || g[q].is_zero() {
                        continue;
                    }
                    let w = Float::with_val(prec, &exps[q] - &exps[p]) * &exps[q];
                    quad += w * &g[p] * &g[q];
                }
            }
            let cubic = if j >= 1 { Float::with_val(prec, &lin * &g3[idx(j - 1, k)]) } else { Float::with_val(prec, 0) };
            let quartic = if j >= 2 { g4[idx(j - 2, k)].clone() } else { Float::with_val(prec, 0) };
            let rest = quad - cubic - quartic;
            let denom = Float::with_val(prec, exps[idx(j, k)].square_ref()) - &alpha2;
            g[idx(j, k)] = -(rest * &alpha) / denom;
        }
        let terms = list
            .iter()
            .map(|&(j, k)| SeriesTerm {
                j,
                k,
                exponent: Float::with_val(bits, &exps[idx(j, k)]),
                coeff: Float::with_val(bits, &g[idx(j, k)]),
            })
            .collect();
        Ok(Self {
            n,
            alpha: Float::with_val(bits, alpha),
            order,
            terms,
        })
    }

    /// `(a, a', truncation estimate for a)` at `s > 0`.
    pub fn eval(&self, s: &Float) -> (Float, Float, Float) {
        let prec = self.alpha.prec() + 16;
        let ln_s = Float::with_val(prec, s.ln_ref());
        let (mut g, mut dg, mut tail) = (Float::with_val(prec, 0), Float::with_val(prec, 0), Float::with_val(prec, 0));
        let cut = self.order - 1.0;
        for t in &self.terms {
            let v = Float::with_val(prec, &t.exponent * &ln_s).exp() * &t.coeff;
            dg += Float::with_val(prec, &t.exponent + 1u32) * &v;
            if t.exponent.to_f64() > cut {
                tail += Float::with_val(prec, v.abs_ref());
            }
            g += v;
        }
        let bits = self.alpha.prec();
        (Float::with_val(bits, g * s), Float::with_val(bits, dg), Float::with_val(bits, tail * s))
    }

    /// `∫_0^t a(u)/u du`.
    pub fn integral_of_g(&self, t: &Float) -> Float {
        let prec = self.alpha.prec() + 16;
        let ln_t = Float::with_val(prec, t.ln_ref());
        let mut acc = Float::with_val(prec, 0);
        for term in &self.terms {
            let e1 = Float::with_val(prec, &term.exponent + 1u32);
            let v = Float::with_val(prec, &e1 * &ln_t).exp() * &term.coeff / &e1;
            acc += v;
        }
        Float::with_val(self.alpha.prec(), acc)
    }

    /// Largest `s = s_max 2^{-k}` at which the truncation estimate is below
    /// `tol` relative to `a`.
    pub fn start_point(&self, s_max: f64, tol: f64) -> Option<f64> {
        let bits = self.alpha.prec();
        let mut s = s_max;
        for _ in 0..400 {
            let (a, _, tail) = self.eval(&Float::with_val(bits, s));
            if a > 0 && tail <= a * tol {
                return Some(s);
            }
            s /= 2.0;
        }
        None
    }
}

// ----------------------------------------------------------------------------
// ODE route

const SERIES_ORDER: f64 = 12.0;
/// Inner step tolerance relative to the requested accuracy; the orbit
/// amplifies start and step errors by up to ~10^8 on the acceptance range.
const INNER_MARGIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum StartKind {
    /// Small-s series at `s0`.
    Series { s0: f64 },
    /// Integer `α`: hierarchy value at `s0`.
    Hierarchy { s0: f64 },
}

#[derive(Clone, Debug)]
pub struct P3Solution {
    pub state: PainleveState,
    pub start: StartKind,
    pub stats: OdeStats,
    /// Relative change of `a` against a run with a 1000× looser inner tolerance.
    pub error_estimate: f64,
}

fn p3_orbit(n: usize, alpha: &Float, s_target: &Float, inner_tol: f64, bits: u32) -> Result<(Float, Float, StartKind, OdeStats)> {
    let al = alpha.to_f64();
    let st = s_target.to_f64();
    let alpha = Float::with_val(bits, alpha);
    let (s0, a0, ap0, start) = if alpha_is_integer(al) {
        let s0 = st / 64.0;
        let p = EnsembleParams::new(alpha.clone(), Float::with_val(bits, s0), PrecisionContext::new(bits)?)?;
        let aux = hierarchy_iterate(n, &p)?;
        let (sa, _) = riccati_rhs(n, &aux.a[n], &aux.b[n], &p)?;
        (s0, aux.a[n].clone(), sa / s0, StartKind::Hierarchy { s0 })
    } else {
        let series = SmallSSeries::new(n, &alpha, SERIES_ORDER)?;
        let s0 = series
            .start_point(st.min(0.5), inner_tol * 1e-2)
            .ok_or_else(|| Error::SeriesStart(format!("no start point for n = {n}, α = {al}")))?;
        let (a, ap, _) = series.eval(&Float::with_val(bits, s0));
        (s0, a, ap, StartKind::Series { s0 })
    };
    if a0 <= 0 {
        return Err(Error::SeriesStart(format!("non-positive start value {}", a0.to_f64())));
    }
    let s0f = Float::with_val(bits, s0);
    let u0 = Float::with_val(bits, s0f.ln_ref());
    let u1 = Float::with_val(bits, s_target.ln_ref());
    let y0 = [Float::with_val(bits, a0.ln_ref()), Float::with_val(bits, &ap0 * &s0f) / &a0];
    let lin = Float::with_val(bits, &alpha + (2 * n as u32 + 1));
    let rhs = |u: &Float, y: &[Float; 2]| -> Result<[Float; 2]> {
        let a = Float::with_val(bits, y[0].exp_ref());
        let r = Float::with_val(bits, u - &y[0]).exp();
        if !a.is_finite() || !r.is_finite() {
            return Err(Error::Singular("a_n left the positive orbit".into()));
        }
        let pull = Float::with_val(bits, &alpha - &r) * &r;
        let a2 = Float::with_val(bits, a.square_ref());
        Ok([y[1].clone(), Float::with_val(bits, &lin * &a) + a2 + pull])
    };
    let (y, stats) = bulirsch_stoer(rhs, &u0, y0, &u1, &OdeOptions::new(inner_tol, bits))?;
    let a = Float::with_val(bits, y[0].exp_ref());
    if !a.is_finite() || a.is_zero() {
        return Err(Error::Singular(format!("a_{n} left the positive orbit before s = {st}")));
    }
    let ap = Float::with_val(bits, &a * &y[1]) / s_target;
    Ok((a, ap, start, stats))
}

/// Integrates Painlevé III for `a_n` from a start near `s = 0` to
/// `s_target`, with `L = ln a` as a function of `u = ln s`:
/// `L'' = (2n+1+α)e^L + e^{2L} + r(α - r)`, `r = e^{u-L}`.
///
/// Steps use an inner tolerance of `rtol·10^-12`; the result is compared
/// with a run at a 1000× looser inner tolerance and tightened (twice at
/// most) until that estimate is below `rtol`. For integer `α` the start is
/// the hierarchy value at `s_target/64`.
pub fn p3_solve(n: usize, params: &EnsembleParams, s_target: f64, rtol: f64) -> Result<P3Solution> {
    if !(s_target > 0.0 && s_target.is_finite()) {
        return Err(Error::Domain(format!("s_target = {s_target} must be positive")));
    }
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(Error::Domain(format!("rtol = {rtol} must lie in (0, 1)")));
    }
    let mut inner = rtol * INNER_MARGIN;
    for _ in 0..3 {
        let bits = ((-inner.log2()).ceil() as u32 + 48).max(128);
        let target = Float::with_val(bits, s_target);
        let alpha = Float::with_val(bits, &params.alpha);
        let (a, ap, start, stats) = p3_orbit(n, &alpha, &target, inner, bits)?;
        let (coarse, _, _, _) = p3_orbit(n, &alpha, &target, inner * 1e3, bits)?;
        let error_estimate = rel_diff(&a, &coarse);
        if error_estimate <= rtol {
            let out = params.bits();
            return Ok(P3Solution {
                state: PainleveState {
                    n,
                    s: Float::with_val(out, s_target),
                    a: Float::with_val(out, a),
                    a_prime: Float::with_val(out, ap),
                },
                start,
                stats,
                error_estimate,
            });
        }
        inner *= 1e-4;
    }
    Err(Error::Singular(format!(
        "orbit of a_{n} too unstable to reach s = {s_target} at rtol = {rtol:e}"
    )))
}

/// `a_n` for `n ≤ n_max` from the ODE, with `b_n` from
/// `s a_n' = 2b_n + (2n+1+α+a_n)a_n - s`.
pub fn aux_from_ode(n_max: usize, params: &EnsembleParams, rtol: f64) -> Result<AuxTable> {
    let bits = params.bits();
    let prec = bits + 32;
    let s = Float::with_val(prec, &params.s);
    let mut a = Vec::with_capacity(n_max + 1);
    let mut b = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let sol = p3_solve(n, params, s.to_f64(), rtol)?.state;
        let bv = if n == 0 {
            Float::with_val(bits, 0)
        } else {
            let lin = Float::with_val(prec, &params.alpha + (2 * n as u32 + 1)) + &sol.a;
            let v = Float::with_val(prec, &sol.a_prime * &s) - lin * &sol.a + &s;
            Float::with_val(bits, v / 2u32)
        };
        a.push(sol.a);
        b.push(bv);
    }
    Ok(AuxTable {
        params: params.clone(),
        a,
        b,
        route: AuxRoute::PainleveOde,
    })
}

// ----------------------------------------------------------------------------
// σ-function

/// `H_n` and its first two `s`-derivatives, with the recurrence coefficients
/// they determine.
#[derive(Clone, Debug)]
pub struct SigmaData {
    pub n: usize,
    pub s: Float,
    pub h: Float,
    pub h_prime: Float,
    pub h_second: Float,
    /// `2n+1+α + 2s(H'² - H')/(sH'' + n - (2n+α)H')`; absent when the
    /// denominator vanishes (always at `n = 0`).
    pub alpha_n: Option<Float>,
    /// `n(n+α) + sH' - H`.
    pub beta_n: Float,
}

pub fn sigma_from_aux(n: usize, aux: &AuxTable) -> Result<SigmaData> {
    let params = &aux.params;
    if params.is_laguerre_limit() {
        return Err(Error::Domain("H_n' is built from b_n/s and needs s > 0".into()));
    }
    let bits = params.bits();
    let prec = bits + 32;
    let s = Float::with_val(prec, &params.s);
    let a = &aux.a[n];
    let b = Float::with_val(prec, &aux.b[n]);
    let (_, sb) = riccati_rhs(n, a, &b, params)?;
    let h = -Float::with_val(prec, aux.sum_a(n));
    let h1 = Float::with_val(prec, &b / &s);
    let h2 = (Float::with_val(prec, &sb) - &b) / Float::with_val(prec, s.square_ref());
    let nf = n as u32;
    let nn = Float::with_val(prec, &params.alpha + nf) * nf;
    let slope = Float::with_val(prec, &params.alpha + 2 * nf);
    let den = Float::with_val(prec, &s * &h2) + nf - Float::with_val(prec, &slope * &h1);
    let num = Float::with_val(prec, h1.square_ref()) - &h1;
    let num = num * &s * 2u32;
    let scale = max_abs([&Float::with_val(prec, &s * &h2), &Float::with_val(prec, nf), &Float::with_val(prec, &slope * &h1)]);
    let tiny = Float::with_val(prec, &scale >> (bits / 2));
    let alpha_n = if Float::with_val(prec, den.abs_ref()) <= tiny {
        None
    } else {
        let lin = Float::with_val(prec, &params.alpha + (2 * nf + 1));
        Some(Float::with_val(bits, lin + num / &den))
    };
    let beta_n = nn + Float::with_val(prec, &s * &h1) - &h;
    Ok(SigmaData {
        n,
        s: params.s.clone(),
        h: Float::with_val(bits, h),
        h_prime: Float::with_val(bits, h1),
        h_second: Float::with_val(bits, h2),
        alpha_n,
        beta_n: Float::with_val(bits, beta_n),
    })
}

/// σ-data from the moment route.
pub fn sigma_data(n: usize, params: &EnsembleParams) -> Result<SigmaData> {
    let table = recurrence_coeffs(n, params)?;
    let aux = aux_from_recurrence(&table, n)?;
    sigma_from_aux(n, &aux)
}

fn sigma_terms(sigma: &SigmaData, params: &EnsembleParams) -> [Float; 3] {
    let prec = params.bits() + 32;
    let nf = sigma.n as u32;
    let s = Float::with_val(prec, &sigma.s);
    let h1 = Float::with_val(prec, &sigma.h_prime);
    let lhs = Float::with_val(prec, &s * &sigma.h_second).square();
    let lin = Float::with_val(prec, nf) - Float::with_val(prec, &params.alpha + 2 * nf) * &h1;
    let bracket = Float::with_val(prec, &params.alpha + nf) * nf + Float::with_val(prec, &s * &h1) - &sigma.h;
    let quad = bracket * &h1 * Float::with_val(prec, &h1 - 1u32) * 4u32;
    [lhs, -lin.square(), quad]
}

/// `(sH'')² - [n - (2n+α)H']² + 4[n(n+α) + sH' - H]H'(H' - 1)`.
pub fn sigma_form_value(sigma: &SigmaData, params: &EnsembleParams) -> Float {
    let t = sigma_terms(sigma, params);
    Float::with_val(params.bits(), Float::with_val(t[0].prec(), &t[0] + &t[1]) + &t[2])
}

/// The σ-form residual relative to its largest term.
pub fn sigma_form_residual(sigma: &SigmaData, params: &EnsembleParams) -> f64 {
    balance(&sigma_terms(sigma, params))
}

/// `(a_n, b_n, α_n, β_n)` from `H_{n-1}, H_n, H_{n+1}` alone.
#[derive(Clone, Debug)]
pub struct DiscreteSigma {
    pub a: Float,
    pub b: Float,
    pub alpha_n: Float,
    pub beta_n: Float,
    /// `[ns - n(n+α)δ²H - (2n+α)H]/(2n+α+δ²H)`, which equals `sH' - H`.
    pub shifted_beta: Float,
}

struct DiscreteParts {
    prec: u32,
    d2: Float,
    den: Float,
    nn: Float,
    s: Float,
}

fn discrete_parts(h_nm1: &Float, h_n: &Float, h_np1: &Float, n: usize, params: &EnsembleParams) -> Result<DiscreteParts> {
    let prec = params.bits() + 32;
    let nf = n as u32;
    let d2 = Float::with_val(prec, h_nm1 - h_np1);
    let den = Float::with_val(prec, &params.alpha + 2 * nf) + &d2;
    let scale = max_abs([&Float::with_val(prec, &params.alpha + 2 * nf), &d2]);
    if Float::with_val(prec, den.abs_ref()) <= Float::with_val(prec, &scale >> (prec / 2)) {
        return Err(Error::DivisionByZero("2n+α+δ²H vanishes"));
    }
    let _ = h_n;
    Ok(DiscreteParts {
        prec,
        d2,
        den,
        nn: Float::with_val(prec, &params.alpha + nf) * nf,
        s: Float::with_val(prec, &params.s),
    })
}

/// Quantities recovered from three consecutive `H`'s.
pub fn discrete_sigma_quantities(
    h_nm1: &Float,
    h_n: &Float,
    h_np1: &Float,
    n: usize,
    params: &EnsembleParams,
) -> Result<DiscreteSigma> {
    let p = discrete_parts(h_nm1, h_n, h_np1, n, params)?;
    let prec = p.prec;
    let bits = params.bits();
    let nf = n as u32;
    let ns = Float::with_val(prec, &p.s * nf);
    let b = (Float::with_val(prec, &ns) + Float::with_val(prec, h_n - &p.nn) * &p.d2) / &p.den;
    let a = Float::with_val(prec, h_n - h_np1);
    let alpha_n = Float::with_val(prec, &params.alpha + (2 * nf + 1)) + &a;
    let shifted = (ns - Float::with_val(prec, &p.nn * &p.d2) - Float::with_val(prec, &params.alpha + 2 * nf) * h_n) / &p.den;
    let beta_n = Float::with_val(prec, &p.nn + &shifted);
    Ok(DiscreteSigma {
        a: Float::with_val(bits, a),
        b: Float::with_val(bits, b),
        alpha_n: Float::with_val(bits, alpha_n),
        beta_n: Float::with_val(bits, beta_n),
        shifted_beta: Float::with_val(bits, shifted),
    })
}

/// Relative residual of the discrete σ-form
/// `{[H-n(n+α)]δ²H + ns}{[H-n(n+α)-s]δ²H - (n+α)s}
///  = (2n+α+δ²H){ns + (2n+α)[n(n+α)-H]}(H_n-H_{n+1})(H_{n-1}-H_n)`.
pub fn discrete_sigma_residual(h_nm1: &Float, h_n: &Float, h_np1: &Float, n: usize, params: &EnsembleParams) -> Result<f64> {
    let p = discrete_parts(h_nm1, h_n, h_np1, n, params)?;
    let prec = p.prec;
    let nf = n as u32;
    let ns = Float::with_val(prec, &p.s * nf);
    let shifted_h = Float::with_val(prec, h_n - &p.nn);
    let left1 = Float::with_val(prec, &shifted_h * &p.d2) + &ns;
    let left2 = Float::with_val(prec, &shifted_h - &p.s) * &p.d2 - Float::with_val(prec, &params.alpha + nf) * &p.s;
    let lhs = left1 * left2;
    let inner = Float::with_val(prec, &p.nn - h_n) * Float::with_val(prec, &params.alpha + 2 * nf) + &ns;
    let rhs = Float::with_val(prec, &p.den * &inner) * Float::with_val(prec, h_n - h_np1) * Float::with_val(prec, h_nm1 - h_n);
    Ok(balance(&[lhs, -rhs]))
}

/// σ-form checks for `n ≤ n_max` on the moment route:
///
/// - `sigma-form`: the second-order equation for `H_n`
/// - `b-derivative-quadratic`: `(sb' - b)² = [ns - (2n+α)b]² - 4β(b² - sb)`
/// - `sigma-alpha`, `sigma-beta`: `α_n`, `β_n` from `H, H', H''`
/// - `discrete-sigma` (`n ≥ 1`): the three-term relation in `n`
/// - `discrete-b`, `discrete-alpha`, `discrete-beta`: `b_n`, `α_n`, `β_n` from `H_{n±1}, H_n`
/// - `a-from-derivatives`: `H_n - H_{n+1} = 2s(H'² - H')/(sH'' + n - (2n+α)H')`
/// - `discrete-derivative-beta`: the discrete expression for `sH' - H`
pub fn verify_sigma(n_max: usize, params: &EnsembleParams, tol: f64) -> Result<VerificationReport> {
    let table = recurrence_coeffs(n_max + 1, params)?;
    let aux = aux_from_recurrence(&table, n_max + 1)?;
    sigma_report(&table, &aux, n_max, tol)
}

pub fn sigma_report(table: &RecurrenceTable, aux: &AuxTable, n_max: usize, tol: f64) -> Result<VerificationReport> {
    let params = &table.params;
    let prec = params.bits() + 32;
    let s = Float::with_val(prec, &params.s);
    let mut report = VerificationReport::new("sigma");
    let hs: Vec<Float> = (0..=aux.n_max()).map(|n| -aux.sum_a(n)).collect();
    for n in 0..=n_max {
        let sigma = sigma_from_aux(n, aux)?;
        let r = sigma_form_residual(&sigma, params);
        report.push_value("sigma-form", n, params, &sigma.h, r, tol);

        let nf = n as u32;
        let b = Float::with_val(prec, &aux.b[n]);
        let (_, sb) = riccati_rhs(n, &aux.a[n], &aux.b[n], params)?;
        let quad = Float::with_val(prec, &b * Float::with_val(prec, &b - &s));
        let lin = Float::with_val(prec, &s * nf) - Float::with_val(prec, &params.alpha + 2 * nf) * &b;
        let r = balance(&[
            (Float::with_val(prec, &sb) - &b).square(),
            -lin.square(),
            Float::with_val(prec, &table.beta_n[n] * &quad) * 4u32,
        ]);
        report.push("b-derivative-quadratic", n, params, r, tol);

        if n == 0 {
            continue;
        }
        let r = sigma.alpha_n.as_ref().map_or(f64::INFINITY, |v| rel_diff(v, &table.alpha_n[n]));
        report.push("sigma-alpha", n, params, r, tol);
        report.push_value("sigma-beta", n, params, &sigma.beta_n, rel_diff(&sigma.beta_n, &table.beta_n[n]), tol);

        if n + 1 > aux.n_max() {
            continue;
        }
        let r = discrete_sigma_residual(&hs[n - 1], &hs[n], &hs[n + 1], n, params)?;
        report.push("discrete-sigma", n, params, r, tol);
        let d = discrete_sigma_quantities(&hs[n - 1], &hs[n], &hs[n + 1], n, params)?;
        report.push_value("discrete-b", n, params, &d.b, rel_diff(&d.b, &aux.b[n]), tol);
        report.push("discrete-alpha", n, params, rel_diff(&d.alpha_n, &table.alpha_n[n]), tol);
        report.push("discrete-beta", n, params, rel_diff(&d.beta_n, &table.beta_n[n]), tol);
        let from_derivs = sigma
            .alpha_n
            .as_ref()
            .map(|al| Float::with_val(prec, al - Float::with_val(prec, &params.alpha + (2 * nf + 1))));
        let r = from_derivs.map_or(f64::INFINITY, |v| rel_diff(&v, &d.a));
        report.push("a-from-derivatives", n, params, r, tol);
        let shifted = Float::with_val(prec, &s * &sigma.h_prime) - &sigma.h;
        report.push("discrete-derivative-beta", n, params, rel_diff(&shifted, &d.shifted_beta), tol);
    }
    Ok(report)
}

// ----------------------------------------------------------------------------
// Integral representation of ln D_n

#[derive(Clone, Debug)]
pub struct LogDetIntegral {
    /// Integrand written in `a_n`, `a_n'`.
    pub a_form: Float,
    /// Integrand written in `X_n = t/a_n`, `X_n'`.
    pub x_form: Float,
    /// `t0`: below it the integrand is replaced by its small-s series.
    pub split: f64,
}

/// `(a, t a')` at `t` from the hierarchy, falling back to the moment route.
fn a_and_derivative(n: usize, params: &EnsembleParams) -> Result<(Float, Float)> {
    let aux = match hierarchy_iterate(n, params) {
        Ok(aux) => aux,
        Err(_) => aux_from_recurrence(&recurrence_coeffs(n, params)?, n)?,
    };
    let (sa, _) = riccati_rhs(n, &aux.a[n], &aux.b[n], params)?;
    Ok((aux.a[n].clone(), sa))
}

/// Both integrands at `t`, each already divided by `t`.
fn log_det_integrands(n: usize, t: &Float, params: &EnsembleParams) -> Result<(Float, Float)> {
    let p = params.with_s(t.clone())?;
    let (a, ta) = a_and_derivative(n, &p)?;
    let prec = params.bits() + 32;
    let t = Float::with_val(prec, t);
    let al = Float::with_val(prec, &params.alpha);
    let a = Float::with_val(prec, a);
    let ta = Float::with_val(prec, ta);
    let weight = Float::with_val(prec, &al / 2u32) + n as u32;
    let half_t = Float::with_val(prec, &t / 2u32);

    let ratio = Float::with_val(prec, &ta / &a);
    let a_form = Float::with_val(prec, &half_t)
        - (Float::with_val(prec, &t / &a) - &al).square() / 4u32
        - Float::with_val(prec, &a * &weight)
        - Float::with_val(prec, a.square_ref()) / 4u32
        + (Float::with_val(prec, 1) - &ratio).square() / 4u32;

    // X = t/a, t X' = X - X·(t a'/a).
    let x = Float::with_val(prec, &t / &a);
    let tx1 = Float::with_val(prec, &x - Float::with_val(prec, &x * &ratio));
    let x_form = half_t - Float::with_val(prec, &x - &al).square() / 4u32 - Float::with_val(prec, &weight * &t) / &x
        - Float::with_val(prec, &t / &x).square() / 4u32
        + Float::with_val(prec, &tx1 / &x).square() / 4u32;

    Ok((a_form / &t, x_form / t))
}

/// `ln(D_n(s)/D_n(0))` by quadrature of the two integrand forms over
/// `[t0, s]`, plus the small-s series of `-Σ_{j<n} a_j/t` on `(0, t0)`.
pub fn log_det_integral(n: usize, params: &EnsembleParams, quad_tol: f64) -> Result<LogDetIntegral> {
    let bits = params.bits();
    let s = params.s.to_f64();
    if n == 0 || params.is_laguerre_limit() {
        return Ok(LogDetIntegral {
            a_form: Float::with_val(bits, 0),
            x_form: Float::with_val(bits, 0),
            split: 0.0,
        });
    }
    let alpha = params.alpha.to_f64();
    let work_bits = (((-quad_tol.log2()).ceil() as u32) + 64).clamp(128, bits);
    let (t0, head) = if alpha_is_integer(alpha) {
        // Leading term only: H_n/t → -n/α.
        let t0 = s.min(quad_tol * alpha / (16.0 * n as f64));
        (t0, Float::with_val(work_bits, -(n as f64) * t0 / alpha))
    } else {
        let al = Float::with_val(work_bits, &params.alpha);
        let series: Vec<SmallSSeries> = (0..n).map(|j| SmallSSeries::new(j, &al, SERIES_ORDER)).collect::<Result<_>>()?;
        let mut t0 = s;
        for ser in &series {
            let p = ser
                .start_point(s, quad_tol * 1e-2)
                .ok_or_else(|| Error::SeriesStart(format!("no series split for n = {}", ser.n)))?;
            t0 = t0.min(p);
        }
        let t0f = Float::with_val(work_bits, t0);
        let mut head = Float::with_val(work_bits, 0);
        for ser in &series {
            head -= ser.integral_of_g(&t0f);
        }
        (t0, head)
    };
    let ctx = PrecisionContext::new(work_bits)?;
    let p = params.with_ctx(ctx.clone());
    let (lo, hi) = (Float::with_val(work_bits, t0), Float::with_val(work_bits, s));
    let opts = QuadOptions::with_tol(quad_tol);
    let a_tail = tanh_sinh_with(|t| Ok(log_det_integrands(n, t, &p)?.0), &lo, &hi, &ctx, &opts)?;
    let x_tail = tanh_sinh_with(|t| Ok(log_det_integrands(n, t, &p)?.1), &lo, &hi, &ctx, &opts)?;
    Ok(LogDetIntegral {
        a_form: Float::with_val(bits, a_tail + &head),
        x_form: Float::with_val(bits, x_tail + head),
        split: t0,
    })
}

/// `ln(D_n(s)/D_n(0))` from the determinant route.
pub fn log_det_ratio(n: usize, params: &EnsembleParams) -> Result<Float> {
    if n == 0 || params.is_laguerre_limit() {
        return Ok(Float::with_val(params.bits(), 0));
    }
    Ok(mgf(n, params)?.ln())
}

// ----------------------------------------------------------------------------
// Hamiltonian and τ

/// `H_III` evaluated three ways at `t = √s`.
#[derive(Clone, Debug)]
pub struct HamiltonianForms {
    /// `(1/t)(-2β_n + 2b_n - s + n(n+α))`.
    pub from_coefficients: Float,
    /// `(2/t)H_n - t - n(n+α)/t`.
    pub from_sigma: Float,
    /// The canonical form in `y = t/a_n`, `ζ = -b_n/t`, `θ₀ = α`, `θ_∞ = -α-2n`.
    pub canonical: Float,
}

pub fn hamiltonian_forms(n: usize, table: &RecurrenceTable, aux: &AuxTable) -> Result<HamiltonianForms> {
    let params = &table.params;
    if params.is_laguerre_limit() {
        return Err(Error::Domain("H_III needs s > 0".into()));
    }
    let bits = params.bits();
    let prec = bits + 32;
    let s = Float::with_val(prec, &params.s);
    let t = Float::with_val(prec, s.sqrt_ref());
    let nf = n as u32;
    let nn = Float::with_val(prec, &params.alpha + nf) * nf;
    let b = Float::with_val(prec, &aux.b[n]);
    let beta = Float::with_val(prec, &table.beta_n[n]);
    let h = -Float::with_val(prec, aux.sum_a(n));

    let from_coefficients = (-Float::with_val(prec, &beta * 2u32) + Float::with_val(prec, &b * 2u32) - &s + &nn) / &t;
    let from_sigma = Float::with_val(prec, &h * 2u32) / &t - &t - Float::with_val(prec, &nn / &t);

    if aux.a[n].is_zero() {
        return Err(Error::DivisionByZero("canonical Hamiltonian with a_n = 0"));
    }
    let y = Float::with_val(prec, &t / &aux.a[n]);
    let zeta = -Float::with_val(prec, &b / &t);
    let th0 = Float::with_val(prec, &params.alpha);
    let thi = -Float::with_val(prec, &params.alpha + 2 * nf);
    let y2 = Float::with_val(prec, y.square_ref());
    let quad = Float::with_val(prec, zeta.square_ref()) * &y2 * 2u32;
    let lin = (Float::with_val(prec, &t * &y2) + Float::with_val(prec, &thi * &y) - &t) * &zeta * 2u32;
    let cross = Float::with_val(prec, &th0 + &thi) * &t * &y;
    let constant = (Float::with_val(prec, th0.square_ref()) - Float::with_val(prec, thi.square_ref())) / 4u32;
    let canonical = (quad + lin + cross - Float::with_val(prec, t.square_ref()) - constant) / &t;

    Ok(HamiltonianForms {
        from_coefficients: Float::with_val(bits, from_coefficients),
        from_sigma: Float::with_val(bits, from_sigma),
        canonical: Float::with_val(bits, canonical),
    })
}

/// Hamiltonian and τ checks at one `(n, s)`:
///
/// - `hamiltonian-coefficients-sigma`, `hamiltonian-canonical`: agreement of the three forms
/// - `tau-log-derivative`: finite difference of `ln[D_n e^{-s/2} s^{-n(n+α)/2}]`
///   times `s` against `H_n - s/2 - n(n+α)/2` (tolerance widened to the FD bound)
pub fn tau_relations(n: usize, params: &EnsembleParams, tol: f64) -> Result<VerificationReport> {
    let table = recurrence_coeffs(n, params)?;
    let aux = aux_from_recurrence(&table, n)?;
    let forms = hamiltonian_forms(n, &table, &aux)?;
    let mut report = VerificationReport::new("tau");
    let r = rel_diff(&forms.from_coefficients, &forms.from_sigma);
    report.push_value("hamiltonian-coefficients-sigma", n, params, &forms.from_sigma, r, tol);
    let r = rel_diff(&forms.canonical, &forms.from_sigma);
    report.push_value("hamiltonian-canonical", n, params, &forms.canonical, r, tol);

    let bits = params.bits();
    let prec = bits + 32;
    let nf = n as u32;
    let nn = Float::with_val(prec, &params.alpha + nf) * nf;
    let log_tau = |s: &Float| -> Result<Vec<Float>> {
        let p = params.with_s(s.clone())?;
        let table = recurrence_coeffs(n, &p)?;
        let v = Float::with_val(prec, table.d(n).ln_ref())
            - Float::with_val(prec, s / 2u32)
            - Float::with_val(prec, s.ln_ref()) * &nn / 2u32;
        Ok(vec![Float::with_val(bits, v)])
    };
    let (d1, _) = richardson_derivatives(log_tau, &params.s, bits)?;
    let s = Float::with_val(prec, &params.s);
    let lhs = Float::with_val(prec, &d1[0].value * &s);
    let rhs = -Float::with_val(prec, aux.sum_a(n)) - Float::with_val(prec, &s / 2u32) - nn / 2u32;
    let bound = Float::with_val(prec, &d1[0].bound * &s) / max_abs([&lhs, &rhs]);
    let r = rel_diff(&lhs, &rhs);
    report.push_value("tau-log-derivative", n, params, &lhs, r, tol.max(bound.to_f64()));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::a0_bessel;
    use crate::toda::richardson_derivatives;

    fn p(alpha: f64, s: f64) -> EnsembleParams {
        EnsembleParams::from_f64(alpha, s, 256).unwrap()
    }

    fn q(text: &str, bits: u32) -> Float {
        let ctx = PrecisionContext::new(bits).unwrap();
        let (num, den) = text.split_once('/').unwrap_or((text, "1"));
        ctx.parse(num).unwrap() / ctx.parse(den).unwrap()
    }

    #[test]
    fn bessel_ratio_solves_p3_at_n0() {
        for &alpha in &[0.5, 1.3] {
            for &s in &[0.1, 1.0, 10.0] {
                let params = p(alpha, s);
                let (d1, d2) = richardson_derivatives(|s| Ok(vec![a0_bessel(&params.with_s(s.clone())?)?]), &params.s, 256).unwrap();
                let state = PainleveState {
                    n: 0,
                    s: params.s.clone(),
                    a: a0_bessel(&params).unwrap(),
                    a_prime: d1[0].value.clone(),
                };
                let r = p3_residual(&state, &d2[0].value, &params).unwrap();
                assert!(r < 1e-12, "α = {alpha}, s = {s}: {r:e}");
                let (x, x1, x2) = x_from_a(&state, &d2[0].value, &params);
                let r = x_form_residual(0, &params.s, &x, &x1, &x2, &params).unwrap();
                assert!(r < 1e-12, "X form α = {alpha}, s = {s}: {r:e}");
            }
        }
    }

    #[test]
    fn half_integer_closed_form_solves_p3() {
        // a = 2s/(1+2√s): a' and a'' in closed form.
        let params = p(0.5, 2.0);
        let bits = 256;
        let s = Float::with_val(bits, 2);
        let r = Float::with_val(bits, s.sqrt_ref());
        let d = Float::with_val(bits, &r * 2u32) + 1u32;
        let a = Float::with_val(bits, &s * 2u32) / &d;
        // a = 2r²/(1+2r), da/dr = (4r + 4r²)/(1+2r)², dr/ds = 1/(2r).
        let dadr = (Float::with_val(bits, &r * 4u32) + Float::with_val(bits, r.square_ref()) * 4u32) / Float::with_val(bits, d.square_ref());
        let ap = Float::with_val(bits, &dadr / &r) / 2u32;
        // d²a/dr² = 4/(1+2r)³.
        let d2adr2 = Float::with_val(bits, 4) / (Float::with_val(bits, d.square_ref()) * &d);
        let app = (d2adr2 - Float::with_val(bits, &dadr / &r)) / Float::with_val(bits, r.square_ref()) / 4u32;
        let state = PainleveState { n: 0, s, a, a_prime: ap };
        assert!(p3_residual(&state, &app, &params).unwrap() < 1e-60);
        let rhs = p3_rhs(&state, &params).unwrap();
        assert!(rel_diff(&rhs, &app) < 1e-60);
    }

    #[test]
    fn p3_rejects_singular_states() {
        let params = p(0.5, 1.0);
        let state = PainleveState {
            n: 0,
            s: Float::with_val(256, 1),
            a: Float::with_val(256, 0),
            a_prime: Float::with_val(256, 1),
        };
        assert!(matches!(p3_rhs(&state, &params), Err(Error::Singular(_))));
    }

    #[test]
    fn quartic_root_is_positive_and_accurate() {
        for &(n, alpha, s) in &[(0, 0.5, 1.0), (3, 1.3, 0.2), (5, 2.0, 40.0)] {
            let r = quartic_root(n, &p(alpha, s)).unwrap();
            assert!(r.x > 0);
            assert!(r.residual < 1e-60, "{r:?}");
        }
    }

    #[test]
    fn series_leading_terms() {
        let half = Float::with_val(256, 0.5);
        let ser = SmallSSeries::new(0, &half, 6.0).unwrap();
        // a_0 = 2s/(1+2√s) = 2s - 4s^{3/2} + 8s² - …
        let coeff = |e: f64| -> f64 {
            ser.terms
                .iter()
                .filter(|t| (t.exponent.to_f64() - e).abs() < 1e-12)
                .map(|t| t.coeff.to_f64())
                .sum()
        };
        assert_eq!(coeff(0.0), 2.0);
        assert_eq!(coeff(0.5), -4.0);
        assert!((coeff(1.0) - 8.0).abs() < 1e-60);
        assert!((coeff(1.5) + 16.0).abs() < 1e-60);
        let s = Float::with_val(256, 1e-4);
        let (a, ap, _) = ser.eval(&s);
        let r = Float::with_val(256, s.sqrt_ref());
        let want = Float::with_val(256, &s * 2u32) / (r * 2u32 + 1u32);
        assert!(rel_diff(&a, &want) < 1e-20);
        assert!(ap > 0);
        assert!(SmallSSeries::new(1, &Float::with_val(64, 2), 6.0).is_err());
    }

    #[test]
    fn series_matches_hierarchy_at_small_s() {
        for &(n, alpha) in &[(1, 0.5), (2, 1.3), (4, 0.3), (5, 1.7)] {
            let params = p(alpha, 1e-3);
            let ser = SmallSSeries::new(n, &params.alpha, SERIES_ORDER).unwrap();
            let (a, _, tail) = ser.eval(&params.s);
            let aux = hierarchy_iterate(n, &params).unwrap();
            let r = rel_diff(&a, &aux.a[n]);
            let bound = (tail / &a).to_f64() * 10.0;
            assert!(r < bound.max(1e-60) && bound < 1e-15, "n = {n}, α = {alpha}: {r:e} vs {bound:e}");
        }
    }

    #[test]
    fn ode_reaches_hand_values() {
        let sol = p3_solve(0, &p(0.5, 4.0), 4.0, 1e-12).unwrap();
        assert!((sol.state.a.to_f64() - 1.6).abs() < 1e-10);
        let sol = p3_solve(1, &p(0.5, 1.0), 1.0, 1e-12).unwrap();
        assert!((sol.state.a.to_f64() - 52.0 / 93.0).abs() < 1e-10 * 52.0 / 93.0);
        assert!(matches!(sol.start, StartKind::Series { .. }));
    }

    #[test]
    fn ode_with_integer_alpha_starts_from_the_hierarchy() {
        let params = p(2.0, 1.0);
        let sol = p3_solve(2, &params, 1.0, 1e-12).unwrap();
        assert!(matches!(sol.start, StartKind::Hierarchy { .. }));
        let want = hierarchy_iterate(2, &params).unwrap().a[2].to_f64();
        assert!(((sol.state.a.to_f64() - want) / want).abs() < 1e-10);
    }

    #[test]
    fn hand_sigma_values() {
        let params = p(0.5, 1.0);
        let sig = sigma_data(1, &params).unwrap();
        assert!(rel_diff(&sig.h, &q("-2/3", 256)) < 1e-60);
        assert!(rel_diff(&sig.h_prime, &q("-4/9", 256)) < 1e-60);
        assert!(rel_diff(&sig.h_second, &q("5/27", 256)) < 1e-60);
        assert!(rel_diff(&sig.beta_n, &q("31/18", 256)) < 1e-60);
        let al = sig.alpha_n.clone().unwrap();
        assert!(rel_diff(&al, &(q("7/2", 256) + q("52/93", 256))) < 1e-60);
        let t = sigma_terms(&sig, &params);
        assert!(rel_diff(&t[0], &q("25/729", 256)) < 1e-60);
        assert!(sigma_form_residual(&sig, &params) < 1e-60);
        let sig0 = sigma_data(0, &params).unwrap();
        assert!(sig0.h.is_zero() && sig0.alpha_n.is_none());
        assert_eq!(sigma_form_value(&sig0, &params), 0);
    }

    #[test]
    fn hand_discrete_sigma() {
        let params = p(0.5, 1.0);
        let h0 = Float::with_val(256, 0);
        let h1 = q("-2/3", 256);
        let h2 = Float::with_val(256, &h1 - q("52/93", 256));
        assert!(discrete_sigma_residual(&h0, &h1, &h2, 1, &params).unwrap() < 1e-20);
        let d = discrete_sigma_quantities(&h0, &h1, &h2, 1, &params).unwrap();
        assert!(rel_diff(&d.b, &q("-4/9", 256)) < 1e-60);
        assert!(rel_diff(&d.beta_n, &q("31/18", 256)) < 1e-60);
        assert!(rel_diff(&d.alpha_n, &(q("7/2", 256) + q("52/93", 256))) < 1e-60);
    }

    #[test]
    fn sigma_suite_passes() {
        for &alpha in &[1.3, 0.3] {
            for &s in &[0.3, 2.0, 7.0] {
                let r = verify_sigma(8, &p(alpha, s), 1e-12).unwrap();
                for f in r.failures() {
                    panic!("{f:?}");
                }
            }
        }
    }

    #[test]
    fn log_det_integral_hand_value() {
        let params = p(0.5, 1.0);
        let v = log_det_integral(1, &params, 1e-10).unwrap();
        // D_1(1)/D_1(0) = 3e^{-2}.
        let want = (3.0f64).ln() - 2.0;
        assert!((v.a_form.to_f64() - want).abs() < 1e-9, "{v:?}");
        assert!((v.x_form.to_f64() - want).abs() < 1e-9, "{v:?}");
        let z = log_det_integral(0, &params, 1e-10).unwrap();
        assert!(z.a_form.is_zero());
    }

    #[test]
    fn log_det_integral_forms_agree() {
        let params = p(1.3, 2.0);
        let v = log_det_integral(2, &params, 1e-10).unwrap();
        let want = log_det_ratio(2, &params).unwrap();
        assert!(rel_diff(&v.a_form, &v.x_form) < 1e-9);
        assert!((v.a_form.to_f64() - want.to_f64()).abs() < 1e-8);
    }

    #[test]
    fn hamiltonian_hand_values() {
        let params = p(0.5, 1.0);
        let table = recurrence_coeffs(1, &params).unwrap();
        let aux = aux_from_recurrence(&table, 1).unwrap();
        let f = hamiltonian_forms(1, &table, &aux).unwrap();
        let want = q("-23/6", 256);
        assert!(rel_diff(&f.from_coefficients, &want) < 1e-60);
        assert!(rel_diff(&f.from_sigma, &want) < 1e-60);
        assert!(rel_diff(&f.canonical, &want) < 1e-60);
        let f0 = hamiltonian_forms(0, &table, &aux).unwrap();
        assert!(rel_diff(&f0.from_sigma, &q("-1", 256)) < 1e-60);
        assert!(rel_diff(&f0.from_coefficients, &f0.from_sigma) < 1e-60);
    }

    #[test]
    fn tau_suite_passes() {
        let r = tau_relations(2, &p(1.3, 2.0), 1e-12).unwrap();
        for f in r.failures() {
            panic!("{f:?}");
        }
    }
}
