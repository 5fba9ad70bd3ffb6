//! MacDonald functions, log-gamma and the Laguerre Hankel product.
//!
//! `K_ν(x)` is evaluated from `∫₀^∞ e^{-x cosh t} cosh(νt) dt` for the two
//! base orders in `[0, 2)`; higher orders come from the upward recurrence
//! `K_{ν+1} = K_{ν-1} + (2ν/x) K_ν`, which is the stable direction for `K`.

use std::sync::{Mutex, OnceLock};

use rug::ops::Pow;
use rug::{Complete, Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;
use crate::quad::{trapezoid_half_line_even, QuadOptions};

/// A computed `K_ν(x)` together with its (normalized, non-negative) order.
#[derive(Clone, Debug)]
pub struct BesselKValue {
    pub nu: Float,
    pub x: Float,
    pub value: Float,
}

fn check_arg(x: &Float) -> Result<()> {
    if x.is_nan() || *x <= 0 {
        return Err(Error::Domain(format!("Bessel K needs x > 0, got {}", x.to_f64())));
    }
    Ok(())
}

/// Quadrature evaluation for a single order (no recurrence).
fn bessel_k_integral(nu: &Float, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    let prec = ctx.bits() + 16;
    let opts = QuadOptions::from_ctx(ctx);
    trapezoid_half_line_even(
        |t| {
            let ch = Float::with_val(prec, t.cosh_ref());
            let e = Float::with_val(prec, -(ch * x)).exp();
            let c = Float::with_val(prec, nu * t).cosh();
            Ok(e * c)
        },
        ctx,
        &opts,
    )
}

/// `K_ν(x)` for real `ν` (`K_{-ν} = K_ν`) and `x > 0`.
pub fn bessel_k(nu: &Float, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    check_arg(x)?;
    let nu = Float::with_val(ctx.bits(), nu.abs_ref());
    if nu < 2 {
        return bessel_k_integral(&nu, x, ctx);
    }
    let ladder = bessel_k_ladder(&nu, 1, x, ctx)?;
    Ok(ladder.into_iter().next().expect("ladder has one entry"))
}

pub fn bessel_k_value(nu: &Float, x: &Float, ctx: &PrecisionContext) -> Result<BesselKValue> {
    let value = bessel_k(nu, x, ctx)?;
    Ok(BesselKValue {
        nu: Float::with_val(ctx.bits(), nu.abs_ref()),
        x: x.clone(),
        value,
    })
}

/// `[K_ν(x), K_{ν+1}(x), …]` with `count` entries, from two quadratures at
/// the fractional base order and the upward recurrence.
pub fn bessel_k_ladder(nu_start: &Float, count: usize, x: &Float, ctx: &PrecisionContext) -> Result<Vec<Float>> {
    check_arg(x)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let prec = ctx.bits() + 16;
    let nu_start = Float::with_val(prec, nu_start.abs_ref());
    let whole = Float::with_val(prec, nu_start.floor_ref());
    let base = Float::with_val(prec, &nu_start - &whole);
    let skip = whole.to_f64() as usize;
    let total = skip + count;

    let mut out = Vec::with_capacity(total.max(2));
    let work = ctx.widened(16);
    out.push(bessel_k_integral(&base, x, &work)?);
    if total > 1 {
        let base1 = Float::with_val(prec, &base + 1u32);
        out.push(bessel_k_integral(&base1, x, &work)?);
    }
    let two_over_x = Float::with_val(prec, 2u32 / Float::with_val(prec, x));
    while out.len() < total {
        let k = out.len();
        let nu = Float::with_val(prec, &base + (k as u32 - 1));
        let next = Float::with_val(prec, &two_over_x * &nu) * &out[k - 1] + &out[k - 2];
        out.push(next);
    }
    Ok(out
        .into_iter()
        .skip(skip)
        .take(count)
        .map(|v| Float::with_val(ctx.bits(), v))
        .collect())
}

/// Closed form for half-integer order:
/// `K_{p+1/2}(x) = √(π/2x) e^{-x} Σ_{k=0}^{p} (p+k)! / (k!(p-k)!(2x)^k)`.
pub fn bessel_k_halfint(p: u32, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    check_arg(x)?;
    let prec = ctx.bits() + 16;
    let two_x = Float::with_val(prec, x * 2u32);
    let mut sum = Float::with_val(prec, 0);
    let mut power = Float::with_val(prec, 1);
    for k in 0..=p {
        let num = Integer::factorial(p + k).complete();
        let den = Integer::from(Integer::factorial(k)) * Integer::from(Integer::factorial(p - k));
        let coeff = Float::with_val(prec, Rational::from((num, den)));
        sum += coeff / &power;
        power *= &two_x;
    }
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let prefactor = (pi / &two_x).sqrt() * Float::with_val(prec, -x).exp();
    Ok(Float::with_val(ctx.bits(), prefactor * sum))
}

fn bernoulli_cache() -> &'static Mutex<Vec<Rational>> {
    static CACHE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(vec![Rational::from(1)]))
}

/// `B_m` from `Σ_{j=0}^{m} C(m+1, j) B_j = 0`, cached across calls.
fn bernoulli(m: usize) -> Rational {
    let mut cache = bernoulli_cache().lock().expect("bernoulli cache poisoned");
    while cache.len() <= m {
        let k = cache.len();
        let mut acc = Rational::new();
        for (j, b) in cache.iter().enumerate() {
            let binom = Integer::from(Integer::binomial_u(k as u32 + 1, j as u32));
            acc += Rational::from(binom) * b;
        }
        let next = -acc / Rational::from(k as u32 + 1);
        cache.push(next);
    }
    cache[m].clone()
}

/// `ln Γ(x)` for `x > 0` via the Stirling series after shifting the argument
/// up to about `bits/2`.
pub fn ln_gamma(x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if x.is_nan() || *x <= 0 {
        return Err(Error::Domain(format!("ln_gamma needs x > 0, got {}", x.to_f64())));
    }
    let prec = ctx.bits() + 32;
    let threshold = f64::from((ctx.bits() / 2).max(24));
    let mut z = Float::with_val(prec, x);
    let mut shift_product = Float::with_val(prec, 1);
    while z < threshold {
        shift_product *= &z;
        z += 1u32;
    }
    let half_ln_two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let half_ln_two_pi = half_ln_two_pi.ln() / 2u32;
    let ln_z = Float::with_val(prec, z.ln_ref());
    let mut sum = Float::with_val(prec, &z - 0.5f64) * &ln_z - &z + half_ln_two_pi;

    let z_sq = Float::with_val(prec, z.square_ref());
    let mut z_pow = z.clone();
    let cutoff = Float::with_val(64, 2).pow(-(prec as i32) - 8);
    let mut prev_abs: Option<Float> = None;
    for k in 1..400usize {
        let b = bernoulli(2 * k);
        let denom = Integer::from(2 * k) * Integer::from(2 * k - 1);
        let coeff = Float::with_val(prec, b / Rational::from(denom));
        let term = coeff / &z_pow;
        let abs = Float::with_val(prec, term.abs_ref());
        if let Some(p) = &prev_abs {
            if abs > *p {
                break;
            }
        }
        sum += &term;
        if abs <= Float::with_val(prec, sum.abs_ref()) * &cutoff {
            break;
        }
        prev_abs = Some(abs);
        z_pow *= &z_sq;
    }
    sum -= shift_product.ln();
    Ok(Float::with_val(ctx.bits(), sum))
}

/// `Γ(x)` for real `x` away from the poles.
pub fn gamma(x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if x.is_nan() || (*x <= 0 && x.is_integer()) {
        return Err(Error::Domain(format!("gamma has a pole at {}", x.to_f64())));
    }
    let prec = ctx.bits() + 32;
    let mut z = Float::with_val(prec, x);
    let mut divisor = Float::with_val(prec, 1);
    while z <= 0 {
        divisor *= &z;
        z += 1u32;
    }
    let wide = PrecisionContext::new(prec)?;
    let value = ln_gamma(&z, &wide)?.exp() / divisor;
    Ok(Float::with_val(ctx.bits(), value))
}

/// `D_n(0) = Π_{j=0}^{n-1} j!·Γ(α+1+j)`, the Barnes-G product for the
/// undeformed Laguerre weight, via summed log-gamma.
pub fn laguerre_hankel_d0(n: usize, alpha: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if n == 0 {
        return Ok(ctx.one());
    }
    if *alpha <= 0 {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let prec = ctx.bits() + 32;
    let wide = PrecisionContext::new(prec)?;
    let mut log_sum = Float::with_val(prec, 0);
    for j in 0..n {
        if j >= 2 {
            log_sum += ln_gamma(&Float::with_val(prec, j + 1), &wide)?;
        }
        log_sum += ln_gamma(&Float::with_val(prec, alpha + (j as u32 + 1)), &wide)?;
    }
    Ok(Float::with_val(ctx.bits(), log_sum.exp()))
}
