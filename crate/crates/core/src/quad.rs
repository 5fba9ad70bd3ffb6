//! Double-exponential quadrature at arbitrary precision.
//!
//! Two rules are provided. [`tanh_sinh`] maps a finite interval onto the real
//! line with `x = tanh(π/2·sinh t)`, which makes endpoint singularities decay
//! double-exponentially. [`trapezoid_line`] and [`trapezoid_half_line_even`]
//! are the bare trapezoidal rule for integrands that already decay
//! double-exponentially (after a change of variables done by the caller);
//! for those the trapezoidal rule is itself the double-exponential rule.
//!
//! All rules halve the step until two successive levels agree to the
//! requested relative tolerance.

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;

const GUARD_BITS: u32 = 24;
const MAX_LEVEL: u32 = 11;
/// Outermost abscissa in the tanh-sinh variable. At t = 7 the node sits
/// within exp(-π/2·e^7) ≈ 2^-2500 of the endpoint.
const TANH_SINH_T_MAX: f64 = 7.0;

/// Relative tolerance and level cap shared by the rules.
#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub tol: Float,
    pub max_level: u32,
}

impl QuadOptions {
    pub fn from_ctx(ctx: &PrecisionContext) -> Self {
        Self {
            tol: ctx.quad_tol().clone(),
            max_level: MAX_LEVEL,
        }
    }

    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol: Float::with_val(64, tol),
            max_level: MAX_LEVEL,
        }
    }
}

fn converged(prev: &Float, cur: &Float, tol: &Float) -> (bool, f64) {
    let diff = Float::with_val(cur.prec(), cur - prev).abs();
    let scale = Float::with_val(cur.prec(), cur.abs_ref());
    let rel = if scale.is_zero() {
        diff.to_f64()
    } else {
        Float::with_val(cur.prec(), &diff / &scale).to_f64()
    };
    let ok = if scale.is_zero() {
        diff.is_zero()
    } else {
        diff <= Float::with_val(cur.prec(), &scale * tol)
    };
    (ok, rel)
}

/// Term-size cutoff when walking outward along the nodes.
fn negligible(term: &Float, sum: &Float, tol: &Float) -> bool {
    let bound = Float::with_val(sum.prec(), sum.abs_ref()) * tol / 256u32;
    Float::with_val(term.prec(), term.abs_ref()) <= bound
}

/// `∫_a^b f(x) dx` by tanh-sinh quadrature at the context tolerance.
pub fn tanh_sinh<F>(f: F, a: &Float, b: &Float, ctx: &PrecisionContext) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    tanh_sinh_with(f, a, b, ctx, &QuadOptions::from_ctx(ctx))
}

pub fn tanh_sinh_with<F>(
    mut f: F,
    a: &Float,
    b: &Float,
    ctx: &PrecisionContext,
    opts: &QuadOptions,
) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let prec = ctx.bits() + GUARD_BITS;
    if a == b {
        return Ok(ctx.zero());
    }
    if a > b {
        let v = tanh_sinh_with(f, b, a, ctx, opts)?;
        return Ok(-v);
    }
    let half = Float::with_val(prec, b - a) / 2u32;
    let mid = Float::with_val(prec, a + b) / 2u32;
    let half_pi = Float::with_val(prec, rug::float::Constant::Pi) / 2u32;

    // Node at t: abscissa and weight dx/dt, with the endpoint offset computed
    // directly so nodes hugging the endpoint keep full relative accuracy.
    let node = |t: &Float| -> Result<Option<(Float, Float)>> {
        let u = Float::with_val(prec, t.sinh_ref()) * &half_pi;
        let abs_u = Float::with_val(prec, u.abs_ref());
        let e2u = Float::with_val(prec, &abs_u * 2u32).exp();
        // 1 - tanh|u| = 2 / (e^{2|u|} + 1)
        let offset = Float::with_val(prec, &e2u + 1u32).recip() * 2u32 * &half;
        let x = if u.is_sign_negative() {
            Float::with_val(prec, a + &offset)
        } else {
            Float::with_val(prec, b - &offset)
        };
        if x <= *a || x >= *b || offset.is_zero() {
            return Ok(None);
        }
        // cosh^2(u) = (e^{2|u|} + 2 + e^{-2|u|}) / 4
        let cosh2 = (Float::with_val(prec, &e2u + 2u32) + Float::with_val(prec, e2u.recip_ref())) / 4u32;
        let w = Float::with_val(prec, t.cosh_ref()) * &half_pi * &half / cosh2;
        Ok(Some((x, w)))
    };

    let mut sum = Float::with_val(prec, f(&mid)? * &half_pi * &half);
    let mut h = Float::with_val(prec, 1);
    let mut estimate = Float::with_val(prec, &sum * &h);
    let t_max = Float::with_val(prec, TANH_SINH_T_MAX);
    let mut last_change = f64::INFINITY;

    for level in 0..=opts.max_level {
        // Level 0 visits every multiple of h = 1; later levels only the odd
        // multiples of the halved step.
        let (start, stride) = if level == 0 { (1u32, 1u32) } else { (1u32, 2u32) };
        let mut k = start;
        loop {
            let t = Float::with_val(prec, &h * k);
            if t > t_max {
                break;
            }
            let mut level_term = Float::with_val(prec, 0);
            let mut any = false;
            for sign in [1i32, -1] {
                let ts = Float::with_val(prec, &t * sign);
                if let Some((x, w)) = node(&ts)? {
                    let fx = f(&Float::with_val(ctx.bits(), &x))?;
                    level_term += Float::with_val(prec, &fx * &w);
                    any = true;
                }
            }
            sum += &level_term;
            if !any || (t > 2u32 && negligible(&Float::with_val(prec, &level_term * &h), &estimate, &opts.tol)) {
                break;
            }
            k += stride;
        }
        let new_estimate = Float::with_val(prec, &sum * &h);
        if level > 0 {
            let (ok, rel) = converged(&estimate, &new_estimate, &opts.tol);
            last_change = rel;
            if ok && level >= 2 {
                return Ok(Float::with_val(ctx.bits(), new_estimate));
            }
        }
        estimate = new_estimate;
        h /= 2u32;
    }
    Err(Error::Quadrature {
        target: opts.tol.to_f64(),
        levels: opts.max_level,
        last_change,
    })
}

/// `∫_{-∞}^{∞} g(u) du` for `g` with double-exponential decay in both
/// directions, walking outward from `center` (ideally near the peak).
pub fn trapezoid_line<F>(mut g: F, center: &Float, ctx: &PrecisionContext, opts: &QuadOptions) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let prec = ctx.bits() + GUARD_BITS;
    let mut h = Float::with_val(prec, 0.5);
    let mut sum = Float::with_val(prec, g(center)?);
    let mut estimate = Float::with_val(prec, &sum * &h);
    let mut last_change = f64::INFINITY;
    for level in 0..=opts.max_level {
        let stride = if level == 0 { 1u32 } else { 2 };
        for sign in [1i32, -1] {
            let mut k = 1u32;
            let mut prev_abs: Option<Float> = None;
            loop {
                let u = Float::with_val(prec, &h * k) * sign + center;
                let term = g(&Float::with_val(ctx.bits(), &u))?;
                let term = Float::with_val(prec, term);
                let abs = Float::with_val(prec, term.abs_ref());
                sum += &term;
                let decreasing = prev_abs.as_ref().is_some_and(|p| abs <= *p);
                if decreasing && negligible(&Float::with_val(prec, &term * &h), &estimate, &opts.tol) {
                    break;
                }
                if k > 1 << 22 {
                    return Err(Error::Quadrature {
                        target: opts.tol.to_f64(),
                        levels: level,
                        last_change,
                    });
                }
                prev_abs = Some(abs);
                k += stride;
            }
        }
        let new_estimate = Float::with_val(prec, &sum * &h);
        if level > 0 {
            let (ok, rel) = converged(&estimate, &new_estimate, &opts.tol);
            last_change = rel;
            if ok && level >= 2 {
                return Ok(Float::with_val(ctx.bits(), new_estimate));
            }
        }
        estimate = new_estimate;
        h /= 2u32;
    }
    Err(Error::Quadrature {
        target: opts.tol.to_f64(),
        levels: opts.max_level,
        last_change,
    })
}

/// `∫_0^∞ g(t) dt` for an even `g` with double-exponential decay: the
/// trapezoidal rule on the symmetric line, folded.
pub fn trapezoid_half_line_even<F>(mut g: F, ctx: &PrecisionContext, opts: &QuadOptions) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let prec = ctx.bits() + GUARD_BITS;
    let mut h = Float::with_val(prec, 0.5);
    let zero = Float::with_val(ctx.bits(), 0);
    let mut sum = Float::with_val(prec, g(&zero)?) / 2u32;
    let mut estimate = Float::with_val(prec, &sum * &h);
    let mut last_change = f64::INFINITY;
    for level in 0..=opts.max_level {
        let stride = if level == 0 { 1u32 } else { 2 };
        let mut k = 1u32;
        let mut prev_abs: Option<Float> = None;
        loop {
            let t = Float::with_val(ctx.bits(), &h * k);
            let term = Float::with_val(prec, g(&t)?);
            let abs = Float::with_val(prec, term.abs_ref());
            sum += &term;
            let decreasing = prev_abs.as_ref().is_some_and(|p| abs <= *p);
            if decreasing && negligible(&Float::with_val(prec, &term * &h), &estimate, &opts.tol) {
                break;
            }
            if k > 1 << 22 {
                return Err(Error::Quadrature {
                    target: opts.tol.to_f64(),
                    levels: level,
                    last_change,
                });
            }
            prev_abs = Some(abs);
            k += stride;
        }
        let new_estimate = Float::with_val(prec, &sum * &h);
        if level > 0 {
            let (ok, rel) = converged(&estimate, &new_estimate, &opts.tol);
            last_change = rel;
            if ok && level >= 2 {
                return Ok(Float::with_val(ctx.bits(), new_estimate));
            }
        }
        estimate = new_estimate;
        h /= 2u32;
    }
    Err(Error::Quadrature {
        target: opts.tol.to_f64(),
        levels: opts.max_level,
        last_change,
    })
}
