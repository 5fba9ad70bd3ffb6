//! Working-precision context shared by every high-precision routine.

use rug::float::Round;
use rug::ops::Pow;
use rug::{Assign, Float};

use crate::error::{Error, Result};

pub const DEFAULT_BITS: u32 = 256;
pub const MIN_BITS: u32 = 64;

/// Binary working precision plus the relative target handed to quadratures.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionContext {
    bits: u32,
    quad_tol: Float,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::new(DEFAULT_BITS).expect("default precision is valid")
    }
}

impl PrecisionContext {
    /// `quad_tol` defaults to `2^-(bits-16)`.
    pub fn new(bits: u32) -> Result<Self> {
        if bits < MIN_BITS {
            return Err(Error::Domain(format!(
                "precision of {bits} bits is below the minimum of {MIN_BITS}"
            )));
        }
        let quad_tol = pow2(-(i64::from(bits) - 16));
        Ok(Self { bits, quad_tol })
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Domain(format!("quadrature tolerance {tol} must be positive")));
        }
        self.quad_tol = Float::with_val(64, tol);
        Ok(self)
    }

    /// Extra guard bits for intermediate work, keeping the quadrature target.
    pub fn widened(&self, extra: u32) -> Self {
        Self {
            bits: self.bits + extra,
            quad_tol: self.quad_tol.clone(),
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn quad_tol(&self) -> &Float {
        &self.quad_tol
    }

    /// The same context at twice the precision (quadrature target rescaled).
    pub fn doubled(&self) -> Self {
        Self::new(self.bits * 2).expect("doubling keeps precision valid")
    }

    /// Allocates a value at the working precision.
    pub fn real<T>(&self, value: T) -> Float
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits, value)
    }

    pub fn zero(&self) -> Float {
        Float::new(self.bits)
    }

    pub fn one(&self) -> Float {
        self.real(1)
    }

    pub fn pi(&self) -> Float {
        self.real(rug::float::Constant::Pi)
    }

    /// `2^-e` for the working epsilon family of tolerances.
    pub fn eps_pow(&self, e: i64) -> Float {
        pow2(-e)
    }

    /// Parses a decimal literal at the working precision.
    pub fn parse(&self, text: &str) -> Result<Float> {
        let parsed = Float::parse(text.trim())
            .map_err(|e| Error::Domain(format!("cannot parse '{text}' as a real: {e}")))?;
        Ok(Float::with_val_round(self.bits, parsed, Round::Nearest).0)
    }
}

/// Runs `f` at `ctx`; on a precision failure, retries once at twice the bits.
pub fn with_escalation<T, F>(ctx: &PrecisionContext, mut f: F) -> Result<T>
where
    F: FnMut(&PrecisionContext) -> Result<T>,
{
    match f(ctx) {
        Err(e) if e.is_precision_failure() => f(&ctx.doubled()),
        other => other,
    }
}

fn pow2(e: i64) -> Float {
    let two = Float::with_val(64, 2);
    two.pow(e as i32)
}

/// Relative difference `|x - y| / max(|x|, |y|)`, 0 when both vanish.
pub fn rel_diff(x: &Float, y: &Float) -> f64 {
    let prec = x.prec().max(y.prec());
    let scale = max_abs([x, y]);
    if scale.is_zero() {
        return 0.0;
    }
    let diff = Float::with_val(prec, x - y).abs();
    (diff / scale).to_f64()
}

/// `|residual| / scale`, 0 when both vanish.
pub fn rel_to(residual: &Float, scale: &Float) -> f64 {
    if scale.is_zero() {
        return if residual.is_zero() { 0.0 } else { f64::INFINITY };
    }
    (Float::with_val(residual.prec(), residual.abs_ref()) / scale).to_f64().abs()
}

/// Largest magnitude among `values`, at the precision of the first one.
pub fn max_abs<'a, I: IntoIterator<Item = &'a Float>>(values: I) -> Float {
    let mut out: Option<Float> = None;
    for v in values {
        let a = Float::with_val(v.prec(), v.abs_ref());
        out = Some(match out {
            None => a,
            Some(m) => {
                if a > m {
                    a
                } else {
                    m
                }
            }
        });
    }
    out.unwrap_or_else(|| Float::new(64))
}
