//! Gragg–Bulirsch–Stoer extrapolation at arbitrary precision.
//!
//! Each step runs the modified midpoint rule with `2, 4, 6, …` substeps and
//! extrapolates to zero substep size; the step is accepted once two
//! successive diagonal entries agree to the tolerance.

use rug::Float;

use crate::error::{Error, Result};

const MAX_COLUMNS: usize = 16;

#[derive(Clone, Debug)]
pub struct OdeOptions {
    /// Mixed absolute/relative tolerance per accepted step.
    pub tol: f64,
    pub bits: u32,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn new(tol: f64, bits: u32) -> Self {
        Self {
            tol,
            bits,
            max_steps: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn midpoint<const N: usize, F>(f: &mut F, x: &Float, y: &[Float; N], h: &Float, steps: u32, bits: u32, stats: &mut OdeStats) -> Result<[Float; N]>
where
    F: FnMut(&Float, &[Float; N]) -> Result<[Float; N]>,
{
    let sub = Float::with_val(bits, h / steps);
    let two_sub = Float::with_val(bits, &sub * 2u32);
    let mut prev = y.clone();
    let d = f(x, y)?;
    let mut cur: [Float; N] = std::array::from_fn(|i| Float::with_val(bits, &d[i] * &sub) + &y[i]);
    stats.evaluations += 1;
    for m in 1..steps {
        let xm = Float::with_val(bits, &sub * m) + x;
        let d = f(&xm, &cur)?;
        stats.evaluations += 1;
        let next: [Float; N] = std::array::from_fn(|i| Float::with_val(bits, &d[i] * &two_sub) + &prev[i]);
        prev = std::mem::replace(&mut cur, next);
    }
    let xe = Float::with_val(bits, x + h);
    let d = f(&xe, &cur)?;
    stats.evaluations += 1;
    Ok(std::array::from_fn(|i| {
        let v = Float::with_val(bits, &d[i] * &sub) + &prev[i] + &cur[i];
        v / 2u32
    }))
}

/// Integrates `y' = f(x, y)` from `x0` to `x1`.
pub fn bulirsch_stoer<const N: usize, F>(mut f: F, x0: &Float, y0: [Float; N], x1: &Float, opts: &OdeOptions) -> Result<([Float; N], OdeStats)>
where
    F: FnMut(&Float, &[Float; N]) -> Result<[Float; N]>,
{
    let bits = opts.bits;
    let mut stats = OdeStats::default();
    let span = Float::with_val(bits, x1 - x0);
    if span.is_zero() {
        return Ok((y0, stats));
    }
    let forward = span.is_sign_positive();
    let mut x = Float::with_val(bits, x0);
    let mut y = y0;
    let mut h = Float::with_val(bits, &span / 8u32);
    let tol = Float::with_val(bits, opts.tol);
    let min_step = Float::with_val(bits, span.abs_ref()) >> (bits / 2);
    loop {
        let remaining = Float::with_val(bits, x1 - &x);
        if remaining.is_zero() || (remaining.is_sign_positive() != forward) {
            break;
        }
        if Float::with_val(bits, h.abs_ref()) >= Float::with_val(bits, remaining.abs_ref()) {
            h = remaining.clone();
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Singular(format!("step budget exhausted at x = {}", x.to_f64())));
        }
        let mut table: Vec<[Float; N]> = Vec::with_capacity(MAX_COLUMNS);
        let mut accepted = None;
        for k in 0..MAX_COLUMNS {
            let steps = 2 * (k as u32 + 1);
            let base = match midpoint(&mut f, &x, &y, &h, steps, bits, &mut stats) {
                Ok(v) => v,
                Err(_) => break,
            };
            // Neville update of the row.
            let mut row = vec![base];
            for j in 1..=k {
                // diff / ((n_k/n_{k-j})² - 1), kept exact in integers.
                let lower = u64::from(2 * (k - j) as u32 + 2).pow(2);
                let denom = u64::from(steps).pow(2) - lower;
                let upd: [Float; N] = std::array::from_fn(|i| {
                    let diff = Float::with_val(bits, &row[j - 1][i] - &table[j - 1][i]);
                    Float::with_val(bits, &row[j - 1][i] + diff * lower / denom)
                });
                row.push(upd);
            }
            if k >= 2 {
                let mut err = 0.0f64;
                for i in 0..N {
                    let d = Float::with_val(bits, &row[k][i] - &row[k - 1][i]).abs();
                    let sc = Float::with_val(bits, row[k][i].abs_ref()) + 1u32;
                    err = err.max((d / sc / &tol).to_f64());
                }
                if err.is_finite() && err <= 1.0 {
                    accepted = Some((row[k].clone(), k));
                    break;
                }
            }
            table = row;
        }
        match accepted {
            Some((y_new, k)) => {
                x += &h;
                y = y_new;
                stats.accepted += 1;
                if k <= 7 {
                    h *= 1.6;
                } else if k >= 11 {
                    h *= 0.7;
                }
            }
            None => {
                stats.rejected += 1;
                h /= 4u32;
                if Float::with_val(bits, h.abs_ref()) < min_step {
                    return Err(Error::Singular(format!("step size underflow at x = {}", x.to_f64())));
                }
            }
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let bits = 192;
        let z = Float::with_val(bits, 0);
        let two = Float::with_val(bits, 2);
        let (y, _) = bulirsch_stoer(|_, y: &[Float; 1]| Ok([y[0].clone()]), &z, [Float::with_val(bits, 1)], &two, &OdeOptions::new(1e-40, bits)).unwrap();
        let want = Float::with_val(bits, 2).exp();
        assert!(Float::with_val(bits, &y[0] - &want).abs() < 1e-38);
        let ten = Float::with_val(bits, 10);
        let (y, st) = bulirsch_stoer(
            |_, y: &[Float; 2]| Ok([y[1].clone(), -y[0].clone()]),
            &z,
            [Float::with_val(bits, 0), Float::with_val(bits, 1)],
            &ten,
            &OdeOptions::new(1e-40, bits),
        )
        .unwrap();
        assert!(Float::with_val(bits, &y[0] - ten.sin()).abs() < 1e-36);
        assert!(st.accepted > 3);
        // Backwards.
        let (y, _) = bulirsch_stoer(|_, y: &[Float; 1]| Ok([-y[0].clone()]), &two, [Float::with_val(bits, 1)], &z, &OdeOptions::new(1e-40, bits)).unwrap();
        assert!(Float::with_val(bits, &y[0] - want).abs() < 1e-37);
    }

    #[test]
    fn blow_up_is_reported() {
        let bits = 128;
        let r = bulirsch_stoer(
            |_, y: &[Float; 1]| Ok([Float::with_val(bits, y[0].square_ref())]),
            &Float::with_val(bits, 0),
            [Float::with_val(bits, 1)],
            &Float::with_val(bits, 2),
            &OdeOptions::new(1e-20, bits),
        );
        assert!(r.is_err());
    }
}
