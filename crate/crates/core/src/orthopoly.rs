//! Recurrence coefficients of the monic orthogonal polynomials, read off the
//! Cholesky factor of the Hankel matrix.
//!
//! With `M = L Lᵀ` one has `L_{jk} = ⟨x^j, P_k⟩ / √h_k`, hence
//! `h_n = L_nn²`, `Σ_{j<n} α_j = L_{n,n-1}/L_{n-1,n-1}` and
//! `β_n = (L_nn/L_{n-1,n-1})²`.

use rug::Float;

use crate::error::{Error, Result};
use crate::moments::{EnsembleParams, HankelData, MomentTable};
use crate::precision::{max_abs, rel_diff};
use crate::specialfun::gamma;

/// `α_n`, `β_n` and `𝗉₁(n)` for `n = 0..=n_max`, plus the moment table and
/// Hankel factor they came from.
#[derive(Clone, Debug)]
pub struct RecurrenceTable {
    pub params: EnsembleParams,
    pub moments: MomentTable,
    pub hankel: HankelData,
    pub alpha_n: Vec<Float>,
    /// `β_0` is stored as 0 (only `β_0 P_{-1} = 0` is meaningful).
    pub beta_n: Vec<Float>,
    /// `𝗉₁(n)` for `n = 0..=n_max+1`, `𝗉₁(0) = 0`.
    pub p1: Vec<Float>,
}

/// A monic `P_n(z)`, optionally with its first two derivatives in `z`.
#[derive(Clone, Debug)]
pub struct PolynomialValue {
    pub n: usize,
    pub z: Float,
    pub value: Float,
    pub d1: Float,
    pub d2: Float,
}

impl RecurrenceTable {
    pub fn n_max(&self) -> usize {
        self.alpha_n.len() - 1
    }

    /// `h_n` for `n = 0..=n_max+1`.
    pub fn h(&self, n: usize) -> &Float {
        &self.hankel.h[n]
    }

    /// `D_n` for `n = 0..=n_max+2`.
    pub fn d(&self, n: usize) -> &Float {
        &self.hankel.d[n]
    }

    /// Three-term recurrence `zP_n = P_{n+1} + α_nP_n + β_nP_{n-1}`,
    /// differentiated twice alongside.
    pub fn eval_pn(&self, n: usize, z: &Float) -> Result<PolynomialValue> {
        if n > self.n_max() + 1 {
            return Err(Error::Domain(format!("degree {n} beyond the recurrence table")));
        }
        let prec = self.params.bits() + 32;
        let mut p = (Float::with_val(prec, 0), Float::with_val(prec, 1));
        let mut d1 = (Float::with_val(prec, 0), Float::with_val(prec, 0));
        let mut d2 = (Float::with_val(prec, 0), Float::with_val(prec, 0));
        for k in 0..n {
            let shift = Float::with_val(prec, z - &self.alpha_n[k]);
            let beta = &self.beta_n[k];
            let next = Float::with_val(prec, &shift * &p.1) - Float::with_val(prec, beta * &p.0);
            let next_d1 = Float::with_val(prec, &shift * &d1.1) - Float::with_val(prec, beta * &d1.0) + &p.1;
            let next_d2 =
                Float::with_val(prec, &shift * &d2.1) - Float::with_val(prec, beta * &d2.0) + Float::with_val(prec, &d1.1 * 2u32);
            p.0 = std::mem::replace(&mut p.1, next);
            d1.0 = std::mem::replace(&mut d1.1, next_d1);
            d2.0 = std::mem::replace(&mut d2.1, next_d2);
        }
        let bits = self.params.bits();
        Ok(PolynomialValue {
            n,
            z: z.clone(),
            value: Float::with_val(bits, p.1),
            d1: Float::with_val(bits, d1.1),
            d2: Float::with_val(bits, d2.1),
        })
    }

    /// Monomial coefficients `c_k[i]` of `P_k(x) = Σ_i c_k[i] x^i` for
    /// `k = 0..=n`.
    pub fn monic_coeffs(&self, n: usize) -> Result<Vec<Vec<Float>>> {
        if n > self.n_max() + 1 {
            return Err(Error::Domain(format!("degree {n} beyond the recurrence table")));
        }
        let prec = self.params.bits() + 32;
        let mut out: Vec<Vec<Float>> = vec![vec![Float::with_val(prec, 1)]];
        for k in 0..n {
            let mut next = vec![Float::with_val(prec, 0); k + 2];
            for (i, c) in out[k].iter().enumerate() {
                next[i + 1] += c;
                next[i] -= Float::with_val(prec, c * &self.alpha_n[k]);
            }
            if k > 0 {
                for (i, c) in out[k - 1].iter().enumerate() {
                    next[i] -= Float::with_val(prec, c * &self.beta_n[k]);
                }
            }
            out.push(next);
        }
        Ok(out)
    }

    /// `∫ P_m P_n x^shift w dx` as a finite moment combination.
    pub fn moment_form(&self, coeffs: &[Vec<Float>], m: usize, n: usize, shift: i64) -> Result<Float> {
        let prec = self.params.bits() + 32;
        let mut acc = Float::with_val(prec, 0);
        for (i, ci) in coeffs[m].iter().enumerate() {
            for (j, cj) in coeffs[n].iter().enumerate() {
                let mu = self.moments.get(i as i64 + j as i64 + shift)?;
                acc += Float::with_val(prec, ci * cj) * mu;
            }
        }
        Ok(acc)
    }

    /// Relative size of `∫ P_m P_n w` (for `m ≠ n`) or of `∫ P_n² w - h_n`.
    pub fn orthogonality_residual(&self, m: usize, n: usize) -> Result<f64> {
        let coeffs = self.monic_coeffs(m.max(n))?;
        let form = self.moment_form(&coeffs, m, n, 0)?;
        let prec = form.prec();
        if m == n {
            return Ok(rel_diff(&form, self.h(n)));
        }
        // Cancellation scale: the largest individual term of the bilinear form.
        let mut scale = Float::with_val(prec, 0);
        for (i, ci) in coeffs[m].iter().enumerate() {
            for (j, cj) in coeffs[n].iter().enumerate() {
                let t = Float::with_val(prec, ci * cj) * self.moments.get((i + j) as i64)?;
                scale = max_abs([&scale, &t]);
            }
        }
        let norm = Float::with_val(prec, self.h(m) * self.h(n)).sqrt();
        let scale = max_abs([&scale, &norm]);
        Ok((form.abs() / scale).to_f64())
    }
}

/// Recurrence coefficients for `n = 0..=n_max` from an `(n_max+2)`-square
/// Hankel factor.
pub fn recurrence_coeffs(n_max: usize, params: &EnsembleParams) -> Result<RecurrenceTable> {
    let m = n_max + 2;
    let moments = MomentTable::new(params, 2 * m as i64)?;
    let hankel = HankelData::from_moments(&moments, m)?;
    let bits = params.bits();
    let l = &hankel.chol;
    let ratio = |n: usize| -> Float {
        if n == 0 {
            Float::with_val(bits, 0)
        } else {
            Float::with_val(bits, &l[n][n - 1] / &l[n - 1][n - 1])
        }
    };
    let mut p1 = Vec::with_capacity(m);
    for n in 0..m {
        p1.push(-ratio(n));
    }
    let mut alpha_n = Vec::with_capacity(n_max + 1);
    let mut beta_n = Vec::with_capacity(n_max + 1);
    let cross_tol = 2f64.powi(-(bits as i32) / 2);
    for n in 0..=n_max {
        alpha_n.push(Float::with_val(bits, &p1[n] - &p1[n + 1]));
        if n == 0 {
            beta_n.push(Float::with_val(bits, 0));
            continue;
        }
        let q = Float::with_val(bits, &l[n][n] / &l[n - 1][n - 1]);
        let beta = q.square();
        let d = &hankel.d;
        let via_det = Float::with_val(bits, &d[n + 1] * &d[n - 1]) / Float::with_val(bits, d[n].square_ref());
        let diff = rel_diff(&beta, &via_det);
        if diff > cross_tol {
            return Err(Error::Conditioning {
                stage: "beta cross-check",
                index: n,
                lost_bits: bits.saturating_sub((-diff.log2()).max(0.0) as u32),
                bits,
            });
        }
        beta_n.push(beta);
    }
    Ok(RecurrenceTable {
        params: params.clone(),
        moments,
        hankel,
        alpha_n,
        beta_n,
        p1,
    })
}

/// `(-1)^n P_n(0,s)` from the recurrence, and the determinant ratio
/// `D_n(α+1)/D_n(α)` it must equal.
#[derive(Clone, Debug)]
pub struct PnZeroRatio {
    pub direct: Float,
    pub det_ratio: Float,
    /// `Γ(n+α+1)/Γ(α+1)`, present in the Laguerre limit.
    pub laguerre: Option<Float>,
    pub residual: f64,
}

pub fn pn_zero_ratio(n: usize, params: &EnsembleParams) -> Result<PnZeroRatio> {
    let bits = params.bits();
    if n == 0 {
        let one = params.ctx.one();
        return Ok(PnZeroRatio {
            direct: one.clone(),
            det_ratio: one.clone(),
            laguerre: params.is_laguerre_limit().then_some(one),
            residual: 0.0,
        });
    }
    let table = recurrence_coeffs(n - 1, params)?;
    let p = table.eval_pn(n, &params.ctx.zero())?;
    let direct = if n % 2 == 0 { p.value } else { -p.value };
    let shifted = params.with_alpha(Float::with_val(bits, &params.alpha + 1u32))?;
    let num = HankelData::new(&shifted, n)?;
    let det_ratio = Float::with_val(bits, &num.d[n] / table.d(n));
    let mut residual = rel_diff(&direct, &det_ratio);
    let laguerre = if params.is_laguerre_limit() {
        let top = gamma(&Float::with_val(bits, &params.alpha + (n as u32 + 1)), &params.ctx)?;
        let bottom = gamma(&Float::with_val(bits, &params.alpha + 1u32), &params.ctx)?;
        let v = top / bottom;
        residual = residual.max(rel_diff(&direct, &v));
        Some(v)
    } else {
        None
    };
    Ok(PnZeroRatio {
        direct,
        det_ratio,
        laguerre,
        residual,
    })
}

/// Residual of the second-order ODE satisfied by `y = P_n(z)`,
/// `y'' - (𝗏' + A_n'/A_n) y' + (B_n' - B_n A_n'/A_n + Σ_{j<n} A_j) y`, with
/// `A_n = 1/z + a_n/z²`, `B_n = -n/z + b_n/z²`, `𝗏' = 1 - α/z - s/z²`,
/// relative to the largest of the three terms.
pub fn ode_residual(
    table: &RecurrenceTable,
    n: usize,
    z: &Float,
    a_n: &Float,
    b_n: &Float,
    sum_a: &Float,
) -> Result<f64> {
    if z.is_zero() {
        return Err(Error::DivisionByZero("ode residual at z = 0"));
    }
    let prec = table.params.bits() + 32;
    let y = table.eval_pn(n, z)?;
    let zi = Float::with_val(prec, z.recip_ref());
    let zi2 = Float::with_val(prec, zi.square_ref());
    let zi3 = Float::with_val(prec, &zi2 * &zi);
    let nf = Float::with_val(prec, n);
    let a_fn = Float::with_val(prec, &zi + Float::with_val(prec, a_n * &zi2));
    let a_d = -Float::with_val(prec, &zi2) - Float::with_val(prec, a_n * &zi3) * 2u32;
    let b_fn = Float::with_val(prec, b_n * &zi2) - Float::with_val(prec, &nf * &zi);
    let b_d = Float::with_val(prec, &nf * &zi2) - Float::with_val(prec, b_n * &zi3) * 2u32;
    let vp = Float::with_val(prec, 1) - Float::with_val(prec, &table.params.alpha * &zi) - Float::with_val(prec, &table.params.s * &zi2);
    let sum_big_a = Float::with_val(prec, &nf * &zi) + Float::with_val(prec, sum_a * &zi2);
    let log_d = Float::with_val(prec, &a_d / &a_fn);
    let c1 = Float::with_val(prec, &vp + &log_d);
    let c0 = b_d - Float::with_val(prec, &b_fn * &log_d) + sum_big_a;
    let t2 = Float::with_val(prec, &y.d2);
    let t1 = -Float::with_val(prec, &c1 * &y.d1);
    let t0 = Float::with_val(prec, &c0 * &y.value);
    let total = Float::with_val(prec, &t2 + &t1) + &t0;
    let scale = max_abs([&t2, &t1, &t0]);
    if scale.is_zero() {
        return Ok(0.0);
    }
    Ok((total.abs() / scale).to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, s: f64) -> EnsembleParams {
        EnsembleParams::from_f64(alpha, s, 256).unwrap()
    }

    #[test]
    fn laguerre_limit_coefficients() {
        let p = params(0.5, 0.0);
        let t = recurrence_coeffs(4, &p).unwrap();
        for (n, a) in t.alpha_n.iter().enumerate() {
            assert!((a.to_f64() - (2.0 * n as f64 + 1.5)).abs() < 1e-60);
        }
        assert!((t.beta_n[2].to_f64() - 5.0).abs() < 1e-60);
        assert!((t.beta_n[1].to_f64() - 1.5).abs() < 1e-60);
        assert_eq!(t.beta_n[0], 0);
    }

    #[test]
    fn beta_one_at_unit_point() {
        let p = params(0.5, 1.0);
        let t = recurrence_coeffs(1, &p).unwrap();
        let exact = p.ctx.real(31) / 18u32;
        assert!(rel_diff(&t.beta_n[1], &exact) < 1e-60);
    }

    #[test]
    fn p1_telescopes() {
        let t = recurrence_coeffs(6, &params(1.3, 2.0)).unwrap();
        let mut sum = Float::with_val(256, 0);
        for n in 0..=6 {
            assert!(rel_diff(&(-sum.clone()), &t.p1[n]) < 1e-65 || sum.is_zero());
            let diff = Float::with_val(256, &t.p1[n] - &t.p1[n + 1]);
            assert!(rel_diff(&diff, &t.alpha_n[n]) < 1e-70);
            sum += &t.alpha_n[n];
        }
        let coeffs = t.monic_coeffs(4).unwrap();
        assert!(rel_diff(&coeffs[4][3], &t.p1[4]) < 1e-65);
    }

    #[test]
    fn low_degree_values() {
        let p = params(0.5, 0.0);
        let t = recurrence_coeffs(2, &p).unwrap();
        let z = p.ctx.real(3.7);
        assert_eq!(t.eval_pn(0, &z).unwrap().value, 1);
        let p1 = t.eval_pn(1, &p.ctx.zero()).unwrap();
        assert!((p1.value.to_f64() + 1.5).abs() < 1e-60);
        assert_eq!(p1.d1, 1);
    }

    #[test]
    fn orthogonality() {
        let t = recurrence_coeffs(6, &params(0.5, 1.0)).unwrap();
        let tol = 2f64.powi(-128);
        for m in 0..=6 {
            for n in 0..=6 {
                let r = t.orthogonality_residual(m, n).unwrap();
                assert!(r < tol, "({m},{n}): {r:e}");
            }
        }
    }

    #[test]
    fn zero_ratio() {
        let r = pn_zero_ratio(1, &params(0.5, 0.0)).unwrap();
        assert!((r.direct.to_f64() - 1.5).abs() < 1e-60);
        assert!(r.residual < 1e-60);
        assert_eq!(pn_zero_ratio(0, &params(0.5, 1.0)).unwrap().direct, 1);
        let r = pn_zero_ratio(2, &params(0.5, 1.0)).unwrap();
        assert!(r.residual < 2f64.powi(-128), "{:e}", r.residual);
    }

    #[test]
    fn derivative_recurrence_matches_coefficients() {
        let p = params(1.3, 0.7);
        let t = recurrence_coeffs(4, &p).unwrap();
        let coeffs = t.monic_coeffs(5).unwrap();
        let z = p.ctx.real(1.9);
        let v = t.eval_pn(5, &z).unwrap();
        let mut val = Float::with_val(256, 0);
        let mut d1 = Float::with_val(256, 0);
        let mut d2 = Float::with_val(256, 0);
        for c in coeffs[5].iter().rev() {
            d2 = d2 * &z + Float::with_val(256, &d1 * 2u32);
            d1 = d1 * &z + &val;
            val = val * &z + c;
        }
        assert!(rel_diff(&v.value, &val) < 1e-60);
        assert!(rel_diff(&v.d1, &d1) < 1e-60);
        assert!(rel_diff(&v.d2, &d2) < 1e-60);
    }
}
