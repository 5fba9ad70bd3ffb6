//! Moments of `w(x,s) = x^α e^{-x-s/x}`, Hankel determinants and the MGF.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;
use crate::quad::{trapezoid_line, QuadOptions};
use crate::specialfun::{bessel_k_ladder, gamma, laguerre_hankel_d0};

/// The exponent α, the deformation parameter s and the working precision.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleParams {
    pub alpha: Float,
    pub s: Float,
    pub ctx: PrecisionContext,
}

impl EnsembleParams {
    pub fn new(alpha: Float, s: Float, ctx: PrecisionContext) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0 {
            return Err(Error::Domain(format!("alpha must be positive, got {}", alpha.to_f64())));
        }
        if s.is_nan() || s < 0 || s.is_infinite() {
            return Err(Error::Domain(format!("s must be finite and non-negative, got {}", s.to_f64())));
        }
        let bits = ctx.bits();
        Ok(Self {
            alpha: Float::with_val(bits, alpha),
            s: Float::with_val(bits, s),
            ctx,
        })
    }

    /// Convenience constructor from doubles (exactly representable inputs
    /// such as 0.5 stay exact).
    pub fn from_f64(alpha: f64, s: f64, bits: u32) -> Result<Self> {
        let ctx = PrecisionContext::new(bits)?;
        Self::new(ctx.real(alpha), ctx.real(s), ctx)
    }

    pub fn with_s(&self, s: Float) -> Result<Self> {
        Self::new(self.alpha.clone(), s, self.ctx.clone())
    }

    pub fn with_alpha(&self, alpha: Float) -> Result<Self> {
        Self::new(alpha, self.s.clone(), self.ctx.clone())
    }

    pub fn with_ctx(&self, ctx: PrecisionContext) -> Self {
        let bits = ctx.bits();
        Self {
            alpha: Float::with_val(bits, &self.alpha),
            s: Float::with_val(bits, &self.s),
            ctx,
        }
    }

    pub fn bits(&self) -> u32 {
        self.ctx.bits()
    }

    pub fn is_laguerre_limit(&self) -> bool {
        self.s.is_zero()
    }

    fn require_positive_s(&self, what: &str) -> Result<()> {
        if self.s <= 0 {
            return Err(Error::Domain(format!("{what} needs s > 0")));
        }
        Ok(())
    }
}

/// `μ_j(s)` for `j = first, first+1, …, j_max`, where `first` is -1 when
/// `s > 0` and 0 in the Laguerre limit.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub params: EnsembleParams,
    first: i64,
    mu: Vec<Float>,
}

impl MomentTable {
    pub fn new(params: &EnsembleParams, j_max: i64) -> Result<Self> {
        let ctx = &params.ctx;
        let bits = ctx.bits();
        if params.is_laguerre_limit() {
            // μ_j = Γ(j+α+1), built upward by the functional equation.
            let mut mu = Vec::new();
            if j_max >= 0 {
                let mut g = gamma(&Float::with_val(bits, &params.alpha + 1u32), ctx)?;
                for j in 0..=j_max {
                    mu.push(g.clone());
                    g *= Float::with_val(bits, &params.alpha + (j as u32 + 1));
                }
            }
            return Ok(Self { params: params.clone(), first: 0, mu });
        }
        let count = (j_max + 2).max(0) as usize;
        let prec = bits + 16;
        let sqrt_s = Float::with_val(prec, params.s.sqrt_ref());
        let x = Float::with_val(prec, &sqrt_s * 2u32);
        // K orders α, α+1, …: μ_j uses order j+α+1.
        let ks = bessel_k_ladder(&params.alpha, count, &x, &ctx.widened(16))?;
        let mut power = Float::with_val(prec, &params.alpha / 2u32);
        power = Float::with_val(prec, (&params.s).pow(&power));
        let mut mu = Vec::with_capacity(count);
        for k in ks {
            mu.push(Float::with_val(bits, Float::with_val(prec, &power * &k) * 2u32));
            power *= &sqrt_s;
        }
        Ok(Self { params: params.clone(), first: -1, mu })
    }

    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn j_max(&self) -> i64 {
        self.first + self.mu.len() as i64 - 1
    }

    pub fn get(&self, j: i64) -> Result<&Float> {
        if j < self.first || j > self.j_max() {
            return Err(Error::Domain(format!(
                "moment index {j} outside the table range {}..={}",
                self.first,
                self.j_max()
            )));
        }
        Ok(&self.mu[(j - self.first) as usize])
    }
}

/// `μ_j(s) = ∫₀^∞ x^{j+α} e^{-x-s/x} dx`.
pub fn moment(j: i64, params: &EnsembleParams) -> Result<Float> {
    if j < -1 {
        return Err(Error::Domain(format!("moment index {j} below -1")));
    }
    if j == -1 {
        params.require_positive_s("the moment of order -1")?;
    }
    let table = MomentTable::new(params, j)?;
    table.get(j).cloned()
}

/// Independent oracle: the defining integral after `x = e^u`, summed by the
/// trapezoidal rule around the peak of the integrand.
pub fn moment_by_quadrature(j: i64, params: &EnsembleParams) -> Result<Float> {
    let ctx = &params.ctx;
    let prec = ctx.bits() + 16;
    let nu = Float::with_val(prec, &params.alpha + (j + 1));
    if nu <= 0 && params.s.is_zero() {
        return Err(Error::Domain("divergent moment".into()));
    }
    let disc = Float::with_val(prec, nu.square_ref()) + Float::with_val(prec, &params.s * 4u32);
    let peak = (Float::with_val(prec, &nu + disc.sqrt()) / 2u32).ln();
    let s = params.s.clone();
    trapezoid_line(
        |u| {
            let e = Float::with_val(prec, u.exp_ref());
            let arg = Float::with_val(prec, &nu * u) - &e - Float::with_val(prec, &s / &e);
            Ok(arg.exp())
        },
        &peak,
        ctx,
        &QuadOptions::from_ctx(ctx),
    )
}

/// Cholesky factor of the Hankel matrix `(μ_{j+k})` together with the
/// determinants and norms it yields.
#[derive(Clone, Debug)]
pub struct HankelData {
    pub params: EnsembleParams,
    /// `D_0 = 1, D_1, …, D_m`.
    pub d: Vec<Float>,
    /// `h_0, …, h_{m-1}` with `h_k = D_{k+1}/D_k`.
    pub h: Vec<Float>,
    /// Lower-triangular factor `L` with `M = L Lᵀ`, row-major.
    pub chol: Vec<Vec<Float>>,
    /// Largest pivot loss observed, in bits.
    pub max_lost_bits: u32,
}

impl HankelData {
    /// Factors the `m × m` Hankel matrix; needs moments up to `μ_{2m-2}`.
    pub fn from_moments(table: &MomentTable, m: usize) -> Result<Self> {
        let params = table.params.clone();
        let bits = params.bits();
        let prec = bits + 32;
        let mut chol: Vec<Vec<Float>> = Vec::with_capacity(m);
        let mut d = vec![Float::with_val(bits, 1)];
        let mut h = Vec::with_capacity(m);
        let mut det = Float::with_val(prec, 1);
        let mut max_lost_bits = 0u32;
        for i in 0..m {
            let mut row: Vec<Float> = Vec::with_capacity(i + 1);
            for k in 0..=i {
                let mut acc = Float::with_val(prec, table.get((i + k) as i64)?);
                let other = if k < i { &chol[k][..] } else { &row[..] };
                for (x, y) in row.iter().zip(other).take(k) {
                    acc -= Float::with_val(prec, x * y);
                }
                if k < i {
                    row.push(acc / &chol[k][k]);
                    continue;
                }
                // Diagonal pivot: the Schur complement entry, compared with
                // the raw diagonal to measure cancellation.
                let diag = Float::with_val(prec, table.get(2 * i as i64)?);
                if acc <= 0 {
                    return Err(Error::Conditioning {
                        stage: "hankel cholesky",
                        index: i,
                        lost_bits: bits,
                        bits,
                    });
                }
                let ratio = Float::with_val(64, &diag / &acc).log2().to_f64().max(0.0);
                let lost = ratio.ceil() as u32;
                max_lost_bits = max_lost_bits.max(lost);
                if lost > bits.saturating_sub(32) {
                    return Err(Error::Conditioning {
                        stage: "hankel cholesky",
                        index: i,
                        lost_bits: lost,
                        bits,
                    });
                }
                det *= &acc;
                h.push(Float::with_val(bits, &acc));
                d.push(Float::with_val(bits, &det));
                row.push(acc.sqrt());
            }
            chol.push(row);
        }
        Ok(Self {
            params,
            d,
            h,
            chol,
            max_lost_bits,
        })
    }

    pub fn new(params: &EnsembleParams, m: usize) -> Result<Self> {
        let j_max = (2 * m as i64 - 2).max(0);
        let table = MomentTable::new(params, j_max)?;
        Self::from_moments(&table, m)
    }

    pub fn size(&self) -> usize {
        self.h.len()
    }
}

/// `D_n(s) = det(μ_{j+k})_{j,k<n}`.
pub fn hankel_det(n: usize, params: &EnsembleParams) -> Result<Float> {
    if n == 0 {
        return Ok(params.ctx.one());
    }
    let data = HankelData::new(params, n)?;
    Ok(data.d[n].clone())
}

/// `M_f(s) = D_n(s)/D_n(0)`.
pub fn mgf(n: usize, params: &EnsembleParams) -> Result<Float> {
    if n == 0 {
        return Err(Error::Domain("the MGF needs n >= 1".into()));
    }
    if params.is_laguerre_limit() {
        return Ok(params.ctx.one());
    }
    let num = hankel_det(n, params)?;
    let den = laguerre_hankel_d0(n, &params.alpha, &params.ctx)?;
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::rel_diff;

    fn params(alpha: f64, s: f64) -> EnsembleParams {
        EnsembleParams::from_f64(alpha, s, 256).unwrap()
    }

    fn three_root_pi_e2(p: &EnsembleParams) -> Float {
        p.ctx.pi().sqrt() * 3u32 / 2u32 * p.ctx.real(-2).exp()
    }

    #[test]
    fn moment_closed_forms() {
        let p = params(0.5, 1.0);
        let tol = p.ctx.quad_tol().to_f64() * 10.0;
        assert!(rel_diff(&moment(0, &p).unwrap(), &three_root_pi_e2(&p)) < tol);
        let m = moment(-1, &p).unwrap();
        assert!(rel_diff(&m, &(p.ctx.pi().sqrt() * p.ctx.real(-2).exp())) < tol);
        assert_eq!(moment(2, &params(1.0, 0.0)).unwrap(), 6);
        assert!(moment(-1, &params(1.0, 0.0)).is_err());
    }

    #[test]
    fn quadrature_oracle_grid() {
        for &s in &[0.1, 1.0, 5.0] {
            let p = params(1.3, s);
            let tol = p.ctx.quad_tol().to_f64() * 10.0;
            let table = MomentTable::new(&p, 1).unwrap();
            for j in -1..=1 {
                let q = moment_by_quadrature(j, &p).unwrap();
                let r = rel_diff(table.get(j).unwrap(), &q);
                assert!(r < tol, "j={j} s={s}: {r:e}");
            }
        }
    }

    #[test]
    fn determinants() {
        let p = params(0.5, 1.0);
        assert_eq!(hankel_det(0, &p).unwrap(), 1);
        let d1 = hankel_det(1, &p).unwrap();
        assert!(rel_diff(&d1, &three_root_pi_e2(&p)) < 1e-60);
        let p0 = params(0.5, 0.0);
        let d2 = hankel_det(2, &p0).unwrap();
        assert!(rel_diff(&d2, &(p0.ctx.pi() * 3u32 / 8u32)) < 1e-60);
        assert!(rel_diff(&d2, &laguerre_hankel_d0(2, &p0.alpha, &p0.ctx).unwrap()) < 1e-60);
    }

    #[test]
    fn mgf_values() {
        let p = params(0.5, 1.0);
        let m = mgf(1, &p).unwrap();
        assert!(rel_diff(&m, &(p.ctx.real(-2).exp() * 3u32)) < 1e-60);
        assert_eq!(mgf(3, &params(0.5, 0.0)).unwrap(), 1);
        let m5 = mgf(5, &p).unwrap();
        assert!(m5 > 0 && m5 < 1);
    }

    #[test]
    fn laguerre_limit_of_determinants() {
        let p = EnsembleParams::from_f64(0.7, 1e-8, 256).unwrap();
        for n in 1..=6 {
            let d = hankel_det(n, &p).unwrap();
            let d0 = laguerre_hankel_d0(n, &p.alpha, &p.ctx).unwrap();
            assert!(rel_diff(&d, &d0) < 1e-6);
        }
    }

    #[test]
    fn mgf_monotone_on_grid() {
        let mut prev = Float::with_val(256, 1);
        for &s in &[0.05, 0.2, 0.7, 1.5, 4.0] {
            let m = mgf(4, &params(1.3, s)).unwrap();
            assert!(m > 0 && m < prev);
            prev = m;
        }
    }

    #[test]
    fn low_precision_large_hankel_reports_conditioning() {
        let p = EnsembleParams::from_f64(0.5, 1.0, 64).unwrap();
        let err = HankelData::new(&p, 40).unwrap_err();
        assert!(matches!(err, Error::Conditioning { .. }), "{err:?}");
        assert!(err.is_precision_failure());
    }

    #[test]
    fn norms_are_positive() {
        let data = HankelData::new(&params(2.0, 5.0), 12).unwrap();
        assert!(data.h.iter().all(|h| *h > 0));
        assert!(data.d.iter().all(|d| *d > 0));
    }
}
