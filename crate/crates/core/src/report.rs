//! Residual records shared by every verification suite.

use rug::Float;

use crate::moments::EnsembleParams;
use crate::precision::max_abs;

/// One identity checked at one grid point.
#[derive(Clone, Debug)]
pub struct IdentityRecord {
    pub id: String,
    pub n: usize,
    pub alpha: f64,
    pub s: f64,
    /// The quantity the identity was evaluated on, when there is a natural one.
    pub value: Option<Float>,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub suite: String,
    pub records: Vec<IdentityRecord>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, id: &str, n: usize, params: &EnsembleParams, residual: f64, tol: f64) -> &mut IdentityRecord {
        self.records.push(IdentityRecord {
            id: id.to_string(),
            n,
            alpha: params.alpha.to_f64(),
            s: params.s.to_f64(),
            value: None,
            residual,
            tol,
            // NaN residuals fail.
            pass: residual <= tol,
        });
        self.records.last_mut().expect("just pushed")
    }

    pub fn push_value(
        &mut self,
        id: &str,
        n: usize,
        params: &EnsembleParams,
        value: &Float,
        residual: f64,
        tol: f64,
    ) {
        self.push(id, n, params, residual, tol).value = Some(value.clone());
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.records.extend(other.records);
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn pass_count(&self) -> usize {
        self.records.iter().filter(|r| r.pass).count()
    }

    pub fn fail_count(&self) -> usize {
        self.records.len() - self.pass_count()
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Largest residual recorded under `id`.
    pub fn max_residual(&self, id: &str) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.id == id)
            .map(|r| r.residual)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

/// `|Σ terms| / max |term|`: how well a signed sum of terms cancels, relative
/// to its largest term. Zero when every term vanishes.
pub fn balance(terms: &[Float]) -> f64 {
    let scale = max_abs(terms);
    if scale.is_zero() {
        return 0.0;
    }
    let prec = terms.iter().map(|t| t.prec()).max().unwrap_or(64) + 32;
    let mut sum = Float::with_val(prec, 0);
    for t in terms {
        sum += t;
    }
    (sum.abs() / scale).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balance_of_cancelling_terms() {
        let t = [Float::with_val(64, 2), Float::with_val(64, -2)];
        assert_eq!(balance(&t), 0.0);
        let t = [Float::with_val(64, 4), Float::with_val(64, -3)];
        assert_eq!(balance(&t), 0.25);
        assert_eq!(balance(&[Float::new(64)]), 0.0);
    }

    #[test]
    fn report_counts() {
        let p = EnsembleParams::from_f64(0.5, 1.0, 64).unwrap();
        let mut r = VerificationReport::new("demo");
        r.push("a", 1, &p, 1e-20, 1e-15);
        r.push("a", 2, &p, 1e-10, 1e-15);
        r.push("b", 2, &p, f64::NAN, 1e-15);
        assert!(!r.passed());
        assert_eq!(r.pass_count(), 1);
        assert_eq!(r.fail_count(), 2);
        assert_eq!(r.max_residual("a"), Some(1e-10));
    }
}
