use crate::fields::ScalarField;

use super::RearrangeError;

/// Piecewise-linear non-decreasing map, constant beyond its end breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneProfile {
    s: Vec<f64>,
    f: Vec<f64>,
}

impl MonotoneProfile {
    pub fn new(s: Vec<f64>, f: Vec<f64>) -> Result<Self, RearrangeError> {
        if s.is_empty() || s.len() != f.len() {
            return Err(RearrangeError::InvalidProfile("need matching, non-empty breakpoint lists".into()));
        }
        if s.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(RearrangeError::InvalidProfile("non-finite breakpoint".into()));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RearrangeError::InvalidProfile("breakpoints must increase strictly".into()));
        }
        if f.windows(2).any(|w| w[1] < w[0]) {
            return Err(RearrangeError::InvalidProfile("values must be non-decreasing".into()));
        }
        Ok(MonotoneProfile { s, f })
    }

    pub fn constant(c: f64) -> Self {
        MonotoneProfile { s: vec![0.0], f: vec![c] }
    }

    /// `t` clamped to `[lo, hi]`.
    pub fn clamp(lo: f64, hi: f64) -> Result<Self, RearrangeError> {
        Self::new(vec![lo, hi], vec![lo, hi])
    }

    /// `slope * t + offset` on `[lo, hi]`, flat outside.
    pub fn affine(slope: f64, offset: f64, lo: f64, hi: f64) -> Result<Self, RearrangeError> {
        Self::new(vec![lo, hi], vec![slope * lo + offset, slope * hi + offset])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.s.len();
        if t <= self.s[0] {
            return self.f[0];
        }
        if t >= self.s[n - 1] {
            return self.f[n - 1];
        }
        let k = self.s.partition_point(|&x| x <= t);
        let (s0, s1) = (self.s[k - 1], self.s[k]);
        let w = (t - s0) / (s1 - s0);
        self.f[k - 1] + w * (self.f[k] - self.f[k - 1])
    }

    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        u.map(|t| self.eval(t))
    }

    pub fn max_abs(&self) -> f64 {
        self.f[0].abs().max(self.f[self.f.len() - 1].abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_extrapolation() {
        let p = MonotoneProfile::clamp(-1.0, 0.0).unwrap();
        assert_eq!(p.eval(-3.0), -1.0);
        assert_eq!(p.eval(-0.25), -0.25);
        assert_eq!(p.eval(2.0), 0.0);
        assert_eq!(MonotoneProfile::constant(4.0).eval(-9.0), 4.0);
    }

    #[test]
    fn rejects_decreasing() {
        assert!(MonotoneProfile::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(MonotoneProfile::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(MonotoneProfile::new(vec![], vec![]).is_err());
    }
}
