//! Anisotropic Matérn ν = 5/2 covariance.

use serde::{Deserialize, Serialize};

const SQRT5: f64 = 2.236_067_977_499_79;

/// σ²(1 + √5r + 5r²/3)·exp(−√5r), with r the lengthscale-scaled distance.
pub fn matern52(x: &[f64], y: &[f64], lengthscales: &[f64], signal_variance: f64) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    debug_assert_eq!(x.len(), lengthscales.len());
    let r2: f64 = x
        .iter()
        .zip(y)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let t = (a - b) / l;
            t * t
        })
        .sum();
    signal_variance * matern52_unit(r2.sqrt())
}

/// Unit-variance Matérn 5/2 as a function of scaled distance.
#[inline]
pub fn matern52_unit(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// −(1/r)·d/dr of the unit kernel, i.e. (5/3)(1 + √5r)e^(−√5r). Multiplying by
/// the squared scaled offset along dimension j gives ∂k/∂log ℓ_j.
#[inline]
pub(crate) fn matern52_dlog(r: f64) -> f64 {
    let s = SQRT5 * r;
    (5.0 / 3.0) * (1.0 + s) * (-s).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matern52 {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

impl Matern52 {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64) -> Self {
        Self {
            lengthscales,
            signal_variance,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        matern52(x, y, &self.lengthscales, self.signal_variance)
    }

    pub fn is_valid(&self) -> bool {
        self.signal_variance.is_finite()
            && self.signal_variance > 0.0
            && self.lengthscales.iter().all(|l| l.is_finite() && *l > 0.0)
    }

    /// Row-major copy of `x` (`p` columns) with each column divided by its lengthscale.
    pub(crate) fn scale_inputs(&self, x: &[f64]) -> Vec<f64> {
        let p = self.dim();
        let mut out = x.to_vec();
        for row in out.chunks_mut(p) {
            for (v, l) in row.iter_mut().zip(&self.lengthscales) {
                *v /= l;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_is_signal_variance() {
        assert_eq!(matern52(&[0.3, 0.1], &[0.3, 0.1], &[0.5, 2.0], 1.7), 1.7);
    }

    #[test]
    fn decays_to_zero() {
        assert!(matern52(&[0.0], &[1e3], &[1.0], 1.0) < 1e-300);
    }

    #[test]
    fn unit_distance_value() {
        let want = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        let got = matern52(&[0.0], &[1.0], &[1.0], 1.0);
        assert!((got - want).abs() <= 1e-12 * want);
        assert!((got - 0.52399).abs() < 1e-5);
    }

    #[test]
    fn dlog_matches_finite_difference() {
        // d/d(log l) of k(r/l) at l = 1 equals r^2 * dlog(r).
        for &r in &[0.05, 0.4, 1.3, 3.0] {
            let h = 1e-6;
            let f = |ll: f64| matern52_unit(r / ll.exp());
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let an = r * r * matern52_dlog(r);
            assert!((fd - an).abs() < 1e-6 * an.abs(), "{r}: {fd} vs {an}");
        }
    }
}
