//! Rational parameterization of the kernel zero set for small-step walks.
//!
//! For a walk supported on `{(-1,1), (1,-1), (1,0), (0,1), (1,1)}` the zero
//! set of the kernel is a rational curve `s -> (alpha(s), beta(s))` with
//! `alpha(s) = alpha(1/s)` and `beta(s) = beta(1/(rho^2 s))`. Composing the
//! two involutions multiplies `s` by `rho^2`, so the compensation sequence is
//! `(alpha(rho^{2n} s), beta(rho^{2n} s))`.

use crate::error::{Error, Result};
use crate::model::{validate_model, StepDistribution};

/// Constants of the parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformizationParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub b_hat: f64,
    pub c_hat: f64,
    pub rho: f64,
    pub disc: f64,
    pub disc_hat: f64,
    /// Set when the probe selected the reflected `beta` branch.
    pub beta_reflected: bool,
}

impl UniformizationParams {
    /// Computes the constants of a small-step model. Holding steps are
    /// removed first; they do not change the zero set.
    pub fn compute(dist: &StepDistribution) -> Result<UniformizationParams> {
        let report = validate_model(dist);
        if !report.is_small_step {
            return Err(Error::NotSmallStep(
                "support must lie in {(-1,1), (1,-1), (1,0), (0,1), (1,1)}".into(),
            ));
        }
        let dist = if dist.prob(0, 0) > 0.0 {
            dist.without_holding()?
        } else {
            dist.clone()
        };
        let nw = dist.prob(-1, 1);
        let se = dist.prob(1, -1);
        let north = dist.prob(0, 1);
        let east = dist.prob(1, 0);
        let ne = dist.prob(1, 1);
        let a = 1.0 - 4.0 * nw * se;
        let b = north + 2.0 * nw * east;
        let c = north * north - 4.0 * nw * ne;
        let b_hat = east + 2.0 * se * north;
        let c_hat = east * east - 4.0 * se * ne;
        let disc = b * b - a * c;
        let disc_hat = b_hat * b_hat - a * c_hat;
        if !(a > 0.0 && a < 1.0 && disc > 0.0 && disc_hat > 0.0) {
            return Err(Error::InvalidModel(format!(
                "degenerate uniformization: a = {a}, disc = {disc}, disc_hat = {disc_hat}"
            )));
        }
        let root_a = a.sqrt();
        let rho = ((1.0 + root_a) / (1.0 - root_a)).sqrt();
        let mut params = UniformizationParams {
            a,
            b,
            c,
            b_hat,
            c_hat,
            rho,
            disc,
            disc_hat,
            beta_reflected: false,
        };
        // On the arc the second coordinate is the larger of the two roots
        // sharing the first; probe inside (1/rho, 1).
        let probe = rho.powf(-0.5);
        if params.beta_of_s(probe)? < params.beta_of_s(1.0 / probe)? {
            params.beta_reflected = true;
        }
        Ok(params)
    }

    /// `alpha(s)`. The discriminant of the kernel as a quadratic in `beta`
    /// involves `b_hat` and `c_hat`, so those parameterize `alpha`.
    pub fn alpha_of_s(&self, s: f64) -> Result<f64> {
        if s == 0.0 || !s.is_finite() {
            return Err(Error::Pole { s });
        }
        let inv = self.disc_hat.sqrt() / (2.0 * self.a) * (s + 1.0 / s) + self.b_hat / self.a;
        if inv == 0.0 {
            return Err(Error::Pole { s });
        }
        Ok(1.0 / inv)
    }

    /// `beta(s)`.
    pub fn beta_of_s(&self, s: f64) -> Result<f64> {
        if s == 0.0 || !s.is_finite() {
            return Err(Error::Pole { s });
        }
        let s = if self.beta_reflected { 1.0 / s } else { s };
        let t = self.rho * s;
        let inv = self.disc.sqrt() / (2.0 * self.a) * (t + 1.0 / t) + self.b / self.a;
        if inv == 0.0 {
            return Err(Error::Pole { s });
        }
        Ok(1.0 / inv)
    }

    /// `(alpha_n, beta_n) = (alpha(rho^{2n} s), beta(rho^{2n} s))`.
    pub fn sequence_at(&self, s: f64, n: i32) -> Result<(f64, f64)> {
        let t = s * self.rho.powi(2 * n);
        Ok((self.alpha_of_s(t)?, self.beta_of_s(t)?))
    }

    /// `1/alpha_0, 1/beta_0, 1/alpha_1, 1/beta_1, ...`, `count` values.
    pub fn denominator_sequence(&self, s: f64, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut n = 0;
        while out.len() < count {
            let (alpha, beta) = self.sequence_at(s, n)?;
            out.push(1.0 / alpha);
            if out.len() < count {
                out.push(1.0 / beta);
            }
            n += 1;
        }
        Ok(out)
    }

    /// Parameter in `(1/rho, 1)` of the point `(1, 1)`, which starts the
    /// sequence of the escape probability.
    pub fn escape_parameter(&self) -> Result<f64> {
        // s + 1/s = m with m > 2.
        let m = 2.0 * (self.a - self.b_hat) / self.disc_hat.sqrt();
        if !(m > 2.0) {
            return Err(Error::NoRoot(format!("alpha(s) = 1 has no real root (m = {m})")));
        }
        let s = 0.5 * (m - (m * m - 4.0).sqrt());
        if !(s > 1.0 / self.rho && s < 1.0) {
            return Err(Error::NoRoot(format!("escape parameter {s} outside (1/rho, 1)")));
        }
        Ok(s)
    }

    /// `rho^n + rho^{-n}` for `n = 0..count`.
    pub fn lucas_sequence(&self, count: usize) -> Vec<f64> {
        (0..count)
            .map(|n| {
                let r = self.rho.powi(n as i32);
                r + 1.0 / r
            })
            .collect()
    }

    /// `(rho - 1/rho)(rho^n - rho^{-n})` for `n = 0..count`.
    pub fn u_sequence(&self, count: usize) -> Vec<f64> {
        let scale = self.rho - 1.0 / self.rho;
        (0..count)
            .map(|n| {
                let r = self.rho.powi(n as i32);
                scale * (r - 1.0 / r)
            })
            .collect()
    }
}

/// Nearest integer when `x` is within `1e-9` of it.
pub fn as_integer(x: f64) -> Option<i64> {
    let r = x.round();
    ((x - r).abs() <= 1e-9).then_some(r as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> UniformizationParams {
        let d = StepDistribution::from_ratios([((1, 1), (1, 3)), ((1, -1), (1, 3)), ((-1, 1), (1, 3))]).unwrap();
        UniformizationParams::compute(&d).unwrap()
    }

    #[test]
    fn fibonacci_constants() {
        let p = fib();
        assert!((p.a - 5.0 / 9.0).abs() < 1e-15);
        assert!((p.rho - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert_eq!(p.b, 0.0);
        assert_eq!(p.b_hat, 0.0);
        assert!(!p.beta_reflected);
    }

    #[test]
    fn five_steps() {
        let d = StepDistribution::from_ratios([
            ((1, 1), (1, 5)),
            ((1, -1), (1, 5)),
            ((-1, 1), (1, 5)),
            ((1, 0), (1, 5)),
            ((0, 1), (1, 5)),
        ])
        .unwrap();
        let p = UniformizationParams::compute(&d).unwrap();
        assert!((p.a - 21.0 / 25.0).abs() < 1e-15);
        assert!(p.disc > 0.0);
    }

    #[test]
    fn fibonacci_points() {
        let p = fib();
        let s = p.escape_parameter().unwrap();
        assert!((s - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        let (alpha, beta) = p.sequence_at(s, 0).unwrap();
        assert!((alpha - 1.0).abs() < 1e-14 && (beta - 1.0).abs() < 1e-14);
        assert!((p.alpha_of_s(1.0).unwrap() - 5f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((p.beta_of_s(1.0).unwrap() - 5f64.sqrt() / 3.0).abs() < 1e-15);
        let (alpha, beta) = p.sequence_at(s, 1).unwrap();
        assert!((alpha - 0.5).abs() < 1e-14 && (beta - 0.2).abs() < 1e-14);
        assert!(p.alpha_of_s(0.0).is_err());
    }

    #[test]
    fn rejects_big_jumps() {
        let d = StepDistribution::from_ratios([((1, -1), (1, 3)), ((-1, 1), (1, 3)), ((2, 1), (1, 3))]).unwrap();
        assert!(matches!(UniformizationParams::compute(&d), Err(Error::NotSmallStep(_))));
    }

    #[test]
    fn integer_detection() {
        assert_eq!(as_integer(13.0 + 1e-11), Some(13));
        assert_eq!(as_integer(13.1), None);
    }
}
