//! The zero set `{G(x, y) = 0}` of the log-kernel and its two branch
//! functions.
//!
//! `f(x)` is the upper root in `y` of `G(x, .)` for `x <= 0` and `g(y)` the
//! rightmost root in `x` of `G(., y)` for `y <= 0`. Both are concave with a
//! unique maximum, at `x0` and `y0` respectively. `g` is computed as `f` of the
//! transposed walk, so every branch routine below is written once for the
//! `f` orientation.

use crate::error::{Error, Result};
use crate::model::{require_valid, StepDistribution};
use crate::roots::{bracketed_root, expand_until};

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Distance tolerance for membership in the arc `G0`.
pub const G0_TOL: f64 = 1e-9;

/// Final bracket width of the branch bisections.
const BISECT_WIDTH: f64 = 1e-13;

/// Drift coordinates below this are treated as zero.
const DRIFT_FLOOR: f64 = 1e-10;

/// Roots and extremum of one branch, in the `f` orientation: the walk is
/// `dist`, the branch variable is `x` and the value is `y`.
#[derive(Debug, Clone)]
struct Branch {
    dist: StepDistribution,
    /// Argmax of the branch.
    top_arg: f64,
    /// Value of the branch at its argmax.
    top: f64,
    /// `top - top_arg`.
    gap: f64,
}

impl Branch {
    fn g(&self, x: f64, y: f64) -> f64 {
        self.dist.log_kernel_eval(x, y)
    }

    /// Upper root in `y` of `G(x, .)`, for `x <= 0`.
    fn value(dist: &StepDistribution, x: f64) -> Result<f64> {
        if x > 0.0 {
            return Err(Error::Domain(format!("branch argument {x} > 0")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let pos = expand_until(0.0, 1.0, 0.25, |y| dist.log_kernel_eval(x, y) >= 0.0, "branch value")?;
        bracketed_root(
            |y| dist.log_kernel_eval(x, y),
            |y| dist.log_kernel_grad(x, y).1,
            x,
            pos,
            BISECT_WIDTH,
        )
    }

    /// Slope `-G_x / G_y` of the curve at a point of it.
    fn slope_at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = self.dist.log_kernel_grad(x, y);
        -gx / gy
    }

    fn locate(dist: StepDistribution) -> Result<Branch> {
        let dx = |x: f64| -> Result<f64> {
            let y = Self::value(&dist, x)?;
            Ok(dist.log_kernel_grad(x, y).0)
        };
        // G_x(x, f(x)) > 0 right of the maximum and < 0 left of it.
        let mut hi = 0.0;
        let mut step = 0.25;
        let mut lo = None;
        for _ in 0..64 {
            let x = hi - step;
            if dx(x)? < 0.0 {
                lo = Some(x);
                break;
            }
            hi = x;
            step *= 2.0;
        }
        let mut lo = lo.ok_or_else(|| Error::Convergence {
            what: "bracketing the branch maximum".into(),
            iterations: 64,
        })?;
        let mut iterations = 0;
        while hi - lo > BISECT_WIDTH {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if dx(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if iterations > 400 {
                return Err(Error::Convergence {
                    what: "branch maximum".into(),
                    iterations,
                });
            }
        }
        let top_arg = 0.5 * (lo + hi);
        let top = Self::value(&dist, top_arg)?;
        Ok(Branch {
            dist,
            top_arg,
            top,
            gap: top - top_arg,
        })
    }

    /// Inverse on the increasing part: the smaller root in `x` of `G(., y)`.
    fn inverse_increasing(&self, y: f64, tol: f64) -> Result<f64> {
        if y > self.top + tol {
            return Err(Error::Domain(format!(
                "inverse branch argument {y} above maximum {}",
                self.top
            )));
        }
        if y >= self.top {
            return Ok(self.top_arg);
        }
        // (x0, f(x0)) - t (1, 1) lies inside the sublevel set for t > 0.
        let inside = y - self.gap;
        let outside = expand_until(inside, -1.0, 0.25, |x| self.g(x, y) >= 0.0, "inverse branch")?;
        bracketed_root(
            |x| self.g(x, y),
            |x| self.dist.log_kernel_grad(x, y).0,
            inside,
            outside,
            BISECT_WIDTH,
        )
    }

    /// Inverse on the decreasing part `(x0, 0]`, for `y` in `[0, top]`.
    fn inverse_decreasing(&self, y: f64, tol: f64) -> Result<f64> {
        if y < -tol || y > self.top + tol {
            return Err(Error::Domain(format!(
                "argument {y} outside [0, {}]",
                self.top
            )));
        }
        if y <= 0.0 {
            return Ok(0.0);
        }
        if y >= self.top {
            return Ok(self.top_arg);
        }
        let inside = y - self.gap;
        bracketed_root(
            |x| self.g(x, y),
            |x| self.dist.log_kernel_grad(x, y).0,
            inside,
            0.0,
            BISECT_WIDTH,
        )
    }

    /// Derivative of the increasing inverse at `y`, given `x = inverse(y)`.
    fn inverse_derivative(&self, x: f64, y: f64) -> f64 {
        1.0 / self.slope_at(x, y)
    }
}

/// Geometry of the curve of a walk whose drift lies strictly inside the
/// quarter plane.
#[derive(Debug, Clone)]
pub struct CurveGeometry {
    f_branch: Branch,
    g_branch: Branch,
    pub x0: f64,
    pub y0: f64,
    pub f_at_x0: f64,
    pub g_at_y0: f64,
    pub c1: f64,
    pub c2: f64,
    pub tol: f64,
}

/// Exponential change of measure pointing the drift towards `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CramerData {
    pub u: (f64, f64),
    pub phi: (f64, f64),
    pub mu_u: (f64, f64),
    pub sigma_u: [[f64; 2]; 2],
    pub r_u: f64,
}

impl CurveGeometry {
    /// Locates `x0`, `y0` and the gaps `c1`, `c2` of a validated model.
    pub fn find_extrema(dist: &StepDistribution, tol: f64) -> Result<CurveGeometry> {
        require_valid(dist)?;
        let drift = dist.drift();
        if drift.0 <= DRIFT_FLOOR || drift.1 <= DRIFT_FLOOR {
            return Err(Error::DriftNotInterior { drift });
        }
        let f_branch = Branch::locate(dist.clone())?;
        let g_branch = Branch::locate(dist.transpose())?;
        let geom = CurveGeometry {
            x0: f_branch.top_arg,
            f_at_x0: f_branch.top,
            c1: f_branch.gap,
            y0: g_branch.top_arg,
            g_at_y0: g_branch.top,
            c2: g_branch.gap,
            f_branch,
            g_branch,
            tol,
        };
        if !(geom.x0 < 0.0 && geom.y0 < 0.0 && geom.c1 > 0.0 && geom.c2 > 0.0) {
            return Err(Error::Convergence {
                what: format!("inconsistent extrema x0={} y0={}", geom.x0, geom.y0),
                iterations: 0,
            });
        }
        Ok(geom)
    }

    pub fn new(dist: &StepDistribution) -> Result<CurveGeometry> {
        Self::find_extrema(dist, DEFAULT_TOL)
    }

    pub fn dist(&self) -> &StepDistribution {
        &self.f_branch.dist
    }

    pub fn log_kernel(&self, x: f64, y: f64) -> f64 {
        self.dist().log_kernel_eval(x, y)
    }

    /// `f(x)` for `x <= 0`.
    pub fn f_branch(&self, x: f64) -> Result<f64> {
        Branch::value(&self.f_branch.dist, x)
    }

    /// `g(y)` for `y <= 0`.
    pub fn g_branch(&self, y: f64) -> Result<f64> {
        Branch::value(&self.g_branch.dist, y)
    }

    /// `f'(x)`.
    pub fn f_slope(&self, x: f64) -> Result<f64> {
        let y = self.f_branch(x)?;
        Ok(self.f_branch.slope_at(x, y))
    }

    /// `g'(y)`.
    pub fn g_slope(&self, y: f64) -> Result<f64> {
        let x = self.g_branch(y)?;
        Ok(self.g_branch.slope_at(y, x))
    }

    /// Inverse of `f` restricted to `(-inf, x0]`.
    pub fn f_hat(&self, y: f64) -> Result<f64> {
        self.f_branch.inverse_increasing(y, self.tol)
    }

    /// Inverse of `g` restricted to `(-inf, y0]`.
    pub fn g_hat(&self, x: f64) -> Result<f64> {
        self.g_branch.inverse_increasing(x, self.tol)
    }

    /// Inverse of `f` restricted to `[x0, 0]`.
    pub fn f_tilde(&self, y: f64) -> Result<f64> {
        self.f_branch.inverse_decreasing(y, self.tol)
    }

    /// Inverse of `g` restricted to `[y0, 0]`.
    pub fn g_tilde(&self, x: f64) -> Result<f64> {
        self.g_branch.inverse_decreasing(x, self.tol)
    }

    /// `f_hat'(y)` at `x = f_hat(y)`, by implicit differentiation.
    pub fn f_hat_derivative(&self, x: f64, y: f64) -> f64 {
        self.f_branch.inverse_derivative(x, y)
    }

    /// `g_hat'(x)` at `y = g_hat(x)`.
    pub fn g_hat_derivative(&self, x: f64, y: f64) -> f64 {
        self.g_branch.inverse_derivative(y, x)
    }

    /// Membership in the open arc `G0` (endpoint `(x0, f(x0))` and
    /// `(g(y0), y0)` excluded).
    pub fn in_g0(&self, point: (f64, f64)) -> bool {
        self.g0_distance(point, false) <= G0_TOL
    }

    /// Membership in the closure of `G0`.
    pub fn in_g0_closure(&self, point: (f64, f64)) -> bool {
        self.g0_distance(point, true) <= G0_TOL
    }

    fn g0_distance(&self, (px, py): (f64, f64), closed: bool) -> f64 {
        let mut best = f64::INFINITY;
        let on_f = if closed { px >= self.x0 } else { px > self.x0 };
        if on_f && px <= 0.0 {
            if let (Ok(fx), Ok(s)) = (self.f_branch(px), self.f_slope(px)) {
                best = best.min((py - fx).abs() / (1.0 + s * s).sqrt());
            }
        }
        let on_g = if closed { py >= self.y0 } else { py > self.y0 };
        if on_g && py <= 0.0 {
            if let (Ok(gy), Ok(s)) = (self.g_branch(py), self.g_slope(py)) {
                best = best.min((px - gy).abs() / (1.0 + s * s).sqrt());
            }
        }
        best
    }

    /// Point of the closed arc where the log-kernel gradient points along
    /// `u`.
    pub fn cramer_transform(&self, u: (f64, f64)) -> Result<CramerData> {
        let norm = u.0.hypot(u.1);
        if !(norm > 0.0) || u.0 < -1e-12 || u.1 < -1e-12 || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "direction {u:?} is not a unit vector of the closed first quadrant"
            )));
        }
        let u = (u.0.max(0.0) / norm, u.1.max(0.0) / norm);
        let target = u.1.atan2(u.0);
        let dist = self.dist();
        let angle = |x: f64, y: f64| {
            let (gx, gy) = dist.log_kernel_grad(x, y);
            gy.atan2(gx)
        };
        let drift_angle = angle(0.0, 0.0);
        let phi = if target >= drift_angle {
            // f side: the angle falls from pi/2 at x0 to the drift angle at 0.
            if u.0 == 0.0 {
                (self.x0, self.f_at_x0)
            } else {
                let x = bisect_monotone(
                    |x| {
                        let y = self.f_branch(x)?;
                        Ok(angle(x, y) - target)
                    },
                    self.x0,
                    0.0,
                )?;
                (x, self.f_branch(x)?)
            }
        } else if u.1 == 0.0 {
            (self.g_at_y0, self.y0)
        } else {
            // g side: the angle rises from 0 at y0 to the drift angle at 0.
            let y = bisect_monotone(
                |y| {
                    let x = self.g_branch(y)?;
                    Ok(target - angle(x, y))
                },
                self.y0,
                0.0,
            )?;
            (self.g_branch(y)?, y)
        };
        let mu_u = dist.log_kernel_grad(phi.0, phi.1);
        let (sxx, sxy, syy) = dist.log_kernel_hessian(phi.0, phi.1);
        let sigma_u = [
            [sxx - mu_u.0 * mu_u.0, sxy - mu_u.0 * mu_u.1],
            [sxy - mu_u.0 * mu_u.1, syy - mu_u.1 * mu_u.1],
        ];
        Ok(CramerData {
            u,
            phi,
            mu_u,
            sigma_u,
            r_u: mu_u.0.hypot(mu_u.1),
        })
    }
}

/// Root of a function that is positive at `lo` and negative at `hi`.
fn bisect_monotone<F>(h: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut iterations = 0;
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if h(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 400 {
            return Err(Error::Convergence {
                what: "gradient angle".into(),
                iterations,
            });
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> StepDistribution {
        StepDistribution::parse("1 1 1/3\n1 -1 1/3\n-1 1 1/3").unwrap()
    }

    fn fig2() -> StepDistribution {
        StepDistribution::from_ratios([((1, 1), (5, 6)), ((1, -1), (1, 12)), ((-1, 1), (1, 12))]).unwrap()
    }

    #[test]
    fn fibonacci_extrema_closed_form() {
        let g = CurveGeometry::new(&fib()).unwrap();
        let s5 = 5f64.sqrt();
        let x0 = (s5 / 3.0).ln();
        let fx0 = (s5 / 2.0).ln();
        assert!((g.x0 - x0).abs() < 1e-12, "{}", g.x0 - x0);
        assert!((g.y0 - x0).abs() < 1e-12);
        assert!((g.f_at_x0 - fx0).abs() < 1e-13);
        assert!((g.g_at_y0 - fx0).abs() < 1e-13);
        assert!((g.c1 - 1.5f64.ln()).abs() < 1e-12);
        assert!((g.c2 - 1.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn branch_values() {
        let g = CurveGeometry::new(&fib()).unwrap();
        assert_eq!(g.f_branch(0.0).unwrap(), 0.0);
        assert_eq!(g.g_branch(0.0).unwrap(), 0.0);
        let s5 = 5f64.sqrt();
        let v = g.f_branch((s5 / 3.0).ln()).unwrap();
        assert!((v - (s5 / 2.0).ln()).abs() < 1e-13);
        let v = g.g_branch((s5 / 3.0).ln()).unwrap();
        assert!((v - (s5 / 2.0).ln()).abs() < 1e-13);
        let a = g.f_branch(-5.0).unwrap();
        let b = g.f_branch(-6.0).unwrap();
        assert!(a < 0.0 && b < a);
        assert!(g.g_branch(-1e-3).unwrap() > 0.0);
        assert!(g.f_branch(0.1).is_err());
    }

    #[test]
    fn fibonacci_branch_by_quadratic() {
        // For x fixed, 3 e^x z^2 - ... : (e^x + e^{-x}) z^2 - 3 z + e^x = 0 with z = e^y.
        let g = CurveGeometry::new(&fib()).unwrap();
        for &x in &[-5.0, -2.0, -1.1, -0.5, -0.1] {
            let ex: f64 = f64::exp(x);
            let a = ex + 1.0 / ex;
            let disc = 9.0 - 4.0 * a * ex;
            let z = (3.0 + disc.sqrt()) / (2.0 * a);
            assert!((g.f_branch(x).unwrap() - z.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn fig2_extrema_by_grid_search() {
        let d = fig2();
        let g = CurveGeometry::new(&d).unwrap();
        assert!((g.x0 - g.y0).abs() < 1e-11);
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut x = -3.0;
        while x <= 0.0 {
            let v = g.f_branch(x).unwrap();
            if v > best.0 {
                best = (v, x);
            }
            x += 1e-4;
        }
        assert!((best.1 - g.x0).abs() < 2e-4);
        assert!((best.0 - g.f_at_x0).abs() < 1e-7);
    }

    #[test]
    fn zero_drift_is_rejected() {
        let d = StepDistribution::from_ratios([((1, -1), (1, 2)), ((-1, 1), (1, 2))]).unwrap();
        assert!(CurveGeometry::new(&d).is_err());
        let d = StepDistribution::from_ratios([((1, -1), (8, 10)), ((-1, 1), (1, 10)), ((1, 1), (1, 10))]).unwrap();
        assert!(matches!(CurveGeometry::new(&d), Err(Error::DriftNotInterior { .. })));
    }

    #[test]
    fn inverses() {
        let g = CurveGeometry::new(&fib()).unwrap();
        assert_eq!(g.f_hat(g.f_at_x0).unwrap(), g.x0);
        let x1 = g.f_hat(0.0).unwrap();
        assert!(x1 < g.x0);
        assert!(g.f_branch(x1).unwrap().abs() < 1e-12);
        // Fibonacci: f_hat(0) = log(1/2)
        assert!((x1 - 0.5f64.ln()).abs() < 1e-13);
        assert!(g.f_hat(g.f_at_x0 + 1e-6).is_err());
        assert_eq!(g.f_tilde(0.0).unwrap(), 0.0);
        assert_eq!(g.f_tilde(g.f_at_x0).unwrap(), g.x0);
        let y = 0.5 * (5f64.sqrt() / 2.0).ln();
        let x = g.f_tilde(y).unwrap();
        assert!(x > g.x0 && x < 0.0);
        assert!((g.f_branch(x).unwrap() - y).abs() < 1e-12);
        assert!(g.f_tilde(-0.1).is_err());
        assert!(g.f_tilde(g.f_at_x0 + 0.1).is_err());
    }

    #[test]
    fn g0_membership() {
        let g = CurveGeometry::new(&fib()).unwrap();
        assert!(g.in_g0((0.0, 0.0)));
        assert!(!g.in_g0((g.x0, g.f_at_x0)));
        assert!(g.in_g0_closure((g.x0, g.f_at_x0)));
        let x = g.x0 - 0.5;
        assert!(!g.in_g0((x, g.f_branch(x).unwrap())));
        let x = 0.5 * g.x0;
        assert!(g.in_g0((x, g.f_branch(x).unwrap())));
        let y = 0.5 * g.y0;
        assert!(g.in_g0((g.g_branch(y).unwrap(), y)));
    }

    #[test]
    fn cramer_examples() {
        let g = CurveGeometry::new(&fib()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = g.cramer_transform((r, r)).unwrap();
        assert!(c.phi.0.abs() < 1e-10 && c.phi.1.abs() < 1e-10, "{:?}", c.phi);
        assert!((c.mu_u.0 - 1.0 / 3.0).abs() < 1e-10);
        let s5 = 5f64.sqrt();
        let c = g.cramer_transform((0.0, 1.0)).unwrap();
        assert!((c.phi.0 - (s5 / 3.0).ln()).abs() < 1e-12);
        assert!((c.phi.1 - (s5 / 2.0).ln()).abs() < 1e-12);
        assert!(g.dist().log_kernel_grad(c.phi.0, c.phi.1).0.abs() < 1e-12);
        let c = g.cramer_transform((1.0, 0.0)).unwrap();
        assert!((c.phi.0 - (s5 / 2.0).ln()).abs() < 1e-12);
        assert!((c.phi.1 - (s5 / 3.0).ln()).abs() < 1e-12);
        assert!(g.cramer_transform((-0.6, 0.8)).is_err());
        assert!(g.cramer_transform((0.6, 0.6)).is_err());
    }
}
