//! Transition density of Brownian motion with drift killed on leaving the
//! upper half-plane.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

use crate::error::{Error, Result};

const EIGEN_FLOOR: f64 = 1e-14;

struct Parts {
    /// `1 - e^{-2 x2 y2 / (t Sigma11)}` and its argument.
    reflection: f64,
    exponent: f64,
    /// Free Gaussian factor.
    gaussian: f64,
}

fn parts(t: f64, x: (f64, f64), y: (f64, f64), mu: (f64, f64), sigma: [[f64; 2]; 2]) -> Result<Parts> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time {t} must be positive")));
    }
    if x.1 < 0.0 || y.1 < 0.0 {
        return Err(Error::Domain("heights must be non-negative".into()));
    }
    let m = Matrix2::new(sigma[0][0], sigma[0][1], sigma[1][0], sigma[1][1]);
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 * m.abs().max() {
        return Err(Error::NotSpd);
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotSpd);
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(EIGEN_FLOOR).sqrt());
    let root = eig.eigenvectors * Matrix2::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let shift = Vector2::new(y.0 - x.0 - t * mu.0, y.1 - x.1 - t * mu.1);
    let z = root * shift;
    let det = m.determinant();
    let gaussian = (-z.norm_squared() / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t * det.sqrt());
    let exponent = 2.0 * x.1 * y.1 / (t * sigma[0][0]);
    Ok(Parts {
        reflection: -(-exponent).exp_m1(),
        exponent,
        gaussian,
    })
}

/// Density at `y` after time `t` of Brownian motion from `x` with drift `mu`
/// and covariance `sigma`, killed when the second coordinate hits zero.
pub fn brownian_halfplane_kernel(
    t: f64,
    x: (f64, f64),
    y: (f64, f64),
    mu: (f64, f64),
    sigma: [[f64; 2]; 2],
) -> Result<f64> {
    let p = parts(t, x, y, mu, sigma)?;
    Ok(p.reflection * p.gaussian)
}

/// The bound `2 x2 y2 / (t Sigma11)` times the free Gaussian factor, which
/// dominates the kernel and is equivalent to it when `x2 y2 / t` is small.
pub fn brownian_halfplane_bound(
    t: f64,
    x: (f64, f64),
    y: (f64, f64),
    mu: (f64, f64),
    sigma: [[f64; 2]; 2],
) -> Result<f64> {
    let p = parts(t, x, y, mu, sigma)?;
    Ok(p.exponent * p.gaussian)
}
