//! Exit from the upper half-plane for walks whose vertical steps go down by
//! at most one.

use crate::curve::CramerData;
use crate::error::{Error, Result};
use crate::model::StepDistribution;

use super::{mean_and_error, path_rng, run_paths, SimConfig, SimEstimate, Walker};

fn vertical_law(dist: &StepDistribution, twist: Option<&CramerData>) -> StepDistribution {
    match twist {
        Some(c) => dist.tilted(c.phi),
        None => dist.clone(),
    }
}

/// Root `c` in `(0, 1)` of `E[c^{S_2}] = 1` under the (possibly tilted)
/// law. Started at height `z`, the vertical coordinate ever reaches zero with
/// probability `c^z`. Returns `1` when the vertical drift is not positive and
/// `0` when the walk never moves down.
pub fn skipfree_exit_root(dist: &StepDistribution, twist: Option<&CramerData>) -> Result<f64> {
    let law = vertical_law(dist, twist);
    let support = law.support();
    if support.iter().any(|s| s.dj < -1) {
        return Err(Error::Domain("vertical steps below -1 are not skip-free".into()));
    }
    let drift: f64 = support.iter().map(|s| s.p * f64::from(s.dj)).sum();
    if drift <= 0.0 {
        return Ok(1.0);
    }
    if !support.iter().any(|s| s.dj == -1) {
        return Ok(0.0);
    }
    let value = |c: f64| -> f64 { support.iter().map(|s| s.p * c.powi(s.dj)).sum::<f64>() - 1.0 };
    let slope = |c: f64| -> f64 { support.iter().map(|s| s.p * f64::from(s.dj) * c.powi(s.dj - 1)).sum() };
    // The function is convex on (0, 1] with value 0 and positive slope at 1;
    // its minimizer separates the root from 1.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let min_at = 0.5 * (lo + hi);
    if value(min_at) >= 0.0 {
        return Err(Error::NoRoot("exit equation has no root below 1".into()));
    }
    let (mut pos, mut neg) = (0.0, min_at);
    for _ in 0..200 {
        let mid = 0.5 * (pos + neg);
        if mid == pos || mid == neg {
            break;
        }
        if value(mid) > 0.0 {
            pos = mid;
        } else {
            neg = mid;
        }
    }
    Ok(0.5 * (pos + neg))
}

/// Estimates the probability that the vertical coordinate, started at
/// `height`, stays positive for `cfg.horizon` steps.
pub fn estimate_halfplane_survival(dist: &StepDistribution, height: i64, cfg: &SimConfig) -> Result<SimEstimate> {
    if height < 1 {
        return Err(Error::Domain(format!("height {height} must be positive")));
    }
    let law = vertical_law(dist, cfg.twist.as_ref());
    let walker = Walker::new(&law)?;
    let horizon = cfg.horizon;
    let survived = run_paths(cfg.n_paths, |k| {
        let mut rng = path_rng(cfg.seed, k);
        let mut j = height;
        for t in 0..horizon {
            if j > (horizon - t) as i64 {
                return true;
            }
            j += walker.draw(&mut rng).1;
            if j <= 0 {
                return false;
            }
        }
        true
    });
    let (mean, std_error) = mean_and_error(survived.iter().map(|&s| f64::from(u8::from(s))), cfg.n_paths);
    Ok(SimEstimate {
        mean,
        std_error,
        n_paths: cfg.n_paths,
        horizon,
        censored_fraction: 0.0,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_root() {
        let d = StepDistribution::parse("1 1 1/3\n1 -1 1/3\n-1 1 1/3").unwrap();
        let c = skipfree_exit_root(&d, None).unwrap();
        assert!((c - 0.5).abs() < 1e-14);
        let p = 2.0 * c * c - 3.0 * c + 1.0;
        assert!(p.abs() < 1e-14);
    }

    #[test]
    fn no_upward_drift() {
        let d = StepDistribution::parse("1 1 1/4\n1 -1 1/2\n-1 1 1/4").unwrap();
        assert_eq!(skipfree_exit_root(&d, None).unwrap(), 1.0);
    }
}
