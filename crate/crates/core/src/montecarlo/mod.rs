//! Monte Carlo estimators for exit events and Green functions of the walk.
//!
//! Path `k` of a run draws from the ChaCha8 stream `k` keyed by the run seed,
//! and paths are reduced in index order, so results do not depend on the
//! number of threads.

mod brownian;
mod skipfree;

pub use brownian::{brownian_halfplane_bound, brownian_halfplane_kernel};
pub use skipfree::{estimate_halfplane_survival, skipfree_exit_root};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::curve::{CramerData, CurveGeometry};
use crate::error::{Error, Result};
use crate::model::StepDistribution;
use crate::sum::CompensatedSum;

/// Paths per parallel batch; batches are reduced sequentially.
const BATCH: usize = 1 << 16;

/// Largest importance-weight exponent accepted.
const MAX_LOG_WEIGHT: f64 = 700.0;

/// Lattice point.
pub type Site = (i64, i64);

/// Parameters of a simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub horizon: usize,
    /// Sampling law for the Green estimators: the walk tilted by `phi`.
    pub twist: Option<CramerData>,
}

impl SimConfig {
    pub fn new(seed: u64, n_paths: usize, horizon: usize) -> Result<SimConfig> {
        if n_paths == 0 || horizon == 0 {
            return Err(Error::Domain("n_paths and horizon must be at least 1".into()));
        }
        Ok(SimConfig {
            seed,
            n_paths,
            horizon,
            twist: None,
        })
    }

    pub fn with_twist(mut self, twist: CramerData) -> SimConfig {
        self.twist = Some(twist);
        self
    }
}

/// Monte Carlo point estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub horizon: usize,
    /// Fraction of paths stopped by the horizon while the event was still
    /// undecided.
    pub censored_fraction: f64,
    pub seed: u64,
}

/// Default Green horizon, ten times the L1 distance between the points.
pub fn default_green_horizon(x: Site, y: Site) -> usize {
    (10 * ((y.0 - x.0).abs() + (y.1 - x.1).abs())).max(1) as usize
}

/// Step sampler with O(1) draws and O(1) probability lookups.
#[derive(Debug, Clone)]
pub(crate) struct Walker {
    steps: Vec<Site>,
    alias: WeightedAliasIndex<f64>,
    radius: i64,
    lookup: Vec<f64>,
}

impl Walker {
    pub(crate) fn new(dist: &StepDistribution) -> Result<Walker> {
        let support = dist.support();
        let steps: Vec<Site> = support.iter().map(|s| (i64::from(s.di), i64::from(s.dj))).collect();
        let alias = WeightedAliasIndex::new(support.iter().map(|s| s.p).collect())
            .map_err(|e| Error::InvalidModel(format!("cannot sample steps: {e}")))?;
        let radius = i64::from(dist.radius());
        let width = (2 * radius + 1) as usize;
        let mut lookup = vec![0.0; width * width];
        for s in support {
            let k = ((i64::from(s.di) + radius) as usize) * width + (i64::from(s.dj) + radius) as usize;
            lookup[k] = s.p;
        }
        Ok(Walker {
            steps,
            alias,
            radius,
            lookup,
        })
    }

    #[inline]
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> Site {
        self.steps[self.alias.sample(rng)]
    }

    /// Probability of the increment `d`.
    #[inline]
    fn prob(&self, d: Site) -> f64 {
        let r = self.radius;
        if d.0.abs() > r || d.1.abs() > r {
            return 0.0;
        }
        let width = (2 * r + 1) as usize;
        self.lookup[((d.0 + r) as usize) * width + (d.1 + r) as usize]
    }
}

/// Independent random stream of path `index`.
pub(crate) fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `path` for every index and reduces the outputs in index order.
pub(crate) fn run_paths<T, F>(n_paths: usize, path: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let mut out = Vec::with_capacity(n_paths);
    let mut start = 0;
    while start < n_paths {
        let end = (start + BATCH).min(n_paths);
        let batch: Vec<T> = (start..end).into_par_iter().map(&path).collect();
        out.extend(batch);
        start = end;
    }
    out
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_error(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().collect::<CompensatedSum>().value() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.map(|v| (v - mean) * (v - mean)).collect::<CompensatedSum>().value();
    (mean, (ss / (nf - 1.0) / nf).sqrt())
}

fn check_interior(site: Site, what: &str) -> Result<()> {
    if site.0 < 1 || site.1 < 1 {
        return Err(Error::Domain(format!("{what} {site:?} is not in the open quadrant")));
    }
    Ok(())
}

/// Estimates `P(tau_x > horizon)`, the probability of staying in the open
/// quadrant for `horizon` steps, with plain sampling of the walk. This is an
/// upper bound on the escape probability `P(tau_x = infinity)`.
pub fn estimate_escape(dist: &StepDistribution, x: Site, cfg: &SimConfig) -> Result<SimEstimate> {
    check_interior(x, "start")?;
    let walker = Walker::new(dist)?;
    let down = walker.steps.iter().map(|s| -s.0.min(s.1)).max().unwrap_or(0).max(0);
    let horizon = cfg.horizon;
    let survived = run_paths(cfg.n_paths, |k| {
        let mut rng = path_rng(cfg.seed, k);
        let (mut i, mut j) = x;
        for t in 0..horizon {
            // The remaining steps cannot reach an axis.
            if i.min(j) > (horizon - t) as i64 * down {
                return true;
            }
            let (di, dj) = walker.draw(&mut rng);
            i += di;
            j += dj;
            if i <= 0 || j <= 0 {
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

/// Per-path contribution to the Green function of a set of targets.
struct GreenSampler {
    /// Law of the increments under the sampling measure.
    twisted: Walker,
    phi: (f64, f64),
    log_norm: f64,
    horizon: usize,
}

/// Outcome of one path: weighted visit count and whether the horizon cut it.
#[derive(Debug, Clone, Copy)]
struct PathGreen {
    value: f64,
    censored: bool,
}

impl GreenSampler {
    fn new(dist: &StepDistribution, cfg: &SimConfig) -> Result<GreenSampler> {
        let (twisted, phi, log_norm) = match &cfg.twist {
            Some(c) => {
                let z = dist.moment(c.phi.0, c.phi.1);
                (Walker::new(&dist.tilted(c.phi))?, c.phi, z.ln())
            }
            None => (Walker::new(dist)?, (0.0, 0.0), 0.0),
        };
        Ok(GreenSampler {
            twisted,
            phi,
            log_norm,
            horizon: cfg.horizon,
        })
    }

    /// Expected visits to `targets` within the horizon, conditioned on the
    /// path up to the step before each visit, and reweighted to the
    /// untwisted law.
    fn path(&self, rng: &mut ChaCha8Rng, x: Site, targets: &[Site]) -> Result<PathGreen> {
        let level = targets.iter().map(|t| t.0 + t.1).max().unwrap_or(0);
        let mut acc = 0.0;
        for &t in targets {
            if t == x {
                acc += 1.0;
            }
        }
        let mut pos = x;
        for k in 0..self.horizon {
            // i + j never decreases, so targets below the current level are
            // out of reach.
            if pos.0 + pos.1 > level {
                return Ok(PathGreen {
                    value: acc,
                    censored: false,
                });
            }
            for &t in targets {
                let d = (t.0 - pos.0, t.1 - pos.1);
                let q = self.twisted.prob(d);
                if q > 0.0 {
                    let shift = self.phi.0 * (t.0 - x.0) as f64 + self.phi.1 * (t.1 - x.1) as f64;
                    if shift.abs() > MAX_LOG_WEIGHT {
                        return Err(Error::WeightOverflow(shift));
                    }
                    acc += q * (-shift + (k + 1) as f64 * self.log_norm).exp();
                }
            }
            let (di, dj) = self.twisted.draw(rng);
            pos = (pos.0 + di, pos.1 + dj);
            if pos.0 <= 0 || pos.1 <= 0 {
                return Ok(PathGreen {
                    value: acc,
                    censored: false,
                });
            }
        }
        let reachable = pos.0 + pos.1 <= level;
        Ok(PathGreen {
            value: acc,
            censored: reachable,
        })
    }
}

fn green_targets(
    dist: &StepDistribution,
    x: Site,
    targets: &[Site],
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    check_interior(x, "start")?;
    for &t in targets {
        check_interior(t, "target")?;
    }
    let sampler = GreenSampler::new(dist, cfg)?;
    let paths = run_paths(cfg.n_paths, |k| {
        let mut rng = path_rng(cfg.seed, k);
        sampler.path(&mut rng, x, targets)
    });
    let paths: Vec<PathGreen> = paths.into_iter().collect::<Result<_>>()?;
    let (mean, std_error) = mean_and_error(paths.iter().map(|p| p.value), cfg.n_paths);
    let censored = paths.iter().filter(|p| p.censored).count();
    Ok(SimEstimate {
        mean,
        std_error,
        n_paths: cfg.n_paths,
        horizon: cfg.horizon,
        censored_fraction: censored as f64 / cfg.n_paths as f64,
        seed: cfg.seed,
    })
}

/// Estimates the Green function `G(x, y)`, the expected number of visits to
/// `y` before leaving the quadrant, truncated at `cfg.horizon` steps.
///
/// Each path contributes `sum_k q(y - S_k)` over the times `k` it is alive,
/// which has the same mean as the visit count and a smaller variance. With a
/// twist, paths follow the tilted law `q` and carry the likelihood ratio
/// `e^{-<phi, y - x>}`.
pub fn estimate_green(dist: &StepDistribution, x: Site, y: Site, cfg: &SimConfig) -> Result<SimEstimate> {
    green_targets(dist, x, &[y], cfg)
}

/// Green function of the two-site cell `{y, y + (1, 0)}`, halved.
///
/// Walks whose steps preserve a parity class of the lattice reach only one
/// of the two sites from a given start; averaging over the cell gives a
/// kernel that compares starts of different classes.
pub fn estimate_cell_green(dist: &StepDistribution, x: Site, y: Site, cfg: &SimConfig) -> Result<SimEstimate> {
    let mut est = green_targets(dist, x, &[y, (y.0 + 1, y.1)], cfg)?;
    est.mean *= 0.5;
    est.std_error *= 0.5;
    Ok(est)
}

/// Reference point of the Martin kernel.
pub const MARTIN_REFERENCE: Site = (1, 1);

/// Estimates the Martin kernel `G(x, y) / G((1, 1), y)` with the cell Green
/// function of [`estimate_cell_green`]. Numerator and denominator paths share
/// their random streams; the standard error is from the delta method.
pub fn martin_kernel_estimate(dist: &StepDistribution, x: Site, y: Site, cfg: &SimConfig) -> Result<SimEstimate> {
    check_interior(x, "start")?;
    check_interior(y, "target")?;
    let sampler = GreenSampler::new(dist, cfg)?;
    let cell = [y, (y.0 + 1, y.1)];
    let pairs = run_paths(cfg.n_paths, |k| -> Result<(PathGreen, PathGreen)> {
        let top = sampler.path(&mut path_rng(cfg.seed, k), x, &cell)?;
        let bottom = sampler.path(&mut path_rng(cfg.seed, k), MARTIN_REFERENCE, &cell)?;
        Ok((top, bottom))
    });
    let pairs: Vec<(PathGreen, PathGreen)> = pairs.into_iter().collect::<Result<_>>()?;
    let n = cfg.n_paths;
    let num = pairs.iter().map(|p| p.0.value).collect::<CompensatedSum>().value() / n as f64;
    let den = pairs.iter().map(|p| p.1.value).collect::<CompensatedSum>().value() / n as f64;
    if den == 0.0 {
        return Err(Error::Degenerate(format!(
            "no path from the reference point reached {y:?} within {} steps",
            cfg.horizon
        )));
    }
    let ratio = num / den;
    let (_, resid_se) = mean_and_error(pairs.iter().map(|p| p.0.value - ratio * p.1.value), n);
    let censored = pairs.iter().filter(|p| p.0.censored || p.1.censored).count();
    Ok(SimEstimate {
        mean: ratio,
        std_error: resid_se / den,
        n_paths: n,
        horizon: cfg.horizon,
        censored_fraction: censored as f64 / n as f64,
        seed: cfg.seed,
    })
}

/// One row of a directional Green scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub radius: f64,
    pub y: Site,
    /// `|y|`.
    pub norm: f64,
    /// `sqrt(|y|) e^{-<phi, x - y>} G(x, y)`.
    pub scaled: f64,
    pub std_error: f64,
    pub phi: (f64, f64),
}

/// Scans `y = round(r u)` over the given radii, sampling under the tilt
/// pointing towards each `y`, and reports the Green function of the cell at
/// `y` rescaled by `sqrt(|y|) e^{<phi, y - x>}`; the rescaled values level
/// off as `|y|` grows.
pub fn green_direction_scan(
    dist: &StepDistribution,
    x: Site,
    u: (f64, f64),
    radii: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<ScanPoint>> {
    if !(u.0 > 0.0 && u.1 > 0.0) {
        return Err(Error::Domain(format!("direction {u:?} must have positive coordinates")));
    }
    let norm_u = u.0.hypot(u.1);
    let u = (u.0 / norm_u, u.1 / norm_u);
    let geom = CurveGeometry::new(dist)?;
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let y = ((r * u.0).round() as i64, (r * u.1).round() as i64);
        check_interior(y, "target")?;
        let norm = (y.0 as f64).hypot(y.1 as f64);
        let twist = geom.cramer_transform((y.0 as f64 / norm, y.1 as f64 / norm))?;
        let phi = twist.phi;
        let run = SimConfig {
            twist: Some(twist),
            ..cfg.clone()
        };
        let est = estimate_cell_green(dist, x, y, &run)?;
        let shift = phi.0 * (y.0 - x.0) as f64 + phi.1 * (y.1 - x.1) as f64;
        let factor = norm.sqrt() * shift.exp();
        out.push(ScanPoint {
            radius: r,
            y,
            norm,
            scaled: factor * est.mean,
            std_error: factor * est.std_error,
            phi,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> StepDistribution {
        StepDistribution::parse("1 1 1/3\n1 -1 1/3\n-1 1 1/3").unwrap()
    }

    #[test]
    fn reproducible() {
        let cfg = SimConfig::new(7, 2000, 200).unwrap();
        let a = estimate_escape(&fib(), (1, 1), &cfg).unwrap();
        let b = estimate_escape(&fib(), (1, 1), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unreachable_target_is_zero() {
        let cfg = SimConfig::new(1, 500, 5).unwrap();
        let est = estimate_green(&fib(), (1, 1), (9, 9), &cfg).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn reference_ratio_is_one() {
        let cfg = SimConfig::new(3, 1000, 100).unwrap();
        let est = martin_kernel_estimate(&fib(), (1, 1), (4, 4), &cfg).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn rejects_boundary_points() {
        let cfg = SimConfig::new(3, 10, 10).unwrap();
        assert!(estimate_escape(&fib(), (0, 1), &cfg).is_err());
        assert!(estimate_green(&fib(), (1, 1), (1, 0), &cfg).is_err());
        assert!(SimConfig::new(1, 0, 1).is_err());
    }
}
