//! Bracketed scalar root finding shared by the curve and skip-free solvers.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 400;
const NEWTON_POLISH: usize = 5;

/// Root of `f` between `neg` (where `f < 0`) and `pos` (where `f >= 0`).
///
/// Bisects until the bracket is narrower than `width` (or cannot be split in
/// floating point), then applies at most five Newton steps with `df`, each
/// accepted only while it stays inside the final bracket.
pub(crate) fn bracketed_root<F, D>(f: F, df: D, mut neg: f64, mut pos: f64, width: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(neg.is_finite() && pos.is_finite()) {
        return Err(Error::NoRoot(format!("non-finite bracket [{neg}, {pos}]")));
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (neg + pos);
        if (pos - neg).abs() <= width || mid == neg || mid == pos {
            break;
        }
        let v = f(mid);
        if v.is_nan() {
            return Err(Error::NoRoot(format!("function is NaN at {mid}")));
        }
        if v < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::Convergence {
                what: "bisection".into(),
                iterations,
            });
        }
    }
    let (lo, hi) = if neg < pos { (neg, pos) } else { (pos, neg) };
    let mut x = 0.5 * (neg + pos);
    for _ in 0..NEWTON_POLISH {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = f(x) / d;
        let next = x - step;
        if !(lo..=hi).contains(&next) {
            break;
        }
        x = next;
        if step.abs() <= f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Walks from `start` in direction `dir` with doubling increments until
/// `pred` holds; returns the first point satisfying it.
pub(crate) fn expand_until<P>(start: f64, dir: f64, first: f64, pred: P, what: &str) -> Result<f64>
where
    P: Fn(f64) -> bool,
{
    let mut h = first;
    for _ in 0..64 {
        let x = start + dir * h;
        if pred(x) {
            return Ok(x);
        }
        h *= 2.0;
    }
    Err(Error::NoRoot(format!("could not bracket {what}")))
}
