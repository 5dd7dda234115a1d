//! Bilateral compensation sequences and the positive harmonic functions
//! they generate.
//!
//! Starting from a point `(a0, b0)` of the arc `G0`, the sequence alternates
//! the increasing branch inverses: `a_{n+1} = f_hat(b_n)`, `b_{n+1} =
//! g_hat(a_{n+1})` forwards and `b_{n-1} = g_hat(a_n)`, `a_{n-1} =
//! f_hat(b_{n-1})` backwards. Every `e^{i a + j b}` built from two
//! neighbouring coordinates is harmonic, and the alternating series
//!
//! `h(i, j) = sum_n e^{i a_n + j b_n} - e^{i a_{n+1} + j b_n}`
//!
//! vanishes on both axes.

use crate::curve::CurveGeometry;
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Hard cap on the number of terms on either side of the start.
pub const MAX_TERMS: usize = 10_000;

/// Default truncation tolerance of the series.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-15;

/// Residual tolerance for accepting a point as lying on the curve.
const ON_CURVE_TOL: f64 = 1e-9;

const MAX_CANONICAL_STEPS: usize = 1000;

/// Truncated bilateral sequence `(a_n, b_n)`.
///
/// `a` is stored for `n` in `[-neg, pos + 1]` and `b` for `n` in
/// `[-neg, pos]`, so that every stored index has both of its terms.
#[derive(Debug, Clone)]
pub struct CompensationSequence {
    a: Vec<f64>,
    b: Vec<f64>,
    neg: usize,
    pos: usize,
    start: (f64, f64),
    gap: f64,
    truncation_tol: f64,
    imin: u32,
}

/// A series value together with a rigorous bound on the omitted tail.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
    pub note: Option<&'static str>,
}

impl CompensationSequence {
    /// Lowest stored index (`-N-`).
    pub fn first_index(&self) -> i64 {
        -(self.neg as i64)
    }

    /// Highest index with both terms stored (`N+`).
    pub fn last_index(&self) -> i64 {
        self.pos as i64
    }

    /// `a_n` for `n` in `[-N-, N+ + 1]`.
    pub fn a(&self, n: i64) -> Option<f64> {
        let k = n + self.neg as i64;
        (k >= 0).then(|| self.a.get(k as usize).copied()).flatten()
    }

    /// `b_n` for `n` in `[-N-, N+]`.
    pub fn b(&self, n: i64) -> Option<f64> {
        let k = n + self.neg as i64;
        (k >= 0).then(|| self.b.get(k as usize).copied()).flatten()
    }

    pub fn start(&self) -> (f64, f64) {
        self.start
    }

    /// `c1 + c2`, the minimal drop of either coordinate per step.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn truncation_tol(&self) -> f64 {
        self.truncation_tol
    }

    pub fn imin(&self) -> u32 {
        self.imin
    }

    /// Number of stored pairs.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Stored `(n, a_n, b_n)`.
    pub fn terms(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        self.b
            .iter()
            .enumerate()
            .map(move |(k, &b)| (k as i64 - self.neg as i64, self.a[k], b))
    }

    /// Bound on the omitted tail of `h(i, j)` for `i, j >= 1`.
    ///
    /// Beyond the stored range both coordinates drop by at least `c1 + c2`
    /// per index, so each side is dominated by a geometric series anchored at
    /// the outermost stored exponent.
    pub fn tail_bound(&self, i: u32, j: u32) -> f64 {
        let (fi, fj) = (f64::from(i), f64::from(j));
        let last = self.a.len() - 1;
        let upper = (fi * self.a[last] + fj * self.b[last - 1]).exp();
        let lower = (fi * self.a[0] + fj * self.b[0]).exp();
        (upper + lower) * side_ratio(self.gap, i, j)
    }

    /// `h(i, j)` from the stored terms.
    ///
    /// Fails with [`Error::Precision`] when the omitted tail could exceed the
    /// truncation tolerance.
    pub fn harmonic_eval(&self, i: u32, j: u32) -> Result<HarmonicValue> {
        let value = self.harmonic_eval_unchecked(i, j);
        if value.tail_bound > self.truncation_tol {
            return Err(Error::Precision {
                i,
                j,
                value: value.value,
                tail_bound: value.tail_bound,
                tol: self.truncation_tol,
            });
        }
        Ok(value)
    }

    /// `h(i, j)` without the tolerance check.
    pub fn harmonic_eval_unchecked(&self, i: u32, j: u32) -> HarmonicValue {
        if i == 0 || j == 0 {
            // Grouping by b_n (i = 0) or by a_n (j = 0) makes every group
            // cancel exactly.
            return HarmonicValue {
                value: 0.0,
                tail_bound: 0.0,
                terms_used: self.len(),
                note: (i == 0 && j == 0).then_some("both boundary identities apply at the origin"),
            };
        }
        let (fi, fj) = (f64::from(i), f64::from(j));
        let term = |k: usize| {
            let (a, a_next, b) = (self.a[k], self.a[k + 1], self.b[k]);
            (fi * a_next + fj * b).exp() * (fi * (a - a_next)).exp_m1()
        };
        // Outermost terms first, alternating sides.
        let mut acc = CompensatedSum::new();
        let (mut lo, mut hi) = (0usize, self.b.len() - 1);
        let centre = self.neg;
        while lo < centre || hi > centre {
            if centre - lo >= hi - centre {
                acc.add(term(lo));
                lo += 1;
            } else {
                acc.add(term(hi));
                hi -= 1;
            }
        }
        acc.add(term(centre));
        HarmonicValue {
            value: acc.value(),
            tail_bound: self.tail_bound(i, j),
            terms_used: self.len(),
            note: None,
        }
    }

    /// Residual `h(i, j) - sum_s p_s h((i, j) + s)`; non-positive shifted
    /// coordinates count as zero.
    pub fn harmonicity_residual(&self, geom: &CurveGeometry, i: u32, j: u32) -> f64 {
        let h = |i: i64, j: i64| -> f64 {
            if i <= 0 || j <= 0 {
                0.0
            } else {
                self.harmonic_eval_unchecked(i as u32, j as u32).value
            }
        };
        let mut acc = CompensatedSum::new();
        acc.add(h(i64::from(i), i64::from(j)));
        for s in geom.dist().support() {
            acc.add(-s.p * h(i64::from(i) + i64::from(s.di), i64::from(j) + i64::from(s.dj)));
        }
        acc.value()
    }
}

/// Maps a point of the curve to the point of its orbit on the arc `G0`.
pub fn canonicalize_start(geom: &CurveGeometry, point: (f64, f64)) -> Result<(f64, f64)> {
    let residual = geom.log_kernel(point.0, point.1);
    if !(residual.abs() <= ON_CURVE_TOL) {
        return Err(Error::Domain(format!(
            "point {point:?} is not on the curve (residual {residual:e})"
        )));
    }
    let endpoints = [(geom.x0, geom.f_at_x0), (geom.g_at_y0, geom.y0)];
    let (mut a, mut b) = point;
    for _ in 0..MAX_CANONICAL_STEPS {
        if endpoints
            .iter()
            .any(|e| (e.0 - a).abs() <= ON_CURVE_TOL && (e.1 - b).abs() <= ON_CURVE_TOL)
        {
            return Err(Error::Degenerate(format!(
                "orbit of {point:?} ends at an endpoint of the arc, where the series vanishes"
            )));
        }
        if geom.in_g0((a, b)) {
            return Ok((a, b));
        }
        if a > geom.x0 && a <= 0.0 {
            return Ok((a, geom.f_branch(a)?));
        }
        if b > geom.y0 && b <= 0.0 {
            return Ok((geom.g_branch(b)?, b));
        }
        if a >= 0.0 && a < geom.g_at_y0 {
            return Ok((a, geom.g_tilde(a)?));
        }
        if b >= 0.0 && b < geom.f_at_x0 {
            return Ok((geom.f_tilde(b)?, b));
        }
        if a > 0.0 || b > 0.0 {
            return Err(Error::Domain(format!("point {point:?} lies outside the curve's range")));
        }
        // Lower-left part: follow the orbit upwards.
        let on_f = (geom.f_branch(a)? - b).abs();
        let on_g = (geom.g_branch(b)? - a).abs();
        if on_f <= on_g {
            a = geom.g_branch(b)?;
        } else {
            b = geom.f_branch(a)?;
        }
    }
    Err(Error::Convergence {
        what: "canonicalizing a starting point".into(),
        iterations: MAX_CANONICAL_STEPS,
    })
}

/// Builds the sequence from `start` (a point of the closed arc), long enough
/// that the tail of `h(i, j)` is below `truncation_tol` whenever `i + j >=
/// imin`.
pub fn build_sequence(
    geom: &CurveGeometry,
    start: (f64, f64),
    truncation_tol: f64,
    imin: u32,
) -> Result<CompensationSequence> {
    if !geom.in_g0_closure(start) {
        return Err(Error::Domain(format!("start {start:?} is not on the arc G0")));
    }
    if !(truncation_tol > 0.0) {
        return Err(Error::Domain(format!("truncation tolerance {truncation_tol} must be positive")));
    }
    let imin = imin.max(2);
    let mut seq = CompensationSequence {
        a: vec![start.0, geom.f_hat(start.1)?],
        b: vec![start.1],
        neg: 0,
        pos: 0,
        start,
        gap: geom.c1 + geom.c2,
        truncation_tol,
        imin,
    };
    // Forward side.
    loop {
        if seq.pos >= 1 && side_bound(seq.gap, seq.a[seq.pos + 1], seq.b[seq.pos], imin) < truncation_tol {
            break;
        }
        if seq.pos >= MAX_TERMS {
            return Err(Error::Convergence {
                what: "forward compensation tail".into(),
                iterations: MAX_TERMS,
            });
        }
        let b_next = geom.g_hat(*seq.a.last().unwrap())?;
        seq.b.push(b_next);
        seq.a.push(geom.f_hat(b_next)?);
        seq.pos += 1;
    }
    // Backward side.
    let mut front_a = Vec::new();
    let mut front_b = Vec::new();
    let mut a_cur = start.0;
    loop {
        if let Some(&b_prev) = front_b.last() {
            if side_bound(seq.gap, a_cur, b_prev, imin) < truncation_tol {
                break;
            }
        }
        if front_a.len() >= MAX_TERMS {
            return Err(Error::Convergence {
                what: "backward compensation tail".into(),
                iterations: MAX_TERMS,
            });
        }
        let b_prev = geom.g_hat(a_cur)?;
        a_cur = geom.f_hat(b_prev)?;
        front_b.push(b_prev);
        front_a.push(a_cur);
    }
    seq.neg = front_a.len();
    front_a.reverse();
    front_b.reverse();
    front_a.extend_from_slice(&seq.a);
    front_b.extend_from_slice(&seq.b);
    seq.a = front_a;
    seq.b = front_b;
    Ok(seq)
}

fn side_ratio(gap: f64, i: u32, j: u32) -> f64 {
    let q = (-gap * f64::from(i + j)).exp();
    ((-gap * f64::from(j)).exp() + q) / (1.0 - q)
}

/// Largest one-sided tail bound over the cells with `i + j = imin`, anchored
/// at the outermost stored exponent `(a, b)`.
fn side_bound(gap: f64, a: f64, b: f64, imin: u32) -> f64 {
    (1..imin)
        .map(|i| {
            let j = imin - i;
            (f64::from(i) * a + f64::from(j) * b).exp() * side_ratio(gap, i, j)
        })
        .fold(0.0, f64::max)
}

/// The harmonic function with start `(0, 0)`; for a walk with interior
/// drift this is the probability of never leaving the quadrant.
pub fn escape_sequence(geom: &CurveGeometry, truncation_tol: f64, imin: u32) -> Result<CompensationSequence> {
    let drift = geom.dist().drift();
    if !(drift.0 > 0.0 && drift.1 > 0.0) {
        return Err(Error::DriftNotInterior { drift });
    }
    build_sequence(geom, (0.0, 0.0), truncation_tol, imin)
}

/// Probability that the walk started at `(i, j)` never leaves the open
/// quadrant.
pub fn escape_probability(geom: &CurveGeometry, i: u32, j: u32, truncation_tol: f64) -> Result<HarmonicValue> {
    let seq = escape_sequence(geom, truncation_tol, i + j)?;
    seq.harmonic_eval(i, j)
}

/// Forward half-sequence from the endpoint `(g(y0), y0)` together with the
/// derivatives of each coordinate with respect to the start height.
#[derive(Debug, Clone)]
pub struct BoundarySequence {
    /// `(a_n, a_n')` for `n = 0..=N + 1`.
    pub a: Vec<(f64, f64)>,
    /// `(b_n, b_n')` for `n = 0..=N`.
    pub b: Vec<(f64, f64)>,
}

impl BoundarySequence {
    pub fn build(geom: &CurveGeometry, truncation_tol: f64, imin: u32) -> Result<BoundarySequence> {
        let drift = geom.dist().drift();
        if !(drift.0 > 0.0 && drift.1 > 0.0) {
            return Err(Error::DriftNotInterior { drift });
        }
        let imin = f64::from(imin.max(2));
        let a0 = geom.g_at_y0;
        let b0 = geom.y0;
        let a0_slope = geom.g_slope(b0)?;
        let mut a = vec![(a0, a0_slope)];
        let mut b = vec![(b0, 1.0)];
        let push_a = |b_n: (f64, f64), a: &mut Vec<(f64, f64)>| -> Result<()> {
            let x = geom.f_hat(b_n.0)?;
            a.push((x, geom.f_hat_derivative(x, b_n.0) * b_n.1));
            Ok(())
        };
        push_a(b[0], &mut a)?;
        let mut small = 0;
        while b.len() < MAX_TERMS {
            let (an, dan) = *a.last().unwrap();
            let (bn, dbn) = *b.last().unwrap();
            // Size of the last pair at the smallest served exponent sum.
            let scale = (0.5 * imin * (an + bn)).exp() * (1.0 + dan.abs() + dbn.abs()) * imin;
            small = if scale < truncation_tol * 1e-2 { small + 1 } else { 0 };
            if small >= 3 || scale == 0.0 {
                return Ok(BoundarySequence { a, b });
            }
            let y = geom.g_hat(an)?;
            let next_b = (y, geom.g_hat_derivative(an, y) * dan);
            b.push(next_b);
            push_a(next_b, &mut a)?;
        }
        Err(Error::Convergence {
            what: "boundary derivative series".into(),
            iterations: MAX_TERMS,
        })
    }

    /// `2 t'_{ij}(y0)`, the limit of `h_y(i, j) / (y - y0)` as the start
    /// height `y` decreases to `y0`.
    pub fn eval(&self, i: u32, j: u32) -> f64 {
        if i == 0 || j == 0 {
            return 0.0;
        }
        let (fi, fj) = (f64::from(i), f64::from(j));
        let mut acc = CompensatedSum::new();
        for n in (0..self.b.len()).rev() {
            let (a, da) = self.a[n];
            let (a_next, da_next) = self.a[n + 1];
            let (b, db) = self.b[n];
            acc.add((fi * da + fj * db) * (fi * a + fj * b).exp());
            acc.add(-(fi * da_next + fj * db) * (fi * a_next + fj * b).exp());
        }
        2.0 * acc.value()
    }
}

/// `2 t'_{ij}(y0)` for a single cell.
pub fn boundary_harmonic(geom: &CurveGeometry, i: u32, j: u32, truncation_tol: f64) -> Result<f64> {
    Ok(BoundarySequence::build(geom, truncation_tol, i + j)?.eval(i, j))
}
