mod common;

use common::*;
use quarter_walk::compensation::{
    boundary_harmonic, build_sequence, canonicalize_start, escape_probability, escape_sequence, BoundarySequence,
};
use quarter_walk::CurveGeometry;

fn geom(d: &quarter_walk::StepDistribution) -> CurveGeometry {
    CurveGeometry::new(d).unwrap()
}

#[test]
fn fibonacci_escape_matches_exact_series() {
    let g = geom(&fibonacci());
    let seq = escape_sequence(&g, 1e-15, 2).unwrap();
    for &(i, j) in &[(1, 1), (3, 2), (2, 5), (4, 4), (1, 7)] {
        let h = seq.harmonic_eval(i, j).unwrap();
        let oracle = fibonacci_series_exact(i, j, 12);
        assert!((h.value - oracle).abs() < 1e-13, "({i},{j}): {} vs {oracle}", h.value);
    }
    let h = seq.harmonic_eval(1, 1).unwrap();
    assert!((h.value - 0.17317).abs() < 1e-5);
}

#[test]
fn fibonacci_far_from_the_corner() {
    let g = geom(&fibonacci());
    let h = escape_probability(&g, 10, 10, 1e-15).unwrap();
    let two_terms = 1.0 - 2.0 / 2f64.powi(10) + 2.0 / 10f64.powi(10);
    assert!((h.value - two_terms).abs() < 1e-12, "{}", h.value);
    assert!((h.value - 0.998047).abs() < 1e-6);
}

#[test]
fn escape_increases_along_the_diagonal() {
    let g = geom(&fibonacci());
    let seq = escape_sequence(&g, 1e-15, 2).unwrap();
    let mut prev = 0.0;
    for i in 1..30 {
        let v = seq.harmonic_eval(i, i).unwrap().value;
        assert!(v > prev && v <= 1.0 + 1e-15);
        prev = v;
    }
    assert!(1.0 - prev < 1e-8);
}

#[test]
fn harmonicity_residuals() {
    for d in [fibonacci(), five_small_steps(), strong_diagonal(), big_jumps(), lopsided()] {
        let g = geom(&d);
        let seq = escape_sequence(&g, 1e-14, 2).unwrap();
        let mut worst: f64 = 0.0;
        for i in 1..=20 {
            for j in 1..=20 {
                worst = worst.max(seq.harmonicity_residual(&g, i, j).abs());
            }
        }
        assert!(worst <= 1e-10, "residual {worst:e}");
    }
}

#[test]
fn dirichlet_and_positivity() {
    for d in [fibonacci(), five_small_steps(), strong_diagonal(), big_jumps()] {
        let g = geom(&d);
        let seq = escape_sequence(&g, 1e-14, 2).unwrap();
        for k in 0..=50 {
            assert_eq!(seq.harmonic_eval(k, 0).unwrap().value, 0.0);
            assert_eq!(seq.harmonic_eval(0, k).unwrap().value, 0.0);
        }
        for i in 1..=20 {
            for j in 1..=20 {
                let h = seq.harmonic_eval(i, j).unwrap();
                assert!(h.value > 0.0, "h({i},{j}) = {}", h.value);
            }
        }
    }
}

#[test]
fn sequence_invariants() {
    for d in [fibonacci(), five_small_steps(), strong_diagonal(), big_jumps(), lopsided()] {
        let g = geom(&d);
        let x = 0.3 * g.x0;
        let start = (x, g.f_branch(x).unwrap());
        let seq = build_sequence(&g, start, 1e-15, 2).unwrap();
        let d = g.c1 + g.c2;
        let (lo, hi) = (seq.first_index(), seq.last_index());
        for n in lo..=hi {
            let (a, b, a_next) = (seq.a(n).unwrap(), seq.b(n).unwrap(), seq.a(n + 1).unwrap());
            assert!(g.log_kernel(a, b).abs() < 1e-12);
            assert!(g.log_kernel(a_next, b).abs() < 1e-12);
            if n >= 0 {
                assert!(b > a_next);
                if n < hi {
                    assert!(a_next > seq.b(n + 1).unwrap());
                }
            }
            if n >= 1 {
                assert!(seq.a(n).unwrap() - a_next >= d - 1e-12);
                assert!(b - seq.b(n + 1).map_or(f64::NEG_INFINITY, |v| v) >= d - 1e-12);
                // Envelope from the first step.
                let steps = (n - 1) as f64;
                assert!(a <= seq.a(1).unwrap() - steps * d + 1e-12);
                assert!(b <= seq.b(1).unwrap() - steps * d + 1e-12);
            }
            if n <= -1 {
                // a_{n+1} > b_n > a_n going backwards.
                assert!(a_next > b && b > a);
            }
        }
    }
}

#[test]
fn start_is_independent_of_orbit_representative() {
    let g = geom(&five_small_steps());
    let y = 0.4 * g.y0;
    let start = (g.g_branch(y).unwrap(), y);
    let seq = build_sequence(&g, start, 1e-15, 2).unwrap();
    // One forward step leaves the arc; canonicalization returns to it.
    for n in [1, 2, 3] {
        let point = (seq.a(n).unwrap(), seq.b(n).unwrap());
        let back = canonicalize_start(&g, point).unwrap();
        assert!((back.0 - start.0).abs() < 1e-11 && (back.1 - start.1).abs() < 1e-11, "{back:?}");
        let other = build_sequence(&g, back, 1e-15, 2).unwrap();
        for &(i, j) in &[(1, 1), (2, 3), (7, 4)] {
            let u = seq.harmonic_eval(i, j).unwrap().value;
            let v = other.harmonic_eval(i, j).unwrap().value;
            assert!((u - v).abs() < 1e-13);
        }
    }
}

#[test]
fn canonicalization_from_the_lower_branch() {
    let g = geom(&fibonacci());
    let x = g.x0 - g.c1 - g.c2;
    let point = (x, g.f_branch(x).unwrap());
    let start = canonicalize_start(&g, point).unwrap();
    assert!(g.in_g0(start));
    let seq = build_sequence(&g, start, 1e-15, 2).unwrap();
    let found = (seq.first_index()..=seq.last_index())
        .any(|n| (seq.a(n + 1).unwrap() - point.0).abs() < 1e-11 && (seq.b(n).unwrap() - point.1).abs() < 1e-11);
    assert!(found);
    // Positive first coordinate is projected onto the decreasing branch.
    let y = 0.5 * g.y0;
    let a = g.g_branch(y).unwrap();
    let lower = g.g_hat(a).unwrap();
    let start = canonicalize_start(&g, (a, lower)).unwrap();
    assert!((start.1 - y).abs() < 1e-11 && start.0 == a);
}

fn fibonacci_boundary_oracle(i: u32, j: u32) -> f64 {
    let s5 = 5f64.sqrt();
    let rho = (3.0 + s5) / 2.0;
    let value = |k: i32| s5 / (rho.powi(k) + rho.powi(-k));
    let slope = |k: i32| {
        let (p, q) = (rho.powi(k), rho.powi(-k));
        -s5 * (p - q) / ((p + q) * (p + q))
    };
    let (fi, fj) = (f64::from(i), f64::from(j));
    let mut total = 0.0;
    for n in -15..=15 {
        let (al, dal) = (value(2 * n), slope(2 * n));
        let (an, dan) = (value(2 * n + 2), slope(2 * n + 2));
        let (be, dbe) = (value(2 * n + 1), slope(2 * n + 1));
        total += fi * (dal * al.powf(fi - 1.0) - dan * an.powf(fi - 1.0)) * be.powf(fj)
            + fj * (al.powf(fi) - an.powf(fi)) * dbe * be.powf(fj - 1.0);
    }
    total * (-3.0 / s5)
}

#[test]
fn boundary_harmonic_matches_fibonacci_closed_form() {
    let g = geom(&fibonacci());
    for &(i, j) in &[(1, 1), (2, 3), (5, 5), (1, 5)] {
        let v = boundary_harmonic(&g, i, j, 1e-15).unwrap();
        let oracle = fibonacci_boundary_oracle(i, j);
        assert!((v - oracle).abs() < 1e-10, "({i},{j}): {v} vs {oracle}");
    }
}

fn richardson(g: &CurveGeometry, i: u32, j: u32) -> f64 {
    let quotient = |delta: f64| {
        let y = g.y0 + delta;
        let start = (g.g_branch(y).unwrap(), y);
        let seq = build_sequence(g, start, 1e-16, 2).unwrap();
        seq.harmonic_eval_unchecked(i, j).value / delta
    };
    (10.0 * quotient(1e-4) - quotient(1e-3)) / 9.0
}

#[test]
fn boundary_harmonic_matches_finite_differences() {
    for d in [fibonacci(), five_small_steps(), lopsided()] {
        let g = geom(&d);
        let seq = BoundarySequence::build(&g, 1e-15, 2).unwrap();
        for &(i, j) in &[(1, 1), (2, 3), (5, 5)] {
            let analytic = seq.eval(i, j);
            let numeric = richardson(&g, i, j);
            assert!((analytic - numeric).abs() < 1e-6, "({i},{j}): {analytic} vs {numeric}");
        }
    }
}

#[test]
fn boundary_harmonic_is_nonnegative_and_harmonic() {
    for d in [fibonacci(), five_small_steps(), strong_diagonal(), big_jumps()] {
        let g = geom(&d);
        let seq = BoundarySequence::build(&g, 1e-15, 2).unwrap();
        for &(i, j) in &[(1, 1), (1, 5), (5, 1), (3, 3)] {
            assert!(seq.eval(i, j) >= 0.0);
        }
        let t = |i: i64, j: i64| if i <= 0 || j <= 0 { 0.0 } else { seq.eval(i as u32, j as u32) };
        for i in 1..=10i64 {
            for j in 1..=10i64 {
                let mean: f64 = g
                    .dist()
                    .support()
                    .iter()
                    .map(|s| s.p * t(i + i64::from(s.di), j + i64::from(s.dj)))
                    .sum();
                assert!((t(i, j) - mean).abs() <= 1e-8, "({i},{j})");
            }
        }
    }
}
