#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use quarter_walk::StepDistribution;

pub fn fibonacci() -> StepDistribution {
    StepDistribution::parse("1 1 1/3\n1 -1 1/3\n-1 1 1/3").unwrap()
}

pub fn five_small_steps() -> StepDistribution {
    StepDistribution::parse("1 1 1/5\n1 -1 1/5\n-1 1 1/5\n1 0 1/5\n0 1 1/5").unwrap()
}

pub fn strong_diagonal() -> StepDistribution {
    StepDistribution::parse("1 1 5/6\n1 -1 1/12\n-1 1 1/12").unwrap()
}

pub fn big_jumps() -> StepDistribution {
    let steps = [(2, 1), (2, 2), (2, 0), (1, 2), (0, 2), (-1, 2), (2, -1), (1, -1), (-1, 1)];
    StepDistribution::from_ratios(steps.iter().map(|&k| (k, (1, 9)))).unwrap()
}

/// Asymmetric small-step law with both one-step axis moves.
pub fn lopsided() -> StepDistribution {
    StepDistribution::parse("1 1 0.3\n1 -1 0.25\n-1 1 0.15\n1 0 0.2\n0 1 0.1").unwrap()
}

/// Fibonacci number with the usual extension to negative indices.
pub fn fib_number(k: i64) -> BigInt {
    let m = k.unsigned_abs();
    let (mut x, mut y) = (BigInt::zero(), BigInt::one());
    for _ in 0..m {
        let z = &x + &y;
        x = y;
        y = z;
    }
    if k < 0 && m.is_multiple_of(2) {
        -x
    } else {
        x
    }
}

/// Exact escape series of the Fibonacci walk, `alpha_n = 1/|F(4n-1)|`,
/// `beta_n = 1/|F(4n+1)|`, summed for `|n| <= terms` in rational arithmetic.
pub fn fibonacci_series_exact(i: u32, j: u32, terms: i64) -> f64 {
    let recip = |k: i64| BigRational::new(BigInt::one(), fib_number(k).abs());
    let pow = |x: &BigRational, e: u32| -> BigRational { num_traits::pow(x.clone(), e as usize) };
    let mut total = BigRational::zero();
    for n in -terms..=terms {
        let alpha = recip(4 * n - 1);
        let alpha_next = recip(4 * n + 3);
        let beta = recip(4 * n + 1);
        total += (pow(&alpha, i) - pow(&alpha_next, i)) * pow(&beta, j);
    }
    total.to_f64().unwrap()
}
