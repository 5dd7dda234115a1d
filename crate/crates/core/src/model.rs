//! Step distributions of singular quarter-plane walks, their validation and
//! their kernel.
//!
//! A walk is described by finitely many integer steps `(di, dj)` with
//! probabilities `p(di, dj)`. Probabilities read from text are kept as exact
//! rationals next to their `f64` value so that normalization can be checked
//! without rounding.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest admissible `|di|` or `|dj|`.
pub const MAX_SUPPORT_RADIUS: i32 = 64;

/// Tolerance of the floating-point normalization check.
pub const NORM_TOL: f64 = 1e-12;

/// A step probability, exact when it was given as a decimal or a fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Probability {
    value: f64,
    exact: Option<BigRational>,
}

impl Probability {
    pub fn from_f64(value: f64) -> Self {
        Probability { value, exact: None }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_exact(exact: BigRational) -> Self {
        let value = ratio_to_f64(&exact);
        Probability {
            value,
            exact: Some(exact),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<&BigRational> {
        self.exact.as_ref()
    }

    /// Parses `a/b`, a plain decimal (`0.25`, `-1.5e-3`) or, failing both,
    /// any float literal (kept inexact).
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        if let Some((num, den)) = text.split_once('/') {
            let num: BigInt = num
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{text}`"))?;
            let den: BigInt = den
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{text}`"))?;
            if den.is_zero() {
                return Err(format!("zero denominator in `{text}`"));
            }
            return Ok(Self::from_exact(BigRational::new(num, den)));
        }
        if let Some(exact) = parse_decimal(text) {
            return Ok(Self::from_exact(exact));
        }
        text.parse::<f64>()
            .map(Self::from_f64)
            .map_err(|_| format!("cannot parse probability `{text}`"))
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{}", self.value),
        }
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact decimal parsing: `[+-]digits[.digits][e[+-]digits]`.
fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(r)
}

/// One atom of the step law, in the form used by the hot loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub di: i32,
    pub dj: i32,
    pub p: f64,
}

/// Finite law of the increments of the walk.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    steps: BTreeMap<(i32, i32), Probability>,
    support: Vec<Step>,
}

impl StepDistribution {
    /// Builds a distribution; duplicate keys, negative or non-finite
    /// probabilities and steps beyond [`MAX_SUPPORT_RADIUS`] are rejected.
    pub fn new<I>(steps: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((i32, i32), Probability)>,
    {
        let mut map = BTreeMap::new();
        for ((di, dj), p) in steps {
            if di.abs() > MAX_SUPPORT_RADIUS || dj.abs() > MAX_SUPPORT_RADIUS {
                return Err(Error::InvalidModel(format!(
                    "step ({di}, {dj}) exceeds support radius {MAX_SUPPORT_RADIUS}"
                )));
            }
            if !p.value().is_finite() || p.value() < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "probability {} of step ({di}, {dj}) is not a non-negative number",
                    p
                )));
            }
            if map.insert((di, dj), p).is_some() {
                return Err(Error::InvalidModel(format!("duplicate step ({di}, {dj})")));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidModel("empty step set".into()));
        }
        let support = map
            .iter()
            .filter(|(_, p)| p.value() > 0.0)
            .map(|(&(di, dj), p)| Step { di, dj, p: p.value() })
            .collect();
        Ok(StepDistribution {
            steps: map,
            support,
        })
    }

    pub fn from_f64<I>(steps: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((i32, i32), f64)>,
    {
        Self::new(steps.into_iter().map(|(k, p)| (k, Probability::from_f64(p))))
    }

    pub fn from_ratios<I>(steps: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((i32, i32), (i64, i64))>,
    {
        Self::new(
            steps
                .into_iter()
                .map(|(k, (n, d))| (k, Probability::from_ratio(n, d))),
        )
    }

    /// Parses the model file format: `#` comments, one `di dj p` per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<((i32, i32), Probability)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `di dj p`, found `{content}`"),
                });
            }
            let di: i32 = fields[0].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad step coordinate `{}`", fields[0]),
            })?;
            let dj: i32 = fields[1].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad step coordinate `{}`", fields[1]),
            })?;
            let p = Probability::parse(fields[2]).map_err(|message| Error::Parse { line, message })?;
            if entries.iter().any(|(k, _)| *k == (di, dj)) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate step ({di}, {dj})"),
                });
            }
            if p.value() < 0.0 {
                return Err(Error::Parse {
                    line,
                    message: format!("negative probability `{}`", fields[2]),
                });
            }
            entries.push(((di, dj), p));
        }
        if entries.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "no steps in model file".into(),
            });
        }
        Self::new(entries)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Steps with positive probability, in lexicographic order.
    pub fn support(&self) -> &[Step] {
        &self.support
    }

    pub fn entries(&self) -> impl Iterator<Item = ((i32, i32), &Probability)> {
        self.steps.iter().map(|(&k, p)| (k, p))
    }

    /// `p(di, dj)`, zero off the support.
    pub fn prob(&self, di: i32, dj: i32) -> f64 {
        self.steps.get(&(di, dj)).map_or(0.0, Probability::value)
    }

    pub fn is_exact(&self) -> bool {
        self.steps.values().all(|p| p.exact.is_some())
    }

    /// Largest coordinate magnitude over the support.
    pub fn radius(&self) -> i32 {
        self.support
            .iter()
            .map(|s| s.di.abs().max(s.dj.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Mirror image of the walk under `(i, j) -> (j, i)`.
    pub fn transpose(&self) -> StepDistribution {
        let steps = self.steps.iter().map(|(&(di, dj), p)| ((dj, di), p.clone()));
        StepDistribution::new(steps).expect("transpose of a valid distribution")
    }

    /// Copy with `p(0, 0)` removed and the rest renormalized. The lazy and the
    /// non-lazy walks share their harmonic functions.
    pub fn without_holding(&self) -> Result<StepDistribution> {
        let hold = self.steps.get(&(0, 0));
        let Some(hold) = hold else {
            return Ok(self.clone());
        };
        if hold.value() >= 1.0 {
            return Err(Error::InvalidModel("walk never moves".into()));
        }
        let entries = self.steps.iter().filter(|(k, _)| **k != (0, 0)).map(|(&k, p)| {
            let q = match (p.exact(), hold.exact()) {
                (Some(a), Some(h)) => Probability::from_exact(a / (BigRational::one() - h)),
                _ => Probability::from_f64(p.value() / (1.0 - hold.value())),
            };
            (k, q)
        });
        StepDistribution::new(entries)
    }

    /// Exponentially tilted law `p(s) e^{<phi, s>}`, renormalized so that it
    /// sums to one in floating point.
    pub fn tilted(&self, phi: (f64, f64)) -> StepDistribution {
        let weights: Vec<((i32, i32), f64)> = self
            .support
            .iter()
            .map(|s| ((s.di, s.dj), s.p * (phi.0 * s.di as f64 + phi.1 * s.dj as f64).exp()))
            .collect();
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        StepDistribution::from_f64(weights.into_iter().map(|(k, w)| (k, w / total)))
            .expect("tilt of a valid distribution")
    }

    /// `K(alpha, beta) = alpha beta (sum p alpha^i beta^j - 1)`.
    pub fn kernel_eval(&self, alpha: f64, beta: f64) -> Result<f64> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::Domain(format!(
                "kernel needs alpha, beta > 0, got ({alpha}, {beta})"
            )));
        }
        let sum: f64 = self
            .support
            .iter()
            .map(|s| s.p * alpha.powi(s.di) * beta.powi(s.dj))
            .sum();
        Ok(alpha * beta * (sum - 1.0))
    }

    /// `G(x, y) = sum p e^{kx + ly} - 1`, i.e. `K(e^x, e^y) e^{-x-y}`.
    pub fn log_kernel_eval(&self, x: f64, y: f64) -> f64 {
        self.moment(x, y) - 1.0
    }

    /// Moment generating function `sum p e^{kx + ly}`.
    pub fn moment(&self, x: f64, y: f64) -> f64 {
        self.support
            .iter()
            .map(|s| s.p * (s.di as f64 * x + s.dj as f64 * y).exp())
            .sum()
    }

    /// Gradient of the log-kernel, equal to the drift of the law tilted by
    /// `(x, y)`.
    pub fn log_kernel_grad(&self, x: f64, y: f64) -> (f64, f64) {
        self.support.iter().fold((0.0, 0.0), |(gx, gy), s| {
            let w = s.p * (s.di as f64 * x + s.dj as f64 * y).exp();
            (gx + s.di as f64 * w, gy + s.dj as f64 * w)
        })
    }

    /// Second moments `(sum k^2 w, sum k l w, sum l^2 w)` of the tilted weights.
    pub fn log_kernel_hessian(&self, x: f64, y: f64) -> (f64, f64, f64) {
        self.support.iter().fold((0.0, 0.0, 0.0), |(a, b, c), s| {
            let (k, l) = (s.di as f64, s.dj as f64);
            let w = s.p * (k * x + l * y).exp();
            (a + k * k * w, b + k * l * w, c + l * l * w)
        })
    }

    pub fn drift(&self) -> (f64, f64) {
        self.log_kernel_grad(0.0, 0.0)
    }

    /// Drift in exact arithmetic when every probability is rational.
    pub fn drift_exact(&self) -> Option<(BigRational, BigRational)> {
        let mut dx = BigRational::zero();
        let mut dy = BigRational::zero();
        for (&(di, dj), p) in &self.steps {
            let q = p.exact()?;
            dx += q * BigRational::from_integer(BigInt::from(di));
            dy += q * BigRational::from_integer(BigInt::from(dj));
        }
        Some((dx, dy))
    }

    /// Checks the standing assumptions on the walk. Violations are data.
    pub fn validate(&self) -> ModelValidationReport {
        validate_model(self)
    }
}

/// Identifier of a violated assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Norm,
    SmallNeg,
    Singular,
    CornerJumps,
    Nondegenerate,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::Norm => "norm",
            Rule::SmallNeg => "small_neg",
            Rule::Singular => "singular",
            Rule::CornerJumps => "corner_jumps",
            Rule::Nondegenerate => "nondegenerate",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelValidationReport {
    pub passed: bool,
    pub violations: Vec<(Rule, String)>,
    pub is_small_step: bool,
    /// Remarks that do not fail validation.
    pub notes: Vec<String>,
}

impl ModelValidationReport {
    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|(r, _)| *r == rule)
    }
}

const SMALL_STEPS: [(i32, i32); 6] = [(-1, 1), (1, -1), (1, 0), (0, 1), (1, 1), (0, 0)];

pub fn validate_model(dist: &StepDistribution) -> ModelValidationReport {
    let mut violations = Vec::new();
    let mut notes = Vec::new();

    if dist.is_exact() {
        let total: BigRational = dist.steps.values().filter_map(|p| p.exact()).sum();
        if !total.is_one() {
            violations.push((
                Rule::Norm,
                format!("probabilities sum to {}/{}, not 1", total.numer(), total.denom()),
            ));
        }
    } else {
        let total: f64 = dist.steps.values().map(Probability::value).sum();
        if (total - 1.0).abs() > NORM_TOL {
            violations.push((Rule::Norm, format!("probabilities sum to {total}, not 1")));
        }
    }

    let support = dist.support();
    let far: Vec<String> = support
        .iter()
        .filter(|s| s.di <= -2 || s.dj <= -2)
        .map(|s| format!("({}, {})", s.di, s.dj))
        .collect();
    if !far.is_empty() {
        violations.push((
            Rule::SmallNeg,
            format!("negative jumps below -1 at {}", far.join(", ")),
        ));
    }

    let forbidden: Vec<String> = [(-1, -1), (-1, 0), (0, -1)]
        .into_iter()
        .filter(|&(i, j)| dist.prob(i, j) > 0.0)
        .map(|(i, j)| format!("({i}, {j})"))
        .collect();
    if !forbidden.is_empty() {
        violations.push((
            Rule::Singular,
            format!("walk is not singular: positive mass at {}", forbidden.join(", ")),
        ));
    }

    if !(dist.prob(-1, 1) > 0.0 && dist.prob(1, -1) > 0.0) {
        violations.push((
            Rule::CornerJumps,
            "p(-1,1) p(1,-1) must be non-zero".to_string(),
        ));
    }

    if !support.iter().any(|s| s.di + s.dj > 0) {
        violations.push((
            Rule::Nondegenerate,
            "no step with i + j > 0".to_string(),
        ));
    }

    let is_small_step = support.iter().all(|s| SMALL_STEPS.contains(&(s.di, s.dj)));
    if dist.prob(0, 0) > 0.0 {
        notes.push("p(0,0) > 0: holding steps are accepted; closed forms use the walk without them".into());
    }

    ModelValidationReport {
        passed: violations.is_empty(),
        violations,
        is_small_step,
        notes,
    }
}

/// Returns an error unless the model passes every assumption.
pub fn require_valid(dist: &StepDistribution) -> Result<()> {
    let report = validate_model(dist);
    if report.passed {
        Ok(())
    } else {
        let ids: Vec<&str> = report.violations.iter().map(|(r, _)| r.id()).collect();
        Err(Error::InvalidModel(format!("violated: {}", ids.join(", "))))
    }
}
