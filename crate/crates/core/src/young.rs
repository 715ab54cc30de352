//! Young functions and their calculus.
//!
//! A Young function is convex, even, nonnegative and vanishes only at 0. The
//! built-in families cover the power scale, a power-log scale and the
//! non-doubling `exp(-1/t^2)` function spliced onto an exponential tail.
//! Arbitrary functions can be supplied as closures through
//! [`YoungFunction::custom`].
//!
//! The convex conjugate is always computed numerically, so every family,
//! including custom ones, goes through the same code path.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default splice point of the exp-inverse-square family: the inflection
/// point of `exp(-1/t^2)`.
pub fn default_splice() -> f64 {
    (2.0f64 / 3.0).sqrt()
}

/// Threshold on `phi(2t)/phi(t)` above which a grid is declared non-doubling.
pub const DEFAULT_EXPLOSION_THRESHOLD: f64 = 1e12;

const CONJUGATE_REL_TOL: f64 = 1e-10;
const BRACKET_LIMIT: f64 = 1e300;
const FD_REL_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum YoungError {
    #[error("argument is not finite: {0}")]
    NonFinite(f64),
    #[error("invalid parameter for {family}: {reason}")]
    InvalidParameter { family: &'static str, reason: String },
    #[error("conjugate at s = {s} is infinite: slope stayed nonnegative up to t = 1e300")]
    BracketOverflow { s: f64 },
    #[error("cannot parse Young function spec `{0}`")]
    Parse(String),
}

/// Serializable description of a built-in family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum YoungSpec {
    /// `|t|^p`
    Power { p: f64 },
    /// `|t|^p / p`
    PowerOverP { p: f64 },
    /// `exp(-1/t^2)` up to the splice point, `alpha + beta e^{|t|}` beyond.
    ExpInverseSquare { splice: f64 },
    /// `|t|^p ln(e + |t|)^a`
    PowerLog { p: f64, a: f64 },
}

impl YoungSpec {
    pub fn build(&self) -> Result<YoungFunction, YoungError> {
        match *self {
            YoungSpec::Power { p } => YoungFunction::power(p),
            YoungSpec::PowerOverP { p } => YoungFunction::power_over_p(p),
            YoungSpec::ExpInverseSquare { splice } => YoungFunction::exp_inverse_square_with(splice),
            YoungSpec::PowerLog { p, a } => YoungFunction::power_log(p, a),
        }
    }
}

impl fmt::Display for YoungSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YoungSpec::Power { p } => write!(f, "power:{p}"),
            YoungSpec::PowerOverP { p } => write!(f, "pop:{p}"),
            YoungSpec::ExpInverseSquare { splice } => {
                if (*splice - default_splice()).abs() < 1e-15 {
                    write!(f, "expinvsq")
                } else {
                    write!(f, "expinvsq:{splice}")
                }
            }
            YoungSpec::PowerLog { p, a } => write!(f, "powerlog:{p},{a}"),
        }
    }
}

/// Parses the command-line syntax: `power:2`, `pop:3`, `expinvsq`,
/// `expinvsq:0.7`, `powerlog:2,1`.
impl FromStr for YoungSpec {
    type Err = YoungError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || YoungError::Parse(s.to_string());
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let nums = |a: Option<&str>| -> Result<Vec<f64>, YoungError> {
            match a {
                None => Ok(Vec::new()),
                Some(a) => a
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| err()))
                    .collect(),
            }
        };
        let v = nums(args)?;
        match (name, v.as_slice()) {
            ("power", [p]) => Ok(YoungSpec::Power { p: *p }),
            ("pop", [p]) => Ok(YoungSpec::PowerOverP { p: *p }),
            ("expinvsq", []) => Ok(YoungSpec::ExpInverseSquare { splice: default_splice() }),
            ("expinvsq", [t]) => Ok(YoungSpec::ExpInverseSquare { splice: *t }),
            ("powerlog", [p, a]) => Ok(YoungSpec::PowerLog { p: *p, a: *a }),
            _ => Err(err()),
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Family {
    Power(f64),
    PowerOverP(f64),
    ExpInverseSquare { splice: f64, alpha: f64, beta: f64 },
    PowerLog { p: f64, a: f64 },
    Custom { name: String, eval: ScalarFn, deriv: Option<ScalarFn> },
}

/// A Young function. Cheap to clone; immutable after construction.
#[derive(Clone)]
pub struct YoungFunction {
    family: Family,
}

impl fmt::Debug for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn check_exponent(family: &'static str, p: f64) -> Result<(), YoungError> {
    if !p.is_finite() || p < 1.0 {
        return Err(YoungError::InvalidParameter {
            family,
            reason: format!("exponent must be finite and >= 1, got {p}"),
        });
    }
    Ok(())
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self, YoungError> {
        check_exponent("power", p)?;
        Ok(Self { family: Family::Power(p) })
    }

    pub fn power_over_p(p: f64) -> Result<Self, YoungError> {
        check_exponent("pop", p)?;
        Ok(Self { family: Family::PowerOverP(p) })
    }

    /// `exp(-1/t^2)` with the default splice point `sqrt(2/3)`.
    pub fn exp_inverse_square() -> Self {
        Self::exp_inverse_square_with(default_splice()).expect("default splice is valid")
    }

    /// `exp(-1/t^2)` on `|t| <= splice`, continued by `alpha + beta e^{|t|}`
    /// with `alpha`, `beta` chosen for C^1 matching. The splice must lie in
    /// `(0, sqrt(2/3)]`, where `exp(-1/t^2)` is convex.
    pub fn exp_inverse_square_with(splice: f64) -> Result<Self, YoungError> {
        if !(splice > 0.0 && splice <= default_splice() + 1e-15) {
            return Err(YoungError::InvalidParameter {
                family: "expinvsq",
                reason: format!("splice point must lie in (0, sqrt(2/3)], got {splice}"),
            });
        }
        let value = (-1.0 / (splice * splice)).exp();
        let slope = 2.0 / splice.powi(3) * value;
        let beta = slope * (-splice).exp();
        let alpha = value - slope;
        Ok(Self { family: Family::ExpInverseSquare { splice, alpha, beta } })
    }

    /// `|t|^p ln(e + |t|)^a`, `p >= 1`, `a >= 0`.
    pub fn power_log(p: f64, a: f64) -> Result<Self, YoungError> {
        check_exponent("powerlog", p)?;
        if !a.is_finite() || a < 0.0 {
            return Err(YoungError::InvalidParameter {
                family: "powerlog",
                reason: format!("log exponent must be finite and >= 0, got {a}"),
            });
        }
        Ok(Self { family: Family::PowerLog { p, a } })
    }

    /// A user-supplied function. `eval` is applied to `|t|`; when `deriv` is
    /// absent a central finite difference is used. Convexity is not checked.
    pub fn custom<E>(name: impl Into<String>, eval: E, deriv: Option<ScalarFn>) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            family: Family::Custom { name: name.into(), eval: Arc::new(eval), deriv },
        }
    }

    /// `lambda * phi`, used for the norm-scaling comparison.
    pub fn scaled(&self, lambda: f64) -> Self {
        let inner = self.clone();
        let inner_d = self.clone();
        Self::custom(
            format!("{lambda}*{}", self.name()),
            move |t| lambda * inner.eval(t),
            Some(Arc::new(move |t| lambda * inner_d.derivative(t))),
        )
    }

    /// The numeric convex conjugate as a Young function; infinite values are
    /// returned as `f64::INFINITY`.
    pub fn conjugate(&self) -> Self {
        let inner = self.clone();
        Self::custom(format!("conj({})", self.name()), move |s| inner.conjugate_or_infinite(s), None)
    }

    /// The serializable description, `None` for custom functions.
    pub fn spec(&self) -> Option<YoungSpec> {
        match self.family {
            Family::Power(p) => Some(YoungSpec::Power { p }),
            Family::PowerOverP(p) => Some(YoungSpec::PowerOverP { p }),
            Family::ExpInverseSquare { splice, .. } => Some(YoungSpec::ExpInverseSquare { splice }),
            Family::PowerLog { p, a } => Some(YoungSpec::PowerLog { p, a }),
            Family::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Custom { name, .. } => name.clone(),
            _ => self.spec().map(|s| s.to_string()).unwrap_or_default(),
        }
    }

    /// Splice constants `(splice, alpha, beta)` of the exp-inverse-square family.
    pub fn splice_constants(&self) -> Option<(f64, f64, f64)> {
        match self.family {
            Family::ExpInverseSquare { splice, alpha, beta } => Some((splice, alpha, beta)),
            _ => None,
        }
    }

    /// True for families that satisfy a global doubling condition.
    pub fn is_builtin_doubling(&self) -> bool {
        matches!(self.family, Family::Power(_) | Family::PowerOverP(_) | Family::PowerLog { .. })
    }

    /// `phi(|t|)`. The argument must be finite; see [`checked_eval`](Self::checked_eval).
    pub fn eval(&self, t: f64) -> f64 {
        let x = t.abs();
        if x == 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Power(p) => x.powf(*p),
            Family::PowerOverP(p) => x.powf(*p) / p,
            Family::ExpInverseSquare { splice, alpha, beta } => {
                if x <= *splice {
                    (-1.0 / (x * x)).exp()
                } else {
                    alpha + beta * x.exp()
                }
            }
            Family::PowerLog { p, a } => x.powf(*p) * (std::f64::consts::E + x).ln().powf(*a),
            Family::Custom { eval, .. } => eval(x),
        }
    }

    pub fn checked_eval(&self, t: f64) -> Result<f64, YoungError> {
        if !t.is_finite() {
            return Err(YoungError::NonFinite(t));
        }
        Ok(self.eval(t))
    }

    /// One-sided derivative extended oddly, with `phi'(0) = 0`.
    pub fn derivative(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let x = t.abs();
        let sign = t.signum();
        let d = match &self.family {
            Family::Power(p) => p * x.powf(p - 1.0),
            Family::PowerOverP(p) => x.powf(p - 1.0),
            Family::ExpInverseSquare { splice, beta, .. } => {
                if x <= *splice {
                    // 2/x^3 * exp(-1/x^2), in log form to avoid inf * 0
                    (std::f64::consts::LN_2 - 3.0 * x.ln() - 1.0 / (x * x)).exp()
                } else {
                    beta * x.exp()
                }
            }
            Family::PowerLog { p, a } => {
                let l = (std::f64::consts::E + x).ln();
                p * x.powf(p - 1.0) * l.powf(*a)
                    + if *a == 0.0 { 0.0 } else { x.powf(*p) * a * l.powf(a - 1.0) / (std::f64::consts::E + x) }
            }
            Family::Custom { deriv: Some(d), .. } => return d(t),
            Family::Custom { eval, deriv: None, .. } => {
                let h = FD_REL_STEP * x.max(1.0);
                // eval is even, so evaluate on |.| directly
                (eval((x + h).abs()) - eval((x - h).abs())) / (2.0 * h)
            }
        };
        sign * d
    }

    /// `psi(s) = sup_{t >= 0} (t|s| - phi(t))`, computed numerically.
    ///
    /// The maximizer is bracketed by doubling (and halving) `t` on the sign of
    /// the slope `|s| - phi'(t)`, then located by ternary search to relative
    /// tolerance 1e-10.
    pub fn conjugate_eval(&self, s: f64) -> Result<f64, YoungError> {
        if !s.is_finite() {
            return Err(YoungError::NonFinite(s));
        }
        let s = s.abs();
        if s == 0.0 {
            return Ok(0.0);
        }
        let slope = |t: f64| s - self.derivative(t);
        let objective = |t: f64| t * s - self.eval(t);

        let mut hi = 1.0f64;
        let mut lo;
        if slope(hi) >= 0.0 {
            lo = hi;
            while slope(hi) >= 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > BRACKET_LIMIT {
                    return Err(YoungError::BracketOverflow { s });
                }
            }
        } else {
            loop {
                let half = hi * 0.5;
                if half < 1e-300 {
                    lo = 0.0;
                    break;
                }
                if slope(half) >= 0.0 {
                    lo = half;
                    break;
                }
                hi = half;
            }
        }

        for _ in 0..400 {
            if hi - lo <= CONJUGATE_REL_TOL * hi {
                break;
            }
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if objective(m1) < objective(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let t = 0.5 * (lo + hi);
        Ok(objective(t).max(objective(lo)).max(objective(hi)).max(0.0))
    }

    /// Like [`conjugate_eval`](Self::conjugate_eval) but maps an overflowing
    /// bracket to `+inf`.
    pub fn conjugate_or_infinite(&self, s: f64) -> f64 {
        self.conjugate_eval(s).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DoublingVerdict {
    DoublingOnGrid(f64),
    NotDoublingOnGrid,
}

/// Grid diagnostic for the doubling condition `phi(2t) <= D phi(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub grid: Vec<f64>,
    pub max_ratio: f64,
    pub ratio_argmax: f64,
    pub verdict: DoublingVerdict,
}

/// Max of `phi(2t)/phi(t)` over the grid with the default explosion threshold.
pub fn doubling_report(phi: &YoungFunction, grid: &[f64]) -> DoublingReport {
    doubling_report_with(phi, grid, DEFAULT_EXPLOSION_THRESHOLD)
}

/// A grid point where `phi(t)` underflows to zero counts as an infinite ratio.
pub fn doubling_report_with(phi: &YoungFunction, grid: &[f64], threshold: f64) -> DoublingReport {
    assert!(!grid.is_empty(), "doubling grid must be nonempty");
    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax = grid[0];
    for &t in grid {
        assert!(t > 0.0, "doubling grid entries must be positive");
        let base = phi.eval(t);
        let ratio = if base > 0.0 { phi.eval(2.0 * t) / base } else { f64::INFINITY };
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax = t;
        }
    }
    let verdict = if max_ratio > threshold {
        DoublingVerdict::NotDoublingOnGrid
    } else {
        DoublingVerdict::DoublingOnGrid(max_ratio)
    };
    DoublingReport { grid: grid.to_vec(), max_ratio, ratio_argmax: argmax, verdict }
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Residual of the Legendre identity `psi(phi'(t)) = t phi'(t) - phi(t)`.
///
/// Returned relative to `max(1, |t phi'(t) - phi(t)|)`: at large `t` both
/// sides are dominated by cancellation in `t phi'(t) - phi(t)`, so an
/// absolute residual would only measure floating-point noise.
pub fn young_identity_residual(phi: &YoungFunction, t: f64) -> Result<f64, YoungError> {
    let t = t.abs();
    let d = phi.derivative(t);
    let expected = t * d - phi.eval(t);
    let got = phi.conjugate_eval(d)?;
    Ok((got - expected).abs() / expected.abs().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BesovVerdict {
    ConvergentLikely,
    DivergentLikely,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovReport {
    pub dimension: u32,
    /// `(M, S_M)` at `M = 2^j` and at `m_max`.
    pub partial_sums: Vec<(u64, f64)>,
    /// Ratios of successive dyadic increments `S_{2M} - S_M`.
    pub increment_ratios: Vec<f64>,
    pub verdict: BesovVerdict,
}

const BESOV_REL_TAIL: f64 = 1e-6;
const BESOV_GROWTH: f64 = 1.01;
const BESOV_STABLE_WINDOW: usize = 4;
const BESOV_STABLE_SPREAD: f64 = 0.05;

/// Partial sums of `sum_m phi(1/m) m^{n-1}` with a tail heuristic.
///
/// Convergent when the last dyadic block adds less than 1e-6 of the sum, or
/// when the dyadic increments shrink by a stable factor at most `1/1.01`.
/// Divergent when they grow by a stable factor at least `1.01`.
pub fn besov_summability(phi: &YoungFunction, n: u32, m_max: u64) -> BesovReport {
    assert!(n >= 2, "dimension must be at least 2");
    assert!(m_max >= 100, "m_max must be at least 100");
    let mut sums = Vec::new();
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    let mut next_checkpoint = 1u64;
    for m in 1..=m_max {
        let mf = m as f64;
        let term = phi.eval(1.0 / mf) * mf.powi(n as i32 - 1);
        // Neumaier summation
        let t = acc + term;
        if acc.abs() >= term.abs() {
            comp += (acc - t) + term;
        } else {
            comp += (term - t) + acc;
        }
        acc = t;
        if m == next_checkpoint {
            sums.push((m, acc + comp));
            next_checkpoint *= 2;
        }
    }
    if sums.last().map(|&(m, _)| m) != Some(m_max) {
        sums.push((m_max, acc + comp));
    }

    // dyadic increments only (the trailing m_max point is not dyadic)
    let dyadic: Vec<f64> = sums.iter().filter(|(m, _)| m.is_power_of_two()).map(|&(_, s)| s).collect();
    let increments: Vec<f64> = dyadic.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = increments
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
        .collect();

    let total = sums.last().map(|&(_, s)| s).unwrap_or(0.0);
    let last_block = increments.last().copied().unwrap_or(f64::INFINITY);
    let window = &ratios[ratios.len().saturating_sub(BESOV_STABLE_WINDOW)..];
    let stable = window.len() == BESOV_STABLE_WINDOW && {
        let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi.is_finite() && hi - lo <= BESOV_STABLE_SPREAD * hi.max(1e-300)
    };

    let verdict = if total > 0.0 && last_block < BESOV_REL_TAIL * total {
        BesovVerdict::ConvergentLikely
    } else if stable && window.iter().all(|&r| r >= BESOV_GROWTH) {
        BesovVerdict::DivergentLikely
    } else if stable && window.iter().all(|&r| r <= 1.0 / BESOV_GROWTH) {
        BesovVerdict::ConvergentLikely
    } else {
        BesovVerdict::Inconclusive
    };
    BesovReport { dimension: n, partial_sums: sums, increment_ratios: ratios, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<YoungFunction> {
        vec![
            YoungFunction::power(1.5).unwrap(),
            YoungFunction::power(2.0).unwrap(),
            YoungFunction::power(3.0).unwrap(),
            YoungFunction::power_over_p(2.0).unwrap(),
            YoungFunction::power_over_p(3.0).unwrap(),
            YoungFunction::power_log(2.0, 1.0).unwrap(),
            YoungFunction::exp_inverse_square(),
        ]
    }

    #[test]
    fn eval_examples() {
        let sq = YoungFunction::power(2.0).unwrap();
        assert_eq!(sq.eval(3.0), 9.0);
        assert_eq!(sq.eval(0.0), 0.0);
        let e = YoungFunction::exp_inverse_square();
        let v = e.eval(0.1);
        assert!((v - (-100.0f64).exp()).abs() <= 1e-12 * v);
        assert!((v - 3.72e-44).abs() < 0.01e-44);
        assert!(sq.checked_eval(f64::NAN).is_err());
        assert!(sq.checked_eval(f64::INFINITY).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(YoungFunction::power_over_p(3.0).unwrap().derivative(2.0), 4.0);
        assert_eq!(YoungFunction::power(2.0).unwrap().derivative(-1.0), -2.0);
        let d = YoungFunction::exp_inverse_square().derivative(0.5);
        assert!((d - 16.0 * (-4.0f64).exp()).abs() < 1e-14);
        assert!((d - 0.29305).abs() < 1e-5);
        for phi in builtins() {
            assert_eq!(phi.derivative(0.0), 0.0);
        }
    }

    #[test]
    fn splice_is_c1() {
        let phi = YoungFunction::exp_inverse_square();
        let (t, _, _) = phi.splice_constants().unwrap();
        let h = 1e-9;
        assert!((phi.eval(t - h) - phi.eval(t + h)).abs() < 1e-8);
        assert!((phi.derivative(t - h) - phi.derivative(t + h)).abs() < 1e-7);
        assert!(YoungFunction::exp_inverse_square_with(0.9).is_err());
        assert!(YoungFunction::exp_inverse_square_with(0.0).is_err());
    }

    #[test]
    fn custom_uses_finite_differences() {
        let phi = YoungFunction::custom("cube", |t| t.powi(3), None);
        let d = phi.derivative(2.0);
        assert!((d - 12.0).abs() / 12.0 < 1e-6);
        assert!((phi.derivative(-2.0) + d).abs() < 1e-12);
    }

    #[test]
    fn conjugate_examples() {
        let pop2 = YoungFunction::power_over_p(2.0).unwrap();
        assert!((pop2.conjugate_eval(3.0).unwrap() - 4.5).abs() < 1e-9);
        for phi in builtins() {
            assert_eq!(phi.conjugate_eval(0.0).unwrap(), 0.0);
        }
        // dense-grid oracle for sup_t (2t - t^3/3)
        let oracle = (0..=400_000)
            .map(|i| {
                let t = i as f64 * 1e-5;
                2.0 * t - t.powi(3) / 3.0
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let pop3 = YoungFunction::power_over_p(3.0).unwrap();
        let got = pop3.conjugate_eval(2.0).unwrap();
        assert!((got - oracle).abs() < 1e-9);
        assert!((got - 2f64.powf(1.5) * 2.0 / 3.0).abs() < 1e-9);
        assert!((got - 1.8856).abs() < 1e-4);
    }

    #[test]
    fn conjugate_of_linear_growth_overflows() {
        let abs = YoungFunction::power(1.0).unwrap();
        assert!(matches!(abs.conjugate_eval(2.0), Err(YoungError::BracketOverflow { .. })));
        assert_eq!(abs.conjugate_or_infinite(2.0), f64::INFINITY);
        assert!(abs.conjugate_eval(0.5).unwrap() < 1e-12);
    }

    #[test]
    fn doubling_examples() {
        let sq = YoungFunction::power(2.0).unwrap();
        let r = doubling_report(&sq, &log_grid(1e-6, 1e6, 121));
        assert!((r.max_ratio - 4.0).abs() < 1e-12);
        assert!(matches!(r.verdict, DoublingVerdict::DoublingOnGrid(d) if (d - 4.0).abs() < 1e-12));
        for p in [1.5, 2.5, 3.0] {
            let r = doubling_report(&YoungFunction::power(p).unwrap(), &[0.3, 1.0, 7.0]);
            assert!((r.max_ratio - 2f64.powf(p)).abs() < 1e-12);
        }
        let e = YoungFunction::exp_inverse_square();
        let r = doubling_report(&e, &[0.05, 0.2, 1.0]);
        assert!(r.max_ratio >= 300f64.exp() * (1.0 - 1e-9));
        assert_eq!(r.ratio_argmax, 0.05);
        assert_eq!(r.verdict, DoublingVerdict::NotDoublingOnGrid);
    }

    #[test]
    fn identity_residual_examples() {
        let pop2 = YoungFunction::power_over_p(2.0).unwrap();
        assert!(young_identity_residual(&pop2, 1.7).unwrap() <= 1e-8);
        let pop3 = YoungFunction::power_over_p(3.0).unwrap();
        assert!(young_identity_residual(&pop3, 2.0).unwrap() <= 1e-8);
        for phi in builtins() {
            assert_eq!(young_identity_residual(&phi, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn besov_examples() {
        let verdict = |p: f64| besov_summability(&YoungFunction::power(p).unwrap(), 3, 1_000_000).verdict;
        assert_eq!(verdict(4.0), BesovVerdict::ConvergentLikely);
        assert_eq!(verdict(2.0), BesovVerdict::DivergentLikely);
        assert_ne!(verdict(3.0), BesovVerdict::ConvergentLikely);
    }

    #[test]
    fn spec_parse_and_display() {
        for s in ["power:2", "pop:3", "expinvsq", "powerlog:2,1"] {
            let spec: YoungSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
            assert!(spec.build().is_ok());
        }
        assert!("power".parse::<YoungSpec>().is_err());
        assert!("cosh:1".parse::<YoungSpec>().is_err());
        assert!("power:0.5".parse::<YoungSpec>().unwrap().build().is_err());
    }
}
