//! Modulars and Luxemburg norms on finite weighted point sets.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::young::{YoungError, YoungFunction};

/// Relative tolerance of the Luxemburg bisection.
pub const NORM_REL_TOL: f64 = 1e-12;
/// Maximum bisection steps once the root is bracketed.
pub const MAX_BISECTION_STEPS: usize = 200;
const MAX_BRACKET_STEPS: usize = 2100;

#[derive(Debug, Error)]
pub enum OrliczError {
    #[error("values and weights differ in length ({values} vs {weights})")]
    LengthMismatch { values: usize, weights: usize },
    #[error("weight at index {index} is not strictly positive: {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("Luxemburg norm did not converge ({0})")]
    NonConvergence(&'static str),
    #[error("the two vectors live on different weights")]
    WeightMismatch,
    #[error(transparent)]
    Young(#[from] YoungError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A function on a finite measure space: values with the atom weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedVector {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedVector {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self, OrliczError> {
        if values.len() != weights.len() {
            return Err(OrliczError::LengthMismatch { values: values.len(), weights: weights.len() });
        }
        if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(OrliczError::NonPositiveWeight { index, weight });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(OrliczError::NonFiniteValue(i));
        }
        Ok(Self { values, weights })
    }

    /// Counting measure.
    pub fn unit_weights(values: Vec<f64>) -> Result<Self, OrliczError> {
        let n = values.len();
        Self::new(values, vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), weights: self.weights.clone() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, OrliczError> {
        if self.weights != other.weights {
            return Err(OrliczError::WeightMismatch);
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            weights: self.weights.clone(),
        })
    }

    /// Two-column CSV `value,weight`, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), OrliczError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for (v, wt) in self.values.iter().zip(&self.weights) {
            w.write_record([v.to_string(), wt.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, OrliczError> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 1;
            if rec.len() != 2 {
                return Err(OrliczError::Parse { line, reason: format!("expected 2 fields, found {}", rec.len()) });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| OrliczError::Parse { line, reason: format!("`{s}`: {e}") })
            };
            values.push(parse(&rec[0])?);
            weights.push(parse(&rec[1])?);
        }
        Self::new(values, weights)
    }
}

/// `rho_phi(f) = sum_i w_i phi(f_i)`.
pub fn modular(phi: &YoungFunction, f: &WeightedVector) -> f64 {
    modular_parts(phi, &f.values, &f.weights)
}

/// Modular on raw slices; `values` and `weights` must have equal length.
pub fn modular_parts(phi: &YoungFunction, values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    exec::sum_by(values.len(), |i| weights[i] * phi.eval(values[i]))
}

/// Modular of `values / alpha`.
pub fn scaled_modular(phi: &YoungFunction, values: &[f64], weights: &[f64], alpha: f64) -> f64 {
    let inv = 1.0 / alpha;
    exec::sum_by(values.len(), |i| weights[i] * phi.eval(values[i] * inv))
}

/// Outcome of a Luxemburg-norm bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEvaluation {
    pub norm: f64,
    /// `rho_phi(f / norm)`, which is at most 1 and equals 1 for continuous
    /// unbounded `phi`.
    pub modular_at_norm: f64,
    pub bisection_steps: usize,
}

/// `||f||_phi = inf { alpha > 0 : rho_phi(f / alpha) <= 1 }`.
pub fn luxemburg_norm(phi: &YoungFunction, f: &WeightedVector) -> Result<f64, OrliczError> {
    luxemburg_parts(phi, &f.values, &f.weights).map(|e| e.norm)
}

pub fn luxemburg_norm_detailed(phi: &YoungFunction, f: &WeightedVector) -> Result<NormEvaluation, OrliczError> {
    luxemburg_parts(phi, &f.values, &f.weights)
}

/// Luxemburg norm on raw slices.
///
/// `alpha -> rho(f/alpha)` is nonincreasing, so starting from `alpha = 1`
/// the bracket is doubled or halved until it straddles 1, then bisected to
/// relative tolerance [`NORM_REL_TOL`].
pub fn luxemburg_parts(phi: &YoungFunction, values: &[f64], weights: &[f64]) -> Result<NormEvaluation, OrliczError> {
    if values.iter().all(|&v| v == 0.0) {
        return Ok(NormEvaluation { norm: 0.0, modular_at_norm: 0.0, bisection_steps: 0 });
    }
    let rho = |alpha: f64| scaled_modular(phi, values, weights, alpha);

    // invariant: rho(lo) > 1 >= rho(hi)
    let (mut lo, mut hi);
    let mut steps = 0;
    if rho(1.0) > 1.0 {
        lo = 1.0;
        hi = 2.0;
        while rho(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
                return Err(OrliczError::NonConvergence("modular stays above 1 for every scale"));
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        while rho(lo) <= 1.0 {
            hi = lo;
            lo *= 0.5;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || lo == 0.0 {
                return Err(OrliczError::NonConvergence("modular never exceeds 1 (bounded phi?)"));
            }
        }
    }

    let mut bisections = 0;
    while hi - lo > NORM_REL_TOL * hi {
        if bisections == MAX_BISECTION_STEPS {
            return Err(OrliczError::NonConvergence("bisection step limit reached"));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
    }
    Ok(NormEvaluation { norm: hi, modular_at_norm: rho(hi), bisection_steps: bisections })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    /// `sum_i w_i |f_i g_i|`
    pub lhs: f64,
    /// `2 ||f||_phi ||g||_psi`
    pub rhs: f64,
    pub norm_f: f64,
    pub norm_g_conjugate: f64,
}

impl HolderCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-300
    }
}

/// Both sides of the Hölder inequality for the pair `(phi, psi)`, where
/// `psi` is the numeric conjugate of `phi`.
pub fn holder_check(phi: &YoungFunction, f: &WeightedVector, g: &WeightedVector) -> Result<HolderCheck, OrliczError> {
    if f.weights != g.weights {
        return Err(OrliczError::WeightMismatch);
    }
    let lhs = exec::sum_by(f.len(), |i| f.weights[i] * (f.values[i] * g.values[i]).abs());
    let psi = phi.conjugate();
    let norm_f = luxemburg_norm(phi, f)?;
    let norm_g = luxemburg_norm(&psi, g)?;
    Ok(HolderCheck { lhs, rhs: 2.0 * norm_f * norm_g, norm_f, norm_g_conjugate: norm_g })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub norm_phi: f64,
    pub norm_lambda_phi: f64,
    /// `max(lambda, 1/lambda)`
    pub c: f64,
}

impl ScalingCheck {
    /// `C^{-1} ||f||_phi <= ||f||_{lambda phi} <= C ||f||_phi`, with a
    /// relative slack covering the two bisection tolerances.
    pub fn holds(&self) -> bool {
        let slack = 1.0 + 1e-10;
        self.norm_phi / self.c <= self.norm_lambda_phi * slack && self.norm_lambda_phi <= self.c * self.norm_phi * slack
    }
}

pub fn scaling_bounds_check(phi: &YoungFunction, lambda: f64, f: &WeightedVector) -> Result<ScalingCheck, OrliczError> {
    assert!(lambda > 0.0, "lambda must be positive");
    let norm_phi = luxemburg_norm(phi, f)?;
    let norm_lambda_phi = luxemburg_norm(&phi.scaled(lambda), f)?;
    Ok(ScalingCheck { norm_phi, norm_lambda_phi, c: lambda.max(1.0 / lambda) })
}
