//! Alexander-Spanier cochains on a finite space.
//!
//! A `k`-cochain is a function on `X^{k+1}`. Dense cochains store every
//! value, indexed row-major (`sum t_i n^{k-i}`); sparse cochains keep a map
//! with default value 0. Anything that can answer `value(tuple)` implements
//! [`CochainView`], which is what the norms and operators consume, so lazily
//! evaluated cochains (coboundaries, pull-backs) work everywhere a stored one
//! does.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::exec;
use crate::orlicz::{self, NormEvaluation, OrliczError};
use crate::spaces::{self, BallKind, FiniteMeasureSpace, SimplexSet, SpaceError, TupleMode};
use crate::young::YoungFunction;

/// Largest dense cochain (number of stored values) built implicitly.
pub const DENSE_CAP: usize = 20_000_000;
/// Longest tuple handled by the stack buffers of the lazy operators.
pub const MAX_ARITY: usize = 16;

#[derive(Debug, Error)]
pub enum CochainError {
    #[error("dense cochain of degree {degree} on {points} points would need {needed} values (cap {cap})")]
    TooLarge { degree: usize, points: usize, needed: u128, cap: usize },
    #[error("tuple {tuple:?} is not a valid {arity}-tuple on {points} points")]
    BadTuple { tuple: Vec<usize>, arity: usize, points: usize },
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("point count mismatch: {0} vs {1}")]
    SpaceMismatch(usize, usize),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read access to a cochain of some degree on `n_points` points.
pub trait CochainView: Sync {
    fn degree(&self) -> usize;
    fn n_points(&self) -> usize;
    fn value(&self, tuple: &[usize]) -> f64;
}

impl<T: CochainView + ?Sized> CochainView for &T {
    fn degree(&self) -> usize {
        (**self).degree()
    }
    fn n_points(&self) -> usize {
        (**self).n_points()
    }
    fn value(&self, tuple: &[usize]) -> f64 {
        (**self).value(tuple)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse(BTreeMap<Vec<usize>, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    n: usize,
    degree: usize,
    storage: Storage,
}

fn dense_len(n: usize, degree: usize) -> Result<usize, CochainError> {
    assert!(degree < MAX_ARITY, "degree {degree} is not supported");
    let needed = (n as u128).checked_pow(degree as u32 + 1).unwrap_or(u128::MAX);
    if needed > DENSE_CAP as u128 {
        return Err(CochainError::TooLarge { degree, points: n, needed, cap: DENSE_CAP });
    }
    Ok(needed as usize)
}

#[inline]
fn encode(n: usize, t: &[usize]) -> usize {
    t.iter().fold(0, |acc, &x| acc * n + x)
}

/// Inverse of the row-major index.
pub fn decode(n: usize, arity: usize, mut idx: usize, out: &mut [usize]) {
    for slot in out[..arity].iter_mut().rev() {
        *slot = idx % n;
        idx /= n;
    }
}

impl Cochain {
    pub fn zeros(n: usize, degree: usize) -> Result<Self, CochainError> {
        Ok(Self { n, degree, storage: Storage::Dense(vec![0.0; dense_len(n, degree)?]) })
    }

    pub fn sparse(n: usize, degree: usize) -> Self {
        Self { n, degree, storage: Storage::Sparse(BTreeMap::new()) }
    }

    pub fn constant(n: usize, degree: usize, c: f64) -> Result<Self, CochainError> {
        Ok(Self { n, degree, storage: Storage::Dense(vec![c; dense_len(n, degree)?]) })
    }

    /// Dense cochain with `value(t) = f(t)`.
    pub fn from_fn<F>(n: usize, degree: usize, f: F) -> Result<Self, CochainError>
    where
        F: Fn(&[usize]) -> f64 + Sync + Send,
    {
        let len = dense_len(n, degree)?;
        let arity = degree + 1;
        let values = exec::collect_by(len, |i| {
            let mut t = [0usize; MAX_ARITY];
            decode(n, arity, i, &mut t);
            f(&t[..arity])
        });
        Ok(Self { n, degree, storage: Storage::Dense(values) })
    }

    /// Materializes any view as a dense cochain.
    pub fn from_view(view: &impl CochainView) -> Result<Self, CochainError> {
        Self::from_fn(view.n_points(), view.degree(), |t| view.value(t))
    }

    /// 0-cochain from point values.
    pub fn from_point_values(values: Vec<f64>) -> Self {
        Self { n: values.len(), degree: 0, storage: Storage::Dense(values) }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Stored values of a dense cochain, row-major.
    pub fn dense_values(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense(v) => Some(v),
            Storage::Sparse(_) => None,
        }
    }

    /// Point values of a 0-cochain.
    pub fn point_values(&self) -> Vec<f64> {
        assert_eq!(self.degree, 0, "point values of a cochain of positive degree");
        (0..self.n).map(|x| self.value(&[x])).collect()
    }

    /// Explicitly stored `(tuple, value)` pairs of a sparse cochain, or all
    /// nonzero entries of a dense one.
    pub fn nonzero_entries(&self) -> Vec<(Vec<usize>, f64)> {
        match &self.storage {
            Storage::Sparse(m) => m.iter().filter(|(_, v)| **v != 0.0).map(|(t, v)| (t.clone(), *v)).collect(),
            Storage::Dense(v) => {
                let arity = self.degree + 1;
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| **x != 0.0)
                    .map(|(i, x)| {
                        let mut t = vec![0; arity];
                        decode(self.n, arity, i, &mut t);
                        (t, *x)
                    })
                    .collect()
            }
        }
    }

    fn check_tuple(&self, t: &[usize]) -> Result<(), CochainError> {
        if t.len() != self.degree + 1 || t.iter().any(|&x| x >= self.n) {
            return Err(CochainError::BadTuple { tuple: t.to_vec(), arity: self.degree + 1, points: self.n });
        }
        Ok(())
    }

    pub fn set(&mut self, t: &[usize], v: f64) -> Result<(), CochainError> {
        self.check_tuple(t)?;
        match &mut self.storage {
            Storage::Dense(d) => d[encode(self.n, t)] = v,
            Storage::Sparse(m) => {
                if v == 0.0 {
                    m.remove(t);
                } else {
                    m.insert(t.to_vec(), v);
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<Self, CochainError> {
        match &self.storage {
            Storage::Dense(_) => Ok(self.clone()),
            Storage::Sparse(_) => Self::from_view(self),
        }
    }

    /// `a * self + b * other`, dense.
    pub fn linear_combination(&self, a: f64, other: &impl CochainView, b: f64) -> Result<Self, CochainError> {
        if other.degree() != self.degree {
            return Err(CochainError::DegreeMismatch(self.degree, other.degree()));
        }
        if other.n_points() != self.n {
            return Err(CochainError::SpaceMismatch(self.n, other.n_points()));
        }
        Self::from_fn(self.n, self.degree, |t| a * self.value(t) + b * other.value(t))
    }

    pub fn scaled(&self, a: f64) -> Self {
        let storage = match &self.storage {
            Storage::Dense(v) => Storage::Dense(v.iter().map(|x| a * x).collect()),
            Storage::Sparse(m) => Storage::Sparse(m.iter().map(|(t, v)| (t.clone(), a * v)).collect()),
        };
        Self { n: self.n, degree: self.degree, storage }
    }

    /// Writes lines `i0 ... ik value` for every nonzero entry.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), CochainError> {
        for (t, v) in self.nonzero_entries() {
            let idx: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{} {v}", idx.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CochainError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Reads a sparse cochain. The degree comes from the field count unless
    /// given (needed for empty files); indices must be below `n`.
    pub fn read_from<R: BufRead>(r: R, n: usize, degree: Option<usize>) -> Result<Self, CochainError> {
        let mut out: Option<Cochain> = degree.map(|k| Cochain::sparse(n, k));
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() < 2 {
                return Err(CochainError::Parse { line: line_no, reason: "expected `i0 ... ik value`".into() });
            }
            let k = fields.len() - 2;
            let c = out.get_or_insert_with(|| Cochain::sparse(n, k));
            if c.degree != k {
                return Err(CochainError::Parse {
                    line: line_no,
                    reason: format!("expected {} indices, found {}", c.degree + 1, k + 1),
                });
            }
            let mut t = Vec::with_capacity(k + 1);
            for f in &fields[..=k] {
                let x: usize = f
                    .parse()
                    .map_err(|e| CochainError::Parse { line: line_no, reason: format!("index `{f}`: {e}") })?;
                if x >= n {
                    return Err(CochainError::Parse { line: line_no, reason: format!("index {x} out of range (n = {n})") });
                }
                t.push(x);
            }
            let v: f64 = fields[k + 1]
                .parse()
                .map_err(|e| CochainError::Parse { line: line_no, reason: format!("value: {e}") })?;
            if !v.is_finite() {
                return Err(CochainError::Parse { line: line_no, reason: "non-finite value".into() });
            }
            c.set(&t, v)?;
        }
        out.ok_or_else(|| CochainError::Parse { line: 0, reason: "empty cochain file needs an explicit degree".into() })
    }

    pub fn load(path: impl AsRef<Path>, n: usize, degree: Option<usize>) -> Result<Self, CochainError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?), n, degree)
    }
}

impl CochainView for Cochain {
    fn degree(&self) -> usize {
        self.degree
    }
    fn n_points(&self) -> usize {
        self.n
    }
    #[inline]
    fn value(&self, t: &[usize]) -> f64 {
        debug_assert_eq!(t.len(), self.degree + 1);
        match &self.storage {
            Storage::Dense(v) => v[encode(self.n, t)],
            Storage::Sparse(m) => m.get(t).copied().unwrap_or(0.0),
        }
    }
}

/// A cochain given by a closure.
pub struct FnCochain<F> {
    pub n: usize,
    pub degree: usize,
    pub f: F,
}

impl<F: Fn(&[usize]) -> f64 + Sync> CochainView for FnCochain<F> {
    fn degree(&self) -> usize {
        self.degree
    }
    fn n_points(&self) -> usize {
        self.n
    }
    fn value(&self, t: &[usize]) -> f64 {
        (self.f)(t)
    }
}

/// Lazily evaluated coboundary `du`.
pub struct Coboundary<V> {
    inner: V,
}

pub fn coboundary_view<V: CochainView>(u: V) -> Coboundary<V> {
    Coboundary { inner: u }
}

impl<V: CochainView> CochainView for Coboundary<V> {
    fn degree(&self) -> usize {
        self.inner.degree() + 1
    }
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }
    fn value(&self, t: &[usize]) -> f64 {
        let k = self.inner.degree();
        debug_assert_eq!(t.len(), k + 2);
        let mut face = [0usize; MAX_ARITY];
        let mut total = 0.0;
        for i in 0..t.len() {
            let mut m = 0;
            for (j, &x) in t.iter().enumerate() {
                if j != i {
                    face[m] = x;
                    m += 1;
                }
            }
            let v = self.inner.value(&face[..k + 1]);
            if i % 2 == 0 {
                total += v;
            } else {
                total -= v;
            }
        }
        total
    }
}

/// `d_k u(x_0, ..., x_{k+1}) = sum_i (-1)^i u(..., x̂_i, ...)`, materialized densely.
pub fn coboundary(u: &impl CochainView) -> Result<Cochain, CochainError> {
    Cochain::from_view(&coboundary_view(u))
}

/// Integer-coefficient formal chain of tuples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormalChain {
    terms: BTreeMap<Vec<usize>, i64>,
}

impl FormalChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(t: Vec<usize>, c: i64) -> Self {
        let mut f = Self::new();
        f.add(t, c);
        f
    }

    pub fn add(&mut self, t: Vec<usize>, c: i64) {
        if c == 0 {
            return;
        }
        match self.terms.entry(t) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0 {
                    e.remove();
                }
            }
        }
    }

    pub fn add_chain(&mut self, other: &FormalChain, c: i64) {
        for (t, v) in &other.terms {
            self.add(t.clone(), c * v);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, i64)> {
        self.terms.iter().map(|(t, c)| (t, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Linear extension of `u` to chains.
    pub fn pair(&self, u: &impl CochainView) -> f64 {
        self.terms.iter().map(|(t, &c)| c as f64 * u.value(t)).sum()
    }

    /// Signed boundary of every term.
    pub fn boundary(&self) -> FormalChain {
        let mut out = FormalChain::new();
        for (t, &c) in &self.terms {
            out.add_chain(&boundary_chain(t), c);
        }
        out
    }
}

/// `i`-th face: the tuple with entry `i` removed.
pub fn face(t: &[usize], i: usize) -> Vec<usize> {
    t.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect()
}

/// `sum_i (-1)^i ∂_i Δ`, so that `u(∂Δ) = du(Δ)`.
pub fn boundary_chain(delta: &[usize]) -> FormalChain {
    let mut out = FormalChain::new();
    if delta.len() < 2 {
        return out;
    }
    for i in 0..delta.len() {
        out.add(face(delta, i), if i % 2 == 0 { 1 } else { -1 });
    }
    out
}

/// Values of `u` on the tuples of `set`, in set order.
pub fn values_on(u: &impl CochainView, set: &SimplexSet) -> Vec<f64> {
    exec::collect_by(set.len(), |i| u.value(set.tuple(i)))
}

/// `rho_{phi,s}(u / alpha)` over a precomputed simplex set.
pub fn modular_on(u: &impl CochainView, phi: &YoungFunction, set: &SimplexSet, alpha: f64) -> f64 {
    exec::sum_by(set.len(), |i| phi.eval(u.value(set.tuple(i)) / alpha) * set.weight(i))
}

/// Luxemburg norm of `u` over a precomputed simplex set.
pub fn seminorm_on(u: &impl CochainView, phi: &YoungFunction, set: &SimplexSet) -> Result<NormEvaluation, CochainError> {
    let values = values_on(u, set);
    Ok(orlicz::luxemburg_parts(phi, &values, set.weights())?)
}

/// `‖u‖_{phi,s}` over ordered tuples (repeats included) of diameter at most `s`.
pub fn seminorm(space: &FiniteMeasureSpace, u: &impl CochainView, phi: &YoungFunction, s: f64) -> Result<f64, CochainError> {
    seminorm_with_mode(space, u, phi, s, TupleMode::Ordered)
}

pub fn seminorm_with_mode(
    space: &FiniteMeasureSpace,
    u: &impl CochainView,
    phi: &YoungFunction,
    s: f64,
    mode: TupleMode,
) -> Result<f64, CochainError> {
    check_space(space, u)?;
    let set = spaces::enumerate_simplices(space, u.degree(), s, mode)?;
    Ok(seminorm_on(u, phi, &set)?.norm)
}

/// `rho_{phi,s}(u)` at unit scale.
pub fn modular_at_scale(space: &FiniteMeasureSpace, u: &impl CochainView, phi: &YoungFunction, s: f64) -> Result<f64, CochainError> {
    check_space(space, u)?;
    let set = spaces::enumerate_simplices(space, u.degree(), s, TupleMode::Ordered)?;
    Ok(modular_on(u, phi, &set, 1.0))
}

fn check_space(space: &FiniteMeasureSpace, u: &impl CochainView) -> Result<(), CochainError> {
    if space.len() != u.n_points() {
        return Err(CochainError::SpaceMismatch(space.len(), u.n_points()));
    }
    Ok(())
}

/// Both sides of the continuity estimate for the coboundary at scale `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityCheck {
    /// `rho_{phi,s}(du)`
    pub lhs: f64,
    /// intermediate bound `sum mu(B̄(x_0, s)) phi((k+2) u(Δ)) dΔ` over `X_s^{k+1}`
    pub intermediate: f64,
    /// `V(s) rho_{phi,s}((k+2) u)`
    pub rhs: f64,
    /// closed-ball `V(s)`
    pub big_v: f64,
}

impl ContinuityCheck {
    pub fn holds(&self) -> bool {
        let slack = 1e-12 * self.rhs.abs().max(1e-300);
        self.lhs <= self.intermediate + slack && self.intermediate <= self.rhs + slack
    }
}

/// Evaluates `rho_{phi,s}(du) <= V(s) rho_{phi,s}((k+2)u)` directly. The Jensen
/// step bounds the integral over the removed point `x_i` by the ball around
/// the first remaining point of the face, which is `x_{j_i}` with `j_i` the
/// smallest index different from `i`.
pub fn continuity_bound_check(
    space: &FiniteMeasureSpace,
    u: &impl CochainView,
    phi: &YoungFunction,
    s: f64,
) -> Result<ContinuityCheck, CochainError> {
    check_space(space, u)?;
    let k = u.degree();
    let du = coboundary_view(u);
    let upper = spaces::enumerate_simplices(space, k + 1, s, TupleMode::Ordered)?;
    let lower = spaces::enumerate_simplices(space, k, s, TupleMode::Ordered)?;
    let lhs = modular_on(&du, phi, &upper, 1.0);
    let factor = (k + 2) as f64;
    let ball: Vec<f64> = exec::collect_by(space.len(), |x| space.ball_measure(x, s, BallKind::Closed));
    let big_v = ball.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let intermediate = exec::sum_by(lower.len(), |i| {
        let t = lower.tuple(i);
        ball[t[0]] * phi.eval(factor * u.value(t)) * lower.weight(i)
    });
    let rho_scaled = exec::sum_by(lower.len(), |i| phi.eval(factor * u.value(lower.tuple(i))) * lower.weight(i));
    Ok(ContinuityCheck { lhs, intermediate, rhs: big_v * rho_scaled, big_v })
}

/// Largest `|u(t)|` over all of `X^{k+1}`.
pub fn max_abs(u: &impl CochainView) -> Result<f64, CochainError> {
    let n = u.n_points();
    let arity = u.degree() + 1;
    let len = dense_len(n, u.degree())?;
    Ok(exec::max_by(len, |i| {
        let mut t = [0usize; MAX_ARITY];
        decode(n, arity, i, &mut t);
        u.value(&t[..arity]).abs()
    }))
}

/// Largest `|u(t) - v(t)|` over all of `X^{k+1}`.
pub fn max_abs_diff(u: &impl CochainView, v: &impl CochainView) -> Result<f64, CochainError> {
    if u.degree() != v.degree() {
        return Err(CochainError::DegreeMismatch(u.degree(), v.degree()));
    }
    let diff = FnCochain { n: u.n_points(), degree: u.degree(), f: |t: &[usize]| u.value(t) - v.value(t) };
    max_abs(&diff)
}
