//! Transfer of cochains along quasi-isometries.
//!
//! A [`Kernel`] is a nonnegative averaging weight with bounded support whose
//! rows integrate to 1 against the target measure. Pull-backs, the composed
//! kernel and the homotopy operator `B_k` are evaluated tuple by tuple: the
//! product kernel on `(k+1)`-tuples is never materialized.

use serde::Serialize;
use thiserror::Error;

use crate::cochain::{self, coboundary_view, decode, Cochain, CochainError, CochainView, FormalChain, FnCochain, MAX_ARITY};
use crate::exec;
use crate::spaces::{self, BallKind, FiniteMeasureSpace, SpaceError, TupleMode};
use crate::young::YoungFunction;

/// Tolerance of the row-sum invariant.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("ball of radius {radius} around point {point} has zero measure")]
    EmptyBall { point: usize, radius: f64 },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("quasi-isometry condition fails: {0}")]
    NotQuasiIsometric(String),
    #[error("map has {got} entries, source has {expected} points")]
    MapLength { got: usize, expected: usize },
    #[error("map sends {from} to {to}, outside a target of {target} points")]
    MapOutOfRange { from: usize, to: usize, target: usize },
    #[error("operands live on spaces of different sizes ({0} vs {1})")]
    SpaceMismatch(usize, usize),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Cochain(#[from] CochainError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `kappa(x, x')` stored by rows: `rows[x]` lists `(x', kappa(x, x'))` for the
/// nonzero entries, sorted by `x'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: Vec<Vec<(usize, f64)>>,
    target_weights: Vec<f64>,
    support_radius: f64,
}

impl Kernel {
    /// Builds a kernel from raw rows and checks the invariants against the
    /// given source and target spaces.
    pub fn new(
        source: &FiniteMeasureSpace,
        target: &FiniteMeasureSpace,
        rows: Vec<Vec<(usize, f64)>>,
        support_radius: f64,
    ) -> Result<Self, TransferError> {
        let k = Self { rows, target_weights: target.weights().to_vec(), support_radius };
        k.validate(source, target)?;
        Ok(k)
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn n_source(&self) -> usize {
        self.rows.len()
    }

    pub fn n_target(&self) -> usize {
        self.target_weights.len()
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        let row = &self.rows[x];
        row.binary_search_by_key(&y, |&(j, _)| j).map_or(0.0, |i| row[i].1)
    }

    /// `sum_y kappa(x, y) mu(y)` for every row.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(y, v)| v * self.target_weights[y]).sum()).collect()
    }

    /// Weighted rows `(y, kappa(x, y) mu(y))`, the averaging weights.
    fn weighted_rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.rows.iter().map(|r| r.iter().map(|&(y, v)| (y, v * self.target_weights[y])).collect()).collect()
    }

    pub fn sup(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, v)| v).fold(0.0, f64::max)
    }

    /// Row sums within [`ROW_SUM_TOL`], nonnegativity, and, for kernels from a
    /// space to itself, support within the declared radius.
    pub fn validate(&self, source: &FiniteMeasureSpace, target: &FiniteMeasureSpace) -> Result<(), TransferError> {
        if self.rows.len() != source.len() {
            return Err(TransferError::InvalidKernel(format!("{} rows for {} points", self.rows.len(), source.len())));
        }
        if self.target_weights.len() != target.len() {
            return Err(TransferError::InvalidKernel("target size mismatch".into()));
        }
        let same = std::ptr::eq(source, target) || source == target;
        for (x, row) in self.rows.iter().enumerate() {
            let mut prev = None;
            for &(y, v) in row {
                if y >= target.len() {
                    return Err(TransferError::InvalidKernel(format!("row {x} references point {y}")));
                }
                if prev.is_some_and(|p| p >= y) {
                    return Err(TransferError::InvalidKernel(format!("row {x} is not sorted")));
                }
                prev = Some(y);
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(TransferError::InvalidKernel(format!("kappa({x},{y}) = {v}")));
                }
                if same && v > 0.0 && source.dist(x, y) > self.support_radius + 1e-12 {
                    return Err(TransferError::InvalidKernel(format!(
                        "kappa({x},{y}) > 0 at distance {} beyond support radius {}",
                        source.dist(x, y),
                        self.support_radius
                    )));
                }
            }
        }
        for (x, s) in self.row_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(TransferError::InvalidKernel(format!("row {x} integrates to {s}")));
            }
        }
        Ok(())
    }
}

/// `kappa(x, x') = 1_{B(x,K)}(x') / mu(B(x, K))` with the open ball.
pub fn ball_kernel(space: &FiniteMeasureSpace, k: f64) -> Result<Kernel, TransferError> {
    let rows: Vec<Result<Vec<(usize, f64)>, TransferError>> = exec::collect_by(space.len(), |x| {
        let ball = space.ball(x, k, BallKind::Open);
        let m: f64 = ball.iter().map(|&y| space.weight(y)).sum();
        if ball.is_empty() || m <= 0.0 {
            return Err(TransferError::EmptyBall { point: x, radius: k });
        }
        Ok(ball.into_iter().map(|y| (y, 1.0 / m)).collect())
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Kernel::new(space, space, rows, k)
}

/// `kappa(x, x') = delta_{x x'} / mu(x)`: the identity averaging.
pub fn delta_kernel(space: &FiniteMeasureSpace) -> Kernel {
    let rows = (0..space.len()).map(|x| vec![(x, 1.0 / space.weight(x))]).collect();
    Kernel { rows, target_weights: space.weights().to_vec(), support_radius: 0.0 }
}

/// A point map with declared quasi-isometry constants, verified exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiIsometry {
    map: Vec<usize>,
    pub lambda: f64,
    pub epsilon: f64,
}

/// Tightest additive constant for a point map at a given multiplicative one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QiConstants {
    pub lambda: f64,
    /// smallest `epsilon` satisfying the two-sided distortion bound
    pub distortion: f64,
    /// `sup_y min_x |F x - y|`
    pub coverage: f64,
    /// `max(distortion, coverage)`
    pub epsilon: f64,
}

fn check_map(source: &FiniteMeasureSpace, target: &FiniteMeasureSpace, map: &[usize]) -> Result<(), TransferError> {
    if map.len() != source.len() {
        return Err(TransferError::MapLength { got: map.len(), expected: source.len() });
    }
    if let Some((from, &to)) = map.iter().enumerate().find(|(_, &y)| y >= target.len()) {
        return Err(TransferError::MapOutOfRange { from, to, target: target.len() });
    }
    Ok(())
}

/// For fixed `lambda >= 1`, the smallest `epsilon` for which the map is a
/// `(lambda, epsilon)` quasi-isometry, by exhaustive search over pairs.
pub fn tightest_constants(
    source: &FiniteMeasureSpace,
    target: &FiniteMeasureSpace,
    map: &[usize],
    lambda: f64,
) -> Result<QiConstants, TransferError> {
    assert!(lambda >= 1.0, "lambda must be at least 1");
    check_map(source, target, map)?;
    let n = source.len();
    let distortion = exec::max_by(n, |x| {
        let mut worst = 0.0f64;
        for x2 in 0..n {
            let d = source.dist(x, x2);
            let e = target.dist(map[x], map[x2]);
            worst = worst.max(e - lambda * d).max(d / lambda - e);
        }
        worst
    })
    .max(0.0);
    let coverage = exec::max_by(target.len(), |y| map.iter().map(|&fx| target.dist(fx, y)).fold(f64::INFINITY, f64::min)).max(0.0);
    Ok(QiConstants { lambda, distortion, coverage, epsilon: distortion.max(coverage) })
}

impl QuasiIsometry {
    /// Validates (a) the two-sided distortion bound and (b) coarse
    /// surjectivity, both exhaustively.
    pub fn new(
        source: &FiniteMeasureSpace,
        target: &FiniteMeasureSpace,
        map: Vec<usize>,
        lambda: f64,
        epsilon: f64,
    ) -> Result<Self, TransferError> {
        if !(lambda >= 1.0) || !(epsilon >= 0.0) {
            return Err(TransferError::NotQuasiIsometric(format!("constants must satisfy lambda >= 1, epsilon >= 0 (got {lambda}, {epsilon})")));
        }
        let c = tightest_constants(source, target, &map, lambda)?;
        let slack = 1e-12 * (1.0 + epsilon);
        if c.distortion > epsilon + slack {
            return Err(TransferError::NotQuasiIsometric(format!(
                "distortion needs epsilon >= {} at lambda = {lambda}",
                c.distortion
            )));
        }
        if c.coverage > epsilon + slack {
            return Err(TransferError::NotQuasiIsometric(format!("image is only {}-dense", c.coverage)));
        }
        Ok(Self { map, lambda, epsilon })
    }

    /// The map with the tightest constants at `lambda`.
    pub fn with_tightest(source: &FiniteMeasureSpace, target: &FiniteMeasureSpace, map: Vec<usize>, lambda: f64) -> Result<Self, TransferError> {
        let c = tightest_constants(source, target, &map, lambda)?;
        Ok(Self { map, lambda, epsilon: c.epsilon })
    }

    pub fn identity(space: &FiniteMeasureSpace) -> Self {
        Self { map: (0..space.len()).collect(), lambda: 1.0, epsilon: 0.0 }
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    /// A quasi-inverse: every target point goes to a source point whose
    /// image is nearest (smallest index on ties), with tightest constants at
    /// the same `lambda`.
    pub fn nearest_quasi_inverse(&self, source: &FiniteMeasureSpace, target: &FiniteMeasureSpace) -> Result<QuasiIsometry, TransferError> {
        let back = exec::collect_by(target.len(), |y| {
            let mut best = (f64::INFINITY, 0usize);
            for (x, &fx) in self.map.iter().enumerate() {
                let d = target.dist(fx, y);
                if d < best.0 {
                    best = (d, x);
                }
            }
            best.1
        });
        QuasiIsometry::with_tightest(target, source, back, self.lambda)
    }

    /// Reads `i j` lines (source `i` goes to target `j`), each source point
    /// exactly once.
    pub fn read_map<R: std::io::BufRead>(r: R, n_source: usize) -> Result<Vec<usize>, TransferError> {
        let mut map = vec![None; n_source];
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            let parse = |s: &str| s.parse::<usize>().map_err(|e| TransferError::Parse { line: i + 1, reason: format!("`{s}`: {e}") });
            if fields.len() != 2 {
                return Err(TransferError::Parse { line: i + 1, reason: "expected `i j`".into() });
            }
            let (a, b) = (parse(fields[0])?, parse(fields[1])?);
            if a >= n_source {
                return Err(TransferError::Parse { line: i + 1, reason: format!("source index {a} out of range") });
            }
            if map[a].replace(b).is_some() {
                return Err(TransferError::Parse { line: i + 1, reason: format!("source point {a} mapped twice") });
            }
        }
        map.into_iter()
            .enumerate()
            .map(|(a, m)| m.ok_or(TransferError::Parse { line: 0, reason: format!("source point {a} is not mapped") }))
            .collect()
    }

    pub fn write_map<W: std::io::Write>(&self, w: &mut W) -> Result<(), TransferError> {
        for (i, j) in self.map.iter().enumerate() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }
}

/// `sup_x |F̄ F x - x|` and `sup_y |F F̄ y - y|`, the larger of the two.
pub fn closeness_constant(
    source: &FiniteMeasureSpace,
    target: &FiniteMeasureSpace,
    f: &QuasiIsometry,
    fbar: &QuasiIsometry,
) -> f64 {
    let a = exec::max_by(source.len(), |x| source.dist(fbar.apply(f.apply(x)), x));
    let b = exec::max_by(target.len(), |y| target.dist(f.apply(fbar.apply(y)), y));
    a.max(b).max(0.0)
}

/// `kappa(x, x') = sum_y kappa_Y(F x, y) mu(y) kappa_X(F̄ y, x')`, a kernel on
/// `X` with reported support radius `(lambda + 1) K + epsilon + C`.
pub fn compose_kernel(
    x_space: &FiniteMeasureSpace,
    y_space: &FiniteMeasureSpace,
    f: &QuasiIsometry,
    fbar: &QuasiIsometry,
    k_y: &Kernel,
    k_x: &Kernel,
) -> Result<Kernel, TransferError> {
    if k_y.n_source() != y_space.len() || k_x.n_source() != x_space.len() || f.map.len() != x_space.len() || fbar.map.len() != y_space.len() {
        return Err(TransferError::SpaceMismatch(x_space.len(), y_space.len()));
    }
    let n = x_space.len();
    let rows = exec::collect_by(n, |x| {
        let mut acc = vec![0.0; n];
        for &(y, ky) in &k_y.rows[f.apply(x)] {
            let w = ky * y_space.weight(y);
            for &(x2, kx) in &k_x.rows[fbar.apply(y)] {
                acc[x2] += w * kx;
            }
        }
        acc.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect::<Vec<_>>()
    });
    let kk = k_x.support_radius.max(k_y.support_radius);
    let lambda = f.lambda.max(fbar.lambda);
    let eps = f.epsilon.max(fbar.epsilon);
    let c = closeness_constant(x_space, y_space, f, fbar);
    let radius = (lambda + 1.0) * kk + eps + c;
    Kernel::new(x_space, x_space, rows, radius)
}

/// Sum over the product support of `prod_i w_i(y_i)` times `g(y)`, where the
/// factor for position `i` is the weighted row `rows[i]`.
fn product_average(rows: &[&[(usize, f64)]], g: &dyn Fn(&[usize]) -> f64) -> f64 {
    fn rec(rows: &[&[(usize, f64)]], pos: usize, buf: &mut [usize; MAX_ARITY], weight: f64, g: &dyn Fn(&[usize]) -> f64) -> f64 {
        if pos == rows.len() {
            return weight * g(&buf[..pos]);
        }
        let mut total = 0.0;
        for &(y, w) in rows[pos] {
            buf[pos] = y;
            total += rec(rows, pos + 1, buf, weight * w, g);
        }
        total
    }
    let mut buf = [0usize; MAX_ARITY];
    rec(rows, 0, &mut buf, 1.0, g)
}

/// Lazily evaluated pull-back `F* u(Δ) = ∫ u(Δ_Y) kappa_Y(F Δ, Δ_Y) dΔ_Y`.
pub struct Pullback<'a, V> {
    map: &'a QuasiIsometry,
    weighted: Vec<Vec<(usize, f64)>>,
    u: V,
    n_source: usize,
}

pub fn pullback_view<'a, V: CochainView>(f: &'a QuasiIsometry, k_y: &Kernel, u: V) -> Pullback<'a, V> {
    Pullback { map: f, weighted: k_y.weighted_rows(), u, n_source: f.map.len() }
}

impl<V: CochainView> CochainView for Pullback<'_, V> {
    fn degree(&self) -> usize {
        self.u.degree()
    }
    fn n_points(&self) -> usize {
        self.n_source
    }
    fn value(&self, t: &[usize]) -> f64 {
        let rows: Vec<&[(usize, f64)]> = t.iter().map(|&x| self.weighted[self.map.apply(x)].as_slice()).collect();
        product_average(&rows, &|y| self.u.value(y))
    }
}

/// Dense pull-back of `u` on `Y` to `X`.
pub fn pullback(f: &QuasiIsometry, k_y: &Kernel, u: &impl CochainView) -> Result<Cochain, TransferError> {
    if k_y.n_source() != u.n_points() {
        return Err(TransferError::SpaceMismatch(k_y.n_source(), u.n_points()));
    }
    Ok(Cochain::from_view(&pullback_view(f, k_y, u))?)
}

/// `b(Δ, Δ') = sum_i (-1)^i (x_0, ..., x_i, x'_i, ..., x'_k)`.
pub fn b_chain(delta: &[usize], delta_prime: &[usize]) -> FormalChain {
    assert_eq!(delta.len(), delta_prime.len(), "b-chain of tuples of different degrees");
    let mut out = FormalChain::new();
    for i in 0..delta.len() {
        let mut t = delta[..=i].to_vec();
        t.extend_from_slice(&delta_prime[i..]);
        out.add(t, if i % 2 == 0 { 1 } else { -1 });
    }
    out
}

/// `∂b(Δ,Δ') - (Δ' - Δ - sum_i (-1)^i b(∂_iΔ, ∂_iΔ'))` as a formal chain.
/// Empty exactly when the chain identity holds for the pair.
pub fn b_chain_identity_defect(delta: &[usize], delta_prime: &[usize]) -> FormalChain {
    let mut lhs = b_chain(delta, delta_prime).boundary();
    lhs.add(delta_prime.to_vec(), -1);
    lhs.add(delta.to_vec(), 1);
    if delta.len() > 1 {
        for i in 0..delta.len() {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            lhs.add_chain(&b_chain(&cochain::face(delta, i), &cochain::face(delta_prime, i)), sign);
        }
    }
    lhs
}

/// Same as [`b_chain_identity_defect`] with the unsigned sum over faces.
pub fn b_chain_identity_defect_unsigned(delta: &[usize], delta_prime: &[usize]) -> FormalChain {
    let mut lhs = b_chain(delta, delta_prime).boundary();
    lhs.add(delta_prime.to_vec(), -1);
    lhs.add(delta.to_vec(), 1);
    if delta.len() > 1 {
        for i in 0..delta.len() {
            lhs.add_chain(&b_chain(&cochain::face(delta, i), &cochain::face(delta_prime, i)), 1);
        }
    }
    lhs
}

/// Lazily evaluated `B_k u(Δ) = ∫ u(b(Δ, Δ')) kappa(Δ, Δ') dΔ'`.
pub struct Homotopy<V> {
    weighted: Vec<Vec<(usize, f64)>>,
    u: V,
}

pub fn homotopy_view<V: CochainView>(u: V, kernel: &Kernel) -> Homotopy<V> {
    assert!(u.degree() >= 1, "the homotopy operator takes cochains of degree at least 1");
    Homotopy { weighted: kernel.weighted_rows(), u }
}

impl<V: CochainView> CochainView for Homotopy<V> {
    fn degree(&self) -> usize {
        self.u.degree() - 1
    }
    fn n_points(&self) -> usize {
        self.u.n_points()
    }
    fn value(&self, t: &[usize]) -> f64 {
        let arity = t.len();
        // The i-th term of b only depends on x'_i..x'_k; the remaining rows
        // integrate to 1 and are left out.
        let mut total = 0.0;
        for i in 0..arity {
            let rows: Vec<&[(usize, f64)]> = t[i..].iter().map(|&x| self.weighted[x].as_slice()).collect();
            let term = product_average(&rows, &|tail| {
                let mut full = [0usize; MAX_ARITY];
                full[..=i].copy_from_slice(&t[..=i]);
                full[i + 1..=arity].copy_from_slice(tail);
                self.u.value(&full[..=arity])
            });
            if i % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        total
    }
}

/// Dense `B_k u`.
pub fn homotopy_operator(u: &impl CochainView, kernel: &Kernel) -> Result<Cochain, TransferError> {
    if kernel.n_source() != u.n_points() {
        return Err(TransferError::SpaceMismatch(kernel.n_source(), u.n_points()));
    }
    Ok(Cochain::from_view(&homotopy_view(u, kernel))?)
}

/// Result of checking the chain homotopy on one cochain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyResidual {
    pub degree: usize,
    /// `max |LHS - (F* F̄* u - u)|` over all of `X^{k+1}`; `LHS` is
    /// `B_0 d_0 u` in degree 0 and `B_k d_k u + d_{k-1} B_{k-1} u` above.
    pub residual: f64,
    /// `max |F* F̄* u - u|`, the size of the right-hand side
    pub rhs_size: f64,
    /// tuples skipped because their kernel support leaves the space; always
    /// 0 on a finite space, where the identity holds without truncation
    pub excluded_tuples: usize,
    pub tuples_checked: usize,
    /// support radius of the composed kernel
    pub composed_support: f64,
}

/// Checks the homotopy identity for `u` of degree `k` on `X`.
///
/// The right-hand side is computed through two successive pull-backs, the
/// left-hand side through `B_k` with the composed kernel, so the check
/// exercises every operator of this module.
pub fn homotopy_identity_residual(
    x_space: &FiniteMeasureSpace,
    y_space: &FiniteMeasureSpace,
    f: &QuasiIsometry,
    fbar: &QuasiIsometry,
    k_x: &Kernel,
    k_y: &Kernel,
    u: &impl CochainView,
) -> Result<HomotopyResidual, TransferError> {
    if u.n_points() != x_space.len() {
        return Err(TransferError::SpaceMismatch(u.n_points(), x_space.len()));
    }
    let k = u.degree();
    let composed = compose_kernel(x_space, y_space, f, fbar, k_y, k_x)?;
    // F̄* u lives on Y, F* of it on X again
    let on_y = pullback(fbar, k_x, u)?;
    let back = pullback(f, k_y, &on_y)?;
    let rhs = back.linear_combination(1.0, u, -1.0)?;
    let du = cochain::coboundary(u)?;
    let bdu = homotopy_view(&du, &composed);
    let lhs = if k == 0 {
        Cochain::from_view(&bdu)?
    } else {
        let bu = homotopy_operator(u, &composed)?;
        let dbu = coboundary_view(&bu);
        Cochain::from_fn(x_space.len(), k, |t| bdu.value(t) + dbu.value(t))?
    };
    let residual = cochain::max_abs_diff(&lhs, &rhs)?;
    let rhs_size = cochain::max_abs(&rhs)?;
    Ok(HomotopyResidual {
        degree: k,
        residual,
        rhs_size,
        excluded_tuples: 0,
        tuples_checked: x_space.len().pow(k as u32 + 1),
        composed_support: composed.support_radius,
    })
}

/// Both sides of the pull-back estimate at scale `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackBound {
    /// `‖F* u‖_{phi,s}` on `X`
    pub lhs: f64,
    /// `‖u‖_{phi,s'}` on `Y`
    pub norm_u: f64,
    /// `s' = 2K + lambda s + epsilon`
    pub s_prime: f64,
    /// `H̄ = sup(kappa_Y) V(lambda (2 epsilon + K))^{k+1}`, closed balls in `X`
    pub h_bar: f64,
    /// `max(1, H̄) ‖u‖_{phi,s'}`
    pub rhs: f64,
    /// `rho_{phi,s}(F* u)` and `H̄ rho_{phi,s'}(u)`
    pub modular_lhs: f64,
    pub modular_rhs: f64,
}

impl PullbackBound {
    pub fn holds(&self) -> bool {
        let slack = 1e-10;
        self.lhs <= self.rhs * (1.0 + slack) + 1e-300 && self.modular_lhs <= self.modular_rhs * (1.0 + slack) + 1e-300
    }
}

pub fn pullback_bound_check(
    x_space: &FiniteMeasureSpace,
    y_space: &FiniteMeasureSpace,
    f: &QuasiIsometry,
    k_y: &Kernel,
    u: &impl CochainView,
    phi: &YoungFunction,
    s: f64,
) -> Result<PullbackBound, TransferError> {
    let k = u.degree();
    let fu = pullback_view(f, k_y, u);
    let kk = k_y.support_radius;
    let s_prime = 2.0 * kk + f.lambda * s + f.epsilon;
    let set_x = spaces::enumerate_simplices(x_space, k, s, TupleMode::Ordered)?;
    let set_y = spaces::enumerate_simplices(y_space, k, s_prime, TupleMode::Ordered)?;
    let lhs = cochain::seminorm_on(&fu, phi, &set_x)?.norm;
    let norm_u = cochain::seminorm_on(u, phi, &set_y)?.norm;
    let r = f.lambda * (2.0 * f.epsilon + kk);
    let v = (0..x_space.len()).map(|x| x_space.ball_measure(x, r, BallKind::Closed)).fold(0.0, f64::max);
    let h_bar = k_y.sup() * v.powi(k as i32 + 1);
    let modular_lhs = cochain::modular_on(&fu, phi, &set_x, 1.0);
    let modular_rhs = h_bar * cochain::modular_on(u, phi, &set_y, 1.0);
    Ok(PullbackBound { lhs, norm_u, s_prime, h_bar, rhs: h_bar.max(1.0) * norm_u, modular_lhs, modular_rhs })
}

/// `‖B_k u‖_{phi,s}` against `‖u‖_{phi,s+2K'}`, a diagnostic for the
/// boundedness of the homotopy operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomotopyBound {
    pub norm_bu: f64,
    pub norm_u: f64,
    pub ratio: f64,
}

pub fn homotopy_bound_diagnostic(
    space: &FiniteMeasureSpace,
    u: &impl CochainView,
    kernel: &Kernel,
    phi: &YoungFunction,
    s: f64,
) -> Result<HomotopyBound, TransferError> {
    let bu = homotopy_view(u, kernel);
    let norm_bu = cochain::seminorm(space, &bu, phi, s)?;
    let norm_u = cochain::seminorm(space, u, phi, s + 2.0 * kernel.support_radius)?;
    let ratio = if norm_u > 0.0 { norm_bu / norm_u } else { 0.0 };
    Ok(HomotopyBound { norm_bu, norm_u, ratio })
}

/// `F* u` for a 0-cochain `u`, a helper for point functions.
pub fn pullback_points(f: &QuasiIsometry, k_y: &Kernel, u: &[f64]) -> Vec<f64> {
    let weighted = k_y.weighted_rows();
    (0..f.map.len()).map(|x| weighted[f.apply(x)].iter().map(|&(y, w)| w * u[y]).sum()).collect()
}

/// A view over all tuples of `X^{k+1}` given by a closure, used for tests.
pub fn fn_cochain<F: Fn(&[usize]) -> f64 + Sync>(n: usize, degree: usize, f: F) -> FnCochain<F> {
    FnCochain { n, degree, f }
}

/// All tuples of `X^{k+1}`, for exhaustive checks on small spaces.
pub fn all_tuples(n: usize, arity: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(arity as u32);
    (0..total).map(move |i| {
        let mut t = vec![0; arity];
        decode(n, arity, i, &mut t);
        t
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Group;

    #[test]
    fn ball_kernel_examples() {
        let p = FiniteMeasureSpace::path(5).unwrap();
        let k = ball_kernel(&p, 1.5).unwrap();
        assert_eq!(k.rows()[2], vec![(1, 1.0 / 3.0), (2, 1.0 / 3.0), (3, 1.0 / 3.0)]);
        let wide = ball_kernel(&p, 10.0).unwrap();
        assert!(wide.rows().iter().all(|r| r.len() == 5 && r.iter().all(|&(_, v)| v == 0.2)));
        let one = FiniteMeasureSpace::single_point(4.0).unwrap();
        let k1 = ball_kernel(&one, 1.0).unwrap();
        assert_eq!(k1.rows()[0], vec![(0, 0.25)]);
        assert!(matches!(ball_kernel(&p, 0.0), Err(TransferError::EmptyBall { .. })));
    }

    #[test]
    fn composed_kernel_is_a_kernel() {
        let p = FiniteMeasureSpace::path(6).unwrap();
        let id = QuasiIsometry::identity(&p);
        let k = ball_kernel(&p, 1.5).unwrap();
        let kk = compose_kernel(&p, &p, &id, &id, &k, &k).unwrap();
        assert!(kk.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert_eq!(kk.support_radius(), 3.0);
        // two-step averaging on the path
        assert!((kk.value(2, 4) - 1.0 / 9.0).abs() < 1e-15);
        assert!((kk.value(2, 2) - 3.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn delta_kernels_compose_to_the_map() {
        let p = FiniteMeasureSpace::path(5).unwrap();
        let k = ball_kernel(&p, 0.5).unwrap();
        let rev = QuasiIsometry::new(&p, &p, vec![4, 3, 2, 1, 0], 1.0, 0.0).unwrap();
        let kk = compose_kernel(&p, &p, &rev, &rev, &k, &k).unwrap();
        for x in 0..5 {
            assert_eq!(kk.rows()[x], vec![(x, 1.0)]);
        }
    }

    #[test]
    fn quasi_isometry_validation() {
        let p = FiniteMeasureSpace::path(6).unwrap();
        let collapse = vec![0, 0, 1, 1, 2, 2];
        let q = FiniteMeasureSpace::path(3).unwrap();
        assert!(QuasiIsometry::new(&p, &q, collapse.clone(), 1.0, 0.5).is_err());
        let c = tightest_constants(&p, &q, &collapse, 2.0).unwrap();
        assert_eq!(c.coverage, 0.0);
        assert!(QuasiIsometry::new(&p, &q, collapse, 2.0, c.epsilon).is_ok());
        assert!(matches!(QuasiIsometry::new(&p, &q, vec![0; 5], 1.0, 1.0), Err(TransferError::MapLength { .. })));
    }

    #[test]
    fn pullback_examples() {
        let p = FiniteMeasureSpace::path(5).unwrap();
        let k = ball_kernel(&p, 1.5).unwrap();
        let id = QuasiIsometry::identity(&p);
        let c = Cochain::constant(5, 1, 2.5).unwrap();
        let fc = pullback(&id, &k, &c).unwrap();
        assert!(cochain::max_abs_diff(&fc, &c).unwrap() < 1e-14);
        let delta = ball_kernel(&p, 0.5).unwrap();
        let u = Cochain::from_fn(5, 1, |t| (t[0] as f64) - 2.0 * t[1] as f64).unwrap();
        assert!(cochain::max_abs_diff(&pullback(&id, &delta, &u).unwrap(), &u).unwrap() < 1e-15);
    }

    #[test]
    fn b_chain_examples() {
        let b = b_chain(&[3], &[5]);
        assert_eq!(b.terms().collect::<Vec<_>>(), vec![(&vec![3, 5], 1)]);
        let b = b_chain(&[1, 2], &[3, 4]);
        let terms: Vec<_> = b.terms().map(|(t, c)| (t.clone(), c)).collect();
        assert_eq!(terms, vec![(vec![1, 2, 4], -1), (vec![1, 3, 4], 1)]);
        assert!(b_chain_identity_defect(&[0, 1, 2], &[3, 4, 5]).is_empty());
        assert!(!b_chain_identity_defect_unsigned(&[0, 1], &[2, 3]).is_empty());
    }

    #[test]
    fn homotopy_degree_zero_is_average_minus_value() {
        let p = FiniteMeasureSpace::path(5).unwrap();
        let k = ball_kernel(&p, 1.5).unwrap();
        let v = Cochain::from_point_values(vec![1.0, 4.0, 2.0, 0.0, 3.0]);
        let dv = cochain::coboundary(&v).unwrap();
        let b = homotopy_operator(&dv, &k).unwrap();
        assert!((b.value(&[2]) - ((4.0 + 2.0 + 0.0) / 3.0 - 2.0)).abs() < 1e-14);
        assert!((b.value(&[0]) - ((1.0 + 4.0) / 2.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn homotopy_identity_on_the_path() {
        let p = FiniteMeasureSpace::path(7).unwrap();
        let id = QuasiIsometry::identity(&p);
        let k = ball_kernel(&p, 1.5).unwrap();
        let u0 = Cochain::from_point_values(vec![0.2, -1.0, 3.0, 0.5, 0.0, 2.2, -0.7]);
        let r0 = homotopy_identity_residual(&p, &p, &id, &id, &k, &k, &u0).unwrap();
        assert!(r0.residual <= 1e-10, "{r0:?}");
        assert!(r0.rhs_size > 0.1);
        let u1 = Cochain::from_fn(7, 1, |t| ((t[0] * 5 + t[1] * 11) as f64).sin()).unwrap();
        let r1 = homotopy_identity_residual(&p, &p, &id, &id, &k, &k, &u1).unwrap();
        assert!(r1.residual <= 1e-10, "{r1:?}");
    }

    #[test]
    fn delta_case_is_degenerate() {
        let f2 = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 1).unwrap();
        let id = QuasiIsometry::identity(&f2);
        let k = ball_kernel(&f2, 0.5).unwrap();
        let u = Cochain::from_fn(5, 1, |t| (t[0] * t[1]) as f64).unwrap();
        let r = homotopy_identity_residual(&f2, &f2, &id, &id, &k, &k, &u).unwrap();
        assert!(r.residual <= 1e-12 && r.rhs_size <= 1e-12);
    }

    #[test]
    fn map_file_round_trip() {
        let p = FiniteMeasureSpace::path(4).unwrap();
        let q = QuasiIsometry::new(&p, &p, vec![3, 2, 1, 0], 1.0, 0.0).unwrap();
        let mut buf = Vec::new();
        q.write_map(&mut buf).unwrap();
        assert_eq!(QuasiIsometry::read_map(buf.as_slice(), 4).unwrap(), vec![3, 2, 1, 0]);
        assert!(QuasiIsometry::read_map("0 1\n0 2\n".as_bytes(), 2).is_err());
        assert!(QuasiIsometry::read_map("0 1\n".as_bytes(), 2).is_err());
    }
}
