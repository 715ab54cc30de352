//! Degree-one cohomology on finite spaces.
//!
//! A 1-cochain `u` is a cocycle when `u(x, y) = u(z, y) - u(z, x)` for all
//! triples; it is then the coboundary of its primitive `f_u(x) = u(z_0, x)`.
//! On a finite space every cocycle is a coboundary, so the interesting
//! quantity is the distance to coboundaries of functions with bounded norm,
//! the finite stand-in for finitely supported functions on an infinite space.

use serde::Serialize;
use thiserror::Error;

use crate::cochain::{self, CochainError, CochainView, FnCochain};
use crate::descent::{self, DescentOptions, IterationRecord, Objective, StopReason};
use crate::exec;
use crate::orlicz::{self, OrliczError};
use crate::spaces::{self, BallKind, FiniteMeasureSpace, Group, SimplexSet, SpaceError, TupleMode};
use crate::young::YoungFunction;

/// Default tolerance of the cocycle relation.
pub const COCYCLE_TOL: f64 = 1e-10;
/// Largest `n^3` checked triple by triple.
pub const EXHAUSTIVE_TRIPLE_CAP: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum DegreeOneError {
    #[error("not a cocycle: violation {violation:e} at {triple:?}")]
    NotACocycle { violation: f64, triple: [usize; 3] },
    #[error("expected a 1-cochain, got degree {0}")]
    WrongDegree(usize),
    #[error("scale {t} does not exceed t0 = {t0}")]
    ScaleTooSmall { t: f64, t0: f64 },
    #[error("truncation radius {radius} is too small for n = {n} (need at least {needed})")]
    TruncationTooSmall { radius: u32, n: u32, needed: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("minimization did not converge after {iterations} iterations ({reason:?}); best distance {}", best.dist)]
    NonConvergence { iterations: usize, reason: StopReason, best: Box<DistanceResult> },
    #[error(transparent)]
    Cochain(#[from] CochainError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleCheck {
    pub holds: bool,
    /// largest `|u(x,y) - u(z,y) + u(z,x)|` found
    pub worst_violation: f64,
    /// `(z, x, y)` attaining it
    pub worst_triple: [usize; 3],
    /// all triples were checked; otherwise only those with `z = 0`, which is
    /// equivalent as an exact condition
    pub exhaustive: bool,
}

/// `|u(x,y) - u(z,y) + u(z,x)|`, i.e. `|du(z,x,y)|`.
#[inline]
fn violation(u: &impl CochainView, z: usize, x: usize, y: usize) -> f64 {
    (u.value(&[x, y]) - u.value(&[z, y]) + u.value(&[z, x])).abs()
}

/// Checks the cocycle relation. Up to [`EXHAUSTIVE_TRIPLE_CAP`] triples are
/// checked one by one. Above it the check uses the pivot `z = 0`: the relation
/// holds for all triples if and only if it holds for those through a fixed
/// pivot, and then with violations at most three times the pivot's.
pub fn is_cocycle(u: &impl CochainView, tol: f64) -> Result<CocycleCheck, DegreeOneError> {
    if u.degree() != 1 {
        return Err(DegreeOneError::WrongDegree(u.degree()));
    }
    let n = u.n_points();
    let exhaustive = (n as u128).pow(3) <= EXHAUSTIVE_TRIPLE_CAP;
    let pivots: Vec<usize> = if exhaustive { (0..n).collect() } else { vec![0] };
    let per_row = exec::collect_by(n, |x| {
        let mut best = (0.0f64, [pivots[0], x, 0]);
        for y in 0..n {
            for &z in &pivots {
                let v = violation(u, z, x, y);
                if v > best.0 || v.is_nan() {
                    best = (v, [z, x, y]);
                }
            }
        }
        best
    });
    let mut worst = (0.0f64, [0, 0, 0]);
    for (v, t) in per_row {
        if v > worst.0 || v.is_nan() {
            worst = (v, t);
        }
    }
    Ok(CocycleCheck { holds: worst.0 <= tol, worst_violation: worst.0, worst_triple: worst.1, exhaustive })
}

/// Checks `du = 0` on the triples of `set` only, e.g. on `X_s^3` at a fixed
/// scale.
pub fn is_cocycle_on(u: &impl CochainView, set: &SimplexSet, tol: f64) -> Result<CocycleCheck, DegreeOneError> {
    if u.degree() != 1 {
        return Err(DegreeOneError::WrongDegree(u.degree()));
    }
    if set.arity() != 3 {
        return Err(DegreeOneError::InvalidArgument(format!("need a set of triples, got arity {}", set.arity())));
    }
    let per = exec::collect_by(set.len(), |i| {
        let t = set.tuple(i);
        (violation(u, t[0], t[1], t[2]), [t[0], t[1], t[2]])
    });
    let mut worst = (0.0f64, [0, 0, 0]);
    for (v, t) in per {
        if v > worst.0 || v.is_nan() {
            worst = (v, t);
        }
    }
    Ok(CocycleCheck { holds: worst.0 <= tol, worst_violation: worst.0, worst_triple: worst.1, exhaustive: false })
}

/// `f_u(x) = u(z_0, x)`, after checking the cocycle relation at `tol`.
pub fn primitive(u: &impl CochainView, z0: usize, tol: f64) -> Result<Vec<f64>, DegreeOneError> {
    let check = is_cocycle(u, tol)?;
    if !check.holds {
        return Err(DegreeOneError::NotACocycle { violation: check.worst_violation, triple: check.worst_triple });
    }
    if z0 >= u.n_points() {
        return Err(DegreeOneError::InvalidArgument(format!("basepoint {z0} out of range")));
    }
    Ok((0..u.n_points()).map(|x| u.value(&[z0, x])).collect())
}

/// One step `t -> 3t/2` of the norm equivalence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceStep {
    pub t: f64,
    /// closed-ball `V(t)`
    pub big_v: f64,
    /// open-ball `v(t/8)`
    pub small_v: f64,
    /// `2 V(t) / v(t/8)`
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEquivalence {
    pub t1: f64,
    pub t2: f64,
    pub n1: f64,
    pub n2: f64,
    pub midpoint_constant: f64,
    /// bounded-geometry radius; 0 on a finite space with atomic measure
    /// (every ball contains its center)
    pub r0: f64,
    pub t0: f64,
    pub steps: Vec<EquivalenceStep>,
    /// product of the step constants, covering `t1 -> t2`
    pub bound_constant: f64,
}

impl NormEquivalence {
    pub fn holds(&self) -> bool {
        self.n1 <= self.n2 * (1.0 + 1e-12) + 1e-300 && self.n2 <= self.bound_constant * self.n1 * (1.0 + 1e-10) + 1e-300
    }
}

/// `‖u‖_{phi,t1}` and `‖u‖_{phi,t2}` for `t0 < t1 <= t2`, with the constant
/// obtained by chaining `‖u‖_{3t/2} <= 2V(t)/v(t/8) ‖u‖_t` from `t1` until
/// the scale reaches `t2`. `midpoint` overrides the exhaustive midpoint
/// constant, which costs `O(n^3)`.
pub fn norm_equivalence_check(
    space: &FiniteMeasureSpace,
    u: &impl CochainView,
    phi: &YoungFunction,
    t1: f64,
    t2: f64,
    midpoint: Option<f64>,
) -> Result<NormEquivalence, DegreeOneError> {
    if u.degree() != 1 {
        return Err(DegreeOneError::WrongDegree(u.degree()));
    }
    if !(t1 <= t2) {
        return Err(DegreeOneError::InvalidArgument(format!("need t1 <= t2, got {t1} > {t2}")));
    }
    let c = midpoint.unwrap_or_else(|| spaces::midpoint_constant(space));
    let r0 = 0.0;
    let t0 = (8.0 * c).max(8.0 * r0);
    if t1 <= t0 {
        return Err(DegreeOneError::ScaleTooSmall { t: t1, t0 });
    }
    let n1 = cochain::seminorm(space, u, phi, t1)?;
    let n2 = cochain::seminorm(space, u, phi, t2)?;
    let all: Vec<usize> = (0..space.len()).collect();
    let mut steps = Vec::new();
    let mut t = t1;
    let mut bound = 1.0;
    while t < t2 {
        let big_v = spaces::ball_bounds(space, t, BallKind::Closed, &all).unwrap().big_v;
        let small_v = spaces::ball_bounds(space, t / 8.0, BallKind::Open, &all).unwrap().v;
        let constant = 2.0 * big_v / small_v;
        steps.push(EquivalenceStep { t, big_v, small_v, constant });
        bound *= constant;
        t *= 1.5;
    }
    Ok(NormEquivalence { t1, t2, n1, n2, midpoint_constant: c, r0, t0, steps, bound_constant: bound })
}

/// Feasible set for the primitive in [`dist_to_coboundaries`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Constraint {
    AllFunctions,
    /// `‖f‖_phi <= R` with the space's measure
    NormBudget(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceOptions {
    pub descent: DescentOptions,
    /// inner loop stops when the sup-norm of an accepted step drops below this
    pub step_tol: f64,
    /// outer renormalizations of the objective
    pub max_outer: usize,
    /// outer loop stops when the norm changes by less than this, relatively
    pub outer_rel_tol: f64,
    pub initial: Option<Vec<f64>>,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { descent: DescentOptions::default(), step_tol: 1e-9, max_outer: 30, outer_rel_tol: 1e-9, initial: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterRecord {
    /// normalization used in the modular objective
    pub alpha: f64,
    pub inner_iterations: usize,
    pub objective: f64,
    /// `‖u - df‖_{phi,s}` after the inner minimization
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    pub dist: f64,
    pub f: Vec<f64>,
    pub outer: Vec<OuterRecord>,
    pub inner: Vec<IterationRecord>,
}

struct ResidualModular<'a> {
    phi: &'a YoungFunction,
    pairs: &'a [(usize, usize)],
    u_values: &'a [f64],
    weights: &'a [f64],
    n: usize,
    alpha: f64,
}

impl ResidualModular<'_> {
    #[inline]
    fn residual(&self, f: &[f64], i: usize) -> f64 {
        let (x, y) = self.pairs[i];
        (self.u_values[i] - f[y] + f[x]) / self.alpha
    }
}

impl Objective for ResidualModular<'_> {
    fn value(&self, f: &[f64]) -> f64 {
        exec::sum_by(self.pairs.len(), |i| self.phi.eval(self.residual(f, i)) * self.weights[i])
    }

    fn gradient(&self, f: &[f64], out: &mut [f64]) {
        let coeff = exec::collect_by(self.pairs.len(), |i| self.phi.derivative(self.residual(f, i)) * self.weights[i] / self.alpha);
        out[..self.n].iter_mut().for_each(|g| *g = 0.0);
        for (i, &(x, y)) in self.pairs.iter().enumerate() {
            out[y] -= coeff[i];
            out[x] += coeff[i];
        }
    }
}

/// `inf_f ‖u - df‖_{phi,s}` over the feasible set, by gradient descent on the
/// modular `rho_{phi,s}((u - df)/alpha)`. The normalization `alpha` starts at
/// `‖u‖_{phi,s}` and is reset to the current residual norm after every inner
/// minimization, so the objective stays well scaled as the residual shrinks.
/// Under a norm budget every trial point is projected by radial scaling.
pub fn dist_to_coboundaries(
    space: &FiniteMeasureSpace,
    u: &impl CochainView,
    phi: &YoungFunction,
    s: f64,
    constraint: Constraint,
    opts: &DistanceOptions,
) -> Result<DistanceResult, DegreeOneError> {
    if u.degree() != 1 {
        return Err(DegreeOneError::WrongDegree(u.degree()));
    }
    let n = space.len();
    if let Constraint::NormBudget(r) = constraint {
        if !(r >= 0.0) {
            return Err(DegreeOneError::InvalidArgument(format!("norm budget must be nonnegative, got {r}")));
        }
    }
    let set = spaces::enumerate_simplices(space, 1, s, TupleMode::Ordered)?;
    let pairs: Vec<(usize, usize)> = set.iter().map(|(t, _)| (t[0], t[1])).collect();
    let u_values = cochain::values_on(u, &set);
    let weights = set.weights().to_vec();
    let residual_norm = |f: &[f64]| -> Result<f64, DegreeOneError> {
        let r: Vec<f64> = (0..pairs.len()).map(|i| u_values[i] - f[pairs[i].1] + f[pairs[i].0]).collect();
        Ok(orlicz::luxemburg_parts(phi, &r, &weights)?.norm)
    };
    let mu = space.weights().to_vec();
    let project = |f: &mut [f64]| {
        if let Constraint::NormBudget(r) = constraint {
            let norm = orlicz::luxemburg_parts(phi, f, &mu).map(|e| e.norm).unwrap_or(f64::INFINITY);
            if norm > r {
                let scale = if norm.is_finite() && norm > 0.0 { r / norm } else { 0.0 };
                f.iter_mut().for_each(|v| *v *= scale);
            }
        }
    };
    let mut f = match &opts.initial {
        Some(v) if v.len() == n => v.clone(),
        Some(v) => return Err(DegreeOneError::InvalidArgument(format!("initial guess has {} entries, expected {n}", v.len()))),
        None => vec![0.0; n],
    };
    project(&mut f);
    let mut best = DistanceResult { dist: residual_norm(&f)?, f: f.clone(), outer: Vec::new(), inner: Vec::new() };
    let mut alpha = best.dist;
    for _ in 0..opts.max_outer {
        if alpha <= 0.0 || !alpha.is_finite() {
            break;
        }
        let obj = ResidualModular { phi, pairs: &pairs, u_values: &u_values, weights: &weights, n, alpha };
        let step_tol = opts.step_tol;
        let out = descent::minimize(&obj, best.f.clone(), &opts.descent, Some(&project), &|st| st.step_sup < step_tol);
        let iterations = out.records.len();
        let norm = residual_norm(&out.x)?;
        best.inner.extend(out.records.iter().copied());
        best.outer.push(OuterRecord { alpha, inner_iterations: iterations, objective: out.objective, norm });
        if norm <= best.dist {
            best.dist = norm;
            best.f = out.x.clone();
        }
        match out.reason {
            StopReason::Converged | StopReason::Stalled => {}
            StopReason::LineSearchFailed if norm <= alpha => {}
            reason => {
                return Err(DegreeOneError::NonConvergence { iterations: best.inner.len(), reason, best: Box::new(best) });
            }
        }
        if (alpha - norm).abs() <= opts.outer_rel_tol * alpha {
            break;
        }
        alpha = norm;
    }
    Ok(best)
}

/// Quantities of the free-group example for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F2Report {
    pub epsilon: f64,
    pub n: u32,
    pub radius: u32,
    pub points: usize,
    /// `‖ω_n - ω‖_{phi,1}` by exhaustive enumeration of `X_1^2`
    pub norm_gap: f64,
    /// `epsilon sqrt(log 2 / n^2 + log 3 / n)`
    pub alpha_closed_form: f64,
    /// `norm_gap / alpha_closed_form`
    pub closed_form_ratio: f64,
    /// `(epsilon / n) sqrt(log(3 (3^n - 1)))`, the norm implied by the exact count
    pub alpha_exact_count: f64,
    /// ordered pairs of `X_1^2` where `ω_n - ω` is nonzero
    pub directed_edges: u64,
    /// `3 (3^n - 1)`
    pub directed_edges_formula: u64,
    /// `2 * 3^n`
    pub closed_form_count: u64,
    /// `directed_edges / closed_form_count`
    pub count_ratio: f64,
    /// `rho_{phi,1}((ω_n - ω)/norm_gap)` by enumeration
    pub modular_enumerated: f64,
    /// `3 (3^n - 1) phi(epsilon / (n norm_gap))`
    pub modular_formula: f64,
    /// `‖ω‖_{phi,1}`
    pub omega_norm: f64,
    /// `‖f_n‖_phi`
    pub f_n_norm: f64,
    /// points where `f_n` is nonzero
    pub f_n_support: usize,
    /// pairs of `X_1^2` violating the prescribed values of `ω_n` (with the
    /// outward edges carrying `-epsilon/n`, the sign making `ω_n` exact)
    pub rule_violations: usize,
    pub omega_is_cocycle: bool,
    pub omega_n_is_cocycle: bool,
}

/// The free-group example: `σ = epsilon 1_A` with `A` the words starting with
/// `a`, `ω = dσ` (supported on the pair `{1, a}` at scale 1), and the finitely
/// supported `f_n = epsilon max(0, 1 - |x - a| / n)` on `A`, with `ω_n = df_n`.
#[derive(Debug, Clone)]
pub struct F2Example {
    pub space: FiniteMeasureSpace,
    pub sigma: Vec<f64>,
    pub f_n: Vec<f64>,
    pub report: F2Report,
}

impl F2Example {
    pub fn omega(&self) -> impl CochainView + '_ {
        point_coboundary(&self.sigma)
    }

    pub fn omega_n(&self) -> impl CochainView + '_ {
        point_coboundary(&self.f_n)
    }
}

/// `df` for point values `f`, evaluated lazily.
pub fn point_coboundary(f: &[f64]) -> impl CochainView + '_ {
    FnCochain { n: f.len(), degree: 1, f: move |t: &[usize]| f[t[1]] - f[t[0]] }
}

pub fn f2_example(epsilon: f64, n: u32, radius: u32) -> Result<F2Example, DegreeOneError> {
    f2_example_with(&YoungFunction::exp_inverse_square(), epsilon, n, radius)
}

pub fn f2_example_with(phi: &YoungFunction, epsilon: f64, n: u32, radius: u32) -> Result<F2Example, DegreeOneError> {
    let limit = (2.0f64 / 3.0).sqrt();
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(DegreeOneError::InvalidArgument(format!("epsilon must lie in (0, {limit}), got {epsilon}")));
    }
    if n < 1 {
        return Err(DegreeOneError::InvalidArgument("n must be at least 1".into()));
    }
    if radius < n + 1 {
        return Err(DegreeOneError::TruncationTooSmall { radius, n, needed: n + 1 });
    }
    let space = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), radius)?;
    let points = space.len();
    let in_a = |x: usize| space.word(x).and_then(|w| w.first()) == Some(&1);
    let depth = |x: usize| space.word(x).map_or(0, |w| w.len()) as f64 - 1.0;
    let sigma: Vec<f64> = (0..points).map(|x| if in_a(x) { epsilon } else { 0.0 }).collect();
    let nf = n as f64;
    let f_n: Vec<f64> = (0..points).map(|x| if in_a(x) { epsilon * (1.0 - depth(x) / nf).max(0.0) } else { 0.0 }).collect();

    let set = spaces::enumerate_simplices(&space, 1, 1.0, TupleMode::Ordered)?;
    let gap: Vec<f64> = set.iter().map(|(t, _)| (f_n[t[1]] - f_n[t[0]]) - (sigma[t[1]] - sigma[t[0]])).collect();
    let norm_gap = orlicz::luxemburg_parts(phi, &gap, set.weights())?.norm;
    let directed_edges = gap.iter().filter(|v| **v != 0.0).count() as u64;
    let modular_enumerated = orlicz::scaled_modular(phi, &gap, set.weights(), norm_gap);
    let pow3 = 3u64.pow(n);
    let directed_edges_formula = 3 * (pow3 - 1);
    let modular_formula = directed_edges_formula as f64 * phi.eval(epsilon / (nf * norm_gap));
    let alpha_closed_form = epsilon * (std::f64::consts::LN_2 / (nf * nf) + 3f64.ln() / nf).sqrt();
    let alpha_exact_count = epsilon / nf * (directed_edges_formula as f64).ln().sqrt();

    let omega_vals: Vec<f64> = set.iter().map(|(t, _)| sigma[t[1]] - sigma[t[0]]).collect();
    let omega_norm = orlicz::luxemburg_parts(phi, &omega_vals, set.weights())?.norm;
    let f_n_norm = orlicz::luxemburg_parts(phi, &f_n, space.weights())?.norm;

    // prescribed values of ω_n on X_1^2
    let identity = 0usize;
    let a = space.index_of_label("a").expect("generator a is in the ball");
    let mut rule_violations = 0;
    for (t, _) in set.iter() {
        let (x, y) = (t[0], t[1]);
        let value = f_n[y] - f_n[x];
        let expected = if (x, y) == (identity, a) {
            epsilon
        } else if (x, y) == (a, identity) {
            -epsilon
        } else if in_a(x) && in_a(y) && x != y {
            let (dx, dy) = (depth(x), depth(y));
            if dx.max(dy) > nf {
                0.0
            } else if dy == dx + 1.0 {
                -epsilon / nf
            } else {
                epsilon / nf
            }
        } else {
            0.0
        };
        if (value - expected).abs() > 1e-14 {
            rule_violations += 1;
        }
    }
    // all triples when affordable, otherwise the triples of X_1^3
    let cocycle = |f: &[f64]| -> Result<bool, DegreeOneError> {
        if (points as u128).pow(3) <= EXHAUSTIVE_TRIPLE_CAP {
            Ok(is_cocycle(&point_coboundary(f), COCYCLE_TOL)?.holds)
        } else {
            let triples = spaces::enumerate_simplices(&space, 2, 1.0, TupleMode::Ordered)?;
            Ok(is_cocycle_on(&point_coboundary(f), &triples, COCYCLE_TOL)?.holds)
        }
    };
    let omega_is_cocycle = cocycle(&sigma)?;
    let omega_n_is_cocycle = cocycle(&f_n)?;
    let report = F2Report {
        epsilon,
        n,
        radius,
        points,
        norm_gap,
        alpha_closed_form,
        closed_form_ratio: norm_gap / alpha_closed_form,
        alpha_exact_count,
        directed_edges,
        directed_edges_formula,
        closed_form_count: 2 * pow3,
        count_ratio: directed_edges as f64 / (2 * pow3) as f64,
        modular_enumerated,
        modular_formula,
        omega_norm,
        f_n_norm,
        f_n_support: f_n.iter().filter(|v| **v != 0.0).count(),
        rule_violations,
        omega_is_cocycle,
        omega_n_is_cocycle,
    };
    Ok(F2Example { space, sigma, f_n, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::Cochain;

    #[test]
    fn cocycle_examples() {
        let f = [0.5, -1.0, 2.0, 0.25];
        let df = point_coboundary(&f);
        assert!(is_cocycle(&df, 1e-12).unwrap().holds);
        let ones = Cochain::from_fn(4, 1, |t| if t[0] != t[1] { 1.0 } else { 0.0 }).unwrap();
        let c = is_cocycle(&ones, 1e-10).unwrap();
        assert!(!c.holds && c.worst_violation >= 1.0);
        assert!(matches!(primitive(&ones, 0, 1e-10), Err(DegreeOneError::NotACocycle { .. })));
    }

    #[test]
    fn primitive_examples() {
        let f = [0.5, -1.0, 2.0, 0.25];
        let df = point_coboundary(&f);
        let p0 = primitive(&df, 0, 1e-12).unwrap();
        let p2 = primitive(&df, 2, 1e-12).unwrap();
        for x in 0..4 {
            assert!((p0[x] - (f[x] - f[0])).abs() < 1e-15);
            assert!((p0[x] - p2[x] - df.value(&[0, 2])).abs() < 1e-15);
        }
    }

    #[test]
    fn f2_primitive_is_a_step_function() {
        let ex = f2_example(0.5, 2, 3).unwrap();
        let p = primitive(&ex.omega(), 0, 1e-12).unwrap();
        for x in 0..ex.space.len() {
            let starts_with_a = ex.space.word(x).unwrap().first() == Some(&1);
            assert_eq!(p[x], if starts_with_a { 0.5 } else { 0.0 });
        }
    }

    #[test]
    fn closed_form_value() {
        let ex = f2_example(0.5, 4, 5).unwrap();
        assert!((ex.report.alpha_closed_form - 0.2819).abs() < 1e-4);
        assert_eq!(ex.report.directed_edges, 3 * (81 - 1));
        assert_eq!(ex.report.rule_violations, 0);
        assert!(ex.report.omega_is_cocycle && ex.report.omega_n_is_cocycle);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(f2_example(0.5, 4, 4), Err(DegreeOneError::TruncationTooSmall { .. })));
        assert!(matches!(f2_example(0.9, 2, 3), Err(DegreeOneError::InvalidArgument(_))));
        let p = FiniteMeasureSpace::path(10).unwrap();
        let u = point_coboundary(&[0.0; 10]);
        let phi = YoungFunction::power(2.0).unwrap();
        assert!(matches!(norm_equivalence_check(&p, &u, &phi, 3.0, 6.0, None), Err(DegreeOneError::ScaleTooSmall { .. })));
    }

    #[test]
    fn exact_coboundary_has_zero_distance() {
        let p = FiniteMeasureSpace::path(8).unwrap();
        let f0: Vec<f64> = (0..8).map(|x| ((x * x) as f64 * 0.3).sin()).collect();
        let u = point_coboundary(&f0);
        let phi = YoungFunction::power(2.0).unwrap();
        let r = dist_to_coboundaries(&p, &u, &phi, 1.5, Constraint::AllFunctions, &DistanceOptions::default()).unwrap();
        assert!(r.dist <= 1e-8, "{}", r.dist);
        let shift = r.f[0] - f0[0];
        assert!(r.f.iter().zip(&f0).all(|(a, b)| (a - b - shift).abs() < 1e-7));
    }
}
