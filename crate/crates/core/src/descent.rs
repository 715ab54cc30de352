//! Projected gradient descent with Armijo backtracking.
//!
//! Shared by the distance-to-coboundary and the Dirichlet minimizations.
//! Near a minimizer the Armijo decrease can fall below the rounding error of
//! the objective; when the change in objective is within that noise band the
//! step is accepted on a slope test instead: the directional derivative at
//! the trial point must not exceed `(1 - 2c)` times the initial descent
//! rate, which for a quadratic is the Armijo condition itself. In that band
//! the secant estimate of the line minimizer is tried first, to avoid the
//! two-cycle steepest descent falls into at step lengths near `2 / L`.

use serde::Serialize;

/// Differentiable objective on `R^n`.
pub trait Objective: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Armijo slope factor
    pub armijo_c: f64,
    /// backtracking contraction
    pub contraction: f64,
    pub initial_step: f64,
    /// the next line search starts at this multiple of the last accepted step
    pub growth: f64,
    pub max_backtracks: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iter: 100_000, armijo_c: 1e-4, contraction: 0.5, initial_step: 1.0, growth: 2.0, max_backtracks: 80 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub step_length: f64,
    pub objective: f64,
    pub gradient_sup: f64,
    pub step_sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// the caller's stopping rule accepted the iterate
    Converged,
    MaxIterations,
    /// no acceptable step along the (projected) negative gradient
    LineSearchFailed,
    /// the accepted step no longer moves the iterate
    Stalled,
    /// the objective or gradient became non-finite
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub gradient_sup: f64,
    pub records: Vec<IterationRecord>,
    pub reason: StopReason,
}

impl DescentOutcome {
    pub fn converged(&self) -> bool {
        self.reason == StopReason::Converged
    }
}

/// State handed to the stopping rule after every accepted step (and once
/// before the first one, with `step_sup = INFINITY`).
pub struct StopState<'a> {
    pub x: &'a [f64],
    pub gradient: &'a [f64],
    pub objective: f64,
    pub step_sup: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// In-place map of a trial point back onto the feasible set.
pub type Projection<'a> = &'a dyn Fn(&mut [f64]);

/// Minimizes `obj` from `x0`. `project` maps a trial point back onto the
/// feasible set in place; `stop` decides convergence.
pub fn minimize(
    obj: &dyn Objective,
    x0: Vec<f64>,
    opts: &DescentOptions,
    project: Option<Projection<'_>>,
    stop: &dyn Fn(&StopState) -> bool,
) -> DescentOutcome {
    let n = x0.len();
    let mut x = x0;
    if let Some(p) = project {
        p(&mut x);
    }
    let mut f = obj.value(&x);
    let mut g = vec![0.0; n];
    obj.gradient(&x, &mut g);
    let mut records = Vec::new();
    let mut step = opts.initial_step;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut secant = vec![0.0; n];
    let mut g_secant = vec![0.0; n];
    let finish = |x: Vec<f64>, f: f64, g: &[f64], records: Vec<IterationRecord>, reason| DescentOutcome {
        x,
        objective: f,
        gradient_sup: sup(g),
        records,
        reason,
    };
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, f, &g, records, StopReason::NonFinite);
    }
    if stop(&StopState { x: &x, gradient: &g, objective: f, step_sup: f64::INFINITY }) {
        return finish(x, f, &g, records, StopReason::Converged);
    }
    for iter in 0..opts.max_iter {
        let mut t = step;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                trial[i] = x[i] - t * g[i];
            }
            if let Some(p) = project {
                p(&mut trial);
            }
            let f_trial = obj.value(&trial);
            if !f_trial.is_finite() {
                t *= opts.contraction;
                continue;
            }
            // predicted decrease along the actual (projected) displacement
            let slope0 = crate::exec::sum_by(n, |i| g[i] * (trial[i] - x[i]));
            if slope0 >= 0.0 {
                // projected step is not a descent direction
                t *= opts.contraction;
                continue;
            }
            if f_trial <= f + opts.armijo_c * slope0 {
                obj.gradient(&trial, &mut g_trial);
                accepted = Some((t, f_trial));
                break;
            }
            let noise = 64.0 * f64::EPSILON * f.abs().max(f64::MIN_POSITIVE);
            if (f - f_trial).abs() <= noise {
                obj.gradient(&trial, &mut g_trial);
                let slope_t = crate::exec::sum_by(n, |i| g_trial[i] * (trial[i] - x[i]));
                if slope_t > slope0 {
                    // secant estimate of the line minimizer
                    let tau = slope0 / (slope0 - slope_t);
                    if tau > 0.0 && tau < 1.0 {
                        for i in 0..n {
                            secant[i] = x[i] + tau * (trial[i] - x[i]);
                        }
                        if let Some(p) = project {
                            p(&mut secant);
                        }
                        let f_sec = obj.value(&secant);
                        if (f - f_sec).abs() <= noise || f_sec < f {
                            obj.gradient(&secant, &mut g_secant);
                            let slope_s = crate::exec::sum_by(n, |i| g_secant[i] * (secant[i] - x[i]));
                            if slope_s.abs() < slope_t.abs().min(slope0.abs()) {
                                std::mem::swap(&mut trial, &mut secant);
                                std::mem::swap(&mut g_trial, &mut g_secant);
                                accepted = Some((t * tau, f_sec));
                                break;
                            }
                        }
                    }
                }
                if slope_t <= (1.0 - 2.0 * opts.armijo_c) * slope0.abs() {
                    accepted = Some((t, f_trial));
                    break;
                }
            }
            t *= opts.contraction;
        }
        let Some((t, f_new)) = accepted else {
            return finish(x, f, &g, records, StopReason::LineSearchFailed);
        };
        let step_sup = (0..n).map(|i| (trial[i] - x[i]).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        f = f_new;
        if g.iter().any(|v| !v.is_finite()) {
            return finish(x, f, &g, records, StopReason::NonFinite);
        }
        records.push(IterationRecord { iteration: iter + 1, step_length: t, objective: f, gradient_sup: sup(&g), step_sup });
        if stop(&StopState { x: &x, gradient: &g, objective: f, step_sup }) {
            return finish(x, f, &g, records, StopReason::Converged);
        }
        if step_sup == 0.0 {
            return finish(x, f, &g, records, StopReason::Stalled);
        }
        step = t * opts.growth;
    }
    finish(x, f, &g, records, StopReason::MaxIterations)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        diag: Vec<f64>,
        center: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.diag).zip(&self.center).map(|((x, d), c)| d * (x - c) * (x - c)).sum()
        }
        fn gradient(&self, x: &[f64], out: &mut [f64]) {
            for i in 0..x.len() {
                out[i] = 2.0 * self.diag[i] * (x[i] - self.center[i]);
            }
        }
    }

    #[test]
    fn minimizes_an_ill_conditioned_quadratic() {
        let q = Quadratic { diag: vec![1.0, 10.0, 100.0], center: vec![1.0, -2.0, 3.0] };
        let out = minimize(&q, vec![0.0; 3], &DescentOptions::default(), None, &|s| sup(s.gradient) < 1e-12);
        assert!(out.converged(), "{:?}", out.reason);
        for (x, c) in out.x.iter().zip(&q.center) {
            assert!((x - c).abs() < 1e-12);
        }
        assert!(out.records.windows(2).all(|w| w[1].objective <= w[0].objective));
    }

    #[test]
    fn projection_is_respected() {
        let q = Quadratic { diag: vec![1.0, 1.0], center: vec![3.0, 4.0] };
        let proj = |x: &mut [f64]| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r > 1.0 {
                x[0] /= r;
                x[1] /= r;
            }
        };
        let out = minimize(&q, vec![0.0, 0.0], &DescentOptions::default(), Some(&proj), &|s| s.step_sup < 1e-13);
        assert!((out.x[0] - 0.6).abs() < 1e-6 && (out.x[1] - 0.8).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn reports_max_iterations() {
        let q = Quadratic { diag: vec![1.0], center: vec![1.0] };
        let opts = DescentOptions { max_iter: 1, initial_step: 1e-3, ..Default::default() };
        let out = minimize(&q, vec![0.0], &opts, None, &|_| false);
        assert_eq!(out.reason, StopReason::MaxIterations);
        assert_eq!(out.records.len(), 1);
    }
}
