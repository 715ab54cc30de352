//! Orlicz-Dirichlet energy and φ-harmonic decomposition on finite graphs.
//!
//! Functions live on the vertices of a [`GeneratorStructure`] (a truncated
//! Cayley graph, or any graph with a symmetric generator table). The
//! Dirichlet modular is `rho(f) = sum_x sum_s mu(x) w_s phi(f(xs) - f(x))`,
//! skipping generators that leave the graph. Given `f`, the decomposition
//! minimizes `g -> rho(f - g)` over functions vanishing on the boundary
//! layer; the minimizer `u` and `h = f - u` split `f` into an energy part and
//! a φ-harmonic part.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::descent::{self, DescentOptions, IterationRecord, Objective, StopReason};
use crate::exec;
use crate::spaces::FiniteMeasureSpace;
use crate::young::{YoungError, YoungFunction};

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error("invalid generator structure: {0}")]
    InvalidStructure(String),
    #[error("function has {got} values, graph has {expected} vertices")]
    LengthMismatch { got: usize, expected: usize },
    #[error("g is nonzero ({value}) on boundary vertex {vertex}")]
    BoundaryViolation { vertex: usize, value: f64 },
    #[error("boundary layer is empty: the minimum is g = f - const and the problem is degenerate")]
    DegenerateProblem,
    #[error("no convergence after {iterations} iterations ({reason:?}); residual {}", best.harmonic_residual)]
    NonConvergence { iterations: usize, reason: StopReason, best: Box<DecompositionResult> },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Young(#[from] YoungError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symmetric generator table with vertex weights and a boundary layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorStructure {
    vertex_weights: Vec<f64>,
    /// `neighbor[x][s] = xs`, `None` when it leaves the graph
    neighbor: Vec<Vec<Option<usize>>>,
    inverse: Vec<usize>,
    generator_weights: Vec<f64>,
    boundary: Vec<bool>,
}

impl GeneratorStructure {
    pub fn new(
        vertex_weights: Vec<f64>,
        neighbor: Vec<Vec<Option<usize>>>,
        inverse: Vec<usize>,
        generator_weights: Vec<f64>,
        boundary: Vec<bool>,
    ) -> Result<Self, HarmonicError> {
        let gs = Self { vertex_weights, neighbor, inverse, generator_weights, boundary };
        gs.validate()?;
        Ok(gs)
    }

    /// Structure of a generated space, with the truncation boundary (vertices
    /// missing a generator) as boundary layer and unit generator weights.
    pub fn from_space(space: &FiniteMeasureSpace) -> Result<Self, HarmonicError> {
        let table = space
            .generators()
            .ok_or_else(|| HarmonicError::InvalidStructure("space has no generator table".into()))?;
        let mut boundary = vec![false; space.len()];
        for x in table.truncation_boundary() {
            boundary[x] = true;
        }
        Self::new(space.weights().to_vec(), table.neighbor.clone(), table.inverse.clone(), vec![1.0; table.len()], boundary)
    }

    /// Replaces the boundary layer.
    pub fn with_boundary(mut self, vertices: &[usize]) -> Result<Self, HarmonicError> {
        let mut b = vec![false; self.len()];
        for &v in vertices {
            if v >= self.len() {
                return Err(HarmonicError::InvalidStructure(format!("boundary vertex {v} out of range")));
            }
            b[v] = true;
        }
        self.boundary = b;
        self.validate()?;
        Ok(self)
    }

    pub fn with_generator_weights(mut self, w: Vec<f64>) -> Result<Self, HarmonicError> {
        self.generator_weights = w;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), HarmonicError> {
        let n = self.vertex_weights.len();
        let m = self.inverse.len();
        let bad = |s: String| Err(HarmonicError::InvalidStructure(s));
        if self.neighbor.len() != n || self.boundary.len() != n {
            return bad(format!("{n} vertex weights but {} neighbor rows and {} boundary flags", self.neighbor.len(), self.boundary.len()));
        }
        if self.generator_weights.len() != m {
            return bad(format!("{m} generators but {} generator weights", self.generator_weights.len()));
        }
        if let Some(w) = self.generator_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return bad(format!("generator weight {w} is not positive"));
        }
        if let Some(w) = self.vertex_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return bad(format!("vertex weight {w} is not positive"));
        }
        for (s, &t) in self.inverse.iter().enumerate() {
            if t >= m || self.inverse[t] != s {
                return bad(format!("inverse table is not an involution at generator {s}"));
            }
        }
        for (x, row) in self.neighbor.iter().enumerate() {
            if row.len() != m {
                return bad(format!("vertex {x} has {} generator entries, expected {m}", row.len()));
            }
            for (s, nb) in row.iter().enumerate() {
                match nb {
                    Some(y) if *y >= n => return bad(format!("vertex {x} points to {y}")),
                    Some(y) => {
                        if self.neighbor[*y][self.inverse[s]] != Some(x) {
                            return bad(format!("edge {x} -> {y} by generator {s} has no inverse edge"));
                        }
                    }
                    None if !self.boundary[x] => {
                        return bad(format!("interior vertex {x} is missing generator {s}"));
                    }
                    None => {}
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertex_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_weights.is_empty()
    }

    pub fn generator_count(&self) -> usize {
        self.inverse.len()
    }

    pub fn is_boundary(&self, x: usize) -> bool {
        self.boundary[x]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.boundary[x]).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| !self.boundary[x]).collect()
    }

    pub fn neighbor(&self, x: usize, s: usize) -> Option<usize> {
        self.neighbor[x][s]
    }

    pub fn vertex_weights(&self) -> &[f64] {
        &self.vertex_weights
    }

    pub fn generator_weights(&self) -> &[f64] {
        &self.generator_weights
    }

    /// Full generator neighborhood inside the graph.
    pub fn has_full_neighborhood(&self, x: usize) -> bool {
        self.neighbor[x].iter().all(|n| n.is_some())
    }

    /// Ordered edges `(x, s)` leaving the graph.
    pub fn exiting_edges(&self) -> usize {
        self.neighbor.iter().flatten().filter(|n| n.is_none()).count()
    }

    /// `.gs` format: header `n m`, a line `weights w_1 ... w_m`, a line
    /// `inverse i_1 ... i_m`, `n` lines of `m` neighbor indices (`-` when the
    /// generator leaves the graph), and a final line `boundary v ...`. Vertex
    /// weights come from the space file.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), HarmonicError> {
        let join = |v: Vec<String>| v.join(" ");
        writeln!(w, "{} {}", self.len(), self.generator_count())?;
        writeln!(w, "weights {}", join(self.generator_weights.iter().map(|x| x.to_string()).collect()))?;
        writeln!(w, "inverse {}", join(self.inverse.iter().map(|x| x.to_string()).collect()))?;
        for row in &self.neighbor {
            writeln!(w, "{}", join(row.iter().map(|n| n.map_or("-".to_string(), |y| y.to_string())).collect()))?;
        }
        let b = self.boundary_vertices();
        if b.is_empty() {
            writeln!(w, "boundary")?;
        } else {
            writeln!(w, "boundary {}", join(b.iter().map(|x| x.to_string()).collect()))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HarmonicError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, vertex_weights: Vec<f64>) -> Result<Self, HarmonicError> {
        let lines: Vec<(usize, String)> = r
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|l| (i + 1, l)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let mut it = lines.iter();
        let err = |line: usize, reason: String| HarmonicError::Parse { line, reason };
        let (hl, header) = it.next().ok_or_else(|| err(1, "missing header".into()))?;
        let hf: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| err(*hl, format!("header: {e}"))))
            .collect::<Result<_, _>>()?;
        if hf.len() != 2 {
            return Err(err(*hl, "header must be `n m`".into()));
        }
        let (n, m) = (hf[0], hf[1]);
        if n != vertex_weights.len() {
            return Err(err(*hl, format!("structure has {n} vertices, space has {}", vertex_weights.len())));
        }
        fn tagged<'a>(it: &mut impl Iterator<Item = &'a (usize, String)>, tag: &str) -> Result<(usize, Vec<String>), HarmonicError> {
            let (l, line) = it.next().ok_or_else(|| HarmonicError::Parse { line: 0, reason: format!("missing `{tag}` line") })?;
            let mut f = line.split_whitespace();
            if f.next() != Some(tag) {
                return Err(HarmonicError::Parse { line: *l, reason: format!("expected `{tag}` line") });
            }
            Ok((*l, f.map(|s| s.to_string()).collect()))
        }
        let (wl, wf) = tagged(&mut it, "weights")?;
        let generator_weights: Vec<f64> = wf
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| err(wl, format!("weight `{s}`: {e}"))))
            .collect::<Result<_, _>>()?;
        let (il, inf) = tagged(&mut it, "inverse")?;
        let inverse: Vec<usize> = inf
            .iter()
            .map(|s| s.parse::<usize>().map_err(|e| err(il, format!("inverse `{s}`: {e}"))))
            .collect::<Result<_, _>>()?;
        if generator_weights.len() != m || inverse.len() != m {
            return Err(err(il, format!("expected {m} generator weights and inverses")));
        }
        let mut neighbor = Vec::with_capacity(n);
        for _ in 0..n {
            let (l, line) = it.next().ok_or_else(|| err(0, "missing neighbor rows".into()))?;
            let row: Vec<Option<usize>> = line
                .split_whitespace()
                .map(|s| if s == "-" { Ok(None) } else { s.parse::<usize>().map(Some).map_err(|e| err(*l, format!("`{s}`: {e}"))) })
                .collect::<Result<_, _>>()?;
            if row.len() != m {
                return Err(err(*l, format!("expected {m} neighbors, found {}", row.len())));
            }
            neighbor.push(row);
        }
        let (bl, bf) = tagged(&mut it, "boundary")?;
        let mut boundary = vec![false; n];
        for s in bf {
            let v: usize = s.parse().map_err(|e| err(bl, format!("boundary `{s}`: {e}")))?;
            if v >= n {
                return Err(err(bl, format!("boundary vertex {v} out of range")));
            }
            boundary[v] = true;
        }
        Self::new(vertex_weights, neighbor, inverse, generator_weights, boundary)
    }

    pub fn load(path: impl AsRef<Path>, vertex_weights: Vec<f64>) -> Result<Self, HarmonicError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?), vertex_weights)
    }
}

fn check_len(gs: &GeneratorStructure, f: &[f64]) -> Result<(), HarmonicError> {
    if f.len() != gs.len() {
        return Err(HarmonicError::LengthMismatch { got: f.len(), expected: gs.len() });
    }
    Ok(())
}

fn check_boundary(gs: &GeneratorStructure, g: &[f64]) -> Result<(), HarmonicError> {
    check_len(gs, g)?;
    if let Some(v) = (0..gs.len()).find(|&v| gs.boundary[v] && g[v] != 0.0) {
        return Err(HarmonicError::BoundaryViolation { vertex: v, value: g[v] });
    }
    Ok(())
}

/// `rho_{phi,S}(f)` and the number of ordered edges skipped because they
/// leave the graph.
pub fn dirichlet_modular_detailed(phi: &YoungFunction, f: &[f64], gs: &GeneratorStructure) -> Result<(f64, usize), HarmonicError> {
    check_len(gs, f)?;
    let value = exec::sum_by(gs.len(), |x| {
        let mut acc = 0.0;
        for (s, nb) in gs.neighbor[x].iter().enumerate() {
            if let Some(y) = *nb {
                acc += gs.generator_weights[s] * phi.eval(f[y] - f[x]);
            }
        }
        gs.vertex_weights[x] * acc
    });
    Ok((value, gs.exiting_edges()))
}

pub fn dirichlet_modular(phi: &YoungFunction, f: &[f64], gs: &GeneratorStructure) -> Result<f64, HarmonicError> {
    Ok(dirichlet_modular_detailed(phi, f, gs)?.0)
}

/// Luxemburg norm `‖f‖_{phi,S}` of the edge differences.
pub fn dirichlet_norm(phi: &YoungFunction, f: &[f64], gs: &GeneratorStructure) -> Result<f64, HarmonicError> {
    check_len(gs, f)?;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for x in 0..gs.len() {
        for (s, nb) in gs.neighbor[x].iter().enumerate() {
            if let Some(y) = *nb {
                values.push(f[y] - f[x]);
                weights.push(gs.vertex_weights[x] * gs.generator_weights[s]);
            }
        }
    }
    crate::orlicz::luxemburg_parts(phi, &values, &weights)
        .map(|e| e.norm)
        .map_err(|e| HarmonicError::InvalidStructure(e.to_string()))
}

/// `Δ_phi f(x) = sum_s w_s phi'(f(xs) - f(x))` on vertices with a full
/// generator neighborhood, `None` elsewhere.
pub fn phi_laplacian(phi: &YoungFunction, f: &[f64], gs: &GeneratorStructure) -> Result<Vec<Option<f64>>, HarmonicError> {
    check_len(gs, f)?;
    Ok(exec::collect_by(gs.len(), |x| laplacian_at(phi, f, gs, x)))
}

fn laplacian_at(phi: &YoungFunction, f: &[f64], gs: &GeneratorStructure, x: usize) -> Option<f64> {
    let mut acc = 0.0;
    for (s, nb) in gs.neighbor[x].iter().enumerate() {
        acc += gs.generator_weights[s] * phi.derivative(f[(*nb)?] - f[x]);
    }
    Some(acc)
}

/// `max |Δ_phi h|` over interior (non-boundary) vertices.
pub fn harmonic_residual(phi: &YoungFunction, h: &[f64], gs: &GeneratorStructure) -> Result<f64, HarmonicError> {
    check_len(gs, h)?;
    let interior = gs.interior_vertices();
    Ok(exec::max_by(interior.len(), |i| laplacian_at(phi, h, gs, interior[i]).map_or(f64::NAN, f64::abs)).max(0.0))
}

/// `I^f(g) = rho_{phi,S}(f - g)` for `g` vanishing on the boundary layer.
pub fn energy(phi: &YoungFunction, f: &[f64], g: &[f64], gs: &GeneratorStructure) -> Result<f64, HarmonicError> {
    check_len(gs, f)?;
    check_boundary(gs, g)?;
    let h: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    dirichlet_modular(phi, &h, gs)
}

/// Gradient of `g -> rho(h)` with `h = f - g` at every vertex, before
/// restricting to the interior. Computed edge by edge: the edge `x -> xs`
/// contributes `+mu(x) w_s phi'(h(xs) - h(x))` at `x` and the negative at `xs`.
fn full_gradient(phi: &YoungFunction, h: &[f64], gs: &GeneratorStructure) -> Vec<f64> {
    exec::collect_by(gs.len(), |v| {
        let mut acc = 0.0;
        for (s, nb) in gs.neighbor[v].iter().enumerate() {
            if let Some(y) = *nb {
                // outgoing edge v -> vs
                acc += gs.vertex_weights[v] * gs.generator_weights[s] * phi.derivative(h[y] - h[v]);
                // incoming edge x -> x s' = v with s' = s^{-1}, x = vs
                let t = gs.inverse[s];
                acc -= gs.vertex_weights[y] * gs.generator_weights[t] * phi.derivative(h[v] - h[y]);
            }
        }
        acc
    })
}

/// Gradient of `I^f` at `g` with respect to the interior values of `g`
/// (zero on the boundary layer). With unit generator weights and
/// constant vertex weights this is `2 mu(v) Δ_phi(f - g)(v)`.
pub fn gateaux_gradient(phi: &YoungFunction, f: &[f64], g: &[f64], gs: &GeneratorStructure) -> Result<Vec<f64>, HarmonicError> {
    check_len(gs, f)?;
    check_boundary(gs, g)?;
    let h: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    let mut grad = full_gradient(phi, &h, gs);
    for (v, x) in grad.iter_mut().enumerate() {
        if gs.boundary[v] {
            *x = 0.0;
        }
    }
    Ok(grad)
}

/// Directional derivative of `I^f` at `g` along `delta` (which must vanish
/// on the boundary layer).
pub fn gateaux_derivative(phi: &YoungFunction, f: &[f64], g: &[f64], delta: &[f64], gs: &GeneratorStructure) -> Result<f64, HarmonicError> {
    check_boundary(gs, delta)?;
    let grad = gateaux_gradient(phi, f, g, gs)?;
    Ok(exec::sum_by(grad.len(), |i| grad[i] * delta[i]))
}

/// `I^f_u(g) = sum_x sum_s mu(x) w_s phi'((f-u)(xs) - (f-u)(x)) (g(xs) - g(x))`,
/// the derivative of `t -> rho(f - u + t g)` at 0.
pub fn energy_functional(phi: &YoungFunction, f: &[f64], u: &[f64], g: &[f64], gs: &GeneratorStructure) -> Result<f64, HarmonicError> {
    check_len(gs, f)?;
    check_len(gs, u)?;
    check_len(gs, g)?;
    Ok(exec::sum_by(gs.len(), |x| {
        let mut acc = 0.0;
        for (s, nb) in gs.neighbor[x].iter().enumerate() {
            if let Some(y) = *nb {
                let dh = (f[y] - u[y]) - (f[x] - u[x]);
                acc += gs.generator_weights[s] * phi.derivative(dh) * (g[y] - g[x]);
            }
        }
        gs.vertex_weights[x] * acc
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionResult {
    /// minimizer, zero on the boundary layer
    pub u: Vec<f64>,
    /// `f - u`
    pub h: Vec<f64>,
    pub energy: f64,
    /// `max |Δ_phi h|` over interior vertices
    pub harmonic_residual: f64,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecomposeOptions {
    /// target for the interior harmonic residual
    pub tol: f64,
    pub descent: DescentOptions,
    /// starting point (interior values; boundary entries are zeroed)
    pub initial: Option<Vec<f64>>,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, descent: DescentOptions::default(), initial: None }
    }
}

struct EnergyObjective<'a> {
    phi: &'a YoungFunction,
    f: &'a [f64],
    gs: &'a GeneratorStructure,
    interior: &'a [usize],
}

impl EnergyObjective<'_> {
    fn h(&self, z: &[f64]) -> Vec<f64> {
        let mut h = self.f.to_vec();
        for (k, &v) in self.interior.iter().enumerate() {
            h[v] -= z[k];
        }
        h
    }
}

impl Objective for EnergyObjective<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        dirichlet_modular(self.phi, &self.h(z), self.gs).expect("lengths checked")
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let grad = full_gradient(self.phi, &self.h(z), self.gs);
        for (k, &v) in self.interior.iter().enumerate() {
            out[k] = grad[v];
        }
    }
}

/// Minimizes `I^f` over functions vanishing on the boundary layer by gradient
/// descent with Armijo backtracking, stopping once the interior harmonic
/// residual of `h = f - g` is at most `opts.tol`.
pub fn harmonic_decompose(
    phi: &YoungFunction,
    f: &[f64],
    gs: &GeneratorStructure,
    opts: &DecomposeOptions,
) -> Result<DecompositionResult, HarmonicError> {
    check_len(gs, f)?;
    if gs.boundary.iter().all(|b| !b) {
        return Err(HarmonicError::DegenerateProblem);
    }
    let interior = gs.interior_vertices();
    let z0: Vec<f64> = match &opts.initial {
        Some(g) => {
            check_len(gs, g)?;
            interior.iter().map(|&v| g[v]).collect()
        }
        None => vec![0.0; interior.len()],
    };
    let obj = EnergyObjective { phi, f, gs, interior: &interior };
    let tol = opts.tol;
    let stop = |st: &descent::StopState| {
        if st.gradient.iter().any(|g| g.abs() > tol) {
            return false;
        }
        let h = obj.h(st.x);
        interior.iter().all(|&v| laplacian_at(phi, &h, gs, v).is_some_and(|l| l.abs() <= tol))
    };
    let out = descent::minimize(&obj, z0, &opts.descent, None, &stop);
    let mut u = vec![0.0; gs.len()];
    for (k, &v) in interior.iter().enumerate() {
        u[v] = out.x[k];
    }
    let h: Vec<f64> = f.iter().zip(&u).map(|(a, b)| a - b).collect();
    let residual = harmonic_residual(phi, &h, gs)?;
    let converged = out.converged();
    let result = DecompositionResult { u, h, energy: out.objective, harmonic_residual: residual, converged, iterations: out.records };
    if converged {
        Ok(result)
    } else {
        Err(HarmonicError::NonConvergence { iterations: result.iterations.len(), reason: out.reason, best: Box::new(result) })
    }
}

/// Both sides of `rho_psi(phi'(df)) <= (D - 1) rho_phi(df)` over the edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateBound {
    pub lhs: f64,
    pub rhs: f64,
    pub doubling_constant: f64,
}

impl ConjugateBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9) + 1e-300
    }
}

pub fn conjugate_bound_check(
    phi: &YoungFunction,
    doubling_constant: f64,
    f: &[f64],
    gs: &GeneratorStructure,
) -> Result<ConjugateBound, HarmonicError> {
    check_len(gs, f)?;
    let terms: Vec<Result<f64, YoungError>> = exec::collect_by(gs.len(), |x| {
        let mut acc = 0.0;
        for (s, nb) in gs.neighbor[x].iter().enumerate() {
            if let Some(y) = *nb {
                acc += gs.generator_weights[s] * phi.conjugate_eval(phi.derivative(f[y] - f[x]))?;
            }
        }
        Ok(gs.vertex_weights[x] * acc)
    });
    let mut lhs_terms = Vec::with_capacity(terms.len());
    for t in terms {
        lhs_terms.push(t?);
    }
    let lhs = exec::pairwise_sum(&lhs_terms);
    let rhs = (doubling_constant - 1.0) * dirichlet_modular(phi, f, gs)?;
    Ok(ConjugateBound { lhs, rhs, doubling_constant })
}

/// Report of the integer-line example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZExampleReport {
    pub n: usize,
    pub phi: String,
    pub converged: bool,
    pub harmonic_residual: f64,
    pub iterations: usize,
    /// `max - min` of the increments `h(k+1) - h(k)`
    pub increment_spread: f64,
    pub spread_tolerance: f64,
    pub increments_constant: bool,
    /// common increment of the harmonic part
    pub slope: f64,
    /// `(N, rho_{phi,S}(h_c))` for the linear function of slope `slope` on
    /// paths of growing length
    pub modular_growth: Vec<(usize, f64)>,
    /// false when the modular of the linear harmonic grows with `N`, i.e.
    /// it cannot come from a finite-modular function on the whole line
    pub passes_finite_modular: bool,
    /// with equal boundary data the harmonic part is constant: its spread
    pub constrained_spread: f64,
    pub constrained_residual: f64,
    /// largest |increment| of the constrained solution
    pub constrained_max_increment: f64,
    /// `(phi')^{-1}(N r)`, the increment bound implied by residual `r`
    pub constrained_bound: f64,
    pub constrained_is_constant: bool,
}

/// On the path `0..=N` with boundary `{0, N}`: the harmonic part of a
/// non-harmonic `f` has constant increments; a nonconstant linear harmonic
/// function has modular growing linearly in `N`; and with equal boundary data
/// the harmonic part is constant.
pub fn z_example(phi: &YoungFunction, n: usize, tol: f64, spread_tolerance: f64) -> Result<ZExampleReport, HarmonicError> {
    if n < 2 {
        return Err(HarmonicError::InvalidStructure("path needs at least three points".into()));
    }
    let space = FiniteMeasureSpace::path(n + 1).map_err(|e| HarmonicError::InvalidStructure(e.to_string()))?;
    let gs = GeneratorStructure::from_space(&space)?;
    let nf = n as f64;
    let f: Vec<f64> = (0..=n).map(|k| {
        let x = k as f64;
        x + 0.3 * (x * x / nf) * ((x * 0.7).sin() + 1.0)
    }).collect();
    let opts = DecomposeOptions { tol, ..Default::default() };
    let (res, converged) = match harmonic_decompose(phi, &f, &gs, &opts) {
        Ok(r) => (r, true),
        Err(HarmonicError::NonConvergence { best, .. }) => (*best, false),
        Err(e) => return Err(e),
    };
    let incs: Vec<f64> = res.h.windows(2).map(|w| w[1] - w[0]).collect();
    let (lo, hi) = incs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let spread = hi - lo;
    let slope = incs.iter().sum::<f64>() / incs.len() as f64;
    let mut modular_growth = Vec::new();
    for m in [n, 2 * n, 4 * n] {
        let p = FiniteMeasureSpace::path(m + 1).map_err(|e| HarmonicError::InvalidStructure(e.to_string()))?;
        let g = GeneratorStructure::from_space(&p)?;
        let lin: Vec<f64> = (0..=m).map(|k| slope * k as f64).collect();
        modular_growth.push((m, dirichlet_modular(phi, &lin, &g)?));
    }
    let first = modular_growth[0].1;
    let last = modular_growth[2].1;
    let passes_finite_modular = !(last > first * (1.0 + 1e-9) && last > 0.0);

    let flat: Vec<f64> = (0..=n).map(|k| if k == 0 || k == n { 1.0 } else { 1.0 + ((k * 13 % 7) as f64 - 3.0) * 0.2 }).collect();
    let (cres, _) = match harmonic_decompose(phi, &flat, &gs, &opts) {
        Ok(r) => (r, true),
        Err(HarmonicError::NonConvergence { best, .. }) => (*best, false),
        Err(e) => return Err(e),
    };
    let (clo, chi) = cres.h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let max_inc = cres.h.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    // interior fluxes phi'(δ_k) differ by at most r between neighbours and the
    // increments sum to zero, so every |phi'(δ_k)| is at most N r
    let bound = inverse_derivative(phi, nf * cres.harmonic_residual);
    Ok(ZExampleReport {
        n,
        phi: phi.name(),
        converged,
        harmonic_residual: res.harmonic_residual,
        iterations: res.iterations.len(),
        increment_spread: spread,
        spread_tolerance,
        increments_constant: spread <= spread_tolerance,
        slope,
        modular_growth,
        passes_finite_modular,
        constrained_spread: chi - clo,
        constrained_residual: cres.harmonic_residual,
        constrained_max_increment: max_inc,
        constrained_bound: bound,
        constrained_is_constant: max_inc <= bound * (1.0 + 1e-9) + 1e-15,
    })
}

/// Smallest `t >= 0` with `phi'(t) >= y`, by bisection.
fn inverse_derivative(phi: &YoungFunction, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while phi.derivative(hi) < y {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi.derivative(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Group;

    fn path_gs(n: usize) -> GeneratorStructure {
        GeneratorStructure::from_space(&FiniteMeasureSpace::path(n).unwrap()).unwrap()
    }

    #[test]
    fn modular_examples() {
        let phi = YoungFunction::power(2.0).unwrap();
        let gs = path_gs(6);
        assert_eq!(dirichlet_modular(&phi, &[3.0; 6], &gs).unwrap(), 0.0);
        let lin: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let (rho, skipped) = dirichlet_modular_detailed(&phi, &lin, &gs).unwrap();
        assert_eq!(rho, 10.0);
        assert_eq!(skipped, 2);
        let twice: Vec<f64> = lin.iter().map(|x| 2.0 * x).collect();
        assert!(dirichlet_modular(&phi, &twice, &gs).unwrap() >= 2.0 * rho);
    }

    #[test]
    fn laplacian_examples() {
        let phi = YoungFunction::power_over_p(3.0).unwrap();
        let gs = path_gs(7);
        let lin: Vec<f64> = (0..7).map(|k| 0.7 * k as f64).collect();
        let lap = phi_laplacian(&phi, &lin, &gs).unwrap();
        assert!(lap[0].is_none() && lap[6].is_none());
        assert!(lap[1..6].iter().all(|l| l.unwrap().abs() < 1e-14));
        let sq = YoungFunction::power(2.0).unwrap();
        let f = [0.0, 1.0, 4.0, 2.0, 5.0, 5.0, 1.0];
        let lap = phi_laplacian(&sq, &f, &gs).unwrap();
        for x in 1..6 {
            let graph = (f[x + 1] - f[x]) + (f[x - 1] - f[x]);
            assert!((lap[x].unwrap() - 2.0 * graph).abs() < 1e-13);
        }
    }

    #[test]
    fn energy_errors() {
        let phi = YoungFunction::power(2.0).unwrap();
        let gs = path_gs(4);
        let f = [1.0, 2.0, 0.0, 3.0];
        assert_eq!(energy(&phi, &f, &[0.0; 4], &gs).unwrap(), dirichlet_modular(&phi, &f, &gs).unwrap());
        assert!(matches!(energy(&phi, &f, &[1.0, 0.0, 0.0, 0.0], &gs), Err(HarmonicError::BoundaryViolation { vertex: 0, .. })));
        let interior = GeneratorStructure::from_space(&FiniteMeasureSpace::path(4).unwrap()).unwrap().with_boundary(&[]);
        assert!(interior.is_err());
    }

    #[test]
    fn gradient_is_twice_the_laplacian() {
        let phi = YoungFunction::power_over_p(3.0).unwrap();
        let gs = path_gs(8);
        let f: Vec<f64> = (0..8).map(|k| ((k * k) as f64 * 0.37).sin()).collect();
        let g = [0.0, 0.2, -0.1, 0.4, 0.0, 0.3, -0.2, 0.0];
        let grad = gateaux_gradient(&phi, &f, &g, &gs).unwrap();
        let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        let lap = phi_laplacian(&phi, &h, &gs).unwrap();
        for v in 1..7 {
            assert!((grad[v] - 2.0 * lap[v].unwrap()).abs() < 1e-13);
        }
        assert_eq!((grad[0], grad[7]), (0.0, 0.0));
        // the functional is minus the directional derivative of the energy
        let delta = [0.0, 1.0, 0.5, -0.3, 0.2, 0.0, 0.7, 0.0];
        let dd = gateaux_derivative(&phi, &f, &g, &delta, &gs).unwrap();
        let fun = energy_functional(&phi, &f, &g, &delta, &gs).unwrap();
        assert!((dd + fun).abs() < 1e-13);
    }

    #[test]
    fn quadratic_decomposition_is_linear_interpolation() {
        let phi = YoungFunction::power(2.0).unwrap();
        let gs = path_gs(11).with_boundary(&[0, 10]).unwrap();
        let f: Vec<f64> = (0..11).map(|n| (n * n) as f64).collect();
        let r = harmonic_decompose(&phi, &f, &gs, &DecomposeOptions { tol: 1e-10, ..Default::default() }).unwrap();
        assert!(r.harmonic_residual <= 1e-10);
        for n in 0..11 {
            assert!((r.h[n] - 10.0 * n as f64).abs() < 1e-8, "h({n}) = {}", r.h[n]);
            assert!((r.u[n] + r.h[n] - f[n]).abs() < 1e-12);
        }
        assert!(r.iterations.windows(2).all(|w| w[1].objective <= w[0].objective * (1.0 + 1e-13)));
    }

    #[test]
    fn quartic_decomposition_has_constant_flux() {
        let phi = YoungFunction::power_over_p(4.0).unwrap();
        let gs = path_gs(11).with_boundary(&[0, 10]).unwrap();
        let f: Vec<f64> = (0..11).map(|n| (n * n) as f64).collect();
        let r = harmonic_decompose(&phi, &f, &gs, &DecomposeOptions { tol: 1e-8, ..Default::default() }).unwrap();
        let flux: Vec<f64> = r.h.windows(2).map(|w| phi.derivative(w[1] - w[0])).collect();
        let spread = flux.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - flux.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-7, "{flux:?}");
    }

    #[test]
    fn harmonic_input_needs_no_correction() {
        let phi = YoungFunction::power(2.0).unwrap();
        let gs = path_gs(9);
        let f: Vec<f64> = (0..9).map(|n| 3.0 - 0.5 * n as f64).collect();
        let r = harmonic_decompose(&phi, &f, &gs, &DecomposeOptions::default()).unwrap();
        assert!(r.u.iter().all(|v| v.abs() < 1e-12));
        assert!(r.iterations.is_empty());
    }

    #[test]
    fn degenerate_and_nonconvergent() {
        let phi = YoungFunction::power(2.0).unwrap();
        let p = FiniteMeasureSpace::path(5).unwrap();
        let t = p.generators().unwrap();
        let mut nb = t.neighbor.clone();
        // close the path into a cycle so no vertex is forced onto the boundary
        nb[0][1] = Some(4);
        nb[4][0] = Some(0);
        let cycle = GeneratorStructure::new(vec![1.0; 5], nb, t.inverse.clone(), vec![1.0, 1.0], vec![false; 5]).unwrap();
        assert!(matches!(harmonic_decompose(&phi, &[0.0, 1.0, 0.0, 2.0, 0.0], &cycle, &DecomposeOptions::default()), Err(HarmonicError::DegenerateProblem)));
        let gs = path_gs(30);
        let f: Vec<f64> = (0..30).map(|n| ((n * n) as f64).sin()).collect();
        let opts = DecomposeOptions { tol: 1e-14, descent: DescentOptions { max_iter: 5, ..Default::default() }, initial: None };
        match harmonic_decompose(&phi, &f, &gs, &opts) {
            Err(HarmonicError::NonConvergence { best, .. }) => assert_eq!(best.iterations.len(), 5),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn conjugate_bound_for_squares() {
        let phi = YoungFunction::power(2.0).unwrap();
        let gs = GeneratorStructure::from_space(&FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 2).unwrap()).unwrap();
        let f: Vec<f64> = (0..gs.len()).map(|k| (k as f64 * 0.9).cos()).collect();
        let c = conjugate_bound_check(&phi, 4.0, &f, &gs).unwrap();
        assert!(c.holds());
        assert!((c.lhs - c.rhs / 3.0).abs() < 1e-6 * c.lhs);
        let z = conjugate_bound_check(&phi, 4.0, &vec![2.0; gs.len()], &gs).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn structure_file_round_trip() {
        let space = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 2).unwrap();
        let gs = GeneratorStructure::from_space(&space).unwrap();
        let mut buf = Vec::new();
        gs.write_to(&mut buf).unwrap();
        let back = GeneratorStructure::read_from(buf.as_slice(), space.weights().to_vec()).unwrap();
        assert_eq!(back, gs);
        let broken = String::from_utf8(buf).unwrap().replacen("inverse 1 0", "inverse 0 1", 1);
        assert!(GeneratorStructure::read_from(broken.as_bytes(), space.weights().to_vec()).is_err());
    }

    #[test]
    fn z_example_report() {
        let phi = YoungFunction::power_over_p(3.0).unwrap();
        let r = z_example(&phi, 20, 1e-10, 1e-6).unwrap();
        assert!(r.converged && r.increments_constant, "{r:?}");
        assert!(!r.passes_finite_modular);
        assert!(r.constrained_is_constant, "{r:?}");
    }
}
