//! Runners and report types behind the `orlicz-lab` executable.
//!
//! Every command produces a [`Report`]: a versioned JSON document echoing the
//! configuration next to the result. Reports carry no timestamps, so the same
//! configuration and seed always serialize to the same bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use orlicz_core::cochain::{self, Cochain, CochainView};
use orlicz_core::degree_one::{self, F2Report};
use orlicz_core::descent::IterationRecord;
use orlicz_core::harmonic::{self, DecomposeOptions, GeneratorStructure, HarmonicError, ZExampleReport};
use orlicz_core::orlicz::WeightedVector;
use orlicz_core::spaces::{self, BallKind, FiniteMeasureSpace, GeometryStats, Group};
use orlicz_core::transfer::{self, HomotopyResidual, QiConstants, QuasiIsometry};
use orlicz_core::young::{self, BesovReport, BesovVerdict, YoungFunction, YoungSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Raised when a configuration file or value cannot be parsed; the binary
/// maps it to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: C,
    pub result: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(command: impl Into<String>, config: C, result: R) -> Self {
        Self { schema_version: SCHEMA_VERSION, artifact: ARTIFACT, version: VERSION, command: command.into(), config, result }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        let json = self.to_json()?;
        match path {
            Some(p) => std::fs::write(p, json).with_context(|| format!("writing {}", p.display()))?,
            None => std::io::stdout().write_all(json.as_bytes())?,
        }
        Ok(())
    }
}

pub fn parse_phi(spec: &str) -> Result<YoungFunction> {
    let parsed: YoungSpec = spec.parse().map_err(|e| ConfigError(format!("phi `{spec}`: {e}")))?;
    Ok(parsed.build()?)
}

/// Reads a JSON configuration file; failures are [`ConfigError`]s.
pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?)
}

// ---------------------------------------------------------------- spaces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSource {
    Path { n: usize },
    Grid { w: usize, h: usize },
    /// `group` is `f<rank>` or `z<rank>`
    Cayley { group: String, radius: u32 },
    Uniform { n: usize, d: f64 },
}

impl SpaceSource {
    pub fn build(&self) -> Result<FiniteMeasureSpace> {
        Ok(match self {
            SpaceSource::Path { n } => FiniteMeasureSpace::path(*n)?,
            SpaceSource::Grid { w, h } => FiniteMeasureSpace::grid(*w, *h)?,
            SpaceSource::Cayley { group, radius } => {
                let g: Group = group.parse().map_err(|e| ConfigError(format!("group `{group}`: {e}")))?;
                FiniteMeasureSpace::cayley_ball(g, *radius)?
            }
            SpaceSource::Uniform { n, d } => FiniteMeasureSpace::uniform(*n, *d)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpaceSummary {
    pub description: String,
    pub points: usize,
    pub total_measure: f64,
    pub diameter: f64,
    pub truncation_boundary: usize,
    pub space_file: PathBuf,
    pub generator_file: Option<PathBuf>,
    pub geometry: Option<GeometryStats>,
}

/// Builds a space, saves it as `.sp` and, when the space has generators and
/// `gen_out` is given, its generator structure as `.gs`.
pub fn spaces_gen(source: &SpaceSource, out: &Path, gen_out: Option<&Path>, stats_radius: Option<f64>) -> Result<SpaceSummary> {
    let space = source.build()?;
    space.save(out).with_context(|| format!("writing {}", out.display()))?;
    if let Some(g) = gen_out {
        GeneratorStructure::from_space(&space)?.save(g).with_context(|| format!("writing {}", g.display()))?;
    }
    let geometry = match stats_radius {
        Some(r) if r > 0.0 => Some(spaces::geometry_stats(&space, r, BallKind::Closed)),
        Some(r) => bail!(ConfigError(format!("stats radius must be positive, got {r}"))),
        None => None,
    };
    Ok(SpaceSummary {
        description: space.description().to_string(),
        points: space.len(),
        total_measure: space.total_measure(),
        diameter: space.diameter(),
        truncation_boundary: space.truncation_boundary().len(),
        space_file: out.to_path_buf(),
        generator_file: gen_out.map(Path::to_path_buf),
        geometry,
    })
}

pub fn load_space(path: &Path) -> Result<FiniteMeasureSpace> {
    FiniteMeasureSpace::load(path).with_context(|| format!("reading space {}", path.display()))
}

// -------------------------------------------------------------- cochains

#[derive(Debug, Clone, Serialize)]
pub struct CoboundaryReport {
    pub degree_in: usize,
    pub degree_out: usize,
    pub nonzero_out: usize,
    pub max_abs_out: f64,
}

pub fn cochain_d(space: &Path, input: &Path, out: &Path) -> Result<CoboundaryReport> {
    let space = load_space(space)?;
    let u = Cochain::load(input, space.len(), None).with_context(|| format!("reading cochain {}", input.display()))?;
    let du = cochain::coboundary(&u)?;
    du.save(out).with_context(|| format!("writing {}", out.display()))?;
    Ok(CoboundaryReport {
        degree_in: u.degree(),
        degree_out: du.degree(),
        nonzero_out: du.nonzero_entries().len(),
        max_abs_out: cochain::max_abs(&du)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeminormReport {
    pub phi: String,
    pub degree: usize,
    pub scale: f64,
    pub simplices: usize,
    pub norm: f64,
    pub modular_at_norm: f64,
    pub bisection_steps: usize,
}

pub fn cochain_norm(space: &Path, input: &Path, phi: &str, s: f64) -> Result<SeminormReport> {
    let space = load_space(space)?;
    let phi_fn = parse_phi(phi)?;
    let u = Cochain::load(input, space.len(), None).with_context(|| format!("reading cochain {}", input.display()))?;
    let set = spaces::enumerate_simplices(&space, u.degree(), s, spaces::TupleMode::Ordered)?;
    let e = cochain::seminorm_on(&u, &phi_fn, &set)?;
    Ok(SeminormReport {
        phi: phi_fn.name(),
        degree: u.degree(),
        scale: s,
        simplices: set.len(),
        norm: e.norm,
        modular_at_norm: e.modular_at_norm,
        bisection_steps: e.bisection_steps,
    })
}

// -------------------------------------------------------------- transfer

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub points_x: usize,
    pub points_y: usize,
    pub forward: QiConstants,
    pub backward: QiConstants,
    /// `sup d(F̄F x, x)` and `sup d(FF̄ y, y)`
    pub closeness: f64,
    pub kernel_radius: f64,
    pub homotopy: Vec<HomotopyResidual>,
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks the quasi-isometry `map: X -> Y`, derives its nearest
/// quasi-inverse (unless `fbar` is given), and evaluates the homotopy
/// identity on seeded random cochains in degrees 0 and 1.
pub fn transfer_verify(
    x: &FiniteMeasureSpace,
    y: &FiniteMeasureSpace,
    map: Vec<usize>,
    fbar: Option<Vec<usize>>,
    lambda: f64,
    k: f64,
    seed: u64,
    tolerance: f64,
) -> Result<TransferReport> {
    if !(lambda >= 1.0) {
        bail!(ConfigError(format!("lambda must be at least 1, got {lambda}")));
    }
    let f = QuasiIsometry::with_tightest(x, y, map, lambda)?;
    let fbar = match fbar {
        Some(m) => QuasiIsometry::with_tightest(y, x, m, lambda)?,
        None => f.nearest_quasi_inverse(x, y)?,
    };
    let forward = transfer::tightest_constants(x, y, f.map(), lambda)?;
    let backward = transfer::tightest_constants(y, x, fbar.map(), lambda)?;
    let k_x = transfer::ball_kernel(x, k)?;
    let k_y = transfer::ball_kernel(y, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut homotopy = Vec::new();
    for degree in 0..2 {
        let n = x.len();
        let values: Vec<f64> = (0..n.pow(degree as u32 + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = Cochain::from_fn(n, degree, |t| values[t.iter().fold(0, |a, &i| a * n + i)])?;
        homotopy.push(transfer::homotopy_identity_residual(x, y, &f, &fbar, &k_x, &k_y, &u)?);
    }
    let holds = homotopy.iter().all(|h| h.residual <= tolerance);
    Ok(TransferReport {
        points_x: x.len(),
        points_y: y.len(),
        forward,
        backward,
        closeness: transfer::closeness_constant(x, y, &f, &fbar),
        kernel_radius: k,
        homotopy,
        tolerance,
        holds,
    })
}

pub fn read_map_file(path: &Path, n_source: usize) -> Result<Vec<usize>> {
    let f = BufReader::new(File::open(path).with_context(|| format!("reading map {}", path.display()))?);
    Ok(QuasiIsometry::read_map(f, n_source)?)
}

// -------------------------------------------------------------- harmonic

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicReport {
    pub phi: String,
    pub tol: f64,
    pub points: usize,
    pub boundary_vertices: usize,
    pub converged: bool,
    pub energy: f64,
    pub harmonic_residual: f64,
    pub iterations: usize,
    pub u: Vec<f64>,
    pub h: Vec<f64>,
}

/// Runs the decomposition; a non-converged run still yields its best
/// iterate, flagged with `converged = false`.
pub fn harmonic_run(
    space: &Path,
    gen_structure: &Path,
    f: &Path,
    phi: &str,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<(HarmonicReport, Vec<IterationRecord>)> {
    if !(tol > 0.0) {
        bail!(ConfigError(format!("tolerance must be positive, got {tol}")));
    }
    let space = load_space(space)?;
    let gs = GeneratorStructure::load(gen_structure, space.weights().to_vec())
        .with_context(|| format!("reading generator structure {}", gen_structure.display()))?;
    let values = WeightedVector::read_csv(File::open(f).with_context(|| format!("reading {}", f.display()))?)?;
    let phi_fn = parse_phi(phi)?;
    let mut opts = DecomposeOptions { tol, ..Default::default() };
    if let Some(m) = max_iter {
        opts.descent.max_iter = m;
    }
    let result = match harmonic::harmonic_decompose(&phi_fn, values.values(), &gs, &opts) {
        Ok(r) => r,
        Err(HarmonicError::NonConvergence { best, .. }) => *best,
        Err(e) => return Err(e.into()),
    };
    let report = HarmonicReport {
        phi: phi_fn.name(),
        tol,
        points: gs.len(),
        boundary_vertices: gs.boundary_vertices().len(),
        converged: result.converged,
        energy: result.energy,
        harmonic_residual: result.harmonic_residual,
        iterations: result.iterations.len(),
        u: result.u,
        h: result.h,
    };
    Ok((report, result.iterations))
}

/// Iteration log as CSV: `iteration,step_length,objective,gradient_sup,step_sup`.
pub fn write_iteration_log(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
    writeln!(w, "iteration,step_length,objective,gradient_sup,step_sup")?;
    for r in records {
        writeln!(w, "{},{},{},{},{}", r.iteration, r.step_length, r.objective, r.gradient_sup, r.step_sup)?;
    }
    w.flush()?;
    Ok(())
}

// ----------------------------------------------------------------- repro

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F2Config {
    pub epsilon: f64,
    pub n_min: u32,
    pub n_max: u32,
    /// truncation radius beyond the minimum `n + 1`
    pub extra_radius: u32,
    pub phi: String,
    /// target for `‖ω_n - ω‖` at `n_max`
    pub threshold: f64,
    /// truncation radii at which `‖ω‖_{phi,1}` is recomputed
    pub omega_radii: Vec<u32>,
}

impl Default for F2Config {
    fn default() -> Self {
        Self { epsilon: 0.5, n_min: 2, n_max: 8, extra_radius: 0, phi: "expinvsq".into(), threshold: 0.05, omega_radii: vec![1, 2, 3, 4, 5, 6] }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct F2Sweep {
    pub rows: Vec<F2Report>,
    pub norm_gaps: Vec<(u32, f64)>,
    pub strictly_decreasing: bool,
    pub final_gap: f64,
    pub below_threshold: bool,
    /// every enumerated edge count equals `3 (3^n - 1)`
    pub counts_match: bool,
    /// largest relative difference between enumerated and formula modulars
    pub max_modular_rel_error: f64,
    /// `norm_gap / alpha_closed_form` stays in `[1/2, 2]`
    pub tracks_within_factor_two: bool,
    pub omega_norms: Vec<(u32, f64)>,
    pub omega_norm_spread: f64,
    pub omega_norm_stable: bool,
}

pub fn repro_f2(cfg: &F2Config) -> Result<F2Sweep> {
    if cfg.n_min < 1 || cfg.n_max < cfg.n_min {
        bail!(ConfigError(format!("need 1 <= n_min <= n_max, got {}..{}", cfg.n_min, cfg.n_max)));
    }
    let phi = parse_phi(&cfg.phi)?;
    let mut rows = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        rows.push(degree_one::f2_example_with(&phi, cfg.epsilon, n, n + 1 + cfg.extra_radius)?.report);
    }
    let norm_gaps: Vec<(u32, f64)> = rows.iter().map(|r| (r.n, r.norm_gap)).collect();
    let strictly_decreasing = norm_gaps.windows(2).all(|w| w[1].1 < w[0].1);
    let final_gap = norm_gaps.last().map_or(f64::NAN, |r| r.1);
    let counts_match = rows.iter().all(|r| r.directed_edges == r.directed_edges_formula);
    let max_modular_rel_error = rows
        .iter()
        .map(|r| (r.modular_enumerated - r.modular_formula).abs() / r.modular_formula.abs())
        .fold(0.0, f64::max);
    let tracks_within_factor_two = rows.iter().all(|r| (0.5..=2.0).contains(&r.closed_form_ratio));
    let mut omega_norms = Vec::new();
    for &radius in &cfg.omega_radii {
        omega_norms.push((radius, omega_norm(&phi, cfg.epsilon, radius)?));
    }
    let (lo, hi) = omega_norms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    let omega_norm_spread = if omega_norms.is_empty() { 0.0 } else { hi - lo };
    Ok(F2Sweep {
        rows,
        norm_gaps,
        strictly_decreasing,
        final_gap,
        below_threshold: final_gap < cfg.threshold,
        counts_match,
        max_modular_rel_error,
        tracks_within_factor_two,
        omega_norm_stable: lo > 0.0 && omega_norm_spread <= 1e-12 * hi,
        omega_norms,
        omega_norm_spread,
    })
}

/// `‖dσ‖_{phi,1}` for `σ = epsilon 1_A` on the ball of the given radius.
pub fn omega_norm(phi: &YoungFunction, epsilon: f64, radius: u32) -> Result<f64> {
    let space = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), radius)?;
    let sigma: Vec<f64> = (0..space.len()).map(|x| if space.word(x).and_then(|w| w.first()) == Some(&1) { epsilon } else { 0.0 }).collect();
    let norm = cochain::seminorm(&space, &degree_one::point_coboundary(&sigma), phi, 1.0)?;
    Ok(norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesovConfig {
    pub phi: String,
    pub n: u32,
    pub m_max: u64,
}

impl Default for BesovConfig {
    fn default() -> Self {
        Self { phi: "power:4".into(), n: 3, m_max: 1_000_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BesovResult {
    pub phi: String,
    pub verdict: BesovVerdict,
    /// for power families, whether `sum m^{n-1-p}` converges (`p > n`)
    pub integral_test: Option<bool>,
    pub report: BesovReport,
}

pub fn repro_besov(cfg: &BesovConfig) -> Result<BesovResult> {
    if cfg.n < 2 || cfg.m_max < 100 {
        bail!(ConfigError(format!("need n >= 2 and m_max >= 100, got n = {}, m_max = {}", cfg.n, cfg.m_max)));
    }
    let phi = parse_phi(&cfg.phi)?;
    let integral_test = match phi.spec() {
        Some(YoungSpec::Power { p }) | Some(YoungSpec::PowerOverP { p }) => Some(p > cfg.n as f64),
        _ => None,
    };
    let report = young::besov_summability(&phi, cfg.n, cfg.m_max);
    Ok(BesovResult { phi: phi.name(), verdict: report.verdict, integral_test, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZConfig {
    pub phi: String,
    pub n: usize,
    pub tol: f64,
    pub spread_tolerance: f64,
}

impl Default for ZConfig {
    fn default() -> Self {
        Self { phi: "pop:3".into(), n: 50, tol: 1e-10, spread_tolerance: 1e-6 }
    }
}

pub fn repro_z(cfg: &ZConfig) -> Result<ZExampleReport> {
    if !(cfg.tol > 0.0 && cfg.spread_tolerance > 0.0) {
        bail!(ConfigError("tolerances must be positive".into()));
    }
    let phi = parse_phi(&cfg.phi)?;
    Ok(harmonic::z_example(&phi, cfg.n, cfg.tol, cfg.spread_tolerance)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_are_versioned_and_stable() {
        let r = Report::new("paper repro besov", BesovConfig::default(), 3);
        let a = r.to_json().unwrap();
        assert_eq!(a, r.to_json().unwrap());
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["config"]["phi"], "power:4");
        assert!(!a.contains("time"));
    }

    #[test]
    fn config_errors_are_typed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, "{\"epsilon\": \"x\"}").unwrap();
        let e = read_config::<F2Config>(&p).unwrap_err();
        assert!(e.downcast_ref::<ConfigError>().is_some());
        assert!(parse_phi("nope:1").unwrap_err().downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn besov_power_four() {
        let r = repro_besov(&BesovConfig::default()).unwrap();
        assert_eq!(r.verdict, BesovVerdict::ConvergentLikely);
        assert_eq!(r.integral_test, Some(true));
    }

    #[test]
    fn small_f2_sweep() {
        let cfg = F2Config { n_max: 4, omega_radii: vec![2, 3], ..Default::default() };
        let s = repro_f2(&cfg).unwrap();
        assert!(s.strictly_decreasing && s.counts_match && s.omega_norm_stable);
        assert!(s.max_modular_rel_error <= 1e-10);
    }
}
