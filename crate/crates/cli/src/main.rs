//! `orlicz-lab` command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use orlicz_lab::{self as lab, ConfigError, Report, SpaceSource};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "orlicz-lab", version, about = "Orlicz cohomology computations on finite metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate finite metric measure spaces
    #[command(subcommand)]
    Spaces(SpacesCmd),
    /// Coboundaries and seminorms of cochain files
    #[command(subcommand)]
    Cochain(CochainCmd),
    /// Quasi-isometry transfer checks
    #[command(subcommand)]
    Transfer(TransferCmd),
    /// Degree-one computations
    #[command(subcommand)]
    Deg1(Deg1Cmd),
    /// Dirichlet energy minimization
    #[command(subcommand)]
    Harmonic(HarmonicCmd),
    /// Pinned reproductions of the worked examples
    #[command(subcommand)]
    Paper(PaperCmd),
}

#[derive(Subcommand)]
enum SpacesCmd {
    /// Build a space and write it as a `.sp` file
    Gen(SpacesGen),
}

#[derive(Args)]
struct SpacesGen {
    /// path, grid, cayley or uniform
    #[arg(long)]
    kind: String,
    /// number of points (path, uniform)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    w: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    /// group for Cayley balls: f<rank> (free) or z<rank> (free abelian)
    #[arg(long, default_value = "f2")]
    group: String,
    #[arg(long)]
    radius: Option<u32>,
    /// mutual distance for uniform spaces
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    #[arg(long)]
    out: PathBuf,
    /// also write the generator structure (`.gs`)
    #[arg(long)]
    gen_structure: Option<PathBuf>,
    /// report bounded-geometry statistics at this radius
    #[arg(long)]
    stats_radius: Option<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CochainCmd {
    /// Write the coboundary of a cochain
    D {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Seminorm at scale s over the tuples of diameter at most s
    Norm {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "power:2")]
        phi: String,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TransferCmd {
    /// Validate a quasi-isometry and evaluate the homotopy identity
    Verify {
        #[arg(long)]
        space_x: PathBuf,
        #[arg(long)]
        space_y: PathBuf,
        /// map file with `i j` lines
        #[arg(long)]
        map: PathBuf,
        /// quasi-inverse map file; the nearest-point inverse when omitted
        #[arg(long)]
        inverse: Option<PathBuf>,
        /// kernel radius
        #[arg(long, default_value_t = 1.5)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Deg1Cmd {
    /// The free-group non-doubling example for one n
    F2 {
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 4)]
        n: u32,
        #[arg(long, default_value_t = 6)]
        radius: u32,
        #[arg(long, default_value = "expinvsq")]
        phi: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum HarmonicCmd {
    /// Split f into an energy part and a phi-harmonic part
    Decompose {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        gen_structure: PathBuf,
        /// CSV of `value,weight` lines, one per vertex
        #[arg(long)]
        f: PathBuf,
        #[arg(long, default_value = "pop:3")]
        phi: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// iteration log as CSV
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PaperCmd {
    /// Reproduce one worked example with pinned defaults
    Repro {
        #[command(subcommand)]
        which: Repro,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration; replaces every other flag of the command
    #[arg(long)]
    config: Option<PathBuf>,
    /// seed echoed into the report (the examples are deterministic)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Repro {
    /// Norm decay of the free-group example for n = n_min..n_max
    F2 {
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        n_min: u32,
        #[arg(long, default_value_t = 8)]
        n_max: u32,
        #[arg(long, default_value_t = 0)]
        extra_radius: u32,
        #[arg(long, default_value = "expinvsq")]
        phi: String,
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Summability of sum phi(1/m) m^(n-1)
    Besov {
        #[arg(long, default_value = "power:4")]
        phi: String,
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long, default_value_t = 1_000_000)]
        m_max: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Harmonic functions on a path have constant increments
    ZHarmonic {
        #[arg(long, default_value = "pop:3")]
        phi: String,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-6)]
        spread_tol: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Serialize)]
struct Seeded<C: Serialize> {
    seed: u64,
    #[serde(flatten)]
    inner: C,
}

fn required<T>(v: Option<T>, name: &str, kind: &str) -> Result<T> {
    match v {
        Some(v) => Ok(v),
        None => bail!(ConfigError(format!("--{name} is required for kind `{kind}`"))),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Spaces(SpacesCmd::Gen(g)) => {
            let source = match g.kind.as_str() {
                "path" => SpaceSource::Path { n: required(g.n, "n", "path")? },
                "grid" => SpaceSource::Grid { w: required(g.w, "w", "grid")?, h: required(g.h, "h", "grid")? },
                "cayley" => SpaceSource::Cayley { group: g.group.clone(), radius: required(g.radius, "radius", "cayley")? },
                "uniform" => SpaceSource::Uniform { n: required(g.n, "n", "uniform")?, d: g.d },
                other => bail!(ConfigError(format!("unknown space kind `{other}`"))),
            };
            let summary = lab::spaces_gen(&source, &g.out, g.gen_structure.as_deref(), g.stats_radius)?;
            Report::new("spaces gen", &source, summary).emit(g.json.as_deref())?;
        }
        Command::Cochain(CochainCmd::D { space, input, out, json }) => {
            let r = lab::cochain_d(&space, &input, &out)?;
            let cfg = serde_json::json!({ "space": space, "in": input, "out": out });
            Report::new("cochain d", cfg, r).emit(json.as_deref())?;
        }
        Command::Cochain(CochainCmd::Norm { space, input, phi, s, json }) => {
            let r = lab::cochain_norm(&space, &input, &phi, s)?;
            let cfg = serde_json::json!({ "space": space, "in": input, "phi": phi, "s": s });
            Report::new("cochain norm", cfg, r).emit(json.as_deref())?;
        }
        Command::Transfer(TransferCmd::Verify { space_x, space_y, map, inverse, k, lambda, seed, tol, json }) => {
            let x = lab::load_space(&space_x)?;
            let y = lab::load_space(&space_y)?;
            let f = lab::read_map_file(&map, x.len())?;
            let fbar = inverse.as_deref().map(|p| lab::read_map_file(p, y.len())).transpose()?;
            let r = lab::transfer_verify(&x, &y, f, fbar, lambda, k, seed, tol)?;
            let holds = r.holds;
            let cfg = serde_json::json!({
                "space_x": space_x, "space_y": space_y, "map": map, "inverse": inverse,
                "k": k, "lambda": lambda, "seed": seed, "tol": tol,
            });
            Report::new("transfer verify", cfg, r).emit(json.as_deref())?;
            if !holds {
                bail!("homotopy identity residual exceeds {tol}");
            }
        }
        Command::Deg1(Deg1Cmd::F2 { eps, n, radius, phi, json }) => {
            let phi_fn = lab::parse_phi(&phi)?;
            let ex = orlicz_core::degree_one::f2_example_with(&phi_fn, eps, n, radius)?;
            let cfg = serde_json::json!({ "eps": eps, "n": n, "radius": radius, "phi": phi });
            Report::new("deg1 f2", cfg, ex.report).emit(json.as_deref())?;
        }
        Command::Harmonic(HarmonicCmd::Decompose { space, gen_structure, f, phi, tol, max_iter, json, log }) => {
            let (r, records) = lab::harmonic_run(&space, &gen_structure, &f, &phi, tol, max_iter)?;
            if let Some(l) = &log {
                lab::write_iteration_log(l, &records)?;
            }
            let converged = r.converged;
            let cfg = serde_json::json!({
                "space": space, "gen_structure": gen_structure, "f": f, "phi": phi, "tol": tol, "max_iter": max_iter,
            });
            Report::new("harmonic decompose", cfg, r).emit(json.as_deref())?;
            if !converged {
                eprintln!("warning: no convergence to tolerance {tol}; the report holds the best iterate");
                return Ok(false);
            }
        }
        Command::Paper(PaperCmd::Repro { which }) => match which {
            Repro::F2 { eps, n_min, n_max, extra_radius, phi, threshold, common } => {
                let cfg = match &common.config {
                    Some(p) => lab::read_config(p)?,
                    None => lab::F2Config { epsilon: eps, n_min, n_max, extra_radius, phi, threshold, ..Default::default() },
                };
                let r = lab::repro_f2(&cfg)?;
                Report::new("paper repro f2", Seeded { seed: common.seed, inner: cfg }, r).emit(common.json.as_deref())?;
            }
            Repro::Besov { phi, n, m_max, common } => {
                let cfg = match &common.config {
                    Some(p) => lab::read_config(p)?,
                    None => lab::BesovConfig { phi, n, m_max },
                };
                let r = lab::repro_besov(&cfg)?;
                Report::new("paper repro besov", Seeded { seed: common.seed, inner: cfg }, r).emit(common.json.as_deref())?;
            }
            Repro::ZHarmonic { phi, n, tol, spread_tol, common } => {
                let cfg = match &common.config {
                    Some(p) => lab::read_config(p)?,
                    None => lab::ZConfig { phi, n, tol, spread_tolerance: spread_tol },
                };
                let r = lab::repro_z(&cfg)?;
                Report::new("paper repro z-harmonic", Seeded { seed: common.seed, inner: cfg }, r).emit(common.json.as_deref())?;
            }
        },
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
