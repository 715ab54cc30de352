//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::collections::HashMap;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use orlicz_core::cochain::{self, Cochain};
use orlicz_core::harmonic::{self, DecomposeOptions, GeneratorStructure};
use orlicz_core::orlicz::{self, WeightedVector};
use orlicz_core::spaces::{FiniteMeasureSpace, Group};
use orlicz_core::transfer::{self, QuasiIsometry};
use orlicz_core::young::{self, BesovVerdict, DoublingVerdict, YoungFunction};
use orlicz_lab::{BesovConfig, F2Config, ZConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Prints the verdict line (bypassing the test harness capture) and fails
/// the test on FAIL.
fn verdict(id: u32, name: &str, checks: &[(&str, bool, String)]) {
    let pass = checks.iter().all(|c| c.1);
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{} criterion {id:>2} {name}", if pass { "PASS" } else { "FAIL" });
    for (what, ok, detail) in checks {
        let _ = writeln!(err, "     [{}] {what}: {detail}", if *ok { "ok" } else { "FAILED" });
    }
    assert!(pass, "criterion {id} failed");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_cochain(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Cochain {
    let values: Vec<f64> = (0..n.pow(k as u32 + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Cochain::from_fn(n, k, |t| values[t.iter().fold(0, |a, &x| a * n + x)]).unwrap()
}

#[test]
fn criterion_01_luxemburg_matches_p_norms() {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let phi = YoungFunction::power(p).unwrap();
        for _ in 0..100 {
            let len = r.gen_range(1..=64);
            let values: Vec<f64> = (0..len).map(|_| r.gen_range(-10.0..10.0)).collect();
            let weights: Vec<f64> = (0..len).map(|_| r.gen_range(0.1..2.0)).collect();
            let closed = values.iter().zip(&weights).map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p);
            let f = WeightedVector::new(values, weights).unwrap();
            let norm = orlicz::luxemburg_norm(&phi, &f).unwrap();
            worst = worst.max((norm - closed).abs() / closed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(1, "Luxemburg norm of Power(p) equals the p-norm", &[
        ("relative error <= 1e-10", worst <= 1e-10, format!("{worst:.3e}")),
        ("runtime < 1 s", secs < 1.0, format!("{secs:.3} s")),
    ]);
}

#[test]
fn criterion_02_conjugates_and_fenchel_young() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let q = p / (p - 1.0);
        let phi = YoungFunction::power_over_p(p).unwrap();
        for i in 1..=50 {
            let s = 0.1 * i as f64;
            let closed = s.powf(q) / q;
            worst = worst.max((phi.conjugate_eval(s).unwrap() - closed).abs() / closed);
        }
    }
    let mut r = rng(2);
    let families = [
        YoungFunction::power(1.5).unwrap(),
        YoungFunction::power(3.0).unwrap(),
        YoungFunction::power_over_p(2.0).unwrap(),
        YoungFunction::power_log(2.0, 1.0).unwrap(),
        YoungFunction::exp_inverse_square(),
    ];
    let mut violations = 0;
    for i in 0..10_000 {
        let phi = &families[i % families.len()];
        let (t, s): (f64, f64) = (r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
        if phi.eval(t) + phi.conjugate_or_infinite(s) < t * s - 1e-12 * (1.0 + (t * s).abs()) {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(2, "numeric conjugate and Fenchel-Young inequality", &[
        ("PowerOverP conjugate relative error <= 1e-6", worst <= 1e-6, format!("{worst:.3e}")),
        ("Fenchel-Young violations on 10^4 pairs", violations == 0, format!("{violations}")),
        ("runtime < 5 s", secs < 5.0, format!("{secs:.3} s")),
    ]);
}

/// `sup_s (s t* - phi(t))` at `s = phi'(t*)`, by a grid scan followed by
/// golden-section refinement of the concave objective.
fn grid_max_conjugate(phi: &YoungFunction, s: f64, scale: f64) -> f64 {
    let obj = |t: f64| s * t - phi.eval(t);
    let hi = 4.0 * scale;
    let steps = 4000;
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
    for i in 0..=steps {
        let t = hi * i as f64 / steps as f64;
        if obj(t) > best {
            best = obj(t);
            arg = t;
        }
    }
    let h = hi / steps as f64;
    let (mut a, mut b) = ((arg - h).max(0.0), arg + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if obj(c) > obj(d) {
            b = d;
        } else {
            a = c;
        }
    }
    obj(0.5 * (a + b)).max(best)
}

#[test]
fn criterion_03_young_identity_minus_sign() {
    let families = [
        YoungFunction::power(1.5).unwrap(),
        YoungFunction::power(2.0).unwrap(),
        YoungFunction::power(3.0).unwrap(),
        YoungFunction::power_over_p(1.5).unwrap(),
        YoungFunction::power_over_p(4.0).unwrap(),
        YoungFunction::power_log(2.0, 1.0).unwrap(),
        YoungFunction::power_log(3.0, 0.5).unwrap(),
    ];
    assert!(families.iter().all(|f| f.is_builtin_doubling()));
    let grid = young::log_grid(1e-3, 1e3, 61);
    let (mut worst, mut worst_oracle) = (0.0f64, 0.0f64);
    for phi in &families {
        for &t in &grid {
            worst = worst.max(young::young_identity_residual(phi, t).unwrap());
            let expected = t * phi.derivative(t) - phi.eval(t);
            let oracle = grid_max_conjugate(phi, phi.derivative(t), t);
            worst_oracle = worst_oracle.max((oracle - expected).abs() / expected.abs().max(1.0));
        }
    }
    verdict(3, "Young identity psi(phi'(t)) = t phi'(t) - phi(t)", &[
        ("library residual <= 1e-8", worst <= 1e-8, format!("{worst:.3e}")),
        ("grid-max conjugate residual <= 1e-8", worst_oracle <= 1e-8, format!("{worst_oracle:.3e}")),
    ]);
}

#[test]
fn criterion_04_coboundary_squares_to_zero() {
    let start = Instant::now();
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for space in [
        FiniteMeasureSpace::path(11).unwrap(),
        FiniteMeasureSpace::grid(5, 5).unwrap(),
        FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 3).unwrap(),
    ] {
        for k in 0..2 {
            let u = random_cochain(&mut r, space.len(), k);
            let ddu = cochain::coboundary(&cochain::coboundary(&u).unwrap()).unwrap();
            worst = worst.max(cochain::max_abs(&ddu).unwrap());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(4, "d o d = 0", &[
        ("max |ddu| <= 1e-12", worst <= 1e-12, format!("{worst:.3e}")),
        ("runtime < 10 s", secs < 10.0, format!("{secs:.3} s")),
    ]);
}

#[test]
fn criterion_05_homotopy_identity() {
    let start = Instant::now();
    let mut r = rng(5);
    let mut checks = Vec::new();

    // path(7): the identity and a folding self-map at lambda = 2
    let path = FiniteMeasureSpace::path(7).unwrap();
    let k_path = transfer::ball_kernel(&path, 1.5).unwrap();
    let fold = QuasiIsometry::with_tightest(&path, &path, vec![0, 0, 2, 2, 4, 4, 6], 2.0).unwrap();
    let fold_inv = fold.nearest_quasi_inverse(&path, &path).unwrap();
    for (label, f, fbar) in [("path(7) identity", QuasiIsometry::identity(&path), QuasiIsometry::identity(&path)), ("path(7) folding", fold, fold_inv)] {
        for k in 0..2 {
            let u = random_cochain(&mut r, path.len(), k);
            let res = transfer::homotopy_identity_residual(&path, &path, &f, &fbar, &k_path, &k_path, &u).unwrap();
            checks.push((label, k, res.residual));
        }
    }

    // F2 ball of radius 2 and its barycentric subdivision
    let x = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 2).unwrap();
    let (y, _) = x.subdivided().unwrap();
    let f = QuasiIsometry::with_tightest(&x, &y, (0..x.len()).collect(), 1.0).unwrap();
    let fbar = f.nearest_quasi_inverse(&x, &y).unwrap();
    let k_x = transfer::ball_kernel(&x, 1.5).unwrap();
    let k_y = transfer::ball_kernel(&y, 1.5).unwrap();
    for k in 0..2 {
        let u = random_cochain(&mut r, x.len(), k);
        let res = transfer::homotopy_identity_residual(&x, &y, &f, &fbar, &k_x, &k_y, &u).unwrap();
        checks.push(("F2 ball(2) -> subdivision", k, res.residual));
    }
    let worst = checks.iter().map(|c| c.2).fold(0.0, f64::max);

    let mut defects = 0;
    for i in 0..100 {
        let len = 1 + i % 4;
        let d: Vec<usize> = (0..len).map(|_| r.gen_range(0..6)).collect();
        let dp: Vec<usize> = (0..len).map(|_| r.gen_range(0..6)).collect();
        if !transfer::b_chain_identity_defect(&d, &dp).is_empty() {
            defects += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail: Vec<String> = checks.iter().map(|(l, k, v)| format!("{l} k={k}: {v:.2e}")).collect();
    verdict(5, "homotopy identity and chain identity", &[
        ("residual <= 1e-10", worst <= 1e-10, detail.join("; ")),
        ("chain identity defects on 100 pairs", defects == 0, format!("{defects}")),
        ("runtime < 30 s", secs < 30.0, format!("{secs:.3} s")),
    ]);
}

#[test]
fn criterion_06_holder_and_scaling() {
    let mut r = rng(6);
    let families = [
        YoungFunction::power(1.5).unwrap(),
        YoungFunction::power(2.0).unwrap(),
        YoungFunction::power_over_p(3.0).unwrap(),
        YoungFunction::power_log(2.0, 1.0).unwrap(),
        YoungFunction::exp_inverse_square(),
    ];
    let (mut holder_fail, mut scaling_fail, mut pairs) = (0, 0, 0);
    let mut tightest = 0.0f64;
    for phi in &families {
        for _ in 0..100 {
            let len = r.gen_range(1..=32);
            let weights: Vec<f64> = (0..len).map(|_| r.gen_range(0.1..2.0)).collect();
            let f = WeightedVector::new((0..len).map(|_| r.gen_range(-3.0..3.0)).collect(), weights.clone()).unwrap();
            let g = WeightedVector::new((0..len).map(|_| r.gen_range(-3.0..3.0)).collect(), weights).unwrap();
            let h = orlicz::holder_check(phi, &f, &g).unwrap();
            pairs += 1;
            tightest = tightest.max(h.lhs / h.rhs);
            if !h.holds() {
                holder_fail += 1;
            }
            for lambda in [0.5, 2.0, 4.0] {
                if !orlicz::scaling_bounds_check(phi, lambda, &f).unwrap().holds() {
                    scaling_fail += 1;
                }
            }
        }
    }
    verdict(6, "Hölder inequality and norm scaling bounds", &[
        ("Hölder violations", holder_fail == 0, format!("{holder_fail} of {pairs}, max lhs/rhs {tightest:.3}")),
        ("scaling violations (lambda in 0.5, 2, 4)", scaling_fail == 0, format!("{scaling_fail}")),
    ]);
}

#[test]
fn criterion_07_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut r = rng(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    for phi in [YoungFunction::power(2.0).unwrap(), YoungFunction::power_over_p(3.0).unwrap()] {
        for space in [
            FiniteMeasureSpace::path(11).unwrap(),
            FiniteMeasureSpace::grid(5, 5).unwrap(),
            FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 2).unwrap(),
        ] {
            let gs = GeneratorStructure::from_space(&space).unwrap();
            let n = gs.len();
            let f: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
            let interior = |r: &mut ChaCha8Rng| -> Vec<f64> {
                (0..n).map(|v| if gs.is_boundary(v) { 0.0 } else { r.gen_range(-1.0..1.0) }).collect()
            };
            let g = interior(&mut r);
            for _ in 0..50 {
                let delta = interior(&mut r);
                let dd = harmonic::gateaux_derivative(&phi, &f, &g, &delta, &gs).unwrap();
                let lam = 1e-6;
                let shifted = |sign: f64| -> Vec<f64> { g.iter().zip(&delta).map(|(a, b)| a + sign * lam * b).collect() };
                let fd = (harmonic::energy(&phi, &f, &shifted(1.0), &gs).unwrap() - harmonic::energy(&phi, &f, &shifted(-1.0), &gs).unwrap())
                    / (2.0 * lam);
                worst = worst.max((fd - dd).abs() / dd.abs().max(1e-12));
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(7, "Gâteaux gradient against central differences", &[
        ("relative error <= 1e-5", worst <= 1e-5, format!("{worst:.3e} over {count} directions")),
        ("runtime < 30 s", secs < 30.0, format!("{secs:.3} s")),
    ]);
}

/// Interior values of the graph-harmonic extension of the boundary data.
fn linear_dirichlet_solve(gs: &GeneratorStructure, f: &[f64]) -> Vec<f64> {
    let interior = gs.interior_vertices();
    let pos: HashMap<usize, usize> = interior.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let m = interior.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (row, &v) in interior.iter().enumerate() {
        for s in 0..gs.generator_count() {
            let y = gs.neighbor(v, s).unwrap();
            a[(row, row)] += 1.0;
            match pos.get(&y) {
                Some(&col) => a[(row, col)] -= 1.0,
                None => b[row] += f[y],
            }
        }
    }
    let sol = a.lu().solve(&b).unwrap();
    let mut h = f.to_vec();
    for (k, &v) in interior.iter().enumerate() {
        h[v] = sol[k];
    }
    h
}

#[test]
fn criterion_08_quadratic_decomposition_oracle() {
    let start = Instant::now();
    let phi = YoungFunction::power(2.0).unwrap();
    let mut r = rng(8);
    let opts = DecomposeOptions { tol: 1e-11, ..Default::default() };
    let mut checks = Vec::new();
    for space in [
        FiniteMeasureSpace::path(50).unwrap(),
        FiniteMeasureSpace::grid(22, 22).unwrap(),
        FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 5).unwrap(),
    ] {
        let gs = GeneratorStructure::from_space(&space).unwrap();
        let f: Vec<f64> = (0..gs.len()).map(|_| r.gen_range(-2.0..2.0)).collect();
        let res = harmonic::harmonic_decompose(&phi, &f, &gs, &opts);
        let oracle = linear_dirichlet_solve(&gs, &f);
        let err = match &res {
            Ok(d) => d.h.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        checks.push((format!("{} ({} vertices)", space.description(), gs.len()), err));
    }
    let path = GeneratorStructure::from_space(&FiniteMeasureSpace::path(11).unwrap()).unwrap();
    let sq: Vec<f64> = (0..11).map(|n| (n * n) as f64).collect();
    let res = harmonic::harmonic_decompose(&phi, &sq, &path, &opts).unwrap();
    let interp = res.h.iter().enumerate().map(|(n, h)| (h - 10.0 * n as f64).abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let worst = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    let detail: Vec<String> = checks.iter().map(|(l, e)| format!("{l}: {e:.2e}")).collect();
    verdict(8, "Power(2) decomposition against the linear Dirichlet solve", &[
        ("sup-norm error <= 1e-8", worst <= 1e-8, detail.join("; ")),
        ("path 0..10, f = n^2 gives h = 10 n", interp <= 1e-8, format!("{interp:.2e}")),
        ("runtime < 30 s", secs < 30.0, format!("{secs:.3} s")),
    ]);
}

#[test]
fn criterion_09_integer_line() {
    let r = orlicz_lab::repro_z(&ZConfig::default()).unwrap();
    verdict(9, "harmonic functions on a path have constant increments", &[
        ("converged", r.converged, format!("residual {:.2e} after {} iterations", r.harmonic_residual, r.iterations)),
        ("increment spread <= 1e-6", r.increment_spread <= 1e-6, format!("{:.3e}", r.increment_spread)),
        (
            "linear harmonic flagged by the finite-modular surrogate",
            !r.passes_finite_modular,
            format!("{:?}", r.modular_growth),
        ),
        (
            "equal boundary data gives a constant",
            r.constrained_is_constant,
            format!("max increment {:.2e} <= {:.2e}", r.constrained_max_increment, r.constrained_bound),
        ),
    ]);
}

#[test]
fn criterion_10_conjugate_bound() {
    let mut r = rng(10);
    let space = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 3).unwrap();
    let gs = GeneratorStructure::from_space(&space).unwrap();
    let pop3 = YoungFunction::power_over_p(3.0).unwrap();
    let measured = match young::doubling_report(&pop3, &young::log_grid(1e-4, 1e4, 200)).verdict {
        DoublingVerdict::DoublingOnGrid(d) => d,
        DoublingVerdict::NotDoublingOnGrid => f64::NAN,
    };
    let mut violations = 0;
    for (phi, d) in [(YoungFunction::power(2.0).unwrap(), 4.0), (pop3, measured)] {
        for _ in 0..100 {
            let scale = r.gen_range(0.1..5.0);
            let f: Vec<f64> = (0..gs.len()).map(|_| scale * r.gen_range(-1.0..1.0)).collect();
            if !harmonic::conjugate_bound_check(&phi, d, &f, &gs).unwrap().holds() {
                violations += 1;
            }
        }
    }
    verdict(10, "conjugate modular bound rho_psi(phi'(df)) <= (D-1) rho_phi(df)", &[
        ("measured D for PowerOverP(3)", (measured - 8.0).abs() < 1e-6, format!("{measured}")),
        ("violations on 200 functions", violations == 0, format!("{violations}")),
    ]);
}

#[test]
fn criterion_11_free_group_norm_decay() {
    let start = Instant::now();
    let s = orlicz_lab::repro_f2(&F2Config::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let gaps: Vec<String> = s.norm_gaps.iter().map(|(n, g)| format!("{n}:{g:.4}")).collect();
    let ratios: Vec<String> = s.rows.iter().map(|r| format!("{}:{:.3}", r.n, r.closed_form_ratio)).collect();
    verdict(11, "free-group example", &[
        ("‖ω_n - ω‖ strictly decreasing for n = 2..8", s.strictly_decreasing, gaps.join(" ")),
        ("‖ω_8 - ω‖ < 0.05", s.below_threshold, format!("{:.4}", s.final_gap)),
        ("edge counts equal 3(3^n - 1)", s.counts_match, String::new()),
        ("modular matches the count formula to 1e-10", s.max_modular_rel_error <= 1e-10, format!("{:.2e}", s.max_modular_rel_error)),
        ("closed form tracks the norm within a factor 2", s.tracks_within_factor_two, ratios.join(" ")),
        ("‖ω‖ > 0 and independent of the radius", s.omega_norm_stable, format!("{:?}", s.omega_norms)),
        ("runtime < 60 s", secs < 60.0, format!("{secs:.3} s")),
    ]);
}

#[test]
fn criterion_12_besov_test() {
    let mut checks = Vec::new();
    for p in [2.0, 2.5, 3.0, 3.5, 4.0] {
        let r = orlicz_lab::repro_besov(&BesovConfig { phi: format!("power:{p}"), ..Default::default() }).unwrap();
        let integral_converges = p > 3.0;
        let ok = if p == 3.0 {
            r.verdict != BesovVerdict::ConvergentLikely
        } else {
            (r.verdict == BesovVerdict::ConvergentLikely) == integral_converges
        };
        checks.push((p, r.verdict, ok));
    }
    let detail: Vec<String> = checks.iter().map(|(p, v, _)| format!("p={p}: {v:?}")).collect();
    verdict(12, "Besov summability matches the integral test", &[(
        "ConvergentLikely iff p > 3",
        checks.iter().all(|c| c.2),
        detail.join(", "),
    )]);
}

fn run_repro(args: &[&str], out: &std::path::Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_orlicz-lab"))
        .args(["paper", "repro"])
        .args(args)
        .args(["--seed", "7", "--json"])
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success(), "`paper repro {}` exited with {status}", args.join(" "));
    std::fs::read(out).unwrap()
}

#[test]
fn criterion_13_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut checks = Vec::new();
    for args in [vec!["f2"], vec!["besov", "--phi", "power:4", "--n", "3"], vec!["z-harmonic"]] {
        let a = run_repro(&args, &dir.path().join("a.json"));
        let b = run_repro(&args, &dir.path().join("b.json"));
        checks.push((args.join(" "), a == b && !a.is_empty(), a.len()));
    }
    let detail: Vec<String> = checks.iter().map(|(c, same, len)| format!("{c}: {} ({len} bytes)", if *same { "identical" } else { "differs" })).collect();
    verdict(13, "repeated reproductions are byte-identical", &[(
        "identical JSON reports",
        checks.iter().all(|c| c.1),
        detail.join("; "),
    )]);
}
