//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mfg_core::checks::{linear_alignment_gates, monotonicity_suite, PairKind};
use mfg_core::cli_io::{self, ModelKind, RunArtifacts, RunConfig};
use mfg_core::controls::{
    alignment_lambert, alignment_residual, cross_check_exponential_control,
    linear_control_closed_loop, validate_parameters, ControlParams, Gate,
};
use mfg_core::math::lambert_w0;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBERT_POINTS: usize = 1000;
const LAMBERT_REL_TOL: f64 = 1e-12;
const LAMBERT_ANCHOR_TOL: f64 = 1e-14;
const CROSS_CHECK_SAMPLES: usize = 100;
const CROSS_CHECK_TOL: f64 = 1e-8;
const ALIGNMENT_RESIDUAL_TOL: f64 = 1e-10;
const CLOSED_LOOP_TOL: f64 = 1e-12;
const MONOTONICITY_PAIRS: usize = 200;
const MONOTONICITY_FLOOR: f64 = -1e-12;
const CENTER_OF_MASS: f64 = 0.75;
const CENTER_OF_MASS_TOL: f64 = 0.02;
const MAX_PRUNED_SWEEPS: usize = 10;
const SWEEP2_RATIO: f64 = 0.1;
const VALUE_STARTS: [f64; 3] = [0.6, 0.7, 0.8];

const FAST_LIMIT: Duration = Duration::from_secs(1);
const SUITE_LIMIT: Duration = Duration::from_secs(5);
const RUN_LIMIT: Duration = Duration::from_secs(60);

struct Outcome {
    failed: Vec<String>,
}

impl Outcome {
    fn line(&mut self, id: &str, passed: bool, detail: impl AsRef<str>) {
        println!(
            "{} {id}: {}",
            if passed { "PASS" } else { "FAIL" },
            detail.as_ref()
        );
        if !passed {
            self.failed.push(id.to_string());
        }
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn lambert(out: &mut Outcome) {
    let start = Instant::now();
    let lo = -(-1.0f64).exp() + 1e-9;
    let hi = 1e6;
    // Offsets from the branch point are log-spaced from 1e-9 to hi - lo + 1e-9.
    let (a, b) = (1e-9f64.ln(), (hi - lo + 1e-9f64).ln());
    let mut worst = 0.0f64;
    let mut errors = 0;
    for i in 0..LAMBERT_POINTS {
        let off = (a + (b - a) * i as f64 / (LAMBERT_POINTS - 1) as f64).exp();
        let x = (-(-1.0f64).exp() + off).clamp(lo, hi);
        match lambert_w0(x) {
            Ok(w) => worst = worst.max((w * w.exp() - x).abs() / x.abs().max(1.0)),
            Err(_) => errors += 1,
        }
    }
    let w0 = lambert_w0(0.0).unwrap_or(f64::NAN);
    let we = lambert_w0(std::f64::consts::E).unwrap_or(f64::NAN);
    let elapsed = start.elapsed();
    let ok = errors == 0
        && worst <= LAMBERT_REL_TOL
        && w0.abs() <= LAMBERT_ANCHOR_TOL
        && (we - 1.0).abs() <= LAMBERT_ANCHOR_TOL
        && elapsed < FAST_LIMIT;
    out.line(
        "1 lambert",
        ok,
        format!(
            "max scaled residual {worst:.2e} over {LAMBERT_POINTS} points, W(0) = {w0:e}, W(e) - 1 = {:.1e}, {elapsed:.2?}",
            we - 1.0
        ),
    );
}

fn cross_check(out: &mut Outcome) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bound = 0.05;
    let (mut agree, mut flagged, mut unflagged_disagreements) = (0, 0, 0);
    let mut worst_residual = 0.0f64;
    let mut worst_lambert = 0.0f64;
    let mut failures = 0;
    for _ in 0..CROSS_CHECK_SAMPLES {
        let d = rng.random_range(1..=3);
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-bound..=bound)).collect();
        let q: Vec<f64> = (0..d).map(|_| rng.random_range(-bound..=bound)).collect();
        let m1 = rng.random_range(0.01..=1.0);
        let m2 = rng.random_range(0.1..=2.0);
        let Ok(check) = cross_check_exponential_control(&p, &q, m1, m2) else {
            failures += 1;
            continue;
        };
        worst_residual = worst_residual.max(alignment_residual(&p, &q, m1 * m2, m2, &check.solver));
        if let Ok(lw) = alignment_lambert(&p, &q, m1 * m2, m2) {
            let diff = lw
                .iter()
                .zip(&check.solver)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst_lambert = worst_lambert.max(diff);
        } else {
            failures += 1;
        }
        if check.discrepancy <= CROSS_CHECK_TOL {
            agree += 1;
        } else if check.flagged {
            flagged += 1;
        } else {
            unflagged_disagreements += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = failures == 0
        && unflagged_disagreements == 0
        && worst_residual <= ALIGNMENT_RESIDUAL_TOL
        && worst_lambert <= CROSS_CHECK_TOL
        && elapsed < FAST_LIMIT;
    out.line(
        "2 exponential-control cross-check",
        ok,
        format!(
            "{agree} agree, {flagged} flagged (solver authoritative), {unflagged_disagreements} unflagged; \
             solver residual {worst_residual:.1e}, corrected Lambert route vs solver {worst_lambert:.1e}, {elapsed:.2?}"
        ),
    );
}

fn closed_loop(out: &mut Outcome) {
    let n = 100;
    let pop: Vec<(f64, f64, f64)> = (0..n)
        .map(|i| ((i as f64 + 0.5) / n as f64, 1.0, 1.0 / n as f64))
        .collect();
    let worst = linear_control_closed_loop(&pop, 1.0)
        .iter()
        .map(|(_, a)| (a + 0.5).abs())
        .fold(0.0, f64::max);
    out.line(
        "3 linear closed loop",
        worst <= CLOSED_LOOP_TOL,
        format!("max |alpha + 0.5| = {worst:.1e}"),
    );
}

fn monotonicity(out: &mut Outcome) {
    for (id, model_kind) in [
        ("4 monotonicity refinancing", ModelKind::Refinancing),
        ("4 monotonicity evacuation (F = 0 route)", ModelKind::Custom),
    ] {
        let cfg = RunConfig::defaults(model_kind);
        let model = cfg.build_model();
        let start = Instant::now();
        let report = monotonicity_suite(
            |t, x, a, mu| model.lagrangian(t, x, a, mu),
            cfg.domain(),
            cfg.control_set(),
            MONOTONICITY_PAIRS,
            PairKind::General,
            0,
        );
        let elapsed = start.elapsed();
        match report {
            Ok(r) => out.line(
                id,
                r.min_value >= MONOTONICITY_FLOOR && elapsed < SUITE_LIMIT,
                format!(
                    "{} pairs, min integral {:.3e}, {elapsed:.2?}",
                    r.pairs, r.min_value
                ),
            ),
            Err(e) => out.line(id, false, e.to_string()),
        }
    }
    let cfg = RunConfig::defaults(ModelKind::Evacuation);
    let model = cfg.build_model();
    if let Ok(r) = monotonicity_suite(
        |t, x, a, mu| model.lagrangian(t, x, a, mu),
        cfg.domain(),
        cfg.control_set(),
        MONOTONICITY_PAIRS,
        PairKind::General,
        0,
    ) {
        println!(
            "INFO first-moment congestion Lagrangian: {} of {} pairs negative, min {:.3e} (not a criterion)",
            r.violations, r.pairs, r.min_value
        );
    }
}

fn gates(out: &mut Outcome) {
    let shipped = RunConfig::from_file(&configs().join("refinancing.cfg"));
    let shipped_ok = match &shipped {
        Ok(cfg) => {
            linear_alignment_gates(cfg.m1, cfg.epsilon, cfg.gate_bound).is_ok_and(|r| r.passed())
        }
        Err(_) => false,
    };
    let failing = validate_parameters(
        &ControlParams {
            m1: 0.1,
            m2: 0.0,
            epsilon: 0.5,
            bound: 1.0,
        },
        0.0,
        0.1,
    );
    let fails_a = failing
        .as_ref()
        .is_ok_and(|r| !r.passed() && r.violations.contains(&Gate::ConstantWindow));
    out.line(
        "5 parameter gates",
        shipped_ok && fails_a,
        format!("shipped refinancing passes = {shipped_ok}, (M = 1, eps = 0.5) fails gate (a) = {fails_a}"),
    );
}

fn run_timed(cfg: &RunConfig) -> (mfg_core::Result<RunArtifacts>, Duration) {
    let start = Instant::now();
    let art = cli_io::execute(cfg);
    (art, start.elapsed())
}

type Files = Vec<(String, Vec<u8>)>;

fn csv_files(dir: &Path) -> Files {
    let mut files: Files = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&p).unwrap_or_default(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn write_csvs(art: &RunArtifacts) -> Option<(tempfile::TempDir, Files)> {
    let dir = tempfile::tempdir().ok()?;
    cli_io::write_outputs(art, dir.path()).ok()?;
    let files = csv_files(dir.path());
    Some((dir, files))
}

fn evacuation(out: &mut Outcome) {
    let mut cfg = match RunConfig::from_file(&configs().join("evacuation_desk.cfg")) {
        Ok(c) => c,
        Err(e) => {
            for id in ["6a", "6b", "6c", "6d", "6e", "6 runtime", "7 determinism"] {
                out.line(id, false, format!("config: {e}"));
            }
            return;
        }
    };
    cfg.workers = 1;
    let scale_ok = cfg.n_particles == 600
        && cfg.n_steps() == 1000
        && cfg.dt == 0.004
        && cfg.n_alpha == 11
        && cfg.eta == 4.0
        && cfg.beta == 1.0
        && cfg.epsilon == 0.5
        && cfg.sigma == 2.5e-9;
    let (art, elapsed) = run_timed(&cfg);
    let art = match art {
        Ok(a) => a,
        Err(e) => {
            for id in ["6a", "6b", "6c", "6d", "6e", "6 runtime", "7 determinism"] {
                out.line(id, false, format!("run: {e}"));
            }
            return;
        }
    };

    let m0 = art.mass[0];
    out.line(
        "6a initial mass and center",
        m0.total_mass == 1.0 && (m0.center_of_mass - CENTER_OF_MASS).abs() <= CENTER_OF_MASS_TOL,
        format!(
            "mass {:?}, center of mass {:.4}",
            m0.total_mass, m0.center_of_mass
        ),
    );

    let increases = art
        .mass
        .windows(2)
        .filter(|w| w[1].total_mass > w[0].total_mass)
        .count();
    let final_mass = art.final_mass();
    out.line(
        "6b mass non-increasing",
        increases == 0 && final_mass < m0.total_mass,
        format!("{increases} increasing steps, final mass {final_mass:.4}"),
    );

    let mods: Vec<usize> = art
        .solution
        .run
        .reports
        .iter()
        .map(|r| r.modifications)
        .collect();
    let decreasing = mods.windows(2).all(|w| w[1] < w[0]);
    let ratio_ok = mods.len() < 2 || (mods[1] as f64) < SWEEP2_RATIO * mods[0] as f64;
    let converged = art.solution.run.converged && mods.last() == Some(&0);
    let shown: Vec<String> = mods.iter().map(|m| m.to_string()).collect();
    out.line(
        "6c pruned convergence shape",
        converged && mods.len() <= MAX_PRUNED_SWEEPS && decreasing && ratio_ok,
        format!(
            "grid {:?}, {} sweeps, strictly decreasing = {decreasing}, sweep2/sweep1 = {:.3}, counts {}",
            art.solution.grid.points(),
            mods.len(),
            if mods.len() >= 2 { mods[1] as f64 / mods[0] as f64 } else { 0.0 },
            shown.join(" ")
        ),
    );

    let v = &art.solution.verification;
    out.line(
        "6d Nash stationarity",
        converged && v.stationarity_modifications == 0 && v.frozen_modifications == 0 && v.fixed_point_residual == 0.0,
        format!(
            "converged = {converged}, verification sweep modifications {}, frozen {}, residual {:e}",
            v.stationarity_modifications, v.frozen_modifications, v.fixed_point_residual
        ),
    );

    let traj = &art.solution.run.trajectories;
    let mut details = Vec::new();
    let mut traces_ok = art.value_traces.len() == VALUE_STARTS.len();
    for (vt, start) in art.value_traces.iter().zip(VALUE_STARTS) {
        let exit = traj.exit_step(vt.particle);
        let monotone = vt.values.windows(2).all(|w| w[1] <= w[0]);
        let zero_after = exit.is_none_or(|e| vt.values[e..].iter().all(|&u| u == 0.0));
        traces_ok &= vt.start == start && monotone && zero_after;
        details.push(format!(
            "x0 {start}: particle {} (start {:.4}) exit {}, non-increasing = {monotone}, zero after exit = {zero_after}",
            vt.particle,
            vt.initial_position,
            exit.map_or("none".to_string(), |e| format!("t = {:.3}", traj.time(e)))
        ));
    }
    out.line("6e value traces", traces_ok, details.join("; "));

    out.line(
        "6 runtime",
        scale_ok && elapsed < RUN_LIMIT,
        format!("desk scale = {scale_ok}, single-threaded run {elapsed:.2?}"),
    );

    let Some((_d1, first)) = write_csvs(&art) else {
        out.line("7 determinism", false, "writing outputs failed");
        return;
    };
    let repeat = run_timed(&cfg).0.ok().and_then(|a| write_csvs(&a));
    let mut threaded = cfg.clone();
    threaded.workers = 4;
    let parallel = run_timed(&threaded).0.ok().and_then(|a| write_csvs(&a));
    let same_repeat = repeat.as_ref().is_some_and(|(_, f)| *f == first);
    let same_parallel = parallel.as_ref().is_some_and(|(_, f)| *f == first);
    out.line(
        "7 determinism",
        same_repeat && same_parallel && !first.is_empty(),
        format!(
            "{} CSV files; repeat identical = {same_repeat}, 4 workers identical = {same_parallel}",
            first.len()
        ),
    );
}

fn refinancing(out: &mut Outcome) {
    let cfg = match RunConfig::from_file(&configs().join("refinancing.cfg")) {
        Ok(c) => c,
        Err(e) => return out.line("8 refinancing", false, e.to_string()),
    };
    let (art, elapsed) = run_timed(&cfg);
    let checks = cli_io::validate_config(&cfg);
    match (art, checks) {
        (Ok(art), Ok(checks)) => {
            let increases = art
                .mass
                .windows(2)
                .filter(|w| w[1].total_mass > w[0].total_mass)
                .count();
            out.line(
                "8 refinancing",
                cfg.n_particles == 600
                    && increases == 0
                    && art.converged()
                    && checks.passed()
                    && elapsed < RUN_LIMIT,
                format!(
                    "{increases} increasing steps, converged = {} in {} sweeps, gates and monotonicity pass = {}, {elapsed:.2?}",
                    art.converged(),
                    art.solution.run.reports.len(),
                    checks.passed()
                ),
            );
        }
        (Err(e), _) | (_, Err(e)) => out.line("8 refinancing", false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let mut out = Outcome { failed: Vec::new() };
    lambert(&mut out);
    cross_check(&mut out);
    closed_loop(&mut out);
    monotonicity(&mut out);
    gates(&mut out);
    evacuation(&mut out);
    refinancing(&mut out);
    if out.failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria: {}", out.failed.join(", "));
        ExitCode::FAILURE
    }
}
