//! Running a configuration end to end and writing its artifacts.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::engine::{
    density_profile, solve, value_function_trace, IterationReport, SolveOutput, Solver,
};
use crate::math::ShapeKernel;
use crate::{Error, Result};

/// Points of the uniform grid density snapshots are evaluated on.
pub const DENSITY_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassRow {
    pub t: f64,
    pub total_mass: f64,
    pub first_moment: f64,
    /// `first_moment / total_mass`, NaN once the domain is empty.
    pub center_of_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub time: f64,
    pub step: usize,
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTrace {
    /// Requested starting point.
    pub start: f64,
    /// Particle whose initial position is nearest to `start`.
    pub particle: usize,
    pub initial_position: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub solution: SolveOutput,
    pub mass: Vec<MassRow>,
    pub densities: Vec<DensitySnapshot>,
    pub value_traces: Vec<ValueTrace>,
}

impl RunArtifacts {
    pub fn converged(&self) -> bool {
        self.solution.run.converged
    }

    pub fn final_mass(&self) -> f64 {
        self.mass.last().map_or(f64::NAN, |r| r.total_mass)
    }
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn density_file_name(time: f64) -> String {
    format!("density_t{time}.csv")
}

pub fn value_file_name(start: f64) -> String {
    format!("value_x{start}.csv")
}

/// Solves the configured model and computes every artifact.
pub fn execute(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let model = config.build_model();
    let engine = config.engine_config();
    let density = config.initial_density();
    let grid = config.control_grid()?;
    let phase1 = config.phase_one();
    let solution = solve(model.as_ref(), &engine, phase1.as_ref(), &grid, &density)?;
    let traj = &solution.run.trajectories;

    let mass = (0..=traj.n_steps())
        .map(|n| {
            let s = traj.state_summary(n).summary();
            let com = if s.mass > 0.0 {
                s.first_moment / s.mass
            } else {
                f64::NAN
            };
            MassRow {
                t: traj.time(n),
                total_mass: s.mass,
                first_moment: s.first_moment,
                center_of_mass: com,
            }
        })
        .collect();

    let domain = config.domain();
    let xs: Vec<f64> = (0..DENSITY_GRID_POINTS)
        .map(|i| domain.lo + domain.width() * i as f64 / (DENSITY_GRID_POINTS - 1) as f64)
        .collect();
    let kernel = ShapeKernel::new(config.kde_kernel, config.kde_bandwidth, 1)?;
    let densities = config
        .snapshot_times
        .iter()
        .map(|&time| {
            let step = ((time / config.dt).round() as usize).min(traj.n_steps());
            let density = density_profile(traj, step, &kernel, &xs, None);
            DensitySnapshot {
                time,
                step,
                xs: xs.clone(),
                density,
            }
        })
        .collect();

    let value_traces = if config.value_trace_starts.is_empty() {
        Vec::new()
    } else {
        let cfg = crate::engine::EngineConfig {
            phase: 2,
            ..engine.clone()
        };
        let solver = Solver::from_density(model.as_ref(), cfg, solution.grid.clone(), &density)?;
        let picks: Vec<usize> = config
            .value_trace_starts
            .iter()
            .map(|&x| {
                (0..traj.n_particles())
                    .min_by(|&a, &b| {
                        let da = (traj.position(a, 0) - x).abs();
                        let db = (traj.position(b, 0) - x).abs();
                        da.total_cmp(&db).then(a.cmp(&b))
                    })
                    .expect("at least one particle")
            })
            .collect();
        let traces = value_function_trace(&solver, traj, &picks);
        let times: Vec<f64> = (0..=traj.n_steps()).map(|n| traj.time(n)).collect();
        config
            .value_trace_starts
            .iter()
            .zip(picks)
            .zip(traces)
            .map(|((&start, particle), values)| ValueTrace {
                start,
                particle,
                initial_position: traj.position(particle, 0),
                times: times.clone(),
                values,
            })
            .collect()
    };

    Ok(RunArtifacts {
        config: config.clone(),
        solution,
        mass,
        densities,
        value_traces,
    })
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let file =
        File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

fn iterations_csv(reports: &[IterationReport]) -> String {
    let mut s = String::from("sweep,modifications,distribution_change,converged\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.sweep,
            r.modifications,
            fmt_float(r.distribution_change),
            r.converged
        );
    }
    s
}

/// Resolved configuration preceded by `# key = value` result lines.
pub fn manifest_text(art: &RunArtifacts) -> String {
    let sol = &art.solution;
    let v = &sol.verification;
    let grid = sol
        .grid
        .points()
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let mut s = String::from("# mfg run manifest\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "# {k} = {v}");
    };
    kv("version", env!("CARGO_PKG_VERSION").to_string());
    kv("converged", sol.run.converged.to_string());
    kv("sweeps", sol.run.reports.len().to_string());
    kv(
        "final_modifications",
        sol.run
            .reports
            .last()
            .map_or("none".into(), |r| r.modifications.to_string()),
    );
    if let Some(p1) = &sol.phase1 {
        kv("phase1_converged", p1.run.converged.to_string());
        kv("phase1_sweeps", p1.run.reports.len().to_string());
    }
    kv("control_grid", grid);
    kv("verification_passed", v.passed().to_string());
    kv("frozen_modifications", v.frozen_modifications.to_string());
    kv("fixed_point_residual", fmt_float(v.fixed_point_residual));
    kv(
        "stationarity_modifications",
        v.stationarity_modifications.to_string(),
    );
    kv("greedy_checked", v.greedy_checked.to_string());
    kv("greedy_violations", v.greedy_violations.to_string());
    kv("final_mass", fmt_float(art.final_mass()));
    s.push_str(&art.config.to_text());
    s
}

fn plots_script(art: &RunArtifacts) -> String {
    let mut s = String::from("set datafile separator ','\nset terminal pngcairo size 900,600\n\n");
    s.push_str("set output 'mass.png'\nset xlabel 't'\nset ylabel 'mass'\n");
    s.push_str("plot 'mass.csv' skip 1 using 1:2 with lines title 'total mass'\n\n");
    if !art.densities.is_empty() {
        s.push_str("set output 'density.png'\nset xlabel 'x'\nset ylabel 'density'\nplot ");
        let parts: Vec<String> = art
            .densities
            .iter()
            .map(|d| {
                format!(
                    "'{}' skip 1 using 1:2 with lines title 't = {}'",
                    density_file_name(d.time),
                    d.time
                )
            })
            .collect();
        s.push_str(&parts.join(", \\\n     "));
        s.push_str("\n\n");
    }
    if !art.value_traces.is_empty() {
        s.push_str("set output 'value.png'\nset xlabel 't'\nset ylabel 'u'\nplot ");
        let parts: Vec<String> = art
            .value_traces
            .iter()
            .map(|v| {
                format!(
                    "'{}' skip 1 using 1:2 with lines title 'x0 = {}'",
                    value_file_name(v.start),
                    v.start
                )
            })
            .collect();
        s.push_str(&parts.join(", \\\n     "));
        s.push_str("\n\n");
    }
    s.push_str("set output 'iterations.png'\nset xlabel 'sweep'\nset ylabel 'modifications'\nset logscale y\n");
    s.push_str("plot 'iterations.csv' skip 1 using 1:($2 > 0 ? $2 : 1/0) with linespoints title 'modifications'\n");
    s
}

/// Writes every artifact into `dir`, creating it if needed. Returns the
/// written paths.
pub fn write_outputs(art: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();

    let mut mass = String::from("t,total_mass,first_moment,center_of_mass\n");
    for r in &art.mass {
        let _ = writeln!(
            mass,
            "{},{},{},{}",
            fmt_float(r.t),
            fmt_float(r.total_mass),
            fmt_float(r.first_moment),
            fmt_float(r.center_of_mass)
        );
    }
    written.push(write_file(dir, "mass.csv", &mass)?);

    for d in &art.densities {
        let mut s = String::from("x,density\n");
        for (x, p) in d.xs.iter().zip(&d.density) {
            let _ = writeln!(s, "{},{}", fmt_float(*x), fmt_float(*p));
        }
        written.push(write_file(dir, &density_file_name(d.time), &s)?);
    }

    written.push(write_file(
        dir,
        "iterations.csv",
        &iterations_csv(&art.solution.run.reports),
    )?);
    if let Some(p1) = &art.solution.phase1 {
        written.push(write_file(
            dir,
            "phase1_iterations.csv",
            &iterations_csv(&p1.run.reports),
        )?);
    }

    for v in &art.value_traces {
        let mut s = String::from("t,u\n");
        for (t, u) in v.times.iter().zip(&v.values) {
            let _ = writeln!(s, "{},{}", fmt_float(*t), fmt_float(*u));
        }
        written.push(write_file(dir, &value_file_name(v.start), &s)?);
    }

    written.push(write_file(dir, "manifest.txt", &manifest_text(art))?);
    written.push(write_file(dir, "plots.gp", &plots_script(art))?);
    Ok(written)
}

/// Contents of a run directory's manifest: the `# key = value` result lines
/// and the resolved configuration.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub results: Vec<(String, String)>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn result(&self, key: &str) -> Option<&str> {
        self.results
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let results = text
        .lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    Ok(Manifest {
        results,
        config: RunConfig::parse(&text)?,
    })
}

/// Rows of an `iterations.csv` file.
pub fn read_iterations(path: &Path) -> Result<Vec<IterationReport>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(perr(i + 1, format!("expected 4 fields, got {}", f.len())));
            }
            let bad = |what: &str| perr(i + 1, format!("invalid {what}"));
            Ok(IterationReport {
                sweep: f[0].parse().map_err(|_| bad("sweep"))?,
                modifications: f[1].parse().map_err(|_| bad("modifications"))?,
                distribution_change: f[2].parse().map_err(|_| bad("distribution_change"))?,
                converged: f[3].parse().map_err(|_| bad("converged"))?,
            })
        })
        .collect()
}
