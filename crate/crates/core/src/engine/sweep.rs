use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::controls::{argmin_index, ControlGrid};
use crate::math::WeakStarMetricConfig;
use crate::measures::{Atom, MeasureView, SummaryAccumulator};
use crate::models::MeanFieldModel;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

use super::analysis::prune_control_set;
use super::init::{empty_trajectories, init_ensemble, initial_control_index, step_sde};
use super::{stream_id, CostEvaluation, EngineConfig, InitialDensity, SweepMode, TrajectorySet};

/// Share of `(particle, step)` pairs re-checked by the greedy spot check.
const GREEDY_SAMPLE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationReport {
    pub sweep: usize,
    pub modifications: usize,
    pub distribution_change: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EquilibriumRun {
    pub trajectories: TrajectorySet,
    pub reports: Vec<IterationReport>,
    pub converged: bool,
}

/// Checks on a final trajectory set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    /// Pairs whose best reply against the frozen final measures differs from
    /// the adopted control.
    pub frozen_modifications: usize,
    /// Largest `|alpha - best reply|` over all atoms and steps.
    pub fixed_point_residual: f64,
    /// Modifications recorded by one further ordinary sweep.
    pub stationarity_modifications: usize,
    pub greedy_checked: usize,
    pub greedy_violations: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.frozen_modifications == 0
            && self.fixed_point_residual == 0.0
            && self.stationarity_modifications == 0
            && self.greedy_violations == 0
    }
}

/// Standard normal increments `xi[k][n]`, identical in every sweep.
struct NoiseTable {
    n_steps: usize,
    values: Vec<f64>,
}

impl NoiseTable {
    fn new(config: &EngineConfig, sigma: f64, pool: &rayon::ThreadPool) -> Self {
        if sigma == 0.0 {
            return NoiseTable {
                n_steps: config.n_steps,
                values: Vec::new(),
            };
        }
        let n_steps = config.n_steps;
        let mut values = vec![0.0; config.n_particles * n_steps];
        pool.install(|| {
            values
                .par_chunks_mut(n_steps)
                .enumerate()
                .for_each(|(k, row)| {
                    for (n, v) in row.iter_mut().enumerate() {
                        *v = rng::stream(
                            config.seed,
                            Purpose::Noise,
                            stream_id(config.phase, k as u64),
                            n as u64,
                        )
                        .sample(StandardNormal);
                    }
                })
        });
        NoiseTable { n_steps, values }
    }

    #[inline]
    fn get(&self, k: usize, n: usize) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values[k * self.n_steps + n]
        }
    }
}

/// One-phase particle solver over a fixed control grid.
pub struct Solver<'m> {
    model: &'m dyn MeanFieldModel,
    config: EngineConfig,
    grid: ControlGrid,
    positions: Vec<f64>,
    noise: NoiseTable,
    metric: WeakStarMetricConfig,
    pool: rayon::ThreadPool,
}

impl<'m> Solver<'m> {
    /// Solver for particles starting at `positions` (equal weights).
    pub fn new(
        model: &'m dyn MeanFieldModel,
        config: EngineConfig,
        grid: ControlGrid,
        positions: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        if positions.len() != config.n_particles {
            return Err(Error::InvalidInput(format!(
                "{} initial positions for {} particles",
                positions.len(),
                config.n_particles
            )));
        }
        let domain = model.domain();
        if let Some(x) = positions.iter().find(|&&x| !domain.interior_contains(x)) {
            return Err(Error::InvalidInput(format!(
                "initial position {x} outside {domain}"
            )));
        }
        let ctrl = model.control_set();
        if grid.get(0) < ctrl.lo || grid.get(grid.len() - 1) > ctrl.hi {
            return Err(Error::InvalidInput(format!("control grid exceeds {ctrl}")));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        let metric = WeakStarMetricConfig::new(
            config.metric_a,
            config.metric_terms,
            vec![(domain.lo, domain.hi), (ctrl.lo, ctrl.hi)],
        )?;
        let noise = NoiseTable::new(&config, model.sigma(), &pool);
        Ok(Solver {
            model,
            config,
            grid,
            positions,
            noise,
            metric,
            pool,
        })
    }

    /// Solver with positions drawn from `density`.
    pub fn from_density(
        model: &'m dyn MeanFieldModel,
        config: EngineConfig,
        grid: ControlGrid,
        density: &InitialDensity,
    ) -> Result<Self> {
        let positions = init_ensemble(&config, density, model.domain())?;
        Solver::new(model, config, grid, positions)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn grid(&self) -> &ControlGrid {
        &self.grid
    }

    pub fn model(&self) -> &dyn MeanFieldModel {
        self.model
    }

    pub fn metric(&self) -> &WeakStarMetricConfig {
        &self.metric
    }

    pub(crate) fn pool(&self) -> &rayon::ThreadPool {
        &self.pool
    }

    fn blank(&self) -> TrajectorySet {
        empty_trajectories(
            &self.positions,
            self.config.n_steps,
            self.config.dt,
            self.model.domain(),
            &self.grid,
        )
    }

    /// `dt L` of control `alpha` for an agent at `x` facing `view`.
    pub(crate) fn one_step_cost(&self, t: f64, x: f64, alpha: f64, view: &MeasureView<'_>) -> f64 {
        let dt = self.config.dt;
        let at = match self.config.cost_evaluation {
            CostEvaluation::PreStep => x,
            CostEvaluation::PostStep => self
                .model
                .domain()
                .clamp(x + self.model.drift(t, x, alpha, view) * dt),
        };
        dt * self.model.lagrangian(t, at, alpha, view)
    }

    fn best_index(&self, t: f64, x: f64, view: &MeasureView<'_>) -> Result<usize> {
        argmin_index(
            self.grid
                .points()
                .iter()
                .map(|&a| self.one_step_cost(t, x, a, view)),
        )
    }

    /// Paths under the boundary-seeking initial controls, each particle
    /// holding its initial control until it exits.
    pub fn initial_trajectories(&self) -> TrajectorySet {
        let model = self.model;
        let domain = model.domain();
        let mut traj = self.blank();
        let index: Vec<usize> = self
            .positions
            .iter()
            .map(|&x| initial_control_index(x, domain, &self.grid))
            .collect();
        let atoms_mode = model.requires_atoms();
        let mut atoms = Vec::new();
        for n in 0..self.config.n_steps {
            let t = traj.time(n);
            let active: Vec<usize> = (0..traj.n_particles())
                .filter(|&k| traj.is_active(k, n))
                .collect();
            for &k in &active {
                traj.set_control(k, n, index[k]);
            }
            let acc: SummaryAccumulator = active
                .iter()
                .map(|&k| traj.atom(k, n).expect("active particle has an atom"))
                .collect::<Vec<_>>()
                .iter()
                .collect();
            if atoms_mode {
                atoms = (0..traj.n_particles())
                    .map(|k| traj.atom(k, n).unwrap_or(Atom::new(0.0, 0.0, 0.0)))
                    .collect();
            }
            let view = MeasureView::new(acc.summary(), &atoms);
            for &k in &active {
                let x = traj.position(k, n);
                let alpha = self.grid.get(index[k]);
                let drift = model.drift(t, x, alpha, &view);
                let step = step_sde(
                    x,
                    drift,
                    model.sigma(),
                    self.config.dt,
                    self.noise.get(k, n),
                    domain,
                );
                traj.advance(k, n, step);
            }
        }
        traj
    }

    /// One Gauss–Seidel best-reply pass over the horizon.
    ///
    /// At step `n` the population starts as `previous`'s atoms at `n` of the
    /// particles still active in the new pass; each visited particle's old
    /// atom is replaced by its new one right after it decides and moves.
    /// `modifications` counts `(particle, step)` slots whose control differs
    /// from `previous`, including slots that gained or lost a control because
    /// the particle exits at a different step.
    pub fn sweep(
        &self,
        previous: &TrajectorySet,
        sweep_index: usize,
        previous_moments: Option<&[f64]>,
    ) -> Result<(TrajectorySet, IterationReport)> {
        let model = self.model;
        let domain = model.domain();
        let sigma = model.sigma();
        let dt = self.config.dt;
        let exclude_self = self.config.exclude_self;
        let atoms_mode = model.requires_atoms();
        let mut cur = previous.restart();
        let n_particles = cur.n_particles();
        let mut atoms = if atoms_mode {
            vec![Atom::new(0.0, 0.0, 0.0); n_particles]
        } else {
            Vec::new()
        };
        let mut order = Vec::with_capacity(n_particles);

        for n in 0..self.config.n_steps {
            let t = cur.time(n);
            order.clear();
            order.extend((0..n_particles).filter(|&k| cur.is_active(k, n)));
            let mut order_rng = rng::stream(
                self.config.seed,
                Purpose::VisitOrder,
                stream_id(self.config.phase, sweep_index as u64),
                n as u64,
            );
            order.shuffle(&mut order_rng);

            let mut acc = SummaryAccumulator::default();
            if atoms_mode {
                atoms.iter_mut().for_each(|a| a.weight = 0.0);
            }
            for &k in &order {
                if let Some(a) = previous.atom(k, n) {
                    acc.add(&a);
                    if atoms_mode {
                        atoms[k] = a;
                    }
                }
            }

            for (pos, &k) in order.iter().enumerate() {
                let old = previous.atom(k, n);
                let x = cur.position(k, n);
                if exclude_self {
                    if let Some(a) = old {
                        acc.remove(&a);
                        if atoms_mode {
                            atoms[k].weight = 0.0;
                        }
                    }
                }
                let view = MeasureView::new(acc.summary(), &atoms);
                let decides = match self.config.sweep_mode {
                    SweepMode::AllParticlesPerStep => true,
                    SweepMode::OneParticlePerStep => pos == 0,
                };
                let index = if decides {
                    self.best_index(t, x, &view)?
                } else {
                    previous
                        .control_index(k, n)
                        .unwrap_or_else(|| initial_control_index(x, domain, &self.grid))
                };
                let alpha = self.grid.get(index);
                let drift = model.drift(t, x, alpha, &view);
                if !exclude_self {
                    if let Some(a) = old {
                        acc.remove(&a);
                    }
                }
                let new = Atom::new(x, alpha, cur.weight(k));
                acc.add(&new);
                if atoms_mode {
                    atoms[k] = new;
                }
                cur.set_control(k, n, index);
                cur.advance(
                    k,
                    n,
                    step_sde(x, drift, sigma, dt, self.noise.get(k, n), domain),
                );
            }
        }

        let modifications = cur.control_differences(previous);
        let distribution_change = {
            let before = match previous_moments {
                Some(m) => m.to_vec(),
                None => self.time_averaged_moments(previous),
            };
            let after = self.time_averaged_moments(&cur);
            self.metric.distance_from_moments(&before, &after)
        };
        let converged =
            modifications == 0 || distribution_change <= self.config.convergence_threshold;
        Ok((
            cur,
            IterationReport {
                sweep: sweep_index,
                modifications,
                distribution_change,
                converged,
            },
        ))
    }

    pub(crate) fn time_averaged_moments(&self, traj: &TrajectorySet) -> Vec<f64> {
        traj.time_averaged_moments(&self.metric)
    }

    /// Sweeps from the initial trajectories until convergence or
    /// `max_sweeps`.
    pub fn run_to_equilibrium(&self) -> Result<EquilibriumRun> {
        let mut traj = self.initial_trajectories();
        let mut moments = self.time_averaged_moments(&traj);
        let mut reports = Vec::new();
        let mut converged = false;
        for j in 1..=self.config.max_sweeps {
            let (next, report) = self.sweep(&traj, j, Some(&moments))?;
            moments = self.time_averaged_moments(&next);
            traj = next;
            reports.push(report);
            if report.converged {
                converged = true;
                break;
            }
        }
        Ok(EquilibriumRun {
            trajectories: traj,
            reports,
            converged,
        })
    }

    /// Best replies of every active `(particle, step)` against the frozen
    /// measures of `traj`, plus a further ordinary sweep.
    pub fn verify(
        &self,
        traj: &TrajectorySet,
        next_sweep_index: usize,
    ) -> Result<VerificationReport> {
        let exclude_self = self.config.exclude_self;
        let atoms_mode = self.model.requires_atoms();
        let per_step: Vec<Result<(usize, f64, usize, usize)>> = self.pool.install(|| {
            (0..self.config.n_steps)
                .into_par_iter()
                .map(|n| {
                    let t = traj.time(n);
                    let mut atoms: Vec<Atom> = (0..traj.n_particles())
                        .map(|k| traj.atom(k, n).unwrap_or(Atom::new(0.0, 0.0, 0.0)))
                        .collect();
                    let full: SummaryAccumulator =
                        atoms.iter().filter(|a| a.weight > 0.0).collect();
                    let (mut mismatches, mut residual, mut checked, mut violations) =
                        (0, 0.0f64, 0, 0);
                    for k in 0..traj.n_particles() {
                        let Some(own) = traj.atom(k, n) else { continue };
                        let mut acc = full;
                        if exclude_self {
                            acc.remove(&own);
                            if atoms_mode {
                                atoms[k].weight = 0.0;
                            }
                        }
                        let view =
                            MeasureView::new(acc.summary(), if atoms_mode { &atoms } else { &[] });
                        let costs: Vec<f64> = self
                            .grid
                            .points()
                            .iter()
                            .map(|&a| self.one_step_cost(t, own.x, a, &view))
                            .collect();
                        let best = argmin_index(costs.iter().copied())?;
                        let adopted = traj
                            .control_index(k, n)
                            .expect("active particle has a control");
                        if best != adopted {
                            mismatches += 1;
                        }
                        residual = residual.max((self.grid.get(best) - own.alpha).abs());
                        let u: f64 = rng::stream(
                            self.config.seed,
                            Purpose::Sampling,
                            stream_id(self.config.phase, k as u64),
                            n as u64,
                        )
                        .random();
                        if u < GREEDY_SAMPLE_RATE {
                            checked += 1;
                            if costs.iter().any(|&c| c < costs[adopted]) {
                                violations += 1;
                            }
                        }
                        if atoms_mode {
                            atoms[k] = own;
                        }
                    }
                    Ok((mismatches, residual, checked, violations))
                })
                .collect()
        });
        let mut report = VerificationReport {
            frozen_modifications: 0,
            fixed_point_residual: 0.0,
            stationarity_modifications: 0,
            greedy_checked: 0,
            greedy_violations: 0,
        };
        for r in per_step {
            let (m, res, c, v) = r?;
            report.frozen_modifications += m;
            report.fixed_point_residual = report.fixed_point_residual.max(res);
            report.greedy_checked += c;
            report.greedy_violations += v;
        }
        let (_, extra) = self.sweep(traj, next_sweep_index, None)?;
        report.stationarity_modifications = extra.modifications;
        Ok(report)
    }
}

/// Settings of the cheap first run used to prune the control grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOneConfig {
    pub n_particles: usize,
    /// Minimum usage frequency for a control to survive pruning.
    pub keep_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseOneOutput {
    pub run: EquilibriumRun,
    pub pruned_grid: ControlGrid,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub phase1: Option<PhaseOneOutput>,
    pub grid: ControlGrid,
    pub run: EquilibriumRun,
    pub verification: VerificationReport,
}

/// Optional pruning run on the full grid, then the main run on the pruned
/// grid, then verification of the main run.
pub fn solve(
    model: &dyn MeanFieldModel,
    config: &EngineConfig,
    phase1: Option<&PhaseOneConfig>,
    grid: &ControlGrid,
    density: &InitialDensity,
) -> Result<SolveOutput> {
    let (phase1_out, grid) = match phase1 {
        Some(p1) => {
            let cfg = EngineConfig {
                n_particles: p1.n_particles,
                phase: 1,
                ..config.clone()
            };
            let solver = Solver::from_density(model, cfg, grid.clone(), density)?;
            let run = solver.run_to_equilibrium()?;
            let pruned_grid = prune_control_set(&run.trajectories, grid, p1.keep_fraction)?;
            let g = pruned_grid.clone();
            (Some(PhaseOneOutput { run, pruned_grid }), g)
        }
        None => (None, grid.clone()),
    };
    let cfg = EngineConfig {
        phase: 2,
        ..config.clone()
    };
    let solver = Solver::from_density(model, cfg, grid.clone(), density)?;
    let run = solver.run_to_equilibrium()?;
    let verification = solver.verify(&run.trajectories, run.reports.len() + 1)?;
    Ok(SolveOutput {
        phase1: phase1_out,
        grid,
        run,
        verification,
    })
}
