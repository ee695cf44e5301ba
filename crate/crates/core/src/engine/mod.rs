//! Particle method: ensemble initialization, stopped Euler–Maruyama paths,
//! randomized Gauss–Seidel best-reply sweeps and the outer equilibrium loop.

mod analysis;
mod init;
mod sweep;
mod trajectory;


use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub use analysis::{density_profile, prune_control_set, value_function_trace};
pub use init::{
    init_ensemble, initial_control_index, step_sde, InitialDensity, InverseCdf, SdeStep,
};
pub use sweep::{
    solve, EquilibriumRun, IterationReport, PhaseOneConfig, PhaseOneOutput, SolveOutput, Solver,
    VerificationReport,
};
pub use trajectory::TrajectorySet;

/// How many particles re-decide at each time step of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Every active particle, in a fresh random order per step.
    #[default]
    AllParticlesPerStep,
    /// Only the first particle of the step's random order; the others keep
    /// their previous-sweep control.
    OneParticlePerStep,
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::AllParticlesPerStep => "all_particles_per_step",
            SweepMode::OneParticlePerStep => "one_particle_per_step",
        })
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_particles_per_step" => Ok(SweepMode::AllParticlesPerStep),
            "one_particle_per_step" => Ok(SweepMode::OneParticlePerStep),
            _ => Err(Error::InvalidInput(format!("unknown sweep mode `{s}`"))),
        }
    }
}

/// Where the one-step cost of a candidate control is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostEvaluation {
    /// `dt L(t, x + b dt, alpha; mu)`, at the deterministic landing point
    /// (clamped to the closed domain).
    #[default]
    PostStep,
    /// `dt L(t, x, alpha; mu)`.
    PreStep,
}

impl fmt::Display for CostEvaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostEvaluation::PostStep => "post_step",
            CostEvaluation::PreStep => "pre_step",
        })
    }
}

impl FromStr for CostEvaluation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post_step" => Ok(CostEvaluation::PostStep),
            "pre_step" => Ok(CostEvaluation::PreStep),
            _ => Err(Error::InvalidInput(format!(
                "unknown cost evaluation `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub n_particles: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub sweep_mode: SweepMode,
    pub cost_evaluation: CostEvaluation,
    /// Drop the deciding particle's own atom from the population it reacts to.
    pub exclude_self: bool,
    pub max_sweeps: usize,
    /// Stop once the weak-* change between sweeps is at or below this value.
    pub convergence_threshold: f64,
    pub metric_a: f64,
    pub metric_terms: usize,
    /// Threads for the parallel diagnostics; 0 lets the pool decide.
    pub workers: usize,
    /// Tag separating the random streams of independent runs with one seed.
    pub phase: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            n_particles: 600,
            n_steps: 1000,
            dt: 0.004,
            seed: 0,
            sweep_mode: SweepMode::default(),
            cost_evaluation: CostEvaluation::default(),
            exclude_self: true,
            max_sweeps: 20,
            convergence_threshold: 0.0,
            metric_a: crate::math::WeakStarMetricConfig::DEFAULT_A,
            metric_terms: crate::math::WeakStarMetricConfig::DEFAULT_TERMS,
            workers: 0,
            phase: 0,
        }
    }
}

impl EngineConfig {
    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Validation("n_particles must be at least 1".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::Validation(
                "the horizon must contain at least one step".into(),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.convergence_threshold >= 0.0) {
            return Err(Error::Validation(
                "convergence_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn stream_id(phase: u32, index: u64) -> u64 {
    ((phase as u64) << 32) | (index & 0xffff_ffff)
}
