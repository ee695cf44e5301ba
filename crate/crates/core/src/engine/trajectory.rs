use crate::controls::ControlGrid;
use crate::interval::Interval;
use crate::math::WeakStarMetricConfig;
use crate::measures::{Atom, EmpiricalJointMeasure, SummaryAccumulator};

use super::SdeStep;

const NO_CONTROL: u16 = u16::MAX;

/// Per-particle paths of one sweep over the time grid `t^n = n dt`,
/// `n = 0..=n_steps`.
///
/// Controls live on the `n_steps` intervals: the control at step `n` drives
/// the move from `t^n` to `t^(n+1)`. A particle with `exit_step = Some(e)`
/// crossed the boundary during step `e - 1`; from `t^e` on it is frozen at the
/// crossing point, carries no control and is absent from every measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    n_particles: usize,
    n_steps: usize,
    dt: f64,
    domain: Interval,
    grid: ControlGrid,
    weights: Vec<f64>,
    positions: Vec<f64>,
    controls: Vec<u16>,
    exit_step: Vec<Option<u32>>,
}

impl TrajectorySet {
    pub(crate) fn new(
        initial_positions: &[f64],
        weights: Vec<f64>,
        n_steps: usize,
        dt: f64,
        domain: Interval,
        grid: ControlGrid,
    ) -> Self {
        let n_particles = initial_positions.len();
        debug_assert_eq!(weights.len(), n_particles);
        assert!(grid.len() < NO_CONTROL as usize, "control grid too large");
        let mut positions = vec![0.0; n_particles * (n_steps + 1)];
        for (k, &x) in initial_positions.iter().enumerate() {
            positions[k * (n_steps + 1)] = x;
        }
        TrajectorySet {
            n_particles,
            n_steps,
            dt,
            domain,
            grid,
            weights,
            positions,
            controls: vec![NO_CONTROL; n_particles * n_steps],
            exit_step: vec![None; n_particles],
        }
    }

    /// Same particles and initial positions, with an empty history.
    pub(crate) fn restart(&self) -> Self {
        let initial: Vec<f64> = (0..self.n_particles).map(|k| self.position(k, 0)).collect();
        TrajectorySet::new(
            &initial,
            self.weights.clone(),
            self.n_steps,
            self.dt,
            self.domain,
            self.grid.clone(),
        )
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn grid(&self) -> &ControlGrid {
        &self.grid
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn position(&self, k: usize, n: usize) -> f64 {
        self.positions[k * (self.n_steps + 1) + n]
    }

    /// Positions of particle `k` at every time index.
    pub fn path(&self, k: usize) -> &[f64] {
        let stride = self.n_steps + 1;
        &self.positions[k * stride..(k + 1) * stride]
    }

    #[inline]
    pub fn is_active(&self, k: usize, n: usize) -> bool {
        self.exit_step[k].is_none_or(|e| n < e as usize)
    }

    pub fn exit_step(&self, k: usize) -> Option<usize> {
        self.exit_step[k].map(|e| e as usize)
    }

    pub fn exit_time(&self, k: usize) -> Option<f64> {
        self.exit_step(k).map(|e| self.time(e))
    }

    #[inline]
    pub fn control_index(&self, k: usize, n: usize) -> Option<usize> {
        match self.controls[k * self.n_steps + n] {
            NO_CONTROL => None,
            i => Some(i as usize),
        }
    }

    pub fn control(&self, k: usize, n: usize) -> Option<f64> {
        self.control_index(k, n).map(|i| self.grid.get(i))
    }

    /// Atom of particle `k` at step `n < n_steps`, if it is active there.
    #[inline]
    pub fn atom(&self, k: usize, n: usize) -> Option<Atom> {
        self.control(k, n)
            .map(|alpha| Atom::new(self.position(k, n), alpha, self.weights[k]))
    }

    pub(crate) fn set_control(&mut self, k: usize, n: usize, index: usize) {
        self.controls[k * self.n_steps + n] = index as u16;
    }

    /// Records the move of particle `k` from step `n` to `n + 1`. An exited
    /// step freezes the particle at the crossing point for the rest of the
    /// horizon.
    pub(crate) fn advance(&mut self, k: usize, n: usize, step: SdeStep) {
        let stride = self.n_steps + 1;
        let base = k * stride;
        if step.exited {
            for slot in &mut self.positions[base + n + 1..base + stride] {
                *slot = step.x;
            }
            self.exit_step[k] = Some((n + 1) as u32);
        } else {
            self.positions[base + n + 1] = step.x;
        }
    }

    /// Exact totals over the particles active at time index `n`.
    pub fn state_summary(&self, n: usize) -> SummaryAccumulator {
        let mut acc = SummaryAccumulator::default();
        for k in 0..self.n_particles {
            if self.is_active(k, n) {
                let alpha = if n < self.n_steps {
                    self.control(k, n).unwrap_or(0.0)
                } else {
                    0.0
                };
                acc.add(&Atom::new(self.position(k, n), alpha, self.weights[k]));
            }
        }
        acc
    }

    pub fn total_mass(&self, n: usize) -> f64 {
        self.state_summary(n).summary().mass
    }

    /// Empirical joint measure `mu_n` at step `n < n_steps`.
    pub fn measure(&self, n: usize) -> EmpiricalJointMeasure {
        let atoms: Vec<Atom> = (0..self.n_particles)
            .filter_map(|k| self.atom(k, n))
            .collect();
        let controls = Interval {
            lo: self.grid.get(0),
            hi: self.grid.get(self.grid.len() - 1),
        };
        EmpiricalJointMeasure::new(atoms, self.domain, controls)
            .expect("trajectory atoms satisfy the measure invariants")
    }

    /// Number of `(particle, step)` slots whose control or activity differs.
    pub fn control_differences(&self, other: &TrajectorySet) -> usize {
        debug_assert_eq!(self.controls.len(), other.controls.len());
        self.controls
            .iter()
            .zip(&other.controls)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Moments of the time-averaged joint measure `(1/N_T) sum_n mu_n`.
    pub fn time_averaged_moments(&self, cfg: &WeakStarMetricConfig) -> Vec<f64> {
        let mut out = vec![0.0; cfg.max_terms()];
        let scale = 1.0 / self.n_steps.max(1) as f64;
        for n in 0..self.n_steps {
            for k in 0..self.n_particles {
                if let Some(a) = self.atom(k, n) {
                    cfg.accumulate(&mut out, &[a.x, a.alpha], a.weight * scale);
                }
            }
        }
        out
    }

    /// How often each grid control is used across all `(particle, step)` slots.
    pub fn control_usage(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.grid.len()];
        for &c in &self.controls {
            if c != NO_CONTROL {
                counts[c as usize] += 1;
            }
        }
        counts
    }

    pub fn decision_count(&self) -> usize {
        self.controls.iter().filter(|&&c| c != NO_CONTROL).count()
    }
}
