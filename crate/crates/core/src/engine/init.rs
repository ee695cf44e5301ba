use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::controls::ControlGrid;
use crate::interval::Interval;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

use super::{stream_id, EngineConfig, TrajectorySet};

/// Cells of the tabulated CDF used for inverse-transform sampling.
const CDF_CELLS: usize = 4096;

/// Initial agent density on the domain.
#[derive(Clone)]
pub enum InitialDensity {
    Uniform,
    /// Constant on `(lo, hi)`, zero elsewhere.
    Step {
        lo: f64,
        hi: f64,
    },
    /// Arbitrary non-negative density; normalized numerically.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for InitialDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialDensity::Uniform => f.write_str("Uniform"),
            InitialDensity::Step { lo, hi } => write!(f, "Step {{ lo: {lo}, hi: {hi} }}"),
            InitialDensity::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl InitialDensity {
    fn raw(&self, domain: Interval, x: f64) -> f64 {
        match self {
            InitialDensity::Uniform => 1.0 / domain.width(),
            InitialDensity::Step { lo, hi } => {
                if x > *lo && x < *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            InitialDensity::Custom(f) => f(x),
        }
    }
}

/// Piecewise-linear inverse of the tabulated CDF of a density on `domain`.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    /// Tabulates the CDF by the midpoint rule on a uniform grid. Step
    /// densities whose jumps fall on grid nodes are represented exactly.
    pub fn new(density: &InitialDensity, domain: Interval) -> Result<Self> {
        if let InitialDensity::Step { lo, hi } = *density {
            if !(lo < hi) || lo < domain.lo || hi > domain.hi {
                return Err(Error::InvalidDensity(format!(
                    "step support ({lo}, {hi}) must be a non-empty subinterval of {domain}"
                )));
            }
        }
        let h = domain.width() / CDF_CELLS as f64;
        let mut nodes = Vec::with_capacity(CDF_CELLS + 1);
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        nodes.push(domain.lo);
        cdf.push(0.0);
        let mut total = 0.0;
        for i in 0..CDF_CELLS {
            let mid = domain.lo + (i as f64 + 0.5) * h;
            let v = density.raw(domain, mid);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDensity(format!(
                    "density is {v} at x = {mid}"
                )));
            }
            total += v * h;
            nodes.push(domain.lo + (i + 1) as f64 * h);
            cdf.push(total);
        }
        if total <= 0.0 {
            return Err(Error::InvalidDensity("density has zero total mass".into()));
        }
        for c in &mut cdf {
            *c /= total;
        }
        Ok(InverseCdf { nodes, cdf })
    }

    /// Smallest `x` with `F(x) = u`, interpolating linearly within a cell.
    pub fn sample(&self, u: f64) -> f64 {
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
        if c1 > c0 {
            x0 + (u - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }
}

/// Positions at `t = 0`, one uniform draw per particle from its own stream.
pub fn init_ensemble(
    config: &EngineConfig,
    density: &InitialDensity,
    domain: Interval,
) -> Result<Vec<f64>> {
    let inv = InverseCdf::new(density, domain)?;
    Ok((0..config.n_particles)
        .map(|k| {
            let u: f64 = rng::stream(
                config.seed,
                Purpose::InitialPosition,
                stream_id(config.phase, k as u64),
                0,
            )
            .random();
            // keep atoms inside the open domain
            inv.sample(u)
                .clamp(domain.lo.next_up(), domain.hi.next_down())
        })
        .collect())
}

/// Largest-magnitude grid control pointing toward the nearest boundary point;
/// the midpoint goes to the lower boundary.
pub fn initial_control_index(x: f64, domain: Interval, grid: &ControlGrid) -> usize {
    if domain.hi - x < x - domain.lo {
        grid.max_index()
    } else {
        grid.min_index()
    }
}

/// Outcome of one Euler–Maruyama step of the stopped SDE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeStep {
    pub x: f64,
    pub exited: bool,
}

/// `x' = x + b dt + 2 sqrt(sigma) sqrt(dt) xi`, absorbed at the boundary of
/// `domain`: a step landing outside the open domain exits at the crossed
/// boundary point.
pub fn step_sde(x: f64, drift: f64, sigma: f64, dt: f64, xi: f64, domain: Interval) -> SdeStep {
    let next = x + drift * dt + 2.0 * sigma.sqrt() * dt.sqrt() * xi;
    if domain.interior_contains(next) {
        SdeStep {
            x: next,
            exited: false,
        }
    } else {
        SdeStep {
            x: domain.clamp(next),
            exited: true,
        }
    }
}

/// Empty trajectory set with equal weights `1 / N`.
pub(crate) fn empty_trajectories(
    positions: &[f64],
    n_steps: usize,
    dt: f64,
    domain: Interval,
    grid: &ControlGrid,
) -> TrajectorySet {
    let w = 1.0 / positions.len() as f64;
    TrajectorySet::new(
        positions,
        vec![w; positions.len()],
        n_steps,
        dt,
        domain,
        grid.clone(),
    )
}
