use rayon::prelude::*;

use crate::controls::ControlGrid;
use crate::math::{kernel_density, ShapeKernel};
use crate::measures::{Atom, MeasureView, SummaryAccumulator};
use crate::Result;

use super::{Solver, TrajectorySet};

/// Sub-grid of the controls used in at least `threshold` of all decisions of
/// `traj`. Falls back to the two most used controls (lower index first on
/// ties) when fewer than two pass.
pub fn prune_control_set(
    traj: &TrajectorySet,
    grid: &ControlGrid,
    threshold: f64,
) -> Result<ControlGrid> {
    let usage = traj.control_usage();
    let total = traj.decision_count();
    let mut keep: Vec<usize> = (0..grid.len())
        .filter(|&i| threshold <= 0.0 || (total > 0 && usage[i] as f64 / total as f64 >= threshold))
        .collect();
    if keep.len() < 2 {
        let mut ranked: Vec<usize> = (0..grid.len()).collect();
        ranked.sort_by(|&a, &b| usage[b].cmp(&usage[a]).then(a.cmp(&b)));
        keep = ranked[..2].to_vec();
        keep.sort_unstable();
    }
    ControlGrid::from_points(keep.into_iter().map(|i| grid.get(i)).collect())
}

/// Realized cost-to-go `u_k(t^n)` of the particles `ks`, one entry per time
/// index `0..=n_steps`.
///
/// Built backward from the exit (or terminal) cost: `u(t^n) = u(t^(n+1)) +
/// dt L` while the particle is active, and `u = 0` from its exit step on.
/// Running costs are the one-step costs the particle minimized.
pub fn value_function_trace(
    solver: &Solver<'_>,
    traj: &TrajectorySet,
    ks: &[usize],
) -> Vec<Vec<f64>> {
    let model = solver.model();
    let exclude_self = solver.config().exclude_self;
    let n_steps = traj.n_steps();
    let atoms_mode = model.requires_atoms();
    let step_atoms = |n: usize| -> Vec<Atom> {
        (0..traj.n_particles())
            .map(|k| traj.atom(k, n).unwrap_or(Atom::new(0.0, 0.0, 0.0)))
            .collect()
    };
    let summaries: Vec<SummaryAccumulator> = solver.pool().install(|| {
        (0..n_steps)
            .into_par_iter()
            .map(|n| step_atoms(n).iter().filter(|a| a.weight > 0.0).collect())
            .collect()
    });
    ks.iter()
        .map(|&k| {
            let end = traj.exit_step(k).unwrap_or(n_steps);
            let x_end = traj.position(k, end);
            let mut u = vec![0.0; n_steps + 1];
            let mut acc = model.terminal_cost(x_end, traj.total_mass(end));
            if traj.exit_step(k).is_none() {
                u[n_steps] = acc;
            }
            for n in (0..end).rev() {
                let own = traj.atom(k, n).expect("active particle has an atom");
                let mut summary = summaries[n];
                let mut atoms = if atoms_mode {
                    step_atoms(n)
                } else {
                    Vec::new()
                };
                if exclude_self {
                    summary.remove(&own);
                    if atoms_mode {
                        atoms[k].weight = 0.0;
                    }
                }
                let view = MeasureView::new(summary.summary(), &atoms);
                acc += solver.one_step_cost(traj.time(n), own.x, own.alpha, &view);
                u[n] = acc;
            }
            u
        })
        .collect()
}

/// Kernel density estimate of the active particles at time index `n`,
/// evaluated at `xs`.
pub fn density_profile(
    traj: &TrajectorySet,
    n: usize,
    kernel: &ShapeKernel,
    xs: &[f64],
    pool: Option<&rayon::ThreadPool>,
) -> Vec<f64> {
    let atoms: Vec<(f64, f64)> = (0..traj.n_particles())
        .filter(|&k| traj.is_active(k, n))
        .map(|k| (traj.position(k, n), traj.weight(k)))
        .collect();
    let eval = || {
        xs.par_iter()
            .map(|&x| kernel_density(&atoms, kernel, x))
            .collect()
    };
    match pool {
        Some(p) => p.install(eval),
        None => eval(),
    }
}
