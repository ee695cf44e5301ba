use mfg_core::cli_io::{execute, ModelKind, RunConfig};
use mfg_core::engine::{solve, Solver};
use proptest::prelude::*;

fn small(model: ModelKind, n: usize, seed: u64, workers: usize) -> RunConfig {
    let mut cfg = RunConfig::defaults(model);
    cfg.n_particles = n;
    cfg.horizon = cfg.dt * 150.0;
    cfg.seed = seed;
    cfg.workers = workers;
    cfg.snapshot_times = vec![];
    cfg.value_trace_starts = vec![];
    cfg.phase1_n_particles = 10;
    cfg.max_sweeps = 8;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_monotone_and_paths_contained(n in 1usize..40, seed in 0u64..1_000_000, refi in any::<bool>()) {
        let model = if refi { ModelKind::Refinancing } else { ModelKind::Evacuation };
        let mut cfg = small(model, n, seed, 1);
        cfg.sigma = 0.05;
        let art = execute(&cfg).unwrap();
        let traj = &art.solution.run.trajectories;
        let domain = cfg.domain();
        prop_assert!(art.mass.windows(2).all(|w| w[1].total_mass <= w[0].total_mass));
        prop_assert!(traj.weights().iter().all(|&w| w >= 0.0));
        for n in 0..traj.n_steps() {
            let active: f64 = (0..traj.n_particles()).filter(|&k| traj.is_active(k, n)).map(|k| traj.weight(k)).sum();
            prop_assert!((traj.measure(n).total_mass() - active).abs() <= 1e-12);
        }
        for k in 0..traj.n_particles() {
            prop_assert!(traj.path(k).iter().all(|&x| domain.contains(x)));
            if let Some(e) = traj.exit_step(k) {
                prop_assert!(!domain.interior_contains(traj.position(k, e)));
                prop_assert!(traj.path(k)[e..].iter().all(|&x| x == traj.position(k, e)));
                for n in e..traj.n_steps() {
                    prop_assert!(!traj.is_active(k, n));
                    prop_assert!(traj.control(k, n).is_none());
                }
            }
        }
    }

    #[test]
    fn results_do_not_depend_on_worker_count(n in 1usize..30, seed in 0u64..1_000_000) {
        let a = execute(&small(ModelKind::Evacuation, n, seed, 1)).unwrap();
        let b = execute(&small(ModelKind::Evacuation, n, seed, 3)).unwrap();
        prop_assert_eq!(&a.solution.run.trajectories, &b.solution.run.trajectories);
        prop_assert_eq!(&a.solution.run.reports, &b.solution.run.reports);
        prop_assert_eq!(&a.solution.verification, &b.solution.verification);
        prop_assert_eq!(&a.mass, &b.mass);
    }
}

#[test]
fn converged_run_is_stationary_and_greedy() {
    let mut cfg = small(ModelKind::Evacuation, 30, 11, 2);
    cfg.max_sweeps = 60;
    let model = cfg.build_model();
    let engine = cfg.engine_config();
    let out = solve(
        model.as_ref(),
        &engine,
        cfg.phase_one().as_ref(),
        &cfg.control_grid().unwrap(),
        &cfg.initial_density(),
    )
    .unwrap();
    assert!(out.run.converged);
    let v = &out.verification;
    assert!(v.passed(), "{v:?}");
    assert_eq!(v.stationarity_modifications, 0);
    assert_eq!(v.fixed_point_residual, 0.0);
    assert_eq!(v.greedy_violations, 0);
}

#[test]
fn same_seed_same_trajectories() {
    let cfg = small(ModelKind::Refinancing, 25, 5, 0);
    let a = execute(&cfg).unwrap();
    let b = execute(&cfg).unwrap();
    assert_eq!(a.solution.run.trajectories, b.solution.run.trajectories);
    let mut other = cfg.clone();
    other.seed = 6;
    let c = execute(&other).unwrap();
    assert_ne!(a.solution.run.trajectories, c.solution.run.trajectories);
}

#[test]
fn sweep_reports_count_control_changes() {
    let cfg = small(ModelKind::Evacuation, 20, 2, 1);
    let model = cfg.build_model();
    let solver = Solver::from_density(
        model.as_ref(),
        cfg.engine_config(),
        cfg.control_grid().unwrap(),
        &cfg.initial_density(),
    )
    .unwrap();
    let init = solver.initial_trajectories();
    let (first, report) = solver.sweep(&init, 1, None).unwrap();
    assert_eq!(report.sweep, 1);
    assert_eq!(report.modifications, first.control_differences(&init));
    assert_eq!(report.converged, report.modifications == 0);
}
