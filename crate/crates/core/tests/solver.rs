use biot_core::assembly::{assemble_loads, assemble_system, FieldState, ZeroData};
use biot_core::manufactured::{run_manufactured, ManufacturedProblem};
use biot_core::mesh::Mesh;
use biot_core::params::{beta_value, BetaStrategy, SplitConfig};
use biot_core::solver::{relative_distance, time_march, Scheme, StepSolver};
use biot_core::spaces::Discretization;
use biot_core::Error;

struct Setup {
    disc: Discretization,
    problem: ManufacturedProblem,
    solver: StepSolver,
}

fn setup(n: usize, gamma1: f64) -> Setup {
    let problem = ManufacturedProblem::from_gammas(gamma1, 1.0);
    let disc = Discretization::new(Mesh::build_structured(n, n, 1.0, 1.0).unwrap(), 1).unwrap();
    let sys = assemble_system(&disc, &problem.params, 0.25, &problem.essential()).unwrap();
    Setup { disc, problem, solver: StepSolver::new(sys) }
}

#[test]
fn flow_step_is_exact_at_the_converged_stress() {
    let mut s = setup(6, 1.0);
    let prev = FieldState::zeros(&s.disc.layout(), 0.0);
    let loads = assemble_loads(&s.disc, &s.problem, 0.25).unwrap();
    let mono = s.solver.solve_monolithic(&prev, &loads, 0.25).unwrap();
    let (p, w) = s.solver.split_flow_step(&prev, &mono, &loads, 0.0).unwrap();
    assert!(relative_distance(&p, &mono.p) < 1e-9);
    assert!(relative_distance(&w, &mono.w) < 1e-9);
    // β only enters through pⁱ − pⁱ⁻¹, which vanishes at the fixed point
    let (p, _) = s.solver.split_flow_step(&prev, &mono, &loads, 0.4).unwrap();
    assert!(relative_distance(&p, &mono.p) < 1e-9);
}

#[test]
fn mechanics_step_is_exact_at_the_converged_pressure() {
    let mut s = setup(6, 1.0);
    let prev = FieldState::zeros(&s.disc.layout(), 0.0);
    let loads = assemble_loads(&s.disc, &s.problem, 0.25).unwrap();
    let mono = s.solver.solve_monolithic(&prev, &loads, 0.25).unwrap();
    let (sigma, u, xi) = s.solver.split_mech_step(&loads, &mono.p).unwrap();
    assert!(relative_distance(&sigma, &mono.sigma) < 1e-9);
    assert!(relative_distance(&u, &mono.u) < 1e-9);
    assert!(relative_distance(&xi, &mono.xi) < 1e-9);
}

#[test]
fn converged_start_takes_one_iteration() {
    let mut s = setup(4, 1.0);
    let prev = FieldState::zeros(&s.disc.layout(), 0.0);
    let loads = assemble_loads(&s.disc, &ZeroData, 0.25).unwrap();
    let (state, iters) = s.solver.run_split(&prev, &loads, &SplitConfig::default(), 0.25).unwrap();
    assert_eq!(iters, 1);
    assert!(state.to_vector().iter().all(|v| *v == 0.0));
}

#[test]
fn tight_split_matches_monolithic() {
    let mut s = setup(8, 1.0);
    let prev = FieldState::zeros(&s.disc.layout(), 0.0);
    let loads = assemble_loads(&s.disc, &s.problem, 0.25).unwrap();
    let mono = s.solver.solve_monolithic(&prev, &loads, 0.25).unwrap();
    let cfg = SplitConfig { tol: 1e-12, ..SplitConfig::default() };
    let (split, _) = s.solver.run_split(&prev, &loads, &cfg, 0.25).unwrap();
    for (a, b) in [(&split.sigma, &mono.sigma), (&split.p, &mono.p), (&split.w, &mono.w), (&split.u, &mono.u), (&split.xi, &mono.xi)] {
        assert!(relative_distance(a, b) < 1e-8);
    }
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let mut s = setup(4, 0.01);
    let prev = FieldState::zeros(&s.disc.layout(), 0.0);
    let loads = assemble_loads(&s.disc, &s.problem, 0.25).unwrap();
    let cfg = SplitConfig { max_iter: 2, ..SplitConfig::default() };
    match s.solver.run_split(&prev, &loads, &cfg, 0.25) {
        Err(Error::NonConvergence { iterations, flow_update, mech_update }) => {
            assert_eq!(iterations, 2);
            assert!(flow_update > cfg.tol || mech_update > cfg.tol);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn observer_sees_every_iterate() {
    let mut s = setup(4, 1.0);
    let prev = FieldState::zeros(&s.disc.layout(), 0.0);
    let loads = assemble_loads(&s.disc, &s.problem, 0.25).unwrap();
    let mut seen = Vec::new();
    let (_, iters) = s
        .solver
        .run_split_observed(&prev, &loads, &SplitConfig::default(), 0.25, |i, st| {
            assert_eq!(st.t, 0.25);
            seen.push(i)
        })
        .unwrap();
    assert_eq!(seen, (1..=iters).collect::<Vec<_>>());
}

#[test]
fn time_march_counts_steps() {
    let mut s = setup(4, 1.0);
    let init = s.problem.initial_state(&s.disc.layout());
    let mut times = Vec::new();
    let (last, stats) = time_march(&mut s.solver, &s.disc, &s.problem, init, 4, Scheme::Split(SplitConfig::default()), |st| times.push(st.t)).unwrap();
    assert_eq!(times, vec![0.25, 0.5, 0.75, 1.0]);
    assert_eq!(last.t, 1.0);
    assert_eq!(stats.counts.len(), 4);
    assert!(stats.converged.iter().all(|c| *c));
}

#[test]
fn reference_iteration_averages() {
    let pb = ManufacturedProblem::from_gammas(1.0, 1.0);
    let off = run_manufactured(&pb, 16, 1, 0.25, 4, Scheme::Split(SplitConfig::default())).unwrap();
    assert_eq!(off.stats.average(), 7.25);
    let beta = beta_value(BetaStrategy::Tuned, &pb.params);
    let tuned = run_manufactured(&pb, 16, 1, 0.25, 4, Scheme::Split(SplitConfig::with_beta(beta))).unwrap();
    assert_eq!(tuned.stats.average(), 6.0);
}

#[test]
fn split_and_monolithic_errors_agree() {
    let pb = ManufacturedProblem::from_gammas(1.0, 1.0);
    let mono = run_manufactured(&pb, 16, 1, 0.25, 1, Scheme::Monolithic).unwrap();
    let cfg = SplitConfig { tol: 1e-12, ..SplitConfig::default() };
    let split = run_manufactured(&pb, 16, 1, 0.25, 1, Scheme::Split(cfg)).unwrap();
    assert!((mono.report.l2("p") - split.report.l2("p")).abs() < 1e-8);
}
