use biot_core::assembly::ProblemData;
use biot_core::manufactured::{run_manufactured, ExactSolution, ManufacturedProblem};
use biot_core::params::PhysicalParams;
use biot_core::solver::Scheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn problem() -> ManufacturedProblem {
    ManufacturedProblem::new(PhysicalParams { mu: 0.8, lambda: 2.5, alpha: 0.7, c0: 0.3, kappa: 1.7 })
}

fn points(n: usize) -> Vec<([f64; 2], f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..n)
        .map(|_| ([rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)], rng.gen_range(0.1..1.0)))
        .collect()
}

/// Central difference of `f` along coordinate `i`.
fn dx(f: impl Fn([f64; 2]) -> f64, x: [f64; 2], i: usize) -> f64 {
    let (mut a, mut b) = (x, x);
    a[i] += H;
    b[i] -= H;
    (f(a) - f(b)) / (2.0 * H)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn pressure_at_centre() {
    let p = ManufacturedProblem::from_gammas(1.0, 1.0);
    assert!((p.pressure([0.5, 0.5], 1.0) - 1.0 / 16.0).abs() < 1e-15);
}

#[test]
fn all_fields_vanish_on_the_boundary() {
    let pb = problem();
    for s in [0.0, 0.3, 0.77, 1.0] {
        for x in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
            assert_eq!(pb.pressure(x, 0.6), 0.0);
            assert_eq!(pb.displacement(x, 0.6), [0.0, 0.0]);
        }
    }
}

#[test]
fn stress_is_the_effective_stress_minus_pore_pressure() {
    let pb = problem();
    let PhysicalParams { mu, lambda, alpha, .. } = pb.params;
    for (x, t) in points(20) {
        let du = |c: usize, i: usize| dx(|y| pb.displacement(y, t)[c], x, i);
        let div = du(0, 0) + du(1, 1);
        let p = pb.pressure(x, t);
        let s = pb.stress(x, t);
        assert!(close(s[0][0], 2.0 * mu * du(0, 0) + lambda * div - alpha * p, 1e-8));
        assert!(close(s[1][1], 2.0 * mu * du(1, 1) + lambda * div - alpha * p, 1e-8));
        assert!(close(s[0][1], mu * (du(0, 1) + du(1, 0)), 1e-8));
        assert_eq!(s[0][1], s[1][0]);
        assert!(close(pb.rotation(x, t), 0.5 * (du(1, 0) - du(0, 1)), 1e-8));
    }
}

#[test]
fn divergences_match_finite_differences() {
    let pb = problem();
    for (x, t) in points(20) {
        let d = pb.stress_div(x, t);
        for r in 0..2 {
            let fd = dx(|y| pb.stress(y, t)[r][0], x, 0) + dx(|y| pb.stress(y, t)[r][1], x, 1);
            assert!(close(d[r], fd, 1e-8));
        }
        let fd = dx(|y| pb.flux(y, t)[0], x, 0) + dx(|y| pb.flux(y, t)[1], x, 1);
        assert!(close(pb.flux_div(x, t), fd, 1e-8));
        for i in 0..2 {
            assert!(close(pb.flux(x, t)[i], -pb.params.kappa * dx(|y| pb.pressure(y, t), x, i), 1e-8));
        }
    }
}

#[test]
fn sources_satisfy_the_balance_laws() {
    let pb = problem();
    let PhysicalParams { alpha, c0, .. } = pb.params;
    for (x, t) in points(20) {
        let storage = |s: f64| {
            let div = dx(|y| pb.displacement(y, s)[0], x, 0) + dx(|y| pb.displacement(y, s)[1], x, 1);
            c0 * pb.pressure(x, s) + alpha * div
        };
        let dt = (storage(t + H) - storage(t - H)) / (2.0 * H);
        let div_w = dx(|y| pb.flux(y, t)[0], x, 0) + dx(|y| pb.flux(y, t)[1], x, 1);
        assert!(close(pb.source(x, t), dt + div_w, 1e-6));
        let g = pb.body_force(x, t);
        let d = pb.stress_div(x, t);
        assert_eq!(g, [-d[0], -d[1]]);
    }
}

#[test]
fn errors_do_not_depend_on_the_time_step() {
    let pb = ManufacturedProblem::from_gammas(1.0, 1.0);
    let errs: Vec<f64> = [(0.5, 2), (0.25, 4), (0.125, 8)]
        .iter()
        .map(|&(dt, n)| run_manufactured(&pb, 8, 1, dt, n, Scheme::Monolithic).unwrap().report.l2("p"))
        .collect();
    for e in &errs[1..] {
        assert!(((e - errs[0]) / errs[0]).abs() < 0.01, "{errs:?}");
    }
}

#[test]
fn second_order_convergence_in_all_fields() {
    let pb = ManufacturedProblem::from_gammas(1.0, 1.0);
    let coarse = run_manufactured(&pb, 4, 1, 0.25, 4, Scheme::Monolithic).unwrap().report;
    let fine = run_manufactured(&pb, 8, 1, 0.25, 4, Scheme::Monolithic).unwrap().report;
    for f in ["p", "u", "sigma", "w", "xi"] {
        let rate = (coarse.l2(f) / fine.l2(f)).log2();
        assert!(rate > 1.8, "{f}: {rate}");
    }
}

#[test]
fn third_order_convergence_for_quadratics() {
    let pb = ManufacturedProblem::from_gammas(1.0, 1.0);
    let coarse = run_manufactured(&pb, 4, 2, 0.25, 4, Scheme::Monolithic).unwrap().report;
    let fine = run_manufactured(&pb, 8, 2, 0.25, 4, Scheme::Monolithic).unwrap().report;
    for f in ["p", "u", "sigma", "w"] {
        let rate = (coarse.l2(f) / fine.l2(f)).log2();
        assert!(rate > 2.8, "{f}: {rate}");
    }
}
