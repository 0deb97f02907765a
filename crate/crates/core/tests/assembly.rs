use biot_core::assembly::{
    assemble_loads, assemble_system, compliance_identity_energy, EssentialSpec, FieldState, ProblemData, SaddleSystem,
    ZeroData,
};
use biot_core::mesh::{BoundaryTag, Mesh};
use biot_core::params::PhysicalParams;
use biot_core::spaces::Discretization;
use biot_core::sparse::LinearSolveHandle;
use biot_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disc(n: usize, k: usize) -> Discretization {
    Discretization::new(Mesh::build_structured(n, n, 1.0, 1.0).unwrap(), k).unwrap()
}

fn system(d: &Discretization, params: PhysicalParams) -> SaddleSystem {
    assemble_system(d, &params, 0.25, &EssentialSpec::default()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stacked stress coefficients of the field with rows `r1`, `r2`.
fn stress(d: &Discretization, r1: impl Fn([f64; 2]) -> [f64; 2], r2: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut s = d.stress.interpolate_vector(&d.mesh, r1);
    s.extend(d.stress.interpolate_vector(&d.mesh, r2));
    s
}

#[test]
fn compliance_of_identity_matches_closed_form() {
    let params = PhysicalParams { mu: 0.7, lambda: 1.9, alpha: 1.0, c0: 0.1, kappa: 1.0 };
    let d = disc(1, 1);
    let sys = system(&d, params);
    let id = stress(&d, |_| [1.0, 0.0], |_| [0.0, 1.0]);
    let energy = dot(&id, &sys.a_sigma.matvec(&id));
    let expected = 2.0 / (2.0 * params.mu + 2.0 * params.lambda);
    assert!((energy - expected).abs() < 1e-12, "{energy} vs {expected}");
    assert!((compliance_identity_energy(&params) - expected).abs() < 1e-14);
}

#[test]
fn compliance_is_symmetric_positive_semidefinite() {
    let d = disc(3, 2);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 100.0));
    assert!(sys.a_sigma.asymmetry() < 1e-12 * sys.a_sigma.max_abs());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let x: Vec<f64> = (0..sys.num_stress()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(dot(&x, &sys.a_sigma.matvec(&x)) >= -1e-12);
    }
}

#[test]
fn trace_of_identity_integrates_to_dimension() {
    let d = disc(2, 1);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 1.0));
    let id = stress(&d, |_| [1.0, 0.0], |_| [0.0, 1.0]);
    let one = d.pressure.interpolate_scalar(&d.mesh, |_| 1.0);
    assert!((dot(&one, &sys.trace.matvec(&id)) - 2.0).abs() < 1e-12);
}

#[test]
fn skew_coupling_vanishes_on_symmetric_stress() {
    let d = disc(3, 1);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 1.0));
    let sym = stress(&d, |x| [x[0] + 2.0, x[1] - 1.0], |x| [x[1] - 1.0, 3.0 * x[0]]);
    let r = sys.b_skw.matvec(&sym);
    assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");
}

#[test]
fn skew_coupling_sign_on_rotation_field() {
    // τ = [[0, 1], [−1, 0]]: ∫ ξ (τ₂₁ − τ₁₂) = −2 for ξ = 1
    let d = disc(2, 1);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 1.0));
    let skew = stress(&d, |_| [0.0, 1.0], |_| [-1.0, 0.0]);
    let one = d.rotation.interpolate_scalar(&d.mesh, |_| 1.0);
    assert!((dot(&one, &sys.b_skw.matvec(&skew)) + 2.0).abs() < 1e-12);
}

#[test]
fn divergence_blocks_integrate_known_fields() {
    let d = disc(2, 1);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 1.0));
    // div of rows (x, 0) and (0, 3y) is (1, 3)
    let s = stress(&d, |x| [x[0], 0.0], |x| [0.0, 3.0 * x[1]]);
    let nu = d.displacement.num_dofs;
    let bd = sys.b_div.matvec(&s);
    let one = d.displacement.interpolate_scalar(&d.mesh, |_| 1.0);
    assert!((dot(&one, &bd[..nu]) - 1.0).abs() < 1e-12);
    assert!((dot(&one, &bd[nu..]) - 3.0).abs() < 1e-12);

    let w = d.velocity.interpolate_vector(&d.mesh, |x| [x[0], x[1]]);
    let q = d.pressure.interpolate_scalar(&d.mesh, |_| 1.0);
    assert!((dot(&q, &sys.b_w.matvec(&w)) - 2.0).abs() < 1e-12);
}

#[test]
fn monolithic_matrix_is_symmetric() {
    let d = disc(3, 1);
    let spec = EssentialSpec {
        stress_row1: vec![BoundaryTag::Top],
        stress_row2: vec![BoundaryTag::Left, BoundaryTag::Right],
        velocity: vec![BoundaryTag::Bottom],
    };
    let sys = assemble_system(&d, &PhysicalParams::from_gammas(0.1, 10.0), 0.5, &spec).unwrap();
    for m in [sys.monolithic_raw(), sys.monolithic_matrix(), sys.flow_matrix(0.3), sys.mech_matrix()] {
        assert!(m.asymmetry() <= 1e-14 * m.max_abs());
    }
}

#[test]
fn zero_alpha_decouples_the_blocks() {
    let d = disc(2, 1);
    let params = PhysicalParams { alpha: 0.0, ..PhysicalParams::from_gammas(1.0, 1.0) };
    let sys = system(&d, params);
    let m = sys.monolithic_raw();
    let o = sys.layout.offsets;
    for (r, c, v) in m.iter() {
        let cross = (r >= o[2] && r < o[3] && c < o[2]) || (c >= o[2] && c < o[3] && r < o[2]);
        if cross {
            assert_eq!(v, 0.0);
        }
    }
}

#[test]
fn essential_rows_are_eliminated() {
    let d = disc(2, 1);
    let spec = EssentialSpec {
        stress_row1: vec![BoundaryTag::Right],
        stress_row2: vec![],
        velocity: vec![BoundaryTag::Left],
    };
    let sys = assemble_system(&d, &PhysicalParams::from_gammas(1.0, 1.0), 1.0, &spec).unwrap();
    assert_eq!(sys.essential_stress.len(), 2 * 2);
    assert_eq!(sys.essential_velocity.len(), 2 * 2);
    let m = sys.monolithic_matrix();
    let ess = sys.essential_global();
    for (r, c, v) in m.iter() {
        if ess.contains(&r) || ess.contains(&c) {
            assert_eq!(v, if r == c { 1.0 } else { 0.0 });
        }
    }
}

struct Gravity;

impl ProblemData for Gravity {
    fn body_force(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0, -1.0]
    }
}

#[test]
fn body_force_enters_with_negative_sign() {
    // −(g, v) with g = (0, −1) and v = (0, 1) gives +|Ω|
    let d = disc(2, 1);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 1.0));
    let loads = assemble_loads(&d, &Gravity, 1.0).unwrap();
    let rhs = sys.assemble_rhs(&FieldState::zeros(&sys.layout, 0.0), &loads).unwrap();
    let o = sys.layout.offsets;
    let one = d.displacement.interpolate_scalar(&d.mesh, |_| 1.0);
    assert!(dot(&one, &rhs[o[4]..o[5]]).abs() < 1e-14);
    assert!((dot(&one, &rhs[o[5]..o[6]]) - 1.0).abs() < 1e-12);
}

struct UnitTraces;

impl ProblemData for UnitTraces {
    fn boundary_displacement(&self, _tag: BoundaryTag, _x: [f64; 2], _t: f64) -> Option<[f64; 2]> {
        Some([1.0, 0.0])
    }

    fn boundary_pressure(&self, _tag: BoundaryTag, _x: [f64; 2], _t: f64) -> Option<f64> {
        Some(1.0)
    }
}

#[test]
fn boundary_loads_satisfy_divergence_theorem() {
    // ⟨1, z·n⟩ = ∫ div z for z = (x, y)
    let d = disc(3, 1);
    let loads = assemble_loads(&d, &UnitTraces, 0.0).unwrap();
    let z = d.velocity.interpolate_vector(&d.mesh, |x| [x[0], x[1]]);
    assert!((dot(&z, &loads.w_bc) - 2.0).abs() < 1e-12);
    let ns = d.stress.num_dofs;
    let s = stress(&d, |x| [x[0], x[1]], |x| [x[0], x[1]]);
    assert!((dot(&s[..ns], &loads.sigma_bc[..ns]) - 2.0).abs() < 1e-12);
    assert!(dot(&s[ns..], &loads.sigma_bc[ns..]).abs() < 1e-12);
}

#[test]
fn zero_data_gives_zero_solution() {
    let d = disc(3, 1);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 1.0));
    let loads = assemble_loads(&d, &ZeroData, 1.0).unwrap();
    let rhs = sys.assemble_rhs(&FieldState::zeros(&sys.layout, 0.0), &loads).unwrap();
    assert!(rhs.iter().all(|v| *v == 0.0));
    let x = LinearSolveHandle::factorize(&sys.monolithic_matrix(), "monolithic").unwrap().solve(&rhs).unwrap();
    assert!(x.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn mismatched_state_is_rejected() {
    let d = disc(2, 1);
    let sys = system(&d, PhysicalParams::from_gammas(1.0, 1.0));
    let loads = assemble_loads(&d, &ZeroData, 1.0).unwrap();
    let mut prev = FieldState::zeros(&sys.layout, 0.0);
    prev.p.pop();
    assert!(matches!(sys.assemble_rhs(&prev, &loads), Err(Error::InvalidArgument(_))));
}

#[test]
fn degenerate_cell_is_reported() {
    let mut mesh = Mesh::build_structured(1, 1, 1.0, 1.0).unwrap();
    let c = mesh.cells[0];
    mesh.vertices[c[2]] = mesh.vertices[c[0]];
    let d = Discretization::new(mesh, 1).unwrap();
    let r = assemble_system(&d, &PhysicalParams::from_gammas(1.0, 1.0), 1.0, &EssentialSpec::default());
    assert!(matches!(r, Err(Error::DegenerateCell { .. })));
}
