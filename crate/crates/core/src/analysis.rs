//! Error norms, convergence rates, and numerical probes of the discrete
//! kernel and inf-sup structure of the constraint form
//! `ℬ((τ, q), (w, u, ξ)) = (q, div w) + (u, div τ) + (ξ, skw τ)`.

use std::io::{self, Write};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::assembly::{assemble_system, EssentialSpec, FieldState, SaddleSystem};
use crate::error::{Error, Result};
use crate::manufactured::ExactSolution;
use crate::params::PhysicalParams;
use crate::ref_elements::quadrature::MAX_ORDER;
use crate::ref_elements::quadrature_rule;
use crate::spaces::{CellGeometry, Discretization, DofMap};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub l2: f64,
    /// Full H(div) error for stress and flux.
    pub hdiv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub fields: Vec<FieldError>,
}

impl ErrorReport {
    pub fn get(&self, field: &str) -> Option<&FieldError> {
        self.fields.iter().find(|f| f.field == field)
    }

    pub fn l2(&self, field: &str) -> f64 {
        self.get(field).map_or(f64::NAN, |f| f.l2)
    }
}

/// Field values of a discrete state at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub p: f64,
    pub u: [f64; 2],
    pub sigma: [[f64; 2]; 2],
    /// Physical flux `w/Δt`.
    pub flux: [f64; 2],
    pub xi: f64,
}

/// Evaluates all fields of `state` at cell `c`, reference point `r`.
pub fn sample_at(disc: &Discretization, state: &FieldState, dt: f64, c: usize, r: [f64; 2]) -> PointSample {
    let mesh = &disc.mesh;
    let ns = disc.stress.num_dofs;
    let nu = disc.displacement.num_dofs;
    let w = disc.velocity.eval_vector(mesh, &state.w, c, r);
    PointSample {
        p: disc.pressure.eval_scalar(&state.p, c, r),
        u: [
            disc.displacement.eval_scalar(&state.u[..nu], c, r),
            disc.displacement.eval_scalar(&state.u[nu..], c, r),
        ],
        sigma: [
            disc.stress.eval_vector(mesh, &state.sigma[..ns], c, r),
            disc.stress.eval_vector(mesh, &state.sigma[ns..], c, r),
        ],
        flux: [w[0] / dt, w[1] / dt],
        xi: disc.rotation.eval_scalar(&state.xi, c, r),
    }
}

/// Evaluates all fields at a physical point (`None` outside the mesh).
pub fn sample_point(disc: &Discretization, state: &FieldState, dt: f64, x: [f64; 2]) -> Option<PointSample> {
    disc.mesh.locate(x).map(|(c, r)| sample_at(disc, state, dt, c, r))
}

/// L² errors of all fields and H(div) errors of stress and flux, with
/// quadrature of order `2k + 4`. The flux is compared as `w/Δt` against
/// the physical flux.
pub fn error_norms(
    disc: &Discretization,
    state: &FieldState,
    exact: &dyn ExactSolution,
    t: f64,
    dt: f64,
) -> Result<ErrorReport> {
    let mesh = &disc.mesh;
    let rule = quadrature_rule((2 * disc.k + 4).min(MAX_ORDER))?;
    let ns = disc.stress.num_dofs;
    let mut e = [0.0f64; 7]; // p, u, σ, div σ, w, div w, ξ
    for c in 0..mesh.num_cells() {
        let det = mesh.jacobian_det(c);
        for (r, wq) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.to_physical(c, *r);
            let dx = wq * det;
            let s = sample_at(disc, state, dt, c, *r);
            let sq = |a: f64| a * a;
            e[0] += dx * sq(s.p - exact.pressure(x, t));
            let u = exact.displacement(x, t);
            e[1] += dx * (sq(s.u[0] - u[0]) + sq(s.u[1] - u[1]));
            let sig = exact.stress(x, t);
            e[2] += dx * (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| sq(s.sigma[i][j] - sig[i][j])).sum::<f64>();
            let dsig = exact.stress_div(x, t);
            let d1 = disc.stress.eval_div(mesh, &state.sigma[..ns], c, *r);
            let d2 = disc.stress.eval_div(mesh, &state.sigma[ns..], c, *r);
            e[3] += dx * (sq(d1 - dsig[0]) + sq(d2 - dsig[1]));
            let w = exact.flux(x, t);
            e[4] += dx * (sq(s.flux[0] - w[0]) + sq(s.flux[1] - w[1]));
            let dw = disc.velocity.eval_div(mesh, &state.w, c, *r) / dt;
            e[5] += dx * sq(dw - exact.flux_div(x, t));
            e[6] += dx * sq(s.xi - exact.rotation(x, t));
        }
    }
    let e = e.map(f64::sqrt);
    Ok(ErrorReport {
        h: mesh.mesh_size(),
        fields: vec![
            FieldError { field: "p", l2: e[0], hdiv: None },
            FieldError { field: "u", l2: e[1], hdiv: None },
            FieldError { field: "sigma", l2: e[2], hdiv: Some(e[2].hypot(e[3])) },
            FieldError { field: "w", l2: e[4], hdiv: Some(e[4].hypot(e[5])) },
            FieldError { field: "xi", l2: e[6], hdiv: None },
        ],
    })
}

/// Rates `log(e_i/e_{i+1}) / log(h_i/h_{i+1})`; `None` where an error is 0.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument("eoc needs two or more matching errors and sizes".into()));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("mesh sizes must be strictly decreasing".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| {
            (e[0] > 0.0 && e[1] > 0.0).then(|| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        })
        .collect())
}

/// Writes `field,h,error_l2,error_hdiv,eoc`, grouped by field in level
/// order. The rate is the L² rate against the previous level.
pub fn write_error_csv(w: &mut impl Write, reports: &[ErrorReport]) -> io::Result<()> {
    writeln!(w, "field,h,error_l2,error_hdiv,eoc")?;
    let Some(first) = reports.first() else { return Ok(()) };
    for fe in &first.fields {
        let errs: Vec<f64> = reports.iter().map(|r| r.l2(fe.field)).collect();
        let hs: Vec<f64> = reports.iter().map(|r| r.h).collect();
        let rates = if reports.len() >= 2 { eoc(&errs, &hs).unwrap_or_default() } else { Vec::new() };
        for (i, r) in reports.iter().enumerate() {
            let f = r.get(fe.field).expect("same fields on every level");
            let hdiv = f.hdiv.map(|v| v.to_string()).unwrap_or_default();
            let rate = if i == 0 {
                String::new()
            } else {
                rates.get(i - 1).copied().flatten().map(|v| v.to_string()).unwrap_or_default()
            };
            writeln!(w, "{},{},{},{},{}", f.field, r.h, f.l2, hdiv, rate)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Structural probes

/// Gram matrices of the natural norms.
struct Grams {
    /// H(div) inner product of one stress row.
    stress_hdiv: CsrMatrix,
    velocity_hdiv: CsrMatrix,
    pressure: CsrMatrix,
    displacement: CsrMatrix,
    rotation: CsrMatrix,
}

fn hdiv_gram(disc: &Discretization, map: &DofMap) -> Result<CsrMatrix> {
    let mesh = &disc.mesh;
    let rule = quadrature_rule((2 * map.degree() + 2).min(MAX_ORDER))?;
    let mut b = TripletBuilder::new(map.num_dofs, map.num_dofs);
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let dofs = map.cell_dofs(c);
        let signs = map.cell_signs(c);
        for (r, wq) in rule.points.iter().zip(&rule.weights) {
            let dx = wq * geo.det;
            let vals: Vec<[f64; 2]> = map
                .basis
                .eval_vector(*r)
                .iter()
                .zip(signs)
                .map(|(v, s)| {
                    let p = geo.piola(*v);
                    [s * p[0], s * p[1]]
                })
                .collect();
            let divs: Vec<f64> = map.basis.eval_div(*r).iter().zip(signs).map(|(d, s)| s * d / geo.det).collect();
            for i in 0..dofs.len() {
                for j in 0..dofs.len() {
                    let v = vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1] + divs[i] * divs[j];
                    b.push(dofs[i], dofs[j], v * dx);
                }
            }
        }
    }
    Ok(b.build())
}

fn l2_gram(disc: &Discretization, map: &DofMap) -> Result<CsrMatrix> {
    let mesh = &disc.mesh;
    let rule = quadrature_rule((2 * map.degree()).clamp(1, MAX_ORDER))?;
    let mut b = TripletBuilder::new(map.num_dofs, map.num_dofs);
    for c in 0..mesh.num_cells() {
        let det = mesh.jacobian_det(c);
        let dofs = map.cell_dofs(c);
        for (r, wq) in rule.points.iter().zip(&rule.weights) {
            let vals = map.basis.eval_scalar(*r);
            for i in 0..dofs.len() {
                for j in 0..dofs.len() {
                    b.push(dofs[i], dofs[j], vals[i] * vals[j] * wq * det);
                }
            }
        }
    }
    Ok(b.build())
}

fn grams(disc: &Discretization) -> Result<Grams> {
    Ok(Grams {
        stress_hdiv: hdiv_gram(disc, &disc.stress)?,
        velocity_hdiv: hdiv_gram(disc, &disc.velocity)?,
        pressure: l2_gram(disc, &disc.pressure)?,
        displacement: l2_gram(disc, &disc.displacement)?,
        rotation: l2_gram(disc, &disc.rotation)?,
    })
}

/// Constraint blocks only depend on the spaces; assemble them with unit
/// material parameters and no essential conditions.
fn constraint_system(disc: &Discretization) -> Result<SaddleSystem> {
    assemble_system(disc, &PhysicalParams::from_gammas(1.0, 1.0), 1.0, &EssentialSpec::default())
}

/// Dense `ℬ` with rows on `V = (τ₁, τ₂, q)` and columns on
/// `Q = (w, u_x, u_y, ξ)`.
fn dense_b(sys: &SaddleSystem) -> DMatrix<f64> {
    let ns2 = sys.num_stress();
    let np = sys.mass_p.nrows;
    let nw = sys.a_w.nrows;
    let nu2 = sys.b_div.nrows;
    let nx = sys.b_skw.nrows;
    let mut b = DMatrix::zeros(ns2 + np, nw + nu2 + nx);
    for (r, c, v) in sys.b_div.iter() {
        b[(c, nw + r)] += v;
    }
    for (r, c, v) in sys.b_skw.iter() {
        b[(c, nw + nu2 + r)] += v;
    }
    for (r, c, v) in sys.b_w.iter() {
        b[(ns2 + r, c)] += v;
    }
    b
}

fn numerical_rank(s: &DVector<f64>, rel_tol: f64) -> usize {
    let smax = s.iter().fold(0.0f64, |m, v| m.max(*v));
    s.iter().filter(|v| **v > rel_tol * smax).count()
}

const RANK_TOL: f64 = 1e-10;
/// Relative eigenvalue threshold for null modes of `BᵀB` and `BBᵀ`.
const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    /// Dimension of `H_T`, the null space of `ℬ` on the `Q` side.
    pub dim_h: usize,
    /// `dim W − rank(q, div w)`: the number of discretely
    /// divergence-free velocities.
    pub dim_h_expected: usize,
    /// Largest displacement or rotation entry over an orthonormal basis
    /// of `H_T`.
    pub h_max_u_xi: f64,
    /// Largest `‖(q, div w)‖` over that basis.
    pub h_max_div: f64,
    /// Dimension of `K_T`, the null space on the `V` side.
    pub dim_k: usize,
    /// `dim Σ − rank(u, div τ)+(ξ, skw τ)  +  dim Q − rank(q, div w)`.
    pub dim_k_expected: usize,
    /// Largest pressure entry over an orthonormal basis of `K_T`.
    pub k_max_q: f64,
    /// Largest constraint residual over that basis.
    pub k_max_residual: f64,
    /// `rank(q, div w)` and `dim Q`; equal when `div W = Q`.
    pub div_rank: usize,
    pub pressure_dim: usize,
}

impl KernelReport {
    /// The numerical null spaces match the characterizations: `H_T`
    /// consists of divergence-free fluxes only, and `K_T` has zero pressure
    /// whenever `div W = Q`.
    pub fn matches_characterization(&self, tol: f64) -> bool {
        self.dim_h == self.dim_h_expected
            && self.dim_k == self.dim_k_expected
            && self.h_max_u_xi < tol
            && self.h_max_div < tol
            && self.k_max_residual < tol
            && self.k_max_q < tol
            && self.div_rank == self.pressure_dim
    }
}

/// Null spaces of the dense constraint matrix by SVD (small meshes only).
pub fn kernel_probe(sys: &SaddleSystem) -> Result<KernelReport> {
    let ns2 = sys.num_stress();
    let np = sys.mass_p.nrows;
    let nw = sys.a_w.nrows;
    let b = dense_b(sys);
    let nq = b.ncols();
    let smax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Q side: eigenvectors of BᵀB with negligible eigenvalues
    let btb = SymmetricEigen::try_new(b.transpose() * &b, 1e-14, 0)
        .ok_or_else(|| Error::Numerical("eigensolver did not converge".into()))?;
    // null modes of BᵀB sit at round-off of ‖B‖², far below the rest
    let lmax = btb.eigenvalues.amax();
    let thresh = NULL_TOL * lmax;
    let bw = sys.b_w.to_dense();
    let mut dim_h = 0;
    let (mut h_u, mut h_div) = (0.0f64, 0.0f64);
    for (i, ev) in btb.eigenvalues.iter().enumerate() {
        if *ev <= thresh {
            dim_h += 1;
            let v = btb.eigenvectors.column(i);
            h_u = h_u.max(v.rows(nw, nq - nw).amax());
            h_div = h_div.max((&bw * v.rows(0, nw)).norm());
        }
    }

    // V side: eigenvectors of BBᵀ
    let bbt = SymmetricEigen::try_new(&b * b.transpose(), 1e-14, 0)
        .ok_or_else(|| Error::Numerical("eigensolver did not converge".into()))?;
    let mut dim_k = 0;
    let (mut k_q, mut k_res) = (0.0f64, 0.0f64);
    for (i, ev) in bbt.eigenvalues.iter().enumerate() {
        if *ev <= thresh {
            dim_k += 1;
            let v = bbt.eigenvectors.column(i);
            k_q = k_q.max(v.rows(ns2, np).amax());
            k_res = k_res.max((b.transpose() * v).norm());
        }
    }

    let rank_bw = numerical_rank(&bw.clone().singular_values(), RANK_TOL);
    let mut be = DMatrix::<f64>::zeros(sys.b_div.nrows + sys.b_skw.nrows, ns2);
    for (r, c, v) in sys.b_div.iter() {
        be[(r, c)] += v;
    }
    for (r, c, v) in sys.b_skw.iter() {
        be[(sys.b_div.nrows + r, c)] += v;
    }
    let rank_be = numerical_rank(&be.singular_values(), RANK_TOL);
    Ok(KernelReport {
        dim_h,
        dim_h_expected: nw - rank_bw,
        h_max_u_xi: h_u,
        h_max_div: h_div / smax,
        dim_k,
        dim_k_expected: (ns2 - rank_be) + (np - rank_bw),
        k_max_q: k_q,
        k_max_residual: k_res / smax,
        div_rank: rank_bw,
        pressure_dim: np,
    })
}

pub fn kernel_probe_for(disc: &Discretization) -> Result<KernelReport> {
    kernel_probe(&constraint_system(disc)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfSupReport {
    /// `min(flow, pressure, elastic)`.
    pub beta: f64,
    /// Flux–pressure part, infimum over fluxes on the complement of `H_T`.
    pub beta_flow: f64,
    /// Flux–pressure part, infimum over pressures. Equal to `beta_flow`
    /// when `div W = Q`; zero when the pressure space is too rich.
    pub beta_pressure: f64,
    /// Stress–(displacement, rotation) part.
    pub beta_elastic: f64,
    /// Number of near-zero modes dropped as `H_T`.
    pub dropped: usize,
}

/// Smallest eigenvalues of `Bᵀ M_V⁻¹ B x = λ M_Q x`, symmetric, via
/// Cholesky of `M_Q`.
fn generalized_min_eigs(b: &DMatrix<f64>, m_v: &DMatrix<f64>, m_q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol_v = Cholesky::new(m_v.clone()).ok_or_else(|| Error::Numerical("V-side Gram matrix not SPD".into()))?;
    let s = b.transpose() * chol_v.solve(b);
    let chol_q = Cholesky::new(m_q.clone()).ok_or_else(|| Error::Numerical("Q-side Gram matrix not SPD".into()))?;
    let l = chol_q.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.ncols()))
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = &linv * s * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, 1e-14, 0).ok_or_else(|| Error::Numerical("eigensolver did not converge".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

fn block_diag(blocks: &[&CsrMatrix]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows).sum();
    let mut m = DMatrix::zeros(n, n);
    let mut o = 0;
    for b in blocks {
        for (r, c, v) in b.iter() {
            m[(o + r, o + c)] += v;
        }
        o += b.nrows;
    }
    m
}

/// Discrete inf-sup constant of `ℬ` on the complement of `H_T`, with
/// H(div) norms for stress and flux and L² norms otherwise.
///
/// `ℬ` is block diagonal (flux–pressure and stress–(u, ξ)), so the
/// generalized eigenproblem splits into independent parts. The `dim H_T`
/// smallest flux eigenvalues are dropped, with
/// `dim H_T = dim W − rank(q, div w)`. The pressure-side value has nothing
/// dropped, since `K_T` carries no pressure when `div W = Q`.
pub fn infsup_estimate(disc: &Discretization) -> Result<InfSupReport> {
    let sys = constraint_system(disc)?;
    let g = grams(disc)?;
    let ns = disc.stress.num_dofs;

    let bw = sys.b_w.to_dense();
    let rank_bw = numerical_rank(&bw.clone().singular_values(), RANK_TOL);
    let dropped = disc.velocity.num_dofs - rank_bw;
    let flow = generalized_min_eigs(&bw, &g.pressure.to_dense(), &g.velocity_hdiv.to_dense())?;
    let beta_flow = flow.get(dropped).copied().unwrap_or(f64::INFINITY).max(0.0).sqrt();
    let pres = generalized_min_eigs(&bw.transpose(), &g.velocity_hdiv.to_dense(), &g.pressure.to_dense())?;
    let beta_pressure = pres[0].max(0.0).sqrt();

    let nu = disc.displacement.num_dofs;
    let nx = disc.rotation.num_dofs;
    let mut be = DMatrix::zeros(2 * ns, 2 * nu + nx);
    for (r, c, v) in sys.b_div.iter() {
        be[(c, r)] += v;
    }
    for (r, c, v) in sys.b_skw.iter() {
        be[(c, 2 * nu + r)] += v;
    }
    let m_v = block_diag(&[&g.stress_hdiv, &g.stress_hdiv]);
    let m_q = block_diag(&[&g.displacement, &g.displacement, &g.rotation]);
    let el = generalized_min_eigs(&be, &m_v, &m_q)?;
    let beta_elastic = el[0].max(0.0).sqrt();
    Ok(InfSupReport {
        beta: beta_flow.min(beta_pressure).min(beta_elastic),
        beta_flow,
        beta_pressure,
        beta_elastic,
        dropped,
    })
}

/// Largest relative L² distance between the divergence of a flux basis
/// function and its cellwise projection onto the pressure space. Zero up
/// to round-off when `div W ⊆ Q`.
pub fn divergence_projection_residual(disc: &Discretization) -> Result<f64> {
    let mesh = &disc.mesh;
    let (vel, pres) = (&disc.velocity, &disc.pressure);
    let rule = quadrature_rule((2 * vel.degree().max(pres.degree()) + 2).min(MAX_ORDER))?;
    let np = pres.basis.dof_count();
    let mut worst = 0.0f64;
    for c in 0..mesh.num_cells() {
        let det = mesh.jacobian_det(c);
        let mut phis = Vec::with_capacity(rule.points.len());
        let mut divs = Vec::with_capacity(rule.points.len());
        for r in &rule.points {
            phis.push(DVector::from_vec(pres.basis.eval_scalar(*r)));
            divs.push(vel.basis.eval_div(*r).iter().map(|d| d / det).collect::<Vec<f64>>());
        }
        let weighted: Vec<f64> = rule.weights.iter().map(|w| w * det).collect();
        let mut mass = DMatrix::<f64>::zeros(np, np);
        for (q, w) in phis.iter().zip(&weighted) {
            mass += q * q.transpose() * *w;
        }
        let chol = Cholesky::new(mass).ok_or_else(|| Error::Numerical("pressure mass matrix not SPD".into()))?;
        for j in 0..vel.basis.dof_count() {
            let mut rhs = DVector::<f64>::zeros(np);
            for ((q, d), w) in phis.iter().zip(&divs).zip(&weighted) {
                rhs += q * (d[j] * w);
            }
            let coef = chol.solve(&rhs);
            let (mut res, mut norm) = (0.0, 0.0);
            for ((q, d), w) in phis.iter().zip(&divs).zip(&weighted) {
                res += (d[j] - q.dot(&coef)).powi(2) * w;
                norm += d[j].powi(2) * w;
            }
            if norm > 0.0 {
                worst = worst.max((res / norm).sqrt());
            }
        }
    }
    Ok(worst)
}
