//! Assembly of the one-step fully-discrete system.
//!
//! Unknowns are ordered `[σ₁, σ₂, p, w, u_x, u_y, ξ]`, where σ₁, σ₂ are the
//! stress rows and `w = Δt·ŵ` is the time-integrated flux. The monolithic
//! matrix is symmetric indefinite:
//!
//! ```text
//! ⎡ Aσ    α̃Tᵀ   0        Bdᵀ  Bsᵀ ⎤
//! ⎢ α̃T    c̃0M   Bw       0    0   ⎥
//! ⎢ 0     Bwᵀ   −Aw/Δt   0    0   ⎥
//! ⎢ Bd    0     0        0    0   ⎥
//! ⎣ Bs    0     0        0    0   ⎦
//! ```

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::params::{PhysicalParams, DIM};
use crate::ref_elements::{gauss_legendre, quadrature_rule, QuadratureRule};
use crate::spaces::{CellGeometry, Discretization, DofMap, SpaceLayout};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Boundary sides carrying homogeneous essential normal-trace conditions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EssentialSpec {
    pub stress_row1: Vec<BoundaryTag>,
    pub stress_row2: Vec<BoundaryTag>,
    pub velocity: Vec<BoundaryTag>,
}

/// Sources and natural boundary data of a problem. Defaults are zero.
pub trait ProblemData {
    /// Volumetric fluid source `f`.
    fn source(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }

    /// Body force `g` in `−div σ = g`.
    fn body_force(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }

    /// Displacement datum on a side where the stress trace is natural;
    /// `None` means zero.
    fn boundary_displacement(&self, _tag: BoundaryTag, _x: [f64; 2], _t: f64) -> Option<[f64; 2]> {
        None
    }

    /// Pressure datum on a side where the flux trace is natural; `None`
    /// means zero.
    fn boundary_pressure(&self, _tag: BoundaryTag, _x: [f64; 2], _t: f64) -> Option<f64> {
        None
    }
}

/// Problem with all data zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroData;

impl ProblemData for ZeroData {}

/// Coefficient vectors of all fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    /// Row 1 followed by row 2.
    pub sigma: Vec<f64>,
    pub p: Vec<f64>,
    /// Time-integrated flux `Δt·ŵ`.
    pub w: Vec<f64>,
    /// x-component followed by y-component.
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
}

impl FieldState {
    pub fn zeros(layout: &SpaceLayout, t: f64) -> FieldState {
        let s = &layout.sizes;
        FieldState {
            t,
            sigma: vec![0.0; s[0] + s[1]],
            p: vec![0.0; s[2]],
            w: vec![0.0; s[3]],
            u: vec![0.0; s[4] + s[5]],
            xi: vec![0.0; s[6]],
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        [&self.sigma[..], &self.p, &self.w, &self.u, &self.xi].concat()
    }

    pub fn from_vector(layout: &SpaceLayout, v: &[f64], t: f64) -> FieldState {
        assert_eq!(v.len(), layout.total());
        let o = &layout.offsets;
        FieldState {
            t,
            sigma: v[o[0]..o[2]].to_vec(),
            p: v[o[2]..o[3]].to_vec(),
            w: v[o[3]..o[4]].to_vec(),
            u: v[o[4]..o[6]].to_vec(),
            xi: v[o[6]..o[7]].to_vec(),
        }
    }

    pub fn matches(&self, layout: &SpaceLayout) -> bool {
        let s = &layout.sizes;
        self.sigma.len() == s[0] + s[1]
            && self.p.len() == s[2]
            && self.w.len() == s[3]
            && self.u.len() == s[4] + s[5]
            && self.xi.len() == s[6]
    }
}

/// Sparse blocks of the one-step system. Blocks are stored without
/// essential conditions; the matrix builders eliminate them.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub layout: SpaceLayout,
    pub params: PhysicalParams,
    pub dt: f64,
    /// Compliance form, `2ns × 2ns`.
    pub a_sigma: CsrMatrix,
    /// Pressure mass matrix (`Ap = c̃0·mass_p`).
    pub mass_p: CsrMatrix,
    /// κ⁻¹-weighted velocity mass, not yet scaled by `1/Δt`.
    pub a_w: CsrMatrix,
    /// `∫ q tr τ`, `np × 2ns` (unscaled by α̃).
    pub trace: CsrMatrix,
    /// `∫ v·div τ`, `2nu × 2ns`.
    pub b_div: CsrMatrix,
    /// `∫ η (τ₂₁ − τ₁₂)`, `nξ × 2ns`.
    pub b_skw: CsrMatrix,
    /// `∫ q div z`, `np × nw`.
    pub b_w: CsrMatrix,
    /// Essential stress dofs, indices into the stacked stress vector.
    pub essential_stress: Vec<usize>,
    /// Essential velocity dofs.
    pub essential_velocity: Vec<usize>,
}

/// Reference tabulation of one space at the quadrature points.
struct Tab {
    /// RT: mapped later; Lagrange: final values.
    vals: Vec<Vec<[f64; 2]>>,
    scal: Vec<Vec<f64>>,
    divs: Vec<Vec<f64>>,
}

fn tabulate(map: &DofMap, rule: &QuadratureRule) -> Tab {
    let mut t = Tab {
        vals: Vec::new(),
        scal: Vec::new(),
        divs: Vec::new(),
    };
    for p in &rule.points {
        if map.is_hdiv() {
            t.vals.push(map.basis.eval_vector(*p));
            t.divs.push(map.basis.eval_div(*p));
        } else {
            t.scal.push(map.basis.eval_scalar(*p));
        }
    }
    t
}

/// Physical RT values and divergences on cell `c` (signs applied).
fn map_rt(map: &DofMap, tab: &Tab, geo: &CellGeometry, c: usize) -> (Vec<Vec<[f64; 2]>>, Vec<Vec<f64>>) {
    let signs = map.cell_signs(c);
    let vals = tab
        .vals
        .iter()
        .map(|row| {
            row.iter()
                .zip(signs)
                .map(|(v, s)| {
                    let p = geo.piola(*v);
                    [s * p[0], s * p[1]]
                })
                .collect()
        })
        .collect();
    let divs = tab
        .divs
        .iter()
        .map(|row| row.iter().zip(signs).map(|(d, s)| s * d / geo.det).collect())
        .collect();
    (vals, divs)
}

fn check_cell(mesh: &Mesh, c: usize) -> Result<CellGeometry> {
    let geo = CellGeometry::new(mesh, c);
    if !(geo.det > 0.0) || !geo.det.is_finite() {
        return Err(Error::DegenerateCell { cell: c, det: geo.det });
    }
    Ok(geo)
}

/// Quadrature order for bilinear forms: `2k + 2` for the largest degree
/// present.
fn assembly_order(disc: &Discretization) -> usize {
    let kmax = [
        disc.stress.degree(),
        disc.velocity.degree(),
        disc.pressure.degree(),
        disc.displacement.degree(),
        disc.rotation.degree(),
    ]
    .into_iter()
    .max()
    .unwrap();
    (2 * kmax + 2).min(crate::ref_elements::quadrature::MAX_ORDER)
}

pub fn assemble_system(
    disc: &Discretization,
    params: &PhysicalParams,
    dt: f64,
    essential: &EssentialSpec,
) -> Result<SaddleSystem> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    params.validate()?;
    let mesh = &disc.mesh;
    let layout = disc.layout();
    let ns = disc.stress.num_dofs;
    let np = disc.pressure.num_dofs;
    let nw = disc.velocity.num_dofs;
    let nu = disc.displacement.num_dofs;
    let nx = disc.rotation.num_dofs;

    let rule = quadrature_rule(assembly_order(disc))?;
    let ts = tabulate(&disc.stress, &rule);
    let tw = tabulate(&disc.velocity, &rule);
    let tp = tabulate(&disc.pressure, &rule);
    let tu = tabulate(&disc.displacement, &rule);
    let tx = tabulate(&disc.rotation, &rule);

    let inv_2mu = 1.0 / (2.0 * params.mu);
    let c_lam = params.lambda / params.bulk_modulus_2d();
    let inv_kappa = 1.0 / params.kappa;

    let mut a_sigma = TripletBuilder::new(2 * ns, 2 * ns);
    let mut mass_p = TripletBuilder::new(np, np);
    let mut a_w = TripletBuilder::new(nw, nw);
    let mut trace = TripletBuilder::new(np, 2 * ns);
    let mut b_div = TripletBuilder::new(2 * nu, 2 * ns);
    let mut b_skw = TripletBuilder::new(nx, 2 * ns);
    let mut b_w = TripletBuilder::new(np, nw);

    for c in 0..mesh.num_cells() {
        let geo = check_cell(mesh, c)?;
        let (sv, sd) = map_rt(&disc.stress, &ts, &geo, c);
        let (wv, wd) = map_rt(&disc.velocity, &tw, &geo, c);
        let gs = disc.stress.cell_dofs(c);
        let gw = disc.velocity.cell_dofs(c);
        let gp = disc.pressure.cell_dofs(c);
        let gu = disc.displacement.cell_dofs(c);
        let gx = disc.rotation.cell_dofs(c);

        let (ls, lw, lp, lu, lx) = (gs.len(), gw.len(), gp.len(), gu.len(), gx.len());
        let mut k_s = vec![0.0; 4 * ls * ls];
        let mut k_p = vec![0.0; lp * lp];
        let mut k_w = vec![0.0; lw * lw];
        let mut k_tr = vec![0.0; lp * 2 * ls];
        let mut k_bw = vec![0.0; lp * lw];
        let mut k_bd = vec![0.0; lu * ls];
        let mut k_sk = vec![0.0; lx * 2 * ls];

        for (q, wq) in rule.weights.iter().enumerate() {
            let dx = wq * geo.det;
            let (phi, div) = (&sv[q], &sd[q]);
            for i in 0..ls {
                for j in 0..ls {
                    let dot = phi[i][0] * phi[j][0] + phi[i][1] * phi[j][1];
                    for r in 0..2 {
                        for s in 0..2 {
                            let diag = if r == s { dot } else { 0.0 };
                            k_s[((r * ls + i) * 2 + s) * ls + j] +=
                                inv_2mu * (diag - c_lam * phi[i][r] * phi[j][s]) * dx;
                        }
                    }
                }
            }
            for a in 0..lp {
                let qa = tp.scal[q][a] * dx;
                for b in 0..lp {
                    k_p[a * lp + b] += qa * tp.scal[q][b];
                }
                for i in 0..ls {
                    k_tr[a * 2 * ls + i] += qa * phi[i][0];
                    k_tr[a * 2 * ls + ls + i] += qa * phi[i][1];
                }
                for i in 0..lw {
                    k_bw[a * lw + i] += qa * wd[q][i];
                }
            }
            for i in 0..lw {
                for j in 0..lw {
                    let dot = wv[q][i][0] * wv[q][j][0] + wv[q][i][1] * wv[q][j][1];
                    k_w[i * lw + j] += inv_kappa * dot * dx;
                }
            }
            for a in 0..lu {
                let va = tu.scal[q][a] * dx;
                for i in 0..ls {
                    k_bd[a * ls + i] += va * div[i];
                }
            }
            for a in 0..lx {
                let ea = tx.scal[q][a] * dx;
                for i in 0..ls {
                    // τ₂₁ − τ₁₂: row 2's x-component minus row 1's y-component
                    k_sk[a * 2 * ls + i] -= ea * phi[i][1];
                    k_sk[a * 2 * ls + ls + i] += ea * phi[i][0];
                }
            }
        }

        let stacked = |i: usize| if i < ls { gs[i] } else { ns + gs[i - ls] };
        for i in 0..2 * ls {
            for j in 0..2 * ls {
                let v = k_s[i * 2 * ls + j];
                if v != 0.0 {
                    a_sigma.push(stacked(i), stacked(j), v);
                }
            }
        }
        for a in 0..lp {
            for b in 0..lp {
                mass_p.push(gp[a], gp[b], k_p[a * lp + b]);
            }
            for i in 0..2 * ls {
                trace.push(gp[a], stacked(i), k_tr[a * 2 * ls + i]);
            }
            for i in 0..lw {
                b_w.push(gp[a], gw[i], k_bw[a * lw + i]);
            }
        }
        for i in 0..lw {
            for j in 0..lw {
                a_w.push(gw[i], gw[j], k_w[i * lw + j]);
            }
        }
        for a in 0..lu {
            for i in 0..ls {
                let v = k_bd[a * ls + i];
                b_div.push(gu[a], gs[i], v);
                b_div.push(nu + gu[a], ns + gs[i], v);
            }
        }
        for a in 0..lx {
            for i in 0..2 * ls {
                b_skw.push(gx[a], stacked(i), k_sk[a * 2 * ls + i]);
            }
        }
    }

    let mut essential_stress: Vec<usize> = disc
        .stress
        .essential_dofs(mesh, &essential.stress_row1)?
        .into_iter()
        .collect();
    essential_stress.extend(
        disc.stress
            .essential_dofs(mesh, &essential.stress_row2)?
            .into_iter()
            .map(|d| ns + d),
    );
    let essential_velocity = disc
        .velocity
        .essential_dofs(mesh, &essential.velocity)?
        .into_iter()
        .collect();

    Ok(SaddleSystem {
        layout,
        params: *params,
        dt,
        a_sigma: a_sigma.build(),
        mass_p: mass_p.build(),
        a_w: a_w.build(),
        trace: trace.build(),
        b_div: b_div.build(),
        b_skw: b_skw.build(),
        b_w: b_w.build(),
        essential_stress,
        essential_velocity,
    })
}

/// Source and boundary integrals at one time level, before time-lag terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVectors {
    /// `⟨u_D, τ n⟩`, stacked by stress row.
    pub sigma_bc: Vec<f64>,
    /// `(f, q)`
    pub p_source: Vec<f64>,
    /// `⟨p_D, z·n⟩`
    pub w_bc: Vec<f64>,
    /// `(g, v)`, stacked by component.
    pub u_source: Vec<f64>,
}

fn outward_normal(tag: BoundaryTag) -> [f64; 2] {
    match tag {
        BoundaryTag::Left => [-1.0, 0.0],
        BoundaryTag::Right => [1.0, 0.0],
        BoundaryTag::Bottom => [0.0, -1.0],
        BoundaryTag::Top => [0.0, 1.0],
    }
}

pub fn assemble_loads(disc: &Discretization, data: &dyn ProblemData, t: f64) -> Result<LoadVectors> {
    let mesh = &disc.mesh;
    let ns = disc.stress.num_dofs;
    let nu = disc.displacement.num_dofs;
    let mut loads = LoadVectors {
        sigma_bc: vec![0.0; 2 * ns],
        p_source: vec![0.0; disc.pressure.num_dofs],
        w_bc: vec![0.0; disc.velocity.num_dofs],
        u_source: vec![0.0; 2 * nu],
    };

    let rule = quadrature_rule(assembly_order(disc))?;
    let tp = tabulate(&disc.pressure, &rule);
    let tu = tabulate(&disc.displacement, &rule);
    for c in 0..mesh.num_cells() {
        let geo = check_cell(mesh, c)?;
        let gp = disc.pressure.cell_dofs(c);
        let gu = disc.displacement.cell_dofs(c);
        for (q, (pt, wq)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = mesh.to_physical(c, *pt);
            let dx = wq * geo.det;
            let f = data.source(x, t);
            if f != 0.0 {
                for (a, &ga) in gp.iter().enumerate() {
                    loads.p_source[ga] += f * tp.scal[q][a] * dx;
                }
            }
            let g = data.body_force(x, t);
            if g != [0.0; 2] {
                for (a, &ga) in gu.iter().enumerate() {
                    loads.u_source[ga] += g[0] * tu.scal[q][a] * dx;
                    loads.u_source[nu + ga] += g[1] * tu.scal[q][a] * dx;
                }
            }
        }
    }

    let k = disc.stress.degree().max(disc.velocity.degree());
    let (gx, gw) = gauss_legendre(k + 2);
    for (e, tag) in mesh.boundary_edges() {
        let c = mesh.edge_cells[e][0].expect("boundary edge has a cell");
        let geo = check_cell(mesh, c)?;
        let n = outward_normal(tag);
        let len = mesh.edge_length(e);
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        for (s, ws) in gx.iter().zip(&gw) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let r = mesh.to_reference(c, x);
            let ds = ws * len;
            if let Some(ud) = data.boundary_displacement(tag, x, t) {
                let vals = disc.stress.basis.eval_vector(r);
                for ((v, &g), &sg) in vals.iter().zip(disc.stress.cell_dofs(c)).zip(disc.stress.cell_signs(c)) {
                    let p = geo.piola(*v);
                    let vn = sg * (p[0] * n[0] + p[1] * n[1]);
                    loads.sigma_bc[g] += ud[0] * vn * ds;
                    loads.sigma_bc[ns + g] += ud[1] * vn * ds;
                }
            }
            if let Some(pd) = data.boundary_pressure(tag, x, t) {
                let vals = disc.velocity.basis.eval_vector(r);
                for ((v, &g), &sg) in vals
                    .iter()
                    .zip(disc.velocity.cell_dofs(c))
                    .zip(disc.velocity.cell_signs(c))
                {
                    let p = geo.piola(*v);
                    loads.w_bc[g] += pd * sg * (p[0] * n[0] + p[1] * n[1]) * ds;
                }
            }
        }
    }
    Ok(loads)
}

impl SaddleSystem {
    pub fn num_stress(&self) -> usize {
        self.layout.sizes[0] + self.layout.sizes[1]
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.params.derive().alpha_tilde
    }

    pub fn c0_tilde(&self) -> f64 {
        self.params.derive().c0_tilde
    }

    /// Essential dofs in monolithic numbering.
    pub fn essential_global(&self) -> Vec<usize> {
        let ow = self.layout.offsets[3];
        let mut out = self.essential_stress.clone();
        out.extend(self.essential_velocity.iter().map(|d| ow + d));
        out
    }

    /// Monolithic matrix with essential rows/columns eliminated.
    pub fn monolithic_matrix(&self) -> CsrMatrix {
        self.monolithic_raw().eliminate(&self.essential_global())
    }

    /// Monolithic matrix before elimination.
    pub fn monolithic_raw(&self) -> CsrMatrix {
        let o = &self.layout.offsets;
        let n = self.layout.total();
        let at = self.alpha_tilde();
        let mut b = TripletBuilder::new(n, n);
        b.add_block(0, 0, &self.a_sigma, 1.0);
        b.add_block(o[2], 0, &self.trace, at);
        b.add_block_transposed(0, o[2], &self.trace, at);
        b.add_block(o[2], o[2], &self.mass_p, self.c0_tilde());
        b.add_block(o[2], o[3], &self.b_w, 1.0);
        b.add_block_transposed(o[3], o[2], &self.b_w, 1.0);
        b.add_block(o[3], o[3], &self.a_w, -1.0 / self.dt);
        b.add_block(o[4], 0, &self.b_div, 1.0);
        b.add_block_transposed(0, o[4], &self.b_div, 1.0);
        b.add_block(o[6], 0, &self.b_skw, 1.0);
        b.add_block_transposed(0, o[6], &self.b_skw, 1.0);
        b.build()
    }

    /// Flow block `[[Ap − βM, Bw], [Bwᵀ, −Aw/Δt]]` on `(p, w)`.
    pub fn flow_matrix(&self, beta: f64) -> CsrMatrix {
        let np = self.layout.sizes[2];
        let n = np + self.layout.sizes[3];
        let mut b = TripletBuilder::new(n, n);
        b.add_block(0, 0, &self.mass_p, self.c0_tilde() - beta);
        b.add_block(0, np, &self.b_w, 1.0);
        b.add_block_transposed(np, 0, &self.b_w, 1.0);
        b.add_block(np, np, &self.a_w, -1.0 / self.dt);
        let ess: Vec<usize> = self.essential_velocity.iter().map(|d| np + d).collect();
        b.build().eliminate(&ess)
    }

    /// Elasticity block `[[Aσ, Bdᵀ, Bsᵀ], [Bd, 0, 0], [Bs, 0, 0]]` on `(σ, u, ξ)`.
    pub fn mech_matrix(&self) -> CsrMatrix {
        let ns2 = self.num_stress();
        let nu2 = self.b_div.nrows;
        let n = ns2 + nu2 + self.b_skw.nrows;
        let mut b = TripletBuilder::new(n, n);
        b.add_block(0, 0, &self.a_sigma, 1.0);
        b.add_block(ns2, 0, &self.b_div, 1.0);
        b.add_block_transposed(0, ns2, &self.b_div, 1.0);
        b.add_block(ns2 + nu2, 0, &self.b_skw, 1.0);
        b.add_block_transposed(0, ns2 + nu2, &self.b_skw, 1.0);
        b.build().eliminate(&self.essential_stress)
    }

    /// Monolithic right-hand side: loads plus time-lag terms from `prev`.
    pub fn assemble_rhs(&self, prev: &FieldState, loads: &LoadVectors) -> Result<Vec<f64>> {
        if !prev.matches(&self.layout) {
            return Err(Error::InvalidArgument("previous state does not match the layout".into()));
        }
        let o = &self.layout.offsets;
        let mut rhs = vec![0.0; self.layout.total()];
        rhs[..o[2]].copy_from_slice(&loads.sigma_bc);
        let pr = self.pressure_rhs(prev, loads);
        rhs[o[2]..o[3]].copy_from_slice(&pr);
        rhs[o[3]..o[4]].copy_from_slice(&loads.w_bc);
        for (r, g) in rhs[o[4]..o[6]].iter_mut().zip(&loads.u_source) {
            *r = -g;
        }
        for d in self.essential_global() {
            rhs[d] = 0.0;
        }
        Ok(rhs)
    }

    /// `Δt(f, q) + α̃(tr σⁿ⁻¹, q) + c̃0(pⁿ⁻¹, q)`
    pub fn pressure_rhs(&self, prev: &FieldState, loads: &LoadVectors) -> Vec<f64> {
        let tr = self.trace.matvec(&prev.sigma);
        let mp = self.mass_p.matvec(&prev.p);
        let (at, ct) = (self.alpha_tilde(), self.c0_tilde());
        loads
            .p_source
            .iter()
            .zip(tr.iter().zip(&mp))
            .map(|(f, (t, m))| self.dt * f + at * t + ct * m)
            .collect()
    }
}

/// `𝒜I : I` for the compliance form, equal to `d/(2μ + dλ)`.
pub fn compliance_identity_energy(params: &PhysicalParams) -> f64 {
    let c_lam = params.lambda / params.bulk_modulus_2d();
    (DIM - c_lam * DIM * DIM) / (2.0 * params.mu)
}
